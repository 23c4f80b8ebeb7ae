// mlcd: clustering, pseudo-labeling, training and evaluation from the shell.
//
// Exit codes: 0 success, 2 usage or format error, 3 numeric failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mlcd/clustering.hpp"
#include "mlcd/eval.hpp"
#include "mlcd/fmat.hpp"
#include "mlcd/keyvalue.hpp"
#include "mlcd/labeling.hpp"
#include "mlcd/parallel.hpp"
#include "mlcd/selftest.hpp"
#include "mlcd/synthetic.hpp"
#include "mlcd/trainer.hpp"

namespace fs = std::filesystem;
using namespace mlcd;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// One manifest per run, written next to the outputs.
class Manifest {
public:
    explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) { kv_["command"] = std::move(command); }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void input(const std::string& name, const fs::path& path) { kv_["input." + name] = path.string(); }
    void config(const KeyValues& cfg) {
        for (const auto& [k, v] : cfg) kv_["config." + k] = v;
    }
    void output(const std::string& name, const fs::path& path) {
        kv_["output." + name] = path.string();
        kv_["checksum." + name] = fmt::format("fnv1a64:{:016x}", fnv1a64(read_file_bytes(path)));
    }
    void write(const fs::path& path) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        kv_["wall_time_s"] = fmt::format("{:.3f}", secs);
        kv_["threads"] = std::to_string(num_threads());
        write_key_values(path, kv_);
    }

private:
    KeyValues kv_;
    std::chrono::steady_clock::time_point start_;
};

fs::path manifest_for(const fs::path& artifact) { return fs::path(artifact.string() + ".manifest.txt"); }

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

LabelAssignment read_labels_for(const fs::path& path, std::size_t n) {
    LabelAssignment labels = read_labels(path);
    if (labels.size() != n) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("{}: {} label lists for {} samples", path.string(), labels.size(), n));
    }
    return labels;
}

// ---- cluster ---------------------------------------------------------------

struct ClusterArgs {
    fs::path features, out, labels_out;
    std::size_t k = 0, iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::string init = "kmeanspp";
};

int cmd_cluster(const ClusterArgs& a) {
    Manifest m("cluster");
    const FeatureMatrix F = read_fmat(a.features);
    const KMeansOptions opt{a.k, a.iters, a.tol, a.seed, parse_init_method(a.init)};
    const KMeansResult r = kmeans_fit(F, opt);
    for (std::size_t t = 0; t < r.objective_history.size(); ++t) {
        fmt::print("iter {} objective {:.9g}{}\n", t, r.objective_history[t], r.repair_flags[t] ? " (repair)" : "");
    }
    fmt::print("final objective {:.9g}\n", r.centroids.final_objective);

    ensure_parent(a.out);
    write_fmat(a.out, r.centroids.centroids);
    m.input("features", a.features);
    m.config({{"k", std::to_string(a.k)},
              {"iters", std::to_string(a.iters)},
              {"tol", format_double(a.tol)},
              {"init", a.init}});
    m.set("seed", std::to_string(a.seed));
    m.set("iterations_run", std::to_string(r.centroids.iterations_run));
    m.set("final_objective", format_double(r.centroids.final_objective));
    m.output("centroids", a.out);
    if (!a.labels_out.empty()) {
        ensure_parent(a.labels_out);
        write_labels(a.labels_out, from_hard_labels(r.assignment.labels, static_cast<std::uint32_t>(a.k)));
        m.output("labels", a.labels_out);
    }
    m.write(manifest_for(a.out));
    return 0;
}

// ---- assign ----------------------------------------------------------------

struct AssignArgs {
    fs::path features, centroids, out;
    std::string mode = "topl";
    std::size_t l = 1;
    double tau = 0.5;
};

int cmd_assign(const AssignArgs& a) {
    Manifest m("assign");
    const FeatureMatrix F = read_fmat(a.features);
    const CentroidSet W{read_fmat(a.centroids), 0, 0, 0.0};
    LabelAssignment labels;
    KeyValues cfg{{"mode", a.mode}};
    if (a.mode == "topl") {
        labels = assign_top_l(F, W, a.l);
        cfg["l"] = std::to_string(a.l);
    } else if (a.mode == "threshold") {
        labels = assign_threshold(F, W, a.tau);
        cfg["tau"] = format_double(a.tau);
    } else {
        throw Error(ErrorCode::InvalidArgument, "--mode must be topl or threshold");
    }
    std::size_t total = 0;
    for (const auto& l : labels.lists) total += l.size();
    fmt::print("{} samples, {} classes, {:.4f} positives per sample\n", labels.size(), labels.k,
               static_cast<double>(total) / static_cast<double>(labels.size()));

    ensure_parent(a.out);
    write_labels(a.out, labels);
    m.input("features", a.features);
    m.input("centroids", a.centroids);
    m.config(cfg);
    m.output("labels", a.out);
    m.write(manifest_for(a.out));
    return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
    fs::path features, labels, config, out, centroids;
    std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& a) {
    Manifest m("train");
    KeyValues kv = read_key_values(a.config);
    for (const auto& o : a.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidArgument, "--set expects key=value, got '" + o + "'");
        kv[o.substr(0, eq)] = o.substr(eq + 1);
    }
    const ParsedConfig parsed = parse_train_config(kv);
    const TrainConfig& cfg = parsed.train;

    const FeatureMatrix F = read_fmat(a.features);
    const LabelAssignment labels = read_labels_for(a.labels, F.rows());
    if (labels.k != parsed.k) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("{} has k={}, config has k={}", a.labels.string(), labels.k, parsed.k));
    }
    std::optional<CentroidSet> warm;
    if (cfg.center_init == CenterInit::Warm) {
        if (a.centroids.empty()) throw Error(ErrorCode::InvalidArgument, "center_init=warm needs --centroids");
        warm = CentroidSet{read_fmat(a.centroids), 0, 0, 0.0};
    }

    const TrainResult r = train(F, labels, cfg, warm ? &*warm : nullptr);
    const MetricRecord& last = r.history.records.back();
    fmt::print("step {} loss {:.6g} mean_si {:.6f} mean_sj {:.6f}\n", last.step, last.loss, last.mean_si, last.mean_sj);

    fs::create_directories(a.out);
    save_checkpoint(a.out, r.state, cfg, parsed.l);
    write_file_bytes(a.out / "metrics.csv", r.history.to_csv());
    const KeyValues resolved = to_key_values(cfg, parsed.k, parsed.l);
    write_key_values(a.out / "config.txt", resolved);

    m.input("features", a.features);
    m.input("labels", a.labels);
    m.input("config", a.config);
    if (warm) m.input("centroids", a.centroids);
    m.config(resolved);
    m.set("seed", std::to_string(cfg.seed));
    for (const char* f : {"encoder.fmat", "centers.fmat", "checkpoint.txt", "metrics.csv", "config.txt"}) {
        m.output(fs::path(f).stem().string(), a.out / f);
    }
    m.write(a.out / "manifest.txt");
    return 0;
}

// ---- embed -----------------------------------------------------------------

struct EmbedArgs {
    fs::path checkpoint, features, out;
};

int cmd_embed(const EmbedArgs& a) {
    Manifest m("embed");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const FeatureMatrix E = embed(ck.encoder, read_fmat(a.features));
    ensure_parent(a.out);
    write_fmat(a.out, E);
    m.input("checkpoint", a.checkpoint);
    m.input("features", a.features);
    m.output("embeddings", a.out);
    m.write(manifest_for(a.out));
    fmt::print("{} x {} embeddings\n", E.rows(), E.cols());
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
    fs::path checkpoint, train, train_labels, test, test_labels, pseudo_labels, report;
    std::size_t knn_k = 5, probe_epochs = 200;
    double probe_lr = 1.0;
};

int cmd_eval(const EvalArgs& a) {
    Manifest m("eval");
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const FeatureMatrix train_E = embed(ck.encoder, read_fmat(a.train));
    const FeatureMatrix test_E = embed(ck.encoder, read_fmat(a.test));
    const auto ytr = read_labels_for(a.train_labels, train_E.rows()).primary();
    const auto yte = read_labels_for(a.test_labels, test_E.rows()).primary();

    EvalReport rep;
    rep.knn_k = a.knn_k;
    rep.knn_accuracy = knn_eval(train_E, ytr, test_E, yte, a.knn_k);
    rep.probe_accuracy = linear_probe(train_E, ytr, test_E, yte, ProbeOptions{a.probe_epochs, a.probe_lr}).test_accuracy;

    const FeatureMatrix centers = FeatureMatrix::normalized_rows(ck.centers);
    LabelAssignment pseudo;
    if (!a.pseudo_labels.empty()) {
        pseudo = read_labels_for(a.pseudo_labels, train_E.rows());
    } else {
        const std::size_t l = ck.manifest.contains("l") ? parse_u64("l", ck.manifest.at("l")) : 1;
        pseudo = assign_top_l(train_E, CentroidSet{centers, 0, 0, 0.0}, l);
    }
    rep.stats = similarity_stats(train_E, centers, pseudo);
    fmt::print("knn_accuracy {:.4f} probe_accuracy {:.4f} mean_si {:.6f} mean_sj {:.6f}\n", rep.knn_accuracy,
               rep.probe_accuracy, rep.stats.mean_si, rep.stats.mean_sj);

    ensure_parent(a.report);
    write_report(a.report, rep);
    m.input("checkpoint", a.checkpoint);
    m.input("train", a.train);
    m.input("train_labels", a.train_labels);
    m.input("test", a.test);
    m.input("test_labels", a.test_labels);
    if (!a.pseudo_labels.empty()) m.input("pseudo_labels", a.pseudo_labels);
    m.config({{"knn_k", std::to_string(a.knn_k)},
              {"probe_epochs", std::to_string(a.probe_epochs)},
              {"probe_lr", format_double(a.probe_lr)}});
    m.output("report", a.report);
    m.output("histogram", a.report.string() + ".hist.csv");
    m.write(manifest_for(a.report));
    return 0;
}

// ---- stats -----------------------------------------------------------------

struct StatsArgs {
    fs::path embeddings, centroids, labels, report;
};

int cmd_stats(const StatsArgs& a) {
    Manifest m("stats");
    const FeatureMatrix E = read_fmat(a.embeddings);
    const FeatureMatrix W = read_fmat(a.centroids);
    const LabelAssignment labels = read_labels_for(a.labels, E.rows());
    EvalReport rep;
    rep.has_accuracy = false;
    rep.stats = similarity_stats(E, W, labels);
    fmt::print("mean_si {:.6f} mean_sj {:.6f} positive_pairs {} negative_pairs {}\n", rep.stats.mean_si,
               rep.stats.mean_sj, rep.stats.positive_pairs, rep.stats.negative_pairs);
    ensure_parent(a.report);
    write_report(a.report, rep);
    m.input("embeddings", a.embeddings);
    m.input("centroids", a.centroids);
    m.input("labels", a.labels);
    m.output("report", a.report);
    m.output("histogram", a.report.string() + ".hist.csv");
    m.write(manifest_for(a.report));
    return 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
    SyntheticSpec spec;
    fs::path out, labels_out, concepts_out;
};

int cmd_synth(const SynthArgs& a) {
    Manifest m("synth");
    const SyntheticData d = make_multi_concept(a.spec);
    ensure_parent(a.out);
    write_fmat(a.out, d.features);
    m.config({{"directions", std::to_string(a.spec.num_directions)},
              {"dim", std::to_string(a.spec.dim)},
              {"samples", std::to_string(a.spec.samples)},
              {"max_concepts", std::to_string(a.spec.max_concepts)},
              {"noise", format_double(a.spec.noise)},
              {"shared", format_double(a.spec.shared_component)}});
    m.set("seed", std::to_string(a.spec.seed));
    m.output("features", a.out);
    const auto k = static_cast<std::uint32_t>(a.spec.num_directions);
    if (!a.labels_out.empty()) {
        ensure_parent(a.labels_out);
        write_labels(a.labels_out, from_hard_labels(d.primary, k));
        m.output("labels", a.labels_out);
    }
    if (!a.concepts_out.empty()) {
        LabelAssignment c;
        c.k = k;
        c.lists = d.concepts;
        ensure_parent(a.concepts_out);
        write_labels(a.concepts_out, c);
        m.output("concepts", a.concepts_out);
    }
    m.write(manifest_for(a.out));
    fmt::print("{} samples in d={}\n", d.features.rows(), d.features.cols());
    return 0;
}

// ---- selftest --------------------------------------------------------------

int cmd_selftest(std::uint64_t seed) {
    bool ok = true;
    for (const SuiteResult& s : run_selftest(seed)) {
        fmt::print("{:<18} {} cases={} max_error={:.3e} tol={:.0e}{}\n", s.name, s.passed ? "PASS" : "FAIL", s.cases,
                   s.max_error, s.tolerance, s.note.empty() ? "" : " " + s.note);
        ok = ok && s.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-label cluster discrimination toolkit"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: MLCD_THREADS or all cores)")->envname("MLCD_THREADS");

    ClusterArgs ca;
    auto* cluster = app.add_subcommand("cluster", "Spherical k-means on an FMAT feature file");
    cluster->add_option("--features", ca.features)->required();
    cluster->add_option("--k", ca.k)->required();
    cluster->add_option("--iters", ca.iters)->capture_default_str();
    cluster->add_option("--tol", ca.tol)->capture_default_str();
    cluster->add_option("--seed", ca.seed)->capture_default_str();
    cluster->add_option("--init", ca.init)->check(CLI::IsMember({"random", "kmeanspp"}))->capture_default_str();
    cluster->add_option("--out", ca.out, "Centroid FMAT")->required();
    cluster->add_option("--labels-out", ca.labels_out, "Hard assignment as an LBL file");

    AssignArgs aa;
    auto* assign = app.add_subcommand("assign", "Multi-label pseudo-labels against fixed centroids");
    assign->add_option("--features", aa.features)->required();
    assign->add_option("--centroids", aa.centroids)->required();
    assign->add_option("--mode", aa.mode)->check(CLI::IsMember({"topl", "threshold"}))->capture_default_str();
    auto* l_opt = assign->add_option("--l", aa.l, "Positives per sample (topl)");
    auto* tau_opt = assign->add_option("--tau", aa.tau, "Similarity threshold (threshold)");
    l_opt->excludes(tau_opt);
    assign->add_option("--out", aa.out)->required();

    TrainArgs ta;
    auto* trainc = app.add_subcommand("train", "Train encoder and class centers");
    trainc->add_option("--features", ta.features)->required();
    trainc->add_option("--labels", ta.labels)->required();
    trainc->add_option("--config", ta.config)->required();
    trainc->add_option("--centroids", ta.centroids, "Centroid FMAT for warm-started centers");
    trainc->add_option("--set", ta.overrides, "Override a config key (key=value), repeatable");
    trainc->add_option("--out", ta.out, "Checkpoint directory")->required();

    EmbedArgs ea;
    auto* embedc = app.add_subcommand("embed", "Embed features with a trained encoder");
    embedc->add_option("--checkpoint", ea.checkpoint)->required();
    embedc->add_option("--features", ea.features)->required();
    embedc->add_option("--out", ea.out)->required();

    EvalArgs va;
    auto* evalc = app.add_subcommand("eval", "k-NN, linear probe and similarity statistics");
    evalc->add_option("--checkpoint", va.checkpoint)->required();
    evalc->add_option("--train", va.train)->required();
    evalc->add_option("--train-labels", va.train_labels)->required();
    evalc->add_option("--test", va.test)->required();
    evalc->add_option("--test-labels", va.test_labels)->required();
    evalc->add_option("--pseudo-labels", va.pseudo_labels, "Positives for the similarity statistics");
    evalc->add_option("--knn-k", va.knn_k)->capture_default_str();
    evalc->add_option("--probe-epochs", va.probe_epochs)->capture_default_str();
    evalc->add_option("--probe-lr", va.probe_lr)->capture_default_str();
    evalc->add_option("--report", va.report)->required();

    StatsArgs sa;
    auto* stats = app.add_subcommand("stats", "Positive/negative cosine statistics");
    stats->add_option("--embeddings", sa.embeddings)->required();
    stats->add_option("--centroids", sa.centroids)->required();
    stats->add_option("--labels", sa.labels)->required();
    stats->add_option("--report", sa.report)->required();

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth", "Generate the multi-concept toy benchmark");
    synth->add_option("--directions", ya.spec.num_directions)->capture_default_str();
    synth->add_option("--dim", ya.spec.dim)->capture_default_str();
    synth->add_option("--samples", ya.spec.samples)->capture_default_str();
    synth->add_option("--max-concepts", ya.spec.max_concepts)->capture_default_str();
    synth->add_option("--noise", ya.spec.noise)->capture_default_str();
    synth->add_option("--shared", ya.spec.shared_component)->capture_default_str();
    synth->add_option("--seed", ya.spec.seed)->capture_default_str();
    synth->add_option("--out", ya.out)->required();
    synth->add_option("--labels-out", ya.labels_out, "Primary concept per sample (LBL)");
    synth->add_option("--concepts-out", ya.concepts_out, "All concepts per sample (LBL)");

    std::uint64_t self_seed = 0;
    auto* selftest = app.add_subcommand("selftest", "Factorization, shift-invariance and gradient checks");
    selftest->add_option("--seed", self_seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }
    if (threads > 0) set_num_threads(threads);
    if (*assign && aa.mode == "threshold" && tau_opt->count() == 0) {
        fmt::print(stderr, "mlcd: --mode threshold requires --tau\n");
        return kExitUsage;
    }

    try {
        if (*cluster) return cmd_cluster(ca);
        if (*assign) return cmd_assign(aa);
        if (*trainc) return cmd_train(ta);
        if (*embedc) return cmd_embed(ea);
        if (*evalc) return cmd_eval(va);
        if (*stats) return cmd_stats(sa);
        if (*synth) return cmd_synth(ya);
        if (*selftest) return cmd_selftest(self_seed);
    } catch (const Error& e) {
        fmt::print(stderr, "mlcd: {}\n", e.what());
        return is_numeric_failure(e.code()) ? kExitNumeric : kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "mlcd: {}\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
