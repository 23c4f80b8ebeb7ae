#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mlcd/clustering.hpp"
#include "mlcd/error.hpp"
#include "mlcd/eval.hpp"
#include "mlcd/keyvalue.hpp"
#include "mlcd/labeling.hpp"
#include "mlcd/loss.hpp"
#include "mlcd/sampler.hpp"
#include "mlcd/selftest.hpp"
#include "mlcd/synthetic.hpp"
#include "mlcd/trainer.hpp"

namespace py = pybind11;
using namespace mlcd;

namespace {

using ArrayF = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ArrayD = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Lists = std::vector<std::vector<std::uint32_t>>;

template <typename T>
Matrix<T> to_matrix(const py::array_t<T, py::array::c_style | py::array::forcecast>& a, const char* name) {
    if (a.ndim() != 2) throw Error(ErrorCode::DimensionMismatch, std::string(name) + " must be 2-D");
    const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
    return Matrix<T>(rows, cols, std::vector<T>(a.data(), a.data() + rows * cols));
}

FeatureMatrix unit_rows(const ArrayF& a, const char* name) { return FeatureMatrix::normalized_rows(to_matrix(a, name)); }

template <typename T>
py::array_t<T> to_numpy(const Matrix<T>& m) {
    py::array_t<T> out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::array_t<float> to_numpy(const FeatureMatrix& m) { return to_numpy(m.values()); }

CentroidSet centroid_set(const ArrayF& centroids) { return CentroidSet{unit_rows(centroids, "centroids"), 0, 0, 0.0}; }

LabelAssignment label_lists(const Lists& lists, std::uint32_t k) {
    LabelAssignment a;
    a.lists = lists;
    a.k = k;
    a.mode = LabelMode::TopL;
    a.validate();
    return a;
}

KeyValues key_values(const py::dict& d) {
    KeyValues kv;
    for (const auto& [key, value] : d) kv[py::str(key)] = py::str(value);
    return kv;
}

py::dict stats_dict(const SimilarityStats& s) {
    py::dict d;
    d["mean_si"] = s.mean_si;
    d["mean_sj"] = s.mean_sj;
    d["positive_pairs"] = s.positive_pairs;
    d["negative_pairs"] = s.negative_pairs;
    d["positive_hist"] = std::vector<std::uint64_t>(s.positive_hist.begin(), s.positive_hist.end());
    d["negative_hist"] = std::vector<std::uint64_t>(s.negative_hist.begin(), s.negative_hist.end());
    return d;
}

py::tuple loss_scalar(LossVariant v, const std::vector<double>& scores, const std::vector<std::uint8_t>& mask) {
    LossOutput out;
    if (v == LossVariant::CD) {
        std::size_t label = scores.size();
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (mask[j]) {
                if (label != scores.size()) throw Error(ErrorCode::BadPositiveCount, "CD takes exactly one positive");
                label = j;
            }
        if (label == scores.size()) throw Error(ErrorCode::EmptyPositives, "no positive in mask");
        out = loss_cd(scores, label);
    } else {
        out = v == LossVariant::MLC ? loss_mlc(scores, mask) : loss_mlcd(scores, mask);
    }
    return py::make_tuple(out.value, out.grad_scores);
}

}  // namespace

PYBIND11_MODULE(_mlcd, m) {
    m.doc() = "Multi-label cluster discrimination core";

    // Messages start with the error code name, e.g. "ZeroVector: ...".
    py::register_exception<Error>(m, "MlcdError", PyExc_RuntimeError);

    m.def(
        "kmeans",
        [](const ArrayF& features, std::size_t k, std::size_t max_iters, double tol, std::uint64_t seed,
           const std::string& init) {
            const FeatureMatrix F = unit_rows(features, "features");
            KMeansResult r;
            {
                py::gil_scoped_release release;
                r = kmeans_fit(F, KMeansOptions{k, max_iters, tol, seed, parse_init_method(init)});
            }
            py::dict d;
            d["centroids"] = to_numpy(r.centroids.centroids);
            d["labels"] = r.assignment.labels;
            d["objective"] = r.assignment.objective;
            d["objective_history"] = r.objective_history;
            d["repair_flags"] = r.repair_flags;
            return d;
        },
        py::arg("features"), py::arg("k"), py::arg("max_iters") = 100, py::arg("tol") = 1e-6, py::arg("seed") = 0,
        py::arg("init") = "kmeanspp", "Spherical k-means; rows are normalized first.");

    m.def(
        "assign_top_l",
        [](const ArrayF& features, const ArrayF& centroids, std::size_t l) {
            return assign_top_l(unit_rows(features, "features"), centroid_set(centroids), l).lists;
        },
        py::arg("features"), py::arg("centroids"), py::arg("l"), "The l most similar centroids per row.");

    m.def(
        "assign_threshold",
        [](const ArrayF& features, const ArrayF& centroids, double tau) {
            return assign_threshold(unit_rows(features, "features"), centroid_set(centroids), tau).lists;
        },
        py::arg("features"), py::arg("centroids"), py::arg("tau"),
        "Centroids with cosine above tau per row; the nearest one if none is.");

    m.def("margin_cosine", &margin_cosine, py::arg("s"), py::arg("m"));

    m.def(
        "loss",
        [](const std::string& variant, const std::vector<double>& scores, const std::vector<std::uint8_t>& mask) {
            if (scores.size() != mask.size()) throw Error(ErrorCode::DimensionMismatch, "scores and mask lengths differ");
            return loss_scalar(parse_loss_variant(variant), scores, mask);
        },
        py::arg("variant"), py::arg("scores"), py::arg("positive_mask"),
        "Per-sample loss on scaled logits; returns (value, d value / d scores).");

    m.def(
        "batch_loss",
        [](const ArrayD& E, const ArrayD& W, const Lists& positives, const std::string& variant, double margin,
           double scale) {
            const LossConfig cfg{parse_loss_variant(variant), margin, scale, 1.0};
            const BatchLoss out = loss_forward_backward(to_matrix(E, "E"), to_matrix(W, "W"), positives, cfg);
            py::dict d;
            d["value"] = out.value;
            d["grad_scores"] = to_numpy(out.grad_scores);
            d["grad_E"] = to_numpy(out.grad_E);
            d["grad_W"] = to_numpy(out.grad_W);
            d["mean_si"] = out.mean_si;
            d["mean_sj"] = out.mean_sj;
            return d;
        },
        py::arg("E"), py::arg("W"), py::arg("positives"), py::arg("variant") = "MLCD", py::arg("margin") = 0.3,
        py::arg("scale") = 32.0, "Batch loss of unit embeddings E against unit centers W with gradients.");

    m.def(
        "sample_classes",
        [](std::size_t k, const std::vector<std::uint32_t>& positives, double r, std::uint64_t seed) {
            Rng rng = Rng::stream(seed, 1);
            const SampledClassSet s = sample_classes(k, positives, r, rng);
            py::dict d;
            d["class_ids"] = s.class_ids;
            d["positives"] = s.positives;
            d["negatives"] = s.negatives;
            return d;
        },
        py::arg("k"), py::arg("positives"), py::arg("ratio"), py::arg("seed") = 0);

    m.def(
        "train",
        [](const ArrayF& features, const Lists& labels, const py::dict& config, std::optional<ArrayF> centroids) {
            const ParsedConfig parsed = parse_train_config(key_values(config));
            const FeatureMatrix F = unit_rows(features, "features");
            const LabelAssignment a = label_lists(labels, static_cast<std::uint32_t>(parsed.k));
            std::optional<CentroidSet> warm;
            if (centroids) warm = centroid_set(*centroids);
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(F, a, parsed.train, warm ? &*warm : nullptr);
            }
            py::dict d;
            d["encoder"] = to_numpy(r.state.encoder);
            d["centers"] = to_numpy(r.state.centers);
            d["metrics_csv"] = r.history.to_csv();
            d["steps"] = r.state.step;
            return d;
        },
        py::arg("features"), py::arg("labels"), py::arg("config"), py::arg("centroids") = py::none(),
        "Trains encoder and centers; config holds the same keys as a config file.");

    m.def(
        "embed",
        [](const ArrayD& encoder, const ArrayF& features) {
            return to_numpy(embed(to_matrix(encoder, "encoder"), unit_rows(features, "features")));
        },
        py::arg("encoder"), py::arg("features"));

    m.def(
        "knn_eval",
        [](const ArrayF& train_E, const std::vector<std::uint32_t>& train_labels, const ArrayF& test_E,
           const std::vector<std::uint32_t>& test_labels, std::size_t k) {
            return knn_eval(unit_rows(train_E, "train_E"), train_labels, unit_rows(test_E, "test_E"), test_labels, k);
        },
        py::arg("train_E"), py::arg("train_labels"), py::arg("test_E"), py::arg("test_labels"), py::arg("k") = 5);

    m.def(
        "linear_probe",
        [](const ArrayF& train_E, const std::vector<std::uint32_t>& train_labels, const ArrayF& test_E,
           const std::vector<std::uint32_t>& test_labels, std::size_t epochs, double lr) {
            const ProbeResult r = linear_probe(unit_rows(train_E, "train_E"), train_labels, unit_rows(test_E, "test_E"),
                                               test_labels, ProbeOptions{epochs, lr});
            return py::make_tuple(r.train_accuracy, r.test_accuracy);
        },
        py::arg("train_E"), py::arg("train_labels"), py::arg("test_E"), py::arg("test_labels"), py::arg("epochs") = 200,
        py::arg("lr") = 1.0, "Returns (train_accuracy, test_accuracy).");

    m.def(
        "similarity_stats",
        [](const ArrayF& E, const ArrayF& centers, const Lists& labels) {
            const FeatureMatrix W = unit_rows(centers, "centers");
            return stats_dict(similarity_stats(unit_rows(E, "E"), W, label_lists(labels, static_cast<std::uint32_t>(W.rows()))));
        },
        py::arg("E"), py::arg("centers"), py::arg("labels"));

    m.def(
        "make_multi_concept",
        [](std::size_t directions, std::size_t dim, std::size_t samples, std::size_t max_concepts, double noise,
           double shared, std::uint64_t seed) {
            SyntheticSpec spec;
            spec.num_directions = directions;
            spec.dim = dim;
            spec.samples = samples;
            spec.max_concepts = max_concepts;
            spec.noise = noise;
            spec.shared_component = shared;
            spec.seed = seed;
            const SyntheticData data = make_multi_concept(spec);
            py::dict d;
            d["features"] = to_numpy(data.features);
            d["directions"] = to_numpy(data.directions);
            d["primary"] = data.primary;
            d["concepts"] = data.concepts;
            return d;
        },
        py::arg("directions") = 20, py::arg("dim") = 16, py::arg("samples") = 2000, py::arg("max_concepts") = 2,
        py::arg("noise") = 0.1, py::arg("shared") = 0.0, py::arg("seed") = 0);

    m.def(
        "selftest",
        [](std::uint64_t seed) {
            py::list out;
            for (const SuiteResult& r : run_selftest(seed)) {
                py::dict d;
                d["name"] = r.name;
                d["cases"] = r.cases;
                d["max_error"] = r.max_error;
                d["tolerance"] = r.tolerance;
                d["passed"] = r.passed;
                d["note"] = r.note;
                out.append(d);
            }
            return out;
        },
        py::arg("seed") = 0);
}
