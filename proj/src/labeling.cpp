#include "mlcd/labeling.hpp"

#include <algorithm>
#include <numeric>

#include "mlcd/binary_io.hpp"
#include "mlcd/fmat.hpp"
#include "mlcd/parallel.hpp"

namespace mlcd {

namespace {

void check_inputs(const FeatureMatrix& features, const CentroidSet& centroids) {
    if (!features.normalized()) throw Error(ErrorCode::NotNormalized, "labeling requires normalized features");
    if (features.cols() != centroids.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "features have width " + std::to_string(features.cols()) + ", centroids " +
                        std::to_string(centroids.dim()));
    }
}

// Class ids ranked by descending similarity, ties by ascending id.
std::vector<std::uint32_t> ranked(std::span<const double> sims) {
    std::vector<std::uint32_t> order(sims.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return sims[a] > sims[b]; });
    return order;
}

template <typename Select>
LabelAssignment assign_with(const FeatureMatrix& features, const CentroidSet& centroids, Select select) {
    LabelAssignment out;
    out.k = static_cast<std::uint32_t>(centroids.k());
    out.lists.resize(features.rows());
    parallel_for(features.rows(), [&](std::size_t i) {
        std::vector<double> sims(centroids.k());
        row_similarities(features.row(i), centroids.centroids, sims);
        out.lists[i] = select(sims);
    });
    return out;
}

}  // namespace

void LabelAssignment::validate() const {
    for (std::size_t i = 0; i < lists.size(); ++i) {
        const auto& list = lists[i];
        if (list.empty()) throw Error(ErrorCode::Format, "sample " + std::to_string(i) + " has no labels");
        std::vector<std::uint32_t> sorted = list;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw Error(ErrorCode::Format, "sample " + std::to_string(i) + " repeats a class id");
        }
        if (sorted.back() >= k) {
            throw Error(ErrorCode::Format,
                        "sample " + std::to_string(i) + " has class id " + std::to_string(sorted.back()) + " >= k");
        }
    }
}

std::vector<std::uint32_t> LabelAssignment::primary() const {
    std::vector<std::uint32_t> out;
    out.reserve(lists.size());
    for (const auto& list : lists) out.push_back(list.front());
    return out;
}

LabelAssignment LabelAssignment::select(std::span<const std::size_t> indices) const {
    LabelAssignment out;
    out.k = k;
    out.mode = mode;
    out.l = l;
    out.tau = tau;
    out.lists.reserve(indices.size());
    for (std::size_t i : indices) out.lists.push_back(lists.at(i));
    return out;
}

LabelAssignment assign_top_l(const FeatureMatrix& features, const CentroidSet& centroids, std::size_t l) {
    if (l < 1 || l > centroids.k()) {
        throw Error(ErrorCode::BadPositiveCount,
                    "l=" + std::to_string(l) + " must lie in [1, " + std::to_string(centroids.k()) + "]");
    }
    check_inputs(features, centroids);
    LabelAssignment out = assign_with(features, centroids, [l](std::span<const double> sims) {
        auto order = ranked(sims);
        order.resize(l);
        return order;
    });
    out.mode = l == 1 ? LabelMode::Single : LabelMode::TopL;
    out.l = static_cast<std::uint32_t>(l);
    return out;
}

LabelAssignment assign_threshold(const FeatureMatrix& features, const CentroidSet& centroids, double tau) {
    if (!(tau > -1.0 && tau < 1.0)) throw Error(ErrorCode::BadThreshold, "tau must lie in (-1, 1)");
    check_inputs(features, centroids);
    LabelAssignment out = assign_with(features, centroids, [tau](std::span<const double> sims) {
        auto order = ranked(sims);
        std::size_t keep = 0;
        while (keep < order.size() && sims[order[keep]] >= tau) ++keep;
        order.resize(std::max<std::size_t>(keep, 1));  // argmax fallback
        return order;
    });
    out.mode = LabelMode::Threshold;
    out.tau = tau;
    return out;
}

LabelAssignment from_hard_labels(std::span<const std::uint32_t> labels, std::uint32_t k) {
    LabelAssignment out;
    out.k = k;
    out.mode = LabelMode::Single;
    out.lists.reserve(labels.size());
    for (std::uint32_t y : labels) out.lists.push_back({y});
    out.validate();
    return out;
}

std::string encode_labels(const LabelAssignment& a) {
    a.validate();
    std::string out(kLblMagic, sizeof(kLblMagic));
    detail::put_u32(out, static_cast<std::uint32_t>(a.lists.size()));
    detail::put_u32(out, a.k);
    for (const auto& list : a.lists) {
        detail::put_u32(out, static_cast<std::uint32_t>(list.size()));
        for (std::uint32_t id : list) detail::put_u32(out, id);
    }
    return out;
}

LabelAssignment decode_labels(const std::string& bytes, const std::string& source) {
    detail::ByteReader in(bytes, source);
    if (bytes.size() < sizeof(kLblMagic) || in.take(sizeof(kLblMagic)) != std::string(kLblMagic, sizeof(kLblMagic))) {
        in.fail("bad magic, expected MLCDLBL1");
    }
    LabelAssignment out;
    const std::uint32_t n = in.u32();
    out.k = in.u32();
    if (out.k == 0) in.fail("class count is zero");
    out.lists.resize(n);
    for (auto& list : out.lists) {
        const std::uint32_t len = in.u32();
        if (len > out.k) in.fail("list longer than class count");
        list.resize(len);
        for (auto& id : list) id = in.u32();
    }
    if (in.remaining() != 0) in.fail("trailing bytes after last list");
    try {
        out.validate();
    } catch (const Error& e) {
        in.fail(e.what());
    }
    bool uniform = true;
    for (const auto& list : out.lists) uniform = uniform && list.size() == out.lists.front().size();
    const std::size_t len = out.lists.empty() ? 1 : out.lists.front().size();
    out.mode = !uniform ? LabelMode::Threshold : (len == 1 ? LabelMode::Single : LabelMode::TopL);
    out.l = uniform ? static_cast<std::uint32_t>(len) : 0;
    return out;
}

void write_labels(const std::filesystem::path& path, const LabelAssignment& a) { write_file_bytes(path, encode_labels(a)); }

LabelAssignment read_labels(const std::filesystem::path& path) {
    return decode_labels(read_file_bytes(path), path.string());
}

}  // namespace mlcd
