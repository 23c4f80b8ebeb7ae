#include "mlcd/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "mlcd/rng.hpp"

namespace mlcd {

SyntheticData make_multi_concept(const SyntheticSpec& spec) {
    if (spec.num_directions < 1 || spec.dim < 1 || spec.samples < 1 || spec.max_concepts < 1) {
        throw Error(ErrorCode::InvalidArgument, "synthetic spec needs positive sizes");
    }
    if (spec.max_concepts > spec.num_directions) {
        throw Error(ErrorCode::InvalidArgument, "max_concepts exceeds the number of directions");
    }
    Rng dir_rng = Rng::stream(spec.seed, 10);
    if (!(spec.shared_component >= 0.0 && spec.shared_component < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "shared_component must lie in [0, 1)");
    }
    MatrixD dirs(spec.num_directions, spec.dim);
    for (auto& v : dirs.data()) v = dir_rng.normal();
    if (spec.shared_component > 0.0) {
        std::vector<double> common(spec.dim);
        for (auto& v : common) v = dir_rng.normal();
        common = l2_normalize(std::span<const double>(common));
        const double own = std::sqrt(1.0 - spec.shared_component * spec.shared_component);
        for (std::size_t r = 0; r < dirs.rows(); ++r) {
            const auto unit = l2_normalize(std::span<const double>(dirs.row(r)));
            for (std::size_t t = 0; t < spec.dim; ++t) dirs(r, t) = spec.shared_component * common[t] + own * unit[t];
        }
    }

    SyntheticData out;
    out.directions = FeatureMatrix::normalized_rows(dirs);
    const MatrixD unit = out.directions.to_double();

    Rng rng = Rng::stream(spec.seed, 11);
    MatrixD x(spec.samples, spec.dim, 0.0);
    out.primary.resize(spec.samples);
    out.concepts.resize(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        const std::size_t count = 1 + rng.uniform_below(spec.max_concepts);
        auto& concepts = out.concepts[i];
        while (concepts.size() < count) {
            const auto c = static_cast<std::uint32_t>(rng.uniform_below(spec.num_directions));
            if (std::find(concepts.begin(), concepts.end(), c) == concepts.end()) concepts.push_back(c);
        }
        out.primary[i] = concepts.front();
        auto row = x.row(i);
        for (std::size_t a = 0; a < concepts.size(); ++a) {
            const double w = a == 0 ? 1.0
                                    : spec.secondary_weight_min +
                                          (spec.secondary_weight_max - spec.secondary_weight_min) * rng.uniform01();
            const auto u = unit.row(concepts[a]);
            for (std::size_t t = 0; t < spec.dim; ++t) row[t] += w * u[t];
        }
        for (auto& v : row) v += spec.noise * rng.normal();
    }
    out.features = FeatureMatrix::normalized_rows(x);
    return out;
}

}  // namespace mlcd
