#include "mlcd/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mlcd/loss.hpp"
#include "mlcd/rng.hpp"

namespace mlcd {

namespace {

struct Row {
    std::vector<double> s;
    std::vector<std::uint8_t> mask;
};

Row random_row(Rng& rng, std::size_t max_pos, std::size_t max_neg, double spread) {
    const std::size_t np = 1 + rng.uniform_below(max_pos);
    const std::size_t nn = 1 + rng.uniform_below(max_neg);
    Row r;
    for (std::size_t i = 0; i < np + nn; ++i) {
        r.s.push_back(spread * (2.0 * rng.uniform01() - 1.0));
        r.mask.push_back(i < np ? 1 : 0);
    }
    return r;
}

void random_unit_rows(Rng& rng, MatrixD& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (auto& v : row) v = rng.normal();
        const auto u = l2_normalize(std::span<const double>(row));
        std::copy(u.begin(), u.end(), row.begin());
    }
}

}  // namespace

SuiteResult selftest_factorization(std::uint64_t seed, std::size_t instances) {
    SuiteResult res{"factorization", instances, 0.0, 1e-9, false, {}};
    Rng rng = Rng::stream(seed, 20);
    for (std::size_t t = 0; t < instances; ++t) {
        const Row r = random_row(rng, 8, 64, 4.0);
        long double a = 0, b = 0;
        for (std::size_t i = 0; i < r.s.size(); ++i) {
            if (r.mask[i]) {
                b += std::exp(-static_cast<long double>(r.s[i]));
            } else {
                a += std::exp(static_cast<long double>(r.s[i]));
            }
        }
        const double expanded = static_cast<double>(std::log(1 + a * b + a + b));
        res.max_error = std::max(res.max_error, std::abs(expanded - loss_mlcd(r.s, r.mask).value));
    }
    res.passed = res.max_error < res.tolerance;
    return res;
}

SuiteResult selftest_shift(std::uint64_t seed, std::size_t instances) {
    SuiteResult res{"shift_invariance", instances, 0.0, 1e-6, false, {}};
    Rng rng = Rng::stream(seed, 21);
    for (std::size_t t = 0; t < instances; ++t) {
        Row r = random_row(rng, 8, 64, 4.0);
        const double base = loss_mlc(r.s, r.mask).value;
        const double c = 20.0 * rng.uniform01() - 10.0;
        for (auto& v : r.s) v += c;
        res.max_error = std::max(res.max_error, std::abs(loss_mlc(r.s, r.mask).value - base));
    }
    const std::vector<std::uint8_t> mask{1, 0};
    const double witness = std::abs(loss_mlcd(std::vector<double>{10.4, 10.1}, mask).value -
                                    loss_mlcd(std::vector<double>{0.4, 0.1}, mask).value);
    res.note = "mlcd_shift_witness=" + std::to_string(witness);
    res.passed = res.max_error < res.tolerance && witness > 0.1;
    return res;
}

SuiteResult selftest_gradients(std::uint64_t seed, std::size_t instances_per_config) {
    SuiteResult res{"finite_difference", 0, 0.0, 1e-4, false, {}};
    Rng rng = Rng::stream(seed, 22);
    const double h = 1e-4;
    for (auto variant : {LossVariant::CD, LossVariant::MLC, LossVariant::MLCD}) {
        for (double m : {0.0, 0.3}) {
            std::size_t done = 0;
            while (done < instances_per_config) {
                const std::size_t b = 1 + rng.uniform_below(4), c = 2 + rng.uniform_below(15), d = 2 + rng.uniform_below(7);
                MatrixD E(b, d), W(c, d);
                random_unit_rows(rng, E);
                random_unit_rows(rng, W);
                ActivePositives pos(b);
                for (auto& p : pos) {
                    const std::size_t np = 1 + rng.uniform_below(std::min<std::size_t>(3, c - 1));
                    while (p.size() < np) {
                        const auto col = static_cast<std::uint32_t>(rng.uniform_below(c));
                        if (std::find(p.begin(), p.end(), col) == p.end()) p.push_back(col);
                    }
                }
                // The margin has kinks at cos = 1 and at cos = cos(pi - m); skip draws near them.
                bool near_kink = false;
                for (std::size_t r = 0; r < b; ++r)
                    for (std::size_t j = 0; j < c; ++j) {
                        const double cs = dot(std::span<const double>(E.row(r)), std::span<const double>(W.row(j)));
                        if (std::abs(cs) > 0.995 || std::abs(cs - std::cos(std::numbers::pi - m)) < 1e-2) near_kink = true;
                    }
                if (near_kink) continue;

                const LossConfig cfg{variant, m, 1.0 + 15.0 * rng.uniform01(), 1.0};
                const BatchLoss out = loss_forward_backward(E, W, pos, cfg);
                auto check = [&](MatrixD& param, const MatrixD& grad, bool is_e) {
                    for (std::size_t i = 0; i < param.size(); ++i) {
                        const double keep = param.data()[i];
                        param.data()[i] = keep + h;
                        const double up = is_e ? loss_forward_backward(param, W, pos, cfg).value
                                               : loss_forward_backward(E, param, pos, cfg).value;
                        param.data()[i] = keep - h;
                        const double down = is_e ? loss_forward_backward(param, W, pos, cfg).value
                                                 : loss_forward_backward(E, param, pos, cfg).value;
                        param.data()[i] = keep;
                        const double num = (up - down) / (2 * h);
                        const double ana = grad.data()[i];
                        const double err = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-3});
                        res.max_error = std::max(res.max_error, err);
                    }
                };
                MatrixD Ec = E, Wc = W;
                check(Ec, out.grad_E, true);
                check(Wc, out.grad_W, false);
                ++done;
                ++res.cases;
            }
        }
    }
    res.passed = res.max_error < res.tolerance;
    return res;
}

std::vector<SuiteResult> run_selftest(std::uint64_t seed) {
    return {selftest_factorization(seed), selftest_shift(seed), selftest_gradients(seed)};
}

}  // namespace mlcd
