#ifndef MLCD_SELFTEST_HPP
#define MLCD_SELFTEST_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mlcd {

struct SuiteResult {
    std::string name;
    std::size_t cases = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string note;
};

/// Algebraic identity between the expanded and two-term MLCD forms.
SuiteResult selftest_factorization(std::uint64_t seed, std::size_t instances = 10000);
/// MLC shift invariance, plus a witness that MLCD is not shift invariant.
SuiteResult selftest_shift(std::uint64_t seed, std::size_t instances = 1000);
/// Analytic grad_E / grad_W against central differences of the forward value.
SuiteResult selftest_gradients(std::uint64_t seed, std::size_t instances_per_config = 20);

std::vector<SuiteResult> run_selftest(std::uint64_t seed);

}  // namespace mlcd

#endif  // MLCD_SELFTEST_HPP
