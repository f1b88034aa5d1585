#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uwz::selftest {

struct CheckResult {
    std::string suite;
    std::string name;
    bool pass = false;
    std::string detail;
};

// Selectors: "transform", "sc-oracle", "dg-sampler", "mi-identity",
// "mmse-identity", "closeness-test", or "full".
std::vector<CheckResult> run_suite(const std::string& selector, std::uint64_t seed,
                                   int threads = 1);

bool all_passed(const std::vector<CheckResult>& results);

// Error rate of the closeness test at squared distance dist_sq between x
// and x_hat (orthogonal-error geometry, exact projection-domain law over
// fresh draws of R). expect_ack selects which verdict counts as an error.
double closeness_error_rate(std::size_t n, double delta, double sigma_x2, std::size_t m,
                            double dist_sq, bool expect_ack, int trials, std::uint64_t seed);

} // namespace uwz::selftest
