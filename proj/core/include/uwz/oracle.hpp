#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace uwz::oracle {

// Brute-force reference implementations used by the verification suites and
// tests. Everything here recomputes from first principles, independent of
// the production code paths it cross-checks.

// G_N as an explicit matrix (row j, column i), built by Kronecker recursion.
std::vector<std::vector<std::uint8_t>> polar_generator(std::size_t n);

// Exact SC conditionals P(u_j = b | u_ref[0:j)) for a single-level product
// measure: weight(u) = prod_j W_j(x_j), x = u G_N. Enumerates all 2^N
// inputs; each returned pair is normalized.
std::vector<std::array<double, 2>>
enumerate_sc_conditionals(const std::vector<std::array<double, 2>>& weights,
                          const std::vector<std::uint8_t>& u_ref);

// Exact multilevel conditionals. q[j] holds per-coordinate joint weights
// over residues mod 2^ell; the conditioning at level i is the true lower
// planes plus the true u prefix of level i. Result: [level-1][index] pairs.
std::vector<std::vector<std::array<double, 2>>>
enumerate_multilevel_conditionals(const std::vector<std::vector<double>>& q, int ell,
                                  const std::vector<long>& true_residue);

// Truncated-sum discrete Gaussian pmf over scale*Z, window in steps.
double brute_dg_pmf(double sigma, double center, double scale, long window, double lambda);

// Linear-MMSE coefficients of E[X | ybar, a] from the joint covariance
// [xx, xy, xa; xy, yy, ya; xa, ya, aa]: returns {coef_ybar, coef_a}.
std::array<double, 2> lmmse_coefficients(double xx, double xy, double xa, double yy, double ya,
                                         double aa);

// I(A ^ B | C) in bits via conditional variances (Schur complements), a
// different route than the determinant formula in the model module.
double cmi_entropy_route(double aa, double ab, double ac, double bb, double bc, double cc);

double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

} // namespace uwz::oracle
