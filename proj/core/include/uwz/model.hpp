#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace uwz::model {

// Gaussian source pair X = Y + Z with var(X) = sigma_x2 fixed and the noise
// variance sigma_z2 hidden from the codec (the harness knows it, the codes
// never see it).
struct SourceParams {
    double sigma_x2 = 0.0;
    double sigma_z2 = 0.0;  // harness-only ground truth
    double delta = 0.0;     // target distortion

    void validate() const;  // requires sigma_x2 > sigma_z2 > delta > 0
};

// Increasing guess grid [sigma_0^2, ..., sigma_r^2]. The entries beyond
// sigma_0^2 are the per-round guesses; sigma_0^2 only anchors the covered
// interval and the half-log step omega.
struct GuessSchedule {
    std::vector<double> sigma2;
    double omega = 0.0;

    int rounds() const { return static_cast<int>(sigma2.size()) - 1; }
    double guess(int k) const { return sigma2.at(static_cast<std::size_t>(k)); }
};

// All closed-form scalars for one round.
struct RoundParams {
    int k = 0;
    double sigma_k2 = 0.0;
    double delta_k = 0.0;     // sigma_k^2*Delta/(sigma_k^2 - Delta)
    double alpha_k = 0.0;     // sigma_x^2/(sigma_x^2 + Delta_k)
    double var_part = 0.0;    // var(X'_{k-1}), the part recovered this round
    double var_t = 0.0;       // var(T_k) = alpha_k*Delta_k
    double var_zprime = 0.0;  // var(Z') at this round's guess
    double ybar_scale = 0.0;  // sigma_x^2/(sigma_x^2 - sigma_k^2)
};

// Geometric grid from interval_lo stepping by 2^(2*omega) until it covers
// interval_hi (last point may round up past hi).
GuessSchedule make_schedule(double interval_lo, double interval_hi, double omega);

RoundParams round_params(int k, const GuessSchedule& sched, const SourceParams& src);

// n iid draws of (x, y) from N(0, K), K = [[sx2, sx2-sz2], [sx2-sz2, sx2-sz2]].
std::pair<std::vector<double>, std::vector<double>>
sample_source(std::size_t n, const SourceParams& src, std::uint64_t seed);

std::vector<double> scaled_side_info(const std::vector<double>& y, const SourceParams& src,
                                     const RoundParams& rp);

// x_hat = a_hat + (sx2 - sk2)*Delta/(sx2*sk2) * (ybar - a_hat)
std::vector<double> mmse_reconstruct(const std::vector<double>& a_hat,
                                     const std::vector<double>& ybar, const SourceParams& src,
                                     const RoundParams& rp);

double mmse_coefficient(const SourceParams& src, const RoundParams& rp);

// Both sides of the mutual-information decomposition for the round-k
// auxiliary, in bits, from Gaussian covariance algebra. Every side-info
// channel is taken at the round-k noise (the reading under which the sum
// telescopes exactly); lhs equals (1/2)log2(sigma_k^2/Delta) at a matched
// guess.
std::pair<double, double> mi_decomposition(int k, const GuessSchedule& sched,
                                           const SourceParams& src);

namespace detail {
// I(A ^ B | C) in bits for scalar jointly-Gaussian (A,B,C) given the
// flattened symmetric covariance [aa, ab, ac, bb, bc, cc].
double gaussian_cmi(double aa, double ab, double ac, double bb, double bc, double cc);
} // namespace detail

} // namespace uwz::model
