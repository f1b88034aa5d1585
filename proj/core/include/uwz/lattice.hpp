#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "uwz/rng.hpp"

namespace uwz::lattice {

// One-dimensional lattice 2^(-t/4) * Z.
struct Lattice1D {
    int t = 0;
    double scale = 0.0;
};

Lattice1D make_lattice(int t);

// Discrete Gaussian over the lattice, truncated to +/- window steps around
// the point nearest the center.
struct DiscreteGaussianSpec {
    Lattice1D lat;
    double sigma = 0.0;
    double center = 0.0;
    long window = 0;  // half-width in lattice steps
};

// window defaults to ceil(8*sigma/scale); an explicit window must still
// cover 8 sigma.
DiscreteGaussianSpec make_dg(const Lattice1D& lat, double sigma, double center = 0.0,
                             long window = -1);

double dg_pmf(const DiscreteGaussianSpec& spec, double lambda);

std::vector<double> dg_sample(const DiscreteGaussianSpec& spec, std::size_t n, Rng& rng);

// ell x n binary matrix of the ell least-significant bit planes, LSB first.
// Plane i is stored at rows()[i].
struct BitPlanes {
    int ell = 0;
    std::size_t n = 0;
    std::vector<std::uint8_t> planes;  // plane-major, ell*n entries

    std::uint8_t* row(int i) { return planes.data() + static_cast<std::size_t>(i) * n; }
    const std::uint8_t* row(int i) const {
        return planes.data() + static_cast<std::size_t>(i) * n;
    }
};

BitPlanes point_to_planes(const std::vector<double>& v, int ell, const Lattice1D& lat);

// Centered two's-complement inverse of point_to_planes.
std::vector<double> planes_to_point(const BitPlanes& planes, const Lattice1D& lat);

// Joint weight of level-i bit b with a real observation: coset prior mass
// times the Gaussian likelihood N(obs; lambda, noise_var), summed over the
// coset {lambda: lambda/scale == residue_class + 2^(i-1) b (mod 2^i)}.
// Level index i is 1-based.
std::pair<double, double> level_channel_weights(double obs, long residue_class, int level,
                                                const DiscreteGaussianSpec& spec,
                                                double noise_var);

// Prior-only variant (no observation), used for the shared-randomness
// stream.
std::pair<double, double> level_channel_prior_weights(long residue_class, int level,
                                                      const DiscreteGaussianSpec& spec);

namespace detail {

// Normalized discrete Gaussian weights over the window; points are
// (n0 + i - window)*scale for i in [0, 2*window].
struct DgTable {
    long n0 = 0;
    long window = 0;
    double scale = 0.0;
    std::vector<double> w;  // normalized

    long lo() const { return n0 - window; }
    long hi() const { return n0 + window; }
};

DgTable build_dg_table(const DiscreteGaussianSpec& spec);

// Per-coordinate residue table: q[m] = sum of dg weight * likelihood over
// lattice integers congruent to m mod 2^ell. With no observation the
// likelihood factor is 1. Folding q gives every level's coset weights.
std::vector<double> residue_weights(const DgTable& table, int ell, bool with_obs, double obs,
                                    double noise_var);

// (w0, w1) for level i (1-based) given residue_class from lower planes.
std::pair<double, double> fold_level(const std::vector<double>& q, long residue_class,
                                     int level);

// Fast residue table: accumulates
//   exp(-(lam - center)^2/(2 sigma^2) - (obs - lam)^2/(2 noise_var))
// over the window into q (size 2^ell), up to a common positive scale.
// noise_var <= 0 drops the likelihood factor. Two multiplies per lattice
// point via the quadratic-exponent recurrence, anchored at the peak.
void residue_weights_gaussian(const DiscreteGaussianSpec& spec, int ell, double obs,
                              double noise_var, std::vector<double>& q);

// Inverse-CDF sampling table.
struct DgSampler {
    DgTable table;
    std::vector<double> cdf;
};

DgSampler build_dg_sampler(const DiscreteGaussianSpec& spec);
double dg_draw(const DgSampler& s, Rng& rng);

} // namespace detail

} // namespace uwz::lattice
