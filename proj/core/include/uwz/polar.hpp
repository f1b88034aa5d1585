#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "uwz/lattice.hpp"
#include "uwz/rng.hpp"

namespace uwz::polar {

using ProbPair = std::array<double, 2>;

// x = u * G_N over GF(2), G_N the Kronecker power of [[1,0],[1,1]].
// Self-inverse.
std::vector<std::uint8_t> transform(std::vector<std::uint8_t> u);

// --- successive cancellation engine -------------------------------------

// Multi-track SC pass: the same decisions drive several weight tracks in
// lockstep (observation track, prior-only track, ...). Decisions are made
// by a policy callback that sees every track's posterior at the index.
class ScEngine {
public:
    // policy(index, post) -> bit; post has tracks*2 normalized entries,
    // laid out [track*2 + bit].
    using Policy = std::function<int(std::size_t, const double*)>;

    ScEngine(std::size_t n, int tracks);

    // leaf_weights layout: [(pos*tracks + t)*2 + bit]; per-pair scale is
    // arbitrary, zero-sum leaf pairs raise DegenerateWeight.
    void run(const std::vector<double>& leaf_weights, const Policy& policy,
             std::vector<std::uint8_t>& u_out, std::vector<std::uint8_t>& x_out,
             std::vector<double>* posteriors_out = nullptr);

    std::size_t size() const { return n_; }
    int tracks() const { return tracks_; }

private:
    void recurse(int depth, std::size_t n, std::size_t base);

    std::size_t n_;
    int tracks_;
    int depths_;
    std::vector<std::vector<double>> w_;           // per-depth weight buffers
    std::vector<std::vector<std::uint8_t>> x_;     // per-depth partial codewords
    std::vector<std::vector<std::uint8_t>> xl_;    // saved left-child codewords
    const Policy* policy_ = nullptr;
    std::vector<std::uint8_t>* u_out_ = nullptr;
    std::vector<double>* post_out_ = nullptr;
};

// --- public single-track pass ---------------------------------------------

enum class RuleKind : std::uint8_t {
    SamplePosterior,   // randomized MAP (covering)
    ArgmaxPosterior,   // MAP (packing), ties to bit 0
    Fixed,             // pinned bit (genie / received payload)
    SharedRandom,      // pseudo-random from the track's own posterior
};

struct IndexRule {
    RuleKind kind = RuleKind::ArgmaxPosterior;
    std::uint8_t fixed_bit = 0;
};

struct SharedRandomCtx {
    std::uint64_t seed = 0;
    int round_k = 0;
    int level_i = 0;
};

struct ScPassResult {
    std::vector<std::uint8_t> u;
    std::vector<std::uint8_t> x;
    std::vector<ProbPair> posteriors;
};

ScPassResult sc_pass(const std::vector<ProbPair>& weights, const std::vector<IndexRule>& policy,
                     Rng& rng, const SharedRandomCtx* shared = nullptr);

// Deterministic frozen bit shared by both endpoints: 1 iff the uniform
// variate derived from (seed, round, level, index) falls below P(1|prefix).
int shared_frozen_bit(std::uint64_t shared_seed, int round_k, int level_i, std::size_t index,
                      double p0, double p1);

// --- code construction ----------------------------------------------------

struct ConstructionConfig {
    int mc_samples = 2000;
    double z_low = 0.05;
    double z_high = 0.95;
    // Cap on the summed miss probability (Z/2) across a view's I2 indices;
    // a flat z_low alone admits Theta(N) marginal indices, whose summed
    // error rate grows with the block length.
    double i2_error_budget = 0.02;
    // Cap on the summed prior minor mass ((Z/2)^2) across a code's
    // freeze-by-prior indices; freezing a merely-95%-determined index
    // forces the encoder off genuine low-probability source excursions.
    double freeze_minor_budget = 0.01;

    void validate() const;
};

// Per-level index sets. f1/i2 are N-wide membership flags; the rest are
// derived: I1 = ~F1, F2 = ~I2, dF = F2 \ F1.
struct LevelSets {
    std::vector<std::uint8_t> f1;
    std::vector<std::uint8_t> i2;
    // subset of f1 frozen because the prefix already determines the bit
    // (Z_prior <= z_low); realized by the argmax of the shared conditional
    // rather than a draw, so a stray minor draw on a dense generator row
    // cannot corrupt the block
    std::vector<std::uint8_t> f1_det;

    std::vector<std::size_t> df_positions() const;
    std::size_t df_count() const;
};

struct CodeSets {
    std::size_t n = 0;
    int ell = 0;
    std::vector<LevelSets> levels;

    std::size_t df_count() const;
    void validate() const;  // F1 and I2 disjoint per level, sizes consistent
};

enum class Conditioning : int { PriorOnly = 0, WithX = 1, WithY = 2 };

// Design-model scalars for conveying one part under one guess.
struct CodeChannel {
    lattice::DiscreteGaussianSpec prior;  // part prior
    double enc_noise_var = 0.0;           // var(T) at the part's own round
    double dec_noise_var = 0.0;           // enc_noise_var + var(Z') at the guess
};

// True-law scalars for Monte-Carlo genie runs. Observations are sampled at
// sigma_z2_sample (the bracket bottom by default) while the decoding metric
// stays at the design guess, so the estimates account for in-bracket
// mismatch.
struct ConstructionSampler {
    double var_accum = 0.0;       // var(A_{j-1}) already subtracted
    double sigma_x2 = 0.0;
    double sigma_z2_sample = 0.0;
    double ybar_scale = 0.0;
};

struct ReliabilityEstimates {
    // z[conditioning][level][index]; absent conditionings stay empty
    std::array<std::vector<std::vector<double>>, 3> z;
    // mean minor posterior mass E[min(p0,p1)] per index, the expected MAP
    // miss rate; same layout
    std::array<std::vector<std::vector<double>>, 3> pmin;
};

ReliabilityEstimates estimate_reliabilities(std::size_t n, int ell, const CodeChannel& chan,
                                            const ConstructionSampler& sampler,
                                            const ConstructionConfig& cfg, std::uint64_t seed,
                                            int threads, bool with_x, bool with_y);

// Single (level, conditioning) view of the genie Monte-Carlo
// estimate of Z = 2 E[sqrt(p0 p1)], clamped to [0,1].
std::vector<double> estimate_bhattacharyya(int level, Conditioning cond, std::size_t n, int ell,
                                           const CodeChannel& chan,
                                           const ConstructionSampler& sampler,
                                           const ConstructionConfig& cfg, std::uint64_t seed,
                                           int threads = 1);

// One constructed code view: part j decoded under the round-k guess.
struct ConstructionRecord {
    int part_round = 0;   // j
    int noise_round = 0;  // k
    CodeSets sets;
    std::vector<std::vector<double>> z_prior;  // [level][index], diagonal only
    std::vector<std::vector<double>> z_x;      // diagonal only
    std::vector<std::vector<double>> z_y;
};

// Diagonal construction (j == k): three-track estimation, then
//   F1 = {Z_x >= z_high or Z_prior <= z_low}
//   I2 = {Z_y <= z_low and Z_prior >= z_high} \ F1
ConstructionRecord construct_sets(int round_k, std::size_t n, int ell, const CodeChannel& chan,
                                  const ConstructionSampler& sampler,
                                  const ConstructionConfig& cfg, std::uint64_t seed,
                                  int threads = 1);

// Off-diagonal view (j < k): keeps the part's F1, re-estimates the Y track
// at the round-k guess, and nests I2 inside the previous view's I2.
ConstructionRecord construct_incremental_sets(const ConstructionRecord& diagonal,
                                              const ConstructionRecord& previous,
                                              int noise_round, const CodeChannel& chan,
                                              const ConstructionSampler& sampler,
                                              const ConstructionConfig& cfg, std::uint64_t seed,
                                              int threads = 1);

// --- covering / packing ---------------------------------------------------

struct CoveringResult {
    lattice::BitPlanes u_planes;          // decisions, u-domain
    std::vector<std::uint8_t> payload;    // bits at dF, level-major ascending
};

CoveringResult covering_encode(const std::vector<double>& x_k, const CodeSets& sets,
                               const CodeChannel& chan, std::uint64_t shared_seed,
                               int code_round, Rng& rng);

lattice::BitPlanes packing_decode(const std::vector<double>& y_k, const CodeSets& sets,
                                  const std::vector<std::uint8_t>& received,
                                  const CodeChannel& chan, std::uint64_t shared_seed,
                                  int code_round);

} // namespace uwz::polar
