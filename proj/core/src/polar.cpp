#include "uwz/polar.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <string>
#include <thread>

#include "uwz/errors.hpp"

namespace uwz::polar {

namespace {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_size(std::size_t n) {
    int d = 0;
    while ((std::size_t{1} << d) < n) ++d;
    return d;
}

} // namespace

std::vector<std::uint8_t> transform(std::vector<std::uint8_t> u) {
    const std::size_t n = u.size();
    if (!is_pow2(n)) throw InvalidParameter("transform: length must be a power of two");
    for (std::size_t h = 1; h < n; h <<= 1)
        for (std::size_t i = 0; i < n; i += 2 * h)
            for (std::size_t j = i; j < i + h; ++j)
                u[j] ^= u[j + h];
    return u;
}

// --- ScEngine --------------------------------------------------------------

ScEngine::ScEngine(std::size_t n, int tracks) : n_(n), tracks_(tracks) {
    if (!is_pow2(n)) throw InvalidParameter("ScEngine: size must be a power of two");
    if (tracks < 1) throw InvalidParameter("ScEngine: need at least one track");
    depths_ = log2_size(n) + 1;
    w_.resize(static_cast<std::size_t>(depths_));
    x_.resize(static_cast<std::size_t>(depths_));
    xl_.resize(static_cast<std::size_t>(depths_));
    for (int d = 0; d < depths_; ++d) {
        const std::size_t sz = n >> d;
        w_[static_cast<std::size_t>(d)].resize(sz * static_cast<std::size_t>(tracks) * 2);
        x_[static_cast<std::size_t>(d)].resize(sz);
        xl_[static_cast<std::size_t>(d)].resize(sz / 2 + 1);
    }
}

void ScEngine::run(const std::vector<double>& leaf_weights, const Policy& policy,
                   std::vector<std::uint8_t>& u_out, std::vector<std::uint8_t>& x_out,
                   std::vector<double>* posteriors_out) {
    const std::size_t want = n_ * static_cast<std::size_t>(tracks_) * 2;
    if (leaf_weights.size() != want)
        throw InvalidParameter("ScEngine::run: weight buffer size mismatch");
    w_[0] = leaf_weights;
    u_out.assign(n_, 0);
    if (posteriors_out) posteriors_out->assign(want, 0.0);
    policy_ = &policy;
    u_out_ = &u_out;
    post_out_ = posteriors_out;
    recurse(0, n_, 0);
    x_out = x_[0];
}

void ScEngine::recurse(int depth, std::size_t n, std::size_t base) {
    const int k = tracks_;
    double* w = w_[static_cast<std::size_t>(depth)].data();
    if (n == 1) {
        // normalize each track and decide
        double post[16];
        double* p = (k <= 8) ? post : w;  // k is small in practice
        for (int t = 0; t < k; ++t) {
            const double w0 = w[2 * t], w1 = w[2 * t + 1];
            const double s = w0 + w1;
            if (!(s > 0.0) || !std::isfinite(s))
                throw DegenerateWeight("sc_pass: zero total weight at index " +
                                       std::to_string(base));
            p[2 * t] = w0 / s;
            p[2 * t + 1] = w1 / s;
        }
        if (post_out_)
            std::memcpy(post_out_->data() + base * static_cast<std::size_t>(k) * 2, p,
                        static_cast<std::size_t>(k) * 2 * sizeof(double));
        const int bit = (*policy_)(base, p);
        (*u_out_)[base] = static_cast<std::uint8_t>(bit & 1);
        x_[static_cast<std::size_t>(depth)][0] = static_cast<std::uint8_t>(bit & 1);
        return;
    }

    const std::size_t half = n / 2;
    double* wc = w_[static_cast<std::size_t>(depth + 1)].data();

    // f-combine: child(c) = sum_d left(c^d) * right(d)
    for (std::size_t i = 0; i < half; ++i) {
        const double* a = w + (i * static_cast<std::size_t>(k)) * 2;
        const double* b = w + ((i + half) * static_cast<std::size_t>(k)) * 2;
        double* c = wc + (i * static_cast<std::size_t>(k)) * 2;
        for (int t = 0; t < k; ++t) {
            const double c0 = a[2 * t] * b[2 * t] + a[2 * t + 1] * b[2 * t + 1];
            const double c1 = a[2 * t] * b[2 * t + 1] + a[2 * t + 1] * b[2 * t];
            const double s = c0 + c1;
            if (s > 0.0 && std::isfinite(s)) {
                c[2 * t] = c0 / s;
                c[2 * t + 1] = c1 / s;
            } else {
                c[2 * t] = 0.5;
                c[2 * t + 1] = 0.5;
            }
        }
    }
    recurse(depth + 1, half, base);
    std::uint8_t* xl = xl_[static_cast<std::size_t>(depth)].data();
    std::memcpy(xl, x_[static_cast<std::size_t>(depth + 1)].data(), half);

    // g-combine: child(d) = left(xl ^ d) * right(d)
    for (std::size_t i = 0; i < half; ++i) {
        const double* a = w + (i * static_cast<std::size_t>(k)) * 2;
        const double* b = w + ((i + half) * static_cast<std::size_t>(k)) * 2;
        double* c = wc + (i * static_cast<std::size_t>(k)) * 2;
        const int xa = xl[i];
        for (int t = 0; t < k; ++t) {
            const double c0 = a[2 * t + xa] * b[2 * t];
            const double c1 = a[2 * t + (xa ^ 1)] * b[2 * t + 1];
            const double s = c0 + c1;
            if (s > 0.0 && std::isfinite(s)) {
                c[2 * t] = c0 / s;
                c[2 * t + 1] = c1 / s;
            } else {
                c[2 * t] = 0.5;
                c[2 * t + 1] = 0.5;
            }
        }
    }
    recurse(depth + 1, half, base + half);

    std::uint8_t* xp = x_[static_cast<std::size_t>(depth)].data();
    const std::uint8_t* xr = x_[static_cast<std::size_t>(depth + 1)].data();
    for (std::size_t i = 0; i < half; ++i) {
        xp[i] = static_cast<std::uint8_t>(xl[i] ^ xr[i]);
        xp[i + half] = xr[i];
    }
}

// --- public single-track pass -----------------------------------------------

int shared_frozen_bit(std::uint64_t shared_seed, int round_k, int level_i, std::size_t index,
                      double p0, double p1) {
    const double s = p0 + p1;
    if (!(s > 0.0) || !std::isfinite(s))
        throw DegenerateWeight("shared_frozen_bit: unnormalizable pair");
    const double pb1 = p1 / s;
    const std::uint64_t bits = mix_keys(shared_seed, static_cast<std::uint64_t>(round_k),
                                        static_cast<std::uint64_t>(level_i),
                                        static_cast<std::uint64_t>(index));
    return u01_from_bits(splitmix64(bits)) < pb1 ? 1 : 0;
}

ScPassResult sc_pass(const std::vector<ProbPair>& weights, const std::vector<IndexRule>& policy,
                     Rng& rng, const SharedRandomCtx* shared) {
    if (policy.size() != weights.size())
        throw InvalidParameter("sc_pass: policy/weight length mismatch");
    const std::size_t n = weights.size();
    std::vector<double> leaf(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        leaf[2 * i] = weights[i][0];
        leaf[2 * i + 1] = weights[i][1];
    }
    ScEngine engine(n, 1);
    ScPassResult res;
    std::vector<double> post;
    ScEngine::Policy pol = [&](std::size_t idx, const double* p) -> int {
        const IndexRule& rule = policy[idx];
        switch (rule.kind) {
            case RuleKind::SamplePosterior:
                return rng.uniform01() < p[1] ? 1 : 0;
            case RuleKind::ArgmaxPosterior:
                return p[1] > p[0] ? 1 : 0;
            case RuleKind::Fixed:
                return rule.fixed_bit;
            case RuleKind::SharedRandom:
                if (!shared)
                    throw InvalidParameter("sc_pass: SharedRandom rule without context");
                return shared_frozen_bit(shared->seed, shared->round_k, shared->level_i, idx,
                                         p[0], p[1]);
        }
        return 0;
    };
    engine.run(leaf, pol, res.u, res.x, &post);
    res.posteriors.resize(n);
    for (std::size_t i = 0; i < n; ++i) res.posteriors[i] = {post[2 * i], post[2 * i + 1]};
    return res;
}

// --- construction -----------------------------------------------------------

void ConstructionConfig::validate() const {
    if (mc_samples < 1) throw InvalidParameter("ConstructionConfig: mc_samples must be >= 1");
    if (!(z_low >= 0.0) || !(z_low < z_high) || !(z_high <= 1.0))
        throw InvalidParameter("ConstructionConfig: need 0 <= z_low < z_high <= 1");
    if (!(i2_error_budget > 0.0))
        throw InvalidParameter("ConstructionConfig: i2_error_budget must be positive");
    if (!(freeze_minor_budget > 0.0))
        throw InvalidParameter("ConstructionConfig: freeze_minor_budget must be positive");
}

namespace {

// Trims I2 across all levels of one view to the most reliable indices whose
// summed expected miss rate stays within the budget.
void apply_i2_budget(CodeSets& sets, const std::vector<std::vector<double>>& miss_rate,
                     double budget) {
    std::vector<std::pair<double, std::pair<int, std::size_t>>> members;
    for (int i = 0; i < sets.ell; ++i) {
        const auto& lv = sets.levels[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < sets.n; ++j)
            if (lv.i2[j])
                members.push_back({miss_rate[static_cast<std::size_t>(i)][j], {i, j}});
    }
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double acc = 0.0;
    std::size_t keep = 0;
    while (keep < members.size() && acc + members[keep].first <= budget) {
        acc += members[keep].first;
        ++keep;
    }
    for (std::size_t i = keep; i < members.size(); ++i) {
        const auto [lvl, idx] = members[i].second;
        sets.levels[static_cast<std::size_t>(lvl)].i2[idx] = 0;
    }
}

} // namespace

std::vector<std::size_t> LevelSets::df_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < f1.size(); ++j)
        if (!f1[j] && !i2[j]) out.push_back(j);
    return out;
}

std::size_t LevelSets::df_count() const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < f1.size(); ++j)
        if (!f1[j] && !i2[j]) ++c;
    return c;
}

std::size_t CodeSets::df_count() const {
    std::size_t c = 0;
    for (const auto& lv : levels) c += lv.df_count();
    return c;
}

void CodeSets::validate() const {
    if (levels.size() != static_cast<std::size_t>(ell))
        throw InvalidParameter("CodeSets: level count mismatch");
    for (const auto& lv : levels) {
        if (lv.f1.size() != n || lv.i2.size() != n || lv.f1_det.size() != n)
            throw InvalidParameter("CodeSets: flag size mismatch");
        for (std::size_t j = 0; j < n; ++j) {
            if (lv.f1[j] && lv.i2[j])
                throw InvalidParameter("CodeSets: F1 and I2 overlap (nesting violated)");
            if (lv.f1_det[j] && !lv.f1[j])
                throw InvalidParameter("CodeSets: deterministic-frozen flag outside F1");
        }
    }
}

namespace {

// Per-pass workspace shared by covering, packing and genie estimation.
// tracks: q tables per coordinate (empty inner vector = use shared table).
struct LevelDriver {
    std::size_t n;
    int ell;
    int tracks;
    const std::vector<std::vector<double>>* per_coord[3] = {nullptr, nullptr, nullptr};
    const std::vector<double>* shared_table[3] = {nullptr, nullptr, nullptr};

    std::vector<long> rc;
    std::vector<double> leaf;

    LevelDriver(std::size_t n_, int ell_, int tracks_) : n(n_), ell(ell_), tracks(tracks_) {
        rc.assign(n, 0);
        leaf.resize(n * static_cast<std::size_t>(tracks) * 2);
    }

    const std::vector<double>& table_for(int t, std::size_t j) const {
        if (per_coord[t]) return (*per_coord[t])[j];
        return *shared_table[t];
    }

    void build_leaf(int level) {
        for (std::size_t j = 0; j < n; ++j) {
            double* out = leaf.data() + (j * static_cast<std::size_t>(tracks)) * 2;
            for (int t = 0; t < tracks; ++t) {
                auto [w0, w1] = lattice::detail::fold_level(table_for(t, j), rc[j], level);
                const double s = w0 + w1;
                if (s > 0.0 && std::isfinite(s)) {
                    out[2 * t] = w0 / s;
                    out[2 * t + 1] = w1 / s;
                } else if (t > 0) {
                    // observation underflowed; fall back to the prior coset odds
                    auto [p0, p1] = lattice::detail::fold_level(table_for(0, j), rc[j], level);
                    const double sp = p0 + p1;
                    out[2 * t] = sp > 0.0 ? p0 / sp : 0.5;
                    out[2 * t + 1] = sp > 0.0 ? p1 / sp : 0.5;
                } else {
                    out[2 * t] = 0.5;
                    out[2 * t + 1] = 0.5;
                }
            }
        }
    }

    void absorb_level(int level, const std::vector<std::uint8_t>& x_bits) {
        const long add = 1L << (level - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (x_bits[j]) rc[j] += add;
    }
};

struct ZAccum {
    // [cond][level][index]
    std::array<std::vector<std::vector<double>>, 3> sum;
    std::array<std::vector<std::vector<double>>, 3> pmin;

    void init(int ell, std::size_t n, bool with_x, bool with_y) {
        sum[0].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
        pmin[0].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
        if (with_x) {
            sum[1].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
            pmin[1].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
        }
        if (with_y) {
            sum[2].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
            pmin[2].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
        }
    }
};

} // namespace

ReliabilityEstimates estimate_reliabilities(std::size_t n, int ell, const CodeChannel& chan,
                                            const ConstructionSampler& sampler,
                                            const ConstructionConfig& cfg, std::uint64_t seed,
                                            int threads, bool with_x, bool with_y) {
    cfg.validate();
    if (!is_pow2(n)) throw InvalidParameter("estimate_reliabilities: n must be a power of two");
    if (ell < 1) throw InvalidParameter("estimate_reliabilities: ell must be >= 1");

    const int tracks = 1 + (with_x ? 1 : 0) + (with_y ? 1 : 0);
    const int x_track = with_x ? 1 : -1;
    const int y_track = with_y ? (with_x ? 2 : 1) : -1;

    const auto prior_sampler = lattice::detail::build_dg_sampler(chan.prior);
    std::vector<double> prior_q;
    lattice::detail::residue_weights_gaussian(chan.prior, ell, 0.0, 0.0, prior_q);

    const double scale = chan.prior.lat.scale;
    const long m = 1L << ell;

    const int chunk_size = 256;
    const int chunks = (cfg.mc_samples + chunk_size - 1) / chunk_size;
    std::vector<ZAccum> acc(static_cast<std::size_t>(chunks));

    auto run_chunk = [&](int c) {
        ZAccum& za = acc[static_cast<std::size_t>(c)];
        za.init(ell, n, with_x, with_y);

        ScEngine engine(n, tracks);
        LevelDriver drv(n, ell, tracks);
        drv.shared_table[0] = &prior_q;
        std::vector<std::vector<double>> qx(with_x ? n : 0), qy(with_y ? n : 0);
        if (with_x) drv.per_coord[x_track] = &qx;
        if (with_y) drv.per_coord[y_track] = &qy;

        std::vector<double> part(n), obs_x(n), obs_y(n);
        std::vector<std::uint8_t> true_plane(n), u_true(n), u_dec(n), x_dec(n);
        std::vector<long> true_res(n);
        std::vector<double> post;

        const int lo = c * chunk_size;
        const int hi = std::min(cfg.mc_samples, lo + chunk_size);
        for (int s = lo; s < hi; ++s) {
            Rng rng(mix_keys(seed, seed_tag::construct, static_cast<std::uint64_t>(s)));
            for (std::size_t j = 0; j < n; ++j) {
                const double xp = lattice::detail::dg_draw(prior_sampler, rng);
                const double t = rng.normal(0.0, std::sqrt(chan.enc_noise_var));
                part[j] = xp;
                obs_x[j] = xp + t;
                if (with_y) {
                    const double a = sampler.var_accum > 0.0
                                         ? rng.normal(0.0, std::sqrt(sampler.var_accum))
                                         : 0.0;
                    const double z = rng.normal(0.0, std::sqrt(sampler.sigma_z2_sample));
                    const double x_full = a + xp + t;
                    obs_y[j] = sampler.ybar_scale * (x_full - z) - a;
                }
                const long nr = std::lround(xp / scale);
                true_res[j] = ((nr % m) + m) % m;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (with_x)
                    lattice::detail::residue_weights_gaussian(chan.prior, ell, obs_x[j],
                                                              chan.enc_noise_var, qx[j]);
                if (with_y)
                    lattice::detail::residue_weights_gaussian(chan.prior, ell, obs_y[j],
                                                              chan.dec_noise_var, qy[j]);
            }

            std::fill(drv.rc.begin(), drv.rc.end(), 0L);
            for (int i = 1; i <= ell; ++i) {
                for (std::size_t j = 0; j < n; ++j)
                    true_plane[j] = static_cast<std::uint8_t>((true_res[j] >> (i - 1)) & 1L);
                u_true = transform(true_plane);

                drv.build_leaf(i);
                ScEngine::Policy genie = [&](std::size_t idx, const double*) -> int {
                    return u_true[idx];
                };
                engine.run(drv.leaf, genie, u_dec, x_dec, &post);

                for (int t = 0; t < tracks; ++t) {
                    const int cond = (t == 0) ? 0 : (t == x_track ? 1 : 2);
                    auto& row = za.sum[static_cast<std::size_t>(cond)][static_cast<std::size_t>(i - 1)];
                    auto& prow = za.pmin[static_cast<std::size_t>(cond)][static_cast<std::size_t>(i - 1)];
                    for (std::size_t j = 0; j < n; ++j) {
                        const double p0 = post[(j * static_cast<std::size_t>(tracks) +
                                                static_cast<std::size_t>(t)) * 2];
                        const double p1 = post[(j * static_cast<std::size_t>(tracks) +
                                                static_cast<std::size_t>(t)) * 2 + 1];
                        row[j] += 2.0 * std::sqrt(p0 * p1);
                        prow[j] += std::min(p0, p1);
                    }
                }
                drv.absorb_level(i, true_plane);
            }
        }
    };

    if (threads <= 1 || chunks <= 1) {
        for (int c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<int> next{0};
        const int nw = std::min(threads, chunks);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        for (int w = 0; w < nw; ++w)
            pool.emplace_back([&] {
                for (int c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) run_chunk(c);
            });
        for (auto& th : pool) th.join();
    }

    ReliabilityEstimates est;
    for (int cond = 0; cond < 3; ++cond) {
        const bool want = cond == 0 || (cond == 1 && with_x) || (cond == 2 && with_y);
        if (!want) continue;
        est.z[cond].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
        est.pmin[cond].assign(static_cast<std::size_t>(ell), std::vector<double>(n, 0.0));
    }
    for (int c = 0; c < chunks; ++c) {
        for (int cond = 0; cond < 3; ++cond)
            for (std::size_t i = 0; i < acc[static_cast<std::size_t>(c)].sum[cond].size(); ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    est.z[cond][i][j] += acc[static_cast<std::size_t>(c)].sum[cond][i][j];
                    est.pmin[cond][i][j] += acc[static_cast<std::size_t>(c)].pmin[cond][i][j];
                }
    }
    const double inv = 1.0 / static_cast<double>(cfg.mc_samples);
    for (int cond = 0; cond < 3; ++cond) {
        for (auto& row : est.z[cond])
            for (auto& v : row) v = std::min(1.0 - 1e-12, std::max(1e-12, v * inv));
        for (auto& row : est.pmin[cond])
            for (auto& v : row) v = std::min(0.5, std::max(0.0, v * inv));
    }
    return est;
}

std::vector<double> estimate_bhattacharyya(int level, Conditioning cond, std::size_t n, int ell,
                                           const CodeChannel& chan,
                                           const ConstructionSampler& sampler,
                                           const ConstructionConfig& cfg, std::uint64_t seed,
                                           int threads) {
    if (level < 1 || level > ell) throw InvalidParameter("estimate_bhattacharyya: bad level");
    const bool with_x = cond == Conditioning::WithX;
    const bool with_y = cond == Conditioning::WithY;
    auto est = estimate_reliabilities(n, ell, chan, sampler, cfg, seed, threads, with_x, with_y);
    return est.z[static_cast<int>(cond)][static_cast<std::size_t>(level - 1)];
}

ConstructionRecord construct_sets(int round_k, std::size_t n, int ell, const CodeChannel& chan,
                                  const ConstructionSampler& sampler,
                                  const ConstructionConfig& cfg, std::uint64_t seed,
                                  int threads) {
    auto est = estimate_reliabilities(n, ell, chan, sampler, cfg, seed, threads, true, true);
    ConstructionRecord rec;
    rec.part_round = round_k;
    rec.noise_round = round_k;
    rec.z_prior = est.z[0];
    rec.z_x = est.z[1];
    rec.z_y = est.z[2];
    rec.sets.n = n;
    rec.sets.ell = ell;
    rec.sets.levels.resize(static_cast<std::size_t>(ell));
    for (int i = 0; i < ell; ++i) {
        auto& lv = rec.sets.levels[static_cast<std::size_t>(i)];
        lv.f1.assign(n, 0);
        lv.i2.assign(n, 0);
        lv.f1_det.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j)
            lv.f1_det[j] = est.z[0][static_cast<std::size_t>(i)][j] <= cfg.z_low ? 1 : 0;
    }
    // freeze-by-prior only within the minor-mass budget; the rest are
    // sampled by the encoder and transmitted if the side info cannot
    // recover them
    {
        std::vector<std::pair<double, std::pair<int, std::size_t>>> det;
        for (int i = 0; i < ell; ++i) {
            const auto& lv = rec.sets.levels[static_cast<std::size_t>(i)];
            for (std::size_t j = 0; j < n; ++j)
                if (lv.f1_det[j])
                    det.push_back({est.pmin[0][static_cast<std::size_t>(i)][j], {i, j}});
        }
        std::sort(det.begin(), det.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double acc = 0.0;
        std::size_t keep = 0;
        while (keep < det.size() && acc + det[keep].first <= cfg.freeze_minor_budget) {
            acc += det[keep].first;
            ++keep;
        }
        for (std::size_t i = keep; i < det.size(); ++i) {
            const auto [lvl, idx] = det[i].second;
            rec.sets.levels[static_cast<std::size_t>(lvl)].f1_det[idx] = 0;
        }
    }
    for (int i = 0; i < ell; ++i) {
        auto& lv = rec.sets.levels[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < n; ++j) {
            const double zp = est.z[0][static_cast<std::size_t>(i)][j];
            const double zx = est.z[1][static_cast<std::size_t>(i)][j];
            const double zy = est.z[2][static_cast<std::size_t>(i)][j];
            const bool f1 = zx >= cfg.z_high || lv.f1_det[j];
            bool i2 = zy <= cfg.z_low && zp >= cfg.z_high;
            if (f1) i2 = false;  // nesting: never MAP-decode a shared-random bit
            lv.f1[j] = f1 ? 1 : 0;
            lv.i2[j] = i2 ? 1 : 0;
        }
    }
    apply_i2_budget(rec.sets, est.pmin[2], cfg.i2_error_budget);
    rec.sets.validate();
    return rec;
}

ConstructionRecord construct_incremental_sets(const ConstructionRecord& diagonal,
                                              const ConstructionRecord& previous,
                                              int noise_round, const CodeChannel& chan,
                                              const ConstructionSampler& sampler,
                                              const ConstructionConfig& cfg, std::uint64_t seed,
                                              int threads) {
    const std::size_t n = diagonal.sets.n;
    const int ell = diagonal.sets.ell;
    if (previous.sets.n != n || previous.sets.ell != ell)
        throw InvalidParameter("construct_incremental_sets: inconsistent base records");
    auto est = estimate_reliabilities(n, ell, chan, sampler, cfg, seed, threads, false, true);

    ConstructionRecord rec;
    rec.part_round = diagonal.part_round;
    rec.noise_round = noise_round;
    rec.z_y = est.z[2];
    rec.sets.n = n;
    rec.sets.ell = ell;
    rec.sets.levels.resize(static_cast<std::size_t>(ell));
    for (int i = 0; i < ell; ++i) {
        auto& lv = rec.sets.levels[static_cast<std::size_t>(i)];
        const auto& dlv = diagonal.sets.levels[static_cast<std::size_t>(i)];
        const auto& plv = previous.sets.levels[static_cast<std::size_t>(i)];
        lv.f1 = dlv.f1;
        lv.f1_det = dlv.f1_det;
        lv.i2.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
            const double zp = diagonal.z_prior[static_cast<std::size_t>(i)][j];
            const double zy = est.z[2][static_cast<std::size_t>(i)][j];
            bool i2 = zy <= cfg.z_low && zp >= cfg.z_high;
            if (!plv.i2[j]) i2 = false;  // degraded nesting across guesses
            if (lv.f1[j]) i2 = false;
            lv.i2[j] = i2 ? 1 : 0;
        }
    }
    apply_i2_budget(rec.sets, est.pmin[2], cfg.i2_error_budget);
    rec.sets.validate();
    return rec;
}

// --- covering / packing ------------------------------------------------------

namespace {

// Runs the per-level passes shared by covering and packing. The per-level
// policy sees (level, index, posteriors over [obs, prior] tracks).
template <typename PolicyFn>
lattice::BitPlanes run_code_pass(const std::vector<double>& obs, const CodeSets& sets,
                                 const CodeChannel& chan, double noise_var, PolicyFn&& decide) {
    const std::size_t n = sets.n;
    const int ell = sets.ell;
    if (obs.size() != n) throw InvalidParameter("code pass: observation length mismatch");

    std::vector<std::vector<double>> q_obs(n);
    for (std::size_t j = 0; j < n; ++j)
        lattice::detail::residue_weights_gaussian(chan.prior, ell, obs[j], noise_var, q_obs[j]);
    std::vector<double> q_prior;
    lattice::detail::residue_weights_gaussian(chan.prior, ell, 0.0, 0.0, q_prior);

    // track 0 = prior (also the underflow fallback), track 1 = observation
    LevelDriver drv(n, ell, 2);
    drv.shared_table[0] = &q_prior;
    drv.per_coord[1] = &q_obs;

    ScEngine engine(n, 2);
    lattice::BitPlanes u_planes;
    u_planes.ell = ell;
    u_planes.n = n;
    u_planes.planes.assign(static_cast<std::size_t>(ell) * n, 0);

    std::vector<std::uint8_t> u(n), x(n);
    std::vector<double> post;
    for (int i = 1; i <= ell; ++i) {
        drv.build_leaf(i);
        ScEngine::Policy pol = [&](std::size_t idx, const double* p) -> int {
            // p[0],p[1]: prior track; p[2],p[3]: observation track
            return decide(i, idx, p[2], p[3], p[0], p[1]);
        };
        engine.run(drv.leaf, pol, u, x, &post);
        std::memcpy(u_planes.row(i - 1), u.data(), n);
        drv.absorb_level(i, x);
    }
    return u_planes;
}

} // namespace

CoveringResult covering_encode(const std::vector<double>& x_k, const CodeSets& sets,
                               const CodeChannel& chan, std::uint64_t shared_seed,
                               int code_round, Rng& rng) {
    CoveringResult res;
    res.u_planes = run_code_pass(
        x_k, sets, chan, chan.enc_noise_var,
        [&](int level, std::size_t idx, double p0, double p1, double pb0, double pb1) -> int {
            const auto& lv = sets.levels[static_cast<std::size_t>(level - 1)];
            if (lv.f1_det[idx]) return pb1 > pb0 ? 1 : 0;
            if (lv.f1[idx])
                return shared_frozen_bit(shared_seed, code_round, level, idx, pb0, pb1);
            (void)p0;
            return rng.uniform01() < p1 ? 1 : 0;  // randomized MAP
        });
    for (int i = 0; i < sets.ell; ++i) {
        const auto& lv = sets.levels[static_cast<std::size_t>(i)];
        const std::uint8_t* row = res.u_planes.row(i);
        for (std::size_t j = 0; j < sets.n; ++j)
            if (!lv.f1[j] && !lv.i2[j]) res.payload.push_back(row[j]);
    }
    return res;
}

lattice::BitPlanes packing_decode(const std::vector<double>& y_k, const CodeSets& sets,
                                  const std::vector<std::uint8_t>& received,
                                  const CodeChannel& chan, std::uint64_t shared_seed,
                                  int code_round) {
    if (received.size() != sets.df_count())
        throw ProtocolViolation("packing_decode: payload length mismatch");
    std::size_t cursor = 0;
    return run_code_pass(
        y_k, sets, chan, chan.dec_noise_var,
        [&](int level, std::size_t idx, double p0, double p1, double pb0, double pb1) -> int {
            const auto& lv = sets.levels[static_cast<std::size_t>(level - 1)];
            if (lv.i2[idx]) return p1 > p0 ? 1 : 0;  // MAP, ties to 0
            if (!lv.f1[idx]) return received[cursor++];
            if (lv.f1_det[idx]) return pb1 > pb0 ? 1 : 0;
            return shared_frozen_bit(shared_seed, code_round, level, idx, pb0, pb1);
        });
}

} // namespace uwz::polar
