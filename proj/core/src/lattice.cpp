#include "uwz/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "uwz/errors.hpp"

namespace uwz::lattice {

Lattice1D make_lattice(int t) {
    if (t < 1) throw InvalidParameter("make_lattice: t must be >= 1");
    return Lattice1D{t, std::exp2(-static_cast<double>(t) / 4.0)};
}

DiscreteGaussianSpec make_dg(const Lattice1D& lat, double sigma, double center, long window) {
    if (!(sigma > 0.0)) throw InvalidParameter("make_dg: sigma must be positive");
    if (!(lat.scale > 0.0)) throw InvalidParameter("make_dg: invalid lattice");
    if (window < 0) window = static_cast<long>(std::ceil(8.0 * sigma / lat.scale));
    if (static_cast<double>(window) * lat.scale < 8.0 * sigma)
        throw InvalidParameter("make_dg: window*scale must cover 8*sigma");
    return DiscreteGaussianSpec{lat, sigma, center, window};
}

namespace detail {

DgTable build_dg_table(const DiscreteGaussianSpec& spec) {
    DgTable t;
    t.scale = spec.lat.scale;
    t.window = spec.window;
    t.n0 = std::lround(spec.center / spec.lat.scale);
    t.w.resize(static_cast<std::size_t>(2 * spec.window + 1));
    double z = 0.0;
    for (long i = 0; i < 2 * spec.window + 1; ++i) {
        const double lam = static_cast<double>(t.n0 - spec.window + i) * t.scale;
        const double d = lam - spec.center;
        t.w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * spec.sigma * spec.sigma));
        z += t.w[static_cast<std::size_t>(i)];
    }
    for (auto& v : t.w) v /= z;
    return t;
}

std::vector<double> residue_weights(const DgTable& table, int ell, bool with_obs, double obs,
                                    double noise_var) {
    const long m = 1L << ell;
    std::vector<double> q(static_cast<std::size_t>(m), 0.0);
    const double inv2v = with_obs ? 1.0 / (2.0 * noise_var) : 0.0;
    for (long n = table.lo(); n <= table.hi(); ++n) {
        double w = table.w[static_cast<std::size_t>(n - table.lo())];
        if (with_obs) {
            const double d = obs - static_cast<double>(n) * table.scale;
            w *= std::exp(-d * d * inv2v);
        }
        const long r = ((n % m) + m) % m;
        q[static_cast<std::size_t>(r)] += w;
    }
    return q;
}

std::pair<double, double> fold_level(const std::vector<double>& q, long residue_class,
                                     int level) {
    const long m = static_cast<long>(q.size());
    const long half = 1L << (level - 1);
    const long step = half * 2;
    double w0 = 0.0, w1 = 0.0;
    for (long r = residue_class; r < m; r += step) w0 += q[static_cast<std::size_t>(r)];
    for (long r = residue_class + half; r < m; r += step) w1 += q[static_cast<std::size_t>(r)];
    return {w0, w1};
}

void residue_weights_gaussian(const DiscreteGaussianSpec& spec, int ell, double obs,
                              double noise_var, std::vector<double>& q) {
    const long m = 1L << ell;
    q.assign(static_cast<std::size_t>(m), 0.0);
    const double s = spec.lat.scale;
    const long n0 = std::lround(spec.center / s);
    const long lo = n0 - spec.window;
    const long hi = n0 + spec.window;

    const bool with_obs = noise_var > 0.0;
    // E(n) = A n^2 + B n + const
    double a = s * s / (2.0 * spec.sigma * spec.sigma);
    double b = -spec.center * s / (spec.sigma * spec.sigma);
    if (with_obs) {
        a += s * s / (2.0 * noise_var);
        b += -obs * s / noise_var;
    }
    const double peak = -b / (2.0 * a);
    long npk = std::lround(std::min(std::max(peak, static_cast<double>(lo)),
                                    static_cast<double>(hi)));

    const double decay = std::exp(-2.0 * a);
    auto residue_of = [&](long n) { return ((n % m) + m) % m; };

    // upward from the anchor (inclusive)
    {
        double w = 1.0;
        long r = residue_of(npk);
        q[static_cast<std::size_t>(r)] += w;
        double ratio = std::exp(-(a * (2.0 * static_cast<double>(npk) + 1.0) + b));
        for (long n = npk + 1; n <= hi; ++n) {
            w *= ratio;
            ratio *= decay;
            if (w < 1e-300) break;
            r = (r + 1 == m) ? 0 : r + 1;
            q[static_cast<std::size_t>(r)] += w;
        }
    }
    // downward from the anchor (exclusive)
    {
        double w = 1.0;
        long r = residue_of(npk);
        double ratio = std::exp(a * (2.0 * static_cast<double>(npk) - 1.0) + b);
        for (long n = npk - 1; n >= lo; --n) {
            w *= ratio;
            ratio *= decay;
            if (w < 1e-300) break;
            r = (r == 0) ? m - 1 : r - 1;
            q[static_cast<std::size_t>(r)] += w;
        }
    }
}

DgSampler build_dg_sampler(const DiscreteGaussianSpec& spec) {
    DgSampler s;
    s.table = build_dg_table(spec);
    s.cdf.resize(s.table.w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < s.table.w.size(); ++i) {
        acc += s.table.w[i];
        s.cdf[i] = acc;
    }
    s.cdf.back() = 1.0;
    return s;
}

double dg_draw(const DgSampler& s, Rng& rng) {
    const double u = rng.uniform01();
    const auto it = std::lower_bound(s.cdf.begin(), s.cdf.end(), u);
    const long idx = static_cast<long>(it - s.cdf.begin());
    return static_cast<double>(s.table.lo() + idx) * s.table.scale;
}

} // namespace detail

double dg_pmf(const DiscreteGaussianSpec& spec, double lambda) {
    const double nf = lambda / spec.lat.scale;
    const double nr = std::round(nf);
    if (std::abs(nf - nr) > 1e-9)
        throw InvalidParameter("dg_pmf: point is not on the lattice");
    const long n = static_cast<long>(nr);
    const long n0 = std::lround(spec.center / spec.lat.scale);
    if (n < n0 - spec.window || n > n0 + spec.window) return 0.0;
    const auto table = detail::build_dg_table(spec);
    return table.w[static_cast<std::size_t>(n - table.lo())];
}

std::vector<double> dg_sample(const DiscreteGaussianSpec& spec, std::size_t n, Rng& rng) {
    const auto table = detail::build_dg_table(spec);
    std::vector<double> cdf(table.w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < table.w.size(); ++i) {
        acc += table.w[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const long idx = static_cast<long>(it - cdf.begin());
        out[i] = static_cast<double>(table.lo() + idx) * table.scale;
    }
    return out;
}

BitPlanes point_to_planes(const std::vector<double>& v, int ell, const Lattice1D& lat) {
    if (ell < 1) throw InvalidParameter("point_to_planes: ell must be >= 1");
    BitPlanes bp;
    bp.ell = ell;
    bp.n = v.size();
    bp.planes.assign(static_cast<std::size_t>(ell) * v.size(), 0);
    const long m = 1L << ell;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double nf = v[j] / lat.scale;
        const double nr = std::round(nf);
        if (std::abs(nf - nr) > 1e-9)
            throw InvalidParameter("point_to_planes: coordinate not on the lattice");
        const long r = ((static_cast<long>(nr) % m) + m) % m;
        for (int i = 0; i < ell; ++i)
            bp.row(i)[j] = static_cast<std::uint8_t>((r >> i) & 1L);
    }
    return bp;
}

std::vector<double> planes_to_point(const BitPlanes& planes, const Lattice1D& lat) {
    const long m = 1L << planes.ell;
    std::vector<double> v(planes.n);
    for (std::size_t j = 0; j < planes.n; ++j) {
        long r = 0;
        for (int i = 0; i < planes.ell; ++i)
            r |= static_cast<long>(planes.row(i)[j]) << i;
        if (r >= m / 2) r -= m;  // centered representative
        v[j] = static_cast<double>(r) * lat.scale;
    }
    return v;
}

std::pair<double, double> level_channel_weights(double obs, long residue_class, int level,
                                                const DiscreteGaussianSpec& spec,
                                                double noise_var) {
    if (level < 1) throw InvalidParameter("level_channel_weights: level must be >= 1");
    if (residue_class < 0 || residue_class >= (1L << (level - 1)))
        throw InvalidParameter("level_channel_weights: residue class out of range");
    if (!(noise_var > 0.0))
        throw InvalidParameter("level_channel_weights: noise_var must be positive");

    const auto table = detail::build_dg_table(spec);
    const long half = 1L << (level - 1);
    const long step = half * 2;
    const double inv2v = 1.0 / (2.0 * noise_var);
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * noise_var);
    double w[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    for (long n = table.lo(); n <= table.hi(); ++n) {
        const long r = ((n % step) + step) % step;
        int b;
        if (r == residue_class) b = 0;
        else if (r == residue_class + half) b = 1;
        else continue;
        ++count[b];
        const double d = obs - static_cast<double>(n) * table.scale;
        w[b] += table.w[static_cast<std::size_t>(n - table.lo())] * norm *
                std::exp(-d * d * inv2v);
    }
    if (count[0] == 0 || count[1] == 0)
        throw DegenerateWeight("level_channel_weights: empty coset within window");
    return {w[0], w[1]};
}

std::pair<double, double> level_channel_prior_weights(long residue_class, int level,
                                                      const DiscreteGaussianSpec& spec) {
    if (level < 1) throw InvalidParameter("level_channel_prior_weights: level must be >= 1");
    if (residue_class < 0 || residue_class >= (1L << (level - 1)))
        throw InvalidParameter("level_channel_prior_weights: residue class out of range");
    const auto table = detail::build_dg_table(spec);
    const long half = 1L << (level - 1);
    const long step = half * 2;
    double w[2] = {0.0, 0.0};
    for (long n = table.lo(); n <= table.hi(); ++n) {
        const long r = ((n % step) + step) % step;
        if (r == residue_class) w[0] += table.w[static_cast<std::size_t>(n - table.lo())];
        else if (r == residue_class + half)
            w[1] += table.w[static_cast<std::size_t>(n - table.lo())];
    }
    return {w[0], w[1]};
}

} // namespace uwz::lattice
