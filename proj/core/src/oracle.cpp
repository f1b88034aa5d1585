#include "uwz/oracle.hpp"

#include <cmath>

#include "uwz/errors.hpp"

namespace uwz::oracle {

std::vector<std::vector<std::uint8_t>> polar_generator(std::size_t n) {
    if (n == 0 || (n & (n - 1)) != 0)
        throw InvalidParameter("polar_generator: n must be a power of two");
    std::vector<std::vector<std::uint8_t>> g{{1}};
    while (g.size() < n) {
        const std::size_t m = g.size();
        std::vector<std::vector<std::uint8_t>> g2(2 * m, std::vector<std::uint8_t>(2 * m, 0));
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) {
                // G2 = [[G, 0], [G, G]]
                g2[r][c] = g[r][c];
                g2[r + m][c] = g[r][c];
                g2[r + m][c + m] = g[r][c];
            }
        g = std::move(g2);
    }
    return g;
}

namespace {

std::vector<std::uint8_t> mat_vec_gf2(const std::vector<std::vector<std::uint8_t>>& g,
                                      const std::vector<std::uint8_t>& v) {
    const std::size_t n = v.size();
    std::vector<std::uint8_t> out(n, 0);
    for (std::size_t c = 0; c < n; ++c) {
        std::uint8_t acc = 0;
        for (std::size_t r = 0; r < n; ++r) acc ^= static_cast<std::uint8_t>(v[r] & g[r][c]);
        out[c] = acc;
    }
    return out;
}

} // namespace

std::vector<std::array<double, 2>>
enumerate_sc_conditionals(const std::vector<std::array<double, 2>>& weights,
                          const std::vector<std::uint8_t>& u_ref) {
    const std::size_t n = weights.size();
    if (n > 20) throw InvalidParameter("enumerate_sc_conditionals: too large");
    const auto g = polar_generator(n);

    std::vector<std::array<double, 2>> cond(n, {0.0, 0.0});
    std::vector<std::uint8_t> u(n);
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
        for (std::size_t j = 0; j < n; ++j) u[j] = (bits >> j) & 1u;
        const auto x = mat_vec_gf2(g, u);
        double w = 1.0;
        for (std::size_t j = 0; j < n; ++j) w *= weights[j][x[j]];
        // contribute to every index whose reference prefix matches
        for (std::size_t j = 0; j < n; ++j) {
            cond[j][u[j]] += w;
            if (u[j] != u_ref[j]) break;
        }
    }
    for (auto& c : cond) {
        const double s = c[0] + c[1];
        if (s > 0.0) {
            c[0] /= s;
            c[1] /= s;
        }
    }
    return cond;
}

std::vector<std::vector<std::array<double, 2>>>
enumerate_multilevel_conditionals(const std::vector<std::vector<double>>& q, int ell,
                                  const std::vector<long>& true_residue) {
    const std::size_t n = q.size();
    const long m = 1L << ell;
    double combos = 1.0;
    for (std::size_t j = 0; j < n; ++j) combos *= static_cast<double>(m);
    if (combos > 1u << 20)
        throw InvalidParameter("enumerate_multilevel_conditionals: too large");

    const auto g = polar_generator(n);
    std::vector<std::vector<std::uint8_t>> true_u(static_cast<std::size_t>(ell));
    for (int i = 0; i < ell; ++i) {
        std::vector<std::uint8_t> plane(n);
        for (std::size_t j = 0; j < n; ++j)
            plane[j] = static_cast<std::uint8_t>((true_residue[j] >> i) & 1L);
        true_u[static_cast<std::size_t>(i)] = mat_vec_gf2(g, plane);
    }

    std::vector<std::vector<std::array<double, 2>>> cond(
        static_cast<std::size_t>(ell), std::vector<std::array<double, 2>>(n, {0.0, 0.0}));

    std::vector<long> a(n, 0);
    std::vector<std::uint8_t> plane(n), u(n);
    const std::uint64_t total = static_cast<std::uint64_t>(combos);
    for (std::uint64_t it = 0; it < total; ++it) {
        std::uint64_t rem = it;
        double w = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            a[j] = static_cast<long>(rem % static_cast<std::uint64_t>(m));
            rem /= static_cast<std::uint64_t>(m);
            w *= q[j][static_cast<std::size_t>(a[j])];
        }
        if (w == 0.0) continue;
        for (int i = 1; i <= ell; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                plane[j] = static_cast<std::uint8_t>((a[j] >> (i - 1)) & 1L);
            u = mat_vec_gf2(g, plane);
            const auto& tu = true_u[static_cast<std::size_t>(i - 1)];
            bool full_match = true;
            for (std::size_t j = 0; j < n; ++j) {
                cond[static_cast<std::size_t>(i - 1)][j][u[j]] += w;
                if (u[j] != tu[j]) {
                    full_match = false;
                    break;
                }
            }
            if (!full_match) break;  // higher levels condition on true lower planes
        }
    }
    for (auto& lv : cond)
        for (auto& c : lv) {
            const double s = c[0] + c[1];
            if (s > 0.0) {
                c[0] /= s;
                c[1] /= s;
            }
        }
    return cond;
}

double brute_dg_pmf(double sigma, double center, double scale, long window, double lambda) {
    const long n0 = std::lround(center / scale);
    double z = 0.0;
    for (long n = n0 - window; n <= n0 + window; ++n) {
        const double d = static_cast<double>(n) * scale - center;
        z += std::exp(-d * d / (2.0 * sigma * sigma));
    }
    const double d = lambda - center;
    return std::exp(-d * d / (2.0 * sigma * sigma)) / z;
}

std::array<double, 2> lmmse_coefficients(double xx, double xy, double xa, double yy, double ya,
                                         double aa) {
    (void)xx;
    const double det = yy * aa - ya * ya;
    if (det == 0.0) throw InvalidParameter("lmmse_coefficients: singular covariance");
    const double by = (xy * aa - xa * ya) / det;
    const double ba = (xa * yy - xy * ya) / det;
    return {by, ba};
}

double cmi_entropy_route(double aa, double ab, double ac, double bb, double bc, double cc) {
    // var(A|C) and var(A|B,C) via Schur complements
    const double var_a_c = aa - ac * ac / cc;
    const double det_bc = bb * cc - bc * bc;
    // regression of A on (B, C)
    const double wb = (ab * cc - ac * bc) / det_bc;
    const double wc = (ac * bb - ab * bc) / det_bc;
    const double var_a_bc = aa - wb * ab - wc * ac;
    return 0.5 * std::log2(var_a_c / var_a_bc);
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InvalidParameter("tv_distance: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

} // namespace uwz::oracle
