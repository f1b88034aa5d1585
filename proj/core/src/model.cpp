#include "uwz/model.hpp"

#include <cmath>
#include <string>

#include "uwz/errors.hpp"
#include "uwz/rng.hpp"

namespace uwz::model {

void SourceParams::validate() const {
    if (!(sigma_x2 > sigma_z2))
        throw InvalidParameter("SourceParams: need sigma_x2 > sigma_z2");
    if (!(sigma_z2 > delta))
        throw InvalidParameter("SourceParams: need sigma_z2 > delta");
    if (!(delta > 0.0))
        throw InvalidParameter("SourceParams: need delta > 0");
}

GuessSchedule make_schedule(double interval_lo, double interval_hi, double omega) {
    if (!(interval_lo > 0.0) || !(interval_hi > 0.0) || !(omega > 0.0))
        throw InvalidParameter("make_schedule: inputs must be positive");
    if (interval_hi < interval_lo)
        throw InvalidParameter("make_schedule: interval_hi < interval_lo");

    const double factor = std::exp2(2.0 * omega);
    GuessSchedule sched;
    double s = interval_lo;
    sched.sigma2.push_back(s);
    // Cover interval_hi, rounding the last point up past it if needed.
    while (s < interval_hi * (1.0 - 1e-12)) {
        s *= factor;
        sched.sigma2.push_back(s);
    }
    double w = 0.0;
    for (std::size_t i = 0; i + 1 < sched.sigma2.size(); ++i)
        w = std::max(w, 0.5 * std::log2(sched.sigma2[i + 1] / sched.sigma2[i]));
    sched.omega = (sched.sigma2.size() > 1) ? w : omega;
    return sched;
}

RoundParams round_params(int k, const GuessSchedule& sched, const SourceParams& src) {
    if (k < 1 || k > sched.rounds())
        throw InvalidParameter("round_params: round index out of range");

    auto pad = [&](int j) {
        // alpha_j * Delta_j at guess j, with the j = 0 convention that the
        // zeroth "auxiliary" is empty: pad(0) = sigma_x^2.
        if (j == 0) return src.sigma_x2;
        const double s2 = sched.guess(j);
        if (!(s2 > src.delta))
            throw InvalidParameter("round_params: guess sigma^2 <= delta (pole in Delta_k)");
        if (!(s2 < src.sigma_x2))
            throw InvalidParameter("round_params: guess sigma^2 >= sigma_x^2 (pole in ybar scale)");
        const double dj = s2 * src.delta / (s2 - src.delta);
        return src.sigma_x2 * dj / (src.sigma_x2 + dj);
    };

    RoundParams rp;
    rp.k = k;
    rp.sigma_k2 = sched.guess(k);
    if (!(rp.sigma_k2 > src.delta))
        throw InvalidParameter("round_params: sigma_k^2 <= delta (pole in Delta_k)");
    if (!(rp.sigma_k2 < src.sigma_x2))
        throw InvalidParameter("round_params: sigma_k^2 >= sigma_x^2 (pole in ybar scale)");

    rp.delta_k = rp.sigma_k2 * src.delta / (rp.sigma_k2 - src.delta);
    rp.alpha_k = src.sigma_x2 / (src.sigma_x2 + rp.delta_k);
    rp.var_t = rp.alpha_k * rp.delta_k;
    rp.var_part = pad(k - 1) - rp.var_t;
    rp.var_zprime = src.sigma_x2 * rp.sigma_k2 / (src.sigma_x2 - rp.sigma_k2);
    rp.ybar_scale = src.sigma_x2 / (src.sigma_x2 - rp.sigma_k2);

    if (!(rp.var_part > 0.0))
        throw InvalidParameter("round_params: non-increasing schedule (var_part <= 0)");
    return rp;
}

std::pair<std::vector<double>, std::vector<double>>
sample_source(std::size_t n, const SourceParams& src, std::uint64_t seed) {
    if (n < 1) throw InvalidParameter("sample_source: n must be >= 1");
    if (!(src.sigma_z2 >= 0.0) || !(src.sigma_z2 < src.sigma_x2))
        throw InvalidParameter("sample_source: invalid covariance (need 0 <= sigma_z2 < sigma_x2)");

    Rng rng(mix_keys(seed, seed_tag::source));
    const double sy = std::sqrt(src.sigma_x2 - src.sigma_z2);
    const double sz = std::sqrt(src.sigma_z2);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double yi = rng.normal(0.0, sy);
        const double zi = sz > 0.0 ? rng.normal(0.0, sz) : 0.0;
        y[i] = yi;
        x[i] = yi + zi;
    }
    return {std::move(x), std::move(y)};
}

std::vector<double> scaled_side_info(const std::vector<double>& y, const SourceParams& src,
                                     const RoundParams& rp) {
    (void)src;
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = rp.ybar_scale * y[i];
    return out;
}

double mmse_coefficient(const SourceParams& src, const RoundParams& rp) {
    return (src.sigma_x2 - rp.sigma_k2) * src.delta / (src.sigma_x2 * rp.sigma_k2);
}

std::vector<double> mmse_reconstruct(const std::vector<double>& a_hat,
                                     const std::vector<double>& ybar, const SourceParams& src,
                                     const RoundParams& rp) {
    if (a_hat.size() != ybar.size())
        throw InvalidParameter("mmse_reconstruct: length mismatch");
    const double c = mmse_coefficient(src, rp);
    std::vector<double> xhat(a_hat.size());
    for (std::size_t i = 0; i < a_hat.size(); ++i)
        xhat[i] = a_hat[i] + c * (ybar[i] - a_hat[i]);
    return xhat;
}

namespace detail {

double gaussian_cmi(double aa, double ab, double ac, double bb, double bc, double cc) {
    // I(A^B|C) = 1/2 log2( det(K_AC) det(K_BC) / (det(K_C) det(K_ABC)) )
    const double det_ac = aa * cc - ac * ac;
    const double det_bc = bb * cc - bc * bc;
    const double det_abc = aa * (bb * cc - bc * bc) - ab * (ab * cc - bc * ac) +
                           ac * (ab * bc - bb * ac);
    if (!(det_ac > 0.0) || !(det_bc > 0.0) || !(det_abc > 0.0) || !(cc > 0.0))
        throw InvalidParameter("gaussian_cmi: covariance not positive definite");
    return 0.5 * std::log2(det_ac * det_bc / (cc * det_abc));
}

} // namespace detail

std::pair<double, double> mi_decomposition(int k, const GuessSchedule& sched,
                                           const SourceParams& src) {
    if (k < 1 || k > sched.rounds())
        throw InvalidParameter("mi_decomposition: round index out of range");

    const RoundParams rp_k = round_params(k, sched, src);
    const double vz = rp_k.var_zprime;
    const double sx2 = src.sigma_x2;

    // lhs: I(A_k ^ X | Ybar) with A_k the round-k auxiliary,
    // X = A_k + T'_k, Ybar = X + Z'.
    const double va = rp_k.alpha_k * sx2;
    const double lhs = detail::gaussian_cmi(va, va, va, sx2, sx2, sx2 + vz);

    // rhs: sum over parts j = 0..k-1 of I(X'_j ^ X_{j+1} | Y_{j+1}) with
    // X_{j+1} = X'_j + T_{j+1} and Y_{j+1} = X_{j+1} + Z' at the round-k
    // noise.
    double rhs = 0.0;
    for (int j = 0; j < k; ++j) {
        const RoundParams rp = round_params(j + 1, sched, src);
        const double vp = rp.var_part;
        const double vx = vp + rp.var_t;  // var(X_{j+1})
        rhs += detail::gaussian_cmi(vp, vp, vp, vx, vx, vx + vz);
    }
    return {lhs, rhs};
}

} // namespace uwz::model
