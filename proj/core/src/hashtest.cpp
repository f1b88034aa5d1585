#include "uwz/hashtest.hpp"

#include <cmath>

#include "uwz/errors.hpp"
#include "uwz/rng.hpp"

namespace uwz::hashtest {

int HashParams::bits_per_entry() const {
    int b = 0;
    while ((1 << b) < q + 1) ++b;
    return b;
}

HashParams choose_hash_params(std::size_t n, double delta, double sigma_x2, std::size_t m,
                              std::uint64_t seed_r) {
    if (n == 0 || !(delta > 0.0) || !(sigma_x2 > 0.0) || m == 0)
        throw InvalidParameter("choose_hash_params: inputs must be positive");
    HashParams p;
    p.m = m;
    p.seed_r = seed_r;
    p.t_range = 4.0 * std::sqrt(sigma_x2) * std::sqrt(static_cast<double>(n));
    const double qmin = 1.0 + p.t_range * std::sqrt(6.0 / (static_cast<double>(n) * delta));
    p.q = std::max(2, static_cast<int>(std::ceil(qmin)));
    return p;
}

std::optional<int> quantize(double v, const HashParams& p) {
    const double t = p.t_range;
    if (v < -t || v > t) return std::nullopt;
    int i = static_cast<int>(std::floor((v + t) * (p.q - 1) / (2.0 * t)));
    if (i > p.q - 1) i = p.q - 1;  // v == T
    if (i < 0) i = 0;
    return i;
}

double level_value(int index, const HashParams& p) {
    return -p.t_range + static_cast<double>(index) * 2.0 * p.t_range / (p.q - 1);
}

std::vector<double> project(const std::vector<double>& x, std::size_t m, std::uint64_t seed_r) {
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        Rng rng(mix_keys(seed_r, seed_tag::hash_proj, i));
        double acc = 0.0;
        for (double xj : x) acc += rng.normal() * xj;
        out[i] = acc;
    }
    return out;
}

QuantizedHash make_hash(const std::vector<double>& x, const HashParams& p) {
    const auto proj = project(x, p.m, p.seed_r);
    QuantizedHash h;
    h.values.resize(p.m);
    for (std::size_t i = 0; i < p.m; ++i) {
        const auto qi = quantize(proj[i], p);
        h.values[i] = qi ? *qi : -1;
    }
    return h;
}

TestResult closeness_core(const QuantizedHash& hash, const std::vector<double>& xhat_proj,
                          const HashParams& p, std::size_t n, double delta) {
    if (hash.values.size() != p.m || xhat_proj.size() != p.m)
        throw InvalidParameter("closeness_core: entry count mismatch");
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < p.m; ++i) {
        if (hash.values[i] < 0) continue;
        const double d = level_value(hash.values[i], p) - xhat_proj[i];
        acc += d * d;
        ++used;
    }
    if (used == 0) throw TestDegenerate("closeness test: all hash entries overflowed");
    TestResult r;
    r.m_used = used;
    r.gamma = acc / static_cast<double>(used);
    r.verdict = r.gamma <= 2.84 * static_cast<double>(n) * delta ? Verdict::ACK : Verdict::NACK;
    return r;
}

TestResult closeness_test(const QuantizedHash& hash, const std::vector<double>& x_hat,
                          const HashParams& p, double delta) {
    const auto proj = project(x_hat, p.m, p.seed_r);
    return closeness_core(hash, proj, p, x_hat.size(), delta);
}

std::vector<std::uint8_t> serialize_hash(const QuantizedHash& hash, const HashParams& p) {
    const int bpe = p.bits_per_entry();
    std::vector<std::uint8_t> out((hash.values.size() * static_cast<std::size_t>(bpe) + 7) / 8,
                                  0);
    std::size_t bitpos = 0;
    for (int v : hash.values) {
        const unsigned enc = v < 0 ? static_cast<unsigned>(p.q) : static_cast<unsigned>(v);
        for (int b = bpe - 1; b >= 0; --b) {
            if ((enc >> b) & 1u)
                out[bitpos / 8] |= static_cast<std::uint8_t>(0x80u >> (bitpos % 8));
            ++bitpos;
        }
    }
    return out;
}

QuantizedHash deserialize_hash(const std::vector<std::uint8_t>& bytes, const HashParams& p) {
    const int bpe = p.bits_per_entry();
    if (bytes.size() * 8 < p.m * static_cast<std::size_t>(bpe))
        throw InvalidParameter("deserialize_hash: buffer too small");
    QuantizedHash h;
    h.values.resize(p.m);
    std::size_t bitpos = 0;
    for (std::size_t i = 0; i < p.m; ++i) {
        unsigned v = 0;
        for (int b = 0; b < bpe; ++b) {
            v = (v << 1) | ((bytes[bitpos / 8] >> (7 - bitpos % 8)) & 1u);
            ++bitpos;
        }
        if (v > static_cast<unsigned>(p.q))
            throw InvalidParameter("deserialize_hash: symbol out of range");
        h.values[i] = v == static_cast<unsigned>(p.q) ? -1 : static_cast<int>(v);
    }
    return h;
}

std::size_t hash_bits(const HashParams& p) {
    return p.m * static_cast<std::size_t>(p.bits_per_entry());
}

} // namespace uwz::hashtest
