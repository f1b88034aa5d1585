#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uwz/errors.hpp"
#include "uwz/hashtest.hpp"
#include "uwz/rng.hpp"
#include "uwz/selftest.hpp"

using namespace uwz;

TEST_CASE("choose_hash_params") {
    const auto p = hashtest::choose_hash_params(4096, 1.0, 1.0, 64);
    CHECK(p.t_range == doctest::Approx(4.0 * 64.0));
    CHECK(p.q == 11);  // ceil(1 + 4 sqrt 6)

    // invariant 6T^2/(q-1)^2 <= N Delta, across a parameter sweep
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = std::size_t{1} << (6 + rng.bits() % 8);
        const double delta = 0.1 + 3.0 * rng.uniform01();
        const double sx2 = 0.5 + 10.0 * rng.uniform01();
        const auto hp = hashtest::choose_hash_params(n, delta, sx2, 128);
        CHECK(6.0 * hp.t_range * hp.t_range / ((hp.q - 1.0) * (hp.q - 1.0)) <=
              static_cast<double>(n) * delta * (1.0 + 1e-12));
        CHECK(hp.q >= 2);
    }
    CHECK_THROWS_AS(hashtest::choose_hash_params(0, 1.0, 1.0, 4), InvalidParameter);
    CHECK_THROWS_AS(hashtest::choose_hash_params(16, -1.0, 1.0, 4), InvalidParameter);
}

TEST_CASE("quantize examples") {
    hashtest::HashParams p;
    p.m = 1;
    p.q = 5;
    p.t_range = 2.0;

    auto q1 = hashtest::quantize(0.4, p);
    REQUIRE(q1.has_value());
    CHECK(*q1 == 2);
    CHECK(hashtest::level_value(*q1, p) == doctest::Approx(0.0));

    CHECK(!hashtest::quantize(2.5, p).has_value());
    CHECK(!hashtest::quantize(-2.01, p).has_value());

    auto q0 = hashtest::quantize(-2.0, p);
    REQUIRE(q0.has_value());
    CHECK(*q0 == 0);
    CHECK(hashtest::level_value(*q0, p) == doctest::Approx(-2.0));

    auto qt = hashtest::quantize(2.0, p);  // boundary clamps to the top level
    REQUIRE(qt.has_value());
    CHECK(*qt == 4);

    // cell-width error bound for in-range values
    Rng rng(5);
    const double cell = 2.0 * p.t_range / (p.q - 1);
    for (int rep = 0; rep < 1000; ++rep) {
        const double v = -2.0 + 4.0 * rng.uniform01();
        const auto qi = hashtest::quantize(v, p);
        REQUIRE(qi.has_value());
        CHECK(std::abs(hashtest::level_value(*qi, p) - v) <= cell + 1e-12);
    }
}

TEST_CASE("make_hash determinism and zero input") {
    auto p = hashtest::choose_hash_params(64, 1.0, 1.0, 16, 5);
    std::vector<double> zero(64, 0.0);
    const auto h0 = hashtest::make_hash(zero, p);
    const auto z = hashtest::quantize(0.0, p);
    for (int v : h0.values) CHECK(v == *z);

    Rng rng(9);
    std::vector<double> x(64);
    for (auto& v : x) v = rng.normal();
    const auto h1 = hashtest::make_hash(x, p);
    const auto h2 = hashtest::make_hash(x, p);
    CHECK(h1.values == h2.values);
    p.seed_r = 6;
    const auto h3 = hashtest::make_hash(x, p);
    CHECK(h1.values != h3.values);
}

TEST_CASE("projection variance matches the squared norm") {
    Rng rng(3);
    std::vector<double> x(128);
    for (auto& v : x) v = rng.normal();
    double norm2 = 0.0;
    for (double v : x) norm2 += v * v;
    const std::size_t m = 4000;
    const auto proj = hashtest::project(x, m, 77);
    double acc = 0.0;
    for (double v : proj) acc += v * v;
    CHECK(acc / static_cast<double>(m) == doctest::Approx(norm2).epsilon(0.08));
}

TEST_CASE("closeness test statistic and degenerate handling") {
    auto p = hashtest::choose_hash_params(64, 1.0, 4.0, 8, 3);

    SUBCASE("projections equal to dequantized hash give gamma 0 and ACK") {
        Rng rng(1);
        std::vector<double> x(64);
        for (auto& v : x) v = rng.normal(0.0, 2.0);
        const auto h = hashtest::make_hash(x, p);
        std::vector<double> proj(p.m);
        for (std::size_t i = 0; i < p.m; ++i) proj[i] = hashtest::level_value(h.values[i], p);
        const auto res = hashtest::closeness_core(h, proj, p, 64, 1.0);
        CHECK(res.gamma == doctest::Approx(0.0));
        CHECK(res.verdict == hashtest::Verdict::ACK);
    }

    SUBCASE("all-overflow hash raises TestDegenerate") {
        hashtest::QuantizedHash h;
        h.values.assign(p.m, -1);
        std::vector<double> proj(p.m, 0.0);
        CHECK_THROWS_AS(hashtest::closeness_core(h, proj, p, 64, 1.0), TestDegenerate);
    }

    SUBCASE("identical reconstruction passes the full-vector path") {
        Rng rng(2);
        std::vector<double> x(64);
        for (auto& v : x) v = rng.normal(0.0, 2.0);
        const auto h = hashtest::make_hash(x, p);
        const auto res = hashtest::closeness_test(h, x, p, 1.0);
        CHECK(res.verdict == hashtest::Verdict::ACK);
        // gamma is just the quantization error here, far below the threshold
        CHECK(res.gamma <= 2.84 * 64.0);
    }
}

TEST_CASE("closeness error rates at reduced trial counts") {
    const std::size_t n = 1024;
    const double nd = static_cast<double>(n);
    // comfortably separated hypotheses: zero errors expected at m=512
    CHECK(selftest::closeness_error_rate(n, 1.0, 4.0, 512, 8.0 * nd, false, 400, 1) == 0.0);
    CHECK(selftest::closeness_error_rate(n, 1.0, 4.0, 512, nd, true, 400, 2) == 0.0);
    // near the threshold the small sketch is measurably worse
    const double e_small = selftest::closeness_error_rate(n, 1.0, 4.0, 288, 2.4 * nd, true,
                                                          600, 3);
    const double e_big = selftest::closeness_error_rate(n, 1.0, 4.0, 2048, 2.4 * nd, true,
                                                        600, 4);
    CHECK(e_small > e_big);
}

TEST_CASE("projection overflow probability at the 4-sigma clip") {
    // ||x||^2 = N sigma_x^2 exactly: each projection entry is
    // N(0, N sigma_x^2), so overflow beyond T = 4 sigma_x sqrt(N) has
    // probability 2Q(4) ~ 6.3e-5
    const std::size_t n = 4096;
    const auto p = hashtest::choose_hash_params(n, 1.0, 4.0, 8, 1);
    Rng rng(12);
    const double sx = std::sqrt(static_cast<double>(n) * 4.0);
    const int draws = 1000000;
    int overflow = 0;
    for (int i = 0; i < draws; ++i)
        if (!hashtest::quantize(rng.normal(0.0, sx), p)) ++overflow;
    CHECK(static_cast<double>(overflow) / draws <= 1e-4 * 1.5);
}

TEST_CASE("gamma concentrates between the distance and distance + N delta") {
    // fixed (x, x_hat) geometry, Monte-Carlo over fresh projection draws
    const std::size_t n = 512;
    const double delta = 1.0;
    const auto base = hashtest::choose_hash_params(n, delta, 4.0, 256, 0);
    Rng rng(21);
    std::vector<double> x(n), xhat(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = rng.normal(0.0, 2.0);
    // orthogonal-ish perturbation with squared norm about 1.5 N delta
    double d2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double e = rng.normal(0.0, std::sqrt(1.5 * delta));
        xhat[j] = x[j] - e;
        d2 += e * e;
    }
    double mean_gamma = 0.0;
    const int reps = 60;
    for (int r = 0; r < reps; ++r) {
        auto p = base;
        p.seed_r = 100 + static_cast<std::uint64_t>(r);
        const auto h = hashtest::make_hash(x, p);
        mean_gamma += hashtest::closeness_test(h, xhat, p, delta).gamma;
    }
    mean_gamma /= reps;
    CHECK(mean_gamma >= d2 * 0.97);
    CHECK(mean_gamma <= d2 + static_cast<double>(n) * delta);
}

TEST_CASE("hash serialization round trip") {
    auto p = hashtest::choose_hash_params(256, 1.0, 2.0, 33, 4);
    Rng rng(6);
    hashtest::QuantizedHash h;
    h.values.resize(p.m);
    for (auto& v : h.values) {
        const auto r = rng.bits() % static_cast<std::uint64_t>(p.q + 1);
        v = r == static_cast<std::uint64_t>(p.q) ? -1 : static_cast<int>(r);
    }
    const auto bytes = hashtest::serialize_hash(h, p);
    CHECK(bytes.size() == (p.m * static_cast<std::size_t>(p.bits_per_entry()) + 7) / 8);
    const auto h2 = hashtest::deserialize_hash(bytes, p);
    CHECK(h.values == h2.values);
    CHECK(hashtest::hash_bits(p) ==
          p.m * static_cast<std::size_t>(p.bits_per_entry()));
}
