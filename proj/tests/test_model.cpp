#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uwz/errors.hpp"
#include "uwz/model.hpp"
#include "uwz/oracle.hpp"
#include "uwz/rng.hpp"

using namespace uwz;

TEST_CASE("make_schedule geometric grids") {
    const auto s1 = model::make_schedule(2.0, 8.0, 0.5);
    REQUIRE(s1.sigma2.size() == 3);
    CHECK(s1.sigma2[0] == doctest::Approx(2.0));
    CHECK(s1.sigma2[1] == doctest::Approx(4.0));
    CHECK(s1.sigma2[2] == doctest::Approx(8.0));
    CHECK(s1.rounds() == 2);
    CHECK(s1.omega == doctest::Approx(0.5));

    const auto s2 = model::make_schedule(2.0, 2.0, 0.5);
    CHECK(s2.sigma2.size() == 1);
    CHECK(s2.rounds() == 0);

    const auto s3 = model::make_schedule(2.0, 7.0, 0.5);
    REQUIRE(s3.sigma2.size() == 3);
    CHECK(s3.sigma2[2] == doctest::Approx(8.0));  // rounded up past hi

    CHECK_THROWS_AS(model::make_schedule(-1.0, 2.0, 0.5), InvalidParameter);
    CHECK_THROWS_AS(model::make_schedule(2.0, 8.0, 0.0), InvalidParameter);
    CHECK_THROWS_AS(model::make_schedule(8.0, 2.0, 0.5), InvalidParameter);
}

TEST_CASE("round_params closed forms and poles") {
    model::GuessSchedule sched;
    sched.sigma2 = {1.5, 2.0};
    model::SourceParams src{4.0, 2.0, 1.0};

    const auto rp = model::round_params(1, sched, src);
    CHECK(rp.delta_k == doctest::Approx(2.0));
    CHECK(rp.alpha_k == doctest::Approx(2.0 / 3.0));
    CHECK(rp.var_t == doctest::Approx(4.0 / 3.0));
    CHECK(rp.var_part == doctest::Approx(4.0 - 4.0 / 3.0));
    CHECK(rp.ybar_scale == doctest::Approx(2.0));

    // pole sigma_k^2 = delta
    model::GuessSchedule pole1;
    pole1.sigma2 = {0.8, 1.0};
    CHECK_THROWS_AS(model::round_params(1, pole1, src), InvalidParameter);
    // pole sigma_k^2 = sigma_x^2
    model::GuessSchedule pole2;
    pole2.sigma2 = {2.0, 4.0};
    CHECK_THROWS_AS(model::round_params(1, pole2, src), InvalidParameter);
    CHECK_THROWS_AS(model::round_params(2, sched, src), InvalidParameter);

    // var(Z') closed form
    model::GuessSchedule s3;
    s3.sigma2 = {0.9, 1.0};
    model::SourceParams src3{2.0, 1.0, 0.5};
    CHECK(model::round_params(1, s3, src3).var_zprime == doctest::Approx(2.0));
}

TEST_CASE("round params invariants over random draws") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const double delta = 0.2 + 2.0 * rng.uniform01();
        const double lo = delta * (1.1 + rng.uniform01());
        const double hi = lo * (1.0 + 2.5 * rng.uniform01());
        const auto sched = model::make_schedule(lo, hi, 0.2 + 0.4 * rng.uniform01());
        if (sched.rounds() < 1) continue;
        const double sx2 = sched.sigma2.back() * (1.2 + rng.uniform01());
        model::SourceParams src{sx2, sched.guess(1), delta};
        double prev_pad = sx2;
        for (int k = 1; k <= sched.rounds(); ++k) {
            const auto rp = model::round_params(k, sched, src);
            CHECK(rp.delta_k > delta);
            CHECK(rp.alpha_k > 0.0);
            CHECK(rp.alpha_k < 1.0);
            CHECK(rp.var_part > 0.0);
            // telescoping: var_part + var_t equals the previous residual
            CHECK(rp.var_part + rp.var_t == doctest::Approx(prev_pad).epsilon(1e-12));
            prev_pad = rp.var_t;
        }
    }
}

TEST_CASE("sample_source determinism and degenerate noise") {
    model::SourceParams src{4.0, 0.0, 1.0};
    auto [x1, y1] = model::sample_source(64, src, 42);
    auto [x2, y2] = model::sample_source(64, src, 42);
    CHECK(x1 == x2);
    CHECK(y1 == y2);
    for (std::size_t i = 0; i < x1.size(); ++i) CHECK(x1[i] == y1[i]);  // z -> 0

    model::SourceParams bad{1.0, 2.0, 0.5};
    CHECK_THROWS_AS(model::sample_source(8, bad, 1), InvalidParameter);
    CHECK_THROWS_AS(model::sample_source(0, src, 1), InvalidParameter);
}

TEST_CASE("sample_source empirical covariance at 1e6") {
    model::SourceParams src{4.0, 1.0, 0.5};
    const std::size_t n = 1000000;
    auto [x, y] = model::sample_source(n, src, 9);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double inv = 1.0 / static_cast<double>(n);
    CHECK(sxx * inv == doctest::Approx(4.0).epsilon(0).scale(0).epsilon(0.02 / 4.0));
    CHECK(sxy * inv == doctest::Approx(3.0).scale(0).epsilon(0.02 / 3.0));
    CHECK(syy * inv == doctest::Approx(3.0).scale(0).epsilon(0.02 / 3.0));
}

TEST_CASE("scaled side info") {
    model::GuessSchedule sched;
    sched.sigma2 = {1.5, 2.0};
    model::SourceParams src{4.0, 2.0, 1.0};
    const auto rp = model::round_params(1, sched, src);
    const auto out = model::scaled_side_info({1.0, -1.0}, src, rp);
    CHECK(out[0] == doctest::Approx(2.0));
    CHECK(out[1] == doctest::Approx(-2.0));
    CHECK(model::scaled_side_info({0.0}, src, rp)[0] == 0.0);
}

TEST_CASE("scaled side info variance composition at matched guess") {
    model::GuessSchedule sched;
    sched.sigma2 = {1.5, 2.0};
    model::SourceParams src{4.0, 2.0, 1.0};  // true noise equals the guess
    const auto rp = model::round_params(1, sched, src);
    auto [x, y] = model::sample_source(400000, src, 5);
    const auto yb = model::scaled_side_info(y, src, rp);
    double acc = 0.0;
    for (double v : yb) acc += v * v;
    const double var = acc / static_cast<double>(yb.size());
    CHECK(var == doctest::Approx(src.sigma_x2 + rp.var_zprime).epsilon(0.02));
}

TEST_CASE("mmse_reconstruct examples and covariance oracle") {
    model::GuessSchedule sched;
    sched.sigma2 = {0.9, 1.0};
    model::SourceParams src{2.0, 1.0, 0.5};
    const auto rp = model::round_params(1, sched, src);

    const auto same = model::mmse_reconstruct({1.5}, {1.5}, src, rp);
    CHECK(same[0] == doctest::Approx(1.5));  // zero innovation

    const auto xh = model::mmse_reconstruct({0.0}, {1.0}, src, rp);
    CHECK(xh[0] == doctest::Approx(0.25));

    CHECK_THROWS_AS(model::mmse_reconstruct({0.0, 1.0}, {1.0}, src, rp), InvalidParameter);

    // coefficient equals the linear-MMSE gain from the joint covariance
    const double va = rp.alpha_k * src.sigma_x2;
    const double vz = rp.var_zprime;
    const auto co = oracle::lmmse_coefficients(src.sigma_x2, src.sigma_x2, va,
                                               src.sigma_x2 + vz, va, va);
    CHECK(std::abs(co[0] - model::mmse_coefficient(src, rp)) <= 1e-9);
    CHECK(std::abs(co[1] - (1.0 - model::mmse_coefficient(src, rp))) <= 1e-9);
}

TEST_CASE("mi decomposition identity") {
    // single term at k=1
    {
        model::GuessSchedule sched;
        sched.sigma2 = {1.5, 2.0};
        model::SourceParams src{4.0, 2.0, 1.0};
        const auto [lhs, rhs] = model::mi_decomposition(1, sched, src);
        CHECK(std::abs(lhs - rhs) <= 1e-12);
        CHECK(lhs == doctest::Approx(0.5));  // (1/2)log2(2 delta/delta)
    }
    // 1000 random draws, both sides via covariance algebra, and against the
    // independent entropy-route oracle
    Rng rng(23);
    double worst = 0.0, worst_oracle = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const double delta = 0.2 + 2.0 * rng.uniform01();
        const double lo = delta * (1.2 + rng.uniform01());
        const auto sched =
            model::make_schedule(lo, lo * (1.0 + 3.0 * rng.uniform01()),
                                 0.15 + 0.5 * rng.uniform01());
        if (sched.rounds() < 1) continue;
        const double sx2 = sched.sigma2.back() * (1.3 + 2.0 * rng.uniform01());
        const int k = 1 + static_cast<int>(rng.bits() %
                                           static_cast<std::uint64_t>(sched.rounds()));
        model::SourceParams src{sx2, sched.guess(k), delta};
        const auto [lhs, rhs] = model::mi_decomposition(k, sched, src);
        worst = std::max(worst, std::abs(lhs - rhs));

        const auto rpk = model::round_params(k, sched, src);
        const double va = rpk.alpha_k * sx2;
        const double ref = oracle::cmi_entropy_route(va, va, va, sx2, sx2,
                                                     sx2 + rpk.var_zprime);
        worst_oracle = std::max(worst_oracle, std::abs(lhs - ref));
        CHECK_THROWS_AS(model::mi_decomposition(sched.rounds() + 1, sched, src),
                        InvalidParameter);
    }
    CHECK(worst <= 1e-9);
    CHECK(worst_oracle <= 1e-9);
}
