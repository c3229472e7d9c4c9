#include "oracles.hpp"

#include "steode/effconn.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace steode;
using namespace steode::effconn;

namespace {

Mat m2(double a, double b, double c, double d) { return (Mat(2, 2) << a, b, c, d).finished(); }

} // namespace

TEST_CASE("segment means") {
    Mat b(2, 4);
    b << 1, 2, 3, 4, 5, 6, 7, 8;
    CHECK(segment_means(b, 2) == m2(1.5, 3.5, 5.5, 7.5));

    Mat one(1, 5);
    one << 1, 2, 3, 4, 5;
    Mat expect(1, 2);
    expect << 2, 4.5;
    CHECK(segment_means(one, 2) == expect);

    CHECK(segment_means(b, 4) == b);
    CHECK_THROWS_AS((void)segment_means(b, 5), std::invalid_argument);
    CHECK_THROWS_AS((void)segment_means(b, 1), std::invalid_argument);
}

TEST_CASE("effective adjacency") {
    SUBCASE("constant signal gives zero networks") {
        auto s = effective_adjacency(Mat::Constant(3, 4, 2.5), 0.5);
        REQUIRE(s.length() == 3);
        for (const auto& a : s.networks)
            CHECK(a.isZero(0.0));
    }
    SUBCASE("hand-evaluated 2x2") {
        auto s = effective_adjacency(m2(1, 2, 1, 0.5), 0.5);
        REQUIRE(s.length() == 1);
        CHECK(s.networks[0] == m2(0.5, -0.25, 0.5, -0.25));
    }
    SUBCASE("zero denominator is clamped") {
        auto s = effective_adjacency(m2(0, 1, 1, 1), 0.5);
        CHECK(s.networks[0].allFinite());
        CHECK(s.networks[0](0, 0) == doctest::Approx(0.5 * (1.0 / 1e-6 - 1.0)));
        CHECK(clamp_denominator(-1e-9) == -1e-6);
        CHECK(clamp_denominator(0.0) == 1e-6);
        CHECK(clamp_denominator(-2.0) == -2.0);
    }
}

TEST_CASE("effective adjacency matches loop oracle") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 1 + trial % 8;
        const Eigen::Index t = 2 + trial % 5;
        Mat means = oracle::random_matrix(n, t, rng, -2.0, 2.0);
        if (trial % 10 == 0)
            means(0, 0) = 0.0;
        const auto got = effective_adjacency(means, 0.5);
        const auto want = oracle::effective(means, 0.5);
        REQUIRE(got.length() == want.size());
        for (std::size_t k = 0; k < want.size(); ++k)
            CHECK((got.networks[k] - want[k]).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("shared-scale rescaling") {
    EffectiveSeries one{{m2(0, 2, -4, 0)}, 0.5};
    CHECK(rescale_effective(one).networks[0] == m2(0, 0.5, -1, 0));

    EffectiveSeries zero{{Mat::Zero(2, 2), Mat::Zero(2, 2)}, 0.5};
    CHECK(rescale_effective(zero).networks[1].isZero(0.0));

    EffectiveSeries two{{m2(1, -2, 3, 0), m2(0, 8, -1, 1)}, 0.5};
    auto r = rescale_effective(two);
    CHECK(r.networks[0].cwiseAbs().maxCoeff() < 1.0);
    CHECK(r.networks[1](0, 1) == 1.0);
    CHECK(r.networks[0] == two.networks[0] / 8.0);
}

TEST_CASE("structural rescaling") {
    CHECK(rescale_structural({m2(0, 4, 4, 0)}).adjacency == m2(0, 1, 1, 0));
    CHECK(rescale_structural({m2(0, 1, 1, 0.5)}).adjacency == m2(0, 1, 1, 0.5));
    CHECK_THROWS_AS((void)rescale_structural({m2(0, 1, 2, 0)}), std::invalid_argument);
    CHECK_THROWS_AS((void)rescale_structural({m2(0, -1, -1, 0)}), std::invalid_argument);
}

TEST_CASE("directed normalization") {
    CHECK(normalize_directed(m2(0, 2, 0, 0)) == m2(0, 1, 0, 0));
    CHECK(normalize_directed(Mat::Zero(3, 3)).isZero(0.0));

    std::mt19937_64 rng(2);
    const Mat s = oracle::random_structural(6, rng);
    CHECK((normalize_directed(s) - oracle::normalize_directed(s)).cwiseAbs().maxCoeff() <= 1e-15);
    // symmetric nonnegative input: same as D^-1/2 A D^-1/2
    Eigen::VectorXd d = s.rowwise().sum();
    for (auto& v : d)
        v = v == 0 ? 1 : v;
    const Mat dinv = d.cwiseSqrt().cwiseInverse().asDiagonal();
    CHECK((normalize_directed(s) - dinv * s * dinv).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("directed normalization matches loop oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 1 + trial % 8;
        Mat a = oracle::random_matrix(n, n, rng);
        if (trial % 7 == 0)
            a.row(0).setZero();
        CHECK((normalize_directed(a) - oracle::normalize_directed(a)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("structural normalization") {
    CHECK((normalize_structural({m2(0, 1, 1, 0)}).array() - 0.5).abs().maxCoeff() <= 1e-15);
    CHECK(normalize_structural({Mat::Zero(1, 1)}) == Mat::Ones(1, 1));

    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Mat a = oracle::random_structural(1 + trial % 8, rng);
        const Mat got = normalize_structural({a});
        CHECK((got - oracle::normalize_structural(a)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(got == got.transpose());
    }
}

TEST_CASE("build_effective end to end") {
    BoldSeries bold{"s", Mat::Constant(3, 10, 1.0)};
    bold.values(1, 9) = 3.0;
    auto s = build_effective(bold, 5, 0.5);
    CHECK(s.length() == 4);
    CHECK(s.nodes() == 3);
    double peak = 0.0;
    for (const auto& a : s.networks)
        peak = std::max(peak, a.cwiseAbs().maxCoeff());
    CHECK(peak == 1.0);

    bold.values(0, 0) = std::nan("");
    CHECK_THROWS_AS((void)build_effective(bold, 5, 0.5), std::invalid_argument);
}
