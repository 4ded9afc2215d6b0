#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "tbrk/poles.hpp"

using namespace tbrk;
using namespace tbrk::test;

namespace {

/// Straight product-form evaluation of the det objective over the samples.
Index det_argmax_bruteforce(const std::vector<Complex>& samples,
                            const std::vector<Pole>& poles, const Vector& ritz, Index b) {
    Index best = -1;
    double best_val = -1.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const Complex lam = samples[i];
        double den = 1.0;
        bool collide = false;
        for (Index j = 0; j < ritz.size(); ++j) {
            const double dist = std::abs(lam - std::conj(ritz(j)));
            if (dist == 0.0) {
                collide = true;
                break;
            }
            den *= dist;
        }
        if (collide) continue;
        double num = 1.0;
        for (const Pole& p : poles) {
            if (p.infinite) continue;
            num *= std::pow(std::abs(lam - std::conj(p.value)), static_cast<double>(b));
        }
        const double val = num / den;
        if (best < 0 || val > best_val) {
            best = static_cast<Index>(i);
            best_val = val;
        }
    }
    return best;
}

Index det2_argmax_bruteforce(const std::vector<Complex>& samples,
                             const std::vector<Pole>& poles, const Vector& ritz, Index b,
                             Index k) {
    Index best = -1;
    double best_val = -1.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const Complex lam = samples[i];
        std::vector<double> dist;
        for (Index j = 0; j < ritz.size(); ++j) {
            dist.push_back(std::abs(std::conj(lam) - ritz(j)));
        }
        std::sort(dist.begin(), dist.end());
        double den = 1.0;
        bool collide = false;
        for (Index j = 1; j <= k - 1; ++j) {
            const double dj = dist[static_cast<size_t>((j - 1) * b)];
            if (dj == 0.0) {
                collide = true;
                break;
            }
            den *= dj;
        }
        if (collide) continue;
        double num = 1.0;
        for (const Pole& p : poles) {
            if (p.infinite) continue;
            num *= std::abs(lam - std::conj(p.value));
        }
        const double val = num / den;
        if (best < 0 || val > best_val) {
            best = static_cast<Index>(i);
            best_val = val;
        }
    }
    return best;
}

FovSurrogate random_surrogate(std::mt19937_64& rng, int modes, int points_per_mode) {
    std::normal_distribution<double> normal;
    FovSurrogate s(modes);
    for (int m = 0; m < modes; ++m) {
        Matrix a = random_matrix(rng, points_per_mode, points_per_mode);
        a.diagonal().array() += Complex(6.0 * points_per_mode, 0.0);
        s.update(m, a);
    }
    return s;
}

}  // namespace

TEST_CASE("surrogate updates negate and accumulate spectra") {
    FovSurrogate s(2);
    Matrix one(1, 1);
    one(0, 0) = Complex(2.0);
    s.update(0, one);
    REQUIRE(s.cloud(0).size() == 1);
    CHECK(std::abs(s.cloud(0)[0] - Complex(-2.0)) < 1e-14);
    CHECK(s.hull(0).is_point());

    std::mt19937_64 rng(1);
    Matrix h = random_matrix(rng, 6, 6);
    h = (h + h.adjoint()).eval();
    s.update(1, h);
    for (const Complex& z : s.cloud(1)) CHECK(std::abs(z.imag()) <= 1e-12 * h.norm());

    // growth keeps earlier hulls inside later ones
    const ComplexPolygon before = s.hull(1);
    Matrix h2 = 3.0 * h;
    s.update(1, h2);
    const ComplexPolygon after = s.hull(1);
    const double tol = 1e-10 * (after.diameter() + 1.0) * (after.diameter() + 1.0);
    for (const Complex& v : before.vertices) CHECK(after.contains(v, tol));
}

TEST_CASE("surrogate queries demand populated clouds") {
    FovSurrogate s(3);
    Matrix one(1, 1);
    one(0, 0) = Complex(1.0);
    s.update(0, one);
    CHECK_THROWS_AS(boundary_samples(s, 0, 16), EmptySurrogate);
}

TEST_CASE("boundary samples collapse for point surrogates") {
    FovSurrogate s(3);
    Matrix p1(1, 1), p2(1, 1);
    p1(0, 0) = Complex(2.0, 1.0);
    p2(0, 0) = Complex(-1.0, 0.5);
    s.update(1, p1);
    s.update(2, p2);
    const auto samples = boundary_samples(s, 0, 8);
    REQUIRE(samples.size() == 8);
    for (const Complex& z : samples) {
        CHECK(std::abs(z - Complex(-1.0, -1.5)) < 1e-13);
    }
}

TEST_CASE("boundary samples of summed real segments cover the interval") {
    FovSurrogate s(3);
    // two Hermitian spectra in [2,4] -> negated segments [-4,-2]
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2.0;
    d(1, 1) = 4.0;
    s.update(1, d);
    s.update(2, d);
    const int count = 9;
    const auto samples = boundary_samples(s, 0, count);
    REQUIRE(samples.size() == count);
    // sum of segments: [-8, -4], endpoints inclusive, uniform
    CHECK(std::abs(samples.front() - Complex(-8.0)) < 1e-13);
    CHECK(std::abs(samples.back() - Complex(-4.0)) < 1e-13);
    for (int i = 0; i < count; ++i) {
        CHECK(std::abs(samples[static_cast<size_t>(i)] - Complex(-8.0 + 0.5 * i)) < 1e-12);
    }
}

TEST_CASE("boundary samples of polygon sums lie on the brute-force hull") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    FovSurrogate s(3);
    std::vector<std::vector<Complex>> tris(2);
    for (int m = 0; m < 2; ++m) {
        Matrix a(3, 3);
        a.setZero();
        for (int i = 0; i < 3; ++i) {
            tris[static_cast<size_t>(m)].emplace_back(normal(rng), normal(rng));
            a(i, i) = -tris[static_cast<size_t>(m)].back();
        }
        s.update(m + 1, a);
    }
    std::vector<Complex> sums;
    for (const Complex& x : tris[0])
        for (const Complex& y : tris[1]) sums.push_back(x + y);
    const ComplexPolygon oracle = convex_hull(sums);
    const double tol = 1e-9 * oracle.diameter() * oracle.diameter();
    for (const Complex& z : boundary_samples(s, 0, 64)) {
        CHECK(oracle.contains(z, tol));
        // and on the boundary: it must NOT be interior of the shrunk hull
        bool on_edge = false;
        const size_t m = oracle.vertices.size();
        for (size_t e = 0; e < m; ++e) {
            const Complex a = oracle.vertices[e];
            const Complex b = oracle.vertices[(e + 1) % m];
            const Complex dvec = b - a;
            const double len = std::abs(dvec);
            const double cross = std::abs((z - a).real() * dvec.imag() / len -
                                          (z - a).imag() * dvec.real() / len);
            const double t = ((z - a).real() * dvec.real() + (z - a).imag() * dvec.imag()) /
                             (len * len);
            if (cross < 1e-9 * oracle.diameter() && t > -1e-12 && t < 1.0 + 1e-12) {
                on_edge = true;
                break;
            }
        }
        CHECK(on_edge);
    }
}

TEST_CASE("det matches its brute-force objective") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 25; ++trial) {
        FovSurrogate s = random_surrogate(rng, 3, 4);
        Vector ritz = random_matrix(rng, 6, 1).col(0);
        ritz.array() += Complex(30.0, 0.0);  // keep away from the negated clouds
        std::vector<Pole> poles = {Pole::inf()};
        for (int p = 0; p < trial % 3; ++p) {
            poles.push_back(Pole::finite(Complex(-20.0 - p, normal(rng))));
        }
        const Index b = 1 + trial % 2;
        const int count = 48;
        const auto samples = boundary_samples(s, 0, count);
        const Index expect = det_argmax_bruteforce(samples, poles, ritz, b);
        REQUIRE(expect >= 0);
        const Pole got = next_pole_det(s, 0, poles, ritz, b, count);
        CHECK(std::abs(got.value - std::conj(samples[static_cast<size_t>(expect)])) <= 1e-12);
    }
}

TEST_CASE("det2 matches its brute-force objective and stride selection") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 25; ++trial) {
        FovSurrogate s = random_surrogate(rng, 3, 4);
        const Index b = 1 + trial % 2;
        const Index k = 2 + trial % 3;
        Vector ritz = random_matrix(rng, b * (k + 1), 1).col(0);
        ritz.array() += Complex(30.0, 0.0);
        std::vector<Pole> poles = {Pole::inf()};
        if (trial % 2 == 0) poles.push_back(Pole::finite(Complex(-25.0, normal(rng))));
        const int count = 48;
        const auto samples = boundary_samples(s, 0, count);
        const Index expect = det2_argmax_bruteforce(samples, poles, ritz, b, k);
        REQUIRE(expect >= 0);
        const Pole got = next_pole_det2(s, 0, poles, ritz, b, k, count);
        CHECK(std::abs(got.value - std::conj(samples[static_cast<size_t>(expect)])) <= 1e-12);
    }
}

TEST_CASE("det2 with empty denominator returns the first sample") {
    FovSurrogate s(2);
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2.0;
    d(1, 1) = 5.0;
    s.update(1, d);
    Vector ritz(1);
    ritz(0) = Complex(3.0);
    const auto samples = boundary_samples(s, 0, 16);
    const Pole got = next_pole_det2(s, 0, {Pole::inf()}, ritz, 1, 1, 16);
    CHECK(std::abs(got.value - std::conj(samples.front())) <= 1e-12);
}

TEST_CASE("argmax is invariant under positive scaling of the objective") {
    std::mt19937_64 rng(5);
    FovSurrogate s = random_surrogate(rng, 2, 5);
    Vector ritz = random_matrix(rng, 4, 1).col(0);
    ritz.array() += Complex(25.0, 0.0);
    const auto samples = boundary_samples(s, 0, 32);
    const Index base = det_argmax_bruteforce(samples, {Pole::inf()}, ritz, 2);
    // scaled copy of the objective: same comparisons, same winner
    Index best = -1;
    double best_val = -1.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double den = 1.0;
        for (Index j = 0; j < ritz.size(); ++j) {
            den *= std::abs(samples[i] - std::conj(ritz(j)));
        }
        const double val = 3.7 / den;
        if (best < 0 || val > best_val) {
            best = static_cast<Index>(i);
            best_val = val;
        }
    }
    CHECK(base == best);
}

TEST_CASE("real segment surrogates give real adaptive poles") {
    FovSurrogate s(3);
    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = 1.0;
    d(1, 1) = 2.5;
    d(2, 2) = 4.0;
    s.update(1, d);
    s.update(2, d);
    Vector ritz(2);
    ritz(0) = Complex(1.2);
    ritz(1) = Complex(3.9);
    const Pole p1 = next_pole_det(s, 0, {Pole::inf()}, ritz, 1, 64);
    CHECK(p1.value.imag() == 0.0);
    const Pole p2 = next_pole_det2(s, 0, {Pole::inf()}, ritz, 1, 2, 64);
    CHECK(p2.value.imag() == 0.0);
}

TEST_CASE("poles colliding with target Ritz values are nudged away") {
    FovSurrogate s(2);
    Matrix p(1, 1);
    p(0, 0) = Complex(-5.0);
    s.update(1, p);  // samples all equal 5? no: cloud holds -(-5.0) = 5.0
    Vector ritz(1);
    ritz(0) = Complex(5.0);
    const Pole got = next_pole_det(s, 0, {Pole::inf()}, ritz, 1, 8);
    CHECK(std::abs(got.value - Complex(5.0)) > 1e-14);
    CHECK(std::abs(got.value - Complex(5.0)) < 1e-6 * 5.0);
}

TEST_CASE("static strategies") {
    CHECK(next_pole_static(PoleStrategyKind::poly, 0).infinite);
    CHECK(next_pole_static(PoleStrategyKind::poly, 17).infinite);
    CHECK(next_pole_static(PoleStrategyKind::ext, 0).infinite);
    CHECK(next_pole_static(PoleStrategyKind::ext, 1).is_zero());
    CHECK(next_pole_static(PoleStrategyKind::ext, 2).infinite);
    CHECK(next_pole_static(PoleStrategyKind::ext, 3).is_zero());
    CHECK(next_pole_static(PoleStrategyKind::ext, 10).infinite);
}

TEST_CASE("strategy names round-trip") {
    for (auto kind : {PoleStrategyKind::poly, PoleStrategyKind::ext, PoleStrategyKind::det,
                      PoleStrategyKind::det2}) {
        CHECK(pole_strategy_from_name(pole_strategy_name(kind)) == kind);
    }
    CHECK_THROWS_AS(pole_strategy_from_name("zolotarev"), Error);
}
