#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "genepdmp/error.hpp"
#include "genepdmp/verify.hpp"

using namespace genepdmp;

namespace {

const NormParams k23(2.0, 3.0);

using Field = std::function<Vec3(const Vec3&)>;

// [f, g]_j = sum_k f_k dg_j/dx_k - g_k df_j/dx_k with central differences
Vec3 fd_bracket(const Field& f, const Field& g, const Vec3& x, double h = 1e-5) {
    Vec3 out{};
    const Vec3 fx = f(x), gx = g(x);
    for (std::size_t k = 0; k < 3; ++k) {
        Vec3 xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const Vec3 gp = g(xp), gm = g(xm), fp = f(xp), fm = f(xm);
        for (std::size_t j = 0; j < 3; ++j) {
            out[j] += fx[k] * (gp[j] - gm[j]) / (2 * h) - gx[k] * (fp[j] - fm[j]) / (2 * h);
        }
    }
    return out;
}

Vec3 random_point(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {u(gen), u(gen), u(gen)};
}

double max_diff(const Vec3& a, const Vec3& b) {
    return std::max({std::fabs(a[0] - b[0]), std::fabs(a[1] - b[1]), std::fabs(a[2] - b[2])});
}

ParamTriple interior_triple(std::mt19937_64& gen, double margin) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        std::array<double, 3> v{u(gen), u(gen), u(gen)};
        std::sort(v.begin(), v.end(), std::greater<>());
        const ParamTriple t{v[0], v[1], v[2]};
        if (interior_margin(t) >= margin) return t;
    }
}

// replays in original coordinates through exp(Mt)
EigenCoords replay_general(const ReachSchedule& s, const EigenCoords& start, const NormParams& p) {
    MoleculeState x = from_eigen(p, start);
    for (const auto& seg : s.segments) x = flow_general(seg.gene, seg.duration, x, p);
    return to_eigen(p, x);
}

}  // namespace

TEST_CASE("model fields and their brackets") {
    const AffineField a0 = model_field(k23, Gene::Inactive), a1 = model_field(k23, Gene::Active);
    const Vec3 x{0.3, 0.6, 0.9};
    CHECK(max_diff(a0(x), Vec3{-0.3, -0.6, -0.9}) < 1e-15);
    CHECK(max_diff(a1(x), Vec3{0.7, -0.6, -0.9}) < 1e-15);
    CHECK(lie_bracket(a0, a0, x) == Vec3{0, 0, 0});
    CHECK(max_diff(lie_bracket(a0, a1, x), Vec3{1, -2, 0}) < 1e-15);
    // the bracket of affine fields is constant, so its affine form is exact
    CHECK(lie_bracket(a0, lie_bracket(a0, a1)).c == Vec3{1, -6, 6});
    CHECK(lie_bracket(a0, a1).c == Vec3{1, -2, 0});

    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> ud(0.1, 10.0);
    for (int i = 0; i < 100; ++i) {
        const double a = ud(gen), b = ud(gen);
        const AffineField f0 = model_field(a, b, Gene::Inactive), f1 = model_field(a, b, Gene::Active);
        const Vec3 y = random_point(gen);
        const auto v = hormander_vectors(f0, f1, y);
        CHECK(v[0] == Vec3{1, 0, 0});
        CHECK(max_diff(v[1], Vec3{1, -a, 0}) <= 1e-14 * a);
        CHECK(max_diff(v[2], Vec3{1, -(a * a + a), a * b}) <= 1e-14 * (a * a + a + a * b));
        // antisymmetry
        CHECK(max_diff(lie_bracket(f1, f0, y), Vec3{-1, a, 0}) <= 1e-14 * a);
    }
}

TEST_CASE("brackets agree with finite differences") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> ud(0.1, 10.0);
    for (int i = 0; i < 100; ++i) {
        const NormParams p(ud(gen), ud(gen));
        const AffineField a0 = model_field(p, Gene::Inactive), a1 = model_field(p, Gene::Active);
        const AffineField b01 = lie_bracket(a0, a1);
        const Vec3 x = random_point(gen);
        CHECK(max_diff(lie_bracket(a0, a1, x), fd_bracket(a0, a1, x)) < 1e-8);
        CHECK(max_diff(lie_bracket(a0, b01, x), fd_bracket(a0, b01, x)) < 1e-8);
    }
}

TEST_CASE("Hormander rank") {
    std::mt19937_64 gen(13);
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            const NormParams p(std::pow(10.0, -1.0 + i / 10.0), std::pow(10.0, -1.0 + j / 10.0));
            REQUIRE(hormander_rank(p, random_point(gen)) == 3);
        }
    }
    CHECK(hormander_rank(NormParams(1.0, 1.0), {0.2, 0.2, 0.2}) == 3);
    CHECK(hormander_rank(NormParams(2.0, 2.0), {0.2, 0.2, 0.2}) == 3);
    // synthetic fields outside the model domain
    const Vec3 x{0.5, 0.5, 0.5};
    CHECK(hormander_rank(model_field(0.0, 2.0, Gene::Inactive), model_field(0.0, 2.0, Gene::Active), x) < 3);
    CHECK(hormander_rank(model_field(2.0, 0.0, Gene::Inactive), model_field(2.0, 0.0, Gene::Active), x) < 3);
    CHECK(hormander_rank(model_field(0.0, 0.0, Gene::Inactive), model_field(0.0, 0.0, Gene::Active), x) == 1);
    for (int i = 0; i < 100; ++i) CHECK(hormander_rank(NormParams(0.5, 1.0 / 3.0), random_point(gen)) == 3);

    CHECK(column_rank({}) == 0);
    CHECK(column_rank({{0, 0, 0}}) == 0);
    CHECK(column_rank({{1, 2, 3}, {2, 4, 6}}) == 1);
    CHECK(column_rank({{1, 0, 0}, {0, 1e-13, 0}}) == 1);
}

TEST_CASE("reach between random interior points") {
    const Attractor att(k23);
    std::mt19937_64 gen(2024);
    int ok = 0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const EigenCoords start = f_map(interior_triple(gen, 1e-3), k23);
        const EigenCoords target = f_map(interior_triple(gen, 1e-3), k23);
        const ReachOutcome r = reach(att, start, target);
        if (!r.ok()) continue;
        ++ok;
        const ReachSchedule& s = *r.schedule;
        REQUIRE(s.segments.size() == 4);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(s.segments[k].duration > 0.0);
            CHECK(s.segments[k].gene == (k % 2 ? Gene::Active : Gene::Inactive));
        }
        worst = std::max(worst, distance(replay_general(s, start, k23), target));
        // cross-module consistency
        CHECK(att.membership(start).member());
        CHECK(att.membership(target).member());
    }
    INFO("successes " << ok << " worst replay " << worst);
    CHECK(ok >= 990);
    CHECK(worst < 1e-6);
}

TEST_CASE("reach special cases") {
    const Attractor att(k23);
    const EigenCoords center = f_map({0.75, 0.5, 0.25}, k23);
    const ReachOutcome same = reach(att, center, center);
    REQUIRE(same.ok());
    CHECK(same.schedule->residual < 1e-6);
    for (const auto& seg : same.schedule->segments) CHECK(seg.duration > 0.0);

    // start on the solution through (1,1,1) with the gene off
    const EigenCoords phi = flow(Gene::Inactive, 0.7, EigenCoords::ones(), k23);
    const EigenCoords deep = f_map({0.7, 0.4, 0.2}, k23);
    const ReachOutcome r = reach(att, phi, deep);
    REQUIRE(r.ok());
    CHECK(distance(replay(*r.schedule, phi, k23), deep) < 1e-6);

    CHECK_THROWS_AS(reach(att, center, EigenCoords(1, 0, 0)), ArgumentError);
    CHECK_THROWS_AS(reach(att, EigenCoords(1, 0, 0), center), ArgumentError);
    // target preimage too close to the x = y face
    CHECK_THROWS_AS(reach(att, center, f_map({0.6, 0.5999, 0.2}, k23)), ArgumentError);

    std::ostringstream os;
    write_reach_schedule(os, *same.schedule);
    CHECK(os.str().find("segments:\n  - gene: 0\n") == 0);
    CHECK(os.str().find("residual: ") != std::string::npos);
}
