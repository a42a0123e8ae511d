#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "genepdmp/error.hpp"
#include "genepdmp/rates.hpp"
#include "stats_util.hpp"

using namespace genepdmp;

namespace {

// Fixed-grid composite Simpson along the exact flow; independent of the
// adaptive quadrature and closed forms under test.
double simpson_hazard(const RateSpec& spec, Gene gene, const MoleculeState& x, double t,
                      const NormParams& p, int panels = 100000) {
    const double h = t / panels;
    double s = 0.0;
    for (int j = 0; j <= panels; ++j) {
        const double w = (j == 0 || j == panels) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        s += w * spec(flow_general(gene, j * h, x, p));
    }
    return s * h / 3.0;
}

std::vector<RateSpec> one_of_each() {
    return {RateSpec::constant(3.0), RateSpec::linear(6.0), RateSpec::quadratic(10.0, 0.01),
            RateSpec::power(5.0, 10.0), RateSpec::polynomial({0.5, -1.0, 4.0, 2.0})};
}

}  // namespace

TEST_CASE("rate families evaluate per formula") {
    CHECK(eval_rate(RateSpec::constant(3.0), {0.2, 0.4, 0.9}) == 3.0);
    CHECK(eval_rate(RateSpec::linear(6.0), {0.0, 0.0, 0.5}) == doctest::Approx(3.0));
    CHECK(eval_rate(RateSpec::quadratic(10.0, 0.01), {0.3, 0.3, 0.0}) == doctest::Approx(0.1));
    CHECK(eval_rate(RateSpec::power(9e11, 10.0), {0, 0, 0.1}) == doctest::Approx(90.0));
    CHECK(eval_rate(RateSpec::polynomial({1.0, 2.0, 3.0}), {0, 0, 0.5}) == doctest::Approx(2.75));
    CHECK_THROWS_AS(eval_rate(RateSpec::constant(1.0), {0.0, 1.5, 0.0}), ArgumentError);
    CHECK_THROWS_AS(eval_rate(RateSpec::constant(1.0), {-0.1, 0.5, 0.0}), ArgumentError);
}

TEST_CASE("rate derivatives match central differences") {
    for (const auto& spec : one_of_each()) {
        for (double x : {0.1, 0.37, 0.8}) {
            const double h = 1e-6;
            const double fd = (spec.value(x + h) - spec.value(x - h)) / (2 * h);
            CHECK(spec.derivative(x) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("rate spec text syntax") {
    CHECK(RateSpec::parse("const:3").to_string() == "const:3");
    CHECK(RateSpec::parse("linear:6").value(0.5) == doctest::Approx(3.0));
    CHECK(RateSpec::parse("quad:10,0.01").value(0.0) == doctest::Approx(0.1));
    CHECK(RateSpec::parse("pow:9e11,10").value(0.1) == doctest::Approx(90.0));
    CHECK(RateSpec::parse("poly:1,0,2").value(1.0) == doctest::Approx(3.0));
    CHECK(RateSpec::parse("const:1/3").value(0.0) == doctest::Approx(1.0 / 3.0));

    // parse(to_string(s)) reproduces the rate exactly at random points
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int n = 0; n < 200; ++n) {
        const std::vector<RateSpec> specs = {
            RateSpec::constant(u(g)), RateSpec::linear(u(g)), RateSpec::quadratic(u(g), u(g) / 10),
            RateSpec::power(u(g), u(g)), RateSpec::polynomial({u(g), u(g), u(g)})};
        for (const auto& s : specs) {
            const RateSpec back = RateSpec::parse(s.to_string());
            const double x = u(g) / 10.0;
            CHECK(back.value(x) == s.value(x));
            CHECK(back.to_string() == s.to_string());
        }
    }

    CHECK_THROWS_AS(RateSpec::parse("const"), SpecError);
    CHECK_THROWS_AS(RateSpec::parse("exp:1"), SpecError);
    CHECK_THROWS_AS(RateSpec::parse("quad:1"), SpecError);
    CHECK_THROWS_AS(RateSpec::parse("const:abc"), SpecError);
    CHECK_THROWS_AS(RateSpec::parse("const:-1"), SpecError);
    CHECK_THROWS_AS(RateSpec::parse("poly:0,-1"), SpecError);
}

TEST_CASE("rate pair nondegeneracy") {
    CHECK_NOTHROW(validate_rate_pair(RateSpec::constant(3), RateSpec::linear(6)));
    CHECK_THROWS_AS(validate_rate_pair(RateSpec::constant(0), RateSpec::constant(6)), SpecError);
    CHECK_THROWS_AS(validate_rate_pair(RateSpec::linear(1), RateSpec::constant(6)), SpecError);
    CHECK_THROWS_AS(validate_rate_pair(RateSpec::constant(1), RateSpec::polynomial({1.0, -1.0})), SpecError);
}

TEST_CASE("upper bounds dominate the rate on the cube") {
    for (const auto& spec : one_of_each()) {
        for (int j = 0; j <= 100; ++j) CHECK(spec.value(j / 100.0) <= spec.upper_bound() + 1e-12);
    }
    CHECK(RateSpec::power(4.0, 10.0).upper_bound() == 4.0);
    CHECK(RateSpec::constant(2.0).upper_bound() == 2.0);
}

TEST_CASE("integrated hazard closed forms") {
    const NormParams p(0.5, 1.0 / 3.0);
    CHECK(integrated_hazard(RateSpec::constant(3.0), Gene::Inactive, {0.2, 0.3, 0.4}, 2.0, p) ==
          doctest::Approx(6.0));
    for (double t : {0.5, 2.0, 9.0}) {
        CHECK(integrated_hazard(RateSpec::linear(4.0), Gene::Active, MoleculeState::ones(), t, p) ==
              doctest::Approx(4.0 * t).epsilon(1e-13));
    }
    CHECK(integrated_hazard(RateSpec::linear(4.0), Gene::Active, {0.1, 0.2, 0.3}, 0.0, p) == 0.0);
    CHECK_THROWS_AS(integrated_hazard(RateSpec::linear(4.0), Gene::Active, {0.1, 0.2, 0.3}, -1.0, p),
                    ArgumentError);
}

TEST_CASE("integrated hazard agrees with fixed-grid Simpson") {
    std::mt19937_64 g(19);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> pr(0.3, 3.0);
    for (int n = 0; n < 6; ++n) {
        const NormParams p(pr(g), pr(g));
        const MoleculeState x(u(g), u(g), u(g));
        const double t = 0.1 + 8.0 * u(g);
        const Gene gene = n % 2 ? Gene::Active : Gene::Inactive;
        for (const auto& spec : one_of_each()) {
            const double oracle = simpson_hazard(spec, gene, x, t, p);
            CHECK(integrated_hazard(spec, gene, x, t, p) == doctest::Approx(oracle).epsilon(1e-10).scale(1.0));
            CHECK(std::fabs(integrated_hazard(spec, gene, x, t, p) - oracle) < 1e-8);
        }
    }
    // degenerate parameters run through the same closed forms
    const NormParams deg(1.0, 1.0);
    const MoleculeState x(0.7, 0.1, 0.5);
    CHECK(std::fabs(integrated_hazard(RateSpec::linear(2.0), Gene::Inactive, x, 3.0, deg) -
                    simpson_hazard(RateSpec::linear(2.0), Gene::Inactive, x, 3.0, deg)) < 1e-10);
}

TEST_CASE("hazard is monotone and additive along the flow") {
    const NormParams p(2.0, 3.0);
    const MoleculeState x(0.4, 0.6, 0.2);
    for (const auto& spec : one_of_each()) {
        for (Gene gene : {Gene::Inactive, Gene::Active}) {
            const HazardPath path(spec, gene, x, p);
            CHECK(path.hazard(0.0) == 0.0);
            double prev = 0.0;
            for (int j = 1; j <= 20; ++j) {
                const double h = path.hazard(0.5 * j);
                CHECK(h >= prev - 1e-12);
                prev = h;
            }
            const double t = 1.3, s = 2.1;
            const HazardPath tail(spec, gene, path.state_at(t), p);
            CHECK(std::fabs(path.hazard(t + s) - (path.hazard(t) + tail.hazard(s))) < 1e-10);
        }
    }
}

TEST_CASE("callable rates use quadrature") {
    const NormParams p(2.0, 3.0);
    const MoleculeState x(0.4, 0.6, 0.2);
    const RateSpec spec = RateSpec::linear(3.0);
    const HazardPath generic([](const MoleculeState& s) { return 3.0 * s[2]; }, Gene::Inactive, x, p);
    const HazardPath closed(spec, Gene::Inactive, x, p);
    CHECK(generic.hazard(4.0) == doctest::Approx(closed.hazard(4.0)).epsilon(1e-11));
    // an x1-dependent rate is accepted through the callable interface
    const HazardPath x1_rate([](const MoleculeState& s) { return 2.0 * s[0]; }, Gene::Active, x, p);
    CHECK(x1_rate.hazard(1.0) > 0.0);
}

TEST_CASE("hazard inversion hits the requested level") {
    const NormParams p(0.5, 1.0 / 3.0);
    std::mt19937_64 g(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& spec : one_of_each()) {
        for (int n = 0; n < 20; ++n) {
            const MoleculeState x(u(g), u(g), u(g));
            const Gene gene = n % 2 ? Gene::Active : Gene::Inactive;
            const HazardPath path(spec, gene, x, p);
            const double level = -std::log(u(g));
            const double t = invert_hazard(path, level);
            if (std::isinf(t)) continue;
            CHECK(path.hazard(t) == doctest::Approx(level).epsilon(1e-9));
        }
    }
}

TEST_CASE("hazard inversion handles horizons and finite total hazard") {
    const NormParams p(2.0, 3.0);
    const HazardPath constant(RateSpec::constant(1.0), Gene::Inactive, {0.5, 0.5, 0.5}, p);
    CHECK(invert_hazard(constant, 2.0, 1.5) == kInfiniteTime);
    CHECK(invert_hazard(constant, 2.0, 2.5) == doctest::Approx(2.0));
    // x3 decays to zero, so the total hazard of a linear rate is finite
    const HazardPath fading(RateSpec::linear(1.0), Gene::Inactive, {0.5, 0.5, 0.5}, p);
    const double total = fading.hazard(1000.0);
    CHECK(total < 2.0);
    CHECK(invert_hazard(fading, total + 0.5) == kInfiniteTime);
    CHECK(std::isfinite(invert_hazard(fading, 0.5 * total)));
    // positive limit rate: the tail is solved in closed form
    const HazardPath rising(RateSpec::linear(1.0), Gene::Active, {0.0, 0.0, 0.0}, p);
    const double t = invert_hazard(rising, 500.0);
    CHECK(rising.hazard(t) == doctest::Approx(500.0).epsilon(1e-9));
}

TEST_CASE("constant-rate jump times are exponential") {
    RngStream rng(1234);
    const NormParams p(0.5, 1.0 / 3.0);
    std::vector<double> samples;
    for (int n = 0; n < 100000; ++n) {
        samples.push_back(sample_jump_time(rng, RateSpec::constant(3.0), Gene::Inactive,
                                           {0.5, 0.5, 0.5}, p));
    }
    CHECK(testutil::mean(samples) == doctest::Approx(1.0 / 3.0).epsilon(0.01));
    const double d = testutil::ks_one_sample(samples, [](double t) { return 1.0 - std::exp(-3.0 * t); });
    CHECK(d < testutil::ks_coefficient(0.01) / std::sqrt(100000.0));
}

TEST_CASE("linear rate from the active fixed point is exponential") {
    RngStream rng(99);
    const NormParams p(2.0, 3.0);
    std::vector<double> inv, thin;
    for (int n = 0; n < 20000; ++n) {
        inv.push_back(sample_jump_time(rng, RateSpec::linear(4.0), Gene::Active, MoleculeState::ones(), p));
        thin.push_back(
            sample_jump_time_thinning(rng, RateSpec::linear(4.0), Gene::Active, MoleculeState::ones(), p));
    }
    const auto cdf = [](double t) { return 1.0 - std::exp(-4.0 * t); };
    const double crit = testutil::ks_coefficient(0.01) / std::sqrt(20000.0);
    CHECK(testutil::ks_one_sample(inv, cdf) < crit);
    CHECK(testutil::ks_one_sample(thin, cdf) < crit);
}

TEST_CASE("survival function matches exp(-Lambda)") {
    RngStream rng(77);
    const NormParams p(0.5, 1.0 / 3.0);
    const RateSpec spec = RateSpec::quadratic(10.0, 0.01);
    const MoleculeState x(0.8, 0.6, 0.7);
    const int n = 100000;
    std::vector<double> samples;
    samples.reserve(n);
    for (int j = 0; j < n; ++j) samples.push_back(sample_jump_time(rng, spec, Gene::Active, x, p));
    const HazardPath path(spec, Gene::Active, x, p);
    for (int k = 1; k <= 20; ++k) {
        const double t = 0.025 * k;
        const double expected = std::exp(-path.hazard(t));
        double surv = 0.0;
        for (double s : samples) surv += s > t ? 1.0 : 0.0;
        surv /= n;
        const double se = std::sqrt(expected * (1 - expected) / n);
        CHECK(std::fabs(surv - expected) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("thinning and inversion agree in distribution") {
    std::mt19937_64 g(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> pr(0.3, 3.0);
    const std::size_t n = 10000;
    RngStream rng(555);
    for (const auto& spec : one_of_each()) {
        for (int setting = 0; setting < 5; ++setting) {
            const NormParams p(pr(g), pr(g));
            const MoleculeState x(u(g), u(g), u(g));
            const Gene gene = setting % 2 ? Gene::Active : Gene::Inactive;
            std::vector<double> a, b;
            for (std::size_t j = 0; j < n; ++j) {
                a.push_back(sample_jump_time(rng, spec, gene, x, p, 200.0));
                b.push_back(sample_jump_time_thinning(rng, spec, gene, x, p, 200.0));
            }
            CHECK(testutil::ks_two_sample(a, b) < testutil::ks_two_sample_critical(n, n, 0.01));
        }
    }
    CHECK(sample_jump_time_thinning(rng, RateSpec::constant(0.0), Gene::Inactive, {0.1, 0.1, 0.1},
                                    NormParams(2, 3)) == kInfiniteTime);
    CHECK_THROWS_AS(sample_jump_time_thinning(rng, RateSpec::constant(1.0), Gene::Inactive,
                                              {1.5, 0.1, 0.1}, NormParams(2, 3)),
                    ArgumentError);
}

TEST_CASE("quadrature reports non-convergence") {
    QuadratureOptions opts;
    opts.max_intervals = 5;
    CHECK_THROWS_AS(integrate_adaptive([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, opts),
                    NumericalError);
    CHECK(integrate_adaptive([](double x) { return x * x * x; }, 0.0, 2.0) == doctest::Approx(4.0));
}
