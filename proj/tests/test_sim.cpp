#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "genepdmp/error.hpp"
#include "genepdmp/sim.hpp"

using namespace genepdmp;

namespace {

const NormParams kHalfThird(0.5, 1.0 / 3.0);
const HybridState kHalf{{0.5, 0.5, 0.5}, Gene::Inactive};

}  // namespace

TEST_CASE("activation rate must not vanish at the origin") {
    RngStream rng(1);
    CHECK_THROWS_AS(simulate(rng, kHalf, kHalfThird, RateSpec::constant(0.0), RateSpec::constant(6.0)), SpecError);
    CHECK_THROWS_AS(simulate(rng, {{-0.1, 0.5, 0.5}, Gene::Inactive}, kHalfThird, RateSpec::constant(3),
                             RateSpec::constant(6)),
                    ArgumentError);
}

TEST_CASE("telegraph switch spends q0/(q0+q1) of the time active") {
    RngStream rng(5);
    SimOptions o;
    o.t_final = 1e4;
    const Trajectory tr = simulate(rng, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::constant(6), o);
    const double frac = tr.time_active() / tr.final_time();
    // long-run variance of the occupation fraction: 2 p (1-p) / ((q0+q1) T)
    const double se = std::sqrt(2.0 * (1.0 / 3.0) * (2.0 / 3.0) / (9.0 * 1e4));
    CHECK(std::fabs(frac - 1.0 / 3.0) < 3.0 * se);
    CHECK(std::fabs(frac - 1.0 / 3.0) < 0.02 / 3.0);
}

TEST_CASE("long-run means reproduce the expected levels") {
    const RawParams raw{2.0, 1.0, 1.0, 1.0, 2.0, 1.0};
    const auto expected = expected_levels(1.0, 2.0, raw);
    CHECK(expected[0] == doctest::Approx(2.0 / 3.0));
    CHECK(expected[1] == doctest::Approx(1.0 / 3.0));
    CHECK(expected[2] == doctest::Approx(1.0 / 3.0));

    const Rescaled r = rescale(raw, MoleculeState::zero(), 0.0);
    RngStream rng(8);
    SimOptions o;
    o.t_final = 4e4;
    const Trajectory tr = simulate(rng, {MoleculeState::zero(), Gene::Inactive}, r.params, RateSpec::constant(1),
                                   RateSpec::constant(2), o);
    const MoleculeState avg = (1.0 / tr.final_time()) * tr.time_integral();
    // undo the scaling u_k = s_k x_k
    const double s1 = raw.d1 / raw.A1, s2 = s1 * raw.d2 / raw.A2, s3 = s2 * raw.d3 / raw.A3;
    CHECK(avg[0] / s1 == doctest::Approx(expected[0]).epsilon(0.01));
    CHECK(avg[1] / s2 == doctest::Approx(expected[1]).epsilon(0.01));
    CHECK(avg[2] / s3 == doctest::Approx(expected[2]).epsilon(0.01));
}

TEST_CASE("a frozen gene gives the pure flow") {
    RngStream rng(3);
    SimOptions o;
    o.t_final = 20.0;
    o.validate_rates = false;
    const HybridState init{{0.1, 0.2, 0.3}, Gene::Active};
    const Trajectory tr = simulate(rng, init, kHalfThird, RateSpec::constant(1.0), RateSpec::constant(0.0), o);
    CHECK(tr.jump_count() == 0);
    CHECK(tr.final_time() == 20.0);
    for (double t : {0.0, 1.0, 7.5, 20.0}) {
        const HybridState s = tr.evaluate(t);
        CHECK(s.gene == Gene::Active);
        CHECK(max_abs_diff(s.x, flow_general(Gene::Active, t, init.x, kHalfThird)) < 1e-12);
    }
}

TEST_CASE("trajectory structure and dense evaluation") {
    RngStream rng(11);
    SimOptions o;
    o.t_final = 150.0;
    const Trajectory tr = simulate(rng, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::linear(6), o);
    REQUIRE(tr.jump_count() > 100);
    CHECK_FALSE(tr.truncated());
    CHECK(tr.evaluate(0.0).x == kHalf.x);
    CHECK(tr.evaluate(0.0).gene == kHalf.gene);
    const auto& T = tr.jump_times();
    for (std::size_t n = 0; n < T.size(); ++n) {
        if (n > 0) CHECK(T[n] > T[n - 1]);
        // gene flips at each jump, molecules are continuous
        const HybridState at = tr.evaluate(T[n]);
        CHECK(at.gene == tr.segment_gene(n + 1));
        CHECK(at.gene != tr.segment_gene(n));
        const MoleculeState before = flow_general(tr.segment_gene(n), T[n] - tr.segment_begin(n),
                                                  tr.segment_start(n), kHalfThird);
        CHECK(max_abs_diff(before, at.x) < 1e-12);
    }
    std::mt19937_64 g(4);
    std::uniform_real_distribution<double> u(0.0, 150.0);
    for (int k = 0; k < 200; ++k) {
        const double t = u(g);
        const HybridState s = tr.evaluate(t);
        std::size_t seg = 0;
        while (seg < T.size() && T[seg] <= t) ++seg;
        const MoleculeState oracle =
            flow_general(tr.segment_gene(seg), t - tr.segment_begin(seg), tr.segment_start(seg), kHalfThird);
        CHECK(max_abs_diff(s.x, oracle) < 1e-12);
        CHECK(in_unit_cube(s.x, 1e-14));
    }
    CHECK_THROWS_AS(tr.evaluate(-1.0), ArgumentError);
    CHECK_THROWS_AS(tr.evaluate(151.0), ArgumentError);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
    RngStream r1(42, 7), r2(42, 7), r3(42, 8);
    const auto a = simulate(r1, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::linear(6));
    const auto b = simulate(r2, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::linear(6));
    const auto c = simulate(r3, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::linear(6));
    CHECK(a.jump_times() == b.jump_times());
    CHECK(a.jump_times() != c.jump_times());
}

TEST_CASE("stop rules and the jump cap") {
    const RateSpec q0 = RateSpec::constant(3), q1 = RateSpec::constant(6);
    SimOptions o;
    o.t_final = 100.0;
    o.max_jumps = 5;
    RngStream rng(2);
    const auto capped = simulate(rng, kHalf, kHalfThird, q0, q1, o);
    CHECK(capped.truncated());
    CHECK(capped.jump_count() == 5);
    CHECK(capped.final_time() == capped.jump_times().back());

    o.max_jumps = 1'000'000;
    o.stop = StopRule::HorizonOrJumps;
    o.min_jumps = 10;
    const auto either = simulate(rng, kHalf, kHalfThird, q0, q1, o);
    CHECK(either.jump_count() == 10);
    CHECK(either.final_time() == either.jump_times().back());
    CHECK_FALSE(either.truncated());

    o.stop = StopRule::HorizonAndJumps;
    o.t_final = 1.0;
    o.min_jumps = 50;
    const auto both = simulate(rng, kHalf, kHalfThird, q0, q1, o);
    CHECK(both.jump_count() == 50);
    CHECK(both.final_time() >= 1.0);

    o.min_jumps = 1;
    o.t_final = 100.0;
    const auto horizon_first = simulate(rng, kHalf, kHalfThird, q0, q1, o);
    CHECK(horizon_first.final_time() == 100.0);

    CHECK(parse_stop_rule(to_string(StopRule::HorizonAndJumps)) == StopRule::HorizonAndJumps);
    CHECK_THROWS_AS(parse_stop_rule("forever"), ArgumentError);
}

TEST_CASE("reference parameter sets never hit the default jump cap") {
    for (const auto& q1 : {RateSpec::constant(6), RateSpec::linear(6)}) {
        for (std::uint64_t s = 0; s < 20; ++s) {
            RngStream rng(100, s);
            const auto tr = simulate(rng, kHalf, kHalfThird, RateSpec::constant(3), q1);
            CHECK_FALSE(tr.truncated());
            CHECK(tr.final_time() == 150.0);
        }
    }
}

TEST_CASE("starts outside the cube flow into it") {
    RngStream rng(9);
    SimOptions o;
    o.t_final = 60.0;
    const auto tr = simulate(rng, {{2.0, 3.0, 1.5}, Gene::Inactive}, kHalfThird, RateSpec::constant(3),
                             RateSpec::constant(6), o);
    CHECK_FALSE(in_unit_cube(tr.evaluate(0.0).x, 0.0));
    CHECK(in_unit_cube(tr.evaluate(60.0).x, 0.0));
}

TEST_CASE("thinning drives the same process") {
    SimOptions o;
    o.t_final = 2e3;
    o.thinning = true;
    RngStream rng(12);
    const auto tr = simulate(rng, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::constant(6), o);
    CHECK(tr.time_active() / tr.final_time() == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("moment accumulator merges exactly") {
    std::mt19937_64 g(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MomentAccumulator all, left, right;
    std::vector<MoleculeState> pts;
    for (int i = 0; i < 1000; ++i) pts.push_back({u(g), u(g) * 0.5, u(g) + 0.2});
    for (int i = 0; i < 1000; ++i) {
        all.add(pts[i]);
        (i < 300 ? left : right).add(pts[i]);
    }
    left.merge(right);
    CHECK(left.count() == 1000);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(left.mean(k) == doctest::Approx(all.mean(k)).epsilon(1e-12));
        CHECK(left.variance(k) == doctest::Approx(all.variance(k)).epsilon(1e-12));
    }
    // two-pass oracle
    double m = 0.0;
    for (const auto& p : pts) m += p[0];
    m /= 1000.0;
    double v = 0.0;
    for (const auto& p : pts) v += (p[0] - m) * (p[0] - m);
    CHECK(all.variance(0) == doctest::Approx(v / 999.0).epsilon(1e-12));
}

TEST_CASE("zero-variance coordinates leave correlations undefined") {
    MomentAccumulator acc;
    for (int i = 0; i < 10; ++i) acc.add({0.1 * i, 0.5, 0.02 * i});
    const auto s = SummaryStats::from(acc);
    CHECK(s.stddev[1] == 0.0);
    CHECK_FALSE(s.corr[0].has_value());
    CHECK_FALSE(s.corr[1].has_value());
    REQUIRE(s.corr[2].has_value());
    CHECK(*s.corr[2] == doctest::Approx(1.0));
}

TEST_CASE("ensemble statistics") {
    EnsembleConfig cfg;
    cfg.replicates = 8;
    cfg.t_final = 1500.0;
    cfg.seed = 31;
    cfg.threads = 1;
    const auto s = ensemble_stats(cfg, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::constant(6));
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(s.mean[k] == doctest::Approx(1.0 / 3.0).epsilon(0.01));
        CHECK(s.stddev[k] > 0.0);
        CHECK(*s.corr[k] >= -1.0);
        CHECK(*s.corr[k] <= 1.0);
    }

    // thread count does not change the outcome
    cfg.t_final = 50.0;
    cfg.threads = 1;
    const auto one = replicate_stats(cfg, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::linear(6));
    cfg.threads = 4;
    const auto four = replicate_stats(cfg, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::linear(6));
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].mean == four[i].mean);
        CHECK(one[i].stddev == four[i].stddev);
    }
    const auto avg = average_stats(one);
    double sd0 = 0.0;
    for (const auto& r : one) sd0 += r.stddev[0];
    CHECK(avg.stddev[0] == doctest::Approx(sd0 / static_cast<double>(one.size())));

    cfg.replicates = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("sampling grid") {
    EnsembleConfig cfg;
    cfg.t_final = 12.0;
    cfg.burn_in = 10.0;
    cfg.grid_step = 0.5;
    const auto g = cfg.grid();
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 10.0);
    CHECK(g.back() == 12.0);
    cfg.burn_in = 13.0;
    CHECK_THROWS_AS(cfg.grid(), ArgumentError);
}

TEST_CASE("histograms") {
    std::vector<HybridState> pts;
    std::mt19937_64 g(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) pts.push_back({{u(g), u(g), u(g) * u(g)}, Gene::Inactive});
    pts.push_back({{1.0, 1.0, 1.0}, Gene::Active});
    pts.push_back({{1.2, 0.5, 0.5}, Gene::Active});
    const auto h = marginal_histogram(pts, {0, 2}, 20);
    std::size_t sum = 0;
    for (auto c : h.counts) sum += c;
    CHECK(sum + h.overflow == pts.size());
    CHECK(h.overflow == 1);
    CHECK(h.count(19, 19) >= 1);
    CHECK(std::fabs(h.integral() - 1.0) < 1e-9);
    CHECK(h.edges().front() == 0.0);
    CHECK(h.edges().back() == 1.0);

    const auto h1 = marginal_histogram_1d(pts, 2, 10);
    std::size_t s1 = 0;
    for (auto c : h1.counts) s1 += c;
    CHECK(s1 + h1.overflow == pts.size());

    CHECK(parse_pair("23") == std::pair<int, int>{1, 2});
    CHECK(pair_label({0, 2}) == "13");
    CHECK_THROWS_AS(parse_pair("11"), ArgumentError);
    CHECK_THROWS_AS(parse_pair("4"), ArgumentError);
    CHECK_THROWS_AS(marginal_histogram(pts, {1, 1}, 10), ArgumentError);
}

TEST_CASE("no jumps put all mass in one bin") {
    std::vector<HybridState> pts;
    SimOptions o;
    o.t_final = 15.0;
    o.validate_rates = false;
    for (std::uint64_t s = 0; s < 50; ++s) {
        RngStream rng(1, s);
        pts.push_back(simulate(rng, {{0.3, 0.3, 0.3}, Gene::Active}, kHalfThird, RateSpec::constant(1),
                               RateSpec::constant(0), o)
                          .final_state());
    }
    const auto h = marginal_histogram(pts, {0, 1}, 50);
    std::size_t nonempty = 0;
    for (auto c : h.counts) nonempty += c > 0;
    CHECK(nonempty == 1);
}

TEST_CASE("constant-rate snapshot leans towards zero") {
    EnsembleConfig cfg;
    cfg.replicates = 5000;
    cfg.t_final = 15.0;
    cfg.burn_in = 0.0;
    cfg.seed = 15;
    const auto pts = snapshot(cfg, 15.0, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::constant(6));
    REQUIRE(pts.size() == 5000);
    const auto h = marginal_histogram_1d(pts, 2, 50);
    std::size_t mode = 0;
    for (std::size_t i = 1; i < h.bins; ++i) {
        if (h.counts[i] > h.counts[mode]) mode = i;
    }
    CHECK(h.center(mode) < 0.5);
    for (const auto& s : pts) CHECK(in_unit_cube(s.x, 1e-14));
    // bit-identical on rerun
    const auto again = snapshot(cfg, 15.0, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::constant(6));
    CHECK(marginal_histogram(again, {1, 2}, 50).counts == marginal_histogram(pts, {1, 2}, 50).counts);
}

TEST_CASE("bimodality analysis") {
    Histogram1D h;
    h.bins = 10;
    h.counts = {50, 30, 10, 5, 5, 8, 20, 40, 35, 10};
    auto r = analyze_bimodality(h);
    CHECK(r.bimodal);
    CHECK(r.low_mode == 0);
    CHECK(r.high_mode == 7);
    CHECK(r.dip == 5);
    CHECK(r.dip_fraction == doctest::Approx(35.0 / 40.0));

    h.counts = {5, 10, 20, 40, 60, 40, 20, 10, 5, 1};
    CHECK_FALSE(analyze_bimodality(h).bimodal);
    // a shallow notch does not count
    h.counts = {10, 40, 60, 55, 58, 40, 20, 10, 5, 1};
    CHECK_FALSE(analyze_bimodality(h).bimodal);
}

TEST_CASE("exports") {
    RngStream rng(4);
    SimOptions o;
    o.t_final = 5.0;
    const auto tr = simulate(rng, kHalf, kHalfThird, RateSpec::constant(3), RateSpec::constant(6), o);
    std::ostringstream csv;
    write_trajectory_csv(csv, tr, {0.0, 1.0, 2.5, 5.0});
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x1,x2,x3,gamma");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);

    std::ostringstream jumps;
    write_jumps_csv(jumps, tr);
    CHECK(jumps.str().rfind("n,T_n,gamma_after\n", 0) == 0);

    std::ostringstream hdr;
    write_comment_header(hdr, {{"seed", "4"}, {"a", "0.5"}});
    CHECK(hdr.str() == "# seed: 4\n# a: 0.5\n");

    std::vector<HybridState> pts{{{0.1, 0.2, 0.3}, Gene::Active}};
    std::ostringstream hist;
    write_histogram(hist, marginal_histogram(pts, {0, 1}, 2));
    CHECK(hist.str().find("counts:\n  - [0, 0]\n  - [1, 0]\n") == std::string::npos);
    CHECK(hist.str().find("counts:\n  - [1, 0]\n  - [0, 0]\n") != std::string::npos);
}
