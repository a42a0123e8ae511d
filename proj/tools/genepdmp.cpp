#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "genepdmp/adiabatic.hpp"
#include "genepdmp/attractor.hpp"
#include "genepdmp/core.hpp"
#include "genepdmp/error.hpp"
#include "genepdmp/format.hpp"
#include "genepdmp/random.hpp"
#include "genepdmp/rates.hpp"
#include "genepdmp/sim.hpp"
#include "genepdmp/verify.hpp"
#include "genepdmp/version.hpp"

namespace fs = std::filesystem;
using namespace genepdmp;

namespace {

// Raised while turning flag text into a validated config; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::string a = "1/2";
    std::string b = "1/3";
    std::string q0 = "const:3";
    std::string q1 = "const:6";
    std::optional<std::uint64_t> seed;
    std::string init = "0.5,0.5,0.5,0";
    double t_final = 150.0;
    double grid_step = 0.01;
    double burn_in = 10.0;
    std::size_t reps = 100;
    double t_snapshot = 15.0;
    std::string pairs = "12,23,13";
    std::string marginals;
    std::size_t bins = 50;
    unsigned threads = 0;
    std::string stop = "horizon";
    std::size_t min_jumps = 0;
    std::size_t max_jumps = 10'000'000;
    bool thinning = false;
    std::string format = "text";
    std::string frame = "original";
    std::size_t resolution = 200;
    std::string point;
    std::string from;
    std::string to;
    double tol = 1e-6;
    double margin = 1e-3;
    bool detect_cycle = false;
    double transient = 200.0;
    double horizon = 2000.0;
    std::string out_dir;
    std::string prefix;
};

// Validated numeric view of a RunConfig.
struct Resolved {
    double a = 0.0, b = 0.0;
    std::optional<RateSpec> q0, q1;
};

double number_arg(const std::string& name, const std::string& text) {
    try {
        return parse_number(text);
    } catch (const std::exception& e) {
        throw UsageError("--" + name + ": " + e.what());
    }
}

std::vector<double> list_arg(const std::string& name, const std::string& text, std::size_t lo, std::size_t hi) {
    std::vector<double> v;
    try {
        v = parse_number_list(text);
    } catch (const std::exception& e) {
        throw UsageError("--" + name + ": " + e.what());
    }
    if (v.size() < lo || v.size() > hi) {
        throw UsageError("--" + name + ": expected " + std::to_string(lo) +
                         (lo == hi ? "" : " to " + std::to_string(hi)) + " numbers");
    }
    return v;
}

Resolved resolve(const RunConfig& c) {
    Resolved r;
    r.a = number_arg("a", c.a);
    r.b = number_arg("b", c.b);
    if (!(r.a > 0.0) || !(r.b > 0.0) || !std::isfinite(r.a) || !std::isfinite(r.b)) {
        throw UsageError("--a and --b must be positive and finite");
    }
    try {
        r.q0 = RateSpec::parse(c.q0);
        r.q1 = RateSpec::parse(c.q1);
    } catch (const std::exception& e) {
        throw UsageError(std::string("rate spec: ") + e.what());
    }
    return r;
}

HybridState hybrid_init(const std::string& text) {
    const auto v = list_arg("init", text, 3, 4);
    HybridState s;
    s.x = MoleculeState(v[0], v[1], v[2]);
    if (!in_unit_cube(s.x)) throw UsageError("--init: levels must lie in [0,1]");
    if (v.size() == 4) {
        if (v[3] != 0.0 && v[3] != 1.0) throw UsageError("--init: gene must be 0 or 1");
        s.gene = v[3] == 1.0 ? Gene::Active : Gene::Inactive;
    }
    return s;
}

void require_seed(const RunConfig& c) {
    if (!c.seed) throw UsageError("--seed is required for " + c.command);
}

void require_positive(const std::string& name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("--" + name + " must be positive");
}

OutputFrame frame_arg(const std::string& text) {
    if (text == "original") return OutputFrame::Original;
    if (text == "eigen") return OutputFrame::Eigen;
    throw UsageError("--frame must be original or eigen");
}

EnsembleConfig ensemble_config(const RunConfig& c) {
    EnsembleConfig e;
    e.replicates = c.reps;
    e.t_final = c.t_final;
    e.seed = c.seed.value_or(0);
    e.grid_step = c.grid_step;
    e.burn_in = c.burn_in;
    e.max_jumps = c.max_jumps;
    e.min_jumps = c.min_jumps;
    e.threads = c.threads;
    try {
        e.stop = parse_stop_rule(c.stop);
        e.validate();
    } catch (const std::exception& ex) {
        throw UsageError(ex.what());
    }
    return e;
}

nlohmann::ordered_json config_json(const RunConfig& c, const std::vector<std::string>& keys) {
    std::map<std::string, nlohmann::ordered_json> all{
        {"a", c.a},
        {"b", c.b},
        {"q0", c.q0},
        {"q1", c.q1},
        {"seed", c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json(nullptr)},
        {"init", c.init},
        {"tfinal", format_double(c.t_final)},
        {"grid_step", format_double(c.grid_step)},
        {"burn_in", format_double(c.burn_in)},
        {"reps", c.reps},
        {"t", format_double(c.t_snapshot)},
        {"pairs", c.pairs},
        {"marginals", c.marginals},
        {"bins", c.bins},
        {"stop", c.stop},
        {"min_jumps", c.min_jumps},
        {"max_jumps", c.max_jumps},
        {"thinning", c.thinning},
        {"format", c.format},
        {"frame", c.frame},
        {"resolution", c.resolution},
        {"point", c.point},
        {"from", c.from},
        {"to", c.to},
        {"tol", format_double(c.tol)},
        {"margin", format_double(c.margin)},
        {"detect_cycle", c.detect_cycle},
        {"transient", format_double(c.transient)},
        {"horizon", format_double(c.horizon)},
    };
    nlohmann::ordered_json j;
    j["command"] = c.command;
    for (const auto& k : keys) j[k] = all.at(k);
    return j;
}

class Outputs {
 public:
    Outputs(const RunConfig& c, nlohmann::ordered_json config) : config_(std::move(config)) {
        dir_ = c.out_dir;
        if (dir_.empty()) {
            const char* env = std::getenv("GENEPDMP_OUT_DIR");
            dir_ = env && *env ? env : ".";
        }
        prefix_ = c.prefix;
        fs::create_directories(dir_);
    }

    // Opens <dir>/<prefix><name> and writes the comment header.
    std::ofstream open(const std::string& name) {
        const fs::path path = fs::path(dir_) / (prefix_ + name);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string());
        write_comment_header(out, {{"genepdmp", kVersion}, {"config", config_.dump()}});
        std::cout << "wrote " << path.string() << '\n';
        return out;
    }

 private:
    nlohmann::ordered_json config_;
    std::string dir_;
    std::string prefix_;
};

std::vector<double> uniform_grid(double t0, double t1, double step) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(t0 + static_cast<double>(i) * step);
    return g;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& c) {
    require_seed(c);
    require_positive("tfinal", c.t_final);
    require_positive("grid-step", c.grid_step);
    const Resolved r = resolve(c);
    const HybridState init = hybrid_init(c.init);
    const NormParams p(r.a, r.b);
    SimOptions opts;
    opts.t_final = c.t_final;
    opts.max_jumps = c.max_jumps;
    opts.min_jumps = c.min_jumps;
    opts.thinning = c.thinning;
    try {
        opts.stop = parse_stop_rule(c.stop);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    validate_rate_pair(*r.q0, *r.q1);

    RngStream rng(*c.seed);
    const Trajectory traj = simulate(rng, init, p, *r.q0, *r.q1, opts);
    Outputs out(c, config_json(c, {"a", "b", "q0", "q1", "seed", "init", "tfinal", "grid_step", "stop",
                                   "min_jumps", "max_jumps", "thinning"}));
    auto f = out.open("trajectory.csv");
    write_trajectory_csv(f, traj, uniform_grid(0.0, traj.final_time(), c.grid_step));
    auto j = out.open("jumps.csv");
    write_jumps_csv(j, traj);
    if (traj.truncated()) std::cerr << "warning: trajectory truncated at max-jumps\n";
    return 0;
}

void write_stats_csv_row(std::ostream& out, const std::string& label, const SummaryStats& s) {
    out << label << ',' << s.samples;
    for (double m : s.mean) out << ',' << format_double(m);
    for (double d : s.stddev) out << ',' << format_double(d);
    for (const auto& cr : s.corr) out << ',' << (cr ? format_double(*cr) : std::string());
    out << '\n';
}

int cmd_ensemble(const RunConfig& c) {
    require_seed(c);
    if (c.format != "text" && c.format != "csv") throw UsageError("--format must be text or csv");
    const Resolved r = resolve(c);
    const HybridState init = hybrid_init(c.init);
    const EnsembleConfig cfg = ensemble_config(c);
    const NormParams p(r.a, r.b);
    validate_rate_pair(*r.q0, *r.q1);

    const auto runs = replicate_stats(cfg, init, p, *r.q0, *r.q1);
    const SummaryStats avg = average_stats(runs);
    Outputs out(c, config_json(c, {"a", "b", "q0", "q1", "seed", "init", "tfinal", "grid_step", "burn_in", "reps",
                                   "stop", "min_jumps", "max_jumps", "format"}));
    if (c.format == "text") {
        auto f = out.open("ensemble_stats.txt");
        f << "replicates: " << runs.size() << '\n';
        f << "average_over_replicates:\n";
        std::ostringstream block;
        write_stats(block, avg);
        std::istringstream lines(block.str());
        for (std::string line; std::getline(lines, line);) f << "  " << line << '\n';
    } else {
        auto f = out.open("ensemble_stats.csv");
        f << "replicate,samples,mean_x1,mean_x2,mean_x3,sd_x1,sd_x2,sd_x3,corr_x1_x2,corr_x2_x3,corr_x1_x3\n";
        for (std::size_t i = 0; i < runs.size(); ++i) write_stats_csv_row(f, std::to_string(i), runs[i]);
        write_stats_csv_row(f, "average", avg);
    }
    return 0;
}

int cmd_hist(const RunConfig& c) {
    require_seed(c);
    require_positive("t", c.t_snapshot);
    if (c.bins == 0) throw UsageError("--bins must be positive");
    const Resolved r = resolve(c);
    const HybridState init = hybrid_init(c.init);
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> coords;
    try {
        std::istringstream in(c.pairs);
        for (std::string tok; std::getline(in, tok, ',');) pairs.push_back(parse_pair(tok));
        std::istringstream mi(c.marginals);
        for (std::string tok; std::getline(mi, tok, ',');) {
            if (tok != "1" && tok != "2" && tok != "3") throw SpecError("marginal must be 1, 2 or 3");
            coords.push_back(tok[0] - '1');
        }
    } catch (const std::exception& e) {
        throw UsageError(std::string("--pairs/--marginals: ") + e.what());
    }
    RunConfig sc = c;
    sc.t_final = c.t_snapshot;
    sc.burn_in = 0.0;
    const EnsembleConfig cfg = ensemble_config(sc);
    const NormParams p(r.a, r.b);
    validate_rate_pair(*r.q0, *r.q1);

    const auto points = snapshot(cfg, c.t_snapshot, init, p, *r.q0, *r.q1);
    Outputs out(c, config_json(c, {"a", "b", "q0", "q1", "seed", "init", "t", "reps", "pairs", "marginals", "bins",
                                   "max_jumps"}));
    for (const auto& pr : pairs) {
        const Histogram2D h = marginal_histogram(points, pr, c.bins);
        auto f = out.open("hist_" + pair_label(pr) + ".txt");
        write_histogram(f, h);
    }
    for (int k : coords) {
        const Histogram1D h = marginal_histogram_1d(points, k, c.bins);
        const std::string name = "x" + std::to_string(k + 1);
        auto f = out.open("hist_" + name + ".csv");
        f << "bin,lower,upper,count\n";
        for (std::size_t i = 0; i < h.bins; ++i) {
            f << i << ',' << format_double(static_cast<double>(i) * h.width()) << ','
              << format_double(static_cast<double>(i + 1) * h.width()) << ',' << h.counts[i] << '\n';
        }
        const BimodalityReport bm = analyze_bimodality(h);
        auto g = out.open("bimodality_" + name + ".txt");
        g << "coordinate: " << name << '\n';
        g << "total: " << h.total << '\n';
        g << "overflow: " << h.overflow << '\n';
        g << "bimodal: " << (bm.bimodal ? "true" : "false") << '\n';
        g << "low_mode: " << format_double(h.center(bm.low_mode)) << '\n';
        g << "high_mode: " << format_double(h.center(bm.high_mode)) << '\n';
        g << "dip_count: " << bm.dip << '\n';
        g << "dip_fraction: " << format_double(bm.dip_fraction) << '\n';
    }
    return 0;
}

int cmd_attractor(const RunConfig& c) {
    const Resolved r = resolve(c);
    const OutputFrame frame = frame_arg(c.frame);
    if (c.resolution == 0) throw UsageError("--resolution must be positive");
    std::optional<std::vector<double>> point;
    if (!c.point.empty()) point = list_arg("point", c.point, 3, 3);
    const NormParams p(r.a, r.b);
    Outputs out(c, config_json(c, {"a", "b", "frame", "resolution", "point"}));

    if (!p.distinct_eigen()) {
        // Without an eigenbasis only the two degenerate forms are available.
        const auto b1 = degenerate_boundary(p, DegenerateForm::A1, c.resolution);
        const auto b2 = degenerate_boundary(p, DegenerateForm::A2, c.resolution);
        const std::pair<const char*, const std::vector<MoleculeState>*> forms[] = {{"A1", &b1}, {"A2", &b2}};
        for (const auto& [name, pts] : forms) {
            auto f = out.open(std::string("boundary_") + name + ".csv");
            f << "x1,x2,x3\n";
            for (const auto& x : *pts) {
                f << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(x[2]) << '\n';
            }
        }
        std::vector<MoleculeState> mirrored;
        for (const auto& x : b1) mirrored.push_back(symmetry_image(x));
        std::cout << "hausdorff_A1_A2: " << format_double(hausdorff(b1, b2)) << '\n';
        std::cout << "hausdorff_mirror_A1_A2: " << format_double(hausdorff(mirrored, b2)) << '\n';
        if (point) throw DegenerateParamsError("membership needs distinct 1, a, b");
        return 0;
    }

    AttractorOptions opts;
    opts.mesh_resolution = c.resolution;
    const Attractor att(p, opts);
    for (Surface s : {Surface::S0, Surface::S1}) {
        auto f = out.open("mesh_" + to_string(s) + ".csv");
        write_mesh_csv(f, att.mesh(s), p, frame);
    }
    if (point) {
        const MoleculeState xo((*point)[0], (*point)[1], (*point)[2]);
        const EigenCoords u =
            frame == OutputFrame::Eigen ? EigenCoords((*point)[0], (*point)[1], (*point)[2]) : to_eigen(p, xo);
        const MembershipResult m = att.membership(u);
        auto f = out.open("membership.txt");
        f << "point_eigen: [" << format_double(u[0]) << ", " << format_double(u[1]) << ", " << format_double(u[2])
          << "]\n";
        f << "verdict: " << (m.verdict == Verdict::Member ? "member"
                             : m.verdict == Verdict::Exterior ? "exterior"
                                                              : "unknown")
          << '\n';
        if (m.preimage) {
            f << "preimage: [" << format_double(m.preimage->x) << ", " << format_double(m.preimage->y) << ", "
              << format_double(m.preimage->z) << "]\n";
        }
        f << "residual: " << format_double(m.residual) << '\n';
        if (m.verdict != Verdict::Unknown) f << "distance: " << format_double(att.distance(u)) << '\n';
        if (!m.diagnostic.empty()) f << "diagnostic: \"" << m.diagnostic << "\"\n";
    }
    return 0;
}

int cmd_adiabatic(const RunConfig& c) {
    const Resolved r = resolve(c);
    require_positive("tfinal", c.t_final);
    require_positive("grid-step", c.grid_step);
    require_positive("transient", c.transient);
    require_positive("horizon", c.horizon);
    const HybridState init = hybrid_init(c.init);
    const NormParams p(r.a, r.b);
    const GammaSpec g(*r.q0, *r.q1);

    const RegimeReport report = classify_regime(g, p);
    std::optional<CycleReport> cycle;
    if (c.detect_cycle) {
        CycleOptions co;
        co.transient = c.transient;
        co.horizon = c.horizon;
        cycle = detect_limit_cycle(g, p, init.x, co);
    }
    const DenseSolution sol = integrate(g, p, init.x, c.t_final);

    Outputs out(c, config_json(c, {"a", "b", "q0", "q1", "init", "tfinal", "grid_step", "detect_cycle", "transient",
                                   "horizon"}));
    {
        auto f = out.open("regime.txt");
        write_regime_report(f, g, p, report, cycle ? &*cycle : nullptr);
    }
    {
        auto f = out.open("adiabatic.csv");
        f << "t,x1,x2,x3\n";
        for (double t : uniform_grid(0.0, sol.t_end(), c.grid_step)) {
            const MoleculeState x = sol(t);
            f << format_double(t) << ',' << format_double(x[0]) << ',' << format_double(x[1]) << ','
              << format_double(x[2]) << '\n';
        }
    }
    if (cycle && cycle->found) {
        auto f = out.open("orbit.csv");
        write_orbit_csv(f, cycle->orbit);
    }
    if (cycle && !cycle->found) {
        std::cerr << "no limit cycle: " << cycle->diagnostics << '\n';
        return 1;
    }
    return 0;
}

int cmd_verify(const RunConfig& given) {
    RunConfig c = given;
    if (c.point.empty()) c.point = "0.5,0.5,0.5";
    const Resolved r = resolve(c);
    const auto pt = list_arg("point", c.point, 3, 3);
    const NormParams p(r.a, r.b);
    const Vec3 x{pt[0], pt[1], pt[2]};
    const AffineField a0 = model_field(p, Gene::Inactive), a1 = model_field(p, Gene::Active);
    const auto v = hormander_vectors(a0, a1, x);
    const int rank = hormander_rank(a0, a1, x);
    Outputs out(c, config_json(c, {"a", "b", "point"}));
    auto f = out.open("hormander.txt");
    const char* names[3] = {"a1_minus_a0", "bracket_a0_a1", "bracket_a0_a0_a1"};
    for (std::size_t i = 0; i < 3; ++i) {
        f << names[i] << ": [" << format_double(v[i][0]) << ", " << format_double(v[i][1]) << ", "
          << format_double(v[i][2]) << "]\n";
    }
    f << "rank: " << rank << '\n';
    f << "full_rank: " << (rank == 3 ? "true" : "false") << '\n';
    std::cout << "rank " << rank << '\n';
    return 0;
}

int cmd_reach(const RunConfig& c) {
    const Resolved r = resolve(c);
    const OutputFrame frame = frame_arg(c.frame);
    if (c.from.empty() || c.to.empty()) throw UsageError("--from and --to are required for reach");
    const auto s = list_arg("from", c.from, 3, 3);
    const auto t = list_arg("to", c.to, 3, 3);
    require_positive("tol", c.tol);
    if (!(c.margin >= 0.0)) throw UsageError("--margin must be nonnegative");
    const NormParams p(r.a, r.b);
    const Attractor att(p);
    auto eig = [&](const std::vector<double>& v) {
        return frame == OutputFrame::Eigen ? EigenCoords(v[0], v[1], v[2])
                                           : to_eigen(p, MoleculeState(v[0], v[1], v[2]));
    };
    ReachOptions opts;
    opts.tol = c.tol;
    opts.margin = c.margin;
    const ReachOutcome res = reach(att, eig(s), eig(t), opts);
    if (!res.ok()) {
        std::cerr << "reach failed: " << res.diagnostic << '\n';
        return 1;
    }
    Outputs out(c, config_json(c, {"a", "b", "frame", "from", "to", "tol", "margin"}));
    auto f = out.open("reach.txt");
    write_reach_schedule(f, *res.schedule);
    return 0;
}

// ---------------------------------------------------------------------------

void add_params(CLI::App* sub, RunConfig& c, bool rates) {
    sub->add_option("--a", c.a, "Ratio d2/d1, decimal or p/q")->capture_default_str();
    sub->add_option("--b", c.b, "Ratio d3/d1, decimal or p/q")->capture_default_str();
    if (rates) {
        sub->add_option("--q0", c.q0, "Activation rate: const:k, linear:k, quad:k,eps0, pow:k,m, poly:c0,c1,...")
            ->capture_default_str();
        sub->add_option("--q1", c.q1, "Deactivation rate, same syntax")->capture_default_str();
    }
}

void add_output(CLI::App* sub, RunConfig& c) {
    sub->add_option("--out-dir", c.out_dir, "Output directory (default: $GENEPDMP_OUT_DIR or .)");
    sub->add_option("--prefix", c.prefix, "Prefix for output file names");
}

void add_stochastic(CLI::App* sub, RunConfig& c) {
    sub->add_option("--seed", c.seed, "Random seed (required)");
    sub->add_option("--init", c.init, "Initial state x1,x2,x3[,gene]")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads, 0 for all cores")->capture_default_str();
    sub->add_option("--max-jumps", c.max_jumps, "Jump cap per trajectory")->capture_default_str();
}

void add_stop(CLI::App* sub, RunConfig& c) {
    sub->add_option("--stop", c.stop, "Stop rule: horizon, horizon-or-jumps, horizon-and-jumps")
        ->capture_default_str();
    sub->add_option("--min-jumps", c.min_jumps, "Jump count used by the jump stop rules")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piecewise deterministic model of three-stage gene expression", "genepdmp"};
    app.set_version_flag("--version", std::string("genepdmp ") + kVersion);
    app.require_subcommand(1);
    app.get_formatter()->column_width(34);
    RunConfig c;

    auto* sim = app.add_subcommand("simulate", "Simulate one trajectory; writes trajectory.csv and jumps.csv");
    add_params(sim, c, true);
    add_stochastic(sim, c);
    add_stop(sim, c);
    sim->add_option("--tfinal", c.t_final, "Time horizon")->capture_default_str();
    sim->add_option("--grid-step", c.grid_step, "Sampling step of the trajectory CSV")->capture_default_str();
    sim->add_flag("--thinning", c.thinning, "Use the thinning jump-time sampler");
    add_output(sim, c);

    auto* ens = app.add_subcommand("ensemble", "Replicate statistics; writes ensemble_stats.txt or .csv");
    add_params(ens, c, true);
    add_stochastic(ens, c);
    add_stop(ens, c);
    ens->add_option("--reps", c.reps, "Number of replicates")->capture_default_str();
    ens->add_option("--tfinal", c.t_final, "Time horizon")->capture_default_str();
    ens->add_option("--grid-step", c.grid_step, "Sampling step")->capture_default_str();
    ens->add_option("--burn-in", c.burn_in, "Samples before this time are dropped")->capture_default_str();
    ens->add_option("--format", c.format, "text or csv")->capture_default_str();
    add_output(ens, c);

    auto* hist = app.add_subcommand("hist", "Snapshot histograms; writes hist_<pair>.txt per pair");
    add_params(hist, c, true);
    add_stochastic(hist, c);
    hist->add_option("--reps", c.reps, "Number of replicates")->capture_default_str();
    hist->add_option("--t", c.t_snapshot, "Snapshot time")->capture_default_str();
    hist->add_option("--pairs", c.pairs, "Coordinate pairs, from 12, 23, 13")->capture_default_str();
    hist->add_option("--marginals", c.marginals, "Coordinates for 1-D histograms and bimodality, e.g. 3");
    hist->add_option("--bins", c.bins, "Bins per axis on [0,1]")->capture_default_str();
    add_output(hist, c);

    auto* att = app.add_subcommand("attractor", "Boundary meshes of the attractor and point membership");
    add_params(att, c, false);
    att->add_option("--resolution", c.resolution, "Mesh resolution per parameter")->capture_default_str();
    att->add_option("--frame", c.frame, "Coordinates of outputs and --point: original or eigen")
        ->capture_default_str();
    att->add_option("--point", c.point, "Point p1,p2,p3 to test for membership");
    add_output(att, c);

    auto* adi = app.add_subcommand("adiabatic", "Fast-switching limit: regime report, trajectory and cycle");
    add_params(adi, c, true);
    adi->add_option("--init", c.init, "Initial state x1,x2,x3[,gene]; the gene is ignored")->capture_default_str();
    adi->add_option("--tfinal", c.t_final, "Integration horizon")->capture_default_str();
    adi->add_option("--grid-step", c.grid_step, "Sampling step of adiabatic.csv")->capture_default_str();
    adi->add_flag("--detect-cycle", c.detect_cycle, "Search for a limit cycle and write orbit.csv");
    adi->add_option("--transient", c.transient, "Time discarded before the cycle search")->capture_default_str();
    adi->add_option("--horizon", c.horizon, "Longest time searched for returns")->capture_default_str();
    add_output(adi, c);

    auto* ver = app.add_subcommand("verify", "Bracket vectors and their rank at a point");
    add_params(ver, c, false);
    ver->add_option("--point", c.point, "Point x1,x2,x3 (default 0.5,0.5,0.5)");
    add_output(ver, c);

    auto* rch = app.add_subcommand("reach", "Alternating flow schedule between two attractor points");
    add_params(rch, c, false);
    rch->add_option("--from", c.from, "Start point p1,p2,p3 (required)");
    rch->add_option("--to", c.to, "Target point p1,p2,p3 (required)");
    rch->add_option("--frame", c.frame, "Coordinates of --from and --to: original or eigen")
        ->capture_default_str();
    rch->add_option("--tol", c.tol, "Replay residual bound")->capture_default_str();
    rch->add_option("--margin", c.margin, "Interior margin of the target preimage")->capture_default_str();
    add_output(rch, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::map<std::string, int (*)(const RunConfig&)> commands{
        {"simulate", cmd_simulate}, {"ensemble", cmd_ensemble},   {"hist", cmd_hist},   {"attractor", cmd_attractor},
        {"adiabatic", cmd_adiabatic}, {"verify", cmd_verify}, {"reach", cmd_reach},
    };
    c.command = app.get_subcommands().front()->get_name();
    try {
        return commands.at(c.command)(c);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
