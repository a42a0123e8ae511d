#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "genepdmp/adiabatic.hpp"
#include "genepdmp/attractor.hpp"
#include "genepdmp/core.hpp"
#include "genepdmp/error.hpp"
#include "genepdmp/random.hpp"
#include "genepdmp/rates.hpp"
#include "genepdmp/sim.hpp"
#include "genepdmp/verify.hpp"
#include "genepdmp/version.hpp"

namespace py = pybind11;
using namespace genepdmp;

namespace {

using Triple = std::array<double, 3>;

template <class F>
Triple triple(const Point3<F>& p) {
    return {p[0], p[1], p[2]};
}
MoleculeState molecule(const Triple& t) { return {t[0], t[1], t[2]}; }
EigenCoords eigen(const Triple& t) { return {t[0], t[1], t[2]}; }

HybridState hybrid(const Triple& x, int gene) { return {molecule(x), gene_from_int(gene)}; }

py::dict stats_dict(const SummaryStats& s) {
    py::dict d;
    d["samples"] = s.samples;
    d["mean"] = s.mean;
    d["stddev"] = s.stddev;
    d["corr"] = s.corr;
    return d;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Member: return "member";
        case Verdict::Exterior: return "exterior";
        default: return "unknown";
    }
}

EnsembleConfig ensemble(std::size_t reps, double t_final, std::uint64_t seed, double grid_step, double burn_in,
                        unsigned threads) {
    EnsembleConfig c;
    c.replicates = reps;
    c.t_final = t_final;
    c.seed = seed;
    c.grid_step = grid_step;
    c.burn_in = burn_in;
    c.threads = threads;
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Piecewise deterministic model of three-stage gene expression";
    m.attr("__version__") = kVersion;

    py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
    py::register_exception<DegenerateParamsError>(m, "DegenerateParamsError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    py::class_<NormParams>(m, "NormParams")
        .def(py::init<double, double>(), py::arg("a"), py::arg("b"))
        .def_property_readonly("a", &NormParams::a)
        .def_property_readonly("b", &NormParams::b)
        .def("distinct_eigen", &NormParams::distinct_eigen);

    py::class_<RateSpec>(m, "RateSpec")
        .def_static("parse", &RateSpec::parse, py::arg("text"))
        .def("value", &RateSpec::value, py::arg("x3"))
        .def("__str__", &RateSpec::to_string);

    m.def(
        "to_eigen", [](const NormParams& p, const Triple& x) { return triple(to_eigen(p, molecule(x))); },
        py::arg("params"), py::arg("x"));
    m.def(
        "from_eigen", [](const NormParams& p, const Triple& u) { return triple(from_eigen(p, eigen(u))); },
        py::arg("params"), py::arg("u"));
    m.def(
        "flow",
        [](int gene, double t, const Triple& x, const NormParams& p) {
            return triple(flow_general(gene_from_int(gene), t, molecule(x), p));
        },
        py::arg("gene"), py::arg("t"), py::arg("x"), py::arg("params"), "Flow of the original coordinates");

    m.def(
        "simulate",
        [](const NormParams& p, const std::string& q0, const std::string& q1, const Triple& x0, int gene,
           double t_final, std::uint64_t seed, double grid_step) {
            RngStream rng(seed);
            SimOptions opts;
            opts.t_final = t_final;
            const Trajectory tr = simulate(rng, hybrid(x0, gene), p, RateSpec::parse(q0), RateSpec::parse(q1), opts);
            std::vector<double> grid;
            for (std::size_t i = 0; static_cast<double>(i) * grid_step <= t_final + 1e-12; ++i) {
                grid.push_back(static_cast<double>(i) * grid_step);
            }
            std::vector<std::tuple<double, double, double, double, int>> rows;
            const auto states = tr.sample(grid);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const auto& s = states[i];
                rows.emplace_back(grid[i], s.x[0], s.x[1], s.x[2], to_int(s.gene));
            }
            py::dict d;
            d["samples"] = rows;
            d["jump_times"] = tr.jump_times();
            d["time_active"] = tr.time_active();
            return d;
        },
        py::arg("params"), py::arg("q0"), py::arg("q1"), py::arg("x0"), py::arg("gene") = 0,
        py::arg("t_final") = 150.0, py::arg("seed") = 0, py::arg("grid_step") = 0.01,
        "Rows (t, x1, x2, x3, gamma) on a uniform grid, plus the jump times");

    m.def(
        "ensemble_stats",
        [](const NormParams& p, const std::string& q0, const std::string& q1, const Triple& x0, int gene,
           std::size_t reps, double t_final, std::uint64_t seed, double grid_step, double burn_in, unsigned threads) {
            const auto cfg = ensemble(reps, t_final, seed, grid_step, burn_in, threads);
            py::gil_scoped_release release;
            const auto runs = replicate_stats(cfg, hybrid(x0, gene), p, RateSpec::parse(q0), RateSpec::parse(q1));
            py::gil_scoped_acquire acquire;
            return stats_dict(average_stats(runs));
        },
        py::arg("params"), py::arg("q0"), py::arg("q1"), py::arg("x0"), py::arg("gene") = 0, py::arg("reps") = 20,
        py::arg("t_final") = 150.0, py::arg("seed") = 0, py::arg("grid_step") = 0.01, py::arg("burn_in") = 10.0,
        py::arg("threads") = 0, "Per-replicate statistics averaged over the replicates");

    m.def(
        "snapshot",
        [](const NormParams& p, const std::string& q0, const std::string& q1, const Triple& x0, int gene,
           std::size_t reps, double t, std::uint64_t seed, unsigned threads) {
            auto cfg = ensemble(reps, t, seed, 0.01, 0.0, threads);
            std::vector<HybridState> pts;
            {
                py::gil_scoped_release release;
                pts = snapshot(cfg, t, hybrid(x0, gene), p, RateSpec::parse(q0), RateSpec::parse(q1));
            }
            std::vector<std::tuple<double, double, double, int>> rows;
            for (const auto& s : pts) rows.emplace_back(s.x[0], s.x[1], s.x[2], to_int(s.gene));
            return rows;
        },
        py::arg("params"), py::arg("q0"), py::arg("q1"), py::arg("x0"), py::arg("gene") = 0, py::arg("reps") = 5000,
        py::arg("t") = 15.0, py::arg("seed") = 0, py::arg("threads") = 0, "Endpoint states at time t");

    m.def(
        "f_map", [](const Triple& t, const NormParams& p) { return triple(f_map({t[0], t[1], t[2]}, p)); },
        py::arg("xyz"), py::arg("params"), "Point of the attractor in eigen coordinates");
    m.def(
        "symmetry_image", [](const Triple& u) { return triple(symmetry_image(eigen(u))); }, py::arg("u"));

    py::class_<Attractor>(m, "Attractor")
        .def(py::init<const NormParams&>(), py::arg("params"))
        .def(
            "membership",
            [](const Attractor& a, const Triple& u, double tol) {
                const MembershipResult r = a.membership(eigen(u), tol);
                py::dict d;
                d["verdict"] = verdict_name(r.verdict);
                d["preimage"] = r.preimage ? py::cast(Triple{r.preimage->x, r.preimage->y, r.preimage->z})
                                           : py::object(py::none());
                d["residual"] = r.residual;
                d["diagnostic"] = r.diagnostic;
                return d;
            },
            py::arg("u"), py::arg("tol") = 1e-8, "Membership of a point given in eigen coordinates")
        .def(
            "distance", [](const Attractor& a, const Triple& u) { return a.distance(eigen(u)); }, py::arg("u"));

    m.def(
        "find_fixed_points",
        [](const NormParams& p, const std::string& q0, const std::string& q1) {
            std::vector<double> cs;
            for (const auto& e : find_fixed_points(GammaSpec(RateSpec::parse(q0), RateSpec::parse(q1)), p)) {
                cs.push_back(e.c);
            }
            return cs;
        },
        py::arg("params"), py::arg("q0"), py::arg("q1"));
    m.def(
        "classify_regime",
        [](const NormParams& p, const std::string& q0, const std::string& q1) {
            return to_string(classify_regime(GammaSpec(RateSpec::parse(q0), RateSpec::parse(q1)), p).regime);
        },
        py::arg("params"), py::arg("q0"), py::arg("q1"));
    m.def(
        "detect_limit_cycle",
        [](const NormParams& p, const std::string& q0, const std::string& q1, const Triple& x0) {
            const CycleReport r = detect_limit_cycle(GammaSpec(RateSpec::parse(q0), RateSpec::parse(q1)), p,
                                                     molecule(x0));
            py::dict d;
            d["found"] = r.found;
            d["period"] = r.period;
            d["section"] = r.section;
            std::vector<std::tuple<double, double, double, double>> orbit;
            for (const auto& o : r.orbit) orbit.emplace_back(o.t, o.x[0], o.x[1], o.x[2]);
            d["orbit"] = orbit;
            d["diagnostics"] = r.diagnostics;
            return d;
        },
        py::arg("params"), py::arg("q0"), py::arg("q1"), py::arg("x0") = Triple{0.5, 0.5, 0.5});

    m.def(
        "hormander_vectors",
        [](const NormParams& p, const Triple& x) {
            return hormander_vectors(model_field(p, Gene::Inactive), model_field(p, Gene::Active), x);
        },
        py::arg("params"), py::arg("x"));
    m.def(
        "hormander_rank", [](const NormParams& p, const Triple& x) { return hormander_rank(p, x); },
        py::arg("params"), py::arg("x"));
    m.def(
        "reach",
        [](const Attractor& att, const Triple& start, const Triple& target, double tol, double margin) {
            ReachOptions o;
            o.tol = tol;
            o.margin = margin;
            const ReachOutcome r = reach(att, eigen(start), eigen(target), o);
            py::dict d;
            d["ok"] = r.ok();
            d["diagnostic"] = r.diagnostic;
            if (r.schedule) {
                std::vector<std::tuple<int, double>> segs;
                for (const auto& s : r.schedule->segments) segs.emplace_back(to_int(s.gene), s.duration);
                d["segments"] = segs;
                d["residual"] = r.schedule->residual;
                d["endpoint"] = triple(r.schedule->endpoint);
            }
            return d;
        },
        py::arg("attractor"), py::arg("start"), py::arg("target"), py::arg("tol") = 1e-6, py::arg("margin") = 1e-3,
        "Alternating flow schedule between two points in eigen coordinates");
}
