#include "genepdmp/adiabatic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <boost/numeric/odeint.hpp>

#include "genepdmp/error.hpp"
#include "genepdmp/format.hpp"

namespace genepdmp {

std::string to_string(Monotonicity m) {
    switch (m) {
        case Monotonicity::Constant: return "constant";
        case Monotonicity::Increasing: return "increasing";
        case Monotonicity::Decreasing: return "decreasing";
        case Monotonicity::Other: return "other";
    }
    return "other";
}

std::string to_string(Stability s) {
    switch (s) {
        case Stability::Stable: return "stable";
        case Stability::Unstable: return "unstable";
        case Stability::Marginal: return "marginal";
    }
    return "marginal";
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Monostable: return "monostable";
        case Regime::Bistable: return "bistable";
        case Regime::OscillatoryCandidate: return "oscillatory-candidate";
        case Regime::Other: return "other";
    }
    return "other";
}

GammaSpec::GammaSpec(RateSpec q0, RateSpec q1) : q0_(std::move(q0)), q1_(std::move(q1)) {}

double GammaSpec::total(double x3) const {
    const double s = q0_.value(x3) + q1_.value(x3);
    if (!(s > 0.0)) {
        throw SingularityError("q0 + q1 vanishes at x3 = " + format_double(x3) + "; Gamma is undefined");
    }
    return s;
}

double GammaSpec::value(double x3) const {
    const double s = total(x3);
    return q0_.value(x3) / s;
}

double GammaSpec::derivative(double x3) const {
    const double s = total(x3);
    return (q0_.derivative(x3) * q1_.value(x3) - q0_.value(x3) * q1_.derivative(x3)) / (s * s);
}

double GammaSpec::derivative_fd(double x3, double h) const {
    return (value(x3 + h) - value(x3 - h)) / (2.0 * h);
}

Monotonicity GammaSpec::monotonicity(std::size_t grid) const {
    bool up = false, down = false;
    for (std::size_t i = 0; i <= grid; ++i) {
        const double d = derivative(static_cast<double>(i) / static_cast<double>(grid));
        if (d > 0.0) up = true;
        if (d < 0.0) down = true;
    }
    if (up && down) return Monotonicity::Other;
    if (up) return Monotonicity::Increasing;
    if (down) return Monotonicity::Decreasing;
    return Monotonicity::Constant;
}

namespace {

struct Cubic {
    double c2, c1, c0;  // monic

    Complex eval(Complex l) const { return ((l + c2) * l + c1) * l + c0; }
    Complex deriv(Complex l) const { return (3.0 * l + 2.0 * c2) * l + c1; }
    double eval(double l) const { return ((l + c2) * l + c1) * l + c0; }
};

Cubic make_cubic(double g, const NormParams& p) {
    const double a = p.a(), b = p.b();
    return {1.0 + a + b, a + b + a * b, a * b * (1.0 - g)};
}

// The same polynomial in mu = lambda + 1: mu (mu + a - 1)(mu + b - 1) - g a b.
// Its coefficients carry no cancellation, which keeps the triple root at
// a = b = 1, g = 0 resolvable.
Cubic make_shifted_cubic(double g, const NormParams& p) {
    const double am = p.a() - 1.0, bm = p.b() - 1.0;
    return {am + bm, am * bm, -g * p.a() * p.b()};
}

double real_root(const Cubic& q) {
    const double bound = 1.0 + std::max({std::fabs(q.c2), std::fabs(q.c1), std::fabs(q.c0)});
    double lo = -bound, hi = bound;  // q(lo) < 0 < q(hi)
    double x = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double fx = q.eval(x);
        if (fx == 0.0) return x;
        (fx < 0.0 ? lo : hi) = x;
        const double d = q.deriv(Complex(x)).real();
        double next = d != 0.0 ? x - fx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double tol = 4e-16 * std::fabs(x) + 1e-300;
        if (std::fabs(next - x) <= tol || hi - lo <= tol) {
            return next;
        }
        x = next;
    }
    return x;
}

Complex polish(const Cubic& q, Complex l) {
    for (int it = 0; it < 4; ++it) {
        const Complex d = q.deriv(l);
        if (std::abs(d) == 0.0) break;
        const Complex next = l - q.eval(l) / d;
        if (std::abs(q.eval(next)) >= std::abs(q.eval(l))) break;
        l = next;
    }
    return l;
}

}  // namespace

Complex char_poly(Complex lambda, double gamma_prime, const NormParams& p) {
    return (1.0 + lambda) * (p.a() + lambda) * (p.b() + lambda) - gamma_prime * p.a() * p.b();
}

double char_poly_residual(Complex lambda, double gamma_prime, const NormParams& p) {
    const Cubic q = make_cubic(gamma_prime, p);
    const double m = std::abs(lambda);
    const double scale = m * m * m + std::fabs(q.c2) * m * m + std::fabs(q.c1) * m + std::fabs(q.c0);
    return std::abs(q.eval(lambda)) / std::max(scale, 1e-300);
}

EigenTriple char_poly_roots(double gamma_prime, const NormParams& p) {
    const Cubic q = make_shifted_cubic(gamma_prime, p);
    const double r = real_root(q);
    // deflate: mu^2 + B mu + C
    const double B = q.c2 + r;
    const double C = q.c1 + r * B;
    const double disc = B * B - 4.0 * C;
    Complex r2, r3;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        const double t = -0.5 * (B + std::copysign(s, B));
        r2 = t;
        r3 = t != 0.0 ? C / t : 0.0;
    } else {
        const double s = std::sqrt(-disc);
        r2 = Complex(-0.5 * B, 0.5 * s);
        r3 = Complex(-0.5 * B, -0.5 * s);
    }
    EigenTriple roots{Complex(r), polish(q, r2), polish(q, r3)};
    if (disc < 0.0) roots[2] = std::conj(roots[1]);
    for (auto& l : roots) l -= 1.0;
    std::sort(roots.begin(), roots.end(), [](const Complex& x, const Complex& y) {
        const bool xr = x.imag() == 0.0, yr = y.imag() == 0.0;
        if (xr != yr) return xr;
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return roots;
}

double Equilibrium::max_real() const {
    double m = eigenvalues[0].real();
    for (const auto& l : eigenvalues) m = std::max(m, l.real());
    return m;
}

bool Equilibrium::has_oscillatory_pair() const {
    for (const auto& l : eigenvalues) {
        if (l.imag() != 0.0 && l.real() > kStabilityMargin) return true;
    }
    return false;
}

Equilibrium make_equilibrium(const GammaSpec& g, const NormParams& p, double c) {
    Equilibrium e;
    e.c = c;
    e.gamma_prime = g.derivative(c);
    e.eigenvalues = char_poly_roots(e.gamma_prime, p);
    const double m = e.max_real();
    e.stability = m < -kStabilityMargin ? Stability::Stable
                  : m > kStabilityMargin ? Stability::Unstable
                                         : Stability::Marginal;
    return e;
}

std::vector<Equilibrium> find_fixed_points(const GammaSpec& g, const NormParams& p,
                                           const FixedPointOptions& opts) {
    if (opts.grid < 1) throw ArgumentError("fixed point grid needs at least one interval");
    auto h = [&](double c) { return g.value(c) - c; };
    std::vector<double> roots;
    const double n = static_cast<double>(opts.grid);
    double x0 = 0.0, f0 = h(0.0);
    if (f0 == 0.0) roots.push_back(0.0);
    for (std::size_t i = 1; i <= opts.grid; ++i) {
        const double x1 = static_cast<double>(i) / n;
        const double f1 = h(x1);
        if (f1 == 0.0) {
            roots.push_back(x1);
        } else if (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
            double lo = x0, hi = x1, flo = f0;
            while (hi - lo > opts.tol) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                const double fm = h(mid);
                if (fm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        x0 = x1;
        f0 = f1;
    }
    std::vector<Equilibrium> out;
    for (double r : roots) {
        if (!out.empty() && std::fabs(r - out.back().c) <= opts.dedup) continue;
        out.push_back(make_equilibrium(g, p, r));
    }
    return out;
}

RegimeReport classify_regime(const GammaSpec& g, const NormParams& p) {
    RegimeReport rep;
    rep.equilibria = find_fixed_points(g, p);
    const auto& eq = rep.equilibria;
    std::size_t stable = 0;
    bool marginal = false;
    for (const auto& e : eq) {
        if (e.stability == Stability::Stable) ++stable;
        if (e.stability == Stability::Marginal) marginal = true;
    }
    if (p.a() == 1.0 && p.b() == 1.0 && eq.size() == 1) rep.steep_feedback = eq[0].gamma_prime < -8.0;
    if (marginal) {
        rep.regime = Regime::Other;
        rep.diagnostics = "an equilibrium has an eigenvalue with |Re| < " + format_double(kStabilityMargin);
    } else if (stable >= 2) {
        rep.regime = Regime::Bistable;
    } else if (eq.size() == 1 && eq[0].stability == Stability::Stable) {
        rep.regime = Regime::Monostable;
    } else if (eq.size() == 1 && eq[0].has_oscillatory_pair()) {
        rep.regime = Regime::OscillatoryCandidate;
    } else {
        rep.regime = Regime::Other;
        rep.diagnostics = std::to_string(eq.size()) + " equilibria, " + std::to_string(stable) + " stable";
    }
    return rep;
}

MoleculeState adiabatic_rhs(const GammaSpec& g, const NormParams& p, const MoleculeState& x) {
    return model_rhs(p, g.value(x[2]), x);
}

void DenseSolution::push(double t, const MoleculeState& x, const MoleculeState& dx) {
    t_.push_back(t);
    x_.push_back(x);
    dx_.push_back(dx);
}

MoleculeState DenseSolution::operator()(double t) const {
    if (t_.empty()) throw ArgumentError("empty solution");
    if (!(t >= t_.front() && t <= t_.back())) throw ArgumentError("time outside the integrated interval");
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    if (it == t_.end()) return x_.back();
    const std::size_t k = static_cast<std::size_t>(it - t_.begin()) - 1;
    const double h = t_[k + 1] - t_[k];
    const double s = (t - t_[k]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    MoleculeState out;
    for (std::size_t j = 0; j < 3; ++j) {
        out[j] = h00 * x_[k][j] + h10 * h * dx_[k][j] + h01 * x_[k + 1][j] + h11 * h * dx_[k + 1][j];
    }
    return out;
}

double integrate_steps(const GammaSpec& g, const NormParams& p, const MoleculeState& init, double t0,
                       double t1, const StepObserver& obs, const IntegrateOptions& opts) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 3>;
    if (!(t1 >= t0)) throw ArgumentError("integration interval must be ordered");
    auto sys = [&](const State& s, State& ds, double) {
        ds = adiabatic_rhs(g, p, MoleculeState(s[0], s[1], s[2])).c;
    };
    auto stepper = odeint::make_controlled(opts.atol, opts.rtol, odeint::runge_kutta_dopri5<State>());
    State x = init.c;
    double t = t0;
    double dt = std::min(1e-2, t1 - t0);
    MoleculeState dx = adiabatic_rhs(g, p, init);
    while (t < t1) {
        const double h = std::min(dt, t1 - t);
        const bool last = h >= t1 - t;
        State xn = x;
        double tn = t, hn = h;
        if (stepper.try_step(sys, xn, tn, hn) == odeint::fail) {
            dt = hn;
            if (dt < opts.min_step * std::max(1.0, std::fabs(t))) {
                throw NumericalError("step size underflow at t = " + format_double(t) + ", last state (" +
                                     format_double(x[0]) + ", " + format_double(x[1]) + ", " +
                                     format_double(x[2]) + ")");
            }
            continue;
        }
        if (last) tn = t1;
        const MoleculeState xs(xn[0], xn[1], xn[2]);
        const MoleculeState dxn = adiabatic_rhs(g, p, xs);
        const bool go_on = !obs || obs(t, MoleculeState(x[0], x[1], x[2]), dx, tn, xs, dxn);
        x = xn;
        t = tn;
        dx = dxn;
        dt = hn;
        if (!go_on) break;
    }
    return t;
}

DenseSolution integrate(const GammaSpec& g, const NormParams& p, const MoleculeState& init, double t_final,
                        const IntegrateOptions& opts) {
    DenseSolution sol;
    sol.push(0.0, init, adiabatic_rhs(g, p, init));
    integrate_steps(
        g, p, init, 0.0, t_final,
        [&](double, const MoleculeState&, const MoleculeState&, double t1, const MoleculeState& x1,
            const MoleculeState& dx1) {
            sol.push(t1, x1, dx1);
            return true;
        },
        opts);
    return sol;
}

namespace {

double hermite3(double s, double h, double y0, double d0, double y1, double d1) {
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * h * d1;
}

}  // namespace

CycleReport detect_limit_cycle(const GammaSpec& g, const NormParams& p, const MoleculeState& init,
                               const CycleOptions& opts) {
    CycleReport rep;
    const auto eq = find_fixed_points(g, p);
    if (eq.empty()) {
        rep.diagnostics = "no fixed point to place the section at";
        return rep;
    }
    const double c = eq.front().c;
    rep.section = c;

    MoleculeState x = init;
    integrate_steps(
        g, p, init, 0.0, opts.transient,
        [&](double, const MoleculeState&, const MoleculeState&, double, const MoleculeState& x1,
            const MoleculeState&) {
            x = x1;
            return true;
        },
        opts.integrator);

    const std::size_t need = opts.returns + 1;
    auto converged = [&]() {
        const std::size_t n = rep.crossing_times.size();
        if (n < need) return false;
        double lo = 1e300, hi = -1e300, sum = 0.0;
        for (std::size_t k = n - need + 1; k < n; ++k) {
            const double per = rep.crossing_times[k] - rep.crossing_times[k - 1];
            lo = std::min(lo, per);
            hi = std::max(hi, per);
            sum += per;
        }
        const double mean = sum / static_cast<double>(opts.returns);
        if (hi - lo > opts.period_rtol * mean) return false;
        for (std::size_t i = n - need; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (distance(rep.crossings[i], rep.crossings[j]) > opts.point_tol) return false;
            }
        }
        rep.period = mean;
        return true;
    };

    double x3_min = x[2], x3_max = x[2];
    integrate_steps(
        g, p, x, opts.transient, opts.transient + opts.horizon,
        [&](double t0, const MoleculeState& x0, const MoleculeState& d0, double t1, const MoleculeState& x1,
            const MoleculeState& d1) {
            x3_min = std::min(x3_min, x1[2]);
            x3_max = std::max(x3_max, x1[2]);
            if (!(x0[2] < c && x1[2] >= c)) return true;
            const double h = t1 - t0;
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 80 && hi - lo > 1e-16; ++it) {
                const double mid = 0.5 * (lo + hi);
                (hermite3(mid, h, x0[2], d0[2], x1[2], d1[2]) < c ? lo : hi) = mid;
            }
            const double s = 0.5 * (lo + hi);
            MoleculeState at;
            for (std::size_t j = 0; j < 3; ++j) at[j] = hermite3(s, h, x0[j], d0[j], x1[j], d1[j]);
            at[2] = c;
            rep.crossing_times.push_back(t0 + s * h);
            rep.crossings.push_back(at);
            return !converged();
        },
        opts.integrator);

    if (rep.period <= 0.0) {
        rep.diagnostics = std::to_string(rep.crossing_times.size()) + " upward crossings of x3 = " +
                          format_double(c) + "; x3 range over the horizon [" + format_double(x3_min) + ", " +
                          format_double(x3_max) + "]";
        return rep;
    }
    rep.found = true;
    const DenseSolution sol = integrate(g, p, rep.crossings.back(), rep.period, opts.integrator);
    const std::size_t n = std::max<std::size_t>(opts.orbit_samples, 3);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = rep.period * static_cast<double>(k) / static_cast<double>(n);
        rep.orbit.push_back({t, sol(t)});
    }
    return rep;
}

int winding_number(const std::vector<OrbitPoint>& orbit, double c2, double c3) {
    double total = 0.0;
    const std::size_t n = orbit.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto& u = orbit[k].x;
        const auto& v = orbit[(k + 1) % n].x;
        const double a0 = std::atan2(u[2] - c3, u[1] - c2);
        const double a1 = std::atan2(v[2] - c3, v[1] - c2);
        double d = a1 - a0;
        while (d > M_PI) d -= 2 * M_PI;
        while (d < -M_PI) d += 2 * M_PI;
        total += d;
    }
    return static_cast<int>(std::lround(total / (2 * M_PI)));
}

double distance_to_orbit(const std::vector<OrbitPoint>& orbit, const MoleculeState& x) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = orbit.size();
    for (std::size_t k = 0; k < n; ++k) {
        const MoleculeState& u = orbit[k].x;
        const MoleculeState seg = orbit[(k + 1) % n].x - u;
        const MoleculeState rel = x - u;
        const double len2 = seg[0] * seg[0] + seg[1] * seg[1] + seg[2] * seg[2];
        double s = len2 > 0.0 ? (rel[0] * seg[0] + rel[1] * seg[1] + rel[2] * seg[2]) / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        best = std::min(best, distance(x, u + s * seg));
    }
    return best;
}

void write_orbit_csv(std::ostream& out, const std::vector<OrbitPoint>& orbit) {
    out << "t,x1,x2,x3\n";
    for (const auto& o : orbit) {
        out << format_double(o.t) << ',' << format_double(o.x[0]) << ',' << format_double(o.x[1]) << ','
            << format_double(o.x[2]) << '\n';
    }
}

namespace {

std::string complex_text(const Complex& z) {
    if (z.imag() == 0.0) return format_double(z.real());
    return format_double(z.real()) + (z.imag() < 0 ? "-" : "+") + format_double(std::fabs(z.imag())) + "i";
}

}  // namespace

void write_regime_report(std::ostream& out, const GammaSpec& g, const NormParams& p, const RegimeReport& r,
                         const CycleReport* cycle) {
    out << "a: " << format_double(p.a()) << '\n';
    out << "b: " << format_double(p.b()) << '\n';
    out << "q0: \"" << g.q0().to_string() << "\"\n";
    out << "q1: \"" << g.q1().to_string() << "\"\n";
    out << "gamma_monotonicity: " << to_string(g.monotonicity()) << '\n';
    out << "regime: " << to_string(r.regime) << '\n';
    if (r.steep_feedback) out << "gamma_prime_below_minus_8: " << (*r.steep_feedback ? "true" : "false") << '\n';
    if (!r.diagnostics.empty()) out << "diagnostics: \"" << r.diagnostics << "\"\n";
    out << "fixed_points:\n";
    for (const auto& e : r.equilibria) {
        out << "  - c: " << format_double(e.c) << '\n';
        out << "    gamma_prime: " << format_double(e.gamma_prime) << '\n';
        out << "    stability: " << to_string(e.stability) << '\n';
        out << "    eigenvalues: [" << complex_text(e.eigenvalues[0]) << ", " << complex_text(e.eigenvalues[1])
            << ", " << complex_text(e.eigenvalues[2]) << "]\n";
    }
    if (cycle) {
        out << "cycle:\n";
        out << "  found: " << (cycle->found ? "true" : "false") << '\n';
        out << "  section_x3: " << format_double(cycle->section) << '\n';
        if (cycle->found) out << "  period: " << format_double(cycle->period) << '\n';
        out << "  crossings: " << cycle->crossing_times.size() << '\n';
        if (!cycle->diagnostics.empty()) out << "  diagnostics: \"" << cycle->diagnostics << "\"\n";
    }
}

}  // namespace genepdmp
