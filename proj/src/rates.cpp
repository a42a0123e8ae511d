#include "genepdmp/rates.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <string>
#include <utility>

#include "genepdmp/error.hpp"
#include "genepdmp/format.hpp"

namespace genepdmp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_nonneg(double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw SpecError(std::string(what) + " must be nonnegative and finite");
    }
}

double poly_value(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

double poly_derivative(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t j = c.size(); j-- > 1;) acc = acc * x + static_cast<double>(j) * c[j];
    return acc;
}

// 15-point Kronrod nodes on [0, 1) with the embedded 7-point Gauss rule.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double lo, hi, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gk15(const std::function<double(double)>& f, double lo, double hi) {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = f(center);
    double kron = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double fsum = f(center - dx) + f(center + dx);
        kron += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
    }
    return {lo, hi, kron * half, std::fabs((kron - gauss) * half)};
}

double settle_time_for(const NormParams& p) {
    // slowest relaxation rate; exp(-45) t^2 stays below double resolution
    const double slowest = std::min({1.0, p.a(), p.b()});
    return 45.0 / slowest;
}

}  // namespace

RateSpec::RateSpec(Family family) : family_(std::move(family)) {
    std::visit(overloaded{
                   [](const ConstantRate& r) { require_nonneg(r.k, "rate constant"); },
                   [](const LinearProteinRate& r) { require_nonneg(r.k, "rate constant"); },
                   [](const QuadraticProteinRate& r) {
                       require_nonneg(r.k, "rate constant");
                       require_nonneg(r.eps0, "basal level eps0");
                   },
                   [](const PowerProteinRate& r) {
                       require_nonneg(r.k, "rate constant");
                       require_nonneg(r.m, "exponent");
                   },
                   [](const PolynomialProteinRate& r) {
                       if (r.coeffs.empty()) throw SpecError("polynomial rate needs coefficients");
                       for (double c : r.coeffs) {
                           if (!std::isfinite(c)) throw SpecError("polynomial coefficient not finite");
                       }
                       // grid check; a negative dip narrower than 1e-3 goes unnoticed
                       for (int i = 0; i <= 1000; ++i) {
                           if (poly_value(r.coeffs, i / 1000.0) < -1e-12) {
                               throw SpecError("polynomial rate is negative on [0,1]");
                           }
                       }
                   },
               },
               family_);
}

RateSpec RateSpec::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw SpecError("rate spec '" + std::string(text) + "' lacks a family prefix");
    }
    const std::string_view name = text.substr(0, colon);
    std::vector<double> v;
    try {
        v = parse_number_list(text.substr(colon + 1));
    } catch (const ArgumentError& e) {
        throw SpecError("rate spec '" + std::string(text) + "': " + e.what());
    }
    auto expect = [&](std::size_t n) {
        if (v.size() != n) {
            throw SpecError("rate spec '" + std::string(text) + "' expects " + std::to_string(n) +
                            " value(s)");
        }
    };
    if (name == "const") {
        expect(1);
        return constant(v[0]);
    }
    if (name == "linear") {
        expect(1);
        return linear(v[0]);
    }
    if (name == "quad") {
        expect(2);
        return quadratic(v[0], v[1]);
    }
    if (name == "pow") {
        expect(2);
        return power(v[0], v[1]);
    }
    if (name == "poly") return polynomial(std::move(v));
    throw SpecError("unknown rate family '" + std::string(name) + "'");
}

std::string RateSpec::to_string() const {
    return std::visit(
        overloaded{
            [](const ConstantRate& r) { return "const:" + format_double(r.k); },
            [](const LinearProteinRate& r) { return "linear:" + format_double(r.k); },
            [](const QuadraticProteinRate& r) {
                return "quad:" + format_double(r.k) + "," + format_double(r.eps0);
            },
            [](const PowerProteinRate& r) {
                return "pow:" + format_double(r.k) + "," + format_double(r.m);
            },
            [](const PolynomialProteinRate& r) { return "poly:" + join_numbers(r.coeffs); },
        },
        family_);
}

double RateSpec::value(double x3) const {
    return std::visit(overloaded{
                          [](const ConstantRate& r) { return r.k; },
                          [&](const LinearProteinRate& r) { return r.k * x3; },
                          [&](const QuadraticProteinRate& r) { return r.k * (r.eps0 + x3 * x3); },
                          [&](const PowerProteinRate& r) { return r.k * std::pow(x3, r.m); },
                          [&](const PolynomialProteinRate& r) { return poly_value(r.coeffs, x3); },
                      },
                      family_);
}

double RateSpec::derivative(double x3) const {
    return std::visit(overloaded{
                          [](const ConstantRate&) { return 0.0; },
                          [](const LinearProteinRate& r) { return r.k; },
                          [&](const QuadraticProteinRate& r) { return 2.0 * r.k * x3; },
                          [&](const PowerProteinRate& r) {
                              if (r.m == 0.0) return 0.0;
                              return r.k * r.m * std::pow(x3, r.m - 1.0);
                          },
                          [&](const PolynomialProteinRate& r) {
                              return poly_derivative(r.coeffs, x3);
                          },
                      },
                      family_);
}

double RateSpec::upper_bound() const {
    return std::visit(overloaded{
                          [](const ConstantRate& r) { return r.k; },
                          [](const LinearProteinRate& r) { return r.k; },
                          [](const QuadraticProteinRate& r) { return r.k * (r.eps0 + 1.0); },
                          [](const PowerProteinRate& r) { return r.k; },
                          [](const PolynomialProteinRate& r) {
                              double s = 0.0;
                              for (double c : r.coeffs) s += std::max(c, 0.0);
                              return s;
                          },
                      },
                      family_);
}

double eval_rate(const RateSpec& spec, const MoleculeState& x) {
    if (!in_unit_cube(x, 1e-12)) throw ArgumentError("rate evaluated outside the unit cube");
    return spec(x);
}

void validate_rate_pair(const RateSpec& q0, const RateSpec& q1) {
    if (q0(MoleculeState::zero()) == 0.0) {
        throw SpecError("activation rate must be nonzero at (0,0,0), got " + q0.to_string());
    }
    if (q1(MoleculeState::ones()) == 0.0) {
        throw SpecError("inactivation rate must be nonzero at (1,1,1), got " + q1.to_string());
    }
}

double integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                          const QuadratureOptions& opts) {
    if (hi == lo) return 0.0;
    std::priority_queue<Panel> panels;
    Panel first = gk15(f, lo, hi);
    double total = first.value;
    double error = first.error;
    panels.push(first);
    int count = 1;
    while (error > std::max(opts.abs_tol, opts.rel_tol * std::fabs(total))) {
        if (count >= opts.max_intervals) {
            std::ostringstream msg;
            msg << "adaptive quadrature on [" << lo << ", " << hi << "] did not converge: estimate "
                << total << ", error " << error << " after " << count << " panels";
            throw NumericalError(msg.str());
        }
        const Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        const Panel left = gk15(f, worst.lo, mid);
        const Panel right = gk15(f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
        ++count;
    }
    // re-sum to shed the drift of the running updates
    double sum = 0.0;
    while (!panels.empty()) {
        sum += panels.top().value;
        panels.pop();
    }
    return sum;
}

HazardPath::HazardPath(const RateSpec& spec, Gene gene, const MoleculeState& x0,
                       const NormParams& p, QuadratureOptions quad)
    : rate_([spec](const MoleculeState& x) { return spec(x); }),
      gene_(gene),
      x0_(x0),
      prop_(p),
      quad_(quad),
      settle_time_(settle_time_for(p)) {
    if (const auto* c = std::get_if<ConstantRate>(&spec.family())) {
        closed_ = Closed::Constant;
        k_ = c->k;
    } else if (const auto* l = std::get_if<LinearProteinRate>(&spec.family())) {
        closed_ = Closed::Linear;
        k_ = l->k;
    }
}

HazardPath::HazardPath(RateFunction rate, Gene gene, const MoleculeState& x0, const NormParams& p,
                       QuadratureOptions quad)
    : rate_(std::move(rate)),
      gene_(gene),
      x0_(x0),
      prop_(p),
      quad_(quad),
      settle_time_(settle_time_for(p)) {}

double HazardPath::rate_at(double t) const { return rate_(state_at(t)); }

double HazardPath::limit_rate() const { return rate_(Propagator::fixed_point(gene_)); }

double HazardPath::hazard_between(double t0, double t1) const {
    if (!(t0 >= 0.0) || !(t1 >= t0)) throw ArgumentError("hazard interval must satisfy 0 <= t0 <= t1");
    if (t1 == t0) return 0.0;
    switch (closed_) {
        case Closed::Constant:
            return k_ * (t1 - t0);
        case Closed::Linear:
            return k_ * (prop_.integral(gene_, t1, x0_)[2] - prop_.integral(gene_, t0, x0_)[2]);
        case Closed::None:
            break;
    }
    // past the settle time the integrand is the constant limit rate
    if (t0 >= settle_time_) return limit_rate() * (t1 - t0);
    double tail = 0.0;
    if (t1 > settle_time_) {
        tail = limit_rate() * (t1 - settle_time_);
        t1 = settle_time_;
    }
    return tail + integrate_adaptive([this](double s) { return rate_at(s); }, t0, t1, quad_);
}

double integrated_hazard(const RateSpec& spec, Gene gene, const MoleculeState& x, double t,
                         const NormParams& p) {
    if (!(t >= 0.0)) throw ArgumentError("hazard time must be nonnegative");
    return HazardPath(spec, gene, x, p).hazard(t);
}

double invert_hazard(const HazardPath& path, double level, double horizon) {
    if (!(level >= 0.0)) throw ArgumentError("hazard level must be nonnegative");
    if (level == 0.0) return 0.0;
    const double settle = path.settle_time();
    const double limit = path.limit_rate();

    // bracket by doubling from t = 1
    double lo = 0.0, hazard_lo = 0.0;
    double step = 1.0;
    double hi = std::min(step, horizon);
    double hazard_hi = path.hazard_between(lo, hi);
    while (hazard_hi < level) {
        if (hi >= horizon) return kInfiniteTime;
        if (hi >= settle) {
            // constant rate from here on
            if (limit <= 0.0) return kInfiniteTime;
            const double t = hi + (level - hazard_hi) / limit;
            return t <= horizon ? t : kInfiniteTime;
        }
        lo = hi;
        hazard_lo = hazard_hi;
        step *= 2.0;
        hi = std::min({lo + step, horizon, settle});
        hazard_hi += path.hazard_between(lo, hi);
    }

    // safeguarded Newton inside [lo, hi]; hazards are accumulated from lo
    double t = lo;
    double value = hazard_lo;
    for (int iter = 0; iter < 200; ++iter) {
        const double rate = path.rate_at(t);
        double next = rate > 0.0 ? t + (level - value) / rate : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double next_value = hazard_lo + path.hazard_between(lo, next);
        const double moved = std::fabs(next - t);
        if (next_value < level) {
            lo = next;
            hazard_lo = next_value;
        } else {
            hi = next;
        }
        t = next;
        value = next_value;
        if (next_value == level || moved <= 1e-12 * next || hi - lo <= 1e-12 * hi) return next;
    }
    throw NumericalError("jump-time inversion did not converge");
}

double sample_jump_time(RngStream& rng, const RateSpec& spec, Gene gene, const MoleculeState& x,
                        const NormParams& p, double horizon) {
    const double level = rng.exponential();
    if (const auto* c = std::get_if<ConstantRate>(&spec.family())) {
        if (c->k == 0.0) return kInfiniteTime;
        const double t = level / c->k;
        return t <= horizon ? t : kInfiniteTime;
    }
    return invert_hazard(HazardPath(spec, gene, x, p), level, horizon);
}

double sample_jump_time_thinning(RngStream& rng, const RateSpec& spec, Gene gene,
                                 const MoleculeState& x, const NormParams& p, double horizon) {
    if (!in_unit_cube(x, 1e-12)) throw ArgumentError("thinning requires a start inside the unit cube");
    const double bound = spec.upper_bound();
    if (bound <= 0.0) return kInfiniteTime;
    const Propagator prop(p);
    const double settle = settle_time_for(p);
    const bool vanishes = spec(Propagator::fixed_point(gene)) <= 0.0;
    double t = 0.0;
    while (true) {
        t += rng.exponential() / bound;
        if (t > horizon) return kInfiniteTime;
        if (vanishes && t > settle) return kInfiniteTime;
        if (rng.uniform() * bound < spec(prop.advance(gene, t, x))) return t;
    }
}

}  // namespace genepdmp
