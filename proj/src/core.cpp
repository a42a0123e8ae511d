#include "genepdmp/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "genepdmp/error.hpp"

namespace genepdmp {

namespace {

void require_nonnegative_time(double t) {
    if (!(t >= 0.0)) throw ArgumentError("flow time must be nonnegative, got " + std::to_string(t));
}

// Divided difference e^s[s0, s1], evaluated around the larger node so the
// exponential never overflows.
double exp_dd1(double s0, double s1) {
    const double hi = std::max(s0, s1);
    const double d = std::min(s0, s1) - hi;
    if (d == 0.0) return std::exp(hi);
    return std::exp(hi) * (std::expm1(d) / d);
}

// Divided difference e^s[s0, s1, s2]. For clustered nodes the Taylor series
// in complete homogeneous polynomials avoids cancellation.
double exp_dd2(double s0, double s1, double s2) {
    std::array<double, 3> s{s0, s1, s2};
    std::sort(s.begin(), s.end());
    const double spread = s[2] - s[0];
    if (spread > 1.0) {
        return (exp_dd1(s[2], s[1]) - exp_dd1(s[1], s[0])) / spread;
    }
    const double m = (s[0] + s[1] + s[2]) / 3.0;
    const double d0 = s[0] - m, d1 = s[1] - m, d2 = s[2] - m;
    // h_k for one, two, three variables
    double h1 = 1.0, h2 = 1.0, h3 = 1.0;
    double sum = 0.5;  // h_0 / 2!
    double fact = 2.0;
    // spread <= 1 bounds term k by C(k+2,2)/(k+2)!, below 1e-30 at k = 28
    for (int k = 1; k <= 28; ++k) {
        h1 *= d0;
        h2 = d1 * h2 + h1;
        h3 = d2 * h3 + h2;
        fact *= static_cast<double>(k + 2);
        sum += h3 / fact;
    }
    return std::exp(m) * sum;
}

}  // namespace

bool in_unit_cube(const MoleculeState& x, double slack) {
    for (std::size_t k = 0; k < 3; ++k) {
        if (!(x[k] >= -slack && x[k] <= 1.0 + slack)) return false;
    }
    return true;
}

Gene gene_from_int(int i) {
    if (i == 0) return Gene::Inactive;
    if (i == 1) return Gene::Active;
    throw ArgumentError("gene state must be 0 or 1, got " + std::to_string(i));
}

void RawParams::validate() const {
    for (double v : {A1, A2, A3, d1, d2, d3}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ArgumentError("production and degradation rates must be positive and finite");
        }
    }
}

NormParams::NormParams(double a, double b) : a_(a), b_(b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ArgumentError("a and b must be positive and finite");
    }
}

double NormParams::eigen_separation() const {
    return std::min({std::fabs(a_ - 1.0), std::fabs(b_ - 1.0), std::fabs(a_ - b_)});
}

Rescaled rescale(const RawParams& raw, const MoleculeState& x_raw, double t_raw) {
    raw.validate();
    const double s1 = raw.d1 / raw.A1;
    const double s2 = s1 * raw.d2 / raw.A2;
    const double s3 = s2 * raw.d3 / raw.A3;
    return {NormParams(raw.d2 / raw.d1, raw.d3 / raw.d1),
            MoleculeState(s1 * x_raw[0], s2 * x_raw[1], s3 * x_raw[2]), raw.d1 * t_raw};
}

MoleculeState raw_rhs(const RawParams& raw, Gene gene, const MoleculeState& x) {
    return {raw.A1 * to_int(gene) - raw.d1 * x[0], raw.A2 * x[0] - raw.d2 * x[1],
            raw.A3 * x[1] - raw.d3 * x[2]};
}

MoleculeState model_rhs(const NormParams& p, Gene gene, const MoleculeState& x) {
    return model_rhs(p, static_cast<double>(to_int(gene)), x);
}

MoleculeState model_rhs(const NormParams& p, double gene_level, const MoleculeState& x) {
    return {gene_level - x[0], p.a() * (x[0] - x[1]), p.b() * (x[1] - x[2])};
}

std::array<double, 3> expected_levels(double q0, double q1, const RawParams& raw) {
    raw.validate();
    if (!(q0 > 0.0) || !(q1 > 0.0)) throw ArgumentError("switching rates must be positive");
    const double active = q0 / (q0 + q1);
    const double e1 = raw.A1 / raw.d1 * active;
    const double e2 = e1 * raw.A2 / raw.d2;
    const double e3 = e2 * raw.A3 / raw.d3;
    return {e1, e2, e3};
}

EigenBasis::EigenBasis(const NormParams& p) {
    if (!p.distinct_eigen()) {
        throw DegenerateParamsError("eigenbasis requires 1, a, b pairwise distinct");
    }
    const double a = p.a(), b = p.b();
    const double v13 = a * b / ((a - 1.0) * (b - 1.0));
    const double v23 = b / ((a - 1.0) * (a - b));
    v_[0] = MoleculeState(1.0, a / (a - 1.0), v13);
    v_[1] = MoleculeState(0.0, -1.0 / (a - 1.0), v23);
    v_[2] = MoleculeState(0.0, 0.0, 1.0 - v13 - v23);
}

EigenCoords EigenBasis::to_eigen(const MoleculeState& x) const {
    // the basis matrix is lower triangular
    const double u1 = x[0];
    const double u2 = (x[1] - u1 * v_[0][1]) / v_[1][1];
    const double u3 = (x[2] - u1 * v_[0][2] - u2 * v_[1][2]) / v_[2][2];
    return {u1, u2, u3};
}

MoleculeState EigenBasis::from_eigen(const EigenCoords& u) const {
    return {u[0] * v_[0][0], u[0] * v_[0][1] + u[1] * v_[1][1],
            u[0] * v_[0][2] + u[1] * v_[1][2] + u[2] * v_[2][2]};
}

EigenCoords to_eigen(const NormParams& p, const MoleculeState& x) { return EigenBasis(p).to_eigen(x); }

MoleculeState from_eigen(const NormParams& p, const EigenCoords& u) {
    return EigenBasis(p).from_eigen(u);
}

EigenCoords flow(Gene gene, double t, const EigenCoords& u, const NormParams& p) {
    require_nonnegative_time(t);
    const EigenCoords decay(std::exp(-t), std::exp(-p.a() * t), std::exp(-p.b() * t));
    if (gene == Gene::Inactive) return {decay[0] * u[0], decay[1] * u[1], decay[2] * u[2]};
    return {1.0 + decay[0] * (u[0] - 1.0), 1.0 + decay[1] * (u[1] - 1.0),
            1.0 + decay[2] * (u[2] - 1.0)};
}

TransitionMatrix transition_matrix(double t, const NormParams& p) {
    require_nonnegative_time(t);
    const double a = p.a(), b = p.b();
    const double s1 = -t, s2 = -a * t, s3 = -b * t;
    TransitionMatrix m{};
    m.e11 = std::exp(s1);
    m.e22 = std::exp(s2);
    m.e33 = std::exp(s3);
    m.e21 = a * t * exp_dd1(s1, s2);
    m.e32 = b * t * exp_dd1(s2, s3);
    m.e31 = a * b * t * t * exp_dd2(s1, s2, s3);
    return m;
}

MoleculeState flow_general(Gene gene, double t, const MoleculeState& x, const NormParams& p) {
    const TransitionMatrix m = transition_matrix(t, p);
    if (gene == Gene::Inactive) return m.apply(x);
    return MoleculeState::ones() + m.apply(x - MoleculeState::ones());
}

MoleculeState solve_generator(const NormParams& p, const MoleculeState& r) {
    const double y1 = -r[0];
    const double y2 = y1 - r[1] / p.a();
    const double y3 = y2 - r[2] / p.b();
    return {y1, y2, y3};
}

EigenCoords compose_active_then_inactive(double alpha, double beta, const EigenCoords& u,
                                         const NormParams& p) {
    const double a = p.a(), b = p.b();
    return {alpha + beta * (u[0] - 1.0), std::pow(alpha, a) + std::pow(beta, a) * (u[1] - 1.0),
            std::pow(alpha, b) + std::pow(beta, b) * (u[2] - 1.0)};
}

EigenCoords compose_inactive_then_active(double alpha, double beta, const EigenCoords& u,
                                         const NormParams& p) {
    const double a = p.a(), b = p.b();
    return {1.0 - alpha + beta * u[0], 1.0 - std::pow(alpha, a) + std::pow(beta, a) * u[1],
            1.0 - std::pow(alpha, b) + std::pow(beta, b) * u[2]};
}

Propagator::Propagator(const NormParams& p) : params_(p) {
    if (p.distinct_eigen() && p.eigen_separation() >= kEigenbasisMinSeparation) basis_.emplace(p);
}

MoleculeState Propagator::advance(Gene gene, double t, const MoleculeState& x) const {
    if (basis_) return basis_->from_eigen(flow(gene, t, basis_->to_eigen(x), params_));
    return flow_general(gene, t, x, params_);
}

MoleculeState Propagator::integral(Gene gene, double t, const MoleculeState& x) const {
    // d/ds (x - i1) = M (x - i1), so the integral of x - i1 is M^{-1}(x(t) - x0)
    const MoleculeState end = advance(gene, t, x);
    const MoleculeState shifted = solve_generator(params_, end - x);
    const double i = static_cast<double>(to_int(gene));
    return shifted + MoleculeState(i * t, i * t, i * t);
}

MoleculeState Propagator::fixed_point(Gene gene) {
    return gene == Gene::Active ? MoleculeState::ones() : MoleculeState::zero();
}

}  // namespace genepdmp
