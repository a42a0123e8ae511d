#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "genepdmp/core.hpp"
#include "genepdmp/rates.hpp"

namespace genepdmp {

enum class Monotonicity { Constant, Increasing, Decreasing, Other };
std::string to_string(Monotonicity m);

/// Gamma(x3) = q0 / (q0 + q1), the mean gene activity for frozen x3.
class GammaSpec {
 public:
    GammaSpec(RateSpec q0, RateSpec q1);

    const RateSpec& q0() const { return q0_; }
    const RateSpec& q1() const { return q1_; }

    double value(double x3) const;
    /// Quotient rule on the analytic rate derivatives.
    double derivative(double x3) const;
    /// Central difference with step h, for cross-checks.
    double derivative_fd(double x3, double h = 1e-6) const;
    /// Sign pattern of the derivative on a uniform grid of [0,1].
    Monotonicity monotonicity(std::size_t grid = 1000) const;

 private:
    double total(double x3) const;

    RateSpec q0_;
    RateSpec q1_;
};

using Complex = std::complex<double>;
using EigenTriple = std::array<Complex, 3>;

/// (1+l)(a+l)(b+l) - g a b
Complex char_poly(Complex lambda, double gamma_prime, const NormParams& p);

/// The three roots of the characteristic polynomial, real roots first, then by imaginary part.
EigenTriple char_poly_roots(double gamma_prime, const NormParams& p);

/// |P(l)| relative to the sum of the magnitudes of its terms.
double char_poly_residual(Complex lambda, double gamma_prime, const NormParams& p);

enum class Stability { Stable, Unstable, Marginal };
std::string to_string(Stability s);

inline constexpr double kStabilityMargin = 1e-8;

struct Equilibrium {
    double c = 0.0;
    double gamma_prime = 0.0;
    EigenTriple eigenvalues{};
    Stability stability = Stability::Marginal;

    double max_real() const;
    bool has_oscillatory_pair() const;  // complex pair with positive real part
};

Equilibrium make_equilibrium(const GammaSpec& g, const NormParams& p, double c);

struct FixedPointOptions {
    std::size_t grid = 10000;
    double tol = 1e-12;
    double dedup = 1e-9;
};

/// All c in [0,1] with Gamma(c) = c, ascending.
std::vector<Equilibrium> find_fixed_points(const GammaSpec& g, const NormParams& p,
                                           const FixedPointOptions& opts = {});

enum class Regime { Monostable, Bistable, OscillatoryCandidate, Other };
std::string to_string(Regime r);

struct RegimeReport {
    Regime regime = Regime::Other;
    std::vector<Equilibrium> equilibria;
    /// Gamma'(c) < -8 at the unique fixed point; only evaluated when a = b = 1.
    std::optional<bool> steep_feedback;
    std::string diagnostics;
};

RegimeReport classify_regime(const GammaSpec& g, const NormParams& p);

/// x' = (Gamma(x3) - x1, a (x1 - x2), b (x2 - x3))
MoleculeState adiabatic_rhs(const GammaSpec& g, const NormParams& p, const MoleculeState& x);

struct IntegrateOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double min_step = 1e-13;
};

/// Accepted steps of the adaptive integrator with cubic Hermite dense output.
class DenseSolution {
 public:
    void push(double t, const MoleculeState& x, const MoleculeState& dx);

    double t_begin() const { return t_.front(); }
    double t_end() const { return t_.back(); }
    std::size_t steps() const { return t_.size(); }
    const std::vector<double>& times() const { return t_; }
    const std::vector<MoleculeState>& states() const { return x_; }
    MoleculeState operator()(double t) const;
    MoleculeState final_state() const { return x_.back(); }

 private:
    std::vector<double> t_;
    std::vector<MoleculeState> x_;
    std::vector<MoleculeState> dx_;
};

/// Step observer: (t0, x0, dx0, t1, x1, dx1); return false to stop early.
using StepObserver = std::function<bool(double, const MoleculeState&, const MoleculeState&, double,
                                        const MoleculeState&, const MoleculeState&)>;

/// Dormand-Prince 5(4) from t0 to t1, calling obs after every accepted step.
/// Returns the time reached.
double integrate_steps(const GammaSpec& g, const NormParams& p, const MoleculeState& init, double t0,
                       double t1, const StepObserver& obs, const IntegrateOptions& opts = {});

DenseSolution integrate(const GammaSpec& g, const NormParams& p, const MoleculeState& init, double t_final,
                        const IntegrateOptions& opts = {});

struct CycleOptions {
    double transient = 200.0;
    double horizon = 2000.0;
    std::size_t returns = 5;
    double period_rtol = 0.01;
    double point_tol = 1e-4;
    std::size_t orbit_samples = 2000;
    IntegrateOptions integrator{};
};

struct OrbitPoint {
    double t;
    MoleculeState x;
};

struct CycleReport {
    bool found = false;
    double section = 0.0;  // x3 level of the Poincare section
    double period = 0.0;
    std::vector<double> crossing_times;
    std::vector<MoleculeState> crossings;
    std::vector<OrbitPoint> orbit;  // one period, t relative to the first point
    std::string diagnostics;
};

/// Poincare section x3 = c crossed upward, c the first fixed point.
CycleReport detect_limit_cycle(const GammaSpec& g, const NormParams& p, const MoleculeState& init,
                               const CycleOptions& opts = {});

/// Winding number of the closed (x2, x3) polygon around (c2, c3).
int winding_number(const std::vector<OrbitPoint>& orbit, double c2, double c3);

/// Euclidean distance from x to the closed polyline through the orbit points.
double distance_to_orbit(const std::vector<OrbitPoint>& orbit, const MoleculeState& x);

void write_orbit_csv(std::ostream& out, const std::vector<OrbitPoint>& orbit);
void write_regime_report(std::ostream& out, const GammaSpec& g, const NormParams& p, const RegimeReport& r,
                         const CycleReport* cycle);

}  // namespace genepdmp
