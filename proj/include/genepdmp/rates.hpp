#pragma once

#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "genepdmp/core.hpp"
#include "genepdmp/random.hpp"

namespace genepdmp {

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

struct ConstantRate {
    double k;
};
/// q(x) = k x3
struct LinearProteinRate {
    double k;
};
/// q(x) = k (eps0 + x3^2)
struct QuadraticProteinRate {
    double k;
    double eps0;
};
/// q(x) = k x3^m
struct PowerProteinRate {
    double k;
    double m;
};
/// q(x) = sum_j c_j x3^j, nonnegative on [0, 1]
struct PolynomialProteinRate {
    std::vector<double> coeffs;
};

/// A switching rate from the closed family used by the model. All members
/// depend on the protein level x3 only.
///
/// Text syntax: `const:k`, `linear:k`, `quad:k,eps0`, `pow:k,m`, `poly:c0,c1,...`.
class RateSpec {
 public:
    using Family = std::variant<ConstantRate, LinearProteinRate, QuadraticProteinRate,
                                PowerProteinRate, PolynomialProteinRate>;

    RateSpec(Family family);  // NOLINT(google-explicit-constructor)

    static RateSpec constant(double k) { return RateSpec(ConstantRate{k}); }
    static RateSpec linear(double k) { return RateSpec(LinearProteinRate{k}); }
    static RateSpec quadratic(double k, double eps0) { return RateSpec(QuadraticProteinRate{k, eps0}); }
    static RateSpec power(double k, double m) { return RateSpec(PowerProteinRate{k, m}); }
    static RateSpec polynomial(std::vector<double> c) { return RateSpec(PolynomialProteinRate{std::move(c)}); }

    /// Throws SpecError on unknown family, malformed numbers, or invalid values.
    static RateSpec parse(std::string_view text);
    std::string to_string() const;

    const Family& family() const { return family_; }
    bool is_constant() const { return std::holds_alternative<ConstantRate>(family_); }

    double value(double x3) const;
    double derivative(double x3) const;
    double operator()(const MoleculeState& x) const { return value(x[2]); }
    /// An upper bound of the rate on [0, 1]; exact except for polynomials,
    /// where the sum of positive coefficients is used.
    double upper_bound() const;

 private:
    Family family_;
};

/// Rate at a state in the unit cube. Throws ArgumentError outside it.
double eval_rate(const RateSpec& spec, const MoleculeState& x);

/// Requires q0(0,0,0) != 0 and q1(1,1,1) != 0. Throws SpecError otherwise.
void validate_rate_pair(const RateSpec& q0, const RateSpec& q1);

using RateFunction = std::function<double(const MoleculeState&)>;

struct QuadratureOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-12;
    int max_intervals = 4000;
};

/// Globally adaptive 15-point Gauss-Kronrod quadrature. Throws NumericalError
/// when the error target is not met within max_intervals subdivisions.
double integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                          const QuadratureOptions& opts = {});

/// Accumulated jump intensity along one deterministic flow segment.
class HazardPath {
 public:
    HazardPath(const RateSpec& spec, Gene gene, const MoleculeState& x0, const NormParams& p,
               QuadratureOptions quad = {});
    HazardPath(RateFunction rate, Gene gene, const MoleculeState& x0, const NormParams& p,
               QuadratureOptions quad = {});

    MoleculeState state_at(double t) const { return prop_.advance(gene_, t, x0_); }
    double rate_at(double t) const;
    double hazard(double t) const { return hazard_between(0.0, t); }
    double hazard_between(double t0, double t1) const;
    /// Rate at the fixed point the flow converges to.
    double limit_rate() const;
    /// After this time the flow equals its fixed point to double precision.
    double settle_time() const { return settle_time_; }

 private:
    enum class Closed { None, Constant, Linear };

    RateFunction rate_;
    Closed closed_ = Closed::None;
    double k_ = 0.0;
    Gene gene_;
    MoleculeState x0_;
    Propagator prop_;
    QuadratureOptions quad_;
    double settle_time_;
};

/// Lambda(t) = int_0^t q(flow(gene, s, x)) ds.
double integrated_hazard(const RateSpec& spec, Gene gene, const MoleculeState& x, double t,
                         const NormParams& p);

/// Smallest T with Lambda(T) = level, or kInfiniteTime when the hazard stays
/// below the level up to the horizon (or forever).
double invert_hazard(const HazardPath& path, double level, double horizon = kInfiniteTime);

/// Jump time by inversion of the integrated hazard at an Exp(1) level.
double sample_jump_time(RngStream& rng, const RateSpec& spec, Gene gene, const MoleculeState& x,
                        const NormParams& p, double horizon = kInfiniteTime);

/// Jump time by thinning against the constant bound upper_bound(). Requires
/// x in the unit cube so the bound holds along the flow.
double sample_jump_time_thinning(RngStream& rng, const RateSpec& spec, Gene gene,
                                 const MoleculeState& x, const NormParams& p,
                                 double horizon = kInfiniteTime);

}  // namespace genepdmp
