#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace genepdmp {

// Frame tags keep molecule levels and eigenbasis coordinates from mixing.
struct OriginalFrame {};
struct EigenFrame {};

template <class Frame>
struct Point3 {
    std::array<double, 3> c{};

    constexpr Point3() = default;
    constexpr Point3(double c1, double c2, double c3) : c{c1, c2, c3} {}

    static constexpr Point3 zero() { return {0.0, 0.0, 0.0}; }
    static constexpr Point3 ones() { return {1.0, 1.0, 1.0}; }

    constexpr double& operator[](std::size_t k) { return c[k]; }
    constexpr double operator[](std::size_t k) const { return c[k]; }

    constexpr Point3& operator+=(const Point3& o) {
        for (std::size_t k = 0; k < 3; ++k) c[k] += o.c[k];
        return *this;
    }
    constexpr Point3& operator-=(const Point3& o) {
        for (std::size_t k = 0; k < 3; ++k) c[k] -= o.c[k];
        return *this;
    }
    friend constexpr Point3 operator+(Point3 a, const Point3& b) { return a += b; }
    friend constexpr Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
    friend constexpr Point3 operator*(double s, Point3 a) {
        for (auto& v : a.c) v *= s;
        return a;
    }
    friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

template <class Frame>
double norm(const Point3<Frame>& p) {
    return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

template <class Frame>
double distance(const Point3<Frame>& a, const Point3<Frame>& b) {
    return norm(a - b);
}

template <class Frame>
double max_abs_diff(const Point3<Frame>& a, const Point3<Frame>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < 3; ++k) m = std::fmax(m, std::fabs(a[k] - b[k]));
    return m;
}

/// Normalized pre-mRNA, mRNA and protein levels (x1, x2, x3).
using MoleculeState = Point3<OriginalFrame>;
/// Coordinates (u1, u2, u3) in the eigenbasis of the linear part.
using EigenCoords = Point3<EigenFrame>;

bool in_unit_cube(const MoleculeState& x, double slack = 0.0);

enum class Gene : std::uint8_t { Inactive = 0, Active = 1 };

constexpr int to_int(Gene g) { return static_cast<int>(g); }
constexpr Gene flipped(Gene g) { return g == Gene::Active ? Gene::Inactive : Gene::Active; }
Gene gene_from_int(int i);

struct HybridState {
    MoleculeState x;
    Gene gene = Gene::Inactive;
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Production (A) and degradation (d) constants of the unscaled model.
/// d1 is the total pre-mRNA loss rate, splicing included.
struct RawParams {
    double A1 = 1.0, A2 = 1.0, A3 = 1.0;
    double d1 = 1.0, d2 = 1.0, d3 = 1.0;

    void validate() const;
};

/// Dimensionless rate ratios a = d2/d1 and b = d3/d1.
class NormParams {
 public:
    NormParams(double a, double b);

    double a() const { return a_; }
    double b() const { return b_; }
    /// True iff 1, a and b are pairwise distinct, so the eigenbasis exists.
    bool distinct_eigen() const { return a_ != b_ && a_ != 1.0 && b_ != 1.0; }
    /// Smallest pairwise gap among {1, a, b}.
    double eigen_separation() const;

    friend bool operator==(const NormParams&, const NormParams&) = default;

 private:
    double a_;
    double b_;
};

struct Rescaled {
    NormParams params;
    MoleculeState state;
    double time;
};

/// u_k = (d1..dk / A1..Ak) x_k, tau = d1 t.
Rescaled rescale(const RawParams& raw, const MoleculeState& x_raw, double t_raw);

/// Right-hand side of the unscaled system for a fixed gene value.
MoleculeState raw_rhs(const RawParams& raw, Gene gene, const MoleculeState& x);
/// Right-hand side of the rescaled system: (i - x1, a(x1 - x2), b(x2 - x3)).
MoleculeState model_rhs(const NormParams& p, Gene gene, const MoleculeState& x);
/// Same with a fractional gene input, used by the adiabatic limit.
MoleculeState model_rhs(const NormParams& p, double gene_level, const MoleculeState& x);

/// Mean levels under constant switching rates, unscaled units.
std::array<double, 3> expected_levels(double q0, double q1, const RawParams& raw);

// ---------------------------------------------------------------------------
// Eigenbasis and flows
// ---------------------------------------------------------------------------

/// Eigenvectors v1, v2, v3 of M scaled so that (1,1,1) has coordinates (1,1,1).
/// Requires distinct_eigen().
class EigenBasis {
 public:
    explicit EigenBasis(const NormParams& p);

    EigenCoords to_eigen(const MoleculeState& x) const;
    MoleculeState from_eigen(const EigenCoords& u) const;
    /// Column k is the k-th eigenvector in original coordinates.
    const std::array<MoleculeState, 3>& vectors() const { return v_; }

 private:
    std::array<MoleculeState, 3> v_;
};

EigenCoords to_eigen(const NormParams& p, const MoleculeState& x);
MoleculeState from_eigen(const NormParams& p, const EigenCoords& u);

/// Closed-form flow in eigen coordinates. Throws ArgumentError for t < 0.
EigenCoords flow(Gene gene, double t, const EigenCoords& u, const NormParams& p);

/// Flow in original coordinates through exp(Mt), valid for all a, b > 0
/// including coincident eigenvalues. Throws ArgumentError for t < 0.
MoleculeState flow_general(Gene gene, double t, const MoleculeState& x, const NormParams& p);

/// Lower-triangular entries of exp(Mt).
struct TransitionMatrix {
    double e11, e21, e22, e31, e32, e33;

    MoleculeState apply(const MoleculeState& v) const {
        return {e11 * v[0], e21 * v[0] + e22 * v[1], e31 * v[0] + e32 * v[1] + e33 * v[2]};
    }
};
TransitionMatrix transition_matrix(double t, const NormParams& p);

/// Solves M y = r (M is invertible for a, b > 0).
MoleculeState solve_generator(const NormParams& p, const MoleculeState& r);

/// pi^0_{t2} pi^1_{t1}(u) written with alpha = e^{-t2}, beta = e^{-(t1+t2)}.
EigenCoords compose_active_then_inactive(double alpha, double beta, const EigenCoords& u,
                                         const NormParams& p);
/// pi^1_{t2} pi^0_{t1}(u) written with alpha = e^{-t2}, beta = e^{-(t1+t2)}.
EigenCoords compose_inactive_then_active(double alpha, double beta, const EigenCoords& u,
                                         const NormParams& p);

/// Flow evaluator bound to one parameter set. Uses the eigenbasis when the
/// eigenvalues are well separated and exp(Mt) otherwise.
class Propagator {
 public:
    explicit Propagator(const NormParams& p);

    const NormParams& params() const { return params_; }
    bool uses_eigenbasis() const { return basis_.has_value(); }

    MoleculeState advance(Gene gene, double t, const MoleculeState& x) const;
    /// Integral of the state along the flow over [0, t].
    MoleculeState integral(Gene gene, double t, const MoleculeState& x) const;
    /// Fixed point of the flow for the given gene state.
    static MoleculeState fixed_point(Gene gene);

 private:
    NormParams params_;
    std::optional<EigenBasis> basis_;
};

/// Eigenvalue gap below which Propagator falls back to exp(Mt).
inline constexpr double kEigenbasisMinSeparation = 1e-2;

}  // namespace genepdmp
