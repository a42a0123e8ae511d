#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "genepdmp/attractor.hpp"
#include "genepdmp/core.hpp"

namespace genepdmp {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

/// v(x) = m x + c.
struct AffineField {
    Mat3 m{};
    Vec3 c{};

    Vec3 operator()(const Vec3& x) const;
    const Mat3& jacobian() const { return m; }
};

/// a_i(x) = (i - x1, a(x1 - x2), b(x2 - x3)). No positivity check, so synthetic
/// fields (a = 0 and the like) can be built.
AffineField model_field(double a, double b, Gene gene);
AffineField model_field(const NormParams& p, Gene gene);

/// [f, g] = Dg f - Df g, again affine.
AffineField lie_bracket(const AffineField& f, const AffineField& g);
Vec3 lie_bracket(const AffineField& f, const AffineField& g, const Vec3& x);

/// Rank of the given columns by elimination with pivots below threshold treated as zero.
int column_rank(std::vector<Vec3> cols, double threshold = 1e-12);

/// a1 - a0, [a0, a1], [a0, [a0, a1]] at x.
std::array<Vec3, 3> hormander_vectors(const AffineField& a0, const AffineField& a1, const Vec3& x);
int hormander_rank(const AffineField& a0, const AffineField& a1, const Vec3& x, double threshold = 1e-12);
int hormander_rank(const NormParams& p, const Vec3& x, double threshold = 1e-12);

struct ReachSegment {
    Gene gene;
    double duration;
};

struct ReachSchedule {
    std::vector<ReachSegment> segments;  // pi0 t1, pi1 t2, pi0 t3, pi1 t4
    double total_time = 0.0;
    double epsilon = 0.0;
    ParamTriple xyz;  // x = e^{-t4}, y = e^{-t3-t4}, z = e^{-t2-t3-t4}
    EigenCoords endpoint;
    double residual = 0.0;
    bool perturbed = false;  // some duration was bumped away from 0
};

struct ReachOptions {
    double tol = 1e-6;
    double margin = 1e-3;  // interior margin of the target preimage
    int eps_levels = 40;   // epsilon = 2^-k z0, k = 1..levels
    double min_duration = 1e-12;
};

struct ReachOutcome {
    std::optional<ReachSchedule> schedule;
    std::string diagnostic;

    bool ok() const { return schedule.has_value(); }
};

/// Smallest of 1 - x, x - y, y - z, z.
double interior_margin(const ParamTriple& t);

/// Four alternating exact flows from start to target, eigen coordinates.
/// Throws ArgumentError when start is not in A or the target preimage is closer
/// than the margin to the boundary of the parameter domain.
ReachOutcome reach(const Attractor& att, const EigenCoords& start, const EigenCoords& target,
                   const ReachOptions& opts = {});

/// Composes the schedule's flows from start.
EigenCoords replay(const ReachSchedule& s, const EigenCoords& start, const NormParams& p);

void write_reach_schedule(std::ostream& out, const ReachSchedule& s);

}  // namespace genepdmp
