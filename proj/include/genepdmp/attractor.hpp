#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "genepdmp/core.hpp"

namespace genepdmp {

/// 1 >= x >= y >= z >= 0
struct ParamTriple {
    double x = 1.0, y = 1.0, z = 1.0;

    bool ordered(double slack = 0.0) const;
    void validate() const;
};

/// f(x,y,z) = (x - y + z, x^a - y^a + z^a, x^b - y^b + z^b), a point of A in eigen coordinates.
EigenCoords f_map(const ParamTriple& p, const NormParams& params);

/// Four-parameter alternating sum with 1 >= x >= y >= z >= w >= 0.
EigenCoords d_map(double x, double y, double z, double w, const NormParams& params);

enum class Surface { S0, S1 };
std::string to_string(Surface s);

/// S0(alpha, beta) = f(alpha, beta, 0), S1(alpha, beta) = f(1, alpha, beta), 1 >= alpha >= beta >= 0.
EigenCoords surface_point(Surface s, double alpha, double beta, const NormParams& params);

struct SurfaceMesh {
    Surface surface = Surface::S0;
    std::size_t resolution = 0;
    std::vector<std::array<double, 2>> params;  // (alpha, beta)
    std::vector<EigenCoords> points;
};

/// Triangular grid alpha = i/n, beta = j/n, 0 <= j <= i <= n.
SurfaceMesh make_surface_mesh(Surface s, const NormParams& params, std::size_t resolution);

/// 1 - p; maps A onto itself in either frame.
EigenCoords symmetry_image(const EigenCoords& p);
MoleculeState symmetry_image(const MoleculeState& p);

/// pi0_{t3} pi1_{t2} pi0_{t1} 1 in eigen coordinates.
EigenCoords alternating_flow_point(double t1, double t2, double t3, const NormParams& params);

enum class Verdict { Member, Exterior, Unknown };
std::string to_string(Verdict v);

struct MembershipResult {
    Verdict verdict = Verdict::Unknown;
    std::optional<ParamTriple> preimage;
    double residual = 0.0;  // max-norm of f(preimage) - point
    std::string diagnostic;

    bool member() const { return verdict == Verdict::Member; }
};

struct AttractorOptions {
    std::size_t lattice = 30;          // scale-free start grid per axis over (s2, s3)
    std::size_t grid = 20;             // plain start grid per axis
    std::size_t starts = 8;            // best starts tried from each grid
    int max_iter = 100;
    double backtrack = 0.5;
    std::size_t scan_resolution = 200;  // finest box side 1/scan_resolution in the exterior proof
    std::size_t max_boxes = 4'000'000;
    std::size_t mesh_resolution = 200;
};

/// The set A for distinct 1, a, b. All coordinates are eigen coordinates.
class Attractor {
 public:
    explicit Attractor(const NormParams& params, AttractorOptions opts = {});

    const NormParams& params() const { return params_; }
    const AttractorOptions& options() const { return opts_; }

    MembershipResult membership(const EigenCoords& p, double tol = 1e-8) const;

    /// Preimage with a target value: solves f(x,y,z) = p from the given seed only.
    std::optional<ParamTriple> solve_from(const EigenCoords& p, const ParamTriple& seed, double tol) const;

    /// 0 for members, otherwise the distance to the boundary surfaces.
    double distance(const EigenCoords& p, double tol = 1e-10) const;

    /// flow(i, t, f(p)) is a member within tol.
    bool invariance_check(const ParamTriple& p, Gene gene, double t, double tol = 1e-8) const;

    const SurfaceMesh& mesh(Surface s) const { return s == Surface::S0 ? s0_ : s1_; }

 private:
    struct Start {
        double s2, s3;
        std::array<double, 3> g;  // image with s1 = 1
    };
    struct SurfaceFoot {
        double distance;
        Surface surface;
        double alpha, beta;
    };

    std::vector<std::array<double, 3>> starts_for(const EigenCoords& p) const;
    std::optional<std::array<double, 3>> newton(const EigenCoords& p, std::array<double, 3> s, double tol) const;
    std::optional<std::array<double, 3>> multistart(const EigenCoords& p, double tol) const;
    std::optional<std::array<double, 3>> fold_solve(const EigenCoords& p, double tol) const;
    Verdict exterior_scan(const EigenCoords& p, double tol, std::vector<std::array<double, 3>>& survivors) const;
    SurfaceFoot surface_foot(const EigenCoords& p) const;

    NormParams params_;
    AttractorOptions opts_;
    std::vector<Start> lattice_;
    std::vector<std::pair<std::array<double, 3>, EigenCoords>> grid_;  // 3-D starts and their images
    SurfaceMesh s0_;
    SurfaceMesh s1_;
};

/// Largest nearest-neighbour distance in either direction.
template <class F>
double hausdorff(const std::vector<Point3<F>>& a, const std::vector<Point3<F>>& b);

enum class DegenerateForm { A1, A2 };

/// A1: pi0_{s1} 1 - pi0_{s2} 1 + pi0_{s3} 1; A2: 1 - (the same sum). Original coordinates,
/// any a, b > 0, 0 <= s1 <= s2 <= s3 (s may be infinite).
MoleculeState degenerate_attractor_sample(const NormParams& params, double s1, double s2, double s3,
                                          DegenerateForm form = DegenerateForm::A1);

/// Samples of the two boundary faces of the form (s1 = 0 and s3 = infinity), on
/// the grid alpha_k = e^{-s_k} with alpha in {0, 1/n, ..., 1}.
std::vector<MoleculeState> degenerate_boundary(const NormParams& params, DegenerateForm form,
                                               std::size_t resolution);

enum class Plane { P12, P13, P23 };
Plane parse_plane(const std::string& text);
std::string to_string(Plane p);

std::vector<std::array<double, 2>> project(const std::vector<MoleculeState>& points, Plane plane);
/// Converts to original coordinates first.
std::vector<std::array<double, 2>> project(const std::vector<EigenCoords>& points, const NormParams& params,
                                           Plane plane);

enum class OutputFrame { Eigen, Original };

void write_mesh_csv(std::ostream& out, const SurfaceMesh& mesh, const NormParams& params, OutputFrame frame);

}  // namespace genepdmp
