#include "genepdmp/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <utility>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "genepdmp/error.hpp"
#include "genepdmp/format.hpp"

namespace genepdmp {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Indexed = std::pair<BPoint, std::size_t>;
using Tree = bgi::rtree<Indexed, bgi::quadratic<16>>;

template <class F>
BPoint to_bpoint(const Point3<F>& p) {
    return BPoint(p[0], p[1], p[2]);
}

template <class F>
Tree build_tree(const std::vector<Point3<F>>& pts) {
    std::vector<Indexed> values;
    values.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) values.emplace_back(to_bpoint(pts[i]), i);
    return Tree(values.begin(), values.end());
}

double pw(double s, double e) {
    if (e == 1.0) return s;
    return std::pow(s, e);
}

// e >= 1 here, so the derivative is finite at 0
double dpw(double s, double e) {
    if (e == 1.0) return 1.0;
    return e * std::pow(s, e - 1.0);
}

std::array<double, 3> exponents(const NormParams& p) { return {1.0, p.a(), p.b()}; }

double min_exponent(const NormParams& p) { return std::min({1.0, p.a(), p.b()}); }

// Exponents after the substitution s = sigma^(1/m), m the smallest exponent.
std::array<double, 3> scaled_exponents(const NormParams& p) {
    const double m = min_exponent(p);
    return {1.0 / m, p.a() / m, p.b() / m};
}

void require_finite(const EigenCoords& p) {
    for (std::size_t k = 0; k < 3; ++k) {
        if (!std::isfinite(p[k])) throw ArgumentError("point has a non-finite coordinate");
    }
}

// f in the variables x = s1^(1/m), y = x s2^(1/m), z = y s3^(1/m) over the unit box.
struct BoxMap {
    std::array<double, 3> e;
    double m;

    explicit BoxMap(const NormParams& p) : e(scaled_exponents(p)), m(min_exponent(p)) {}

    double component(std::size_t k, double s1, double s2, double s3) const {
        return pw(s1, e[k]) * (1.0 - pw(s2, e[k]) * (1.0 - pw(s3, e[k])));
    }

    EigenCoords value(const std::array<double, 3>& s) const {
        return {component(0, s[0], s[1], s[2]), component(1, s[0], s[1], s[2]),
                component(2, s[0], s[1], s[2])};
    }

    void jacobian(const std::array<double, 3>& s, double j[3][3]) const {
        for (std::size_t k = 0; k < 3; ++k) {
            const double p1 = pw(s[0], e[k]), p2 = pw(s[1], e[k]), p3 = pw(s[2], e[k]);
            j[k][0] = dpw(s[0], e[k]) * (1.0 - p2 * (1.0 - p3));
            j[k][1] = -p1 * dpw(s[1], e[k]) * (1.0 - p3);
            j[k][2] = p1 * p2 * dpw(s[2], e[k]);
        }
    }
};

ParamTriple triple_from_box(const std::array<double, 3>& s, double m) {
    ParamTriple t;
    t.x = pw(s[0], 1.0 / m);
    t.y = t.x * pw(s[1], 1.0 / m);
    t.z = t.y * pw(s[2], 1.0 / m);
    return t;
}

std::array<double, 3> box_from_triple(const ParamTriple& t, double m) {
    const double s1 = t.x;
    const double s2 = t.x > 0.0 ? t.y / t.x : 1.0;
    const double s3 = t.y > 0.0 ? t.z / t.y : 1.0;
    return {pw(std::clamp(s1, 0.0, 1.0), m), pw(std::clamp(s2, 0.0, 1.0), m), pw(std::clamp(s3, 0.0, 1.0), m)};
}

double inf_norm(const EigenCoords& r) { return std::max({std::fabs(r[0]), std::fabs(r[1]), std::fabs(r[2])}); }
double sq_norm(const EigenCoords& r) { return r[0] * r[0] + r[1] * r[1] + r[2] * r[2]; }

// Gaussian elimination with partial pivoting on n <= 3 unknowns; false if singular.
template <std::size_t N>
bool solve_small(std::array<std::array<double, N>, N> m, std::array<double, N> rhs, std::size_t n,
                 std::array<double, N>& out) {
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(m[i][j]));
    if (!(scale > 0.0)) return false;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(m[r][c]) > std::fabs(m[piv][c])) piv = r;
        if (std::fabs(m[piv][c]) <= 1e-30 * scale) return false;
        std::swap(m[piv], m[c]);
        std::swap(rhs[piv], rhs[c]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = m[r][c] / m[c][c];
            for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    for (std::size_t c = n; c-- > 0;) {
        double v = rhs[c];
        for (std::size_t k = c + 1; k < n; ++k) v -= m[c][k] * out[k];
        out[c] = v / m[c][c];
    }
    return true;
}

// Least-squares step J d = -r restricted to the free variables.
template <std::size_t N>
std::array<double, N> gauss_newton_step(const double (*j)[N], std::size_t rows, const double* r,
                                        const std::array<bool, N>& free) {
    std::array<std::size_t, N> idx{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < N; ++i)
        if (free[i]) idx[n++] = i;
    std::array<double, N> step{};
    if (n == 0) return step;

    std::array<double, N> sol{};
    if (n == rows) {
        std::array<std::array<double, N>, N> m{};
        std::array<double, N> rhs{};
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) m[a][b] = j[a][idx[b]];
            rhs[a] = -r[a];
        }
        if (solve_small<N>(m, rhs, n, sol)) {
            for (std::size_t a = 0; a < n; ++a) step[idx[a]] = sol[a];
            return step;
        }
    }
    std::array<std::array<double, N>, N> m{};
    std::array<double, N> rhs{};
    double trace = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            double v = 0.0;
            for (std::size_t k = 0; k < rows; ++k) v += j[k][idx[a]] * j[k][idx[b]];
            m[a][b] = v;
        }
        double g = 0.0;
        for (std::size_t k = 0; k < rows; ++k) g += j[k][idx[a]] * r[k];
        rhs[a] = -g;
        trace += m[a][a];
    }
    const double mu = 1e-13 * std::max(trace, 1e-300);
    for (std::size_t a = 0; a < n; ++a) m[a][a] += mu;
    if (solve_small<N>(m, rhs, n, sol)) {
        for (std::size_t a = 0; a < n; ++a) step[idx[a]] = sol[a];
    }
    return step;
}

// Projected Levenberg-Marquardt over all three variables. Leaves faces of the
// box where the reduced Gauss-Newton system is rank deficient.
bool marquardt_step(const BoxMap& map, const EigenCoords& p, const double j[3][3], std::array<double, 3>& s,
                    EigenCoords& r, double& err) {
    std::array<std::array<double, 3>, 3> h{};
    std::array<double, 3> g{};
    double trace = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t k = 0; k < 3; ++k) h[a][b] += j[k][a] * j[k][b];
        for (std::size_t k = 0; k < 3; ++k) g[a] -= j[k][a] * r[k];
        trace += h[a][a];
    }
    if (!(trace > 0.0)) return false;
    for (double mu = 1e-10 * trace; mu < 1e10 * trace; mu *= 10.0) {
        auto m = h;
        for (std::size_t a = 0; a < 3; ++a) m[a][a] += mu;
        std::array<double, 3> d{};
        if (!solve_small<3>(m, g, 3, d)) continue;
        std::array<double, 3> trial{};
        for (std::size_t i = 0; i < 3; ++i) trial[i] = std::clamp(s[i] + d[i], 0.0, 1.0);
        const EigenCoords rt = map.value(trial) - p;
        const double et = sq_norm(rt);
        if (et < err) {
            s = trial;
            r = rt;
            err = et;
            return true;
        }
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------

bool ParamTriple::ordered(double slack) const {
    return x <= 1.0 + slack && x >= y - slack && y >= z - slack && z >= -slack;
}

void ParamTriple::validate() const {
    if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(z)) || !ordered()) {
        throw ArgumentError("parameters must satisfy 1 >= x >= y >= z >= 0, got (" + format_double(x) + ", " +
                            format_double(y) + ", " + format_double(z) + ")");
    }
}

EigenCoords f_map(const ParamTriple& t, const NormParams& params) {
    t.validate();
    const auto e = exponents(params);
    EigenCoords out;
    for (std::size_t k = 0; k < 3; ++k) out[k] = pw(t.x, e[k]) - pw(t.y, e[k]) + pw(t.z, e[k]);
    return out;
}

EigenCoords d_map(double x, double y, double z, double w, const NormParams& params) {
    if (!(x <= 1.0 && x >= y && y >= z && z >= w && w >= 0.0)) {
        throw ArgumentError("parameters must satisfy 1 >= x >= y >= z >= w >= 0");
    }
    const auto e = exponents(params);
    EigenCoords out;
    for (std::size_t k = 0; k < 3; ++k) out[k] = pw(x, e[k]) - pw(y, e[k]) + pw(z, e[k]) - pw(w, e[k]);
    return out;
}

std::string to_string(Surface s) { return s == Surface::S0 ? "S0" : "S1"; }

EigenCoords surface_point(Surface s, double alpha, double beta, const NormParams& params) {
    if (!(alpha <= 1.0 && alpha >= beta && beta >= 0.0)) {
        throw ArgumentError("surface parameters must satisfy 1 >= alpha >= beta >= 0");
    }
    if (s == Surface::S0) return f_map({alpha, beta, 0.0}, params);
    return f_map({1.0, alpha, beta}, params);
}

SurfaceMesh make_surface_mesh(Surface s, const NormParams& params, std::size_t resolution) {
    if (resolution == 0) throw ArgumentError("mesh resolution must be positive");
    SurfaceMesh mesh;
    mesh.surface = s;
    mesh.resolution = resolution;
    const std::size_t count = (resolution + 1) * (resolution + 2) / 2;
    mesh.params.reserve(count);
    mesh.points.reserve(count);
    const double n = static_cast<double>(resolution);
    for (std::size_t i = 0; i <= resolution; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double alpha = static_cast<double>(i) / n, beta = static_cast<double>(j) / n;
            mesh.params.push_back({alpha, beta});
            mesh.points.push_back(surface_point(s, alpha, beta, params));
        }
    }
    return mesh;
}

EigenCoords symmetry_image(const EigenCoords& p) { return EigenCoords::ones() - p; }
MoleculeState symmetry_image(const MoleculeState& p) { return MoleculeState::ones() - p; }

EigenCoords alternating_flow_point(double t1, double t2, double t3, const NormParams& params) {
    const EigenCoords u = flow(Gene::Inactive, t1, EigenCoords::ones(), params);
    return flow(Gene::Inactive, t3, flow(Gene::Active, t2, u, params), params);
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Member: return "member";
        case Verdict::Exterior: return "exterior";
        case Verdict::Unknown: return "unknown";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Attractor

Attractor::Attractor(const NormParams& params, AttractorOptions opts) : params_(params), opts_(opts) {
    if (!params.distinct_eigen()) {
        throw DegenerateParamsError("the attractor in eigen coordinates needs distinct 1, a, b");
    }
    if (opts_.lattice == 0 || opts_.grid == 0 || opts_.starts == 0 || opts_.max_iter <= 0 || opts_.scan_resolution == 0 ||
        !(opts_.backtrack > 0.0 && opts_.backtrack < 1.0)) {
        throw ArgumentError("invalid attractor options");
    }
    const BoxMap map(params_);
    // uniform values plus clusters at both ends, where f folds the edges x = y and y = z
    std::vector<double> axis;
    const double n = static_cast<double>(opts_.lattice);
    for (std::size_t i = 0; i < opts_.lattice; ++i) axis.push_back((i + 0.5) / n);
    for (int k = 2; k <= 9; ++k) {
        axis.push_back(std::pow(10.0, -k));
        axis.push_back(1.0 - std::pow(10.0, -k));
    }
    lattice_.reserve(axis.size() * axis.size());
    for (double s2 : axis)
        for (double s3 : axis) {
            lattice_.push_back({s2, s3, {map.component(0, 1.0, s2, s3), map.component(1, 1.0, s2, s3),
                                         map.component(2, 1.0, s2, s3)}});
        }
    const double g = static_cast<double>(opts_.grid);
    grid_.reserve(opts_.grid * opts_.grid * opts_.grid);
    for (std::size_t i = 0; i < opts_.grid; ++i)
        for (std::size_t j = 0; j < opts_.grid; ++j)
            for (std::size_t k = 0; k < opts_.grid; ++k) {
                const std::array<double, 3> s{(i + 0.5) / g, (j + 0.5) / g, (k + 0.5) / g};
                grid_.emplace_back(s, map.value(s));
            }
    s0_ = make_surface_mesh(Surface::S0, params_, opts_.mesh_resolution);
    s1_ = make_surface_mesh(Surface::S1, params_, opts_.mesh_resolution);
}

std::vector<std::array<double, 3>> Attractor::starts_for(const EigenCoords& p) const {
    // s1 is fitted to the first coordinate, which makes the ranking scale free
    const BoxMap map(params_);
    std::vector<std::pair<double, std::size_t>> order(lattice_.size());
    std::vector<double> s1(lattice_.size());
    for (std::size_t i = 0; i < lattice_.size(); ++i) {
        const Start& st = lattice_[i];
        double v = st.g[0] > 0.0 ? pw(std::max(p[0], 0.0) / st.g[0], 1.0 / map.e[0]) : 1.0;
        v = std::min(v, 1.0);
        s1[i] = v;
        double err = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const double d = pw(v, map.e[k]) * st.g[k] - p[k];
            err += d * d;
        }
        order[i] = {err, i};
    }
    const std::size_t count = std::min(opts_.starts, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
    std::vector<std::array<double, 3>> out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t k = order[i].second;
        out.push_back({s1[k], lattice_[k].s2, lattice_[k].s3});
    }
    std::vector<std::pair<double, std::size_t>> near(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) near[i] = {sq_norm(grid_[i].second - p), i};
    const std::size_t gcount = std::min(opts_.starts, near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(gcount), near.end());
    for (std::size_t i = 0; i < gcount; ++i) out.push_back(grid_[near[i].second].first);
    return out;
}

std::optional<std::array<double, 3>> Attractor::multistart(const EigenCoords& p, double tol) const {
    for (const auto& s : starts_for(p)) {
        if (auto r = newton(p, s, tol)) return r;
    }
    return std::nullopt;
}

std::optional<std::array<double, 3>> Attractor::fold_solve(const EigenCoords& p, double tol) const {
    // y = x - p1 + z from the first coordinate. Fixing x (or z), the second
    // coordinate is monotone in the other variable, leaving one scalar equation.
    // Scanning in x resolves the fold x = y, scanning in z the fold y = z.
    const double a = params_.a(), b = params_.b();
    const BoxMap map(params_);
    const double p0 = p[0];
    if (!(p0 >= 0.0 && p0 <= 1.0)) return std::nullopt;
    auto g = [&](double x, double z, double e) { return pw(x, e) - pw(x - p0 + z, e) + pw(z, e); };

    // solves g(x, z, a) = p2 for the free variable on [lo, hi]
    auto bisect = [&](double lo, double hi, auto&& eval, double& out) {
        double flo = eval(lo) - p[1], fhi = eval(hi) - p[1];
        if (flo == 0.0) return out = lo, true;
        if (fhi == 0.0) return out = hi, true;
        if ((flo > 0.0) == (fhi > 0.0)) return false;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double fm = eval(mid) - p[1];
            if ((fm > 0.0) == (flo > 0.0)) lo = mid, flo = fm;
            else hi = mid;
        }
        out = 0.5 * (lo + hi);
        return true;
    };
    // (x, z) on the curve through v, scanning x when by_x
    auto point = [&](bool by_x, double v, double& x, double& z) {
        if (by_x) {
            x = v;
            return bisect(0.0, p0, [&](double zz) { return g(x, zz, a); }, z);
        }
        z = v;
        return bisect(p0, 1.0, [&](double xx) { return g(xx, z, a); }, x);
    };
    auto residual = [&](bool by_x, double v, double& x, double& z, double& r) {
        if (!point(by_x, v, x, z)) return false;
        r = g(x, z, b) - p[2];
        return true;
    };
    auto polish = [&](double x, double z) -> std::optional<std::array<double, 3>> {
        const double y = std::clamp(x - p0 + z, z, x);
        if (!(x <= 1.0 && z >= 0.0 && z <= x)) return std::nullopt;
        return newton(p, box_from_triple({x, y, z}, map.m), tol);
    };

    for (bool by_x : {true, false}) {
        const double lo = by_x ? p0 : 0.0, hi = by_x ? 1.0 : p0;
        if (!(hi > lo)) continue;
        std::vector<double> vs;
        const int n = 256;
        for (int i = 0; i <= n; ++i) vs.push_back(lo + (hi - lo) * i / n);
        for (int k = 0; k <= 13 * 8; ++k) {
            const double d = (hi - lo) * std::pow(10.0, -1.0 - k / 8.0);
            vs.push_back(lo + d);
            vs.push_back(hi - d);
        }
        std::sort(vs.begin(), vs.end());

        bool have_prev = false;
        double vp = 0.0, rp = 0.0;
        for (double v : vs) {
            double x = 0.0, z = 0.0, r = 0.0;
            if (!residual(by_x, v, x, z, r)) {
                have_prev = false;
                continue;
            }
            if (r == 0.0) {
                if (auto s = polish(x, z)) return s;
            }
            if (have_prev && (r > 0.0) != (rp > 0.0)) {
                double l = vp, h = v, rl = rp;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (l + h);
                    if (mid <= l || mid >= h) break;
                    double xm = 0.0, zm = 0.0, rm = 0.0;
                    if (!residual(by_x, mid, xm, zm, rm)) break;
                    if ((rm > 0.0) == (rl > 0.0)) l = mid, rl = rm;
                    else h = mid;
                }
                double xf = 0.0, zf = 0.0, rf = 0.0;
                if (residual(by_x, 0.5 * (l + h), xf, zf, rf)) {
                    if (auto s = polish(xf, zf)) return s;
                }
            }
            have_prev = true;
            vp = v;
            rp = r;
        }
    }
    return std::nullopt;
}

std::optional<std::array<double, 3>> Attractor::newton(const EigenCoords& p, std::array<double, 3> s,
                                                       double tol) const {
    const BoxMap map(params_);
    EigenCoords r = map.value(s) - p;
    double err = sq_norm(r);
    for (int it = 0; it < opts_.max_iter; ++it) {
        if (inf_norm(r) <= 1e-16) break;
        double j[3][3];
        map.jacobian(s, j);
        std::array<bool, 3> free{true, true, true};
        std::array<double, 3> step{};
        for (int pass = 0; pass < 3; ++pass) {
            step = gauss_newton_step<3>(j, 3, r.c.data(), free);
            bool changed = false;
            for (std::size_t i = 0; i < 3; ++i) {
                if (!free[i]) continue;
                if ((s[i] <= 0.0 && step[i] < 0.0) || (s[i] >= 1.0 && step[i] > 0.0)) {
                    free[i] = false;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, lambda *= opts_.backtrack) {
            std::array<double, 3> trial{};
            for (std::size_t i = 0; i < 3; ++i) trial[i] = std::clamp(s[i] + lambda * step[i], 0.0, 1.0);
            const EigenCoords rt = map.value(trial) - p;
            const double et = sq_norm(rt);
            if (et < err) {
                s = trial;
                r = rt;
                err = et;
                accepted = true;
                break;
            }
        }
        if (!accepted) accepted = marquardt_step(map, p, j, s, r, err);
        if (!accepted) break;
    }
    if (inf_norm(r) <= tol) return s;
    return std::nullopt;
}

Verdict Attractor::exterior_scan(const EigenCoords& p, double tol,
                                 std::vector<std::array<double, 3>>& survivors) const {
    const BoxMap map(params_);
    const double min_side = 1.0 / static_cast<double>(opts_.scan_resolution);
    struct Box {
        std::array<double, 3> lo, hi;
    };
    std::vector<Box> stack{{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}};
    std::size_t processed = 0;
    while (!stack.empty()) {
        if (++processed > opts_.max_boxes) return Verdict::Unknown;
        const Box b = stack.back();
        stack.pop_back();
        // each component is increasing in s1 and s3 and decreasing in s2
        bool excluded = false;
        for (std::size_t k = 0; k < 3 && !excluded; ++k) {
            const double lo = map.component(k, b.lo[0], b.hi[1], b.lo[2]);
            const double hi = map.component(k, b.hi[0], b.lo[1], b.hi[2]);
            if (p[k] < lo - tol || p[k] > hi + tol) excluded = true;
        }
        if (excluded) continue;
        std::size_t axis = 0;
        for (std::size_t i = 1; i < 3; ++i)
            if (b.hi[i] - b.lo[i] > b.hi[axis] - b.lo[axis]) axis = i;
        if (b.hi[axis] - b.lo[axis] <= min_side) {
            survivors.push_back({0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1]), 0.5 * (b.lo[2] + b.hi[2])});
            continue;
        }
        const double mid = 0.5 * (b.lo[axis] + b.hi[axis]);
        Box left = b, right = b;
        left.hi[axis] = mid;
        right.lo[axis] = mid;
        stack.push_back(left);
        stack.push_back(right);
    }
    return survivors.empty() ? Verdict::Exterior : Verdict::Unknown;
}

MembershipResult Attractor::membership(const EigenCoords& p, double tol) const {
    require_finite(p);
    if (!(tol > 0.0)) throw ArgumentError("membership tolerance must be positive");
    MembershipResult res;
    const BoxMap map(params_);
    auto accept = [&](std::array<double, 3> s, const char* how) {
        // slow starts can cross tol well before the preimage settles
        for (int pass = 0; pass < 3 && inf_norm(map.value(s) - p) > 1e-14; ++pass) {
            const auto better = newton(p, s, tol);
            if (!better || inf_norm(map.value(*better) - p) >= inf_norm(map.value(s) - p)) break;
            s = *better;
        }
        res.verdict = Verdict::Member;
        res.preimage = triple_from_box(s, map.m);
        res.residual = inf_norm(map.value(s) - p);
        res.diagnostic = how;
        return res;
    };

    for (std::size_t k = 0; k < 3; ++k) {
        if (p[k] < -tol || p[k] > 1.0 + tol) {
            res.verdict = Verdict::Exterior;
            res.diagnostic = "outside the unit cube";
            return res;
        }
    }

    if (auto s = multistart(p, tol)) return accept(*s, "newton");
    if (auto s = fold_solve(p, tol)) return accept(*s, "scalar reduction");

    // the boundary surfaces belong to the set
    const SurfaceFoot foot = surface_foot(p);
    if (foot.distance <= tol) {
        res.verdict = Verdict::Member;
        res.preimage = foot.surface == Surface::S0 ? ParamTriple{foot.alpha, foot.beta, 0.0}
                                                   : ParamTriple{1.0, foot.alpha, foot.beta};
        res.residual = inf_norm(f_map(*res.preimage, params_) - p);
        res.diagnostic = "boundary surface";
        return res;
    }

    // the set is symmetric under p -> 1 - p
    const EigenCoords q = symmetry_image(p);
    if (auto s = multistart(q, tol)) {
        res.verdict = Verdict::Member;
        res.residual = inf_norm(map.value(*s) - q);
        res.diagnostic = "newton on the mirror image";
        return res;
    }

    std::vector<std::array<double, 3>> survivors;
    const Verdict scan = exterior_scan(p, tol, survivors);
    if (scan == Verdict::Exterior) {
        res.verdict = Verdict::Exterior;
        res.diagnostic = "excluded by interval bounds at resolution " + std::to_string(opts_.scan_resolution);
        return res;
    }
    std::vector<std::pair<double, std::size_t>> ranked(survivors.size());
    for (std::size_t i = 0; i < survivors.size(); ++i) ranked[i] = {sq_norm(map.value(survivors[i]) - p), i};
    const std::size_t tries = std::min<std::size_t>(64, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(tries), ranked.end());
    for (std::size_t i = 0; i < tries; ++i) {
        if (auto s = newton(p, survivors[ranked[i].second], tol)) return accept(*s, "newton from scan");
    }
    res.verdict = Verdict::Unknown;
    res.diagnostic = survivors.empty() ? "box budget exhausted"
                                       : std::to_string(survivors.size()) + " unresolved boxes";
    return res;
}

std::optional<ParamTriple> Attractor::solve_from(const EigenCoords& p, const ParamTriple& seed, double tol) const {
    require_finite(p);
    const double m = min_exponent(params_);
    if (auto s = newton(p, box_from_triple(seed, m), tol)) return triple_from_box(*s, m);
    return std::nullopt;
}

Attractor::SurfaceFoot Attractor::surface_foot(const EigenCoords& p) const {
    // nearest mesh samples seed a projected Gauss-Newton over (sigma, tau) with
    // alpha = sigma^(1/m), beta = alpha tau^(1/m)
    const auto e = scaled_exponents(params_);
    const double m_exp = min_exponent(params_);
    auto eval = [&](Surface surf, double sigma, double tau, double jac[3][2]) {
        EigenCoords v;
        for (std::size_t k = 0; k < 3; ++k) {
            const double ps = pw(sigma, e[k]), pt = pw(tau, e[k]);
            v[k] = ps * (1.0 - pt);
            jac[k][0] = dpw(sigma, e[k]) * (1.0 - pt);
            jac[k][1] = -ps * dpw(tau, e[k]);
            if (surf == Surface::S1) {
                v[k] = 1.0 - v[k];
                jac[k][0] = -jac[k][0];
                jac[k][1] = -jac[k][1];
            }
        }
        return v;
    };

    SurfaceFoot best{std::numeric_limits<double>::infinity(), Surface::S0, 0.0, 0.0};
    for (Surface surf : {Surface::S0, Surface::S1}) {
        const SurfaceMesh& m = mesh(surf);
        std::vector<std::pair<double, std::size_t>> order(m.points.size());
        for (std::size_t i = 0; i < m.points.size(); ++i) order[i] = {sq_norm(m.points[i] - p), i};
        const std::size_t count = std::min<std::size_t>(4, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
        for (std::size_t c = 0; c < count; ++c) {
            const auto [alpha0, beta0] = m.params[order[c].second];
            double alpha = pw(alpha0, m_exp), t = alpha0 > 0.0 ? pw(beta0 / alpha0, m_exp) : 0.0;
            double jac[3][2];
            EigenCoords r = eval(surf, alpha, t, jac) - p;
            double err = sq_norm(r);
            for (int it = 0; it < 60; ++it) {
                std::array<bool, 2> free{true, true};
                std::array<double, 2> step{};
                const double x[2] = {alpha, t};
                for (int pass = 0; pass < 2; ++pass) {
                    step = gauss_newton_step<2>(jac, 3, r.c.data(), free);
                    bool changed = false;
                    for (std::size_t i = 0; i < 2; ++i) {
                        if (!free[i]) continue;
                        if ((x[i] <= 0.0 && step[i] < 0.0) || (x[i] >= 1.0 && step[i] > 0.0)) {
                            free[i] = false;
                            changed = true;
                        }
                    }
                    if (!changed) break;
                }
                double lambda = 1.0;
                bool accepted = false;
                for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
                    const double na = std::clamp(alpha + lambda * step[0], 0.0, 1.0);
                    const double nt = std::clamp(t + lambda * step[1], 0.0, 1.0);
                    double jt[3][2];
                    const EigenCoords rt = eval(surf, na, nt, jt) - p;
                    const double et = sq_norm(rt);
                    if (et < err) {
                        alpha = na;
                        t = nt;
                        r = rt;
                        err = et;
                        std::copy(&jt[0][0], &jt[0][0] + 6, &jac[0][0]);
                        accepted = true;
                        break;
                    }
                }
                if (!accepted) break;
            }
            if (std::sqrt(err) < best.distance) {
                const double a = pw(alpha, 1.0 / m_exp);
                best = {std::sqrt(err), surf, a, a * pw(t, 1.0 / m_exp)};
            }
        }
    }
    return best;
}

double Attractor::distance(const EigenCoords& p, double tol) const {
    const MembershipResult m = membership(p, tol);
    if (m.verdict == Verdict::Member) return 0.0;
    if (m.verdict == Verdict::Unknown) {
        throw NumericalError("membership undecided for distance query: " + m.diagnostic);
    }
    return surface_foot(p).distance;
}

bool Attractor::invariance_check(const ParamTriple& p, Gene gene, double t, double tol) const {
    return membership(flow(gene, t, f_map(p, params_), params_), tol).member();
}

// ---------------------------------------------------------------------------

template <class F>
double hausdorff(const std::vector<Point3<F>>& a, const std::vector<Point3<F>>& b) {
    if (a.empty() || b.empty()) throw ArgumentError("Hausdorff distance of an empty set");
    auto directed = [](const std::vector<Point3<F>>& from, const Tree& to) {
        double worst = 0.0;
        std::vector<Indexed> hit;
        for (const auto& p : from) {
            hit.clear();
            to.query(bgi::nearest(to_bpoint(p), 1), std::back_inserter(hit));
            worst = std::max(worst, bg::distance(to_bpoint(p), hit.front().first));
        }
        return worst;
    };
    const Tree ta = build_tree(a), tb = build_tree(b);
    return std::max(directed(a, tb), directed(b, ta));
}

template double hausdorff<EigenFrame>(const std::vector<EigenCoords>&, const std::vector<EigenCoords>&);
template double hausdorff<OriginalFrame>(const std::vector<MoleculeState>&, const std::vector<MoleculeState>&);

namespace {

MoleculeState inactive_from_one(double s, const NormParams& params) {
    if (s == std::numeric_limits<double>::infinity()) return MoleculeState::zero();
    return flow_general(Gene::Inactive, s, MoleculeState::ones(), params);
}

}  // namespace

MoleculeState degenerate_attractor_sample(const NormParams& params, double s1, double s2, double s3,
                                          DegenerateForm form) {
    if (!(s1 >= 0.0 && s1 <= s2 && s2 <= s3)) throw ArgumentError("times must satisfy 0 <= s1 <= s2 <= s3");
    const MoleculeState sum =
        inactive_from_one(s1, params) - inactive_from_one(s2, params) + inactive_from_one(s3, params);
    return form == DegenerateForm::A1 ? sum : symmetry_image(sum);
}

std::vector<MoleculeState> degenerate_boundary(const NormParams& params, DegenerateForm form,
                                               std::size_t resolution) {
    if (resolution == 0) throw ArgumentError("boundary resolution must be positive");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> times(resolution + 1);
    for (std::size_t i = 0; i <= resolution; ++i) {
        const double alpha = static_cast<double>(i) / static_cast<double>(resolution);
        times[i] = alpha > 0.0 ? -std::log(alpha) : inf;
    }
    std::vector<MoleculeState> out;
    out.reserve((resolution + 1) * (resolution + 2));
    // times decrease with the index, so i >= j means s_i <= s_j
    for (std::size_t i = 0; i <= resolution; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            out.push_back(degenerate_attractor_sample(params, 0.0, times[i], times[j], form));
            out.push_back(degenerate_attractor_sample(params, times[i], times[j], inf, form));
        }
    }
    return out;
}

Plane parse_plane(const std::string& text) {
    if (text == "12") return Plane::P12;
    if (text == "13") return Plane::P13;
    if (text == "23") return Plane::P23;
    throw ArgumentError("plane must be 12, 13 or 23, got '" + text + "'");
}

std::string to_string(Plane p) {
    switch (p) {
        case Plane::P12: return "12";
        case Plane::P13: return "13";
        case Plane::P23: return "23";
    }
    return "12";
}

std::vector<std::array<double, 2>> project(const std::vector<MoleculeState>& points, Plane plane) {
    std::size_t i = 0, j = 1;
    if (plane == Plane::P13) j = 2;
    if (plane == Plane::P23) i = 1, j = 2;
    std::vector<std::array<double, 2>> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({p[i], p[j]});
    return out;
}

std::vector<std::array<double, 2>> project(const std::vector<EigenCoords>& points, const NormParams& params,
                                           Plane plane) {
    const EigenBasis basis(params);
    std::vector<MoleculeState> orig;
    orig.reserve(points.size());
    for (const auto& u : points) orig.push_back(basis.from_eigen(u));
    return project(orig, plane);
}

void write_mesh_csv(std::ostream& out, const SurfaceMesh& mesh, const NormParams& params, OutputFrame frame) {
    out << "# surface: " << to_string(mesh.surface) << '\n';
    out << "# frame: " << (frame == OutputFrame::Eigen ? "eigen" : "original") << '\n';
    out << "alpha,beta,p1,p2,p3\n";
    std::optional<EigenBasis> basis;
    if (frame == OutputFrame::Original) basis.emplace(params);
    for (std::size_t i = 0; i < mesh.points.size(); ++i) {
        const auto& ab = mesh.params[i];
        if (basis) {
            const MoleculeState x = basis->from_eigen(mesh.points[i]);
            out << format_double(ab[0]) << ',' << format_double(ab[1]) << ',' << format_double(x[0]) << ','
                << format_double(x[1]) << ',' << format_double(x[2]) << '\n';
        } else {
            const EigenCoords& u = mesh.points[i];
            out << format_double(ab[0]) << ',' << format_double(ab[1]) << ',' << format_double(u[0]) << ','
                << format_double(u[1]) << ',' << format_double(u[2]) << '\n';
        }
    }
}

}  // namespace genepdmp
