#include "genepdmp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "genepdmp/error.hpp"
#include "genepdmp/format.hpp"

namespace genepdmp {

namespace {

Vec3 mul(const Mat3& m, const Vec3& v) {
    Vec3 r{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k) r[i] += m[i][k] * v[k];
    return r;
}

Mat3 mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

}  // namespace

Vec3 AffineField::operator()(const Vec3& x) const {
    Vec3 r = mul(m, x);
    for (std::size_t i = 0; i < 3; ++i) r[i] += c[i];
    return r;
}

AffineField model_field(double a, double b, Gene gene) {
    AffineField f;
    f.m = {{{-1.0, 0.0, 0.0}, {a, -a, 0.0}, {0.0, b, -b}}};
    f.c = {static_cast<double>(to_int(gene)), 0.0, 0.0};
    return f;
}

AffineField model_field(const NormParams& p, Gene gene) { return model_field(p.a(), p.b(), gene); }

AffineField lie_bracket(const AffineField& f, const AffineField& g) {
    // Dg (Mf x + cf) - Df (Mg x + cg)
    AffineField r;
    const Mat3 gf = mul(g.m, f.m), fg = mul(f.m, g.m);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) r.m[i][j] = gf[i][j] - fg[i][j];
    r.c = sub(mul(g.m, f.c), mul(f.m, g.c));
    return r;
}

Vec3 lie_bracket(const AffineField& f, const AffineField& g, const Vec3& x) {
    return sub(mul(g.m, f(x)), mul(f.m, g(x)));
}

int column_rank(std::vector<Vec3> cols, double threshold) {
    int rank = 0;
    const std::size_t n = cols.size();
    for (std::size_t r = 0; r < 3 && rank < static_cast<int>(n); ++r) {
        // pivot: largest entry in row r among the unused columns
        std::size_t piv = n;
        double best = threshold;
        for (std::size_t j = static_cast<std::size_t>(rank); j < n; ++j) {
            if (std::fabs(cols[j][r]) > best) {
                best = std::fabs(cols[j][r]);
                piv = j;
            }
        }
        if (piv == n) continue;
        std::swap(cols[piv], cols[static_cast<std::size_t>(rank)]);
        const Vec3 pc = cols[static_cast<std::size_t>(rank)];
        for (std::size_t j = static_cast<std::size_t>(rank) + 1; j < n; ++j) {
            const double f = cols[j][r] / pc[r];
            for (std::size_t k = 0; k < 3; ++k) cols[j][k] -= f * pc[k];
        }
        ++rank;
    }
    return rank;
}

std::array<Vec3, 3> hormander_vectors(const AffineField& a0, const AffineField& a1, const Vec3& x) {
    const AffineField b01 = lie_bracket(a0, a1);
    return {sub(a1(x), a0(x)), b01(x), lie_bracket(a0, b01, x)};
}

int hormander_rank(const AffineField& a0, const AffineField& a1, const Vec3& x, double threshold) {
    const auto v = hormander_vectors(a0, a1, x);
    return column_rank({v[0], v[1], v[2]}, threshold);
}

int hormander_rank(const NormParams& p, const Vec3& x, double threshold) {
    return hormander_rank(model_field(p, Gene::Inactive), model_field(p, Gene::Active), x, threshold);
}

double interior_margin(const ParamTriple& t) { return std::min({1.0 - t.x, t.x - t.y, t.y - t.z, t.z}); }

EigenCoords replay(const ReachSchedule& s, const EigenCoords& start, const NormParams& p) {
    EigenCoords u = start;
    for (const auto& seg : s.segments) u = flow(seg.gene, seg.duration, u, p);
    return u;
}

ReachOutcome reach(const Attractor& att, const EigenCoords& start, const EigenCoords& target,
                   const ReachOptions& opts) {
    if (!(opts.tol > 0.0) || !(opts.margin >= 0.0) || opts.eps_levels <= 0) {
        throw ArgumentError("invalid reach options");
    }
    const NormParams& p = att.params();
    if (!att.membership(start).member()) throw ArgumentError("reach start is not in the attractor");
    const MembershipResult tm = att.membership(target);
    if (!tm.member() || !tm.preimage) throw ArgumentError("reach target is not in the attractor");
    if (interior_margin(*tm.preimage) < opts.margin) {
        throw ArgumentError("reach target is within " + format_double(opts.margin) +
                            " of the boundary in preimage coordinates");
    }

    ReachOutcome out;
    // target = 1 - f(x, y, z) + v_eps with v_eps = (eps s1, eps^a s2, eps^b s3)
    const EigenCoords w0 = symmetry_image(target);
    const MembershipResult base = att.membership(w0);
    if (!base.member() || !base.preimage) {
        out.diagnostic = "1 - target has no preimage";
        return out;
    }
    const double z0 = base.preimage->z;
    if (!(z0 > 0.0)) {
        out.diagnostic = "1 - target lies on the z = 0 face";
        return out;
    }

    ParamTriple seed = *base.preimage;
    std::string last = "no epsilon level tried";
    for (int k = 1; k <= opts.eps_levels; ++k) {
        const double eps = std::ldexp(z0, -k);
        const EigenCoords v(eps * start[0], std::pow(eps, p.a()) * start[1], std::pow(eps, p.b()) * start[2]);
        const EigenCoords w = w0 + v;
        std::optional<ParamTriple> sol = att.solve_from(w, seed, 1e-13);
        if (!sol) {
            const MembershipResult m = att.membership(w, 1e-13);
            if (m.member() && m.preimage) sol = m.preimage;
        }
        if (!sol) {
            last = "no preimage at epsilon " + format_double(eps);
            continue;
        }
        seed = *sol;
        const ParamTriple t = *sol;
        if (!(eps <= t.z && t.z <= t.y && t.y <= t.x && t.x <= 1.0)) {
            last = "unordered solution at epsilon " + format_double(eps);
            continue;
        }

        ReachSchedule s;
        s.epsilon = eps;
        s.xyz = t;
        std::array<double, 4> d{std::log(t.z / eps), std::log(t.y / t.z), std::log(t.x / t.y), -std::log(t.x)};
        for (double& di : d) {
            if (!(di >= opts.min_duration)) {
                di = opts.min_duration;
                s.perturbed = true;
            }
        }
        const Gene order[4] = {Gene::Inactive, Gene::Active, Gene::Inactive, Gene::Active};
        for (std::size_t i = 0; i < 4; ++i) {
            s.segments.push_back({order[i], d[i]});
            s.total_time += d[i];
        }
        s.endpoint = replay(s, start, p);
        s.residual = distance(s.endpoint, target);
        if (s.residual < opts.tol) {
            out.schedule = s;
            out.diagnostic = "ok";
            return out;
        }
        last = "replay residual " + format_double(s.residual) + " at epsilon " + format_double(eps);
    }
    out.diagnostic = last;
    return out;
}

void write_reach_schedule(std::ostream& out, const ReachSchedule& s) {
    out << "segments:\n";
    for (const auto& seg : s.segments) {
        out << "  - gene: " << to_int(seg.gene) << "\n    duration: " << format_double(seg.duration) << '\n';
    }
    out << "total_time: " << format_double(s.total_time) << '\n';
    out << "epsilon: " << format_double(s.epsilon) << '\n';
    out << "xyz: [" << format_double(s.xyz.x) << ", " << format_double(s.xyz.y) << ", " << format_double(s.xyz.z)
        << "]\n";
    out << "endpoint: [" << format_double(s.endpoint[0]) << ", " << format_double(s.endpoint[1]) << ", "
        << format_double(s.endpoint[2]) << "]\n";
    out << "residual: " << format_double(s.residual) << '\n';
    out << "perturbed: " << (s.perturbed ? "true" : "false") << '\n';
}

}  // namespace genepdmp
