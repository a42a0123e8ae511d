#include "genepdmp/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "genepdmp/error.hpp"
#include "genepdmp/format.hpp"

namespace genepdmp {

std::string to_string(StopRule rule) {
    switch (rule) {
        case StopRule::Horizon: return "horizon";
        case StopRule::HorizonOrJumps: return "horizon-or-jumps";
        case StopRule::HorizonAndJumps: return "horizon-and-jumps";
    }
    return "horizon";
}

StopRule parse_stop_rule(const std::string& text) {
    if (text == "horizon") return StopRule::Horizon;
    if (text == "horizon-or-jumps") return StopRule::HorizonOrJumps;
    if (text == "horizon-and-jumps") return StopRule::HorizonAndJumps;
    throw ArgumentError("unknown stop rule '" + text + "'");
}

Trajectory::Trajectory(const HybridState& init, const NormParams& p)
    : init_(init), params_(p), prop_(p), starts_{init.x} {}

void Trajectory::push_jump(double t, const MoleculeState& x) {
    if (!jumps_.empty() && t < jumps_.back()) throw ArgumentError("jump times must be nondecreasing");
    jumps_.push_back(t);
    starts_.push_back(x);
}

void Trajectory::finish(double t, bool truncated) {
    final_ = t;
    truncated_ = truncated;
}

std::size_t Trajectory::segment_of(double t) const {
    return static_cast<std::size_t>(std::upper_bound(jumps_.begin(), jumps_.end(), t) - jumps_.begin());
}

MoleculeState Trajectory::state_in_segment(std::size_t k, double t) const {
    const double dt = t - segment_begin(k);
    if (dt == 0.0) return starts_[k];
    return prop_.advance(segment_gene(k), dt, starts_[k]);
}

HybridState Trajectory::evaluate(double t) const {
    if (!(t >= 0.0 && t <= final_)) {
        throw ArgumentError("evaluation time " + format_double(t) + " outside [0, " + format_double(final_) +
                            "]");
    }
    const std::size_t k = segment_of(t);
    return {state_in_segment(k, t), segment_gene(k)};
}

std::vector<HybridState> Trajectory::sample(const std::vector<double>& grid) const {
    std::vector<HybridState> out;
    out.reserve(grid.size());
    std::size_t k = 0;
    double prev = -1.0;
    for (double t : grid) {
        if (t < prev) throw ArgumentError("sampling grid must be nondecreasing");
        if (!(t >= 0.0 && t <= final_)) throw ArgumentError("sampling time outside the trajectory");
        prev = t;
        while (k < jumps_.size() && jumps_[k] <= t) ++k;
        out.push_back({state_in_segment(k, t), segment_gene(k)});
    }
    return out;
}

double Trajectory::time_active() const {
    double total = 0.0;
    for (std::size_t k = 0; k < segment_count(); ++k) {
        if (segment_gene(k) == Gene::Active) total += segment_end(k) - segment_begin(k);
    }
    return total;
}

MoleculeState Trajectory::time_integral() const {
    MoleculeState total = MoleculeState::zero();
    for (std::size_t k = 0; k < segment_count(); ++k) {
        total += prop_.integral(segment_gene(k), segment_end(k) - segment_begin(k), starts_[k]);
    }
    return total;
}

Trajectory simulate(RngStream& rng, const HybridState& init, const NormParams& p, const RateSpec& q0,
                    const RateSpec& q1, const SimOptions& opts) {
    if (!(opts.t_final >= 0.0) || !std::isfinite(opts.t_final)) {
        throw ArgumentError("final time must be finite and nonnegative");
    }
    for (std::size_t k = 0; k < 3; ++k) {
        if (!(init.x[k] >= 0.0) || !std::isfinite(init.x[k])) {
            throw ArgumentError("initial molecule levels must be finite and nonnegative");
        }
    }
    if (opts.validate_rates) validate_rate_pair(q0, q1);

    const Propagator prop(p);
    Trajectory traj(init, p);
    double t = 0.0;
    MoleculeState x = init.x;
    Gene gene = init.gene;
    for (;;) {
        const std::size_t n = traj.jump_count();
        if (opts.stop == StopRule::HorizonOrJumps && opts.min_jumps > 0 && n >= opts.min_jumps) {
            traj.finish(t, false);
            break;
        }
        const bool need_more = opts.stop == StopRule::HorizonAndJumps && n < opts.min_jumps;
        const double horizon = need_more ? kInfiniteTime : opts.t_final - t;
        if (!need_more && horizon <= 0.0) {
            traj.finish(std::max(t, opts.t_final), false);
            break;
        }
        if (n >= opts.max_jumps) {
            traj.finish(t, true);
            break;
        }
        const RateSpec& q = gene == Gene::Inactive ? q0 : q1;
        const double dt = opts.thinning ? sample_jump_time_thinning(rng, q, gene, x, p, horizon)
                                        : sample_jump_time(rng, q, gene, x, p, horizon);
        if (std::isinf(dt)) {
            traj.finish(std::max(t, opts.t_final), false);
            break;
        }
        x = prop.advance(gene, dt, x);
        t += dt;
        gene = flipped(gene);
        traj.push_jump(t, x);
    }
    return traj;
}

void EnsembleConfig::validate() const {
    if (replicates < 1) throw ArgumentError("replicate count must be at least 1");
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ArgumentError("final time must be finite and nonnegative");
    if (!(grid_step > 0.0)) throw ArgumentError("grid step must be positive");
    if (!(burn_in >= 0.0) || burn_in > t_final) throw ArgumentError("burn-in must lie in [0, final time]");
}

SimOptions EnsembleConfig::sim_options() const {
    SimOptions o;
    o.t_final = t_final;
    o.max_jumps = max_jumps;
    o.stop = stop;
    o.min_jumps = min_jumps;
    return o;
}

std::vector<double> EnsembleConfig::grid() const {
    validate();
    const auto n = static_cast<std::size_t>(std::floor((t_final - burn_in) / grid_step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::min(burn_in + static_cast<double>(i) * grid_step, t_final);
    return g;
}

void MomentAccumulator::add(const MoleculeState& x) {
    ++n_;
    const double inv = 1.0 / static_cast<double>(n_);
    std::array<double, 3> d{};
    for (std::size_t k = 0; k < 3; ++k) d[k] = x[k] - mean_[k];
    for (std::size_t k = 0; k < 3; ++k) mean_[k] += d[k] * inv;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < 3; ++j) m2_[k][j] += d[k] * (x[j] - mean_[j]);
    }
}

void MomentAccumulator::merge(const MomentAccumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_), n = na + nb;
    std::array<double, 3> d{};
    for (std::size_t k = 0; k < 3; ++k) d[k] = o.mean_[k] - mean_[k];
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < 3; ++j) m2_[k][j] += o.m2_[k][j] + d[k] * d[j] * na * nb / n;
    }
    for (std::size_t k = 0; k < 3; ++k) mean_[k] += d[k] * nb / n;
    n_ += o.n_;
}

double MomentAccumulator::variance(std::size_t k) const {
    return n_ > 1 ? std::max(0.0, m2_[k][k]) / static_cast<double>(n_ - 1) : 0.0;
}

double MomentAccumulator::covariance(std::size_t k, std::size_t j) const {
    return n_ > 1 ? m2_[k][j] / static_cast<double>(n_ - 1) : 0.0;
}

SummaryStats SummaryStats::from(const MomentAccumulator& acc) {
    SummaryStats s;
    s.samples = acc.count();
    for (std::size_t k = 0; k < 3; ++k) {
        s.mean[k] = acc.mean(k);
        s.stddev[k] = std::sqrt(acc.variance(k));
    }
    for (std::size_t c = 0; c < 3; ++c) {
        const auto [k, j] = kCorrPairs[c];
        const double vk = acc.variance(k), vj = acc.variance(j);
        // relative threshold: a flat coordinate carries only rounding noise
        const double floor_k = 1e-24 * std::max(1.0, acc.mean(k) * acc.mean(k));
        const double floor_j = 1e-24 * std::max(1.0, acc.mean(j) * acc.mean(j));
        if (vk <= floor_k || vj <= floor_j) continue;
        s.corr[c] = std::clamp(acc.covariance(k, j) / std::sqrt(vk * vj), -1.0, 1.0);
    }
    return s;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::size_t first_index = n;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (i < first_index) {
                    first_index = i;
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<Trajectory> run_ensemble(const EnsembleConfig& cfg, const HybridState& init,
                                     const NormParams& p, const RateSpec& q0, const RateSpec& q1) {
    cfg.validate();
    validate_rate_pair(q0, q1);
    std::vector<std::optional<Trajectory>> slots(cfg.replicates);
    const SimOptions opts = cfg.sim_options();
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.seed, i);
        slots[i].emplace(simulate(rng, init, p, q0, q1, opts));
    });
    std::vector<Trajectory> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

namespace {

std::vector<MomentAccumulator> replicate_moments(const EnsembleConfig& cfg, const HybridState& init,
                                                 const NormParams& p, const RateSpec& q0,
                                                 const RateSpec& q1) {
    cfg.validate();
    validate_rate_pair(q0, q1);
    const std::vector<double> grid = cfg.grid();
    const SimOptions opts = cfg.sim_options();
    std::vector<MomentAccumulator> acc(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.seed, i);
        const Trajectory traj = simulate(rng, init, p, q0, q1, opts);
        auto end = std::upper_bound(grid.begin(), grid.end(), traj.final_time());
        for (const auto& s : traj.sample(std::vector<double>(grid.begin(), end))) acc[i].add(s.x);
    });
    return acc;
}

}  // namespace

std::vector<SummaryStats> replicate_stats(const EnsembleConfig& cfg, const HybridState& init,
                                          const NormParams& p, const RateSpec& q0, const RateSpec& q1) {
    std::vector<SummaryStats> out;
    for (const auto& a : replicate_moments(cfg, init, p, q0, q1)) out.push_back(SummaryStats::from(a));
    return out;
}

SummaryStats ensemble_stats(const EnsembleConfig& cfg, const HybridState& init, const NormParams& p,
                            const RateSpec& q0, const RateSpec& q1) {
    MomentAccumulator total;
    for (const auto& a : replicate_moments(cfg, init, p, q0, q1)) total.merge(a);
    return SummaryStats::from(total);
}

SummaryStats average_stats(const std::vector<SummaryStats>& runs) {
    if (runs.empty()) throw ArgumentError("no runs to average");
    SummaryStats out;
    std::array<double, 3> corr_sum{};
    std::array<std::size_t, 3> corr_n{};
    for (const auto& r : runs) {
        out.samples += r.samples;
        for (std::size_t k = 0; k < 3; ++k) {
            out.mean[k] += r.mean[k];
            out.stddev[k] += r.stddev[k];
            if (r.corr[k]) {
                corr_sum[k] += *r.corr[k];
                ++corr_n[k];
            }
        }
    }
    const double n = static_cast<double>(runs.size());
    for (std::size_t k = 0; k < 3; ++k) {
        out.mean[k] /= n;
        out.stddev[k] /= n;
        if (corr_n[k] > 0) out.corr[k] = corr_sum[k] / static_cast<double>(corr_n[k]);
    }
    return out;
}

std::vector<HybridState> snapshot(const EnsembleConfig& cfg, double t_snapshot, const HybridState& init,
                                  const NormParams& p, const RateSpec& q0, const RateSpec& q1) {
    cfg.validate();
    validate_rate_pair(q0, q1);
    if (!(t_snapshot >= 0.0) || t_snapshot > cfg.t_final) {
        throw ArgumentError("snapshot time must lie in [0, final time]");
    }
    SimOptions opts = cfg.sim_options();
    opts.t_final = t_snapshot;
    opts.stop = StopRule::Horizon;
    std::vector<HybridState> out(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.seed, i);
        const Trajectory traj = simulate(rng, init, p, q0, q1, opts);
        if (traj.truncated()) throw NumericalError("replicate hit the jump cap before the snapshot time");
        out[i] = traj.evaluate(t_snapshot);
    });
    return out;
}

namespace {

bool bin_index(double v, std::size_t bins, std::size_t& idx) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    idx = std::min(bins - 1, static_cast<std::size_t>(v * static_cast<double>(bins)));
    return true;
}

void check_coord(int c) {
    if (c < 0 || c > 2) throw ArgumentError("coordinate index must be 0, 1 or 2");
}

}  // namespace

Histogram1D marginal_histogram_1d(const std::vector<HybridState>& points, int coord, std::size_t bins) {
    check_coord(coord);
    if (bins == 0) throw ArgumentError("bin count must be positive");
    Histogram1D h;
    h.coord = coord;
    h.bins = bins;
    h.counts.assign(bins, 0);
    for (const auto& s : points) {
        ++h.total;
        std::size_t i = 0;
        if (bin_index(s.x[static_cast<std::size_t>(coord)], bins, i)) {
            ++h.counts[i];
        } else {
            ++h.overflow;
        }
    }
    return h;
}

Histogram2D marginal_histogram(const std::vector<HybridState>& points, std::pair<int, int> pair,
                               std::size_t bins) {
    check_coord(pair.first);
    check_coord(pair.second);
    if (pair.first == pair.second) throw ArgumentError("histogram pair needs two distinct coordinates");
    if (bins == 0) throw ArgumentError("bin count must be positive");
    Histogram2D h;
    h.pair = pair;
    h.bins = bins;
    h.counts.assign(bins * bins, 0);
    for (const auto& s : points) {
        ++h.total;
        std::size_t i = 0, j = 0;
        if (bin_index(s.x[static_cast<std::size_t>(pair.first)], bins, i) &&
            bin_index(s.x[static_cast<std::size_t>(pair.second)], bins, j)) {
            ++h.counts[i * bins + j];
        } else {
            ++h.overflow;
        }
    }
    return h;
}

double Histogram2D::density(std::size_t i, std::size_t j) const {
    const std::size_t in_range = total - overflow;
    if (in_range == 0) return 0.0;
    return static_cast<double>(count(i, j)) / (static_cast<double>(in_range) * width() * width());
}

double Histogram2D::integral() const {
    double s = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        for (std::size_t j = 0; j < bins; ++j) s += density(i, j) * width() * width();
    }
    return s;
}

std::vector<double> Histogram2D::edges() const {
    std::vector<double> e(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) e[i] = static_cast<double>(i) / static_cast<double>(bins);
    return e;
}

std::pair<int, int> parse_pair(const std::string& text) {
    if (text.size() != 2 || text[0] < '1' || text[0] > '3' || text[1] < '1' || text[1] > '3' ||
        text[0] == text[1]) {
        throw ArgumentError("coordinate pair must be two distinct digits from 1-3, got '" + text + "'");
    }
    return {text[0] - '1', text[1] - '1'};
}

std::string pair_label(std::pair<int, int> pair) {
    return std::string{static_cast<char>('1' + pair.first), static_cast<char>('1' + pair.second)};
}

BimodalityReport analyze_bimodality(const Histogram1D& h, double min_dip_fraction) {
    const auto& c = h.counts;
    const std::size_t n = c.size();
    auto is_peak = [&](std::size_t i) {
        const bool left = i == 0 || c[i] >= c[i - 1];
        const bool right = i + 1 == n || c[i] >= c[i + 1];
        return c[i] > 0 && left && right;
    };
    BimodalityReport best;
    double best_depth = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_peak(i)) continue;
        std::size_t dip = c[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j > i + 1) dip = std::min(dip, c[j - 1]);
            if (!is_peak(j) || j == i + 1) continue;
            const std::size_t smaller = std::min(c[i], c[j]);
            const double depth = static_cast<double>(smaller) - static_cast<double>(dip);
            if (depth > best_depth) {
                best_depth = depth;
                best.low_mode = i;
                best.high_mode = j;
                best.dip = dip;
                best.dip_fraction = depth / static_cast<double>(smaller);
            }
        }
    }
    best.bimodal = best_depth > 0.0 && best.dip_fraction >= min_dip_fraction;
    return best;
}

void write_comment_header(std::ostream& out, const HeaderFields& fields) {
    for (const auto& [k, v] : fields) out << "# " << k << ": " << v << '\n';
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<double>& grid) {
    out << "t,x1,x2,x3,gamma\n";
    const auto states = traj.sample(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& s = states[i];
        out << format_double(grid[i]) << ',' << format_double(s.x[0]) << ',' << format_double(s.x[1]) << ','
            << format_double(s.x[2]) << ',' << to_int(s.gene) << '\n';
    }
}

void write_jumps_csv(std::ostream& out, const Trajectory& traj) {
    out << "n,T_n,gamma_after\n";
    for (std::size_t k = 0; k < traj.jump_count(); ++k) {
        out << k + 1 << ',' << format_double(traj.jump_times()[k]) << ',' << to_int(traj.segment_gene(k + 1))
            << '\n';
    }
}

void write_histogram(std::ostream& out, const Histogram2D& h) {
    out << "pair: \"" << pair_label(h.pair) << "\"\n";
    out << "bins: " << h.bins << '\n';
    out << "total: " << h.total << '\n';
    out << "overflow: " << h.overflow << '\n';
    const auto e = h.edges();
    out << "edges: [" << join_numbers(e, ", ") << "]\n";
    out << "counts:\n";
    for (std::size_t i = 0; i < h.bins; ++i) {
        out << "  - [";
        for (std::size_t j = 0; j < h.bins; ++j) out << (j ? ", " : "") << h.count(i, j);
        out << "]\n";
    }
}

void write_stats(std::ostream& out, const SummaryStats& s) {
    out << "samples: " << s.samples << '\n';
    out << "mean: [" << join_numbers({s.mean.begin(), s.mean.end()}, ", ") << "]\n";
    out << "stddev: [" << join_numbers({s.stddev.begin(), s.stddev.end()}, ", ") << "]\n";
    out << "corr:\n";
    const char* names[3] = {"x1_x2", "x2_x3", "x1_x3"};
    for (std::size_t c = 0; c < 3; ++c) {
        out << "  " << names[c] << ": " << (s.corr[c] ? format_double(*s.corr[c]) : std::string("null")) << '\n';
    }
}

}  // namespace genepdmp
