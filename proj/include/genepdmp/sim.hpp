#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genepdmp/core.hpp"
#include "genepdmp/random.hpp"
#include "genepdmp/rates.hpp"

namespace genepdmp {

enum class StopRule {
    Horizon,          // stop at t_final
    HorizonOrJumps,   // stop at t_final or once min_jumps jumps happened, whichever is first
    HorizonAndJumps,  // run past t_final until min_jumps jumps happened
};

std::string to_string(StopRule rule);
StopRule parse_stop_rule(const std::string& text);

struct SimOptions {
    double t_final = 150.0;
    std::size_t max_jumps = 10'000'000;
    StopRule stop = StopRule::Horizon;
    std::size_t min_jumps = 0;
    bool validate_rates = true;
    bool thinning = false;
};

class Trajectory {
 public:
    Trajectory(const HybridState& init, const NormParams& p);

    const HybridState& initial() const { return init_; }
    const NormParams& params() const { return params_; }
    const std::vector<double>& jump_times() const { return jumps_; }
    std::size_t jump_count() const { return jumps_.size(); }
    std::size_t segment_count() const { return starts_.size(); }
    double segment_begin(std::size_t k) const { return k == 0 ? 0.0 : jumps_[k - 1]; }
    double segment_end(std::size_t k) const { return k < jumps_.size() ? jumps_[k] : final_; }
    const MoleculeState& segment_start(std::size_t k) const { return starts_[k]; }
    Gene segment_gene(std::size_t k) const { return k % 2 ? flipped(init_.gene) : init_.gene; }
    double final_time() const { return final_; }
    bool truncated() const { return truncated_; }

    /// State at time t in [0, final_time]. At a jump time the gene is already flipped.
    HybridState evaluate(double t) const;
    /// States at a nondecreasing time grid.
    std::vector<HybridState> sample(const std::vector<double>& grid) const;
    HybridState final_state() const { return evaluate(final_); }

    /// Total time spent with the gene active.
    double time_active() const;
    /// int_0^T x(t) dt, exact per segment.
    MoleculeState time_integral() const;

    void push_jump(double t, const MoleculeState& x);
    void finish(double t, bool truncated);

 private:
    std::size_t segment_of(double t) const;
    MoleculeState state_in_segment(std::size_t k, double t) const;

    HybridState init_;
    NormParams params_;
    Propagator prop_;
    std::vector<double> jumps_;
    std::vector<MoleculeState> starts_;
    double final_ = 0.0;
    bool truncated_ = false;
};

Trajectory simulate(RngStream& rng, const HybridState& init, const NormParams& p, const RateSpec& q0,
                    const RateSpec& q1, const SimOptions& opts = {});

struct EnsembleConfig {
    std::size_t replicates = 1;
    double t_final = 150.0;
    std::uint64_t seed = 0;
    double grid_step = 0.01;
    double burn_in = 10.0;
    std::size_t max_jumps = 10'000'000;
    StopRule stop = StopRule::Horizon;
    std::size_t min_jumps = 0;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const;
    SimOptions sim_options() const;
    /// burn_in, burn_in + step, ... up to t_final.
    std::vector<double> grid() const;
};

/// Mergeable first and second moments of 3D samples.
class MomentAccumulator {
 public:
    void add(const MoleculeState& x);
    void merge(const MomentAccumulator& other);
    std::size_t count() const { return n_; }
    double mean(std::size_t k) const { return mean_[k]; }
    double variance(std::size_t k) const;
    double covariance(std::size_t k, std::size_t j) const;

 private:
    std::size_t n_ = 0;
    std::array<double, 3> mean_{};
    std::array<std::array<double, 3>, 3> m2_{};
};

struct SummaryStats {
    std::size_t samples = 0;
    std::array<double, 3> mean{};
    std::array<double, 3> stddev{};
    // order: (x1,x2), (x2,x3), (x1,x3); empty when a coordinate has zero variance
    std::array<std::optional<double>, 3> corr{};

    static SummaryStats from(const MomentAccumulator& acc);
};

inline constexpr std::array<std::pair<int, int>, 3> kCorrPairs{{{0, 1}, {1, 2}, {0, 2}}};

/// Runs f(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f);

/// Replicate i runs on RngStream(seed, i).
std::vector<Trajectory> run_ensemble(const EnsembleConfig& cfg, const HybridState& init,
                                     const NormParams& p, const RateSpec& q0, const RateSpec& q1);

/// Statistics of each replicate's grid samples.
std::vector<SummaryStats> replicate_stats(const EnsembleConfig& cfg, const HybridState& init,
                                          const NormParams& p, const RateSpec& q0, const RateSpec& q1);

/// Statistics pooled over the grid samples of all replicates.
SummaryStats ensemble_stats(const EnsembleConfig& cfg, const HybridState& init, const NormParams& p,
                            const RateSpec& q0, const RateSpec& q1);

/// Componentwise average of per-run statistics; a correlation is averaged over
/// the runs where it is defined.
SummaryStats average_stats(const std::vector<SummaryStats>& runs);

/// Endpoint states of all replicates at t_snapshot.
std::vector<HybridState> snapshot(const EnsembleConfig& cfg, double t_snapshot, const HybridState& init,
                                  const NormParams& p, const RateSpec& q0, const RateSpec& q1);

struct Histogram1D {
    int coord = 2;
    std::size_t bins = 50;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    std::size_t overflow = 0;

    double width() const { return 1.0 / static_cast<double>(bins); }
    double center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * width(); }
};

struct Histogram2D {
    std::pair<int, int> pair{0, 1};
    std::size_t bins = 50;
    std::vector<std::size_t> counts;  // row-major, first coordinate is the row
    std::size_t total = 0;
    std::size_t overflow = 0;

    double width() const { return 1.0 / static_cast<double>(bins); }
    std::size_t count(std::size_t i, std::size_t j) const { return counts[i * bins + j]; }
    /// Density over [0,1]^2 normalized by the in-range count.
    double density(std::size_t i, std::size_t j) const;
    double integral() const;
    std::vector<double> edges() const;
};

/// Value in [0,1] lands in bin floor(v*bins), with v = 1 in the last bin.
/// Values outside [0,1] count as overflow.
Histogram1D marginal_histogram_1d(const std::vector<HybridState>& points, int coord, std::size_t bins);
Histogram2D marginal_histogram(const std::vector<HybridState>& points, std::pair<int, int> pair,
                               std::size_t bins);

/// Parses "12", "23", "13" (1-based coordinate pairs).
std::pair<int, int> parse_pair(const std::string& text);
std::string pair_label(std::pair<int, int> pair);

struct BimodalityReport {
    bool bimodal = false;
    std::size_t low_mode = 0;   // bin index
    std::size_t high_mode = 0;  // bin index
    std::size_t dip = 0;        // smallest count between the modes
    double dip_fraction = 0.0;  // (smaller mode - dip) / smaller mode
};

/// Best pair of local maxima, ranked by the depth of the dip between them.
/// Bimodal when that depth is at least min_dip_fraction of the smaller mode.
BimodalityReport analyze_bimodality(const Histogram1D& h, double min_dip_fraction = 0.2);

using HeaderFields = std::vector<std::pair<std::string, std::string>>;

void write_comment_header(std::ostream& out, const HeaderFields& fields);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<double>& grid);
void write_jumps_csv(std::ostream& out, const Trajectory& traj);
void write_histogram(std::ostream& out, const Histogram2D& h);
void write_stats(std::ostream& out, const SummaryStats& s);

}  // namespace genepdmp
