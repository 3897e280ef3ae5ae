#pragma once

// Evaluation over independent test episodes, summary statistics, report
// files, and the reward-weight tradeoff sweep.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "uam/env.hpp"
#include "uam/episode_metrics.hpp"
#include "uam/ppo.hpp"

namespace uam::metrics {

/// Box-plot statistics; quartiles use linear interpolation between order
/// statistics.
struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Throws std::invalid_argument on an empty input.
Summary summarize(std::vector<double> values);

/// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

struct EvaluationReport {
  std::uint64_t seed = 0;
  std::vector<EpisodeMetrics> episodes;
  std::vector<double> level_ft;
  /// Ordered (name, summary) pairs; the network-total noise increase is the
  /// headline noise series.
  std::vector<std::pair<std::string, Summary>> summary;
  std::vector<double> mean_occupancy;  // per level, averaged over episodes

  const Summary& get(const std::string& name) const;
};

/// Greedy rollouts; episode k runs with derive_seed(seed, k). Episodes may run
/// on several threads; results are folded in episode order.
EvaluationReport evaluate(const env::Policy& policy, std::shared_ptr<const airspace::NetworkIndex> index,
                          const env::EnvConfig& cfg, std::size_t n_episodes, std::uint64_t seed,
                          std::size_t workers = 1);

nlohmann::ordered_json report_json(const EvaluationReport& report);

/// Writes report.json, episodes.csv, zone_noise.csv and the plot-data files
/// plot_noise_box.csv, plot_los_vs_noise.csv, plot_altitude_hist.csv.
void write_report(const std::filesystem::path& dir, const EvaluationReport& report);

/// One row per (episode, zone) with the accumulated energy sum at full
/// precision, from which every decibel figure can be recomputed.
void write_zone_noise_csv(std::ostream& out, const EvaluationReport& report);

// ---- sweep ------------------------------------------------------------------

struct WeightTriple {
  double rho_noise = 0.0;
  double rho_sep = 0.0;
  double rho_energy = 0.0;
};

/// Unless `allow_arbitrary`, one entry must be zero and the other two must sum
/// to 1. Entries must be non-negative regardless. Throws ConfigError.
void validate_triple(const WeightTriple& w, bool allow_arbitrary);

struct SweepOptions {
  ppo::TrainConfig base;        // scenario, env and PPO settings; weights are replaced per row
  std::filesystem::path output_dir;
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 1;
  bool allow_arbitrary = false;
  bool reuse_checkpoints = true;  // load <row dir>/checkpoint_final.bin when present
};

struct SweepRow {
  WeightTriple weights;
  double mean_los = 0.0;
  double mean_noise_increase_db = 0.0;
  double mean_altitude_changes = 0.0;
  std::filesystem::path run_dir;
};

std::vector<SweepRow> sweep(const std::vector<WeightTriple>& grid, const SweepOptions& options);

void write_tradeoff_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace uam::metrics
