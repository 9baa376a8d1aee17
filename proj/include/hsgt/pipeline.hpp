#pragma once

#include <string>
#include <vector>

#include "hsgt/train.hpp"

namespace hsgt {

/// Aggregate of one configuration trained over cfg.seeds.
struct RunSummary {
  std::string name;
  std::vector<double> per_seed_acc;
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double best_valid_mean = 0.0;
  std::int64_t param_count = 0;
  double seconds = 0.0;
};

/// Dispatches on cfg.precision and trains once per seed (summary only; the
/// CLI `train` path persists artifacts itself).
RunSummary run_training_summary(const TrainConfig& cfg,
                                const LabeledDataset& ds,
                                const std::string& name);

/// Table 2 variant switches applied to a base config.
TrainConfig apply_variant(TrainConfig cfg, const std::string& variant);

const std::vector<std::string>& known_variants();

/// Baseline plus the requested variants, shared seeds.
std::vector<RunSummary> ablate(const TrainConfig& cfg,
                               const LabeledDataset& ds,
                               const std::vector<std::string>& variants);

/// One run per ratio list (e.g. "0.05" or "0.1,0.2").
std::vector<RunSummary> sweep_ratios(const TrainConfig& cfg,
                                     const LabeledDataset& ds,
                                     const std::vector<std::string>& values);

/// One run per intra-batch probability.
std::vector<RunSummary> sweep_p(const TrainConfig& cfg,
                                const LabeledDataset& ds,
                                const std::vector<double>& values);

std::string format_summary_table(const std::vector<RunSummary>& rows);
std::string summaries_to_json(const std::vector<RunSummary>& rows);
std::string metrics_to_json(const MetricsReport& report);

std::vector<double> parse_ratio_list(const std::string& csv);

/// Loads a dataset directory honoring the config's data section, applying
/// the random split when requested.
LabeledDataset load_dataset_for_config(const TrainConfig& cfg,
                                       const std::string& dir);

}  // namespace hsgt
