#include "hsgt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace hsgt {

long read_peak_rss_kb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0 || line.rfind("VmRSS:", 0) == 0) {
      std::istringstream ss(line.substr(6));
      long kb = 0;
      ss >> kb;
      return kb;
    }
  }
  return 0;
}

namespace {

template <typename T>
RunSummary run_seeds(const TrainConfig& cfg, const LabeledDataset& ds,
                     const std::string& name) {
  RunSummary s;
  s.name = name;
  double valid_sum = 0.0;
  for (std::uint64_t seed : cfg.seeds) {
    auto out = train_one<T>(cfg, ds, seed);
    s.per_seed_acc.push_back(out.report.test_acc);
    valid_sum += out.report.best_valid;
    s.param_count = out.report.param_count;
    s.seconds += out.report.seconds_total;
  }
  const double n = static_cast<double>(s.per_seed_acc.size());
  for (double a : s.per_seed_acc) s.acc_mean += a;
  s.acc_mean /= n;
  for (double a : s.per_seed_acc)
    s.acc_std += (a - s.acc_mean) * (a - s.acc_mean);
  s.acc_std = n > 1 ? std::sqrt(s.acc_std / (n - 1)) : 0.0;
  s.best_valid_mean = valid_sum / n;
  return s;
}

}  // namespace

RunSummary run_training_summary(const TrainConfig& cfg,
                                const LabeledDataset& ds,
                                const std::string& name) {
  if (cfg.precision == "float") return run_seeds<float>(cfg, ds, name);
  return run_seeds<double>(cfg, ds, name);
}

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> v{
      "no_vertical", "no_structural", "no_historical",
      "no_readout",  "no_sharing",    "random_partition"};
  return v;
}

TrainConfig apply_variant(TrainConfig cfg, const std::string& variant) {
  if (variant == "no_vertical") {
    cfg.model.ablations.no_vertical = true;
  } else if (variant == "no_structural") {
    cfg.model.ablations.no_structural = true;
  } else if (variant == "no_historical") {
    cfg.model.ablations.no_historical = true;
  } else if (variant == "no_readout") {
    cfg.model.ablations.no_readout = true;
  } else if (variant == "no_sharing") {
    cfg.model.share_horizontal = false;
  } else if (variant == "random_partition") {
    cfg.coarsening.method = CoarsenMethod::Random;
  } else {
    throw input_error("unknown ablation variant: " + variant);
  }
  return cfg;
}

std::vector<RunSummary> ablate(const TrainConfig& cfg,
                               const LabeledDataset& ds,
                               const std::vector<std::string>& variants) {
  std::vector<RunSummary> rows;
  rows.push_back(run_training_summary(cfg, ds, "baseline"));
  for (const auto& v : variants)
    rows.push_back(run_training_summary(apply_variant(cfg, v), ds, v));
  return rows;
}

std::vector<double> parse_ratio_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw input_error("bad ratio value: " + item);
    }
  }
  require(!out.empty(), "empty ratio list: " + csv);
  return out;
}

std::vector<RunSummary> sweep_ratios(const TrainConfig& cfg,
                                     const LabeledDataset& ds,
                                     const std::vector<std::string>& values) {
  require(!values.empty(), "sweep: no values given");
  std::vector<RunSummary> rows;
  for (const auto& v : values) {
    TrainConfig c = cfg;
    c.coarsening.ratios = parse_ratio_list(v);
    rows.push_back(run_training_summary(c, ds, "ratios={" + v + "}"));
  }
  return rows;
}

std::vector<RunSummary> sweep_p(const TrainConfig& cfg,
                                const LabeledDataset& ds,
                                const std::vector<double>& values) {
  require(!values.empty(), "sweep: no values given");
  std::vector<RunSummary> rows;
  for (double p : values) {
    TrainConfig c = cfg;
    c.sampler.intra_batch_p = p;
    std::ostringstream name;
    name << "p=" << p;
    rows.push_back(run_training_summary(c, ds, name.str()));
  }
  return rows;
}

std::string format_summary_table(const std::vector<RunSummary>& rows) {
  std::size_t name_w = 8;
  for (const auto& r : rows) name_w = std::max(name_w, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w) + 2) << "run"
      << std::right << std::setw(10) << "test_acc" << std::setw(9) << "std"
      << std::setw(12) << "params" << std::setw(11) << "seconds" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name
        << std::right << std::fixed << std::setprecision(4) << std::setw(10)
        << r.acc_mean << std::setw(9) << r.acc_std << std::setw(12)
        << r.param_count << std::setprecision(1) << std::setw(11)
        << r.seconds << '\n';
  }
  return out.str();
}

std::string summaries_to_json(const std::vector<RunSummary>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"name", r.name},
                 {"test_acc_mean", r.acc_mean},
                 {"test_acc_std", r.acc_std},
                 {"per_seed_acc", r.per_seed_acc},
                 {"best_valid_mean", r.best_valid_mean},
                 {"param_count", r.param_count},
                 {"seconds", r.seconds}});
  return j.dump(2);
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["best_valid"] = report.best_valid;
  j["best_epoch"] = report.best_epoch;
  j["test_acc"] = report.test_acc;
  j["param_count"] = report.param_count;
  j["seconds_total"] = report.seconds_total;
  j["peak_rss_kb"] = report.peak_rss_kb;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : report.epochs)
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"valid_acc", e.valid_acc},
                           {"seconds", e.seconds},
                           {"mean_staleness", e.mean_staleness}});
  return j.dump(2);
}

LabeledDataset load_dataset_for_config(const TrainConfig& cfg,
                                       const std::string& dir) {
  auto result = ingest_dataset(dir, parse_dataset_format(cfg.data.format),
                               cfg.data.row_normalize);
  if (cfg.data.split == "random-118") {
    split_random_118(result.ds, cfg.data.split_seed);
  } else if (cfg.data.split == "predefined") {
    require(result.has_predefined_split,
            "config requests the predefined split but " + dir +
                " has no splits.tsv");
  } else {
    throw input_error("unknown split mode: " + cfg.data.split);
  }
  return std::move(result.ds);
}

}  // namespace hsgt
