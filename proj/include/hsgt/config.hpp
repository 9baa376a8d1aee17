#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsgt/coarsen.hpp"
#include "hsgt/data_io.hpp"
#include "hsgt/model.hpp"
#include "hsgt/optim.hpp"
#include "hsgt/sampler.hpp"

namespace hsgt {

struct CoarsenConfig {
  std::vector<double> ratios{0.05};
  CoarsenMethod method = CoarsenMethod::Multilevel;
  std::uint64_t seed = 1;
  std::string import_dir;
};

struct DataConfig {
  std::string format = "generic";        // generic | cora-content
  bool row_normalize = false;
  std::string split = "predefined";      // predefined | random-118
  std::uint64_t split_seed = 7;
};

struct TrainConfig {
  ModelConfig model;
  SamplerConfig sampler;
  CoarsenConfig coarsening;
  AdamWConfig optimizer;
  DataConfig data;
  int epochs = 200;
  int eval_every = 1;
  int patience = 50;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string precision = "double";  // double | float
  // Full-batch mode switches on automatically when |V^0| fits this budget;
  // 0 disables the auto-switch.
  int full_batch_budget = 5000;
  bool store_reset_per_epoch = false;
  bool store_warm_start = false;
  std::string dump_batches_dir;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

}  // namespace hsgt
