#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "hsgt/config.hpp"
#include "hsgt/model.hpp"

namespace hsgt {

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_acc = -1.0;  // -1 when not evaluated this epoch
  double seconds = 0.0;
  double mean_staleness = 0.0;
};

struct MetricsReport {
  std::vector<EpochStats> epochs;
  double best_valid = -1.0;
  int best_epoch = -1;
  double test_acc = 0.0;
  std::int64_t param_count = 0;
  double seconds_total = 0.0;
  long peak_rss_kb = 0;
};

long read_peak_rss_kb();

template <typename T>
struct TrainOutput {
  std::unique_ptr<HsgtModel<T>> model;
  HistoricalStore<T> store;
  Hierarchy hierarchy;
  MetricsReport report;
  SamplerConfig sampler;  // effective sampler config (full-batch resolved)
};

namespace detail_train {

inline double wall_seconds() {
  using clock = std::chrono::steady_clock;
  static const auto t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

}  // namespace detail_train

/// Completes model/sampler fields that depend on the dataset: feature and
/// class dims, hierarchy depth, full-batch auto-selection, and the
/// historical ablation's sampler switch.
inline void resolve_config(TrainConfig& cfg, const LabeledDataset& ds) {
  cfg.model.feature_dim = ds.features.cols;
  cfg.model.num_classes = ds.num_classes;
  cfg.model.levels = static_cast<int>(cfg.coarsening.ratios.size());
  cfg.sampler.max_spd = cfg.model.max_spd;
  if (cfg.full_batch_budget > 0 &&
      ds.graph.num_nodes() <= cfg.full_batch_budget)
    cfg.sampler.full_batch = true;
  if (cfg.model.ablations.no_historical)
    cfg.sampler.sample_high_level_neighbors = false;
  cfg.validate();
  cfg.model.validate();
}

/// Full inference pass (Algorithm 1's outer loop over every top-level node)
/// followed by argmax accuracy on the requested split. Works on a copy of
/// the store so repeated calls are deterministic; `prebuilt` short-circuits
/// batch construction in full-batch mode.
template <typename T>
double evaluate(const HsgtModel<T>& model, const HistoricalStore<T>& store,
                const Hierarchy& h, const LabeledDataset& ds, Split split,
                const SamplerConfig& scfg, const Batch* prebuilt = nullptr) {
  NoGradGuard ng;
  HistoricalStore<T> frozen = store;
  Rng rng(0);  // eval-mode dropout is off; fixed stream for reproducibility
  const NodeId n = ds.graph.num_nodes();
  std::vector<std::int32_t> pred(static_cast<std::size_t>(n), -1);

  auto consume = [&](const Batch& batch) {
    frozen.begin_batch();
    Tensor<T> logits = model.forward_batch(batch, h, &frozen, false, rng);
    const LevelBatch& l0 = batch.levels[0];
    const int c = model.config().num_classes;
    for (std::int32_t i = 0; i < l0.num_targets; ++i) {
      const T* row = logits.data() + static_cast<std::int64_t>(i) * c;
      std::int32_t best = 0;
      for (std::int32_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
      pred[l0.nodes[i]] = best;
    }
  };

  if (prebuilt != nullptr) {
    consume(*prebuilt);
  } else {
    const std::uint64_t eval_seed = 0xe7a1;
    auto tops = epoch_batches(h, scfg, eval_seed);
    for (std::size_t bi = 0; bi < tops.size(); ++bi)
      consume(sample_batch(h, tops[bi], scfg, mix_seed(eval_seed, bi)));
  }

  std::int64_t hit = 0, total = 0;
  for (NodeId v = 0; v < n; ++v) {
    if (ds.split[v] != split || ds.labels[v] < 0) continue;
    ++total;
    if (pred[v] == ds.labels[v]) ++hit;
  }
  require(total > 0, "evaluate: split has no labeled nodes");
  return static_cast<double>(hit) / static_cast<double>(total);
}

/// One training run: Algorithm-1 epochs with AdamW, best-validation
/// checkpointing, optional early stopping, and a final test evaluation.
template <typename T>
TrainOutput<T> train_one(TrainConfig cfg, const LabeledDataset& ds,
                         std::uint64_t seed) {
  resolve_config(cfg, ds);
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  TrainOutput<T> out;
  out.hierarchy = build_hierarchy(ds, cfg.coarsening.ratios,
                                  cfg.coarsening.method, cfg.coarsening.seed,
                                  cfg.coarsening.import_dir);
  const Hierarchy& hier = out.hierarchy;
  const int H = hier.levels();

  out.model = std::make_unique<HsgtModel<T>>(cfg.model, seed);
  HsgtModel<T>& model = *out.model;
  auto params = model.params().all();

  std::vector<NodeId> level_sizes;
  for (int l = 1; l <= H; ++l)
    level_sizes.push_back(hier.graphs[l].num_nodes());
  out.store = HistoricalStore<T>(level_sizes, cfg.model.hidden);
  HistoricalStore<T>& store = out.store;
  out.sampler = cfg.sampler;

  // full-batch mode reuses one deterministic batch
  Batch cached;
  const bool full_batch = cfg.sampler.full_batch;
  if (full_batch) {
    std::vector<NodeId> all(
        static_cast<std::size_t>(hier.graphs[H].num_nodes()));
    std::iota(all.begin(), all.end(), 0);
    cached = sample_batch(hier, all, cfg.sampler, 0);
  }

  Rng drop_rng(mix_seed(seed, 0xd809));
  MetricsReport& report = out.report;
  report.param_count = model.parameter_count();

  auto snapshot = model.params().snapshot_values();
  HistoricalStore<T> best_store = store;
  int epochs_since_best = 0;

  if (cfg.store_warm_start && H >= 1 && !full_batch) {
    // one optimizer-free pass so the first epoch pulls warm values
    auto tops = epoch_batches(hier, cfg.sampler, mix_seed(seed, 0xAA));
    NoGradGuard ng;
    for (std::size_t bi = 0; bi < tops.size(); ++bi) {
      store.begin_batch();
      Batch b = sample_batch(hier, tops[bi], cfg.sampler,
                             mix_seed(seed, 0xAA00 + bi));
      model.forward_batch(b, hier, &store, false, drop_rng);
    }
  }

  std::int64_t dump_counter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t_epoch = clock::now();
    if (cfg.store_reset_per_epoch) store.reset();
    store.reset_pull_stats();

    double loss_sum = 0.0;
    std::int64_t loss_batches = 0;
    auto tops = full_batch
                    ? std::vector<std::vector<NodeId>>{}
                    : epoch_batches(hier, cfg.sampler,
                                    mix_seed(seed, 50000 + epoch));
    const std::size_t num_batches = full_batch ? 1 : tops.size();

    for (std::size_t bi = 0; bi < num_batches; ++bi) {
      Batch fresh;
      const Batch* batch = &cached;
      if (!full_batch) {
        fresh = sample_batch(
            hier, tops[bi], cfg.sampler,
            mix_seed(seed, 1000000ull * (epoch + 1) + bi));
        batch = &fresh;
      }
      if (!cfg.dump_batches_dir.empty()) {
        std::filesystem::create_directories(cfg.dump_batches_dir);
        dump_batch(*batch, cfg.dump_batches_dir + "/batch_" +
                               std::to_string(dump_counter++) + ".txt");
      }
      store.begin_batch();

      // supervised level-0 targets: train-tagged rows only
      const LevelBatch& l0 = batch->levels[0];
      std::vector<std::int64_t> train_rows;
      std::vector<std::int32_t> train_labels;
      for (std::int32_t i = 0; i < l0.num_targets; ++i) {
        NodeId v = l0.nodes[i];
        if (ds.split[v] == Split::Train && ds.labels[v] >= 0) {
          train_rows.push_back(i);
          train_labels.push_back(ds.labels[v]);
        }
      }
      if (train_rows.empty()) {
        // still advance the store approximation, but no optimizer step
        NoGradGuard ng;
        model.forward_batch(*batch, hier, &store, false, drop_rng);
        continue;
      }

      Tensor<T> logits =
          model.forward_batch(*batch, hier, &store, true, drop_rng);
      Tensor<T> picked = gather_rows(logits, std::move(train_rows));
      Tensor<T> loss = cross_entropy(picked, train_labels);
      const double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value))
        throw numeric_error(
            "training diverged: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(bi));
      model.params().zero_grad();
      backward(loss);
      adamw_step<T>(params, cfg.optimizer);
      loss_sum += loss_value;
      loss_batches++;
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_batches > 0 ? loss_sum / loss_batches : 0.0;
    const auto& ps = store.pull_stats();
    es.mean_staleness =
        ps.pulls > 0 ? static_cast<double>(ps.stale_sum) / ps.pulls : 0.0;

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      es.valid_acc = evaluate(model, store, hier, ds, Split::Valid,
                              cfg.sampler, full_batch ? &cached : nullptr);
      if (es.valid_acc > report.best_valid) {
        report.best_valid = es.valid_acc;
        report.best_epoch = epoch;
        snapshot = model.params().snapshot_values();
        best_store = store;
        epochs_since_best = 0;
      } else {
        epochs_since_best++;
      }
    }
    es.seconds = std::chrono::duration<double>(clock::now() - t_epoch).count();
    report.epochs.push_back(es);
    if (epochs_since_best >= cfg.patience) break;
  }

  if (report.best_epoch >= 0) {
    model.params().restore_values(snapshot);
    store = best_store;
  }
  report.test_acc = evaluate(model, store, hier, ds, Split::Test, cfg.sampler,
                             full_batch ? &cached : nullptr);
  report.seconds_total =
      std::chrono::duration<double>(clock::now() - t_start).count();
  report.peak_rss_kb = read_peak_rss_kb();
  return out;
}

}  // namespace hsgt
