#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsgt/checkpoint.hpp"
#include "hsgt/common.hpp"

namespace hsgt {

/// Historical embeddings for high-level nodes (levels 1..H). Never-pushed
/// entries read as zeros with staleness kNeverPushed. Single writer in
/// batch order; copies are cheap and used for frozen evaluation.
inline constexpr std::int64_t kNeverPushed = -1;

template <typename T>
class HistoricalStore {
 public:
  HistoricalStore() = default;

  /// level_sizes holds |V^l| for l = 1..H.
  HistoricalStore(std::span<const NodeId> level_sizes, std::int64_t dim)
      : dim_(dim) {
    for (NodeId n : level_sizes) {
      tables_.emplace_back(static_cast<std::size_t>(n) * dim, T(0));
      last_push_.emplace_back(static_cast<std::size_t>(n), kNeverPushed);
    }
  }

  int levels() const { return static_cast<int>(tables_.size()); }
  std::int64_t dim() const { return dim_; }
  std::int64_t step() const { return step_; }

  /// Advances the batch counter; call once per consumed batch.
  void begin_batch() { ++step_; }

  void push(int level, std::span<const NodeId> ids,
            std::span<const T> rows) {
    require(level >= 1, "historical store: push to level 0 is not allowed");
    require(level <= levels(), "historical store: level out of range");
    require(rows.size() == ids.size() * static_cast<std::size_t>(dim_),
            "historical store: row extent mismatch");
    auto& table = tables_[level - 1];
    auto& stamp = last_push_[level - 1];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      NodeId v = ids[i];
      require(v >= 0 && static_cast<std::size_t>(v) < stamp.size(),
              "historical store: node id out of range");
      std::copy(rows.begin() + static_cast<std::int64_t>(i) * dim_,
                rows.begin() + static_cast<std::int64_t>(i + 1) * dim_,
                table.begin() + static_cast<std::int64_t>(v) * dim_);
      stamp[v] = step_;
    }
  }

  struct PullResult {
    std::vector<T> rows;
    std::vector<std::int64_t> staleness;  // kNeverPushed when absent
  };

  PullResult pull(int level, std::span<const NodeId> ids) const {
    require(level >= 1 && level <= levels(),
            "historical store: pull level out of range");
    const auto& table = tables_[level - 1];
    const auto& stamp = last_push_[level - 1];
    PullResult out;
    out.rows.resize(ids.size() * static_cast<std::size_t>(dim_));
    out.staleness.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      NodeId v = ids[i];
      require(v >= 0 && static_cast<std::size_t>(v) < stamp.size(),
              "historical store: node id out of range");
      std::copy(table.begin() + static_cast<std::int64_t>(v) * dim_,
                table.begin() + static_cast<std::int64_t>(v + 1) * dim_,
                out.rows.begin() + static_cast<std::int64_t>(i) * dim_);
      if (stamp[v] == kNeverPushed) {
        out.staleness[i] = kNeverPushed;
        stats_.never++;
      } else {
        out.staleness[i] = step_ - stamp[v];
        stats_.pulls++;
        stats_.stale_sum += out.staleness[i];
      }
    }
    return out;
  }

  struct PullStats {
    std::int64_t pulls = 0;      // pulls of previously pushed entries
    std::int64_t stale_sum = 0;  // total staleness over those pulls
    std::int64_t never = 0;      // pulls of never-pushed entries
  };
  const PullStats& pull_stats() const { return stats_; }
  void reset_pull_stats() { stats_ = PullStats{}; }

  void reset() {
    for (auto& t : tables_) std::fill(t.begin(), t.end(), T(0));
    for (auto& s : last_push_)
      std::fill(s.begin(), s.end(), kNeverPushed);
    step_ = 0;
    stats_ = PullStats{};
  }

  void save(const std::string& path) const {
    std::vector<CheckpointEntry> entries;
    for (int l = 1; l <= levels(); ++l) {
      CheckpointEntry table;
      table.name = "store/level" + std::to_string(l);
      table.rows =
          static_cast<std::int64_t>(last_push_[l - 1].size());
      table.cols = dim_;
      table.data.assign(tables_[l - 1].begin(), tables_[l - 1].end());
      entries.push_back(std::move(table));
      CheckpointEntry stamp;
      stamp.name = "store/level" + std::to_string(l) + "/last_push";
      stamp.rows = static_cast<std::int64_t>(last_push_[l - 1].size());
      stamp.cols = 1;
      stamp.data.assign(last_push_[l - 1].begin(), last_push_[l - 1].end());
      entries.push_back(std::move(stamp));
    }
    CheckpointEntry meta;
    meta.name = "store/step";
    meta.rows = meta.cols = 1;
    meta.data = {static_cast<double>(step_)};
    entries.push_back(std::move(meta));
    write_checkpoint(path, entries);
  }

  void load(const std::string& path) {
    auto entries = read_checkpoint(path);
    for (const auto& e : entries) {
      if (e.name == "store/step") {
        step_ = static_cast<std::int64_t>(e.data[0]);
        continue;
      }
      for (int l = 1; l <= levels(); ++l) {
        if (e.name == "store/level" + std::to_string(l)) {
          require(e.data.size() == tables_[l - 1].size(),
                  "store snapshot extent mismatch");
          for (std::size_t i = 0; i < e.data.size(); ++i)
            tables_[l - 1][i] = T(e.data[i]);
        } else if (e.name ==
                   "store/level" + std::to_string(l) + "/last_push") {
          for (std::size_t i = 0; i < e.data.size(); ++i)
            last_push_[l - 1][i] = static_cast<std::int64_t>(e.data[i]);
        }
      }
    }
  }

 private:
  std::int64_t dim_ = 0;
  std::int64_t step_ = 0;
  std::vector<std::vector<T>> tables_;
  std::vector<std::vector<std::int64_t>> last_push_;
  mutable PullStats stats_;
};

}  // namespace hsgt
