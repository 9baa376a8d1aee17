#pragma once

#include <string>
#include <vector>

#include "hsgt/graph.hpp"

namespace hsgt {

enum class DatasetFormat { Generic, CoraContent };

DatasetFormat parse_dataset_format(const std::string& s);

struct IngestResult {
  LabeledDataset ds;
  bool has_predefined_split = false;
  // External id per dense node id (content formats); empty for generic.
  std::vector<std::string> external_ids;
};

/// Generic: edges.tsv / features.tsv / labels.tsv / optional splits.tsv in
/// `dir`. CoraContent: cora.content + cora.cites with string ids remapped
/// densely in first-seen content order. `row_normalize` rescales each
/// feature row to unit sum (rows summing to zero are left unchanged).
IngestResult ingest_dataset(const std::string& dir, DatasetFormat format,
                            bool row_normalize);

/// Stochastic block model: features are the one-hot block indicator plus
/// Gaussian noise, labels are block ids. Split tags default to Test.
LabeledDataset generate_sbm(int blocks, int nodes_per_block, double p_in,
                            double p_out, double feature_noise,
                            std::uint64_t seed);

/// Uniform 1:1:8 split; the rounding remainder goes to test.
void split_random_118(LabeledDataset& ds, std::uint64_t seed);

/// Writes the generic on-disk layout (plus meta.json).
void write_dataset(const std::string& dir, const LabeledDataset& ds);

}  // namespace hsgt
