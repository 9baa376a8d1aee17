#include "hsgt/data_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace fs = std::filesystem;

namespace hsgt {

DatasetFormat parse_dataset_format(const std::string& s) {
  if (s == "generic") return DatasetFormat::Generic;
  if (s == "cora-content") return DatasetFormat::CoraContent;
  throw input_error("unknown dataset format: " + s);
}

namespace {

void row_normalize_features(FeatureMatrix& x) {
  for (std::int64_t i = 0; i < x.rows; ++i) {
    double* row = x.row(i);
    double s = 0.0;
    for (std::int64_t j = 0; j < x.cols; ++j) s += row[j];
    if (s != 0.0)
      for (std::int64_t j = 0; j < x.cols; ++j) row[j] /= s;
  }
}

NodeId scan_max_id(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open file: " + path);
  std::string line;
  long long top = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id;
    if (ss >> id) top = std::max(top, id);
  }
  return static_cast<NodeId>(top);
}

IngestResult ingest_generic(const std::string& dir, bool row_normalize) {
  const std::string edges_path = dir + "/edges.tsv";
  const std::string feats_path = dir + "/features.tsv";
  const std::string labels_path = dir + "/labels.tsv";
  const std::string splits_path = dir + "/splits.tsv";

  NodeId max_edge_id = -1;
  auto edges = read_edge_file(edges_path, &max_edge_id);
  NodeId n = std::max(max_edge_id, scan_max_id(feats_path)) + 1;
  require(n >= 1, "dataset has no nodes");

  IngestResult out;
  out.ds.graph = load_edge_list(edges, n);
  out.ds.features = read_feature_file(feats_path, n);
  if (row_normalize) row_normalize_features(out.ds.features);
  out.ds.labels = read_label_file(labels_path, n);
  std::int32_t max_label = -1;
  for (auto l : out.ds.labels) max_label = std::max(max_label, l);
  require(max_label >= 0, "dataset has no labeled nodes");
  out.ds.num_classes = max_label + 1;
  if (fs::exists(splits_path)) {
    out.ds.split = read_split_file(splits_path, n);
    out.has_predefined_split = true;
  } else {
    out.ds.split.assign(static_cast<std::size_t>(n), Split::Test);
  }
  return out;
}

IngestResult ingest_cora_content(const std::string& dir,
                                 bool row_normalize) {
  const std::string content_path = dir + "/cora.content";
  const std::string cites_path = dir + "/cora.cites";
  std::ifstream content(content_path);
  require(content.good(), "cannot open file: " + content_path);

  IngestResult out;
  std::unordered_map<std::string, NodeId> id_of;
  std::unordered_map<std::string, std::int32_t> class_of;
  std::vector<std::vector<double>> rows;
  std::vector<std::int32_t> labels;
  std::string line;
  std::int64_t lineno = 0;
  std::int64_t width = -1;
  while (std::getline(content, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string f;
    while (ss >> f) fields.push_back(std::move(f));
    require(fields.size() >= 3, content_path + ":" + std::to_string(lineno) +
                                    ": expected `id features... class`");
    const std::string& ext_id = fields.front();
    require(!id_of.count(ext_id), content_path + ":" +
                                      std::to_string(lineno) +
                                      ": duplicate node id " + ext_id);
    if (width < 0) width = static_cast<std::int64_t>(fields.size()) - 2;
    require(static_cast<std::int64_t>(fields.size()) - 2 == width,
            content_path + ":" + std::to_string(lineno) +
                ": inconsistent feature width");
    NodeId id = static_cast<NodeId>(out.external_ids.size());
    id_of.emplace(ext_id, id);
    out.external_ids.push_back(ext_id);
    std::vector<double> feats(static_cast<std::size_t>(width));
    for (std::int64_t j = 0; j < width; ++j) {
      try {
        feats[j] = std::stod(fields[j + 1]);
      } catch (const std::exception&) {
        throw input_error(content_path + ":" + std::to_string(lineno) +
                          ": bad feature value " + fields[j + 1]);
      }
    }
    rows.push_back(std::move(feats));
    auto [it, fresh] = class_of.emplace(
        fields.back(), static_cast<std::int32_t>(class_of.size()));
    (void)fresh;
    labels.push_back(it->second);
  }
  const NodeId n = static_cast<NodeId>(rows.size());
  require(n >= 1, content_path + ": no content rows");

  std::ifstream cites(cites_path);
  require(cites.good(), "cannot open file: " + cites_path);
  std::vector<std::pair<NodeId, NodeId>> edges;
  lineno = 0;
  while (std::getline(cites, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    require(static_cast<bool>(ss >> a >> b),
            cites_path + ":" + std::to_string(lineno) +
                ": expected `cited citing`");
    auto ia = id_of.find(a);
    auto ib = id_of.find(b);
    require(ia != id_of.end(), cites_path + ":" + std::to_string(lineno) +
                                   ": unknown node id " + a);
    require(ib != id_of.end(), cites_path + ":" + std::to_string(lineno) +
                                   ": unknown node id " + b);
    edges.emplace_back(ia->second, ib->second);
  }

  out.ds.graph = load_edge_list(edges, n);
  out.ds.features = FeatureMatrix(n, width);
  for (NodeId v = 0; v < n; ++v)
    std::copy(rows[v].begin(), rows[v].end(), out.ds.features.row(v));
  if (row_normalize) row_normalize_features(out.ds.features);
  out.ds.labels = std::move(labels);
  out.ds.num_classes = static_cast<std::int32_t>(class_of.size());
  out.ds.split.assign(static_cast<std::size_t>(n), Split::Test);
  return out;
}

}  // namespace

IngestResult ingest_dataset(const std::string& dir, DatasetFormat format,
                            bool row_normalize) {
  switch (format) {
    case DatasetFormat::Generic: return ingest_generic(dir, row_normalize);
    case DatasetFormat::CoraContent:
      return ingest_cora_content(dir, row_normalize);
  }
  throw input_error("unhandled dataset format");
}

LabeledDataset generate_sbm(int blocks, int nodes_per_block, double p_in,
                            double p_out, double feature_noise,
                            std::uint64_t seed) {
  require(blocks >= 1 && nodes_per_block >= 1,
          "generate_sbm: degenerate sizes");
  require(p_out >= 0.0 && p_out < p_in && p_in <= 1.0,
          "generate_sbm: need 0 <= p_out < p_in <= 1");
  require(feature_noise >= 0.0, "generate_sbm: negative noise scale");
  const NodeId n = static_cast<NodeId>(blocks) * nodes_per_block;

  Rng rng(mix_seed(seed, 0x5b11));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      const bool same = (i / nodes_per_block) == (j / nodes_per_block);
      const double p = same ? p_in : p_out;
      if (p >= 1.0 || unit(rng) < p) edges.emplace_back(i, j);
    }
  }

  LabeledDataset ds;
  ds.graph = load_edge_list(edges, n);
  ds.features = FeatureMatrix(n, blocks);
  ds.labels.resize(static_cast<std::size_t>(n));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (NodeId v = 0; v < n; ++v) {
    const std::int32_t block = v / nodes_per_block;
    ds.labels[v] = block;
    double* row = ds.features.row(v);
    row[block] = 1.0;
    if (feature_noise > 0.0)
      for (int j = 0; j < blocks; ++j) row[j] += feature_noise * noise(rng);
  }
  ds.num_classes = blocks;
  ds.split.assign(static_cast<std::size_t>(n), Split::Test);
  return ds;
}

void split_random_118(LabeledDataset& ds, std::uint64_t seed) {
  const NodeId n = ds.graph.num_nodes();
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x118));
  std::shuffle(order.begin(), order.end(), rng);
  const NodeId n_train = n / 10;
  const NodeId n_valid = n / 10;
  ds.split.assign(static_cast<std::size_t>(n), Split::Test);
  for (NodeId i = 0; i < n_train; ++i) ds.split[order[i]] = Split::Train;
  for (NodeId i = n_train; i < n_train + n_valid; ++i)
    ds.split[order[i]] = Split::Valid;
}

void write_dataset(const std::string& dir, const LabeledDataset& ds) {
  fs::create_directories(dir);
  write_edge_file(dir + "/edges.tsv", ds.graph);
  write_feature_file(dir + "/features.tsv", ds.features);
  write_label_file(dir + "/labels.tsv", ds.labels);
  write_split_file(dir + "/splits.tsv", ds.split);
  nlohmann::json meta;
  meta["nodes"] = ds.graph.num_nodes();
  meta["edges"] = ds.graph.num_edges();
  meta["classes"] = ds.num_classes;
  meta["feature_dim"] = ds.features.cols;
  std::ofstream out(dir + "/meta.json");
  require(out.good(), "cannot write dataset meta");
  out << meta.dump(2) << '\n';
}

}  // namespace hsgt
