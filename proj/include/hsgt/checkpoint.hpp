#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hsgt/common.hpp"
#include "hsgt/optim.hpp"

namespace hsgt {

// Flat binary container: a text header listing tensor names, shapes, and
// byte offsets, followed by little-endian float64 payload.
//
//   HSGT-BIN 1
//   tensor <name> <rows> <cols> <offset>
//   ...
//   data <total_bytes>
//   <raw float64>

struct CheckpointEntry {
  std::string name;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;
};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void write_checkpoint(const std::string& path,
                             const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open checkpoint for writing: " + path);
  std::ostringstream header;
  header << "HSGT-BIN 1\n";
  std::int64_t offset = 0;
  for (const auto& e : entries) {
    require(e.name.find(' ') == std::string::npos &&
                e.name.find('\n') == std::string::npos,
            "checkpoint tensor name may not contain whitespace: " + e.name);
    require(static_cast<std::int64_t>(e.data.size()) == e.rows * e.cols,
            "checkpoint entry extent mismatch: " + e.name);
    header << "tensor " << e.name << ' ' << e.rows << ' ' << e.cols << ' '
           << offset << '\n';
    offset += static_cast<std::int64_t>(e.data.size() * sizeof(double));
  }
  header << "data " << offset << '\n';
  out << header.str();
  for (const auto& e : entries)
    out.write(reinterpret_cast<const char*>(e.data.data()),
              static_cast<std::streamsize>(e.data.size() * sizeof(double)));
  require(out.good(), "checkpoint write failed: " + path);
}

inline std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "HSGT-BIN 1",
          "bad checkpoint magic in " + path);
  std::vector<CheckpointEntry> entries;
  std::vector<std::int64_t> offsets;
  std::int64_t total = -1;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "tensor") {
      CheckpointEntry e;
      std::int64_t off;
      require(static_cast<bool>(ss >> e.name >> e.rows >> e.cols >> off),
              "bad checkpoint header line: " + line);
      entries.push_back(std::move(e));
      offsets.push_back(off);
    } else if (kind == "data") {
      require(static_cast<bool>(ss >> total), "bad data line: " + line);
      break;
    } else {
      throw input_error("unexpected checkpoint header line: " + line);
    }
  }
  require(total >= 0, "checkpoint header missing data section");
  const std::streampos payload = in.tellg();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    e.data.resize(static_cast<std::size_t>(e.rows * e.cols));
    in.seekg(payload + static_cast<std::streamoff>(offsets[i]));
    in.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    require(in.good(), "truncated checkpoint payload: " + path);
  }
  return entries;
}

template <typename T>
void save_parameters(const std::string& path, const ParamStore<T>& store) {
  std::vector<CheckpointEntry> entries;
  for (const Parameter<T>* p : store.all()) {
    CheckpointEntry e;
    e.name = p->name;
    e.rows = p->value.rows();
    e.cols = p->value.cols();
    e.data.assign(p->value.values().begin(), p->value.values().end());
    entries.push_back(std::move(e));
  }
  write_checkpoint(path, entries);
}

template <typename T>
void load_parameters(const std::string& path, ParamStore<T>& store) {
  auto entries = read_checkpoint(path);
  for (const auto& e : entries) {
    Parameter<T>* p = store.find(e.name);
    require(p != nullptr, "checkpoint tensor not in model: " + e.name);
    require(p->value.rows() == e.rows && p->value.cols() == e.cols,
            "checkpoint shape mismatch for " + e.name);
    auto& val = p->value.values();
    for (std::size_t i = 0; i < val.size(); ++i) val[i] = T(e.data[i]);
  }
  // every model parameter must be covered
  for (const Parameter<T>* p : store.all()) {
    bool found = false;
    for (const auto& e : entries)
      if (e.name == p->name) found = true;
    require(found, "checkpoint missing tensor: " + p->name);
  }
}

}  // namespace hsgt
