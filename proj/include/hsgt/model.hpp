#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hsgt/attention.hpp"
#include "hsgt/optim.hpp"
#include "hsgt/sampler.hpp"
#include "hsgt/store.hpp"

namespace hsgt {

struct AblationFlags {
  bool no_vertical = false;    // vertical aggregation = plain mean
  bool no_structural = false;  // drop SPD bias scalars, keep masking
  bool no_readout = false;     // readout = concat + linear projection
  bool no_historical = false;  // sampler skips high-level neighborhoods
};

struct ModelConfig {
  int hidden = 64;
  int heads = 8;
  int layers_per_horizontal = 2;
  int max_spd = 2;
  int levels = 1;  // hierarchy depth H
  bool share_horizontal = true;
  double dropout = 0.1;       // FFN hidden dropout
  double attn_dropout = 0.0;  // attention weight dropout
  int ffn_mult = 2;
  int max_degree = 64;
  std::int64_t feature_dim = 0;
  int num_classes = 0;
  AblationFlags ablations;

  void validate() const {
    require(hidden >= 1 && heads >= 1 && hidden % heads == 0,
            "model: hidden size must be a positive multiple of heads");
    require(layers_per_horizontal >= 0, "model: negative layer count");
    require(max_spd >= 0, "model: negative max SPD");
    require(levels >= 0, "model: negative hierarchy depth");
    require(feature_dim >= 1, "model: feature_dim unset");
    require(num_classes >= 1, "model: num_classes unset");
    require(ffn_mult >= 1, "model: ffn_mult must be >= 1");
    require(max_degree >= 0, "model: negative degree table size");
  }
};

/// Per-batch record of store traffic, for debugging and the round-trip
/// tests. Values are stored as doubles (lossless for the double engine).
struct BatchTrace {
  struct Entry {
    int level;
    std::vector<NodeId> ids;
    std::vector<double> rows;
  };
  std::vector<Entry> pushed;
  std::vector<Entry> pulled;
};

template <typename T>
class HsgtModel {
 public:
  HsgtModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix_seed(seed, 0x3b7));
    const std::int64_t d = cfg_.hidden;

    for (int l = 0; l <= cfg_.levels; ++l)
      input_.push_back(make_linear("input/" + std::to_string(l),
                                   cfg_.feature_dim, d, rng));
    degree_table_ = &params_.create("degree/table", cfg_.max_degree + 1, d);

    const int hblocks = cfg_.share_horizontal ? 1 : cfg_.levels + 1;
    horizontal_.resize(hblocks);
    for (int b = 0; b < hblocks; ++b) {
      std::string prefix =
          "horizontal/" +
          (cfg_.share_horizontal ? std::string("shared") : "level" +
                                                            std::to_string(b));
      for (int i = 0; i < cfg_.layers_per_horizontal; ++i)
        horizontal_[b].push_back(make_self_layer(
            prefix + "/layer" + std::to_string(i), rng));
    }

    if (cfg_.levels >= 1 && !cfg_.ablations.no_vertical) {
      const int vblocks = cfg_.share_horizontal ? 1 : cfg_.levels;
      for (int b = 0; b < vblocks; ++b) {
        std::string prefix =
            "vertical/" +
            (cfg_.share_horizontal ? std::string("shared") : "level" +
                                                              std::to_string(
                                                                  b + 1));
        vertical_.push_back(make_cross_layer(prefix, rng));
      }
    }

    if (!cfg_.ablations.no_readout) {
      readout_ = make_cross_layer("readout", rng);
    } else {
      readout_concat_ = make_linear("readout/concat",
                                    (cfg_.levels + 1) * d, d, rng);
    }

    classifier_ = make_linear("classifier", d, cfg_.num_classes, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::int64_t parameter_count() const { return params_.total_size(); }
  std::int64_t horizontal_parameter_count() const {
    return params_.size_with_prefix("horizontal/");
  }

  /// Linear(x) per level; level 0 adds the degree embedding (clamped).
  Tensor<T> input_transform(int level, const Tensor<T>& x_rows,
                            std::span<const NodeId> degrees) const {
    require(level >= 0 && level <= cfg_.levels,
            "input_transform: level out of range");
    Tensor<T> h = apply_linear(input_[level], x_rows);
    if (level == 0) {
      require(static_cast<std::int64_t>(degrees.size()) == x_rows.rows(),
              "input_transform: one degree per row required");
      std::vector<std::int64_t> idx(degrees.size());
      for (std::size_t i = 0; i < degrees.size(); ++i)
        idx[i] = std::min<std::int64_t>(degrees[i], cfg_.max_degree);
      h = add(h, gather_rows(degree_table_->value, std::move(idx)));
    }
    return h;
  }

  /// Stacked SPD-biased pre-LN Transformer layers for one level.
  Tensor<T> horizontal_block(Tensor<T> h, const LevelBatch& lb, int level,
                             bool train, Rng& rng) const {
    const auto& block =
        horizontal_[cfg_.share_horizontal ? 0 : level];
    for (const SelfLayer& ly : block) {
      Tensor<T> x1 = layer_norm(h, ly.ln1_g->value, ly.ln1_b->value);
      Tensor<T> q = apply_linear(ly.q, x1);
      Tensor<T> k = apply_linear(ly.k, x1);
      Tensor<T> v = apply_linear(ly.v, x1);
      Tensor<T> bias_scalars;  // undefined under the structural ablation
      if (ly.spd_bias != nullptr) bias_scalars = ly.spd_bias->value;
      Tensor<T> a = spd_attention(q, k, v, cfg_.heads, lb.bias_index,
                                  cfg_.max_spd, bias_scalars,
                                  cfg_.attn_dropout, rng, train);
      h = add(h, apply_linear(ly.o, a));
      h = ffn_sublayer(ly.ln2_g, ly.ln2_b, ly.f1, ly.f2, h, train, rng);
    }
    return h;
  }

  /// Cross-attention of per-parent queries against contiguous child
  /// segments; the ablation variant is a plain segment mean.
  Tensor<T> vertical_block(int level_above, const Tensor<T>& queries,
                           const Tensor<T>& children,
                           std::span<const std::int32_t> offsets, bool train,
                           Rng& rng) const {
    if (cfg_.ablations.no_vertical) return segment_mean(children, offsets);
    const CrossLayer& ly =
        vertical_[cfg_.share_horizontal ? 0 : level_above - 1];
    return cross_attention(ly, queries, children, offsets, train, rng);
  }

  /// Attention of each level-0 target over its ancestor-path embeddings.
  /// `ancestors` holds H+1 tensors of [n0 x d] rows, level ascending.
  Tensor<T> readout_block(const Tensor<T>& h0,
                          const std::vector<Tensor<T>>& ancestors, bool train,
                          Rng& rng) const {
    const std::int64_t n0 = h0.rows();
    const int h_levels = static_cast<int>(ancestors.size());
    require(h_levels == cfg_.levels + 1,
            "readout_block: expected one ancestor row per level");
    if (cfg_.ablations.no_readout)
      return apply_linear(readout_concat_, concat_cols(ancestors));
    // interleave block-ordered ancestor rows into per-node stacks
    Tensor<T> blocks = concat_rows(ancestors);
    std::vector<std::int64_t> perm(
        static_cast<std::size_t>(n0) * h_levels);
    for (std::int64_t i = 0; i < n0; ++i)
      for (int l = 0; l < h_levels; ++l)
        perm[i * h_levels + l] = l * n0 + i;
    Tensor<T> stacked = gather_rows(blocks, std::move(perm));
    std::vector<std::int32_t> offsets(static_cast<std::size_t>(n0) + 1);
    for (std::int64_t i = 0; i <= n0; ++i)
      offsets[i] = static_cast<std::int32_t>(i * h_levels);
    return cross_attention(readout_, h0, stacked, offsets, train, rng);
  }

  /// Algorithm-1 forward pass over a sampled batch: returns logits for the
  /// level-0 targets. `store` may be null only when no level has sampled
  /// high-level neighbors (e.g. full-batch mode).
  Tensor<T> forward_batch(const Batch& batch, const Hierarchy& hier,
                          HistoricalStore<T>* store, bool train, Rng& rng,
                          BatchTrace* trace = nullptr) const {
    const int H = static_cast<int>(batch.levels.size()) - 1;
    require(H == cfg_.levels, "forward_batch: hierarchy depth mismatch");

    std::vector<Tensor<T>> post(static_cast<std::size_t>(H) + 1);
    Tensor<T> current;
    for (int l = 0; l <= H; ++l) {
      const LevelBatch& lb = batch.levels[l];
      if (l == 0) {
        std::vector<NodeId> degs(lb.nodes.size());
        for (std::size_t i = 0; i < lb.nodes.size(); ++i)
          degs[i] = hier.graphs[0].degree(lb.nodes[i]);
        current = input_transform(0, features_for(hier, 0, lb.nodes), degs);
      }
      current = horizontal_block(current, lb, l, train, rng);
      post[l] = current;

      if (l < H) {
        const LevelBatch& above = batch.levels[l + 1];
        Tensor<T> children = slice_rows(current, 0, lb.num_targets);
        std::span<const NodeId> parents(above.nodes.data(),
                                        static_cast<std::size_t>(
                                            above.num_targets));
        Tensor<T> queries = input_transform(
            l + 1, features_for(hier, l + 1, parents), {});
        Tensor<T> vert = vertical_block(l + 1, queries, children,
                                        above.child_offsets, train, rng);

        if (store != nullptr && store->levels() >= l + 1) {
          store->push(l + 1, parents, vert.values());
          if (trace != nullptr)
            trace->pushed.push_back(
                {l + 1,
                 {parents.begin(), parents.end()},
                 {vert.values().begin(), vert.values().end()}});
        }
        const std::size_t num_extra = above.nodes.size() -
                                      static_cast<std::size_t>(
                                          above.num_targets);
        if (num_extra == 0) {
          current = vert;
        } else {
          require(store != nullptr,
                  "forward_batch: high-level neighbors need a store");
          std::span<const NodeId> extra(
              above.nodes.data() + above.num_targets, num_extra);
          auto pulled = store->pull(l + 1, extra);
          // historical rows are constants: no gradient flows into the store
          Tensor<T> hist = Tensor<T>::from_data(
              static_cast<std::int64_t>(num_extra), cfg_.hidden,
              pulled.rows);
          if (trace != nullptr)
            trace->pulled.push_back(
                {l + 1,
                 {extra.begin(), extra.end()},
                 {pulled.rows.begin(), pulled.rows.end()}});
          current = concat_rows<T>({vert, hist});
        }
      }
    }

    // ancestor rows per level for the level-0 targets
    const LevelBatch& l0 = batch.levels[0];
    const std::int64_t n0 = l0.num_targets;
    std::vector<Tensor<T>> ancestors;
    std::vector<NodeId> anc(static_cast<std::size_t>(n0));
    for (std::int64_t i = 0; i < n0; ++i) anc[i] = l0.nodes[i];
    for (int l = 0; l <= H; ++l) {
      if (l > 0) {
        const PartitionMapping& phi = hier.mappings[l - 1];
        for (auto& a : anc) a = phi.phi[a];
      }
      const LevelBatch& lb = batch.levels[l];
      std::unordered_map<NodeId, std::int64_t> pos;
      pos.reserve(static_cast<std::size_t>(lb.num_targets));
      for (std::int32_t i = 0; i < lb.num_targets; ++i)
        pos.emplace(lb.nodes[i], i);
      std::vector<std::int64_t> idx(static_cast<std::size_t>(n0));
      for (std::int64_t i = 0; i < n0; ++i) {
        auto it = pos.find(anc[i]);
        require(it != pos.end(),
                "forward_batch: ancestor missing from target closure");
        idx[i] = it->second;
      }
      ancestors.push_back(gather_rows(post[l], std::move(idx)));
    }

    Tensor<T> h0 = slice_rows(post[0], 0, n0);
    Tensor<T> readout = readout_block(h0, ancestors, train, rng);
    return apply_linear(classifier_, readout);
  }

 private:
  struct Linear {
    Parameter<T>* w = nullptr;
    Parameter<T>* b = nullptr;
  };
  struct SelfLayer {
    Parameter<T>*ln1_g, *ln1_b, *ln2_g, *ln2_b;
    Linear q, k, v, o, f1, f2;
    Parameter<T>* spd_bias = nullptr;  // [heads x (max_spd + 1)]
  };
  struct CrossLayer {
    Parameter<T>*lnq_g, *lnq_b, *lnkv_g, *lnkv_b, *ln2_g, *ln2_b;
    Linear q, k, v, o, f1, f2;
  };

  Linear make_linear(const std::string& name, std::int64_t in,
                     std::int64_t out, Rng& rng) {
    Linear l;
    l.w = &params_.create_uniform(name + "/w", in, out, in, rng);
    l.b = &params_.create(name + "/b", 1, out);
    return l;
  }

  Parameter<T>* make_ln(const std::string& name, T init) {
    return &params_.create(name, 1, cfg_.hidden, init);
  }

  SelfLayer make_self_layer(const std::string& p, Rng& rng) {
    const std::int64_t d = cfg_.hidden;
    SelfLayer ly;
    ly.ln1_g = make_ln(p + "/ln1/g", T(1));
    ly.ln1_b = make_ln(p + "/ln1/b", T(0));
    ly.q = make_linear(p + "/attn/q", d, d, rng);
    ly.k = make_linear(p + "/attn/k", d, d, rng);
    ly.v = make_linear(p + "/attn/v", d, d, rng);
    ly.o = make_linear(p + "/attn/o", d, d, rng);
    if (!cfg_.ablations.no_structural)
      ly.spd_bias =
          &params_.create(p + "/attn/spd_bias", cfg_.heads, cfg_.max_spd + 1);
    ly.ln2_g = make_ln(p + "/ln2/g", T(1));
    ly.ln2_b = make_ln(p + "/ln2/b", T(0));
    ly.f1 = make_linear(p + "/ffn/1", d, d * cfg_.ffn_mult, rng);
    ly.f2 = make_linear(p + "/ffn/2", d * cfg_.ffn_mult, d, rng);
    return ly;
  }

  CrossLayer make_cross_layer(const std::string& p, Rng& rng) {
    const std::int64_t d = cfg_.hidden;
    CrossLayer ly;
    ly.lnq_g = make_ln(p + "/lnq/g", T(1));
    ly.lnq_b = make_ln(p + "/lnq/b", T(0));
    ly.lnkv_g = make_ln(p + "/lnkv/g", T(1));
    ly.lnkv_b = make_ln(p + "/lnkv/b", T(0));
    ly.q = make_linear(p + "/attn/q", d, d, rng);
    ly.k = make_linear(p + "/attn/k", d, d, rng);
    ly.v = make_linear(p + "/attn/v", d, d, rng);
    ly.o = make_linear(p + "/attn/o", d, d, rng);
    ly.ln2_g = make_ln(p + "/ln2/g", T(1));
    ly.ln2_b = make_ln(p + "/ln2/b", T(0));
    ly.f1 = make_linear(p + "/ffn/1", d, d * cfg_.ffn_mult, rng);
    ly.f2 = make_linear(p + "/ffn/2", d * cfg_.ffn_mult, d, rng);
    return ly;
  }

  Tensor<T> apply_linear(const Linear& l, const Tensor<T>& x) const {
    return add_bias(matmul(x, l.w->value), l.b->value);
  }

  Tensor<T> ffn_sublayer(Parameter<T>* g, Parameter<T>* b, const Linear& f1,
                         const Linear& f2, Tensor<T> h, bool train,
                         Rng& rng) const {
    Tensor<T> x = layer_norm(h, g->value, b->value);
    Tensor<T> hidden = relu(apply_linear(f1, x));
    hidden = dropout(hidden, cfg_.dropout, rng, train);
    return add(h, apply_linear(f2, hidden));
  }

  Tensor<T> cross_attention(const CrossLayer& ly, const Tensor<T>& queries,
                            const Tensor<T>& kv,
                            std::span<const std::int32_t> offsets, bool train,
                            Rng& rng) const {
    Tensor<T> xq = layer_norm(queries, ly.lnq_g->value, ly.lnq_b->value);
    Tensor<T> xkv = layer_norm(kv, ly.lnkv_g->value, ly.lnkv_b->value);
    Tensor<T> q = apply_linear(ly.q, xq);
    Tensor<T> k = apply_linear(ly.k, xkv);
    Tensor<T> v = apply_linear(ly.v, xkv);
    Tensor<T> a = segment_attention(q, k, v, offsets, cfg_.heads,
                                    cfg_.attn_dropout, rng, train);
    Tensor<T> h = add(queries, apply_linear(ly.o, a));
    return ffn_sublayer(ly.ln2_g, ly.ln2_b, ly.f1, ly.f2, h, train, rng);
  }

  /// Raw feature rows for global node ids at a level, as a constant leaf.
  Tensor<T> features_for(const Hierarchy& hier, int level,
                         std::span<const NodeId> ids) const {
    const FeatureMatrix& x = hier.features[level];
    require(x.cols == cfg_.feature_dim,
            "forward_batch: feature width mismatch at level " +
                std::to_string(level));
    Tensor<T> t = Tensor<T>::zeros(static_cast<std::int64_t>(ids.size()),
                                   x.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double* src = x.row(ids[i]);
      T* dst = t.data() + static_cast<std::int64_t>(i) * x.cols;
      for (std::int64_t j = 0; j < x.cols; ++j) dst[j] = T(src[j]);
    }
    return t;
  }

  ModelConfig cfg_;
  ParamStore<T> params_;
  std::vector<Linear> input_;
  Parameter<T>* degree_table_ = nullptr;
  std::vector<std::vector<SelfLayer>> horizontal_;
  std::vector<CrossLayer> vertical_;
  CrossLayer readout_{};
  Linear readout_concat_{};
  Linear classifier_{};
};

}  // namespace hsgt
