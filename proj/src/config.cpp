#include "hsgt/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hsgt {

using nlohmann::json;

void TrainConfig::validate() const {
  require(epochs >= 0, "config: negative epoch count");
  require(eval_every >= 1, "config: eval_every must be >= 1");
  require(patience >= 1, "config: patience must be >= 1");
  require(!seeds.empty(), "config: at least one seed required");
  require(precision == "double" || precision == "float",
          "config: precision must be `double` or `float`");
  require(full_batch_budget >= 0, "config: negative full-batch budget");
  sampler.validate();
  for (double a : coarsening.ratios)
    require(a > 0.0 && a <= 1.0, "config: ratios must lie in (0, 1]");
  require(optimizer.lr >= 0.0, "config: negative learning rate");
}

namespace {

json model_to_json(const ModelConfig& m) {
  return json{{"hidden", m.hidden},
              {"heads", m.heads},
              {"layers_per_horizontal", m.layers_per_horizontal},
              {"max_spd", m.max_spd},
              {"share_horizontal", m.share_horizontal},
              {"dropout", m.dropout},
              {"attn_dropout", m.attn_dropout},
              {"ffn_mult", m.ffn_mult},
              {"max_degree", m.max_degree},
              {"ablations",
               {{"no_vertical", m.ablations.no_vertical},
                {"no_structural", m.ablations.no_structural},
                {"no_readout", m.ablations.no_readout},
                {"no_historical", m.ablations.no_historical}}}};
}

void model_from_json(const json& j, ModelConfig& m) {
  m.hidden = j.value("hidden", m.hidden);
  m.heads = j.value("heads", m.heads);
  m.layers_per_horizontal =
      j.value("layers_per_horizontal", m.layers_per_horizontal);
  m.max_spd = j.value("max_spd", m.max_spd);
  m.share_horizontal = j.value("share_horizontal", m.share_horizontal);
  m.dropout = j.value("dropout", m.dropout);
  m.attn_dropout = j.value("attn_dropout", m.attn_dropout);
  m.ffn_mult = j.value("ffn_mult", m.ffn_mult);
  m.max_degree = j.value("max_degree", m.max_degree);
  if (j.contains("ablations")) {
    const json& a = j["ablations"];
    m.ablations.no_vertical = a.value("no_vertical", false);
    m.ablations.no_structural = a.value("no_structural", false);
    m.ablations.no_readout = a.value("no_readout", false);
    m.ablations.no_historical = a.value("no_historical", false);
  }
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["model"] = model_to_json(cfg.model);
  j["sampler"] = {{"batch_size", cfg.sampler.batch_size},
                  {"fanout_l0", cfg.sampler.fanout_l0},
                  {"fanout_l0_2hop", cfg.sampler.fanout_l0_2hop},
                  {"fanout_high", cfg.sampler.fanout_high},
                  {"intra_batch_p", cfg.sampler.intra_batch_p},
                  {"full_batch", cfg.sampler.full_batch}};
  j["coarsening"] = {{"ratios", cfg.coarsening.ratios},
                     {"method", coarsen_method_name(cfg.coarsening.method)},
                     {"seed", cfg.coarsening.seed},
                     {"import_dir", cfg.coarsening.import_dir}};
  j["optimizer"] = {{"lr", cfg.optimizer.lr},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"eps", cfg.optimizer.eps},
                    {"weight_decay", cfg.optimizer.weight_decay}};
  j["data"] = {{"format", cfg.data.format},
               {"row_normalize", cfg.data.row_normalize},
               {"split", cfg.data.split},
               {"split_seed", cfg.data.split_seed}};
  j["epochs"] = cfg.epochs;
  j["eval_every"] = cfg.eval_every;
  j["patience"] = cfg.patience;
  j["seeds"] = cfg.seeds;
  j["precision"] = cfg.precision;
  j["full_batch_budget"] = cfg.full_batch_budget;
  j["store_reset_per_epoch"] = cfg.store_reset_per_epoch;
  j["store_warm_start"] = cfg.store_warm_start;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw input_error(std::string("config parse error: ") + e.what());
  }
  TrainConfig cfg;
  if (j.contains("model")) model_from_json(j["model"], cfg.model);
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    cfg.sampler.batch_size = s.value("batch_size", cfg.sampler.batch_size);
    cfg.sampler.fanout_l0 = s.value("fanout_l0", cfg.sampler.fanout_l0);
    cfg.sampler.fanout_l0_2hop =
        s.value("fanout_l0_2hop", cfg.sampler.fanout_l0_2hop);
    cfg.sampler.fanout_high = s.value("fanout_high", cfg.sampler.fanout_high);
    cfg.sampler.intra_batch_p =
        s.value("intra_batch_p", cfg.sampler.intra_batch_p);
    cfg.sampler.full_batch = s.value("full_batch", cfg.sampler.full_batch);
  }
  if (j.contains("coarsening")) {
    const json& c = j["coarsening"];
    if (c.contains("ratios"))
      cfg.coarsening.ratios = c["ratios"].get<std::vector<double>>();
    cfg.coarsening.method =
        parse_coarsen_method(c.value("method", std::string("multilevel")));
    cfg.coarsening.seed = c.value("seed", cfg.coarsening.seed);
    cfg.coarsening.import_dir =
        c.value("import_dir", cfg.coarsening.import_dir);
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    cfg.optimizer.lr = o.value("lr", cfg.optimizer.lr);
    cfg.optimizer.beta1 = o.value("beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = o.value("beta2", cfg.optimizer.beta2);
    cfg.optimizer.eps = o.value("eps", cfg.optimizer.eps);
    cfg.optimizer.weight_decay =
        o.value("weight_decay", cfg.optimizer.weight_decay);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    cfg.data.format = d.value("format", cfg.data.format);
    cfg.data.row_normalize = d.value("row_normalize", cfg.data.row_normalize);
    cfg.data.split = d.value("split", cfg.data.split);
    cfg.data.split_seed = d.value("split_seed", cfg.data.split_seed);
  }
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
  cfg.patience = j.value("patience", cfg.patience);
  if (j.contains("seeds"))
    cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  cfg.precision = j.value("precision", cfg.precision);
  cfg.full_batch_budget = j.value("full_batch_budget", cfg.full_batch_budget);
  cfg.store_reset_per_epoch =
      j.value("store_reset_per_epoch", cfg.store_reset_per_epoch);
  cfg.store_warm_start = j.value("store_warm_start", cfg.store_warm_start);
  // sync the model's SPD horizon with the sampler's
  cfg.sampler.max_spd = cfg.model.max_spd;
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  require(out.good(), "cannot write config: " + path);
  out << train_config_to_json(cfg) << '\n';
}

}  // namespace hsgt
