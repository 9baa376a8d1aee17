// Command-line driver: dataset generation, coarsening, training,
// evaluation, gradient checking, ablations, and parameter sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hsgt/checkpoint.hpp"
#include "hsgt/gradcheck.hpp"
#include "hsgt/pipeline.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace hsgt;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << text;
}

template <typename T>
void train_and_persist(const TrainConfig& cfg, const LabeledDataset& ds,
                       const std::string& out_dir) {
  std::vector<RunSummary> rows;
  RunSummary summary;
  summary.name = "train";
  for (std::uint64_t seed : cfg.seeds) {
    auto result = train_one<T>(cfg, ds, seed);
    const std::string seed_dir = out_dir + "/seed_" + std::to_string(seed);
    fs::create_directories(seed_dir);
    save_parameters(seed_dir + "/model.ckpt", result.model->params());
    result.store.save(seed_dir + "/store.ckpt");
    save_train_config(seed_dir + "/config.json", cfg);
    write_text(seed_dir + "/metrics.json", metrics_to_json(result.report));
    summary.per_seed_acc.push_back(result.report.test_acc);
    summary.param_count = result.report.param_count;
    summary.seconds += result.report.seconds_total;
    std::printf("seed %llu: test_acc=%.4f best_valid=%.4f (%.1fs)\n",
                static_cast<unsigned long long>(seed),
                result.report.test_acc, result.report.best_valid,
                result.report.seconds_total);
    if (seed == cfg.seeds.front())
      write_hierarchy_files(out_dir + "/hierarchy", result.hierarchy);
  }
  double n = static_cast<double>(summary.per_seed_acc.size());
  for (double a : summary.per_seed_acc) summary.acc_mean += a;
  summary.acc_mean /= n;
  for (double a : summary.per_seed_acc)
    summary.acc_std += (a - summary.acc_mean) * (a - summary.acc_mean);
  summary.acc_std = n > 1 ? std::sqrt(summary.acc_std / (n - 1)) : 0.0;
  rows.push_back(summary);
  write_text(out_dir + "/summary.json", summaries_to_json(rows));
  const std::string table = format_summary_table(rows);
  write_text(out_dir + "/summary.txt", table);
  std::fputs(table.c_str(), stdout);
}

template <typename T>
int eval_checkpoint(const std::string& ckpt_dir, const std::string& data_dir,
                    const std::string& split_name_str) {
  TrainConfig cfg = load_train_config(ckpt_dir + "/config.json");
  LabeledDataset ds = load_dataset_for_config(cfg, data_dir);
  resolve_config(cfg, ds);
  Hierarchy h = build_hierarchy(ds, cfg.coarsening.ratios,
                                cfg.coarsening.method, cfg.coarsening.seed,
                                cfg.coarsening.import_dir);
  HsgtModel<T> model(cfg.model, cfg.seeds.front());
  load_parameters(ckpt_dir + "/model.ckpt", model.params());
  std::vector<NodeId> sizes;
  for (int l = 1; l <= h.levels(); ++l)
    sizes.push_back(h.graphs[l].num_nodes());
  HistoricalStore<T> store(sizes, cfg.model.hidden);
  if (fs::exists(ckpt_dir + "/store.ckpt"))
    store.load(ckpt_dir + "/store.ckpt");
  double acc = evaluate(model, store, h, ds, parse_split(split_name_str),
                        cfg.sampler);
  std::printf("%s accuracy: %.4f\n", split_name_str.c_str(), acc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  pin_blas_coretype(argv);
#if defined(_OPENMP)
  if (deterministic_mode()) omp_set_num_threads(1);
#endif

  CLI::App app{"Hierarchical graph transformer pipeline"};
  app.require_subcommand(1);

  // --- gen-sbm ---
  auto* gen = app.add_subcommand("gen-sbm", "Generate an SBM dataset dir");
  int blocks = 4, nodes_per_block = 100;
  double p_in = 0.1, p_out = 0.005, noise = 0.5;
  std::uint64_t gen_seed = 1, split_seed = 7;
  std::string gen_out, gen_split = "random-118";
  gen->add_option("--blocks", blocks);
  gen->add_option("--nodes-per-block", nodes_per_block);
  gen->add_option("--p-in", p_in);
  gen->add_option("--p-out", p_out);
  gen->add_option("--noise", noise);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--split", gen_split, "random-118 | none");
  gen->add_option("--split-seed", split_seed);
  gen->add_option("--out", gen_out)->required();

  // --- coarsen ---
  auto* coarsen_cmd =
      app.add_subcommand("coarsen", "Build and export a graph hierarchy");
  std::string c_input, c_out, c_ratios = "0.05", c_method = "multilevel";
  std::string c_format = "generic", c_import;
  bool c_norm = false;
  std::uint64_t c_seed = 1;
  coarsen_cmd->add_option("--input", c_input)->required();
  coarsen_cmd->add_option("--ratios", c_ratios);
  coarsen_cmd->add_option("--method", c_method);
  coarsen_cmd->add_option("--seed", c_seed);
  coarsen_cmd->add_option("--format", c_format);
  coarsen_cmd->add_flag("--row-normalize", c_norm);
  coarsen_cmd->add_option("--import-dir", c_import);
  coarsen_cmd->add_option("--out", c_out)->required();

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "Train on a dataset dir");
  std::string t_config, t_data, t_out, t_dump;
  train_cmd->add_option("--config", t_config)->required();
  train_cmd->add_option("--data", t_data)->required();
  train_cmd->add_option("--out", t_out)->required();
  train_cmd->add_option("--dump-batches", t_dump);

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string e_ckpt, e_data, e_split = "test";
  eval_cmd->add_option("--checkpoint", e_ckpt)->required();
  eval_cmd->add_option("--data", e_data)->required();
  eval_cmd->add_option("--split", e_split);

  // --- gradcheck ---
  auto* gc_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  bool gc_full = false;
  std::uint64_t gc_seed = 1;
  gc_cmd->add_flag("--full-model", gc_full);
  gc_cmd->add_option("--seed", gc_seed);

  // --- ablate ---
  auto* ab_cmd = app.add_subcommand("ablate", "Run ablation variants");
  std::string a_config, a_data, a_out, a_variants;
  ab_cmd->add_option("--config", a_config)->required();
  ab_cmd->add_option("--data", a_data)->required();
  ab_cmd->add_option("--variants", a_variants,
                     "comma list; empty = baseline only");
  ab_cmd->add_option("--out", a_out);

  // --- sweep ---
  auto* sw_cmd = app.add_subcommand("sweep", "Parameter sweep");
  std::string s_config, s_data, s_axis, s_out;
  std::vector<std::string> s_values;
  sw_cmd->add_option("--config", s_config)->required();
  sw_cmd->add_option("--data", s_data)->required();
  sw_cmd->add_option("--axis", s_axis, "ratios | p")->required();
  sw_cmd->add_option("--values", s_values)->required()->expected(-1);
  sw_cmd->add_option("--out", s_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      LabeledDataset ds = generate_sbm(blocks, nodes_per_block, p_in, p_out,
                                       noise, gen_seed);
      if (gen_split == "random-118") split_random_118(ds, split_seed);
      write_dataset(gen_out, ds);
      std::printf("wrote %s: %d nodes, %lld edges, %d classes\n",
                  gen_out.c_str(), ds.graph.num_nodes(),
                  static_cast<long long>(ds.graph.num_edges()),
                  ds.num_classes);
    } else if (*coarsen_cmd) {
      auto ingest =
          ingest_dataset(c_input, parse_dataset_format(c_format), c_norm);
      Hierarchy h =
          build_hierarchy(ingest.ds, parse_ratio_list(c_ratios),
                          parse_coarsen_method(c_method), c_seed, c_import);
      write_hierarchy_files(c_out, h);
      for (int l = 0; l <= h.levels(); ++l)
        std::printf("level %d: %d nodes, %lld edges\n", l,
                    h.graphs[l].num_nodes(),
                    static_cast<long long>(h.graphs[l].num_edges()));
    } else if (*train_cmd) {
      TrainConfig cfg = load_train_config(t_config);
      cfg.dump_batches_dir = t_dump;
      LabeledDataset ds = load_dataset_for_config(cfg, t_data);
      fs::create_directories(t_out);
      if (cfg.precision == "float")
        train_and_persist<float>(cfg, ds, t_out);
      else
        train_and_persist<double>(cfg, ds, t_out);
    } else if (*eval_cmd) {
      TrainConfig cfg = load_train_config(e_ckpt + "/config.json");
      if (cfg.precision == "float")
        return eval_checkpoint<float>(e_ckpt, e_data, e_split);
      return eval_checkpoint<double>(e_ckpt, e_data, e_split);
    } else if (*gc_cmd) {
      bool ok = true;
      for (const auto& r : gradcheck_ops(gc_seed)) {
        bool pass = r.max_rel_err < 1e-5;
        ok = ok && pass;
        std::printf("%-32s max_rel_err=%.3e %s\n", r.name.c_str(),
                    r.max_rel_err, pass ? "ok" : "FAIL");
      }
      if (gc_full) {
        auto r = gradcheck_full_model(gc_seed);
        bool pass = r.max_rel_err < 1e-5;
        ok = ok && pass;
        std::printf("%-32s max_rel_err=%.3e %s\n", r.name.c_str(),
                    r.max_rel_err, pass ? "ok" : "FAIL");
      }
      return ok ? 0 : 2;
    } else if (*ab_cmd) {
      TrainConfig cfg = load_train_config(a_config);
      LabeledDataset ds = load_dataset_for_config(cfg, a_data);
      std::vector<std::string> variants;
      std::istringstream ss(a_variants);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) variants.push_back(item);
      auto rows = ablate(cfg, ds, variants);
      const std::string table = format_summary_table(rows);
      std::fputs(table.c_str(), stdout);
      if (!a_out.empty()) {
        fs::create_directories(a_out);
        write_text(a_out + "/ablation.json", summaries_to_json(rows));
        write_text(a_out + "/ablation.txt", table);
      }
    } else if (*sw_cmd) {
      TrainConfig cfg = load_train_config(s_config);
      LabeledDataset ds = load_dataset_for_config(cfg, s_data);
      std::vector<RunSummary> rows;
      if (s_axis == "ratios") {
        rows = sweep_ratios(cfg, ds, s_values);
      } else if (s_axis == "p") {
        std::vector<double> vals;
        for (const auto& v : s_values) vals.push_back(std::stod(v));
        rows = sweep_p(cfg, ds, vals);
      } else {
        throw input_error("unknown sweep axis: " + s_axis);
      }
      const std::string table = format_summary_table(rows);
      std::fputs(table.c_str(), stdout);
      if (!s_out.empty()) {
        fs::create_directories(s_out);
        write_text(s_out + "/sweep.json", summaries_to_json(rows));
        write_text(s_out + "/sweep.txt", table);
      }
    }
  } catch (const input_error& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 1;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
