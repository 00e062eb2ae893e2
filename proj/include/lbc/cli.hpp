#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lbc/checkpoint.hpp"
#include "lbc/config.hpp"
#include "lbc/oracle.hpp"
#include "lbc/train.hpp"

#include <nlohmann/json.hpp>

namespace lbc {

struct EvalArgs {
  std::string model;         // LBC1 checkpoint or NMPK packed file
  std::string mask;          // optional LBCM file applied to a checkpoint
  std::string split = "val"; // "val" | "train" | "full"
};

struct OracleArgs {
  std::string refit = "closed_form";  // "none" | "gradient" | "closed_form"
  std::string table_out;              // optional CSV dump of the loss table
};

struct CompareArgs {
  std::vector<std::string> kinds;  // empty = all criteria
  std::vector<std::uint64_t> seeds;
  std::string out = "compare.csv";
};

namespace cli_detail {

template <typename Real>
std::pair<Dataset<Real>, Dataset<Real>> load_splits(const RunConfig& cfg) {
  const Dataset<Real> full = make_dataset<Real>(cfg);
  return split_dataset(full, 0.1);
}

template <typename Real>
Network<Real> build_network(const RunConfig& cfg) {
  if (cfg.dataset.kind == "planted") return make_planted_network<Real>(cfg);
  return make_network<Real>(cfg.arch);
}

template <typename Real>
int train_impl(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  auto [train_set, val_set] = load_splits<Real>(cfg);

  std::ofstream events(cfg.output_dir + "/events.jsonl");
  if (!events) throw std::runtime_error("cannot open " + cfg.output_dir + "/events.jsonl");
  TrainHooks<Real> hooks;
  hooks.events = &events;

  const TrainResult<Real> result = lbc_train(build_network<Real>(cfg), train_set, val_set, cfg, hooks);

  {
    std::ofstream cfg_out(cfg.output_dir + "/config.json");
    if (!cfg_out) throw std::runtime_error("cannot open " + cfg.output_dir + "/config.json");
    cfg_out << nlohmann::json(cfg).dump(2) << '\n';
  }
  {
    std::ofstream csv(cfg.output_dir + "/metrics.csv");
    if (!csv) throw std::runtime_error("cannot open " + cfg.output_dir + "/metrics.csv");
    csv << metrics_csv_header() << '\n';
    for (const auto& row : result.metrics) csv << metrics_csv_row(row) << '\n';
  }
  save_checkpoint(cfg.output_dir + "/checkpoint.lbc", result.net);
  save_masks(cfg.output_dir + "/mask.lbcm", result.net, result.masks);

  if (!result.constrained) {
    std::cerr << "error: terminal " << cfg.n << ":" << cfg.m
              << " constraint not satisfied at the end of training\n";
    return 1;
  }
  const MetricsRow& last = result.metrics.back();
  std::cout << "epochs " << cfg.epochs << "\nfinal_train_loss " << fmt_full(last.train_loss)
            << "\nfinal_val_loss " << fmt_full(last.val_loss) << "\nval_accuracy "
            << fmt_full(last.val_accuracy) << "\ndensity " << fmt_full(last.density)
            << "\nflops_ratio " << fmt_full(last.flops_ratio) << "\nartifacts " << cfg.output_dir
            << "\n";
  return 0;
}

inline std::string sniff_magic(const std::string& path) {
  auto is = io::open_in(path);
  char magic[4];
  io::get_bytes(is, magic, 4, "magic");
  return std::string(magic, 4);
}

template <typename Real>
int eval_impl(const EvalArgs& args, const RunConfig& cfg) {
  Network<Real> net;
  MaskSet<Real> masks;
  const std::string magic = sniff_magic(args.model);
  if (magic == "NMPK") {
    net = unpack_network(load_packed_network<Real>(args.model));
  } else if (magic == "LBC1") {
    net = load_checkpoint<Real>(args.model);
    if (!args.mask.empty()) {
      masks = load_masks<Real>(args.mask);
      if (masks.size() != net.layers.size()) {
        throw std::runtime_error(args.mask + ": layer count does not match checkpoint");
      }
    }
  } else {
    throw std::runtime_error(args.model + ": unrecognized file magic");
  }

  auto [train_set, val_set] = load_splits<Real>(cfg);
  const Dataset<Real>* ds = &val_set;
  Dataset<Real> full;
  if (args.split == "train") {
    ds = &train_set;
  } else if (args.split == "full") {
    full = make_dataset<Real>(cfg);
    ds = &full;
  } else if (args.split != "val") {
    throw std::invalid_argument("unknown split \"" + args.split + "\" (train|val|full)");
  }
  const EvalResult<Real> r = evaluate(net, masks, *ds, cfg.batch_size);
  std::cout << "samples " << ds->size() << "\nloss " << fmt_full(r.loss) << "\naccuracy "
            << fmt_full(r.accuracy) << "\n";
  return 0;
}

template <typename Real>
int pack_impl(const std::string& checkpoint, const std::string& mask_path, const std::string& out,
              int n, int m) {
  const Network<Real> net = load_checkpoint<Real>(checkpoint);
  const MaskSet<Real> masks = load_masks<Real>(mask_path);
  if (masks.size() != net.layers.size()) {
    throw std::runtime_error(mask_path + ": layer count does not match checkpoint");
  }
  const PackedNetwork<Real> pn = pack_network(net, masks, n, m);
  std::size_t packed_layers = 0;
  for (const auto& pl : pn.layers) {
    if (pl.storage == PackedLayer<Real>::Storage::kPacked) ++packed_layers;
  }
  if (packed_layers == 0) {
    throw std::runtime_error(mask_path + " carries no layer masks; the checkpoint is dense and there is nothing to pack");
  }
  save_packed_network(out, pn);
  std::cout << "packed " << packed_layers << " layer(s) at " << n << ":" << m << " into " << out
            << "\n";
  return 0;
}

template <typename Real>
int oracle_impl(const RunConfig& cfg, const OracleArgs& args) {
  if (cfg.dataset.kind != "planted") {
    throw std::invalid_argument("oracle requires dataset.kind \"planted\"");
  }
  const PlantedLinear<Real> planted =
      make_planted_linear<Real>(cfg.dataset.groups, cfg.n, cfg.m, cfg.dataset.outputs,
                                cfg.dataset.samples, cfg.seed, cfg.dataset.noise_std);
  auto [train_set, val_set] = split_dataset(planted.data, 0.1);

  const TrainResult<Real> result =
      lbc_train(make_planted_network<Real>(cfg), train_set, val_set, cfg);
  if (!result.constrained) {
    std::cerr << "error: training did not reach the terminal constraint\n";
    return 1;
  }
  const CombinationTable table = enumerate_combinations(cfg.n, cfg.m);
  const JointAssignment chosen{selected_combos(result.layers[0].state, table)};

  LinearMaskProblem<Real> problem;
  problem.inputs = train_set.inputs;
  problem.targets = train_set.targets;
  problem.weights = result.net.layers[result.layers[0].layer_id].weight;

  RefitSpec refit;
  if (args.refit == "none") {
    refit.kind = RefitKind::kNone;
  } else if (args.refit == "gradient") {
    refit.kind = RefitKind::kGradientSteps;
  } else if (args.refit == "closed_form") {
    refit.kind = RefitKind::kClosedFormLs;
  } else {
    throw std::invalid_argument("unknown refit \"" + args.refit + "\" (none|gradient|closed_form)");
  }

  const OracleResult oracle = exhaustive_best(problem, result.layers[0].view, table, refit);
  const double pct = rank_of(chosen, oracle.table);

  auto combos_str = [](const std::vector<int>& cs) {
    std::string s;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(cs[i]);
    }
    return s;
  };
  std::cout << "assignments " << oracle.table.size() << "\nselected " << combos_str(chosen.combo_per_group)
            << "\noracle_best " << combos_str(oracle.best.combo_per_group) << "\npercentile "
            << fmt_full(pct) << "\nplanted " << combos_str(planted.planted_combo) << "\n";

  if (!args.table_out.empty()) {
    std::ofstream csv(args.table_out);
    if (!csv) throw std::runtime_error("cannot open " + args.table_out);
    csv << "rank,assignment,loss\n";
    for (std::size_t i = 0; i < oracle.table.size(); ++i) {
      csv << i << ',' << combos_str(oracle.table[i].assignment.combo_per_group) << ','
          << fmt_full(oracle.table[i].loss) << '\n';
    }
  }
  return 0;
}

template <typename Real>
int compare_impl(const RunConfig& cfg, const CompareArgs& args) {
  std::vector<CriterionKind> kinds;
  if (args.kinds.empty()) {
    kinds = {CriterionKind::kLbcScore, CriterionKind::kMagnitude, CriterionKind::kTaylorGradient,
             CriterionKind::kRandom, CriterionKind::kLbcScoreInverse};
  } else {
    for (const auto& name : args.kinds) kinds.push_back(parse_criterion(name));
  }
  std::vector<std::uint64_t> seeds = args.seeds;
  if (seeds.empty()) seeds = {0, 1, 2, 3, 4};

  auto [train_set, val_set] = cli_detail::load_splits<Real>(cfg);
  const auto factory = [&cfg]() { return build_network<Real>(cfg); };
  const std::vector<ComparisonRow> rows =
      run_comparison<Real>(factory, train_set, val_set, cfg, kinds, seeds);

  std::ofstream csv(args.out);
  if (!csv) throw std::runtime_error("cannot open " + args.out);
  csv << comparison_csv_header() << '\n';
  for (const auto& row : rows) csv << comparison_csv_row(row) << '\n';

  for (CriterionKind kind : kinds) {
    std::vector<double> losses;
    for (const auto& row : rows) {
      if (row.kind == kind) losses.push_back(row.final_val_loss);
    }
    std::cout << criterion_name(kind) << " median_val_loss " << fmt_full(median(losses)) << "\n";
  }
  std::cout << "rows " << rows.size() << "\nwrote " << args.out << "\n";
  return 0;
}

}  // namespace cli_detail

inline int cmd_train(const RunConfig& cfg) {
  return cfg.precision == 64 ? cli_detail::train_impl<double>(cfg) : cli_detail::train_impl<float>(cfg);
}

inline int cmd_eval(const EvalArgs& args, const RunConfig& cfg) {
  const std::size_t width = peek_scalar_width(args.model);
  return width == 8 ? cli_detail::eval_impl<double>(args, cfg) : cli_detail::eval_impl<float>(args, cfg);
}

inline int cmd_pack(const std::string& checkpoint, const std::string& mask, const std::string& out,
                    int n, int m) {
  const std::size_t width = peek_scalar_width(checkpoint);
  return width == 8 ? cli_detail::pack_impl<double>(checkpoint, mask, out, n, m)
                    : cli_detail::pack_impl<float>(checkpoint, mask, out, n, m);
}

inline int cmd_oracle(const RunConfig& cfg, const OracleArgs& args) {
  return cfg.precision == 64 ? cli_detail::oracle_impl<double>(cfg, args)
                             : cli_detail::oracle_impl<float>(cfg, args);
}

inline int cmd_compare(const RunConfig& cfg, const CompareArgs& args) {
  return cfg.precision == 64 ? cli_detail::compare_impl<double>(cfg, args)
                             : cli_detail::compare_impl<float>(cfg, args);
}

inline int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Dataset<float> ds = make_dataset<float>(cfg);
  save_dataset_dir(out_dir, ds, cfg.dataset.kind, cfg.seed);
  std::cout << "samples " << ds.size() << "\nwrote " << out_dir << "\n";
  return 0;
}

/// Rebuilds the FLOPs model from a run's event log and cross-checks the
/// stored ratio against a recomputation from the per-epoch density rows.
inline int cmd_report(const std::string& run_dir) {
  std::ifstream is(run_dir + "/events.jsonl");
  if (!is) throw std::runtime_error("cannot open " + run_dir + "/events.jsonl");

  FlopsModel model;
  nlohmann::json run_end;
  std::size_t epochs = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json ev;
    try {
      ev = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(run_dir + "/events.jsonl: " + e.what());
    }
    const std::string kind = ev.at("event").get<std::string>();
    if (kind == "run_start") {
      for (const auto& jl : ev.at("layers")) {
        model.layer_forward_flops.push_back(jl.at("forward_macs").get<double>());
      }
    } else if (kind == "epoch") {
      std::vector<double> row;
      for (const auto& jl : ev.at("layers")) row.push_back(jl.at("density").get<double>());
      model.density.push_back(row);
      ++epochs;
    } else if (kind == "run_end") {
      run_end = ev;
    }
  }
  if (run_end.is_null()) throw std::runtime_error(run_dir + ": event log has no run_end record");

  const double recomputed = train_flops_ratio(model);
  const double stored = run_end.at("flops_ratio").get<double>();
  std::cout << "epochs " << epochs << "\nfinal_train_loss "
            << fmt_full(run_end.at("final_train_loss").get<double>()) << "\nfinal_val_loss "
            << fmt_full(run_end.at("final_val_loss").get<double>()) << "\nval_accuracy "
            << fmt_full(run_end.at("final_val_accuracy").get<double>()) << "\ndensity "
            << fmt_full(run_end.at("density").get<double>()) << "\nconstrained "
            << (run_end.at("constrained").get<bool>() ? "yes" : "no") << "\nflops_ratio "
            << fmt_full(stored) << "\nflops_ratio_recomputed " << fmt_full(recomputed) << "\n";
  if (std::abs(recomputed - stored) > 1e-12 * std::max(1.0, std::abs(stored))) {
    std::cerr << "error: recomputed FLOPs ratio disagrees with the run log\n";
    return 1;
  }
  return 0;
}

}  // namespace lbc
