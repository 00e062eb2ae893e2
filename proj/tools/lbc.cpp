// Command-line front end: train / eval / pack / oracle / compare / report /
// gen-data. Scalar config keys can be overridden one-to-one by flags.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lbc/cli.hpp"
#include "lbc/config.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace {

struct ConfigCli {
  std::string config_path;
  std::optional<int> n, m, precision;
  std::optional<std::size_t> epochs, removal_begin, removal_end, warmup_epochs, batch_size;
  std::optional<double> base_lr, score_lr, momentum, weight_decay;
  std::optional<std::string> criterion, output_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> exempt;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_path, "JSON run config; defaults used when omitted");
    app.add_option("--n", n, "survivors per group");
    app.add_option("--m", m, "group width");
    app.add_option("--epochs", epochs, "training epochs");
    app.add_option("--removal-begin-epoch", removal_begin, "first epoch of the removal window");
    app.add_option("--removal-end-epoch", removal_end, "last epoch of the removal window");
    app.add_option("--base-lr", base_lr, "peak weight learning rate");
    app.add_option("--score-lr", score_lr, "score learning rate");
    app.add_option("--momentum", momentum, "SGD momentum");
    app.add_option("--weight-decay", weight_decay, "SGD weight decay");
    app.add_option("--warmup-epochs", warmup_epochs, "linear warmup epochs");
    app.add_option("--batch-size", batch_size, "minibatch size");
    app.add_option("--criterion", criterion,
                   "lbc_score|lbc_score_inverse|magnitude|taylor_gradient|random");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--precision", precision, "32 or 64");
    app.add_option("--output-dir", output_dir, "artifact directory");
    app.add_option("--exempt", exempt, "layer names excluded from sparsification");
  }

  lbc::RunConfig resolve() const {
    lbc::RunConfig cfg;
    if (!config_path.empty()) cfg = lbc::load_config(config_path);
    if (n) cfg.n = *n;
    if (m) cfg.m = *m;
    if (epochs) cfg.epochs = *epochs;
    if (removal_begin) cfg.removal_begin_epoch = *removal_begin;
    if (removal_end) cfg.removal_end_epoch = *removal_end;
    if (base_lr) cfg.base_lr = *base_lr;
    if (score_lr) cfg.score_lr = *score_lr;
    if (momentum) cfg.momentum = *momentum;
    if (weight_decay) cfg.weight_decay = *weight_decay;
    if (warmup_epochs) cfg.warmup_epochs = *warmup_epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (criterion) cfg.criterion = lbc::parse_criterion(*criterion);
    if (seed) cfg.seed = *seed;
    if (precision) cfg.precision = *precision;
    if (output_dir) cfg.output_dir = *output_dir;
    if (!exempt.empty()) cfg.exempt_layers = exempt;
    lbc::validate(cfg);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"N:M sparsity laboratory: learnable combination selection, "
               "baseline criteria, brute-force oracle, packed compute"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train under gradual candidate removal");
  ConfigCli train_cfg;
  train_cfg.attach(*train);
  bool dump_defaults = false;
  train->add_flag("--dump-defaults", dump_defaults, "print the default config as JSON and exit");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or packed file");
  ConfigCli eval_cfg;
  eval_cfg.attach(*eval);
  lbc::EvalArgs eval_args;
  eval->add_option("model", eval_args.model, "checkpoint (.lbc) or packed (.nmpk) file")->required();
  eval->add_option("--mask", eval_args.mask, "mask file applied to a checkpoint");
  eval->add_option("--split", eval_args.split, "train|val|full (default val)");

  // pack
  auto* pack = app.add_subcommand("pack", "pack a constrained checkpoint");
  ConfigCli pack_cfg;
  pack_cfg.attach(*pack);
  std::string pack_checkpoint, pack_mask, pack_out;
  pack->add_option("checkpoint", pack_checkpoint, "trained checkpoint")->required();
  pack->add_option("mask", pack_mask, "mask file")->required();
  pack->add_option("out", pack_out, "output packed file")->required();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exhaustive search on a planted problem");
  ConfigCli oracle_cfg;
  oracle_cfg.attach(*oracle);
  lbc::OracleArgs oracle_args;
  oracle->add_option("--refit", oracle_args.refit, "none|gradient|closed_form");
  oracle->add_option("--table-out", oracle_args.table_out, "CSV dump of the full loss table");

  // compare
  auto* compare = app.add_subcommand("compare", "criteria comparison grid");
  ConfigCli compare_cfg;
  compare_cfg.attach(*compare);
  lbc::CompareArgs compare_args;
  compare->add_option("--kinds", compare_args.kinds, "criteria to run (default: all)");
  compare->add_option("--seeds", compare_args.seeds, "seeds to run (default: 0..4)");
  compare->add_option("--out", compare_args.out, "results CSV path");

  // report
  auto* report = app.add_subcommand("report", "summarize a finished run directory");
  std::string report_dir;
  report->add_option("dir", report_dir, "run directory with events.jsonl")->required();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a dataset directory (IDX + manifest)");
  ConfigCli gen_cfg;
  gen_cfg.attach(*gen);
  std::string gen_out;
  gen->add_option("out", gen_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (dump_defaults) {
        std::cout << nlohmann::json(lbc::RunConfig{}).dump(2) << "\n";
        return 0;
      }
      return lbc::cmd_train(train_cfg.resolve());
    }
    if (eval->parsed()) return lbc::cmd_eval(eval_args, eval_cfg.resolve());
    if (pack->parsed()) {
      const lbc::RunConfig cfg = pack_cfg.resolve();
      return lbc::cmd_pack(pack_checkpoint, pack_mask, pack_out, cfg.n, cfg.m);
    }
    if (oracle->parsed()) return lbc::cmd_oracle(oracle_cfg.resolve(), oracle_args);
    if (compare->parsed()) return lbc::cmd_compare(compare_cfg.resolve(), compare_args);
    if (report->parsed()) return lbc::cmd_report(report_dir);
    if (gen->parsed()) return lbc::cmd_gen_data(gen_cfg.resolve(), gen_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no command\n";
  return 1;
}
