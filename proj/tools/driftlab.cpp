// driftlab command line front end.
//
//   driftlab pretrain        --config run.cfg [--out dir] [--seed N] [--no-intervention]
//   driftlab eval            --config run.cfg --checkpoint ckpt.rcpk [--out dir]
//   driftlab ablate-window   --config run.cfg [--out dir] [--seed N]
//   driftlab export-features --config run.cfg --checkpoint ckpt.rcpk --out dir
//   driftlab selftest
//
// Exit codes: 0 ok, 2 config error, 3 training error, 4 checkpoint error,
// 5 I/O error.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "driftlab/checkpoint.hpp"
#include "driftlab/runner.hpp"
#include "driftlab/tensor_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitIo = 5;

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  bool no_intervention = false;
};

driftlab::cli::RunConfig load(const CommonOpts& o) {
  driftlab::cli::RunConfig cfg = driftlab::cli::load_config(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.no_intervention) cfg.intervention = false;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive pretraining on drifting streams"};
  app.require_subcommand(1);

  CommonOpts o;
  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", o.config_path, "run configuration file");
    if (needs_config) c->required();
    cmd->add_option("--out", o.out, "output directory (overrides io.out_dir)");
    cmd->add_option("--seed", o.seed, "root seed (overrides the config)");
    return cmd;
  };

  auto* pre = add_common(app.add_subcommand("pretrain", "train and write a checkpoint"), true);
  pre->add_flag("--no-intervention", o.no_intervention,
                "plain momentum-contrast baseline at matched budget");
  auto* ev = add_common(app.add_subcommand("eval", "evaluate a checkpoint"), true);
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint to evaluate");
  auto* ab = add_common(app.add_subcommand("ablate-window", "sweep the window size"), true);
  auto* ex = add_common(app.add_subcommand("export-features", "write features + labels"), true);
  ex->add_option("--checkpoint", o.checkpoint, "checkpoint to load")->required();
  app.add_subcommand("selftest", "run the invariant battery");

  CLI11_PARSE(app, argc, argv);

  using namespace driftlab;
  try {
    if (app.got_subcommand("selftest")) {
      return cli::run_selftest(std::cout) == 0 ? 0 : 1;
    }
    cli::RunConfig cfg = load(o);
    const std::string out_dir = cfg.out_dir;
    if (pre->parsed()) {
      cli::PretrainOutcome r = cli::run_pretrain(cfg, out_dir);
      std::cout << "checkpoint: " << r.checkpoint_path << "\n"
                << "trace:      " << r.trace_path << "\n"
                << "final loss: " << (r.trace.empty() ? 0.0 : r.trace.back().loss) << "\n";
    } else if (ev->parsed()) {
      if (cfg.checkpoint.empty())
        throw cli::ConfigError("config: eval needs --checkpoint or io.checkpoint");
      cli::EvalOutcome r = cli::run_eval(cfg, cfg.checkpoint, out_dir);
      std::cout << "probe top-1 (all):    " << r.probe.top1.all << "\n"
                << "intra angle (all):    " << r.angles.intra.all << "\n"
                << "auroc:                " << r.ood.auroc << "\n"
                << "fpr at 95% tpr:       " << r.ood.fpr_at_tpr95 << "\n";
    } else if (ab->parsed()) {
      std::vector<std::size_t> windows = cfg.ablate_windows;
      if (windows.empty()) windows = {64, 256, 1024};
      auto rows = cli::run_ablate(cfg, windows, cfg.ablate_seeds, out_dir);
      for (const auto& row : rows)
        std::cout << "window " << row.window << ": all " << row.all << "\n";
    } else if (ex->parsed()) {
      cli::run_export_features(cfg, cfg.checkpoint, out_dir);
      std::cout << "wrote " << out_dir << "/features.rcpt and labels.rcpt\n";
    }
    return 0;
  } catch (const cli::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const rcp::TrainingError& e) {
    std::cerr << "training: " << e.what() << "\n";
    return kExitTraining;
  } catch (const io::CheckpointError& e) {
    std::cerr << "checkpoint: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const io::FormatError& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kExitIo;
  } catch (const io::IoError& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io: " << e.what() << "\n";
    return kExitIo;
  } catch (const ContractError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
