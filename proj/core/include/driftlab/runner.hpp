#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "driftlab/config.hpp"
#include "driftlab/eval.hpp"
#include "driftlab/rcp.hpp"

namespace driftlab::cli {

inline constexpr const char* kArtifactVersion = "driftlab 0.1.0";

/// Builds the deterministic pretraining setup a config describes. The source
/// model, schedule, and every Rng stream descend from the config seed, so
/// pretraining and evaluation reconstruct identical worlds independently.
rcp::PretrainSetup make_setup(const RunConfig& cfg);

struct PretrainOutcome {
  model::ParamPair pair;
  std::vector<rcp::TraceRow> trace;
  std::string checkpoint_path;
  std::string trace_path;
  std::string manifest_path;
};

/// Runs pretraining and writes checkpoint + loss trace + manifest under
/// out_dir. Deterministic for a fixed (config, seed).
PretrainOutcome run_pretrain(const RunConfig& cfg, const std::string& out_dir);

struct EvalOutcome {
  eval::AngleReport angles;
  eval::ProbeReport probe;
  eval::OodReport ood;
};

/// Frozen-encoder evaluation battery: split-wise linear probe, angle
/// metrics, OOD detection. Pure function of (pair, config).
EvalOutcome evaluate_pair(const model::ParamPair& pair, const RunConfig& cfg);

/// Loads the checkpoint, evaluates, and writes CSV/JSON reports + manifest.
EvalOutcome run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& out_dir);

struct AblateRow {
  std::size_t window;
  double many, medium, few, all;
};

/// One pretrain+eval per (window, seed); rows carry the per-window median
/// across seeds. Respects DRIFTLAB_THREADS for worker parallelism.
std::vector<AblateRow> run_ablate(const RunConfig& cfg, const std::vector<std::size_t>& windows,
                                  std::size_t seeds, const std::string& out_dir);

/// Features + labels written in the tensor-file format for external plotting.
void run_export_features(const RunConfig& cfg, const std::string& checkpoint_path,
                         const std::string& out_path);

/// Invariant battery (gradient checks, EMA decay, closed forms, metric
/// oracles, stream witnesses). Prints one line per property; returns the
/// number of failures. `inject_fault` exists for the test fixture that
/// proves a broken kernel is caught.
int run_selftest(std::ostream& os, const std::string& inject_fault = "");

}  // namespace driftlab::cli
