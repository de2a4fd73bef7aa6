#include "driftlab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "driftlab/checkpoint.hpp"
#include "driftlab/tensor_io.hpp"

namespace driftlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw io::IoError("cannot open for write: " + tmp);
    os << contents;
    if (!os) throw io::IoError("write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

stream::MeanTransform make_transform(const RunConfig& cfg) {
  stream::MeanTransform tf;
  if (cfg.transform == "identity") {
    tf.kind = stream::TransformKind::kIdentity;
  } else if (cfg.transform == "negate") {
    tf.kind = stream::TransformKind::kNegate;
  } else {
    tf.kind = stream::TransformKind::kShift;
    if (cfg.shift.size() != cfg.dim)
      throw ConfigError("config: stream.shift length must equal stream.dim");
    tf.shift = Tensor::row(cfg.shift);
  }
  return tf;
}

struct World {
  stream::SourceModel source;
  stream::DriftSchedule schedule;
};

World make_world(const RunConfig& cfg) {
  Rng root(cfg.seed);
  World w;
  w.source = stream::make_orthogonal_source(cfg.classes, cfg.dim, cfg.sigma, cfg.ood_classes,
                                            cfg.radius, root.child("source"));
  auto& s = w.schedule;
  if (cfg.stream_kind == "stationary") {
    s.kind = stream::DriftKind::kStationary;
  } else if (cfg.stream_kind == "tailed") {
    s.kind = stream::DriftKind::kTailed;
    s.imbalance_ratio = cfg.imbalance_ratio;
    s.ramp_steps = cfg.ramp_steps > 0 ? cfg.ramp_steps : std::max<std::uint64_t>(1, cfg.steps / 4);
  } else if (cfg.stream_kind == "sudden") {
    s.kind = stream::DriftKind::kSudden;
    s.switch_step = cfg.switch_step;
    s.post_transform = make_transform(cfg);
  } else {
    s.kind = stream::DriftKind::kGradual;
    s.start_step = cfg.grad_start;
    s.end_step = cfg.grad_end > 0 ? cfg.grad_end : std::max<std::uint64_t>(cfg.grad_start + 1, cfg.steps);
    stream::MeanTransform tf = make_transform(cfg);
    s.target_means = w.source.means;
    if (tf.kind == stream::TransformKind::kNegate) {
      for (double& v : s.target_means.vec()) v = -v;
    } else if (tf.kind == stream::TransformKind::kShift) {
      for (std::size_t r = 0; r < s.target_means.rows(); ++r)
        for (std::size_t c = 0; c < s.target_means.cols(); ++c)
          s.target_means.at(r, c) += tf.shift.at(0, c);
    }
  }
  s.validate(cfg.steps);
  return w;
}

json manifest_base(const RunConfig& cfg, const std::string& start) {
  json m;
  m["config_hash"] = cfg.content_hash();
  m["seed"] = cfg.seed;
  m["version"] = kArtifactVersion;
  m["started"] = start;
  return m;
}

void finish_manifest(json& m, const std::string& path, std::vector<std::string> files) {
  m["finished"] = timestamp_utc();
  files.push_back(path);
  m["files"] = files;
  write_atomic(path, m.dump(2) + "\n");
}

}  // namespace

rcp::PretrainSetup make_setup(const RunConfig& cfg) {
  cfg.validate();
  World w = make_world(cfg);
  rcp::PretrainSetup setup;
  setup.source = std::move(w.source);
  setup.schedule = std::move(w.schedule);
  setup.aug = {cfg.noise_sigma, cfg.scale_lo, cfg.scale_hi, cfg.mask_prob};
  setup.encoder.layer_widths = {cfg.dim};
  for (auto wdt : cfg.encoder) setup.encoder.layer_widths.push_back(wdt);
  setup.head = {setup.encoder.output_width(), cfg.head_hidden};
  setup.momentum = cfg.momentum;
  setup.window = {cfg.window_size, cfg.temperature, cfg.qk_scale, cfg.intervention};
  setup.optim.base_lr = cfg.base_lr;
  setup.optim.beta1 = cfg.beta1;
  setup.optim.beta2 = cfg.beta2;
  setup.optim.weight_decay = cfg.weight_decay;
  setup.optim.total_steps = std::max<std::uint64_t>(1, cfg.steps);
  setup.optim.warmup_steps = (std::uint64_t)((double)cfg.steps * cfg.warmup_frac);
  setup.steps = cfg.steps;
  setup.seed = cfg.seed;
  setup.config_hash = cfg.content_hash();
  return setup;
}

PretrainOutcome run_pretrain(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string start = timestamp_utc();
  rcp::PretrainSetup setup = make_setup(cfg);

  std::vector<std::string> files;
  const std::string ckpt_path = out_dir + "/checkpoint.rcpk";
  setup.checkpoint_every = cfg.checkpoint_every;
  setup.checkpoint_hook = [&](std::uint64_t step, const model::ParamPair& pair) {
    if (step == cfg.steps) {
      io::save_checkpoint(ckpt_path, pair);
    } else {
      char name[64];
      std::snprintf(name, sizeof name, "/checkpoint_%08llu.rcpk", (unsigned long long)step);
      const std::string p = out_dir + name;
      io::save_checkpoint(p, pair);
      files.push_back(p);
    }
  };

  rcp::PretrainResult result = rcp::pretrain(setup);

  const std::string trace_path = out_dir + "/trace.csv";
  {
    std::ostringstream os;
    os << "step,loss,lr,lambda,window\n";
    for (const auto& r : result.trace) {
      char line[160];
      std::snprintf(line, sizeof line, "%llu,%.17g,%.17g,%.17g,%zu\n",
                    (unsigned long long)r.step, r.loss, r.lr, r.lambda, r.window);
      os << line;
    }
    write_atomic(trace_path, os.str());
  }
  files.push_back(ckpt_path);
  files.push_back(trace_path);

  json m = manifest_base(cfg, start);
  m["command"] = "pretrain";
  m["metrics"]["steps"] = result.trace.size();
  m["metrics"]["final_loss"] = result.trace.empty() ? 0.0 : result.trace.back().loss;
  const std::string manifest_path = out_dir + "/manifest.json";
  finish_manifest(m, manifest_path, files);

  return {std::move(result.pair), std::move(result.trace), ckpt_path, trace_path, manifest_path};
}

EvalOutcome evaluate_pair(const model::ParamPair& pair, const RunConfig& cfg) {
  World w = make_world(cfg);
  Rng root(cfg.seed);
  Rng er = root.child("eval");

  if (cfg.probe_train == 0 || cfg.probe_test_per_class == 0)
    throw ConfigError("config: eval dataset sizes must be positive");

  // Probe training set: drawn from the drifted distribution at the end of
  // the run, so class counts reflect the tail profile.
  stream::StreamBatch train = stream::sample_batch(w.source, w.schedule, cfg.steps,
                                                   cfg.probe_train, er.child("probe_train"));

  // Balanced test set, equal draws per class from the base mixture.
  const std::size_t per = cfg.probe_test_per_class;
  const std::size_t C = cfg.classes;
  Tensor test_x({C * per, cfg.dim});
  std::vector<int> test_y(C * per);
  for (std::size_t c = 0; c < C; ++c) {
    Rng rc = er.child("test").child(c);
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t row = c * per + i;
      test_y[row] = (int)c;
      for (std::size_t k = 0; k < cfg.dim; ++k)
        test_x.at(row, k) = w.source.means.at(c, k) + w.source.sigma * rc.gaussian();
    }
  }

  Tensor ood_x = stream::sample_ood(w.source, cfg.ood_samples, er.child("ood"));

  Tensor train_f = eval::extract_features(pair, train.features);
  Tensor test_f = eval::extract_features(pair, test_x);
  Tensor ood_f = eval::extract_features(pair, ood_x);

  std::vector<std::size_t> counts(C, 0);
  for (int y : train.class_ids) counts[(std::size_t)y]++;
  eval::SplitThresholds thresholds{cfg.many_min, cfg.few_max};
  std::vector<eval::Split> splits = eval::assign_splits(counts, thresholds);

  Tensor centroids = eval::class_centroids(train_f, train.class_ids, C);

  EvalOutcome out;
  out.angles.intra = eval::intra_compactness(test_f, test_y, centroids, splits);
  out.angles.inter = eval::inter_separability(centroids, splits);
  out.angles.id_ood = eval::id_ood_separability(centroids, ood_f, splits);
  out.probe = eval::linear_probe(train_f, train.class_ids, test_f, test_y, splits,
                                 {cfg.probe_lr, cfg.probe_epochs, cfg.seed});
  std::vector<double> id_scores = eval::ood_score(test_f, centroids);
  std::vector<double> ood_scores = eval::ood_score(ood_f, centroids);
  out.ood.auroc = eval::auroc(id_scores, ood_scores);
  out.ood.fpr_at_tpr95 = eval::fpr_at_tpr(id_scores, ood_scores, 0.95);
  return out;
}

namespace {
void append_split_rows(std::ostringstream& csv, json& j, const std::string& metric,
                       const eval::SplitValues& v) {
  const char* names[4] = {"many", "medium", "few", "all"};
  const double vals[4] = {v.many, v.medium, v.few, v.all};
  for (int i = 0; i < 4; ++i) {
    char line[128];
    std::snprintf(line, sizeof line, "%s,%s,%.17g\n", metric.c_str(), names[i], vals[i]);
    csv << line;
    j[metric][names[i]] = vals[i];
  }
}
}  // namespace

EvalOutcome run_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string start = timestamp_utc();
  model::ParamPair pair = io::load_checkpoint(checkpoint_path);
  EvalOutcome out = evaluate_pair(pair, cfg);

  std::ostringstream csv;
  csv << "metric,split,value\n";
  json j;
  append_split_rows(csv, j, "intra_compactness", out.angles.intra);
  append_split_rows(csv, j, "inter_separability", out.angles.inter);
  append_split_rows(csv, j, "id_ood_separability", out.angles.id_ood);
  append_split_rows(csv, j, "probe_top1", out.probe.top1);
  {
    char line[96];
    std::snprintf(line, sizeof line, "auroc,all,%.17g\nfpr_at_tpr95,all,%.17g\n",
                  out.ood.auroc, out.ood.fpr_at_tpr95);
    csv << line;
  }
  j["auroc"] = out.ood.auroc;
  j["fpr_at_tpr95"] = out.ood.fpr_at_tpr95;
  j["probe_per_class"] = out.probe.per_class;

  const std::string csv_path = out_dir + "/metrics.csv";
  const std::string json_path = out_dir + "/metrics.json";
  write_atomic(csv_path, csv.str());
  write_atomic(json_path, j.dump(2) + "\n");

  json m = manifest_base(cfg, start);
  m["command"] = "eval";
  m["checkpoint"] = checkpoint_path;
  m["metrics"]["probe_all"] = out.probe.top1.all;
  m["metrics"]["intra_all"] = out.angles.intra.all;
  m["metrics"]["auroc"] = out.ood.auroc;
  finish_manifest(m, out_dir + "/manifest.json", {csv_path, json_path});
  return out;
}

std::vector<AblateRow> run_ablate(const RunConfig& cfg, const std::vector<std::size_t>& windows,
                                  std::size_t seeds, const std::string& out_dir) {
  if (windows.empty()) throw ConfigError("config: ablate needs at least one window size");
  if (seeds == 0) throw ConfigError("config: ablate needs at least one seed");
  fs::create_directories(out_dir);
  const std::string start = timestamp_utc();

  struct Job {
    std::size_t wi, si;
    RunConfig cfg;
  };
  std::vector<Job> jobs;
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    for (std::size_t si = 0; si < seeds; ++si) {
      RunConfig rc = cfg;
      rc.window_size = windows[wi];
      rc.seed = cfg.seed + si;
      jobs.push_back({wi, si, std::move(rc)});
    }
  }

  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DRIFTLAB_THREADS")) {
    const auto cap = (std::size_t)std::strtoull(env, nullptr, 10);
    if (cap > 0) workers = cap;
  }
  workers = std::min(workers, jobs.size());

  std::vector<EvalOutcome> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        rcp::PretrainResult r = rcp::pretrain(make_setup(jobs[i].cfg));
        results[i] = evaluate_pair(r.pair, jobs[i].cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i + 1 < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };

  std::vector<AblateRow> rows;
  std::ostringstream csv;
  csv << "window,many,medium,few,all\n";
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    std::vector<double> many, medium, few, all;
    for (const auto& job : jobs) {
      if (job.wi != wi) continue;
      const auto& p = results[&job - jobs.data()].probe.top1;
      many.push_back(p.many);
      medium.push_back(p.medium);
      few.push_back(p.few);
      all.push_back(p.all);
    }
    AblateRow row{windows[wi], median(many), median(medium), median(few), median(all)};
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", row.window, row.many,
                  row.medium, row.few, row.all);
    csv << line;
    rows.push_back(row);
  }
  const std::string csv_path = out_dir + "/ablate.csv";
  write_atomic(csv_path, csv.str());

  json m = manifest_base(cfg, start);
  m["command"] = "ablate-window";
  m["windows"] = windows;
  m["seeds"] = seeds;
  for (const auto& row : rows)
    m["metrics"]["all_w" + std::to_string(row.window)] = row.all;
  finish_manifest(m, out_dir + "/manifest.json", {csv_path});
  return rows;
}

void run_export_features(const RunConfig& cfg, const std::string& checkpoint_path,
                         const std::string& out_path) {
  if (cfg.probe_test_per_class == 0)
    throw ConfigError("config: eval.probe_test_per_class must be positive for export");
  fs::create_directories(out_path);
  model::ParamPair pair = io::load_checkpoint(checkpoint_path);

  World w = make_world(cfg);
  Rng er = Rng(cfg.seed).child("eval");
  const std::size_t per = cfg.probe_test_per_class;
  const std::size_t C = cfg.classes;
  Tensor x({C * per, cfg.dim});
  Tensor labels({C * per, 1});
  for (std::size_t c = 0; c < C; ++c) {
    Rng rc = er.child("test").child(c);
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t row = c * per + i;
      labels.at(row, 0) = (double)c;
      for (std::size_t k = 0; k < cfg.dim; ++k)
        x.at(row, k) = w.source.means.at(c, k) + w.source.sigma * rc.gaussian();
    }
  }
  Tensor features = eval::extract_features(pair, x);
  io::save_tensor(out_path + "/features.rcpt", features);
  io::save_tensor(out_path + "/labels.rcpt", labels);
}

}  // namespace driftlab::cli
