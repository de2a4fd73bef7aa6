#include "driftlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "driftlab/rng.hpp"

namespace driftlab::cli {

namespace {
std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F item) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(item(key, tok));
  }
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

std::string fmt_double(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) s += fmt_double(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}
}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  bool saw_window = false;

  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
      {"stream.kind",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "stationary" && v != "tailed" && v != "sudden" && v != "gradual")
           throw ConfigError("config: bad value for " + k + ": '" + v + "'");
         c.stream_kind = v;
       }},
      {"stream.classes", [](RunConfig& c, const std::string& k, const std::string& v) { c.classes = parse_u64(k, v); }},
      {"stream.dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.dim = parse_u64(k, v); }},
      {"stream.sigma", [](RunConfig& c, const std::string& k, const std::string& v) { c.sigma = parse_double(k, v); }},
      {"stream.radius", [](RunConfig& c, const std::string& k, const std::string& v) { c.radius = parse_double(k, v); }},
      {"stream.ood_classes", [](RunConfig& c, const std::string& k, const std::string& v) { c.ood_classes = parse_u64(k, v); }},
      {"stream.imbalance_ratio", [](RunConfig& c, const std::string& k, const std::string& v) { c.imbalance_ratio = parse_double(k, v); }},
      {"stream.ramp_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.ramp_steps = parse_u64(k, v); }},
      {"stream.switch_step", [](RunConfig& c, const std::string& k, const std::string& v) { c.switch_step = parse_u64(k, v); }},
      {"stream.transform",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v != "identity" && v != "negate" && v != "shift")
           throw ConfigError("config: bad value for " + k + ": '" + v + "'");
         c.transform = v;
       }},
      {"stream.shift", [](RunConfig& c, const std::string& k, const std::string& v) { c.shift = parse_list<double>(k, v, parse_double); }},
      {"stream.grad_start", [](RunConfig& c, const std::string& k, const std::string& v) { c.grad_start = parse_u64(k, v); }},
      {"stream.grad_end", [](RunConfig& c, const std::string& k, const std::string& v) { c.grad_end = parse_u64(k, v); }},
      {"stream.noise_sigma", [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_sigma = parse_double(k, v); }},
      {"stream.scale_lo", [](RunConfig& c, const std::string& k, const std::string& v) { c.scale_lo = parse_double(k, v); }},
      {"stream.scale_hi", [](RunConfig& c, const std::string& k, const std::string& v) { c.scale_hi = parse_double(k, v); }},
      {"stream.mask_prob", [](RunConfig& c, const std::string& k, const std::string& v) { c.mask_prob = parse_double(k, v); }},
      {"model.encoder", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder = parse_list<std::size_t>(k, v, parse_u64); }},
      {"model.head_hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.head_hidden = parse_u64(k, v); }},
      {"model.momentum", [](RunConfig& c, const std::string& k, const std::string& v) { c.momentum = parse_double(k, v); }},
      {"rcp.window_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.window_size = parse_u64(k, v); }},
      {"rcp.temperature", [](RunConfig& c, const std::string& k, const std::string& v) { c.temperature = parse_double(k, v); }},
      {"rcp.qk_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.qk_scale = parse_bool(k, v); }},
      {"rcp.intervention", [](RunConfig& c, const std::string& k, const std::string& v) { c.intervention = parse_bool(k, v); }},
      {"rcp.ablate_windows", [](RunConfig& c, const std::string& k, const std::string& v) { c.ablate_windows = parse_list<std::size_t>(k, v, parse_u64); }},
      {"rcp.ablate_seeds", [](RunConfig& c, const std::string& k, const std::string& v) { c.ablate_seeds = parse_u64(k, v); }},
      {"optim.base_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.base_lr = parse_double(k, v); }},
      {"optim.beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta1 = parse_double(k, v); }},
      {"optim.beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta2 = parse_double(k, v); }},
      {"optim.weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.weight_decay = parse_double(k, v); }},
      {"optim.warmup_frac", [](RunConfig& c, const std::string& k, const std::string& v) { c.warmup_frac = parse_double(k, v); }},
      {"optim.steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.steps = parse_u64(k, v); }},
      {"eval.many_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.many_min = parse_u64(k, v); }},
      {"eval.few_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.few_max = parse_u64(k, v); }},
      {"eval.probe_train", [](RunConfig& c, const std::string& k, const std::string& v) { c.probe_train = parse_u64(k, v); }},
      {"eval.probe_test_per_class", [](RunConfig& c, const std::string& k, const std::string& v) { c.probe_test_per_class = parse_u64(k, v); }},
      {"eval.ood_samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.ood_samples = parse_u64(k, v); }},
      {"eval.probe_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.probe_lr = parse_double(k, v); }},
      {"eval.probe_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.probe_epochs = parse_u64(k, v); }},
      {"io.out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"io.checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; }},
      {"io.checkpoint_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.checkpoint_every = parse_u64(k, v); }},
  };

  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string path = section.empty() ? key : section + "." + key;
    auto it = setters.find(path);
    if (it == setters.end()) throw ConfigError("config: unknown key " + path);
    it->second(cfg, path, value);
    if (path == "rcp.window_size") saw_window = true;
  }
  if (!saw_window) throw ConfigError("config: missing required key rcp.window_size");
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

void RunConfig::validate() const {
  if (classes < 2) throw ConfigError("config: stream.classes must be >= 2");
  if (window_size < 1) throw ConfigError("config: rcp.window_size must be >= 1");
  if (temperature <= 0.0) throw ConfigError("config: rcp.temperature must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("config: model.momentum must lie in [0, 1)");
  if (encoder.empty()) throw ConfigError("config: model.encoder must list at least one width");
  if (warmup_frac < 0.0 || warmup_frac > 1.0)
    throw ConfigError("config: optim.warmup_frac must lie in [0, 1]");
  if (few_max > many_min) throw ConfigError("config: eval.few_max must be <= eval.many_min");
  if (transform == "shift" && shift.empty())
    throw ConfigError("config: stream.shift required when stream.transform = shift");
}

std::vector<std::string> RunConfig::canonical_lines() const {
  std::vector<std::string> ls = {
      "seed=" + std::to_string(seed),
      "stream.kind=" + stream_kind,
      "stream.classes=" + std::to_string(classes),
      "stream.dim=" + std::to_string(dim),
      "stream.sigma=" + fmt_double(sigma),
      "stream.radius=" + fmt_double(radius),
      "stream.ood_classes=" + std::to_string(ood_classes),
      "stream.imbalance_ratio=" + fmt_double(imbalance_ratio),
      "stream.ramp_steps=" + std::to_string(ramp_steps),
      "stream.switch_step=" + std::to_string(switch_step),
      "stream.transform=" + transform,
      "stream.shift=" + fmt_list(shift),
      "stream.grad_start=" + std::to_string(grad_start),
      "stream.grad_end=" + std::to_string(grad_end),
      "stream.noise_sigma=" + fmt_double(noise_sigma),
      "stream.scale_lo=" + fmt_double(scale_lo),
      "stream.scale_hi=" + fmt_double(scale_hi),
      "stream.mask_prob=" + fmt_double(mask_prob),
      "model.encoder=" + fmt_list(encoder),
      "model.head_hidden=" + std::to_string(head_hidden),
      "model.momentum=" + fmt_double(momentum),
      "rcp.window_size=" + std::to_string(window_size),
      "rcp.temperature=" + fmt_double(temperature),
      "rcp.qk_scale=" + std::string(qk_scale ? "true" : "false"),
      "rcp.intervention=" + std::string(intervention ? "true" : "false"),
      "rcp.ablate_windows=" + fmt_list(ablate_windows),
      "rcp.ablate_seeds=" + std::to_string(ablate_seeds),
      "optim.base_lr=" + fmt_double(base_lr),
      "optim.beta1=" + fmt_double(beta1),
      "optim.beta2=" + fmt_double(beta2),
      "optim.weight_decay=" + fmt_double(weight_decay),
      "optim.warmup_frac=" + fmt_double(warmup_frac),
      "optim.steps=" + std::to_string(steps),
      "eval.many_min=" + std::to_string(many_min),
      "eval.few_max=" + std::to_string(few_max),
      "eval.probe_train=" + std::to_string(probe_train),
      "eval.probe_test_per_class=" + std::to_string(probe_test_per_class),
      "eval.ood_samples=" + std::to_string(ood_samples),
      "eval.probe_lr=" + fmt_double(probe_lr),
      "eval.probe_epochs=" + std::to_string(probe_epochs),
      "io.checkpoint_every=" + std::to_string(checkpoint_every),
  };
  std::sort(ls.begin(), ls.end());
  return ls;
}

std::string RunConfig::content_hash() const {
  // Output paths are excluded: the same experiment written elsewhere is the
  // same experiment.
  std::string all;
  for (const auto& l : canonical_lines()) {
    all += l;
    all += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a64(all));
  return buf;
}

}  // namespace driftlab::cli
