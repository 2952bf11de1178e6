#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "contextloc/error.hpp"

namespace contextloc {

enum class PNetKind { pgcn_style, nonlocal };
enum class GlobalAggregation { before_pnet, after_pnet };
enum class SpecialSnippetScope { proposal, video };
enum class Stream { rgb, flow, both };
enum class Precision { float32, float64 };

struct ModelConfig {
  int feature_dim = 16;
  int num_classes = 3;
  bool use_lnet = true;
  bool use_gnet = true;
  bool special_snippet = true;
  SpecialSnippetScope special_snippet_scope = SpecialSnippetScope::proposal;
  double attention_eps = 1e-8;
  PNetKind pnet = PNetKind::pgcn_style;
  int pnet_layers = 2;
  double theta_near = 1.0;
  GlobalAggregation global_aggregation = GlobalAggregation::before_pnet;
};

struct HeadConfig {
  double fg_tiou = 0.5;
  double complete_tiou = 0.7;
  double lambda_comp = 0.5;
  double lambda_reg = 0.5;
  double fusion_rgb = 5.0;
  double fusion_flow = 6.0;
};

struct InferenceConfig {
  double nms_tiou = 0.4;
  int max_detections = 100;
  Stream stream = Stream::rgb;
};

struct OptimizerConfig {
  double lr = 0.01;
  double momentum = 0.9;
  /// lr is divided by 10 after each listed epoch (1-based).
  std::vector<int> lr_milestones = {15};
  int batch_size = 4;  // videos per step
  int epochs = 20;
};

struct SyntheticConfig {
  int num_videos = 16;
  int snippets_per_video = 32;
  double noise_sigma = 0.1;
  double activity_scale = 0.5;
  double snippet_duration = 1.0;
  /// Index of the first generated video; held-out splits use a disjoint range
  /// with the same seed so they share class signatures with training data.
  int first_video = 0;
};

struct Config {
  ModelConfig model;
  HeadConfig heads;
  InferenceConfig inference;
  OptimizerConfig optimizer;
  SyntheticConfig synthetic;
  std::uint64_t seed = 1;
  Precision precision = Precision::float64;
  std::vector<double> eval_thresholds = {0.3, 0.4, 0.5, 0.6, 0.7};

  void validate() const;
  /// Canonical key=value text with every key, in a fixed order.
  std::string to_text() const;
  /// FNV-1a of the keys that determine parameter shapes and the forward pass.
  std::uint64_t model_hash() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected on|off, got '" + v + "'");
}

inline std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> options) {
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    allowed += (allowed.empty() ? "" : "|") + std::string(name);
  }
  throw ConfigError("config key '" + key + "': expected " + allowed + ", got '" + v + "'");
}

}  // namespace detail

inline const char* to_string(PNetKind k) { return k == PNetKind::pgcn_style ? "pgcn_style" : "nonlocal"; }
inline const char* to_string(GlobalAggregation g) {
  return g == GlobalAggregation::before_pnet ? "before_pnet" : "after_pnet";
}
inline const char* to_string(SpecialSnippetScope s) {
  return s == SpecialSnippetScope::proposal ? "proposal" : "video";
}
inline const char* to_string(Stream s) {
  return s == Stream::rgb ? "rgb" : (s == Stream::flow ? "flow" : "both");
}
inline const char* to_string(Precision p) { return p == Precision::float32 ? "float32" : "float64"; }

/// Applies one key. Unknown keys are rejected.
inline void set_config_value(Config& c, const std::string& key, const std::string& v) {
  using namespace detail;
  auto& m = c.model;
  auto& h = c.heads;
  auto& inf = c.inference;
  auto& o = c.optimizer;
  auto& s = c.synthetic;
  if (key == "feature_dim") m.feature_dim = static_cast<int>(parse_int(key, v));
  else if (key == "num_classes") m.num_classes = static_cast<int>(parse_int(key, v));
  else if (key == "use_lnet") m.use_lnet = parse_flag(key, v);
  else if (key == "use_gnet") m.use_gnet = parse_flag(key, v);
  else if (key == "special_snippet") m.special_snippet = parse_flag(key, v);
  else if (key == "special_snippet_scope")
    m.special_snippet_scope = parse_enum<SpecialSnippetScope>(
        key, v, {{"proposal", SpecialSnippetScope::proposal}, {"video", SpecialSnippetScope::video}});
  else if (key == "attention_eps") m.attention_eps = parse_double(key, v);
  else if (key == "pnet")
    m.pnet = parse_enum<PNetKind>(key, v, {{"pgcn_style", PNetKind::pgcn_style}, {"nonlocal", PNetKind::nonlocal}});
  else if (key == "pnet_layers") m.pnet_layers = static_cast<int>(parse_int(key, v));
  else if (key == "theta_near") m.theta_near = parse_double(key, v);
  else if (key == "global_aggregation")
    m.global_aggregation = parse_enum<GlobalAggregation>(
        key, v, {{"before_pnet", GlobalAggregation::before_pnet}, {"after_pnet", GlobalAggregation::after_pnet}});
  else if (key == "fg_tiou") h.fg_tiou = parse_double(key, v);
  else if (key == "complete_tiou") h.complete_tiou = parse_double(key, v);
  else if (key == "lambda_comp") h.lambda_comp = parse_double(key, v);
  else if (key == "lambda_reg") h.lambda_reg = parse_double(key, v);
  else if (key == "fusion_ratio") {
    const auto parts = split(v, ':');
    if (parts.size() != 2) throw ConfigError("config key 'fusion_ratio': expected a:b, got '" + v + "'");
    h.fusion_rgb = parse_double(key, parts[0]);
    h.fusion_flow = parse_double(key, parts[1]);
  } else if (key == "nms_tiou") inf.nms_tiou = parse_double(key, v);
  else if (key == "max_detections") inf.max_detections = static_cast<int>(parse_int(key, v));
  else if (key == "stream")
    inf.stream = parse_enum<Stream>(key, v, {{"rgb", Stream::rgb}, {"flow", Stream::flow}, {"both", Stream::both}});
  else if (key == "lr") o.lr = parse_double(key, v);
  else if (key == "momentum") o.momentum = parse_double(key, v);
  else if (key == "lr_milestones") {
    o.lr_milestones.clear();
    for (const auto& p : split(v, ',')) o.lr_milestones.push_back(static_cast<int>(parse_int(key, p)));
  } else if (key == "batch_size") o.batch_size = static_cast<int>(parse_int(key, v));
  else if (key == "epochs") o.epochs = static_cast<int>(parse_int(key, v));
  else if (key == "num_videos") s.num_videos = static_cast<int>(parse_int(key, v));
  else if (key == "snippets_per_video") s.snippets_per_video = static_cast<int>(parse_int(key, v));
  else if (key == "noise_sigma") s.noise_sigma = parse_double(key, v);
  else if (key == "activity_scale") s.activity_scale = parse_double(key, v);
  else if (key == "snippet_duration") s.snippet_duration = parse_double(key, v);
  else if (key == "first_video") s.first_video = static_cast<int>(parse_int(key, v));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "precision")
    c.precision = parse_enum<Precision>(key, v, {{"float32", Precision::float32}, {"float64", Precision::float64}});
  else if (key == "eval_thresholds") {
    c.eval_thresholds.clear();
    for (const auto& p : split(v, ',')) c.eval_thresholds.push_back(parse_double(key, p));
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Parses `key=value` lines; blank lines and `#` comments are ignored. Keys
/// not mentioned keep the values already in `base`.
inline Config parse_config(std::string_view text, Config base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

inline void Config::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (model.feature_dim < 2 || model.feature_dim % 2 != 0) fail("feature_dim must be even and >= 2");
  if (model.num_classes < 1) fail("num_classes must be >= 1");
  if (!(model.attention_eps > 0)) fail("attention_eps must be positive");
  if (model.pnet_layers < 0) fail("pnet_layers must be >= 0");
  if (!(model.theta_near >= 0)) fail("theta_near must be >= 0");
  if (!(heads.fg_tiou > 0 && heads.fg_tiou <= 1)) fail("fg_tiou must be in (0, 1]");
  if (!(heads.complete_tiou >= heads.fg_tiou && heads.complete_tiou <= 1)) fail("complete_tiou must be in [fg_tiou, 1]");
  if (heads.lambda_comp < 0 || heads.lambda_reg < 0) fail("loss weights must be >= 0");
  if (!(heads.fusion_rgb >= 0 && heads.fusion_flow >= 0 && heads.fusion_rgb + heads.fusion_flow > 0))
    fail("fusion_ratio weights must be nonnegative with a positive sum");
  if (!(inference.nms_tiou >= 0 && inference.nms_tiou <= 1)) fail("nms_tiou must be in [0, 1]");
  if (inference.max_detections < 1) fail("max_detections must be >= 1");
  if (!(optimizer.lr > 0)) fail("lr must be positive");
  if (!(optimizer.momentum >= 0 && optimizer.momentum < 1)) fail("momentum must be in [0, 1)");
  if (optimizer.epochs < 1) fail("epochs must be >= 1");
  if (optimizer.batch_size < 1) fail("batch_size must be >= 1");
  for (int m : optimizer.lr_milestones)
    if (m < 1 || m > optimizer.epochs) fail("lr_milestones must lie in [1, epochs]");
  if (synthetic.num_videos < 1) fail("num_videos must be >= 1");
  if (synthetic.snippets_per_video < 8) fail("snippets_per_video must be >= 8");
  if (synthetic.noise_sigma < 0) fail("noise_sigma must be >= 0");
  if (!(synthetic.snippet_duration > 0)) fail("snippet_duration must be positive");
  if (synthetic.first_video < 0) fail("first_video must be >= 0");
  for (double t : eval_thresholds)
    if (!(t > 0 && t <= 1)) fail("eval_thresholds must lie in (0, 1]");
}

inline std::string Config::to_text() const {
  using detail::fmt_double;
  std::ostringstream os;
  const auto flag = [](bool b) { return b ? "on" : "off"; };
  const auto join_int = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  std::string thr;
  for (std::size_t i = 0; i < eval_thresholds.size(); ++i) thr += (i ? "," : "") + fmt_double(eval_thresholds[i]);
  os << "feature_dim=" << model.feature_dim << "\n"
     << "num_classes=" << model.num_classes << "\n"
     << "use_lnet=" << flag(model.use_lnet) << "\n"
     << "use_gnet=" << flag(model.use_gnet) << "\n"
     << "special_snippet=" << flag(model.special_snippet) << "\n"
     << "special_snippet_scope=" << to_string(model.special_snippet_scope) << "\n"
     << "attention_eps=" << fmt_double(model.attention_eps) << "\n"
     << "pnet=" << to_string(model.pnet) << "\n"
     << "pnet_layers=" << model.pnet_layers << "\n"
     << "theta_near=" << fmt_double(model.theta_near) << "\n"
     << "global_aggregation=" << to_string(model.global_aggregation) << "\n"
     << "precision=" << to_string(precision) << "\n"
     << "fg_tiou=" << fmt_double(heads.fg_tiou) << "\n"
     << "complete_tiou=" << fmt_double(heads.complete_tiou) << "\n"
     << "lambda_comp=" << fmt_double(heads.lambda_comp) << "\n"
     << "lambda_reg=" << fmt_double(heads.lambda_reg) << "\n"
     << "fusion_ratio=" << fmt_double(heads.fusion_rgb) << ":" << fmt_double(heads.fusion_flow) << "\n"
     << "nms_tiou=" << fmt_double(inference.nms_tiou) << "\n"
     << "max_detections=" << inference.max_detections << "\n"
     << "stream=" << to_string(inference.stream) << "\n"
     << "lr=" << fmt_double(optimizer.lr) << "\n"
     << "momentum=" << fmt_double(optimizer.momentum) << "\n"
     << "lr_milestones=" << join_int(optimizer.lr_milestones) << "\n"
     << "batch_size=" << optimizer.batch_size << "\n"
     << "epochs=" << optimizer.epochs << "\n"
     << "num_videos=" << synthetic.num_videos << "\n"
     << "snippets_per_video=" << synthetic.snippets_per_video << "\n"
     << "noise_sigma=" << fmt_double(synthetic.noise_sigma) << "\n"
     << "activity_scale=" << fmt_double(synthetic.activity_scale) << "\n"
     << "snippet_duration=" << fmt_double(synthetic.snippet_duration) << "\n"
     << "first_video=" << synthetic.first_video << "\n"
     << "seed=" << seed << "\n"
     << "eval_thresholds=" << thr << "\n";
  return os.str();
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t Config::model_hash() const {
  // The first twelve lines of to_text() are the architecture keys.
  const std::string text = to_text();
  std::size_t pos = 0;
  for (int i = 0; i < 12; ++i) pos = text.find('\n', pos) + 1;
  return fnv1a64(std::string_view(text).substr(0, pos));
}

}  // namespace contextloc
