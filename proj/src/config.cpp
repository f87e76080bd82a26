#include "m3d/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "m3d/errors.hpp"
#include "m3d/io.hpp"
#include "m3d/synthetic.hpp"

namespace m3d {
namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw InvalidArgument("config: " + key + " = '" + value + "': expected " + what);
}

template <class T>
T parse_number(const std::string& key, const std::string& v, const char* what) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, what);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

struct Binding {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

Binding dbl(double ExperimentConfig::*outer) {
  return {[outer](const ExperimentConfig& c) { return format_double(c.*outer); },
          [outer](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.*outer = parse_number<double>(k, v, "a number");
          }};
}

template <class Get>
Binding dbl_ref(Get ref) {
  return {[ref](const ExperimentConfig& c) { return format_double(ref(const_cast<ExperimentConfig&>(c))); },
          [ref](ExperimentConfig& c, const std::string& k, const std::string& v) {
            ref(c) = parse_number<double>(k, v, "a number");
          }};
}

template <class Get>
Binding int_ref(Get ref) {
  return {[ref](const ExperimentConfig& c) { return std::to_string(ref(const_cast<ExperimentConfig&>(c))); },
          [ref](ExperimentConfig& c, const std::string& k, const std::string& v) {
            ref(c) = parse_number<std::remove_reference_t<decltype(ref(c))>>(k, v, "an integer");
          }};
}

template <class Get>
Binding bool_ref(Get ref) {
  return {[ref](const ExperimentConfig& c) {
            return std::string(ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          },
          [ref](ExperimentConfig& c, const std::string& k, const std::string& v) {
            ref(c) = parse_bool(k, v);
          }};
}

const std::map<std::string, Binding>& bindings() {
  using C = ExperimentConfig;
  static const std::map<std::string, Binding> table = {
      {"gamma", dbl_ref([](C& c) -> double& { return c.objective.gamma; })},
      {"alpha_ap", dbl_ref([](C& c) -> double& { return c.weights.alpha_ap; })},
      {"alpha_ds", dbl_ref([](C& c) -> double& { return c.weights.alpha_ds; })},
      {"alpha_lr2d", dbl_ref([](C& c) -> double& { return c.weights.alpha_lr2d; })},
      {"beta", dbl_ref([](C& c) -> double& { return c.weights.beta; })},
      {"ssim_window", int_ref([](C& c) -> int& { return c.objective.ssim.window; })},
      {"ssim_c1", dbl_ref([](C& c) -> double& { return c.objective.ssim.c1; })},
      {"ssim_c2", dbl_ref([](C& c) -> double& { return c.objective.ssim.c2; })},
      {"regularizer_unit",
       {[](const C& c) { return to_string(c.objective.regularizer_unit); },
        [](C& c, const std::string&, const std::string& v) {
          c.objective.regularizer_unit = regularizer_unit_from_string(v);
        }}},
      {"enable_3gc", bool_ref([](C& c) -> bool& { return c.objective.enable_3gc; })},
      {"enable_blind_mask", bool_ref([](C& c) -> bool& { return c.objective.enable_blind_mask; })},
      {"gc_points", int_ref([](C& c) -> std::size_t& { return c.objective.geometric.points; })},
      {"icp_max_iterations", int_ref([](C& c) -> int& { return c.objective.geometric.icp.max_iter; })},
      {"icp_tolerance", dbl_ref([](C& c) -> double& { return c.objective.geometric.icp.tol; })},
      {"iterations", int_ref([](C& c) -> int& { return c.optimizer.iterations; })},
      {"step", dbl_ref([](C& c) -> double& { return c.optimizer.step; })},
      {"momentum", dbl_ref([](C& c) -> double& { return c.optimizer.momentum; })},
      {"seed", int_ref([](C& c) -> std::uint64_t& { return c.optimizer.seed; })},
      {"d_max", dbl_ref([](C& c) -> double& { return c.optimizer.d_max; })},
      {"init_fraction", dbl_ref([](C& c) -> double& { return c.optimizer.init_fraction; })},
      {"init_noise", dbl_ref([](C& c) -> double& { return c.optimizer.init_noise; })},
      {"divergence_factor", dbl_ref([](C& c) -> double& { return c.optimizer.divergence_factor; })},
      {"synth",
       {[](const C& c) { return c.synth; },
        [](C& c, const std::string&, const std::string& v) { c.synth = v; }}},
      {"synth_height", int_ref([](C& c) -> int& { return c.synth_height; })},
      {"synth_width", int_ref([](C& c) -> int& { return c.synth_width; })},
      {"work_height", int_ref([](C& c) -> int& { return c.work_height; })},
      {"work_width", int_ref([](C& c) -> int& { return c.work_width; })},
      {"max_depth", dbl(&C::max_depth)},
      {"median_scaling", bool_ref([](C& c) -> bool& { return c.median_scaling; })},
      {"depth_png_units", dbl(&C::depth_png_units)},
      {"ablation_seeds", int_ref([](C& c) -> int& { return c.ablation_seeds; })},
      {"ablation_depth_cap", dbl(&C::ablation_depth_cap)},
      {"sl_threshold", dbl(&C::sl_threshold)},
      {"sl_epsilon", dbl(&C::sl_epsilon)},
  };
  return table;
}

bool is_reserved(const std::string& key) {
  return key == "command" || key == "version" || key.rfind("input.", 0) == 0;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : bindings()) keys.push_back(k);
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = bindings().find(key);
  if (it == bindings().end()) throw InvalidArgument("config: unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
  const auto it = bindings().find(key);
  if (it == bindings().end()) throw InvalidArgument("config: unknown key '" + key + "'");
  return it->second.get(cfg);
}

ParsedConfigFile parse_config(const std::string& text, const ExperimentConfig& base) {
  ParsedConfigFile out{base, {}};
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    if (is_reserved(key)) {
      out.reserved[key] = value;
      continue;
    }
    try {
      set_config_value(out.config, key, value);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ParsedConfigFile load_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  return parse_config(read_text(path), base);
}

void validate(const ExperimentConfig& cfg) {
  cfg.weights.validate();
  cfg.objective.ssim.validate();
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw InvalidArgument(std::string("config: ") + msg);
  };
  require(cfg.objective.gamma >= 0.0 && cfg.objective.gamma <= 1.0, "gamma must lie in [0, 1]");
  require(cfg.objective.geometric.points >= 3, "gc_points must be >= 3");
  require(cfg.objective.geometric.icp.max_iter >= 1, "icp_max_iterations must be >= 1");
  require(cfg.objective.geometric.icp.tol >= 0.0, "icp_tolerance must be >= 0");
  require(cfg.optimizer.iterations >= 0, "iterations must be >= 0");
  require(cfg.optimizer.step >= 0.0 && std::isfinite(cfg.optimizer.step), "step must be >= 0");
  require(cfg.optimizer.momentum >= 0.0 && cfg.optimizer.momentum < 1.0, "momentum must lie in [0, 1)");
  require(cfg.optimizer.d_max >= 0.0, "d_max must be >= 0 (0 selects 0.3 * width)");
  require(cfg.optimizer.init_fraction > 0.0 && cfg.optimizer.init_fraction < 1.0,
          "init_fraction must lie in (0, 1)");
  require(cfg.optimizer.init_noise >= 0.0, "init_noise must be >= 0");
  require(cfg.optimizer.divergence_factor > 1.0, "divergence_factor must be > 1");
  require(cfg.synth_height >= 8 && cfg.synth_width >= 8, "synthetic resolution must be at least 8x8");
  require(cfg.work_height >= 0 && cfg.work_width >= 0 && (cfg.work_height == 0) == (cfg.work_width == 0),
          "work_height and work_width must both be 0 or both positive");
  require(cfg.max_depth >= 0.0, "max_depth must be >= 0");
  require(cfg.depth_png_units > 0.0, "depth_png_units must be > 0");
  require(cfg.ablation_seeds >= 1, "ablation_seeds must be >= 1");
  require(cfg.ablation_depth_cap >= 1.0, "ablation_depth_cap must be >= 1");
  require(cfg.sl_threshold >= 0.0 && cfg.sl_epsilon >= 0.0, "structured-light thresholds must be >= 0");
  scene_preset(cfg.synth, cfg.synth_height, cfg.synth_width);
}

std::string manifest_text(const ExperimentConfig& cfg, const std::string& command,
                          const std::map<std::string, std::string>& inputs) {
  std::map<std::string, std::string> all;
  for (const auto& k : config_keys()) all[k] = get_config_value(cfg, k);
  all["command"] = command;
  all["version"] = kVersion;
  for (const auto& [k, v] : inputs) all["input." + k] = v;
  std::string out;
  for (const auto& [k, v] : all) out += k + " = " + v + "\n";
  return out;
}

}  // namespace m3d
