#include "nsf/run_config.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "nsf/error.hpp"

namespace nsf {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
  fail(ErrorCode::bad_config, key + " " + what);
}

int require_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_key(key, "must be an integer");
  return v.get<int>();
}

double require_number(const json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "must be a number");
  return v.get<double>();
}

std::vector<int> require_int_list(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) bad_key(key, "must be a non-empty array");
  std::vector<int> out;
  for (const auto& e : v) out.push_back(require_int(e, key));
  return out;
}

void apply_context_weights(const json& v, ContextWeights& w) {
  if (!v.is_object()) bad_key("context_weights", "must be an object");
  for (const auto& [key, val] : v.items()) {
    const std::string full = "context_weights." + key;
    const double x = require_number(val, full);
    if (x < 0.0) bad_key(full, "out of range");
    if (key == "direct")
      w.direct = x;
    else if (key == "diagonal")
      w.diagonal = x;
    else if (key == "parent")
      w.parent = x;
    else if (key == "cousin")
      w.cousin = x;
    else
      bad_key(full, "is not a recognized config key");
  }
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::bad_config, "cannot open config file: " + path);

  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::bad_config, std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object())
    fail(ErrorCode::bad_config, "config root must be a JSON object");

  RunConfig cfg = default_run_config();
  FusionConfig& f = cfg.fusion;

  for (const auto& [key, v] : j.items()) {
    if (key == "levels") {
      const int x = require_int(v, key);
      if (x < 1) bad_key(key, "out of range");
      f.decomposition.levels = x;
    } else if (key == "dirs") {
      f.decomposition.directions_per_scale = require_int_list(v, key);
    } else if (key == "pyramid_filter") {
      if (!v.is_string()) bad_key(key, "must be a string");
      f.decomposition.pyramid_filter = v.get<std::string>();
    } else if (key == "context_weights") {
      apply_context_weights(v, f.context_weights);
    } else if (key == "states") {
      const int x = require_int(v, key);
      if (x < 2 || x > 16) bad_key(key, "out of range");
      f.mchmm.num_states = x;
    } else if (key == "window_radius") {
      if (v.is_number_integer())
        f.mchmm.window_radius = {v.get<int>()};
      else
        f.mchmm.window_radius = require_int_list(v, key);
      for (int r : f.mchmm.window_radius)
        if (r < 1) bad_key(key, "out of range");
    } else if (key == "max_global_iters") {
      const int x = require_int(v, key);
      if (x < 1) bad_key(key, "out of range");
      f.mchmm.max_global_iters = x;
    } else if (key == "max_local_iters") {
      const int x = require_int(v, key);
      if (x < 1) bad_key(key, "out of range");
      f.mchmm.max_local_iters = x;
    } else if (key == "convergence_tol") {
      const double x = require_number(v, key);
      if (!(x > 0.0)) bad_key(key, "out of range");
      f.mchmm.convergence_tol = x;
    } else if (key == "epsilon") {
      const double x = require_number(v, key);
      if (!(x > 0.0)) bad_key(key, "out of range");
      f.mchmm.epsilon = x;
    } else if (key == "noise_variance") {
      const double x = require_number(v, key);
      if (!(x > 0.0)) bad_key(key, "out of range");
      f.mchmm.noise_variance = x;
    } else if (key == "alpha") {
      const double x = require_number(v, key);
      if (x < 0.0 || x > 1.0) bad_key(key, "out of range");
      f.alpha = x;
    } else if (key == "low_window") {
      const int x = require_int(v, key);
      if (x < 1 || x % 2 == 0) bad_key(key, "out of range");
      f.low_window = x;
    } else if (key == "threads") {
      const int x = require_int(v, key);
      if (x < 0) bad_key(key, "out of range");
      f.threads = x;
    } else if (key == "jobs") {
      const int x = require_int(v, key);
      if (x < 1) bad_key(key, "out of range");
      cfg.jobs = x;
    } else {
      bad_key(key, "is not a recognized config key");
    }
  }

  // Cross-field checks (direction counts, filter name, ...) reuse the
  // fusion-layer validation but surface as config errors.
  try {
    f.validate();
  } catch (const Error& e) {
    fail(ErrorCode::bad_config, e.what());
  }
  return cfg;
}

}  // namespace nsf
