#include "geo/config.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace geo {

namespace {

double parse_num(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (...) {
    throw Error(Errc::config_error, "config key '" + key + "': invalid number '" + value + "'");
  }
}

double positive(const std::string& key, double v) {
  if (!(v > 0)) throw Error(Errc::config_error, "config key '" + key + "' must be positive");
  return v;
}

int positive_int(const std::string& key, double v) {
  if (!(v >= 1)) throw Error(Errc::config_error, "config key '" + key + "' must be >= 1");
  return int(v);
}

}  // namespace

Config Config::from_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
    auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw Error(Errc::config_error, "config line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t\r");
      std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));

    if (key == "diagram.tol_construct")
      cfg.build.tol_construct = positive(key, parse_num(key, value));
    else if (key == "diagram.tol_check")
      cfg.build.tol_check = cfg.saturate.tol_check = positive(key, parse_num(key, value));
    else if (key == "diagram.coincidence_tol")
      cfg.build.coincidence_tol = positive(key, parse_num(key, value));
    else if (key == "diagram.nondegen_tol")
      cfg.build.nondegen_tol = positive(key, parse_num(key, value));
    else if (key == "diagram.max_restarts")
      cfg.build.max_restarts = positive_int(key, parse_num(key, value));
    else if (key == "diagram.solver_max_iters")
      cfg.build.solver_max_iters = positive_int(key, parse_num(key, value));
    else if (key == "deduct.budget")
      cfg.saturate.budget = positive_int(key, parse_num(key, value));
    else if (key == "deduct.max_candidates_per_bucket")
      cfg.saturate.max_candidates_per_bucket = positive_int(key, parse_num(key, value));
    else if (key == "engine.max_turns")
      cfg.max_turns = positive_int(key, parse_num(key, value));
    else if (key == "passcheck.max_think_chars")
      cfg.passcheck.max_think_chars = std::size_t(positive_int(key, parse_num(key, value)));
    else if (key == "passcheck.max_same_kind")
      cfg.passcheck.max_same_kind = positive_int(key, parse_num(key, value));
    else if (key == "synth.tolerance")
      cfg.synth_tolerance = positive(key, parse_num(key, value));
    else if (key == "synth.max_sample")
      cfg.synth_max_sample = positive_int(key, parse_num(key, value));
    else if (key == "synth.pts_base")
      cfg.synth_priors.pts_base = positive(key, parse_num(key, value));
    else if (key == "synth.pts_slope")
      cfg.synth_priors.pts_slope = parse_num(key, value);
    else if (key == "synth.pts_min")
      cfg.synth_priors.pts_min = positive_int(key, parse_num(key, value));
    else if (key == "synth.pts_max")
      cfg.synth_priors.pts_max = positive_int(key, parse_num(key, value));
    else if (key == "synth.aux_base")
      cfg.synth_priors.aux_base = positive(key, parse_num(key, value));
    else if (key == "synth.aux_slope")
      cfg.synth_priors.aux_slope = parse_num(key, value);
    else if (key == "synth.aux_min")
      cfg.synth_priors.aux_min = positive_int(key, parse_num(key, value));
    else if (key == "synth.aux_max")
      cfg.synth_priors.aux_max = positive_int(key, parse_num(key, value));
    else if (key == "synth.stmt_retries")
      cfg.synth_priors.stmt_retries = positive_int(key, parse_num(key, value));
    else if (key == "synth.build_retries")
      cfg.synth_priors.build_retries = positive_int(key, parse_num(key, value));
    else if (key == "curriculum.alpha")
      cfg.curriculum_alpha = positive(key, parse_num(key, value));
    else if (key == "curriculum.kappa0")
      cfg.curriculum_kappa0 = positive(key, parse_num(key, value));
    else if (key == "curriculum.kappa_min")
      cfg.curriculum_kappa_min = positive(key, parse_num(key, value));
    else if (key == "curriculum.batch")
      cfg.curriculum_batch = positive_int(key, parse_num(key, value));
    else if (key == "rules.path")
      cfg.rules_path = value;
    else
      throw Error(Errc::config_error, "unknown config key '" + key + "'");
  }
  if (cfg.synth_priors.pts_min > cfg.synth_priors.pts_max)
    throw Error(Errc::config_error, "synth.pts_min exceeds synth.pts_max");
  if (cfg.synth_priors.aux_min > cfg.synth_priors.aux_max)
    throw Error(Errc::config_error, "synth.aux_min exceeds synth.aux_max");
  return cfg;
}

Config Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

Config Config::from_env() {
  const char* path = std::getenv("GEO_CONFIG");
  if (path && *path) return load_file(path);
  return Config{};
}

EngineOptions Config::engine_options() const {
  EngineOptions opt;
  opt.build = build;
  opt.saturate = saturate;
  opt.max_turns = max_turns;
  return opt;
}

SynthConfig Config::synth_config(double kappa) const {
  SynthConfig cfg;
  cfg.kappa = kappa;
  cfg.tolerance = synth_tolerance;
  cfg.max_sample = synth_max_sample;
  cfg.priors = synth_priors;
  cfg.build = build;
  cfg.saturate = saturate;
  return cfg;
}

}  // namespace geo
