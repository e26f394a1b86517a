#pragma once

#include <string>

#include "geo/curriculum.hpp"
#include "geo/memory.hpp"

namespace geo {

/// Flat key=value configuration mirroring the per-module defaults. Unknown
/// keys are rejected and every value is validated at load. Command-line flags
/// override config values; the GEO_CONFIG environment variable names the
/// file.
struct Config {
  BuildOptions build;
  SaturateOptions saturate;
  int max_turns = 200;
  PassCheckLimits passcheck;
  SynthPriors synth_priors;
  double synth_tolerance = 2.0;
  int synth_max_sample = 64;
  double curriculum_alpha = 0.25;
  double curriculum_kappa0 = 3.0;
  double curriculum_kappa_min = 1.0;
  int curriculum_batch = 32;
  std::string rules_path;

  static Config from_text(const std::string& text);
  static Config load_file(const std::string& path);
  /// Loads $GEO_CONFIG when set, defaults otherwise.
  static Config from_env();

  EngineOptions engine_options() const;
  SynthConfig synth_config(double kappa) const;
};

}  // namespace geo
