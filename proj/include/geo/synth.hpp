#pragma once

#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "geo/engine.hpp"

namespace geo {

/// Priors scale the sampled structure with the target complexity; shapes are
/// monotone in kappa and overridable through the config file.
struct SynthPriors {
  double pts_base = 3.0;
  double pts_slope = 0.25;
  int pts_min = 3;
  int pts_max = 12;
  double aux_base = 1.0;
  double aux_slope = 0.125;
  int aux_min = 1;
  int aux_max = 5;
  int stmt_retries = 40;
  int build_retries = 24;
};

struct SynthConfig {
  double kappa = 3.0;
  double tolerance = 2.0;
  int max_sample = 64;
  SynthPriors priors;
  BuildOptions build;
  SaturateOptions saturate;
};

struct SynthItem {
  Problem problem;  // raw structure plus the selected goal
  std::vector<ConstructionStmt> aux;
  int proof_len = 0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  static SynthItem from_json(const nlohmann::json& j);
};

/// Random buildable construction list (no goals), sized by the kappa priors.
std::vector<ConstructionStmt> rand_construction(const SynthConfig& cfg, std::uint64_t seed);

/// Appends 1..k auxiliary statements; the raw prefix is preserved.
std::vector<ConstructionStmt> add_aux_constructions(const std::vector<ConstructionStmt>& raw,
                                                    const SynthConfig& cfg, std::uint64_t seed);

/// Algorithm: sample a raw structure, augment it, saturate both, and emit the
/// most complex conclusion that needs the auxiliary constructions. The sink
/// returns false to stop early.
void generate_data(const SynthConfig& cfg, std::uint64_t seed,
                   const std::function<bool(const SynthItem&)>& sink);

/// Append-only JSONL cache; corrupt lines are skipped on load and appends are
/// one atomic line each.
class SynthCache {
 public:
  explicit SynthCache(std::string path);
  const std::vector<SynthItem>& items() const { return items_; }
  bool append(const SynthItem& item);  // false if a duplicate
  static std::string content_key(const SynthItem& item);

 private:
  std::string path_;
  std::vector<SynthItem> items_;
  std::set<std::string> seen_;
  std::mutex mu_;
};

struct PipelineStats {
  long cache_hits_at_start = 0;
  long generated = 0;
  long generation_rounds = 0;
};

struct PipelineResult {
  std::vector<SynthItem> items;
  int shortfall = 0;  // > 0 when the wall-clock bound cut generation short
  PipelineStats stats;
};

/// Returns exactly `count` items with |proof_len - kappa| <= tolerance,
/// consulting the cache first and replenishing it via generate_data.
PipelineResult pipeline(const SynthConfig& cfg, int count, const std::string& cache_path,
                        double timeout_seconds, std::uint64_t seed, int jobs = 1);

}  // namespace geo
