#pragma once

#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "geo/synth.hpp"

namespace geo {

struct StepReward {
  bool outcome = false;
  bool step_effective = false;
  bool combined = false;  // outcome AND step_effective
};

/// Binary step reward: the conjunction of proof completion and step success
/// (propose steps: proven; add steps: the added points are used in the final
/// proof).
StepReward step_reward(bool outcome, ActionKind kind, bool effective_evidence);

struct AdvantageBatch {
  std::vector<std::vector<int>> rewards;      // [trajectory][step]
  std::vector<std::vector<double>> advantages;
  double mean = 0;
  double stddev = 0;  // population std over the flattened steps
};

/// Group normalization over the flattened multiset of all steps of all
/// trajectories; zero variance defines all advantages as 0.
AdvantageBatch advantages(const std::vector<std::vector<int>>& rewards);

/// E|A| = 2*sqrt(p*(1-p)) for i.i.d. Bernoulli(p) rewards.
double expected_abs_advantage(double p);

struct CurriculumState {
  double kappa = 3.0;
  double alpha = 0.25;
  double kappa_min = 1.0;
  int round = 0;
  std::vector<std::tuple<int, double, double>> history;  // round, kappa, mean reward
};

/// Algorithm step: kappa += alpha when the batch mean reward exceeds 0.5
/// (strictly), else kappa -= alpha, clamped at kappa_min.
CurriculumState update_kappa(CurriculumState state, double mean_reward);

// ---------------------------------------------------------------------------
// Scripted policies (simulation stand-ins for the trained agent)

struct RolloutStep {
  ActionKind kind = ActionKind::propose;
  bool effective = false;
};

struct Rollout {
  bool solved = false;
  std::vector<RolloutStep> steps;
};

class ScriptedPolicy {
 public:
  virtual ~ScriptedPolicy() = default;
  virtual std::string name() const = 0;
  /// batch_index/batch_size drive stratified draws for low-variance success
  /// sampling inside one round.
  virtual Rollout rollout(const SynthItem& item, double kappa, int batch_index, int batch_size,
                          Rng& rng, const EngineOptions& opt) = 0;
  virtual void update(double mean_reward, double mean_abs_advantage) = 0;
  virtual double skill() const = 0;
};

std::unique_ptr<ScriptedPolicy> make_policy(const std::string& name, double initial_skill);

struct SimOptions {
  int rounds = 100;
  int batch_size = 32;
  double alpha = 0.2;
  double kappa0 = 3.0;
  double kappa_min = 1.0;
  std::uint64_t seed = 0;
  SynthConfig synth;          // synth.kappa is overridden per round
  std::string cache_path;
  double round_timeout_seconds = 120.0;
  EngineOptions engine;
};

struct RoundTrace {
  int round = 0;
  double kappa = 0;
  double mean_reward = 0;
  double mean_abs_adv = 0;
  int items = 0;
  double skill = 0;
  bool skipped = false;

  nlohmann::ordered_json to_json() const;
};

struct SimResult {
  CurriculumState state;
  std::vector<RoundTrace> trace;
};

/// The curriculum loop: sample a batch at the current complexity, roll the
/// policy out on real engine sessions, reward, normalize, update the policy
/// stand-in and the complexity target.
SimResult run_cbrl_sim(ScriptedPolicy& policy, const SimOptions& opt);

}  // namespace geo
