#include "geo/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace geo {

StepReward step_reward(bool outcome, ActionKind kind, bool effective_evidence) {
  (void)kind;  // propose and add use the same conjunction, with different evidence
  StepReward r;
  r.outcome = outcome;
  r.step_effective = effective_evidence;
  r.combined = outcome && effective_evidence;
  return r;
}

AdvantageBatch advantages(const std::vector<std::vector<int>>& rewards) {
  AdvantageBatch out;
  out.rewards = rewards;
  long n = 0;
  double sum = 0;
  for (const auto& traj : rewards)
    for (int r : traj) {
      sum += r;
      ++n;
    }
  if (n == 0) throw Error(Errc::invariant_violation, "advantages need at least one step");
  double mean = sum / double(n);
  double var = 0;
  for (const auto& traj : rewards)
    for (int r : traj) var += (r - mean) * (r - mean);
  var /= double(n);  // population variance over the flattened multiset
  double sd = std::sqrt(var);
  out.mean = mean;
  out.stddev = sd;
  out.advantages.reserve(rewards.size());
  for (const auto& traj : rewards) {
    std::vector<double> adv;
    adv.reserve(traj.size());
    for (int r : traj) adv.push_back(sd == 0 ? 0.0 : (r - mean) / sd);
    out.advantages.push_back(std::move(adv));
  }
  return out;
}

double expected_abs_advantage(double p) {
  if (p < 0 || p > 1)
    throw Error(Errc::invariant_violation, "probability out of [0,1]");
  return 2.0 * std::sqrt(p * (1.0 - p));
}

CurriculumState update_kappa(CurriculumState state, double mean_reward) {
  if (mean_reward < 0 || mean_reward > 1)
    throw Error(Errc::invariant_violation, "mean reward out of [0,1]");
  if (mean_reward > 0.5)
    state.kappa += state.alpha;
  else
    state.kappa -= state.alpha;
  state.kappa = std::max(state.kappa, state.kappa_min);
  state.round += 1;
  state.history.emplace_back(state.round, state.kappa, mean_reward);
  return state;
}

// ---------------------------------------------------------------------------
// Scripted policies

namespace {

Rollout play_solution(const SynthItem& item, const EngineOptions& opt) {
  Rollout r;
  auto [s, fb] = start_session(BuildAction{item.problem}, item.seed, opt);
  if (fb.status == FeedbackStatus::error) return r;

  bool add_status_ok = false;
  if (!s.solved() && !item.aux.empty()) {
    auto [s2, fb2] = step(s, AddAction{item.aux}, opt);
    s = std::move(s2);
    add_status_ok = fb2.status == FeedbackStatus::ok ||
                    fb2.status == FeedbackStatus::session_solved;
  }
  bool propose_proven = false;
  if (!s.solved()) {
    auto [s3, fb3] = step(s, ProposeAction{item.problem.goals.front()}, opt);
    s = std::move(s3);
    propose_proven = fb3.status == FeedbackStatus::proven ||
                     fb3.status == FeedbackStatus::session_solved;
  } else {
    propose_proven = true;
  }
  r.solved = s.solved();

  bool aux_used = false;
  if (r.solved && !item.aux.empty()) {
    ProofDocument doc = extract_proof(s);
    for (const ConstructionStmt& st : item.aux)
      for (const ConstructionStmt& used : doc.aux_used)
        if (st == used) aux_used = true;
  }
  if (!item.aux.empty())
    r.steps.push_back(RolloutStep{ActionKind::add, add_status_ok && aux_used});
  r.steps.push_back(RolloutStep{ActionKind::propose, propose_proven});
  return r;
}

Rollout play_failure(const SynthItem& item, const EngineOptions& opt) {
  Rollout r;
  auto [s, fb] = start_session(BuildAction{item.problem}, item.seed, opt);
  if (fb.status == FeedbackStatus::error) {
    r.steps.push_back(RolloutStep{ActionKind::build, false});
    return r;
  }
  auto [s2, fb2] = step(s, ProposeAction{item.problem.goals.front()}, opt);
  bool proven = fb2.status == FeedbackStatus::proven ||
                fb2.status == FeedbackStatus::session_solved;
  r.solved = s2.solved();
  r.steps.push_back(RolloutStep{ActionKind::propose, proven});
  return r;
}

class LogisticSkillPolicy : public ScriptedPolicy {
 public:
  LogisticSkillPolicy(double skill0, double eta, double temp)
      : skill_(skill0), eta_(eta), temp_(temp) {}

  std::string name() const override { return eta_ == 0 ? "logistic-frozen" : "logistic"; }

  Rollout rollout(const SynthItem& item, double kappa, int batch_index, int batch_size,
                  Rng& rng, const EngineOptions& opt) override {
    (void)rng;
    double p = 1.0 / (1.0 + std::exp(-(skill_ - kappa) / temp_));
    // stratified success draw: the round's success fraction tracks p within 1/K
    double u = (batch_index + 0.5) / std::max(batch_size, 1);
    bool success = u < p;
    std::string key = SynthCache::content_key(item);
    auto& memo = success ? success_memo_ : failure_memo_;
    auto it = memo.find(key);
    if (it == memo.end())
      it = memo.emplace(key, success ? play_solution(item, opt) : play_failure(item, opt)).first;
    return it->second;
  }

  void update(double mean_reward, double mean_abs_advantage) override {
    (void)mean_reward;
    skill_ += eta_ * mean_abs_advantage;
  }

  double skill() const override { return skill_; }

 private:
  double skill_;
  double eta_;
  double temp_;
  std::map<std::string, Rollout> success_memo_, failure_memo_;
};

class OracleHintedPolicy : public ScriptedPolicy {
 public:
  explicit OracleHintedPolicy(double skill0) : skill_(skill0) {}
  std::string name() const override { return "oracle"; }
  Rollout rollout(const SynthItem& item, double, int, int, Rng&,
                  const EngineOptions& opt) override {
    std::string key = SynthCache::content_key(item);
    auto it = memo_.find(key);
    if (it == memo_.end()) it = memo_.emplace(key, play_solution(item, opt)).first;
    return it->second;
  }
  void update(double, double) override {}
  double skill() const override { return skill_; }

 private:
  double skill_;
  std::map<std::string, Rollout> memo_;
};

class RandomValidPolicy : public ScriptedPolicy {
 public:
  explicit RandomValidPolicy(double skill0) : skill_(skill0) {}
  std::string name() const override { return "random"; }
  Rollout rollout(const SynthItem& item, double, int, int, Rng& rng,
                  const EngineOptions& opt) override {
    Rollout r;
    auto [s, fb] = start_session(BuildAction{item.problem}, item.seed, opt);
    if (fb.status == FeedbackStatus::error) return r;
    std::vector<std::string> pts;
    for (const auto& [name, v] : s.diagram.coords) pts.push_back(name);
    for (int t = 0; t < 3 && !s.solved(); ++t) {
      // propose a random cong between sampled points; almost always junk
      if (pts.size() < 3) break;
      std::vector<std::string> pick;
      for (int i = 0; i < 4; ++i) pick.push_back(pts[rng.below(pts.size())]);
      if (pick[0] == pick[1] || pick[2] == pick[3]) continue;
      Predicate q{PredKind::cong, pick};
      auto [s2, fb2] = step(s, ProposeAction{q}, opt);
      s = std::move(s2);
      bool proven = fb2.status == FeedbackStatus::proven ||
                    fb2.status == FeedbackStatus::session_solved;
      r.steps.push_back(RolloutStep{ActionKind::propose, proven});
    }
    r.solved = s.solved();
    return r;
  }
  void update(double, double) override {}
  double skill() const override { return skill_; }

 private:
  double skill_;
};

}  // namespace

std::unique_ptr<ScriptedPolicy> make_policy(const std::string& name, double initial_skill) {
  if (name == "logistic") return std::make_unique<LogisticSkillPolicy>(initial_skill, 0.05, 3.0);
  if (name == "logistic-frozen")
    return std::make_unique<LogisticSkillPolicy>(initial_skill, 0.0, 3.0);
  if (name == "oracle") return std::make_unique<OracleHintedPolicy>(initial_skill);
  if (name == "random") return std::make_unique<RandomValidPolicy>(initial_skill);
  throw Error(Errc::config_error, "unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// Simulation loop

nlohmann::ordered_json RoundTrace::to_json() const {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["kappa"] = kappa;
  j["mean_reward"] = mean_reward;
  j["mean_abs_adv"] = mean_abs_adv;
  j["items"] = items;
  return j;
}

SimResult run_cbrl_sim(ScriptedPolicy& policy, const SimOptions& opt) {
  SimResult out;
  out.state.kappa = opt.kappa0;
  out.state.alpha = opt.alpha;
  out.state.kappa_min = opt.kappa_min;
  Rng rng(mix_seed(opt.seed, 0x5EED));

  for (int round = 1; round <= opt.rounds; ++round) {
    RoundTrace tr;
    tr.round = round;
    tr.kappa = out.state.kappa;

    SynthConfig cfg = opt.synth;
    cfg.kappa = out.state.kappa;
    PipelineResult batch = pipeline(cfg, opt.batch_size, opt.cache_path,
                                    opt.round_timeout_seconds,
                                    mix_seed(opt.seed, std::uint64_t(round)), 1);
    if (batch.shortfall > 0) {
      tr.skipped = true;
      tr.skill = policy.skill();
      out.trace.push_back(tr);
      continue;
    }

    std::vector<std::vector<int>> rewards;
    double solved_sum = 0;
    for (int i = 0; i < int(batch.items.size()); ++i) {
      Rollout r = policy.rollout(batch.items[std::size_t(i)], out.state.kappa, i,
                                 opt.batch_size, rng, opt.engine);
      std::vector<int> traj;
      for (const RolloutStep& st : r.steps)
        traj.push_back(step_reward(r.solved, st.kind, st.effective).combined ? 1 : 0);
      if (traj.empty()) traj.push_back(0);
      rewards.push_back(std::move(traj));
      solved_sum += r.solved ? 1.0 : 0.0;
    }
    AdvantageBatch adv = advantages(rewards);
    double mean_abs = 0;
    long n = 0;
    for (const auto& traj : adv.advantages)
      for (double a : traj) {
        mean_abs += std::abs(a);
        ++n;
      }
    mean_abs = n ? mean_abs / double(n) : 0.0;
    double mean_outcome = solved_sum / double(batch.items.size());

    policy.update(mean_outcome, mean_abs);
    out.state = update_kappa(std::move(out.state), mean_outcome);

    tr.mean_reward = mean_outcome;
    tr.mean_abs_adv = mean_abs;
    tr.items = int(batch.items.size());
    tr.skill = policy.skill();
    out.trace.push_back(tr);
  }
  return out;
}

}  // namespace geo
