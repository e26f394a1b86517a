#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "geo/config.hpp"

using namespace geo;

namespace {

int cmd_solve(const std::string& path, std::uint64_t seed, long budget,
              const std::string& proof_out, const Config& cfg) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open '" << path << "'\n";
    return 1;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    Problem p = parse_problem(buf.str());
    EngineOptions opt = cfg.engine_options();
    if (budget > 0) opt.saturate.budget = budget;
    SolveResult res = exhaust_solve(p, seed, opt);
    if (!res.proof) {
      std::cerr << "not proven" << (res.budget_exhausted ? " (budget exhausted)" : "") << "\n";
      return 2;
    }
    std::string payload = res.proof->to_json().dump(2);
    if (proof_out.empty()) {
      std::cout << payload << "\n";
    } else {
      std::ofstream out(proof_out);
      if (!out) {
        std::cerr << "error: cannot write '" << proof_out << "'\n";
        return 1;
      }
      out << payload << "\n";
    }
    std::cerr << "proved " << res.proof->goals.size() << " goal(s), proof length "
              << res.proof->length << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
}

int cmd_session(int max_turns, std::uint64_t seed, const Config& cfg) {
  EngineOptions opt = cfg.engine_options();
  opt.max_turns = max_turns;
  std::map<std::string, SessionState> sessions;

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    nlohmann::ordered_json resp;
    bool stop = false;
    try {
      nlohmann::json req = nlohmann::json::parse(line);
      std::string id = req.contains("session") ? req.at("session").get<std::string>() : "default";
      std::string action_text = req.at("action").get<std::string>();
      resp["session"] = id;
      Action action = parse_action(action_text);

      auto it = sessions.find(id);
      if (it == sessions.end()) {
        if (const auto* b = std::get_if<BuildAction>(&action)) {
          auto [state, fb] = start_session(*b, seed, opt);
          resp["turn"] = state.turn;
          nlohmann::ordered_json fj = fb.to_json();
          for (auto& [k, v] : fj.items()) resp[k] = v;
          if (fb.status == FeedbackStatus::session_solved) stop = true;
          if (fb.status != FeedbackStatus::error) sessions.emplace(id, std::move(state));
        } else {
          resp["turn"] = 0;
          resp["status"] = "error";
          resp["detail"] = {{"error", "NoSession"},
                            {"message", "first action of a session must be <build>"}};
          resp["known_summary"] = nlohmann::ordered_json::array();
        }
      } else {
        auto [state, fb] = step(it->second, action, opt);
        it->second = std::move(state);
        resp["turn"] = it->second.turn;
        nlohmann::ordered_json fj = fb.to_json();
        for (auto& [k, v] : fj.items()) resp[k] = v;
        if (fb.status == FeedbackStatus::session_solved) stop = true;
        if (fb.status == FeedbackStatus::error && fj["detail"].contains("error") &&
            fj["detail"]["error"] == "TurnLimitExceeded")
          stop = true;
      }
    } catch (const Error& e) {
      resp["turn"] = nullptr;
      resp["status"] = "error";
      resp["detail"] = {{"error", errc_name(e.code())}, {"message", e.what()}};
      resp["known_summary"] = nlohmann::ordered_json::array();
    } catch (const std::exception& e) {
      resp["turn"] = nullptr;
      resp["status"] = "error";
      resp["detail"] = {{"error", "BadRequest"}, {"message", e.what()}};
      resp["known_summary"] = nlohmann::ordered_json::array();
    }
    std::cout << resp.dump() << "\n" << std::flush;
    if (stop) break;
  }
  return 0;
}

int cmd_synth(double kappa, int count, double tolerance, const std::string& cache,
              const std::string& out_path, std::uint64_t seed, int jobs, double timeout,
              const Config& cfg) {
  try {
    SynthConfig scfg = cfg.synth_config(kappa);
    if (tolerance > 0) scfg.tolerance = tolerance;
    PipelineResult res = pipeline(scfg, count, cache, timeout, seed, jobs);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) {
        std::cerr << "error: cannot write '" << out_path << "'\n";
        return 1;
      }
      out = &file;
    }
    for (const SynthItem& item : res.items) (*out) << item.to_json().dump() << "\n";
    std::cerr << "cache hits at start: " << res.stats.cache_hits_at_start
              << ", generated: " << res.stats.generated
              << ", generation rounds: " << res.stats.generation_rounds << "\n";
    if (res.shortfall > 0) {
      std::cerr << "timeout: short by " << res.shortfall << " item(s)\n";
      return 3;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
}

int cmd_curriculum(const std::string& policy_name, int rounds, double alpha,
                   const std::string& trace_path, std::uint64_t seed, int batch, double kappa0,
                   double skill0, const std::string& cache, double tolerance, const Config& cfg) {
  try {
    auto policy = make_policy(policy_name, skill0);
    SimOptions opt;
    opt.rounds = rounds;
    opt.batch_size = batch;
    opt.alpha = alpha;
    opt.kappa0 = kappa0;
    opt.kappa_min = cfg.curriculum_kappa_min;
    opt.seed = seed;
    opt.synth = cfg.synth_config(kappa0);
    if (tolerance > 0) opt.synth.tolerance = tolerance;
    opt.cache_path = cache;
    opt.engine = cfg.engine_options();
    SimResult res = run_cbrl_sim(*policy, opt);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!trace_path.empty()) {
      file.open(trace_path);
      if (!file) {
        std::cerr << "error: cannot write '" << trace_path << "'\n";
        return 1;
      }
      out = &file;
    }
    for (const RoundTrace& tr : res.trace) (*out) << tr.to_json().dump() << "\n";
    std::cerr << "final kappa " << res.state.kappa << " after " << res.state.round
              << " updates\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoprove: deductive geometry engine, problem synthesis and curriculum tools"};
  app.require_subcommand(1);

  Config cfg;
  try {
    cfg = Config::from_env();
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 1;
  }

  std::string geo_path, proof_out, cache, out_path, trace_path, policy = "logistic";
  std::uint64_t seed = 0;
  long budget = 0;
  int max_turns = cfg.max_turns, count = 10, jobs = 1, rounds = 100, batch = cfg.curriculum_batch;
  double kappa = 3.0, tolerance = 0.0, timeout = 600.0, alpha = cfg.curriculum_alpha;
  double kappa0 = cfg.curriculum_kappa0, skill0 = cfg.curriculum_kappa0;

  auto* solve = app.add_subcommand("solve", "exhaustively prove the goals of a .geo file");
  solve->add_option("file", geo_path, "problem file")->required();
  solve->add_option("--seed", seed, "diagram seed");
  solve->add_option("--budget", budget, "rule-firing budget");
  solve->add_option("--proof-out", proof_out, "write the proof JSON here");

  auto* session = app.add_subcommand("session", "interactive JSON-lines proof session on stdio");
  session->add_option("--max-turns", max_turns, "turn limit (default 200)");
  session->add_option("--seed", seed, "diagram seed");

  auto* synth = app.add_subcommand("synth", "synthesize problems at a target complexity");
  synth->add_option("--kappa", kappa, "target complexity (proof steps)")->required();
  synth->add_option("--count", count, "number of items")->required();
  synth->add_option("--tolerance", tolerance, "complexity tolerance");
  synth->add_option("--cache", cache, "persistent JSONL cache path");
  synth->add_option("--out", out_path, "output JSONL (default stdout)");
  synth->add_option("--seed", seed, "generation seed");
  synth->add_option("--jobs", jobs, "worker threads");
  synth->add_option("--timeout", timeout, "wall-clock bound in seconds");

  auto* curriculum = app.add_subcommand("curriculum", "run the complexity-boosting curriculum simulation");
  curriculum->add_option("--policy", policy, "scripted policy (logistic, logistic-frozen, oracle, random)");
  curriculum->add_option("--rounds", rounds, "rounds to run");
  curriculum->add_option("--alpha", alpha, "kappa update step");
  curriculum->add_option("--trace", trace_path, "trace JSONL output (default stdout)");
  curriculum->add_option("--seed", seed, "simulation seed");
  curriculum->add_option("--batch", batch, "items per round");
  curriculum->add_option("--kappa0", kappa0, "initial complexity");
  curriculum->add_option("--skill0", skill0, "initial policy skill");
  curriculum->add_option("--cache", cache, "synthesis cache path");
  curriculum->add_option("--tolerance", tolerance, "synthesis complexity tolerance");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) return cmd_solve(geo_path, seed, budget, proof_out, cfg);
  if (session->parsed()) return cmd_session(max_turns, seed, cfg);
  if (synth->parsed())
    return cmd_synth(kappa, count, tolerance, cache, out_path, seed, jobs, timeout, cfg);
  if (curriculum->parsed())
    return cmd_curriculum(policy, rounds, alpha, trace_path, seed, batch, kappa0, skill0, cache,
                          tolerance, cfg);
  return 1;
}
