#include "geo/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

namespace geo {

nlohmann::ordered_json SynthItem::to_json() const {
  nlohmann::ordered_json j;
  j["problem"] = serialize(problem);
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& s : aux) a.push_back(serialize(s));
  j["aux"] = a;
  j["proof_len"] = proof_len;
  j["seed"] = seed;
  return j;
}

SynthItem SynthItem::from_json(const nlohmann::json& j) {
  SynthItem item;
  item.problem = parse_problem(j.at("problem").get<std::string>());
  std::vector<std::string> known;
  for (const auto& s : item.problem.constructions)
    for (const auto& n : s.new_points) known.push_back(n);
  for (const auto& line : j.at("aux")) {
    auto stmts = parse_stmts(line.get<std::string>(), known);
    for (auto& st : stmts) {
      for (const auto& n : st.new_points) known.push_back(n);
      item.aux.push_back(std::move(st));
    }
  }
  item.proof_len = j.at("proof_len").get<int>();
  item.seed = j.at("seed").get<std::uint64_t>();
  return item;
}

// ---------------------------------------------------------------------------
// Random constructions

namespace {

const char* point_name_pool[] = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j",
                                 "k", "l", "m", "n", "o", "p", "q", "r", "s", "t"};

struct CtorWeight {
  Ctor fn;
  double weight;
  int needed_points;
};

const std::vector<CtorWeight>& raw_ctor_weights() {
  static const std::vector<CtorWeight> w = {
      {Ctor::on_line, 2.0, 2},        {Ctor::on_circle, 2.0, 2},
      {Ctor::midpoint, 2.0, 2},       {Ctor::foot, 1.5, 3},
      {Ctor::circumcenter, 1.2, 3},   {Ctor::reflect, 1.0, 3},
      {Ctor::intersection_ll, 1.0, 4},{Ctor::on_segment, 1.0, 2},
      {Ctor::perp_bisector, 0.8, 2},  {Ctor::angle_bisector, 0.8, 3},
      {Ctor::incenter, 0.5, 3},       {Ctor::free, 0.8, 0},
  };
  return w;
}

const std::vector<CtorWeight>& aux_ctor_weights() {
  static const std::vector<CtorWeight> w = {
      {Ctor::midpoint, 2.0, 2},        {Ctor::foot, 2.0, 3},
      {Ctor::circumcenter, 1.5, 3},    {Ctor::intersection_ll, 1.5, 4},
      {Ctor::reflect, 1.0, 3},         {Ctor::on_line, 0.6, 2},
      {Ctor::perp_bisector, 0.8, 2},   {Ctor::angle_bisector, 0.8, 3},
      {Ctor::on_circle, 0.6, 2},       {Ctor::incenter, 0.5, 3},
  };
  return w;
}

// Over-constrained auxiliary statements. Meeting them requires globally
// adjusting earlier points, which is what puts the raw structure into a
// special position and creates conclusions the raw premises alone cannot
// reach.
struct ForcePattern {
  int needed;  // distinct existing points
  std::vector<std::pair<Ctor, std::vector<int>>> parts;  // arg indices
};

const std::vector<ForcePattern>& force_patterns() {
  static const std::vector<ForcePattern> ps = {
      // midpoint of pq pinned onto line rs
      {4, {{Ctor::midpoint, {0, 1}}, {Ctor::on_line, {2, 3}}}},
      // foot of the perpendicular from p to qr pinned onto line st
      {5, {{Ctor::foot, {0, 1, 2}}, {Ctor::on_line, {3, 4}}}},
      // the two bisectors of angles at q and s meet on segment pr
      {4,
       {{Ctor::on_segment, {0, 2}},
        {Ctor::angle_bisector, {0, 1, 2}},
        {Ctor::angle_bisector, {0, 3, 2}}}},
      // circumcenter of pqr pinned onto line st
      {5, {{Ctor::circumcenter, {0, 1, 2}}, {Ctor::on_line, {3, 4}}}},
      // reflection of p over qr pinned onto circle (s, through t)
      {5, {{Ctor::reflect, {0, 1, 2}}, {Ctor::on_circle, {3, 4}}}},
      // midpoint of pq pinned onto circle (r, through s)
      {4, {{Ctor::midpoint, {0, 1}}, {Ctor::on_circle, {2, 3}}}},
  };
  return ps;
}

Ctor pick_ctor(const std::vector<CtorWeight>& weights, std::size_t have, Rng& rng) {
  double total = 0;
  for (const auto& cw : weights)
    if (std::size_t(cw.needed_points) <= have) total += cw.weight;
  double roll = rng.uniform(0, total);
  for (const auto& cw : weights) {
    if (std::size_t(cw.needed_points) > have) continue;
    roll -= cw.weight;
    if (roll <= 0) return cw.fn;
  }
  return Ctor::free;
}

std::vector<std::string> pick_distinct(const std::vector<std::string>& pool, std::size_t k,
                                       Rng& rng) {
  std::vector<std::string> out;
  std::vector<std::string> avail = pool;
  for (std::size_t i = 0; i < k && !avail.empty(); ++i) {
    std::size_t idx = std::size_t(rng.below(avail.size()));
    out.push_back(avail[idx]);
    avail.erase(avail.begin() + long(idx));
  }
  return out;
}

int point_arity(Ctor fn) {
  switch (fn) {
    case Ctor::free:
    case Ctor::triangle:
      return 0;
    case Ctor::on_line:
    case Ctor::on_circle:
    case Ctor::midpoint:
    case Ctor::perp_bisector:
    case Ctor::on_segment:
      return 2;
    case Ctor::foot:
    case Ctor::angle_bisector:
    case Ctor::circumcenter:
    case Ctor::incenter:
    case Ctor::centroid:
    case Ctor::reflect:
      return 3;
    case Ctor::intersection_ll:
    case Ctor::intersection_lc:
    case Ctor::intersection_cc:
      return 4;
  }
  return 0;
}

struct GrowState {
  std::vector<ConstructionStmt> plan;
  Diagram diagram;
  std::vector<std::string> points;
};

bool try_stmt(GrowState& st, ConstructionStmt stmt, const SynthConfig& cfg) {
  try {
    st.diagram = add_point(st.diagram, stmt, cfg.build);
    st.plan.push_back(stmt);
    st.points.push_back(stmt.new_points[0]);
    return true;
  } catch (const Error&) {
    return false;
  }
}

bool grow_one(GrowState& st, const std::vector<CtorWeight>& weights, const SynthConfig& cfg,
              Rng& rng, int name_counter) {
  for (int attempt = 0; attempt < cfg.priors.stmt_retries; ++attempt) {
    Ctor fn = pick_ctor(weights, st.points.size(), rng);
    int arity = point_arity(fn);
    auto args = pick_distinct(st.points, std::size_t(arity), rng);
    if (int(args.size()) < arity) continue;
    ConstructionStmt stmt;
    stmt.new_points = {point_name_pool[name_counter]};
    stmt.parts.push_back(CtorCall{fn, args, {}});
    if (try_stmt(st, std::move(stmt), cfg)) return true;
  }
  return false;
}

// A forcing statement may move raw points into special position, but must
// not flatten them: triples of sampled raw points that the raw plan leaves
// unconstrained have to stay non-collinear.
bool raw_structure_intact(const GrowState& st, const std::vector<ConstructionStmt>& raw,
                          const SynthConfig& cfg) {
  auto groups = constructed_collinear_groups(raw);
  std::set<std::string> sampled = movable_points(raw);
  std::vector<std::string> pts(sampled.begin(), sampled.end());
  double D = std::max(st.diagram.diameter(), 1e-9);
  auto exempt = [&](const std::string& a, const std::string& b, const std::string& c) {
    for (const auto& g : groups)
      if (g.count(a) && g.count(b) && g.count(c)) return true;
    return false;
  };
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        if (exempt(pts[i], pts[j], pts[k])) continue;
        Vec2 u = st.diagram.at(pts[j]) - st.diagram.at(pts[i]);
        Vec2 v = st.diagram.at(pts[k]) - st.diagram.at(pts[i]);
        if (std::abs(u.cross(v)) / (D * D) < cfg.build.nondegen_tol) return false;
      }
  return true;
}

bool grow_forcing(GrowState& st, const std::vector<ConstructionStmt>& raw,
                  const SynthConfig& cfg, Rng& rng, int name_counter) {
  const auto& patterns = force_patterns();
  for (int attempt = 0; attempt < 8; ++attempt) {
    const ForcePattern& pat = patterns[rng.below(patterns.size())];
    if (st.points.size() < std::size_t(pat.needed)) continue;
    auto picked = pick_distinct(st.points, std::size_t(pat.needed), rng);
    ConstructionStmt stmt;
    stmt.new_points = {point_name_pool[name_counter]};
    for (const auto& [fn, idx] : pat.parts) {
      CtorCall call;
      call.fn = fn;
      for (int i : idx) call.points.push_back(picked[std::size_t(i)]);
      stmt.parts.push_back(std::move(call));
    }
    GrowState backup = st;
    if (!try_stmt(st, std::move(stmt), cfg)) continue;
    if (!raw_structure_intact(st, raw, cfg)) {
      st = std::move(backup);
      continue;
    }
    return true;
  }
  return false;
}

}  // namespace

std::vector<ConstructionStmt> rand_construction(const SynthConfig& cfg, std::uint64_t seed) {
  for (int attempt = 0; attempt < cfg.priors.build_retries; ++attempt) {
    Rng rng(mix_seed(seed, 0x5157 + std::uint64_t(attempt)));
    double sized = cfg.priors.pts_base + cfg.kappa * cfg.priors.pts_slope + rng.uniform(-1, 1);
    int target = std::clamp(int(std::lround(sized)), cfg.priors.pts_min, cfg.priors.pts_max);

    GrowState st;
    ConstructionStmt tri;
    tri.new_points = {"a", "b", "c"};
    tri.parts.push_back(CtorCall{Ctor::triangle, {}, {}});
    Problem seedp;
    seedp.constructions.push_back(tri);
    try {
      st.diagram = build_diagram(seedp, seed, cfg.build);
    } catch (const Error&) {
      continue;
    }
    st.plan.push_back(tri);
    st.points = {"a", "b", "c"};

    bool ok = true;
    while (int(st.points.size()) < target) {
      if (!grow_one(st, raw_ctor_weights(), cfg, rng, int(st.points.size()))) {
        ok = int(st.points.size()) >= cfg.priors.pts_min;
        break;
      }
    }
    if (!ok) continue;
    // the canonical build path must reproduce a valid diagram
    Problem check;
    check.constructions = st.plan;
    try {
      build_diagram(check, seed, cfg.build);
    } catch (const Error&) {
      continue;
    }
    return st.plan;
  }
  throw Error(Errc::exhausted_retries, "could not sample a buildable raw construction");
}

std::vector<ConstructionStmt> add_aux_constructions(const std::vector<ConstructionStmt>& raw,
                                                    const SynthConfig& cfg, std::uint64_t seed) {
  for (int attempt = 0; attempt < cfg.priors.build_retries; ++attempt) {
    Rng rng(mix_seed(seed, 0xA0C5 + std::uint64_t(attempt)));
    double sized = cfg.priors.aux_base + cfg.kappa * cfg.priors.aux_slope + rng.uniform(-0.5, 0.5);
    int target = std::clamp(int(std::lround(sized)), cfg.priors.aux_min, cfg.priors.aux_max);

    GrowState st;
    Problem rawp;
    rawp.constructions = raw;
    try {
      st.diagram = build_diagram(rawp, seed, cfg.build);
    } catch (const Error&) {
      continue;
    }
    st.plan = raw;
    for (const auto& s : raw)
      for (const auto& n : s.new_points) st.points.push_back(n);
    std::size_t raw_points = st.points.size();

    int added = 0;
    bool forced = false;
    while (added < target && raw_points + std::size_t(added) < std::size(point_name_pool)) {
      bool want_force = !forced || rng.u01() < 0.35;
      bool ok = want_force && grow_forcing(st, raw, cfg, rng, int(raw_points) + added);
      if (ok)
        forced = true;
      else
        ok = grow_one(st, aux_ctor_weights(), cfg, rng, int(raw_points) + added);
      if (!ok) break;
      ++added;
    }
    if (added == 0 || !forced) continue;
    Problem check;
    check.constructions = st.plan;
    try {
      build_diagram(check, seed, cfg.build);
    } catch (const Error&) {
      continue;
    }
    return st.plan;
  }
  throw Error(Errc::exhausted_retries, "could not sample buildable auxiliary constructions");
}

// ---------------------------------------------------------------------------
// Generate Data

namespace {

int goal_priority(PredKind k) {
  switch (k) {
    case PredKind::eqratio: return 90;
    case PredKind::eqangle: return 80;
    case PredKind::cong: return 70;
    case PredKind::para: return 60;
    case PredKind::perp: return 60;
    case PredKind::cyclic: return 50;
    case PredKind::midp: return 45;
    case PredKind::circle: return 44;
    case PredKind::simtri: return 40;
    case PredKind::contri: return 39;
    case PredKind::coll: return 30;
    case PredKind::idc: return 0;
  }
  return 0;
}

std::optional<SynthItem> attempt_item(const SynthConfig& cfg, std::uint64_t item_seed) {
  std::vector<ConstructionStmt> raw, aug;
  try {
    raw = rand_construction(cfg, item_seed);
    aug = add_aux_constructions(raw, cfg, mix_seed(item_seed, 0x417));
  } catch (const Error&) {
    return std::nullopt;
  }

  Problem augp;
  augp.constructions = aug;
  Diagram d_aug;
  try {
    d_aug = build_diagram(augp, item_seed, cfg.build);
  } catch (const Error&) {
    return std::nullopt;
  }

  // the raw diagram shares the augmented coordinates so the two fact sets
  // live in one numeric world
  std::set<std::string> raw_points;
  for (const auto& s : raw)
    for (const auto& n : s.new_points) raw_points.insert(n);
  Diagram d_raw;
  d_raw.seed = d_aug.seed;
  d_raw.plan = raw;
  for (const auto& [name, v] : d_aug.coords)
    if (raw_points.count(name)) d_raw.coords[name] = v;
  for (const auto& [x, e] : d_aug.merged)
    if (raw_points.count(x) && raw_points.count(e)) d_raw.merged.push_back({x, e});

  FactBase fb_raw, fb_aug;
  try {
    fb_raw = saturate(construction_premises(raw), d_raw, cfg.saturate);
    fb_aug = saturate(construction_premises(aug), d_aug, cfg.saturate);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (fb_raw.budget_exhausted() || fb_aug.budget_exhausted()) return std::nullopt;

  struct Candidate {
    Predicate pred;
    int len;
    int priority;
    std::string key;
  };
  std::optional<Candidate> best;
  for (const Fact& f : fb_aug.facts()) {
    if (f.pred.kind == PredKind::idc) continue;
    if (std::holds_alternative<PremiseSrc>(f.source)) continue;
    bool raw_only = std::all_of(f.pred.args.begin(), f.pred.args.end(),
                                [&](const std::string& n) { return raw_points.count(n) > 0; });
    if (!raw_only) continue;
    if (prove(fb_raw, f.pred)) continue;  // derivable without the aux points
    auto dag = prove(fb_aug, f.pred);
    if (!dag) continue;
    Candidate c{f.pred, proof_length(*dag), goal_priority(f.pred.kind), canonical_key(f.pred)};
    if (!best || c.len > best->len ||
        (c.len == best->len &&
         (c.priority > best->priority || (c.priority == best->priority && c.key < best->key))))
      best = std::move(c);
  }
  if (!best || best->len < 1) return std::nullopt;

  SynthItem item;
  item.problem.constructions = raw;
  item.problem.goals = {canonical(best->pred)};
  item.aux.assign(aug.begin() + long(raw.size()), aug.end());
  item.proof_len = best->len;
  item.seed = item_seed;

  // interactive sessions replay the aux through add_point on a raw build;
  // emit only items that survive that exact path
  try {
    Diagram ds = build_diagram(Problem{raw, {}}, item_seed, cfg.build);
    for (const ConstructionStmt& st : item.aux) ds = add_point(ds, st, cfg.build);
    FactBase fbs = saturate(construction_premises(ds.plan), ds, cfg.saturate);
    if (!prove(fbs, item.problem.goals.front())) return std::nullopt;
  } catch (const Error&) {
    return std::nullopt;
  }
  return item;
}

}  // namespace

void generate_data(const SynthConfig& cfg, std::uint64_t seed,
                   const std::function<bool(const SynthItem&)>& sink) {
  for (int i = 0; i < cfg.max_sample; ++i) {
    auto item = attempt_item(cfg, mix_seed(seed, std::uint64_t(i)));
    if (item && !sink(*item)) return;
  }
}

// ---------------------------------------------------------------------------
// Cache and pipeline

SynthCache::SynthCache(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      SynthItem item = SynthItem::from_json(nlohmann::json::parse(line));
      std::string key = content_key(item);
      if (seen_.insert(key).second) items_.push_back(std::move(item));
    } catch (...) {
      continue;  // tolerate corrupt lines
    }
  }
}

std::string SynthCache::content_key(const SynthItem& item) {
  std::string key = serialize(item.problem);
  for (const auto& s : item.aux) key += "|" + serialize(s);
  return key;
}

bool SynthCache::append(const SynthItem& item) {
  std::lock_guard<std::mutex> lock(mu_);
  std::string key = content_key(item);
  if (!seen_.insert(key).second) return false;
  items_.push_back(item);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << item.to_json().dump() << "\n" << std::flush;
  }
  return true;
}

PipelineResult pipeline(const SynthConfig& cfg, int count, const std::string& cache_path,
                        double timeout_seconds, std::uint64_t seed, int jobs) {
  using clock = std::chrono::steady_clock;
  auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(
                                     std::chrono::duration<double>(timeout_seconds));
  if (count < 1) throw Error(Errc::config_error, "pipeline needs count >= 1");

  SynthCache cache(cache_path);
  PipelineResult res;

  auto select = [&]() {
    std::vector<std::pair<double, std::size_t>> ranked;
    const auto& items = cache.items();
    for (std::size_t i = 0; i < items.size(); ++i) {
      double gap = std::abs(double(items[i].proof_len) - cfg.kappa);
      if (gap <= cfg.tolerance) ranked.emplace_back(gap, i);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<SynthItem> out;
    for (std::size_t i = 0; i < ranked.size() && int(out.size()) < count; ++i)
      out.push_back(items[ranked[i].second]);
    return out;
  };

  res.items = select();
  res.stats.cache_hits_at_start = long(res.items.size());
  std::uint64_t round = 0;
  while (int(res.items.size()) < count) {
    if (clock::now() >= deadline) break;
    ++res.stats.generation_rounds;
    std::uint64_t round_seed = mix_seed(seed, 0xC0DE + round++);
    if (jobs <= 1) {
      generate_data(cfg, round_seed, [&](const SynthItem& item) {
        if (cache.append(item)) ++res.stats.generated;
        return clock::now() < deadline;
      });
    } else {
      // deterministic parallel generation: attempts are partitioned by index
      // and merged in index order
      std::vector<std::optional<SynthItem>> slots(std::size_t(cfg.max_sample));
      std::vector<std::thread> workers;
      for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&, w]() {
          for (int i = w; i < cfg.max_sample; i += jobs) {
            if (clock::now() >= deadline) return;
            SynthConfig local = cfg;
            std::uint64_t item_seed = mix_seed(round_seed, std::uint64_t(i));
            auto item = attempt_item(local, item_seed);
            if (item) slots[std::size_t(i)] = std::move(*item);
          }
        });
      for (auto& t : workers) t.join();
      for (auto& slot : slots)
        if (slot && cache.append(*slot)) ++res.stats.generated;
    }
    res.items = select();
  }

  if (int(res.items.size()) < count) {
    res.shortfall = count - int(res.items.size());
  } else {
    res.items.resize(std::size_t(count));
  }
  return res;
}

}  // namespace geo
