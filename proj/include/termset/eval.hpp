#pragma once

// Oracle-driven evaluation: a predefined gold term set answers every
// labeling query, and the score of an expansion method is the mean number
// of gold terms among the candidates of one round.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "termset/config.hpp"
#include "termset/embedding.hpp"
#include "termset/error.hpp"
#include "termset/expand.hpp"
#include "termset/labeled_set.hpp"

namespace termset {

struct GoldTermSet {
  std::string name;
  std::vector<std::string> terms;  // sorted, unique
  std::unordered_set<std::string> lookup;

  GoldTermSet() = default;
  GoldTermSet(std::string n, std::vector<std::string> ts) : name(std::move(n)) {
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    if (ts.empty()) throw ValidationError("gold term set \"" + name + "\" is empty");
    terms = std::move(ts);
    lookup.insert(terms.begin(), terms.end());
  }

  bool contains(const std::string& t) const { return lookup.count(t) > 0; }

  std::size_t count_in(const EmbeddingModel& model) const {
    std::size_t n = 0;
    for (const auto& t : terms) n += model.contains(t) ? 1 : 0;
    return n;
  }
};

// One term per line, lowercased; blank lines and '#' comment lines skipped.
inline GoldTermSet read_term_set(std::istream& in, std::string name) {
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    auto fields = detail::split_ws(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    std::string t(fields.front());
    for (std::size_t i = 1; i < fields.size(); ++i) (t += ' ') += fields[i];
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    terms.push_back(std::move(t));
  }
  return GoldTermSet(std::move(name), std::move(terms));
}

inline GoldTermSet load_term_set(const std::string& path, std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  if (name.empty()) {
    auto slash = path.find_last_of('/');
    name = path.substr(slash == std::string::npos ? 0 : slash + 1);
    auto dot = name.find_last_of('.');
    if (dot != std::string::npos && dot > 0) name.resize(dot);
  }
  try {
    return read_term_set(in, name);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline Label oracle_label(const std::string& term, const GoldTermSet& gold) {
  return gold.contains(term) ? Label::positive : Label::negative;
}

namespace detail {

// Uniform integer in [0, n) from mt19937_64 by rejection, identical on
// every platform (unlike std::uniform_int_distribution).
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do v = rng(); while (v >= limit);
  return v % n;
}

inline std::vector<std::string> sample(std::vector<std::string> pool, std::size_t count,
                                       std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace detail

inline constexpr std::size_t kSeedPositives = 5;
inline constexpr std::size_t kSeedNegatives = 5;

// Samples 5 gold and 5 non-gold terms from `universe` (a sorted
// vocabulary). Depends only on the universe, the gold set and the seed.
inline LabeledTermSet make_initial_set(const GoldTermSet& gold,
                                       const std::vector<std::string>& universe,
                                       std::uint64_t seed) {
  std::vector<std::string> in_gold, outside;
  for (const auto& t : universe) (gold.contains(t) ? in_gold : outside).push_back(t);
  if (in_gold.size() < kSeedPositives)
    throw ValidationError("gold set \"" + gold.name + "\" has only " +
                          std::to_string(in_gold.size()) + " terms in the vocabulary");
  if (outside.size() < kSeedNegatives)
    throw ValidationError("vocabulary has only " + std::to_string(outside.size()) +
                          " terms outside gold set \"" + gold.name + "\"");
  std::mt19937_64 rng(seed);
  auto pos = detail::sample(std::move(in_gold), kSeedPositives, rng);
  auto neg = detail::sample(std::move(outside), kSeedNegatives, rng);
  return LabeledTermSet::from_seeds(pos, neg);
}

inline std::vector<std::string> sorted_vocabulary(const EmbeddingModel& model) {
  auto v = model.terms();
  std::sort(v.begin(), v.end());
  return v;
}

inline LabeledTermSet make_initial_set(const GoldTermSet& gold, const EmbeddingModel& model,
                                       std::uint64_t seed) {
  return make_initial_set(gold, sorted_vocabulary(model), seed);
}

struct TrialRecord {
  std::uint64_t seed = 0;
  std::string model_id;
  std::string gold;
  ExpansionConfig config;
  LabeledTermSet initial_set;
  std::vector<int> per_iteration_positives;
  std::vector<std::vector<std::string>> candidates;  // per iteration
  std::size_t fallbacks = 0;        // iterations that used the centroid fallback
  int exhausted_at = -1;            // first iteration returning fewer than k terms
  int gold_exhausted_at = -1;       // iteration after which every in-vocabulary gold term is labeled
  LabeledTermSet final_set;

  double mean_positives() const {
    if (per_iteration_positives.empty()) return 0.0;
    double s = 0.0;
    for (int p : per_iteration_positives) s += p;
    return s / static_cast<double>(per_iteration_positives.size());
  }
};

// Runs `steps` expand/label rounds from `initial`, labeling with the oracle.
inline TrialRecord run_trial(const EmbeddingModel& model, const ExpansionConfig& config,
                             const GoldTermSet& gold, const LabeledTermSet& initial,
                             std::size_t steps, std::uint64_t seed = 0,
                             std::string model_id = {}) {
  config.validate();
  initial.require_in_vocabulary(model);
  TrialRecord rec;
  rec.seed = seed;
  rec.model_id = std::move(model_id);
  rec.gold = gold.name;
  rec.config = config;
  rec.initial_set = initial;
  LabeledTermSet labeled = initial;
  const std::size_t gold_total = gold.count_in(model);
  auto gold_labeled = [&] {
    std::size_t n = 0;
    for (const auto& e : labeled.entries()) n += gold.contains(e.term) ? 1 : 0;
    return n;
  };
  std::size_t gold_seen = gold_labeled();
  for (std::size_t it = 0; it < steps; ++it) {
    Expansion e;
    try {
      e = expand(model, labeled, config);
    } catch (const ConvergenceError& err) {
      throw ConvergenceError("iteration " + std::to_string(it + 1) + ": " + err.what(),
                             err.residual());
    } catch (const ValidationError& err) {
      throw ValidationError("iteration " + std::to_string(it + 1) + ": " + err.what());
    }
    if (e.fallback) ++rec.fallbacks;
    auto cands = candidate_terms(e);
    if (cands.size() < config.k && rec.exhausted_at < 0) rec.exhausted_at = static_cast<int>(it + 1);
    std::vector<bool> labels;
    int positives = 0;
    for (const auto& t : cands) {
      const bool p = oracle_label(t, gold) == Label::positive;
      labels.push_back(p);
      positives += p ? 1 : 0;
    }
    labeled = update_labeled_set(labeled, cands, labels, static_cast<int>(it + 1));
    gold_seen += static_cast<std::size_t>(positives);
    if (gold_seen >= gold_total && rec.gold_exhausted_at < 0)
      rec.gold_exhausted_at = static_cast<int>(it + 1);
    rec.per_iteration_positives.push_back(positives);
    rec.candidates.push_back(std::move(cands));
  }
  rec.final_set = std::move(labeled);
  return rec;
}

inline TrialRecord run_trial(const EmbeddingModel& model, const ExpansionConfig& config,
                             const GoldTermSet& gold, std::size_t steps, std::uint64_t seed,
                             std::string model_id = {}) {
  return run_trial(model, config, gold, make_initial_set(gold, model, seed), steps, seed,
                   std::move(model_id));
}

struct NamedModel {
  std::string id;
  std::shared_ptr<const EmbeddingModel> model;
};

struct ExperimentConfig {
  std::size_t n_inits = 10;
  std::size_t steps = 20;
  std::uint64_t seed_base = 1;
  unsigned threads = 1;
  ExpansionConfig base;  // method is overridden per cell; k and hyperparameters apply to all
};

struct TrialSummary {
  std::uint64_t seed = 0;
  std::vector<std::string> initial_positives;
  std::vector<std::string> initial_negatives;
  std::vector<int> per_iteration_positives;
  std::size_t fallbacks = 0;
  int exhausted_at = -1;
  int gold_exhausted_at = -1;

  friend bool operator==(const TrialSummary&, const TrialSummary&) = default;
};

struct ReportCell {
  std::string gold;
  Method method = Method::centroid;
  std::string model;
  double mean = 0.0;
  double std_dev = 0.0;  // across trial means
  std::size_t n_trials = 0;
  std::size_t gold_in_vocab = 0;
  bool ok = true;
  std::string error;
  std::vector<TrialSummary> trials;
};

struct ExperimentReport {
  std::vector<std::string> golds;
  std::vector<Method> methods;
  std::vector<std::string> models;
  std::vector<ReportCell> cells;  // gold-major, then method, then model
  nlohmann::json config = nlohmann::json::object();

  const ReportCell* find(const std::string& gold, Method method, const std::string& model) const {
    for (const auto& c : cells)
      if (c.gold == gold && c.method == method && c.model == model) return &c;
    return nullptr;
  }

  bool all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const ReportCell& c) { return c.ok; });
  }
};

// Cells are filled from trials in seed order, so the result does not
// depend on how trials were scheduled across threads.
inline void summarize_cell(ReportCell& cell) {
  cell.n_trials = cell.trials.size();
  if (cell.trials.empty()) return;
  std::vector<double> means;
  for (const auto& t : cell.trials) {
    double s = 0.0;
    for (int p : t.per_iteration_positives) s += p;
    means.push_back(t.per_iteration_positives.empty()
                        ? 0.0
                        : s / static_cast<double>(t.per_iteration_positives.size()));
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= static_cast<double>(means.size());
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  cell.mean = m;
  cell.std_dev = means.size() > 1 ? std::sqrt(var / static_cast<double>(means.size() - 1)) : 0.0;
}

// Every (gold, method, model) cell runs the same n_inits seeds. Initial
// sets are drawn from the vocabulary shared by all models, so they are
// identical across models and methods.
inline ExperimentReport run_experiment(const std::vector<NamedModel>& models,
                                       const std::vector<Method>& methods,
                                       const std::vector<GoldTermSet>& golds,
                                       const ExperimentConfig& config) {
  if (models.empty() || methods.empty() || golds.empty())
    throw ValidationError("an experiment needs at least one model, method and term set");
  if (config.n_inits == 0) throw ValidationError("n_inits must be at least 1");
  config.base.validate();

  std::vector<std::string> universe = sorted_vocabulary(*models.front().model);
  for (std::size_t m = 1; m < models.size(); ++m) {
    std::vector<std::string> other = sorted_vocabulary(*models[m].model), common;
    std::set_intersection(universe.begin(), universe.end(), other.begin(), other.end(),
                          std::back_inserter(common));
    universe = std::move(common);
  }

  ExperimentReport report;
  for (const auto& g : golds) report.golds.push_back(g.name);
  report.methods = methods;
  for (const auto& m : models) report.models.push_back(m.id);
  report.config = {{"n_inits", config.n_inits},
                   {"steps", config.steps},
                   {"k", config.base.k},
                   {"seed_base", config.seed_base},
                   {"expansion", config.base}};
  report.config["expansion"].erase("method");

  struct Task {
    std::size_t cell;
    std::size_t trial;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<LabeledTermSet>> initial(golds.size());
  std::vector<std::string> seed_errors(golds.size());
  for (std::size_t g = 0; g < golds.size(); ++g) {
    try {
      for (std::size_t s = 0; s < config.n_inits; ++s)
        initial[g].push_back(make_initial_set(golds[g], universe, config.seed_base + s));
    } catch (const Error& e) {
      seed_errors[g] = e.what();
      initial[g].clear();
    }
    for (Method method : methods)
      for (const auto& m : models) {
        ReportCell cell;
        cell.gold = golds[g].name;
        cell.method = method;
        cell.model = m.id;
        cell.gold_in_vocab = golds[g].count_in(*m.model);
        cell.trials.resize(initial[g].size());
        if (!seed_errors[g].empty()) {
          cell.ok = false;
          cell.error = seed_errors[g];
        }
        for (std::size_t s = 0; s < initial[g].size(); ++s)
          tasks.push_back({report.cells.size(), s});
        report.cells.push_back(std::move(cell));
      }
  }

  std::vector<std::string> errors(tasks.size());
  const std::size_t per_gold = methods.size() * models.size();
  auto run_task = [&](std::size_t ti) {
    const Task& t = tasks[ti];
    const std::size_t g = t.cell / per_gold;
    const std::size_t method_i = (t.cell % per_gold) / models.size();
    const std::size_t model_i = t.cell % models.size();
    ExpansionConfig cfg = config.base;
    cfg.method = methods[method_i];
    cfg.threads = 1;
    const std::uint64_t seed = config.seed_base + t.trial;
    try {
      TrialRecord rec = run_trial(*models[model_i].model, cfg, golds[g], initial[g][t.trial],
                                  config.steps, seed, models[model_i].id);
      report.cells[t.cell].trials[t.trial] = {seed,
                                              rec.initial_set.positives(),
                                              rec.initial_set.negatives(),
                                              rec.per_iteration_positives,
                                              rec.fallbacks,
                                              rec.exhausted_at,
                                              rec.gold_exhausted_at};
    } catch (const Error& e) {
      errors[ti] = "seed " + std::to_string(seed) + ": " + e.what();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(std::max<std::size_t>(tasks.size(), 1))));
  if (threads == 1) {
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) run_task(ti);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t ti = w; ti < tasks.size(); ti += threads) run_task(ti);
      });
    for (auto& th : pool) th.join();
  }

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    if (errors[ti].empty()) continue;
    auto& cell = report.cells[tasks[ti].cell];
    cell.ok = false;
    if (cell.error.empty()) cell.error = errors[ti];
  }
  for (auto& cell : report.cells) {
    if (cell.ok) summarize_cell(cell);
    else cell.n_trials = cell.trials.size();
  }
  return report;
}

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : c.trials)
      trials.push_back({{"seed", t.seed},
                        {"initial_positives", t.initial_positives},
                        {"initial_negatives", t.initial_negatives},
                        {"per_iteration_positives", t.per_iteration_positives},
                        {"fallbacks", t.fallbacks},
                        {"exhausted_at", t.exhausted_at},
                        {"gold_exhausted_at", t.gold_exhausted_at}});
    cells.push_back({{"gold", c.gold},
                     {"method", to_string(c.method)},
                     {"model", c.model},
                     {"mean", c.mean},
                     {"std", c.std_dev},
                     {"n_trials", c.n_trials},
                     {"gold_in_vocab", c.gold_in_vocab},
                     {"status", c.ok ? "ok" : "failed"},
                     {"error", c.ok ? nlohmann::json(nullptr) : nlohmann::json(c.error)},
                     {"trials", trials}});
  }
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : r.methods) methods.push_back(to_string(m));
  return {{"golds", r.golds}, {"methods", methods}, {"models", r.models},
          {"config", r.config}, {"cells", cells}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  r.golds = j.at("golds").get<std::vector<std::string>>();
  for (const auto& m : j.at("methods")) r.methods.push_back(parse_method(m.get<std::string>()));
  r.models = j.at("models").get<std::vector<std::string>>();
  if (j.contains("config")) r.config = j.at("config");
  for (const auto& c : j.at("cells")) {
    ReportCell cell;
    cell.gold = c.at("gold").get<std::string>();
    cell.method = parse_method(c.at("method").get<std::string>());
    cell.model = c.at("model").get<std::string>();
    cell.mean = c.at("mean").get<double>();
    cell.std_dev = c.value("std", 0.0);
    cell.n_trials = c.value("n_trials", std::size_t{0});
    cell.gold_in_vocab = c.value("gold_in_vocab", std::size_t{0});
    cell.ok = c.value("status", std::string("ok")) == "ok";
    if (!cell.ok && c.contains("error") && c.at("error").is_string())
      cell.error = c.at("error").get<std::string>();
    if (c.contains("trials"))
      for (const auto& t : c.at("trials"))
        cell.trials.push_back({t.at("seed").get<std::uint64_t>(),
                               t.value("initial_positives", std::vector<std::string>{}),
                               t.value("initial_negatives", std::vector<std::string>{}),
                               t.at("per_iteration_positives").get<std::vector<int>>(),
                               t.value("fallbacks", std::size_t{0}),
                               t.value("exhausted_at", -1), t.value("gold_exhausted_at", -1)});
    r.cells.push_back(std::move(cell));
  }
  return r;
}

// One block per gold set: methods as rows, models as columns, two decimals.
inline std::string render_table(const ExperimentReport& r) {
  std::size_t label_w = 0;
  for (Method m : r.methods) label_w = std::max(label_w, std::string(display_name(m)).size());
  label_w += 2;
  std::vector<std::size_t> col_w;
  for (const auto& m : r.models) col_w.push_back(std::max<std::size_t>(m.size(), 6) + 2);

  std::ostringstream out;
  for (std::size_t g = 0; g < r.golds.size(); ++g) {
    if (g > 0) out << '\n';
    out << r.golds[g] << '\n';
    out << std::string(label_w, ' ');
    for (std::size_t c = 0; c < r.models.size(); ++c) {
      out << std::string(col_w[c] - r.models[c].size(), ' ') << r.models[c];
    }
    out << '\n';
    for (Method m : r.methods) {
      const std::string name = display_name(m);
      out << name << std::string(label_w - name.size(), ' ');
      for (std::size_t c = 0; c < r.models.size(); ++c) {
        const ReportCell* cell = r.find(r.golds[g], m, r.models[c]);
        std::string v = "-";
        if (cell && !cell->ok) v = "FAIL";
        else if (cell) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.2f", cell->mean);
          v = buf;
        }
        out << std::string(col_w[c] - std::min(col_w[c], v.size()), ' ') << v;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace termset
