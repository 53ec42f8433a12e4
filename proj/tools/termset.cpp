// termset: build count models, run oracle evaluations, print expansion
// transcripts and serve interactive sessions.
//
// Exit codes: 0 success, 1 validation error, 2 runtime/convergence failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "termset/count_models.hpp"
#include "termset/embedding.hpp"
#include "termset/eval.hpp"
#include "termset/expand.hpp"
#include "termset/http_api.hpp"
#include "termset/session.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace termset;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void print_config(const std::string& command, const json& cfg) {
  std::cout << "resolved configuration (" << command << "):\n";
  for (const auto& [k, v] : cfg.items()) std::cout << "  " << k << " = " << v.dump() << '\n';
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& s) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << s;
}

EmbeddingModel load_model(const std::string& path, bool raw) {
  EmbeddingModel m = load_word2vec_text(path);
  return raw ? m : normalize_unit_l2(m);
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string(name) + ": " + e.what(), e.residual());
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(name) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(std::string(name) + ": " + e.what());
  }
}

// --- build-model -----------------------------------------------------------

struct BuildOptions {
  std::string corpus;
  std::string scheme = "ppmi";
  double alpha = 0.75;
  std::size_t window = 2;
  std::size_t dim = 200;
  double sv_exponent = 0.5;
  std::size_t min_count = 5;
  std::size_t max_iters = 1000;
  double tolerance = 1e-10;
  std::uint64_t seed = 0x5eed;
  unsigned threads = 1;
  std::string out;
};

int run_build(const BuildOptions& o) {
  const json cfg = {{"corpus", o.corpus},   {"scheme", o.scheme},       {"alpha", o.alpha},
                    {"window", o.window},   {"dim", o.dim},             {"sv_exponent", o.sv_exponent},
                    {"min_count", o.min_count}, {"max_iters", o.max_iters}, {"tolerance", o.tolerance},
                    {"seed", o.seed},       {"threads", o.threads},     {"out", o.out}};
  print_config("build-model", cfg);
  if (o.scheme != "ppmi" && o.scheme != "sppmi")
    throw ValidationError("scheme must be ppmi or sppmi");

  auto counts = stage("count", [&] {
    std::ifstream in(o.corpus);
    if (!in) throw ValidationError("cannot open corpus " + o.corpus);
    auto corpus = read_corpus(in);
    return count_cooccurrences(corpus, o.window, o.min_count, o.threads);
  });
  std::cout << "vocabulary: " << counts.terms.size() << " terms, " << counts.total
            << " co-occurrences\n";
  if (o.dim > counts.terms.size())
    throw ValidationError("factorize: dim " + std::to_string(o.dim) + " exceeds vocabulary size " +
                          std::to_string(counts.terms.size()));

  auto weighted = stage("weight", [&] {
    return o.scheme == "ppmi" ? ppmi(counts) : smoothed_ppmi(counts, o.alpha);
  });
  FactorizationConfig fc;
  fc.dim = o.dim;
  fc.sv_exponent = o.sv_exponent;
  fc.max_iters = o.max_iters;
  fc.tolerance = o.tolerance;
  fc.seed = o.seed;
  auto model = stage("factorize", [&] { return factorize(weighted, fc); });

  // Terms without any positive association get a zero row; they cannot be
  // normalized or ranked, so they are left out of the saved model.
  std::vector<std::string> terms;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < model.size(); ++i)
    if (model.row(i).norm() > 0.0) {
      terms.push_back(model.term(i));
      keep.push_back(static_cast<Eigen::Index>(i));
    }
  Matrix rows(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(model.dim()));
  for (std::size_t r = 0; r < keep.size(); ++r)
    rows.row(static_cast<Eigen::Index>(r)) = model.vectors().row(keep[r]);
  if (keep.size() < model.size())
    std::cout << "dropped " << model.size() - keep.size() << " terms with all-zero rows\n";
  EmbeddingModel out_model(std::move(terms), std::move(rows));

  stage("save", [&] {
    save_word2vec_text(out_model, o.out);
    write_json(o.out + ".config.json", cfg);
    return 0;
  });
  std::cout << "wrote " << out_model.size() << " x " << out_model.dim() << " vectors to " << o.out
            << '\n';
  return 0;
}

// --- evaluate ---------------------------------------------------------------

struct EvalOptions {
  std::vector<std::string> models;
  std::vector<std::string> methods = {"centroid", "eigencentrality", "snr", "svm-linear", "svm-rbf"};
  std::vector<std::string> term_sets;
  std::size_t inits = 10;
  std::size_t steps = 20;
  std::size_t k = 10;
  std::uint64_t seed_base = 1;
  double C = 1.0;
  double gamma = 0.0;
  double snr_epsilon = 1e-6;
  bool class_weighting = false;
  bool raw = false;
  unsigned threads = 1;
  std::string out_json;
  std::string out_table;
};

// "id=path" or just "path" (id = file stem).
std::pair<std::string, std::string> split_model_arg(const std::string& s) {
  auto eq = s.find('=');
  if (eq != std::string::npos) return {s.substr(0, eq), s.substr(eq + 1)};
  return {fs::path(s).stem().string(), s};
}

ExpansionConfig base_config(std::size_t k, double C, double gamma, double snr_epsilon,
                            bool class_weighting) {
  ExpansionConfig c;
  c.k = k;
  c.C = C;
  if (gamma > 0.0) c.gamma = gamma;
  c.snr_epsilon = snr_epsilon;
  c.class_weighting = class_weighting;
  c.validate();
  return c;
}

int run_evaluate(const EvalOptions& o) {
  ExperimentConfig ec;
  ec.n_inits = o.inits;
  ec.steps = o.steps;
  ec.seed_base = o.seed_base;
  ec.threads = o.threads;
  ec.base = base_config(o.k, o.C, o.gamma, o.snr_epsilon, o.class_weighting);

  json cfg = {{"models", o.models}, {"methods", o.methods}, {"term_sets", o.term_sets},
              {"inits", o.inits},   {"steps", o.steps},     {"k", o.k},
              {"seed_base", o.seed_base}, {"normalize", !o.raw}, {"threads", o.threads},
              {"expansion", ec.base}};
  cfg["expansion"].erase("method");
  print_config("evaluate", cfg);

  std::vector<NamedModel> models;
  for (const auto& m : o.models) {
    auto [id, path] = split_model_arg(m);
    models.push_back({id, std::make_shared<const EmbeddingModel>(load_model(path, o.raw))});
  }
  std::vector<Method> methods;
  for (const auto& m : o.methods) methods.push_back(parse_method(m));
  std::vector<GoldTermSet> golds;
  for (const auto& p : o.term_sets) golds.push_back(load_term_set(p));

  ExperimentReport report = run_experiment(models, methods, golds, ec);
  report.config["normalize"] = !o.raw;
  const std::string table = render_table(report);
  std::cout << '\n' << table;
  for (const auto& c : report.cells)
    if (!c.ok)
      std::cout << "FAILED " << c.gold << " / " << to_string(c.method) << " / " << c.model << ": "
                << c.error << '\n';
  if (!o.out_json.empty()) write_json(o.out_json, report_to_json(report));
  if (!o.out_table.empty()) write_text(o.out_table, table);
  return report.all_ok() ? 0 : kExitRuntime;
}

// --- expand -----------------------------------------------------------------

struct ExpandOptions {
  std::string model;
  std::string seeds;
  std::string oracle;
  std::string method = "centroid";
  std::size_t k = 10;
  std::size_t steps = 20;
  std::uint64_t seed = 1;
  double C = 1.0;
  double gamma = 0.0;
  double snr_epsilon = 1e-6;
  bool raw = false;
  std::string out;
};

// Seed file: "term" (positive) or "term pos|neg|+|-" per line, '#' comments.
LabeledTermSet read_seed_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::string> pos, neg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto f = termset::detail::split_ws(line);
    if (f.empty() || f.front().front() == '#') continue;
    const std::string term(f[0]);
    if (f.size() == 1 || f[1] == "pos" || f[1] == "+") pos.push_back(term);
    else if (f[1] == "neg" || f[1] == "-") neg.push_back(term);
    else throw ValidationError(path + ": line " + std::to_string(n) + ": unknown label \"" +
                               std::string(f[1]) + "\"");
  }
  return LabeledTermSet::from_seeds(pos, neg);
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
  return s;
}

int run_expand(const ExpandOptions& o) {
  ExpansionConfig cfg = base_config(o.k, o.C, o.gamma, o.snr_epsilon, false);
  cfg.method = parse_method(o.method);
  json resolved = {{"model", o.model}, {"seeds", o.seeds}, {"oracle", o.oracle},
                   {"steps", o.steps}, {"seed", o.seed},   {"normalize", !o.raw},
                   {"expansion", cfg}};
  print_config("expand", resolved);

  const EmbeddingModel model = load_model(o.model, o.raw);
  const GoldTermSet gold = load_term_set(o.oracle);
  const LabeledTermSet initial =
      o.seeds.empty() ? make_initial_set(gold, model, o.seed) : read_seed_file(o.seeds);
  const TrialRecord rec = run_trial(model, cfg, gold, initial, o.steps, o.seed,
                                    fs::path(o.model).stem().string());

  std::cout << "\nL_0 positives: " << join(initial.positives()) << '\n';
  std::cout << "L_0 negatives: " << join(initial.negatives()) << '\n';
  json iterations = json::array();
  for (std::size_t it = 0; it < rec.candidates.size(); ++it) {
    std::cout << "\nexpand(L_" << it << "): " << rec.per_iteration_positives[it] << "/"
              << rec.candidates[it].size() << " positive\n ";
    json cands = json::array();
    for (const auto& t : rec.candidates[it]) {
      const bool p = oracle_label(t, gold) == Label::positive;
      std::cout << ' ' << (p ? "+" : "-") << t;
      cands.push_back({{"term", t}, {"label", p}});
    }
    std::cout << '\n';
    iterations.push_back({{"iteration", it + 1}, {"candidates", cands},
                          {"positives", rec.per_iteration_positives[it]}});
  }
  std::cout << "\nmean positives per iteration: " << rec.mean_positives() << '\n';
  if (rec.fallbacks > 0) std::cout << "centroid fallback used in " << rec.fallbacks << " iterations\n";
  if (!o.out.empty())
    write_json(o.out, {{"config", resolved},
                       {"initial", initial},
                       {"iterations", iterations},
                       {"mean_positives", rec.mean_positives()},
                       {"fallbacks", rec.fallbacks}});
  return 0;
}

// --- serve ------------------------------------------------------------------

struct ServeOptions {
  std::string manifest;
  std::string data_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool raw = false;
};

int run_serve(ServeOptions o) {
  if (o.data_dir.empty()) {
    const char* env = std::getenv("TERMSET_DATA_DIR");
    o.data_dir = env ? env : "sessions";
  }
  print_config("serve", {{"models", o.manifest}, {"data_dir", o.data_dir}, {"host", o.host},
                         {"port", o.port}, {"normalize", !o.raw}});
  auto registry = std::make_shared<const ModelRegistry>(ModelRegistry::from_manifest(o.manifest, !o.raw));
  for (const auto& [id, m] : registry->models())
    std::cout << "model " << id << ": " << m->size() << " terms, dim " << m->dim() << '\n';
  SessionService service(registry, fs::path(o.data_dir));
  httplib::Server server;
  register_routes(server, service);
  std::cout << "listening on http://" << o.host << ':' << o.port << '\n' << std::flush;
  if (!server.listen(o.host, o.port)) throw Error("cannot listen on " + o.host + ":" + std::to_string(o.port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative term set expansion over distributional models"};
  app.require_subcommand(1);

  BuildOptions build;
  auto* b = app.add_subcommand("build-model", "Count, weight and factorize a corpus into vectors");
  b->add_option("--corpus", build.corpus, "Tokenized corpus, one sentence per line")->required()->check(CLI::ExistingFile);
  b->add_option("--scheme", build.scheme, "ppmi or sppmi")->capture_default_str();
  b->add_option("--alpha", build.alpha, "Context smoothing exponent for sppmi")->capture_default_str();
  b->add_option("--window", build.window, "Symmetric window size")->capture_default_str();
  b->add_option("--dim", build.dim, "Embedding dimension")->capture_default_str();
  b->add_option("--sv-exponent", build.sv_exponent, "Power applied to singular values")->capture_default_str();
  b->add_option("--min-count", build.min_count, "Drop terms rarer than this")->capture_default_str();
  b->add_option("--max-iters", build.max_iters, "Subspace iteration budget")->capture_default_str();
  b->add_option("--tolerance", build.tolerance, "Singular value convergence tolerance")->capture_default_str();
  b->add_option("--seed", build.seed, "Random seed for the SVD start block")->capture_default_str();
  b->add_option("--threads", build.threads, "Counting threads")->capture_default_str();
  b->add_option("--out", build.out, "Output vector file (word2vec text)")->required();

  EvalOptions eval;
  auto* e = app.add_subcommand("evaluate", "Oracle evaluation grid over models x methods x term sets");
  e->add_option("--models", eval.models, "Vector files, optionally id=path")->required();
  e->add_option("--methods", eval.methods, "Expansion methods")->capture_default_str();
  e->add_option("--term-sets", eval.term_sets, "Gold term set files")->required();
  e->add_option("--inits", eval.inits, "Random initial sets per cell")->capture_default_str();
  e->add_option("--steps", eval.steps, "Expansion rounds per trial")->capture_default_str();
  e->add_option("--k", eval.k, "Candidates per round")->capture_default_str();
  e->add_option("--seed-base", eval.seed_base, "First trial seed")->capture_default_str();
  e->add_option("--C", eval.C, "SVM soft-margin parameter")->capture_default_str();
  e->add_option("--gamma", eval.gamma, "RBF gamma (default 1/dim)");
  e->add_option("--snr-epsilon", eval.snr_epsilon, "Zero-variance guard")->capture_default_str();
  e->add_flag("--class-weighting", eval.class_weighting, "Balance SVM classes");
  e->add_flag("--raw", eval.raw, "Do not unit-normalize vectors");
  e->add_option("--threads", eval.threads, "Parallel trials")->capture_default_str();
  e->add_option("--out-json", eval.out_json, "Report JSON path");
  e->add_option("--out-table", eval.out_table, "Report text table path");

  ExpandOptions ex;
  auto* x = app.add_subcommand("expand", "Batch expansion transcript labeled by an oracle term set");
  x->add_option("--model", ex.model, "Vector file")->required();
  x->add_option("--seeds", ex.seeds, "Initial labeled terms (default: sample from the oracle)");
  x->add_option("--oracle", ex.oracle, "Gold term set answering label queries")->required();
  x->add_option("--method", ex.method, "Expansion method")->capture_default_str();
  x->add_option("--k", ex.k, "Candidates per round")->capture_default_str();
  x->add_option("--steps", ex.steps, "Rounds")->capture_default_str();
  x->add_option("--seed", ex.seed, "Seed for sampling the initial set")->capture_default_str();
  x->add_option("--C", ex.C, "SVM soft-margin parameter")->capture_default_str();
  x->add_option("--gamma", ex.gamma, "RBF gamma (default 1/dim)");
  x->add_option("--snr-epsilon", ex.snr_epsilon, "Zero-variance guard")->capture_default_str();
  x->add_flag("--raw", ex.raw, "Do not unit-normalize vectors");
  x->add_option("--out", ex.out, "Transcript JSON path");

  ServeOptions sv;
  auto* s = app.add_subcommand("serve", "HTTP annotation service");
  s->add_option("--models", sv.manifest, "Model manifest JSON (id -> vector file)")->required();
  s->add_option("--data-dir", sv.data_dir, "Session directory (default $TERMSET_DATA_DIR or ./sessions)");
  s->add_option("--host", sv.host)->capture_default_str();
  s->add_option("--port", sv.port)->capture_default_str();
  s->add_flag("--raw", sv.raw, "Do not unit-normalize vectors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*b) return run_build(build);
    if (*e) return run_evaluate(eval);
    if (*x) return run_expand(ex);
    if (*s) return run_serve(sv);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const NotFoundError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
