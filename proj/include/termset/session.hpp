#pragma once

// Interactive expansion sessions: a human annotator plays the labeling
// function. Each session alternates strictly between "expand" and "label".

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "termset/config.hpp"
#include "termset/embedding.hpp"
#include "termset/error.hpp"
#include "termset/expand.hpp"
#include "termset/labeled_set.hpp"
#include "termset/svm.hpp"

namespace termset {

enum class SessionStatus { ready_to_expand, awaiting_labels, closed };

inline const char* to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::ready_to_expand: return "ready-to-expand";
    case SessionStatus::awaiting_labels: return "awaiting-labels";
    case SessionStatus::closed: return "closed";
  }
  return "?";
}

inline SessionStatus parse_session_status(const std::string& s) {
  for (auto v : {SessionStatus::ready_to_expand, SessionStatus::awaiting_labels,
                 SessionStatus::closed})
    if (s == to_string(v)) return v;
  throw ValidationError("unknown session status \"" + s + "\"");
}

struct Session {
  std::string id;
  std::string model_id;
  ExpansionConfig config;
  LabeledTermSet labeled;
  std::vector<std::string> pending;
  int iteration = 0;
  std::vector<int> history;  // positives per completed round
  std::vector<bool> fallbacks;  // per request, whether the centroid fallback was used
  SessionStatus status = SessionStatus::ready_to_expand;
};

inline bool operator==(const Session& a, const Session& b) {
  return a.id == b.id && a.model_id == b.model_id &&
         nlohmann::json(a.config) == nlohmann::json(b.config) && a.labeled == b.labeled &&
         a.pending == b.pending && a.iteration == b.iteration && a.history == b.history &&
         a.fallbacks == b.fallbacks && a.status == b.status;
}

inline constexpr int kSessionSchemaVersion = 1;

inline nlohmann::json session_to_json(const Session& s) {
  return {{"id", s.id},
          {"model", s.model_id},
          {"config", s.config},
          {"labeled", s.labeled},
          {"pending", s.pending},
          {"iteration", s.iteration},
          {"history", s.history},
          {"fallbacks", s.fallbacks},
          {"status", to_string(s.status)},
          {"positives", s.labeled.positive_count()},
          {"negatives", s.labeled.negative_count()}};
}

inline Session session_from_json(const nlohmann::json& j) {
  Session s;
  s.id = j.at("id").get<std::string>();
  s.model_id = j.at("model").get<std::string>();
  s.config = j.at("config").get<ExpansionConfig>();
  s.labeled = j.at("labeled").get<LabeledTermSet>();
  s.pending = j.at("pending").get<std::vector<std::string>>();
  s.iteration = j.at("iteration").get<int>();
  s.history = j.at("history").get<std::vector<int>>();
  s.fallbacks = j.value("fallbacks", std::vector<bool>{});
  s.status = parse_session_status(j.at("status").get<std::string>());
  if (s.pending.empty() != (s.status != SessionStatus::awaiting_labels))
    throw ValidationError("session " + s.id + ": pending candidates do not match status");
  return s;
}

// Models registered at startup, shared read-only by every session.
class ModelRegistry {
public:
  void add(const std::string& id, std::shared_ptr<const EmbeddingModel> model) {
    if (id.empty()) throw ValidationError("model id must not be empty");
    if (!models_.emplace(id, std::move(model)).second)
      throw ValidationError("model \"" + id + "\" registered twice");
  }

  std::shared_ptr<const EmbeddingModel> get(const std::string& id) const {
    auto it = models_.find(id);
    if (it == models_.end()) throw NotFoundError("unknown model \"" + id + "\"");
    return it->second;
  }

  const std::map<std::string, std::shared_ptr<const EmbeddingModel>>& models() const {
    return models_;
  }

  // Manifest: {"id": "path"} or {"id": {"path": "...", "normalize": bool}}.
  // Relative paths resolve against the manifest's directory.
  static ModelRegistry from_manifest(const std::filesystem::path& manifest,
                                     bool normalize_default = true) {
    std::ifstream in(manifest);
    if (!in) throw ValidationError("cannot open manifest " + manifest.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest " + manifest.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
    ModelRegistry reg;
    for (const auto& [id, entry] : j.items()) {
      std::filesystem::path path;
      bool normalize = normalize_default;
      if (entry.is_string()) {
        path = entry.get<std::string>();
      } else if (entry.is_object()) {
        path = entry.at("path").get<std::string>();
        normalize = entry.value("normalize", normalize_default);
      } else {
        throw ValidationError("manifest entry \"" + id + "\" must be a path or an object");
      }
      if (path.is_relative()) path = manifest.parent_path() / path;
      EmbeddingModel m = load_word2vec_text(path.string());
      if (normalize) m = normalize_unit_l2(m);
      reg.add(id, std::make_shared<const EmbeddingModel>(std::move(m)));
    }
    return reg;
  }

private:
  std::map<std::string, std::shared_ptr<const EmbeddingModel>> models_;
};

// One JSON file per session, replaced atomically via write-then-rename.
class SessionStore {
public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const std::string& id) const {
    return dir_ / (id + ".json");
  }

  void save(const Session& s) const {
    const nlohmann::json doc = {{"schema_version", kSessionSchemaVersion},
                                {"session", session_to_json(s)}};
    const auto final_path = path_for(s.id);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw Error("cannot write " + tmp.string());
      out << doc.dump(2) << '\n';
      out.flush();
      if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
  }

  Session load(const std::string& id) const {
    const auto p = path_for(id);
    std::ifstream in(p);
    if (!in) throw NotFoundError("session \"" + id + "\" not found");
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("corrupt session file " + p.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("schema_version", -1) != kSessionSchemaVersion)
      throw ValidationError("session file " + p.string() + " has an unsupported schema version");
    try {
      return session_from_json(doc.at("session"));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("corrupt session file " + p.string() + ": " + e.what());
    }
  }

  bool exists(const std::string& id) const { return std::filesystem::exists(path_for(id)); }

private:
  std::filesystem::path dir_;
};

enum class ExportMode { labeled_positives, classifier_expanded };

inline ExportMode parse_export_mode(const std::string& s) {
  if (s == "labeled-positives") return ExportMode::labeled_positives;
  if (s == "classifier-expanded") return ExportMode::classifier_expanded;
  throw ValidationError("unknown export mode \"" + s +
                        "\" (expected labeled-positives or classifier-expanded)");
}

struct LexiconEntry {
  std::string term;
  std::string provenance;  // "annotated" or "inferred"
  std::optional<double> score;
};

struct CreateSessionRequest {
  std::string model_id;
  ExpansionConfig config;
  std::vector<std::string> seed_positives;
  std::vector<std::string> seed_negatives;
};

// Owns live sessions. Calls on one session are serialized; a call that
// finds the session busy fails with BusyError instead of waiting.
class SessionService {
public:
  explicit SessionService(std::shared_ptr<const ModelRegistry> models,
                          std::optional<std::filesystem::path> data_dir = std::nullopt)
      : models_(std::move(models)) {
    if (data_dir) store_.emplace(*data_dir);
  }

  const ModelRegistry& models() const { return *models_; }

  Session create_session(const CreateSessionRequest& req) {
    auto model = models_->get(req.model_id);
    req.config.validate();
    if (req.seed_positives.empty()) throw ValidationError("at least one seed positive is required");
    for (const auto* list : {&req.seed_positives, &req.seed_negatives})
      for (const auto& t : *list)
        if (!model->contains(t))
          throw ValidationError("seed term \"" + t + "\" is not in the vocabulary of model \"" +
                                req.model_id + "\"");
    for (const auto& t : req.seed_negatives)
      if (std::find(req.seed_positives.begin(), req.seed_positives.end(), t) !=
          req.seed_positives.end())
        throw ValidationError("conflict: seed \"" + t + "\" is both positive and negative");

    Session s;
    s.model_id = req.model_id;
    s.config = req.config;
    s.config.threads = 1;
    s.labeled = LabeledTermSet::from_seeds(req.seed_positives, req.seed_negatives);
    auto slot = std::make_shared<Slot>();
    {
      std::lock_guard lk(map_mutex_);
      do s.id = new_id(); while (sessions_.count(s.id) || (store_ && store_->exists(s.id)));
      slot->session = s;
      sessions_.emplace(s.id, slot);
    }
    persist_locked(s);
    return s;
  }

  Session get(const std::string& id) {
    auto slot = find(id);
    auto lk = lock(*slot, id);
    return slot->session;
  }

  std::vector<std::string> request_candidates(const std::string& id) {
    auto slot = find(id);
    auto lk = lock(*slot, id);
    Session& s = slot->session;
    if (s.status == SessionStatus::awaiting_labels)
      throw StateError("session " + id + " has labels outstanding for " +
                       std::to_string(s.pending.size()) + " candidates");
    if (s.status == SessionStatus::closed) throw StateError("session " + id + " is closed");
    auto model = models_->get(s.model_id);
    Expansion e = expand(*model, s.labeled, s.config);
    Session next = s;
    next.pending = candidate_terms(e);
    next.fallbacks.push_back(e.fallback);
    if (!next.pending.empty()) next.status = SessionStatus::awaiting_labels;
    persist_locked(next);
    s = std::move(next);
    return s.pending;
  }

  Session submit_labels(const std::string& id, const std::map<std::string, bool>& labels) {
    auto slot = find(id);
    auto lk = lock(*slot, id);
    Session& s = slot->session;
    if (s.status != SessionStatus::awaiting_labels)
      throw StateError("session " + id + " has no pending candidates");
    std::vector<std::string> missing, unexpected;
    for (const auto& t : s.pending)
      if (!labels.count(t)) missing.push_back(t);
    for (const auto& [t, v] : labels)
      if (std::find(s.pending.begin(), s.pending.end(), t) == s.pending.end())
        unexpected.push_back(t);
    if (!missing.empty() || !unexpected.empty()) {
      std::string msg = "label set does not match pending candidates;";
      if (!missing.empty()) msg += " missing: [" + join(missing) + "]";
      if (!unexpected.empty()) msg += " unexpected term: [" + join(unexpected) + "]";
      throw ValidationError(msg);
    }
    std::vector<bool> ordered;
    int positives = 0;
    for (const auto& t : s.pending) {
      ordered.push_back(labels.at(t));
      positives += labels.at(t) ? 1 : 0;
    }
    Session next = s;
    next.labeled = update_labeled_set(s.labeled, s.pending, ordered, s.iteration + 1);
    next.iteration += 1;
    next.history.push_back(positives);
    next.pending.clear();
    next.status = SessionStatus::ready_to_expand;
    persist_locked(next);
    s = std::move(next);
    return s;
  }

  Session close_session(const std::string& id) {
    auto slot = find(id);
    auto lk = lock(*slot, id);
    Session next = slot->session;
    next.pending.clear();
    next.status = SessionStatus::closed;
    persist_locked(next);
    slot->session = std::move(next);
    return slot->session;
  }

  std::vector<LexiconEntry> export_lexicon(const std::string& id, ExportMode mode,
                                           double threshold = 0.0) {
    Session s = get(id);
    std::vector<LexiconEntry> out;
    for (const auto& t : s.labeled.positives()) out.push_back({t, "annotated", std::nullopt});
    if (mode == ExportMode::labeled_positives) return out;

    if (s.labeled.positive_count() == 0 || s.labeled.negative_count() == 0)
      throw ValidationError("classifier expansion needs both positive and negative labels");
    auto model = models_->get(s.model_id);
    ExpansionConfig cfg = s.config;
    if (is_centrality(cfg.method)) cfg.method = Method::svm_rbf;
    const SvmModel svm = train_svm(s.labeled, *model, cfg);
    for (const auto& n : classify_all(svm, *model, s.labeled, threshold))
      out.push_back({n.term, "inferred", n.score});
    return out;
  }

  void persist(const std::string& id) {
    auto slot = find(id);
    auto lk = lock(*slot, id);
    persist_locked(slot->session);
  }

  // Reloads a session from disk, replacing any in-memory copy.
  Session restore(const std::string& id) {
    if (!store_) throw NotFoundError("session \"" + id + "\" not found (no data directory)");
    Session s = store_->load(id);
    models_->get(s.model_id);
    std::lock_guard lk(map_mutex_);
    auto& slot = sessions_[id];
    if (!slot) slot = std::make_shared<Slot>();
    std::unique_lock sl(slot->mutex, std::try_to_lock);
    if (!sl.owns_lock()) throw BusyError("session " + id + " is busy");
    slot->session = s;
    return s;
  }

private:
  struct Slot {
    std::mutex mutex;
    Session session;
  };

  std::shared_ptr<Slot> find(const std::string& id) {
    {
      std::lock_guard lk(map_mutex_);
      auto it = sessions_.find(id);
      if (it != sessions_.end()) return it->second;
    }
    if (store_ && store_->exists(id)) {
      restore(id);
      std::lock_guard lk(map_mutex_);
      return sessions_.at(id);
    }
    throw NotFoundError("session \"" + id + "\" not found");
  }

  static std::unique_lock<std::mutex> lock(Slot& slot, const std::string& id) {
    std::unique_lock lk(slot.mutex, std::try_to_lock);
    if (!lk.owns_lock()) throw BusyError("session " + id + " is busy with another request");
    return lk;
  }

  void persist_locked(const Session& s) const {
    if (store_) store_->save(s);
  }

  std::string new_id() {
    std::uniform_int_distribution<std::uint64_t> dist;
    std::ostringstream os;
    os << std::hex << dist(id_rng_);
    return os.str();
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
  }

  std::shared_ptr<const ModelRegistry> models_;
  std::optional<SessionStore> store_;
  std::mutex map_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Slot>> sessions_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

}  // namespace termset
