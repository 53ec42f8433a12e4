#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "termset/embedding.hpp"
#include "termset/error.hpp"

namespace termset {

enum class Label : bool { negative = false, positive = true };

inline Label to_label(bool positive) { return positive ? Label::positive : Label::negative; }

enum class Provenance { seed, annotated };

struct LabeledEntry {
  std::string term;
  Label label = Label::negative;
  Provenance provenance = Provenance::seed;
  int iteration = 0;  // round that produced an annotated entry; 0 for seeds

  friend bool operator==(const LabeledEntry&, const LabeledEntry&) = default;
};

// The evolving labeled set L_t, kept in insertion order. A term may be
// labeled once; relabeling is an error.
class LabeledTermSet {
public:
  LabeledTermSet() = default;

  static LabeledTermSet from_seeds(const std::vector<std::string>& positives,
                                   const std::vector<std::string>& negatives) {
    LabeledTermSet s;
    for (const auto& t : positives) s.add(t, Label::positive, Provenance::seed, 0);
    for (const auto& t : negatives) {
      if (auto l = s.label_of(t)) {
        if (*l == Label::positive)
          throw ValidationError("conflicting seed \"" + t + "\" is both positive and negative");
      }
      s.add(t, Label::negative, Provenance::seed, 0);
    }
    return s;
  }

  void add(const std::string& term, Label label, Provenance provenance, int iteration) {
    if (term.empty()) throw ValidationError("empty term");
    if (index_.count(term)) throw ValidationError("term \"" + term + "\" is already labeled");
    index_.emplace(term, entries_.size());
    entries_.push_back({term, label, provenance, iteration});
    (label == Label::positive ? positives_ : negatives_) += 1;
  }

  bool contains(std::string_view term) const { return index_.count(std::string(term)) > 0; }

  std::optional<Label> label_of(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].label;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t positive_count() const noexcept { return positives_; }
  std::size_t negative_count() const noexcept { return negatives_; }
  const std::vector<LabeledEntry>& entries() const noexcept { return entries_; }

  std::vector<std::string> terms_with(Label label) const {
    std::vector<std::string> out;
    for (const auto& e : entries_)
      if (e.label == label) out.push_back(e.term);
    return out;
  }
  std::vector<std::string> positives() const { return terms_with(Label::positive); }
  std::vector<std::string> negatives() const { return terms_with(Label::negative); }

  void require_in_vocabulary(const EmbeddingModel& model) const {
    for (const auto& e : entries_) model.require_index(e.term);
  }

  ExclusionMask exclusion_mask(const EmbeddingModel& model) const {
    ExclusionMask mask(model.size(), false);
    for (const auto& e : entries_)
      if (auto i = model.index_of(e.term)) mask[*i] = true;
    return mask;
  }

  friend bool operator==(const LabeledTermSet& a, const LabeledTermSet& b) {
    return a.entries_ == b.entries_;
  }

private:
  std::vector<LabeledEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t positives_ = 0;
  std::size_t negatives_ = 0;
};

// L_{t+1} = L_t with each candidate added under its label.
inline LabeledTermSet update_labeled_set(const LabeledTermSet& labeled,
                                         const std::vector<std::string>& candidates,
                                         const std::vector<bool>& labels, int iteration) {
  if (candidates.size() != labels.size())
    throw ValidationError("got " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(candidates.size()) + " candidates");
  LabeledTermSet next = labeled;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    next.add(candidates[i], to_label(labels[i]), Provenance::annotated, iteration);
  return next;
}

inline void to_json(nlohmann::json& j, const LabeledTermSet& s) {
  auto entries = nlohmann::json::array();
  for (const auto& e : s.entries())
    entries.push_back({{"term", e.term},
                       {"label", e.label == Label::positive},
                       {"provenance", e.provenance == Provenance::seed ? "seed" : "annotated"},
                       {"iteration", e.iteration}});
  j = nlohmann::json{{"entries", std::move(entries)}};
}

inline void from_json(const nlohmann::json& j, LabeledTermSet& s) {
  s = LabeledTermSet();
  for (const auto& e : j.at("entries")) {
    const auto prov = e.at("provenance").get<std::string>();
    if (prov != "seed" && prov != "annotated")
      throw ValidationError("unknown provenance \"" + prov + "\"");
    s.add(e.at("term").get<std::string>(), to_label(e.at("label").get<bool>()),
          prov == "seed" ? Provenance::seed : Provenance::annotated, e.at("iteration").get<int>());
  }
}

}  // namespace termset
