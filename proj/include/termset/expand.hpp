#pragma once

#include "termset/centrality.hpp"
#include "termset/config.hpp"
#include "termset/embedding.hpp"
#include "termset/labeled_set.hpp"
#include "termset/svm.hpp"

namespace termset {

// One expansion step: candidates for the next labeling round.
inline Expansion expand(const EmbeddingModel& model, const LabeledTermSet& labeled,
                        const ExpansionConfig& config) {
  config.validate();
  if (is_centrality(config.method)) return expand_centrality(model, labeled, config);
  return expand_svm(model, labeled, config);
}

inline std::vector<std::string> candidate_terms(const Expansion& e) {
  std::vector<std::string> out;
  out.reserve(e.candidates.size());
  for (const auto& n : e.candidates) out.push_back(n.term);
  return out;
}

}  // namespace termset
