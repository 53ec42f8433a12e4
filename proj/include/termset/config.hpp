#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "termset/error.hpp"

namespace termset {

enum class Method { centroid, snr, eigencentrality, svm_linear, svm_rbf };

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::centroid, Method::eigencentrality, Method::snr, Method::svm_linear, Method::svm_rbf};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::centroid: return "centroid";
    case Method::snr: return "snr";
    case Method::eigencentrality: return "eigencentrality";
    case Method::svm_linear: return "svm-linear";
    case Method::svm_rbf: return "svm-rbf";
  }
  return "?";
}

// Row labels used in report tables.
inline const char* display_name(Method m) {
  switch (m) {
    case Method::centroid: return "centroid expansion";
    case Method::snr: return "signal to noise";
    case Method::eigencentrality: return "eigencentrality";
    case Method::svm_linear: return "simple margin linear";
    case Method::svm_rbf: return "simple margin rbf";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (s == to_string(m)) return m;
  throw ValidationError("unknown method \"" + std::string(s) +
                        "\" (expected centroid, snr, eigencentrality, svm-linear or svm-rbf)");
}

inline bool is_centrality(Method m) {
  return m == Method::centroid || m == Method::snr || m == Method::eigencentrality;
}

struct PowerIterationConfig {
  double tolerance = 1e-16;  // on 1 - cos between successive iterates
  std::size_t max_iters = 100000;
};

struct SmoConfig {
  double tolerance = 1e-3;
  std::size_t max_iters = 100000;
};

struct ExpansionConfig {
  Method method = Method::centroid;
  std::size_t k = 10;
  double C = 1.0;
  std::optional<double> gamma;  // RBF width; 1/dim when unset
  double snr_epsilon = 1e-6;
  bool class_weighting = false;
  PowerIterationConfig power;
  SmoConfig smo;
  unsigned threads = 1;

  double gamma_for(std::size_t dim) const {
    return gamma ? *gamma : 1.0 / static_cast<double>(dim);
  }

  void validate() const {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (!(C > 0.0)) throw ValidationError("C must be positive");
    if (gamma && !(*gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(snr_epsilon > 0.0)) throw ValidationError("snr epsilon must be positive");
  }
};

inline void to_json(nlohmann::json& j, const ExpansionConfig& c) {
  j = nlohmann::json{{"method", to_string(c.method)},
                     {"k", c.k},
                     {"C", c.C},
                     {"gamma", c.gamma ? nlohmann::json(*c.gamma) : nlohmann::json(nullptr)},
                     {"snr_epsilon", c.snr_epsilon},
                     {"class_weighting", c.class_weighting},
                     {"power_tolerance", c.power.tolerance},
                     {"power_max_iters", c.power.max_iters},
                     {"smo_tolerance", c.smo.tolerance},
                     {"smo_max_iters", c.smo.max_iters}};
}

// Missing keys keep their defaults so clients may send partial configs.
inline void from_json(const nlohmann::json& j, ExpansionConfig& c) {
  c = ExpansionConfig{};
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
  if (j.contains("C")) c.C = j.at("C").get<double>();
  if (j.contains("gamma") && !j.at("gamma").is_null()) c.gamma = j.at("gamma").get<double>();
  if (j.contains("snr_epsilon")) c.snr_epsilon = j.at("snr_epsilon").get<double>();
  if (j.contains("class_weighting")) c.class_weighting = j.at("class_weighting").get<bool>();
  if (j.contains("power_tolerance")) c.power.tolerance = j.at("power_tolerance").get<double>();
  if (j.contains("power_max_iters")) c.power.max_iters = j.at("power_max_iters").get<std::size_t>();
  if (j.contains("smo_tolerance")) c.smo.tolerance = j.at("smo_tolerance").get<double>();
  if (j.contains("smo_max_iters")) c.smo.max_iters = j.at("smo_max_iters").get<std::size_t>();
  c.validate();
}

}  // namespace termset
