#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "json.hpp"

namespace sobolev::detail {

using json = nlohmann::json;

inline json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw std::runtime_error("refusing to serialize a non-finite value");
    out.push_back(v[i]);
  }
  return out;
}

inline Eigen::VectorXd vector_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw std::runtime_error(std::string("field '") + field + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::runtime_error(std::string("field '") + field + "' must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::runtime_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace sobolev::detail
