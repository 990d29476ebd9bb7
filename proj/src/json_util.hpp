#pragma once

#include <Eigen/Dense>

#include "json.hpp"

namespace recourse::detail {

inline nlohmann::json to_json_array(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Eigen::VectorXd from_json_array(const nlohmann::json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

}  // namespace recourse::detail
