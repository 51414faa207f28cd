#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capgest/error.hpp"
#include "capgest/signal.hpp"

namespace testutil {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Uniform points on the unit sphere in R^n.
inline Eigen::MatrixXd sphere(Eigen::Index rows, Eigen::Index n, std::mt19937_64& rng) {
  Eigen::MatrixXd m = gaussian(rows, n, rng);
  m.rowwise().normalize();
  return m;
}

inline capgest::Recording flat_recording(std::size_t frames, double value, std::string user = "u01") {
  capgest::Recording r;
  r.user_id = std::move(user);
  for (auto& c : r.channels) c.assign(frames, value);
  return r;
}

inline bool throws_kind(capgest::ErrorKind kind, auto&& fn) {
  try {
    fn();
  } catch (const capgest::Error& e) {
    return e.kind() == kind;
  }
  return false;
}

}  // namespace testutil
