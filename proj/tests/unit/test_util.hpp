#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracle.hpp"
#include "pho/core_types.hpp"

namespace testutil {

inline oracle::Vec to_vec(const pho::Vector& v) { return {v.data(), v.data() + v.size()}; }

// Row-major entries of any matrix.
inline oracle::Vec flatten(const pho::Matrix& m) {
  oracle::Vec out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

inline pho::Matrix unflatten(const oracle::Vec& v, Eigen::Index rows, Eigen::Index cols) {
  pho::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
  }
  return m;
}

inline oracle::Mat to_mat(const pho::Matrix& m) {
  oracle::Mat out{static_cast<int>(m.rows()), {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.a.push_back(m(i, j));
  }
  return out;
}

inline pho::Matrix from_mat(const oracle::Mat& m) {
  pho::Matrix out(m.n, m.n);
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j < m.n; ++j) out(i, j) = m(i, j);
  }
  return out;
}

inline pho::ModalityMeans random_means(pho::Rng& rng, Eigen::Index n) {
  return pho::ModalityMeans(rng.normal_vector(n), rng.normal_vector(n));
}

// Per class: `per` visible rows around a class center and `per` infrared rows
// around a shifted center.
inline pho::FeatureBatch random_batch(pho::Rng& rng, int classes, int per, Eigen::Index n,
                                      double spread = 0.3) {
  const int rows = classes * per * 2;
  pho::Matrix f(rows, n);
  std::vector<pho::Modality> mods;
  std::vector<int> ids;
  int r = 0;
  for (int c = 0; c < classes; ++c) {
    const pho::Vector center = rng.normal_vector(n);
    const pho::Vector shift = 0.5 * rng.normal_vector(n);
    for (int s = 0; s < per; ++s, ++r) {
      f.row(r) = (center + rng.normal_vector(n, spread)).transpose();
      mods.push_back(pho::Modality::kVisible);
      ids.push_back(c);
    }
    for (int s = 0; s < per; ++s, ++r) {
      f.row(r) = (center + shift + rng.normal_vector(n, spread)).transpose();
      mods.push_back(pho::Modality::kInfrared);
      ids.push_back(c);
    }
  }
  return pho::FeatureBatch(std::move(f), std::move(mods), std::move(ids));
}

// max_i |a_i - b_i| / max(|b_i|, floor)
inline double max_rel_err(const oracle::Vec& a, const oracle::Vec& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(b[i]), floor);
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace testutil
