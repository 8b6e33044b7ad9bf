#include "pho/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "pho/errors.hpp"

namespace pho {

char modality_tag(Modality m) { return m == Modality::kVisible ? 'V' : 'I'; }

Modality other(Modality m) {
  return m == Modality::kVisible ? Modality::kInfrared : Modality::kVisible;
}

bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + " has dimension " +
                            std::to_string(got) + ", expected " +
                            std::to_string(want));
  }
}

FeatureBatch::FeatureBatch(Matrix features, std::vector<Modality> modality,
                           std::vector<int> class_id)
    : features_(std::move(features)),
      modality_(std::move(modality)),
      class_id_(std::move(class_id)) {
  const auto rows = static_cast<std::size_t>(features_.rows());
  if (modality_.size() != rows || class_id_.size() != rows) {
    throw DimensionMismatch("feature rows, modality tags and class ids differ in length");
  }
  if (rows > 0 && features_.cols() < 1) {
    throw DimensionMismatch("feature dimension must be at least 1");
  }
  if (!features_.allFinite()) throw NonFiniteValue("feature batch");
  for (int c : class_id_) {
    if (c < 0) throw InvalidArgument("class ids must be non-negative");
  }
}

Eigen::Index FeatureBatch::count(Modality m) const {
  return std::count(modality_.begin(), modality_.end(), m);
}

std::vector<Eigen::Index> FeatureBatch::indices(Modality m) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (modality_[i] == m) out.push_back(i);
  }
  return out;
}

FeatureBatch FeatureBatch::with_features(Matrix features) const {
  if (features.rows() != features_.rows()) {
    throw DimensionMismatch("replacement features have a different row count");
  }
  return FeatureBatch(std::move(features), modality_, class_id_);
}

FeatureBatch FeatureBatch::select(const std::vector<Eigen::Index>& rows) const {
  Matrix f(static_cast<Eigen::Index>(rows.size()), dim());
  std::vector<Modality> m;
  std::vector<int> c;
  m.reserve(rows.size());
  c.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    f.row(static_cast<Eigen::Index>(k)) = features_.row(rows[k]);
    m.push_back(modality_[rows[k]]);
    c.push_back(class_id_[rows[k]]);
  }
  return FeatureBatch(std::move(f), std::move(m), std::move(c));
}

FeatureBatch FeatureBatch::only(Modality m) const { return select(indices(m)); }

ModalityMeans::ModalityMeans(Vector x, Vector y)
    : x_bar(std::move(x)), y_bar(std::move(y)) {
  require_dim(y_bar.size(), x_bar.size(), "infrared mean");
  if (!x_bar.allFinite() || !y_bar.allFinite()) throw NonFiniteValue("modality means");
}

TransformMatrix::TransformMatrix(Matrix a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols()) {
    throw DimensionMismatch("transform must be square, got " +
                            std::to_string(a_.rows()) + "x" +
                            std::to_string(a_.cols()));
  }
  if (!a_.allFinite()) throw NonFiniteValue("transform matrix");
}

TransformMatrix TransformMatrix::identity(Eigen::Index n) {
  return TransformMatrix(Matrix::Identity(n, n));
}

TransformMatrix TransformMatrix::zero(Eigen::Index n) {
  return TransformMatrix(Matrix::Zero(n, n));
}

SimplexWeights::SimplexWeights(Vector w) : w_(std::move(w)) {
  if (w_.size() < 1) throw InvalidArgument("simplex weights need at least one entry");
  if (!w_.allFinite()) throw NonFiniteValue("simplex weights");
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (w_[i] < 0.0 || w_[i] > 1.0) {
      throw InvalidArgument("simplex weight " + std::to_string(i) + " outside [0,1]");
    }
  }
  if (std::abs(w_.sum() - 1.0) > kSumTolerance) {
    throw InvalidArgument("simplex weights do not sum to 1");
  }
}

SimplexWeights SimplexWeights::uniform(Eigen::Index n) {
  return SimplexWeights(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

ModalityMeans batch_means(const FeatureBatch& batch) {
  const Eigen::Index n = batch.dim();
  Vector sx = Vector::Zero(n);
  Vector sy = Vector::Zero(n);
  Eigen::Index m = 0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (batch.modality(i) == Modality::kVisible) {
      sx += batch.row(i).transpose();
      ++m;
    } else {
      sy += batch.row(i).transpose();
      ++k;
    }
  }
  if (m == 0) throw EmptyModality("batch has no visible items");
  if (k == 0) throw EmptyModality("batch has no infrared items");
  return ModalityMeans(sx / static_cast<double>(m), sy / static_cast<double>(k));
}

ClassMeans class_means(const FeatureBatch& batch) {
  std::map<int, ClassStat> groups;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    auto& g = groups[batch.class_id(i)];
    g.class_id = batch.class_id(i);
    if (batch.modality(i) == Modality::kVisible) {
      g.visible_rows.push_back(i);
    } else {
      g.infrared_rows.push_back(i);
    }
  }
  ClassMeans out;
  for (auto& [id, g] : groups) {
    if (g.visible_rows.empty() || g.infrared_rows.empty()) {
      ++out.dropped;
      continue;
    }
    g.x_bar = Vector::Zero(batch.dim());
    for (auto r : g.visible_rows) g.x_bar += batch.row(r).transpose();
    g.x_bar /= static_cast<double>(g.n_p());
    g.y_bar = Vector::Zero(batch.dim());
    for (auto r : g.infrared_rows) g.y_bar += batch.row(r).transpose();
    g.y_bar /= static_cast<double>(g.n_q());
    out.classes.push_back(std::move(g));
  }
  return out;
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

std::size_t Rng::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Vector Rng::normal_vector(Eigen::Index n, double stddev) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(0.0, stddev);
  return v;
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(0.0, stddev);
  }
  return m;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw InvalidArgument("malformed rng state");
}

}  // namespace pho
