#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pho {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Modality : std::uint8_t { kVisible, kInfrared };

char modality_tag(Modality m);
Modality other(Modality m);

bool all_finite(const Eigen::Ref<const Matrix>& m);

// Set of feature vectors, one per row, each tagged with modality and class.
// Immutable after construction.
class FeatureBatch {
 public:
  FeatureBatch() = default;
  FeatureBatch(Matrix features, std::vector<Modality> modality,
               std::vector<int> class_id);

  Eigen::Index size() const { return features_.rows(); }
  Eigen::Index dim() const { return features_.cols(); }
  bool empty() const { return size() == 0; }

  const Matrix& features() const { return features_; }
  auto row(Eigen::Index i) const { return features_.row(i); }
  Modality modality(Eigen::Index i) const { return modality_[i]; }
  int class_id(Eigen::Index i) const { return class_id_[i]; }
  const std::vector<Modality>& modalities() const { return modality_; }
  const std::vector<int>& class_ids() const { return class_id_; }

  Eigen::Index count(Modality m) const;
  std::vector<Eigen::Index> indices(Modality m) const;

  // Same labels, new feature rows (e.g. embeddings of raw inputs).
  FeatureBatch with_features(Matrix features) const;
  FeatureBatch select(const std::vector<Eigen::Index>& rows) const;
  FeatureBatch only(Modality m) const;

 private:
  Matrix features_;
  std::vector<Modality> modality_;
  std::vector<int> class_id_;
};

struct ModalityMeans {
  Vector x_bar;  // visible
  Vector y_bar;  // infrared

  ModalityMeans() = default;
  ModalityMeans(Vector x, Vector y);
  Eigen::Index dim() const { return x_bar.size(); }
};

class TransformMatrix {
 public:
  TransformMatrix() = default;
  explicit TransformMatrix(Matrix a);
  static TransformMatrix identity(Eigen::Index n);
  static TransformMatrix zero(Eigen::Index n);

  const Matrix& matrix() const { return a_; }
  Eigen::Index dim() const { return a_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }

 private:
  Matrix a_;
};

// Diagonal of W(n), kept on the probability simplex.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-12;

  SimplexWeights() = default;
  explicit SimplexWeights(Vector w);
  static SimplexWeights uniform(Eigen::Index n);

  const Vector& values() const { return w_; }
  Eigen::Index dim() const { return w_.size(); }
  double operator[](Eigen::Index i) const { return w_[i]; }

 private:
  Vector w_;
};

struct ClassStat {
  int class_id = 0;
  Vector x_bar;
  Vector y_bar;
  std::vector<Eigen::Index> visible_rows;
  std::vector<Eigen::Index> infrared_rows;

  Eigen::Index n_p() const { return static_cast<Eigen::Index>(visible_rows.size()); }
  Eigen::Index n_q() const { return static_cast<Eigen::Index>(infrared_rows.size()); }
};

struct ClassMeans {
  std::vector<ClassStat> classes;  // ascending class_id
  int dropped = 0;                 // classes lacking one modality

  bool empty() const { return classes.empty(); }
  std::size_t size() const { return classes.size(); }
};

ModalityMeans batch_means(const FeatureBatch& batch);
ClassMeans class_means(const FeatureBatch& batch);

void require_dim(Eigen::Index got, Eigen::Index want, const char* what);

// Seeded random source, passed explicitly wherever randomness is needed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal(double mean = 0.0, double stddev = 1.0);
  double uniform(double lo = 0.0, double hi = 1.0);
  std::size_t index(std::size_t n);  // uniform in [0, n)
  Vector normal_vector(Eigen::Index n, double stddev = 1.0);
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);

  template <typename It>
  void shuffle(It first, It last) {
    for (auto n = last - first; n > 1; --n) {
      auto k = static_cast<decltype(n)>(index(static_cast<std::size_t>(n)));
      std::iter_swap(first + (n - 1), first + k);
    }
  }

  std::string state() const;
  void set_state(const std::string& s);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pho
