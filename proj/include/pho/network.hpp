#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pho/core_types.hpp"

namespace pho {

// Affine layer acting on row-major sample batches: out = in * w^T + b^T.
struct Dense {
  Matrix w;  // out x in
  Matrix b;  // out x 1

  Eigen::Index in_dim() const { return w.cols(); }
  Eigen::Index out_dim() const { return w.rows(); }
  Matrix apply(const Matrix& in) const;
};

struct EncoderShape {
  int input_dim = 12;
  int stem_dim = 16;
  int hidden_dim = 16;
  int embed_dim = 8;
  int num_classes = 10;

  void validate() const;
  bool operator==(const EncoderShape&) const = default;
};

// Two-stream encoder: a modality-specific tanh stem per modality, a shared
// trunk (tanh hidden layer, linear output) and a linear classifier head on the
// (optionally L2-normalised) embedding.
class TwoStreamEncoder {
 public:
  TwoStreamEncoder() = default;
  static TwoStreamEncoder init(const EncoderShape& shape, Rng& rng);
  static TwoStreamEncoder zeros(const EncoderShape& shape);
  TwoStreamEncoder zeros_like() const { return zeros(shape_); }

  const EncoderShape& shape() const { return shape_; }

  Dense visible_stem;
  Dense infrared_stem;
  Dense trunk_hidden;
  Dense trunk_out;
  Dense head;

  // Visits every trainable tensor in a fixed order.
  void for_each(const std::function<void(const std::string&, Matrix&)>& f);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& f) const;
  std::size_t parameter_count() const;

 private:
  explicit TwoStreamEncoder(EncoderShape shape) : shape_(shape) {}
  EncoderShape shape_;
};

inline constexpr double kEmbedNormSmoothing = 1e-12;

struct ForwardCache {
  Matrix inputs;
  std::vector<Modality> modality;
  Matrix stem;    // tanh activations, B x stem_dim
  Matrix hidden;  // tanh activations, B x hidden_dim
  Matrix z;       // pre-normalisation embedding
  Matrix embedding;
  Matrix logits;
  bool normalized = true;
};

ForwardCache forward(const TwoStreamEncoder& enc, const FeatureBatch& raw,
                     bool normalize);

// Embeddings only (no cache retained), e.g. for evaluation.
Matrix embed(const TwoStreamEncoder& enc, const FeatureBatch& raw, bool normalize);

// Gradients of a scalar objective with respect to every encoder tensor, given
// its gradients with respect to the embeddings and the logits.
TwoStreamEncoder backward(const TwoStreamEncoder& enc, const ForwardCache& cache,
                          const Matrix& grad_embedding, const Matrix& grad_logits);

struct LrSchedule {
  double base_lr = 0.1;
  double momentum = 0.9;
  int warmup_epochs = 0;
  // (epoch, factor): from that epoch on the rate is base_lr * factor.
  std::vector<std::pair<int, double>> decay_points;

  void validate() const;
};

double lr_at(const LrSchedule& schedule, int epoch, double step_fraction);

// In-place SGD with momentum: v <- mu v + g; p <- p - lr v.
void sgd_momentum_step(Matrix& param, Matrix& velocity, const Matrix& grad,
                       double lr, double momentum);

}  // namespace pho
