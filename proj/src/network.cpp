#include "pho/network.hpp"

#include <cmath>

#include "pho/errors.hpp"

namespace pho {

Matrix Dense::apply(const Matrix& in) const {
  require_dim(in.cols(), in_dim(), "layer input");
  Matrix out = in * w.transpose();
  out.rowwise() += b.col(0).transpose();
  return out;
}

void EncoderShape::validate() const {
  if (input_dim < 1 || stem_dim < 1 || hidden_dim < 1 || embed_dim < 1) {
    throw InvalidArgument("encoder layer sizes must be positive");
  }
  if (num_classes < 1) throw InvalidArgument("encoder needs at least one class");
}

namespace {

Dense make_dense(int in, int out, Rng* rng) {
  Dense d{Matrix::Zero(out, in), Matrix::Zero(out, 1)};
  if (rng != nullptr) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index i = 0; i < d.w.rows(); ++i) {
      for (Eigen::Index j = 0; j < d.w.cols(); ++j) d.w(i, j) = rng->uniform(-limit, limit);
    }
  }
  return d;
}

}  // namespace

TwoStreamEncoder TwoStreamEncoder::init(const EncoderShape& s, Rng& rng) {
  s.validate();
  TwoStreamEncoder e(s);
  e.visible_stem = make_dense(s.input_dim, s.stem_dim, &rng);
  e.infrared_stem = make_dense(s.input_dim, s.stem_dim, &rng);
  e.trunk_hidden = make_dense(s.stem_dim, s.hidden_dim, &rng);
  e.trunk_out = make_dense(s.hidden_dim, s.embed_dim, &rng);
  e.head = make_dense(s.embed_dim, s.num_classes, &rng);
  return e;
}

TwoStreamEncoder TwoStreamEncoder::zeros(const EncoderShape& s) {
  s.validate();
  TwoStreamEncoder e(s);
  e.visible_stem = make_dense(s.input_dim, s.stem_dim, nullptr);
  e.infrared_stem = make_dense(s.input_dim, s.stem_dim, nullptr);
  e.trunk_hidden = make_dense(s.stem_dim, s.hidden_dim, nullptr);
  e.trunk_out = make_dense(s.hidden_dim, s.embed_dim, nullptr);
  e.head = make_dense(s.embed_dim, s.num_classes, nullptr);
  return e;
}

void TwoStreamEncoder::for_each(const std::function<void(const std::string&, Matrix&)>& f) {
  f("visible_stem.w", visible_stem.w);
  f("visible_stem.b", visible_stem.b);
  f("infrared_stem.w", infrared_stem.w);
  f("infrared_stem.b", infrared_stem.b);
  f("trunk_hidden.w", trunk_hidden.w);
  f("trunk_hidden.b", trunk_hidden.b);
  f("trunk_out.w", trunk_out.w);
  f("trunk_out.b", trunk_out.b);
  f("head.w", head.w);
  f("head.b", head.b);
}

void TwoStreamEncoder::for_each(
    const std::function<void(const std::string&, const Matrix&)>& f) const {
  const_cast<TwoStreamEncoder*>(this)->for_each(
      [&](const std::string& name, Matrix& m) { f(name, m); });
}

std::size_t TwoStreamEncoder::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

ForwardCache forward(const TwoStreamEncoder& enc, const FeatureBatch& raw,
                     bool normalize) {
  require_dim(raw.dim(), enc.shape().input_dim, "raw input");
  ForwardCache c;
  c.inputs = raw.features();
  c.modality = raw.modalities();
  c.normalized = normalize;

  const Eigen::Index b = raw.size();
  c.stem.resize(b, enc.shape().stem_dim);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Dense& stem = raw.modality(i) == Modality::kVisible ? enc.visible_stem
                                                              : enc.infrared_stem;
    c.stem.row(i) = (stem.w * raw.row(i).transpose() + stem.b.col(0)).array().tanh().transpose();
  }
  c.hidden = enc.trunk_hidden.apply(c.stem).array().tanh();
  c.z = enc.trunk_out.apply(c.hidden);
  if (normalize) {
    c.embedding.resize(c.z.rows(), c.z.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
      c.embedding.row(i) = c.z.row(i) / std::sqrt(c.z.row(i).squaredNorm() + kEmbedNormSmoothing);
    }
  } else {
    c.embedding = c.z;
  }
  c.logits = enc.head.apply(c.embedding);
  return c;
}

Matrix embed(const TwoStreamEncoder& enc, const FeatureBatch& raw, bool normalize) {
  return forward(enc, raw, normalize).embedding;
}

TwoStreamEncoder backward(const TwoStreamEncoder& enc, const ForwardCache& c,
                          const Matrix& grad_embedding, const Matrix& grad_logits) {
  TwoStreamEncoder g = enc.zeros_like();
  const Eigen::Index b = c.inputs.rows();

  g.head.w = grad_logits.transpose() * c.embedding;
  g.head.b = grad_logits.colwise().sum().transpose();
  const Matrix g_emb = grad_embedding + grad_logits * enc.head.w;

  Matrix g_z(b, c.z.cols());
  if (c.normalized) {
    for (Eigen::Index i = 0; i < b; ++i) {
      const double s = std::sqrt(c.z.row(i).squaredNorm() + kEmbedNormSmoothing);
      const double zg = c.z.row(i).dot(g_emb.row(i));
      g_z.row(i) = g_emb.row(i) / s - c.z.row(i) * (zg / (s * s * s));
    }
  } else {
    g_z = g_emb;
  }

  g.trunk_out.w = g_z.transpose() * c.hidden;
  g.trunk_out.b = g_z.colwise().sum().transpose();
  const Matrix g_hidden_pre =
      ((g_z * enc.trunk_out.w).array() * (1.0 - c.hidden.array().square())).matrix();

  g.trunk_hidden.w = g_hidden_pre.transpose() * c.stem;
  g.trunk_hidden.b = g_hidden_pre.colwise().sum().transpose();
  const Matrix g_stem_pre =
      ((g_hidden_pre * enc.trunk_hidden.w).array() * (1.0 - c.stem.array().square())).matrix();

  for (Eigen::Index i = 0; i < b; ++i) {
    Dense& stem = c.modality[static_cast<std::size_t>(i)] == Modality::kVisible
                      ? g.visible_stem
                      : g.infrared_stem;
    stem.w += g_stem_pre.row(i).transpose() * c.inputs.row(i);
    stem.b.col(0) += g_stem_pre.row(i).transpose();
  }
  return g;
}

void LrSchedule::validate() const {
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) throw InvalidArgument("base_lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (warmup_epochs < 0) throw InvalidArgument("warmup_epochs must be non-negative");
  for (std::size_t k = 0; k < decay_points.size(); ++k) {
    const auto& [epoch, factor] = decay_points[k];
    if (k > 0 && epoch <= decay_points[k - 1].first) {
      throw InvalidArgument("decay epochs must be strictly increasing");
    }
    if (!(factor > 0.0 && factor <= 1.0)) throw InvalidArgument("decay factors must lie in (0, 1]");
  }
}

double lr_at(const LrSchedule& s, int epoch, double step_fraction) {
  const double t = static_cast<double>(epoch) + step_fraction;
  if (s.warmup_epochs > 0 && t < static_cast<double>(s.warmup_epochs)) {
    return s.base_lr * t / static_cast<double>(s.warmup_epochs);
  }
  double factor = 1.0;
  for (const auto& [at, f] : s.decay_points) {
    if (epoch >= at) factor = f;
  }
  return s.base_lr * factor;
}

void sgd_momentum_step(Matrix& param, Matrix& velocity, const Matrix& grad,
                       double lr, double momentum) {
  velocity = momentum * velocity + grad;
  param -= lr * velocity;
}

}  // namespace pho
