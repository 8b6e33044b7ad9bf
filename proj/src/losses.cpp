#include "pho/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pho/errors.hpp"

namespace pho {

namespace {

struct NormTerm {
  double value;
  Vector dir;  // d|v|/dv, smoothed at the origin
};

NormTerm norm_term(const Vector& v) {
  const double sq = v.squaredNorm();
  return {std::sqrt(sq), v / std::sqrt(sq + kNormSmoothing)};
}

// Adds g / |rows| to every listed row of grad (mean-to-member backprop).
void spread(Matrix& grad, const std::vector<Eigen::Index>& rows, const Vector& g) {
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) grad.row(r) += inv * g.transpose();
}

void check_transform(const TransformMatrix& a, const FeatureBatch& batch) {
  require_dim(a.dim(), batch.dim(), "transform");
}

}  // namespace

void LossParams::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string(name) + " must be finite and non-negative");
    }
  };
  nonneg(beta, "beta");
  nonneg(gamma, "gamma");
  nonneg(rho, "rho");
  nonneg(lambda, "lambda");
  nonneg(triplet_margin, "triplet_margin");
  if (mmd_bandwidths.empty()) throw InvalidArgument("mmd_bandwidths must not be empty");
  for (double b : mmd_bandwidths) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("mmd bandwidths must be positive");
  }
  if (!(gem_p >= 1.0)) throw InvalidArgument("gem_p must be at least 1");
}

LossValue intra_loss(const TransformMatrix& a_star, const ClassMeans& classes,
                     const FeatureBatch& batch, double beta, bool with_grad) {
  if (classes.empty()) throw NoValidClasses();
  check_transform(a_star, batch);
  const Matrix& a = a_star.matrix();
  const Matrix at = a.transpose();
  const double inv_nc = 1.0 / static_cast<double>(classes.size());

  LossValue out;
  if (with_grad) out.grad = Matrix::Zero(batch.size(), batch.dim());
  double total = 0.0;
  for (const auto& c : classes.classes) {
    const Vector ax = a * c.x_bar;
    Vector g_mx = Vector::Zero(batch.dim());
    Vector g_my = Vector::Zero(batch.dim());

    const NormTerm t1 = norm_term(ax - c.y_bar);
    total += inv_nc * t1.value;
    g_mx += at * t1.dir;
    g_my -= t1.dir;

    const double wp = beta / static_cast<double>(c.n_p());
    for (auto r : c.visible_rows) {
      const NormTerm t = norm_term(a * batch.row(r).transpose() - c.y_bar);
      total += inv_nc * wp * t.value;
      if (with_grad) out.grad.row(r) += inv_nc * wp * (at * t.dir).transpose();
      g_my -= wp * t.dir;
    }

    const double wq = beta / static_cast<double>(c.n_q());
    for (auto r : c.infrared_rows) {
      const NormTerm t = norm_term(ax - batch.row(r).transpose());
      total += inv_nc * wq * t.value;
      g_mx += wq * (at * t.dir);
      if (with_grad) out.grad.row(r) -= inv_nc * wq * t.dir.transpose();
    }

    if (with_grad) {
      spread(out.grad, c.visible_rows, inv_nc * g_mx);
      spread(out.grad, c.infrared_rows, inv_nc * g_my);
    }
  }
  out.value = total;
  return out;
}

CclResult ccl_loss(const TransformMatrix& a_star, const ClassMeans& classes,
                   const FeatureBatch& batch, const LossParams& params,
                   bool with_grad) {
  CclResult res;
  if (with_grad) res.ccl.grad = Matrix::Zero(batch.size(), batch.dim());
  if (classes.size() < 2) {
    res.ccl.degenerate = true;
    if (!classes.empty()) {
      res.intra = intra_loss(a_star, classes, batch, params.beta, with_grad);
    }
    return res;
  }
  res.intra = intra_loss(a_star, classes, batch, params.beta, with_grad);

  const Matrix& a = a_star.matrix();
  std::vector<Vector> mapped;
  mapped.reserve(classes.size());
  for (const auto& c : classes.classes) mapped.push_back(a * c.x_bar);

  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0;
  std::size_t bj = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = 0; j < classes.size(); ++j) {
      if (i == j) continue;
      const double d = (mapped[i] - classes.classes[j].y_bar).norm();
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  res.min_inter = best;
  const double hinge = params.rho + params.gamma * res.intra.value - best;
  res.hinge_active = hinge > 0.0;
  res.ccl.value = std::max(hinge, 0.0);

  if (with_grad && res.hinge_active) {
    res.ccl.grad = params.gamma * res.intra.grad;
    const NormTerm t = norm_term(mapped[bi] - classes.classes[bj].y_bar);
    spread(res.ccl.grad, classes.classes[bi].visible_rows, -(a.transpose() * t.dir));
    spread(res.ccl.grad, classes.classes[bj].infrared_rows, t.dir);
  }
  return res;
}

LossValue identity_loss(const Matrix& logits, const std::vector<int>& labels,
                        bool with_grad) {
  const Eigen::Index b = logits.rows();
  const Eigen::Index k = logits.cols();
  if (static_cast<std::size_t>(b) != labels.size()) {
    throw DimensionMismatch("one logit row per label required");
  }
  if (b == 0) throw InvalidArgument("identity loss on an empty batch");
  LossValue out;
  if (with_grad) out.grad = Matrix::Zero(b, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) {
      throw LabelOutOfRange("label " + std::to_string(y) + " with " +
                            std::to_string(k) + " classes");
    }
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd ex = (logits.row(i).array() - mx).exp();
    const double z = ex.sum();
    total += std::log(z) + mx - logits(i, y);
    if (with_grad) {
      out.grad.row(i) = ex / z;
      out.grad(i, y) -= 1.0;
    }
  }
  out.value = total / static_cast<double>(b);
  if (with_grad) out.grad /= static_cast<double>(b);
  return out;
}

namespace {

struct Center {
  std::size_t cls;
  Modality mod;
  const Vector* v;
};

}  // namespace

LossValue hc_triplet_loss(const ClassMeans& classes, const FeatureBatch& batch,
                          double margin, bool with_grad) {
  LossValue out;
  if (with_grad) out.grad = Matrix::Zero(batch.size(), batch.dim());
  if (classes.size() < 2) {
    out.degenerate = true;
    return out;
  }
  std::vector<Center> centers;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    centers.push_back({c, Modality::kVisible, &classes.classes[c].x_bar});
    centers.push_back({c, Modality::kInfrared, &classes.classes[c].y_bar});
  }
  const auto rows_of = [&](const Center& ctr) -> const std::vector<Eigen::Index>& {
    const auto& cs = classes.classes[ctr.cls];
    return ctr.mod == Modality::kVisible ? cs.visible_rows : cs.infrared_rows;
  };

  double total = 0.0;
  for (std::size_t ai = 0; ai < centers.size(); ++ai) {
    const Center& anchor = centers[ai];
    const Center& pos = centers[ai ^ 1];  // same class, other modality
    const NormTerm dp = norm_term(*anchor.v - *pos.v);

    double best = std::numeric_limits<double>::infinity();
    std::size_t bn = 0;
    for (std::size_t ni = 0; ni < centers.size(); ++ni) {
      if (centers[ni].cls == anchor.cls) continue;
      const double d = (*anchor.v - *centers[ni].v).norm();
      if (d < best) {
        best = d;
        bn = ni;
      }
    }
    const double term = margin + dp.value - best;
    if (term <= 0.0) continue;
    total += term;
    if (with_grad) {
      const NormTerm dn = norm_term(*anchor.v - *centers[bn].v);
      spread(out.grad, rows_of(anchor), dp.dir - dn.dir);
      spread(out.grad, rows_of(pos), -dp.dir);
      spread(out.grad, rows_of(centers[bn]), dn.dir);
    }
  }
  const double inv = 1.0 / static_cast<double>(centers.size());
  out.value = total * inv;
  if (with_grad) out.grad *= inv;
  return out;
}

double hc_triplet_loss(const ClassMeans& classes, double margin) {
  if (classes.size() < 2) return 0.0;
  double total = 0.0;
  const std::size_t nc = classes.size();
  for (std::size_t c = 0; c < nc; ++c) {
    for (int side = 0; side < 2; ++side) {
      const Vector& a = side == 0 ? classes.classes[c].x_bar : classes.classes[c].y_bar;
      const Vector& p = side == 0 ? classes.classes[c].y_bar : classes.classes[c].x_bar;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < nc; ++o) {
        if (o == c) continue;
        best = std::min(best, (a - classes.classes[o].x_bar).norm());
        best = std::min(best, (a - classes.classes[o].y_bar).norm());
      }
      total += std::max(0.0, margin + (a - p).norm() - best);
    }
  }
  return total / static_cast<double>(2 * nc);
}

namespace {

double kernel(const Eigen::Ref<const Eigen::RowVectorXd>& x,
              const Eigen::Ref<const Eigen::RowVectorXd>& y,
              const std::vector<double>& bandwidths) {
  const double d2 = (x - y).squaredNorm();
  double k = 0.0;
  for (double s : bandwidths) k += std::exp(-d2 / (2.0 * s * s));
  return k;
}

// d k(x, y) / dx
Eigen::RowVectorXd kernel_grad(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                               const Eigen::Ref<const Eigen::RowVectorXd>& y,
                               const std::vector<double>& bandwidths) {
  const Eigen::RowVectorXd diff = x - y;
  const double d2 = diff.squaredNorm();
  double coef = 0.0;
  for (double s : bandwidths) coef -= std::exp(-d2 / (2.0 * s * s)) / (s * s);
  return coef * diff;
}

void check_bandwidths(const std::vector<double>& bandwidths) {
  if (bandwidths.empty()) throw InvalidArgument("at least one MMD bandwidth required");
  for (double b : bandwidths) {
    if (!(b > 0.0)) throw InvalidArgument("MMD bandwidths must be positive");
  }
}

}  // namespace

double mmd_loss(const Matrix& visible, const Matrix& infrared,
                const std::vector<double>& bandwidths) {
  if (visible.rows() == 0) throw EmptyModality("no visible samples for MMD");
  if (infrared.rows() == 0) throw EmptyModality("no infrared samples for MMD");
  require_dim(infrared.cols(), visible.cols(), "infrared samples");
  check_bandwidths(bandwidths);
  const auto m = static_cast<double>(visible.rows());
  const auto n = static_cast<double>(infrared.rows());
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (Eigen::Index i = 0; i < visible.rows(); ++i) {
    for (Eigen::Index j = 0; j < visible.rows(); ++j) {
      kxx += kernel(visible.row(i), visible.row(j), bandwidths);
    }
    for (Eigen::Index j = 0; j < infrared.rows(); ++j) {
      kxy += kernel(visible.row(i), infrared.row(j), bandwidths);
    }
  }
  for (Eigen::Index i = 0; i < infrared.rows(); ++i) {
    for (Eigen::Index j = 0; j < infrared.rows(); ++j) {
      kyy += kernel(infrared.row(i), infrared.row(j), bandwidths);
    }
  }
  const double v = kxx / (m * m) + kyy / (n * n) - 2.0 * kxy / (m * n);
  return std::max(v, 0.0);
}

LossValue mmd_loss(const FeatureBatch& batch, const std::vector<double>& bandwidths,
                   bool with_grad) {
  const auto vi = batch.indices(Modality::kVisible);
  const auto ii = batch.indices(Modality::kInfrared);
  LossValue out;
  Matrix xs(static_cast<Eigen::Index>(vi.size()), batch.dim());
  Matrix ys(static_cast<Eigen::Index>(ii.size()), batch.dim());
  for (std::size_t k = 0; k < vi.size(); ++k) xs.row(static_cast<Eigen::Index>(k)) = batch.row(vi[k]);
  for (std::size_t k = 0; k < ii.size(); ++k) ys.row(static_cast<Eigen::Index>(k)) = batch.row(ii[k]);
  out.value = mmd_loss(xs, ys, bandwidths);
  if (!with_grad) return out;

  out.grad = Matrix::Zero(batch.size(), batch.dim());
  if (out.value <= 0.0) return out;  // clamped
  const auto m = static_cast<double>(xs.rows());
  const auto n = static_cast<double>(ys.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(batch.dim());
    for (Eigen::Index j = 0; j < xs.rows(); ++j) {
      g += (2.0 / (m * m)) * kernel_grad(xs.row(i), xs.row(j), bandwidths);
    }
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
      g -= (2.0 / (m * n)) * kernel_grad(xs.row(i), ys.row(j), bandwidths);
    }
    out.grad.row(vi[static_cast<std::size_t>(i)]) = g;
  }
  for (Eigen::Index i = 0; i < ys.rows(); ++i) {
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(batch.dim());
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
      g += (2.0 / (n * n)) * kernel_grad(ys.row(i), ys.row(j), bandwidths);
    }
    for (Eigen::Index j = 0; j < xs.rows(); ++j) {
      g -= (2.0 / (m * n)) * kernel_grad(ys.row(i), xs.row(j), bandwidths);
    }
    out.grad.row(ii[static_cast<std::size_t>(i)]) = g;
  }
  return out;
}

double median_pairwise_distance(const Matrix& rows) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < rows.rows(); ++j) {
      d.push_back((rows.row(i) - rows.row(j)).norm());
    }
  }
  if (d.empty()) return 0.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(d.begin(), mid);
  return 0.5 * (lower + upper);
}

Vector gem_pool(const Matrix& frames, double p) {
  if (frames.rows() == 0) throw InvalidArgument("gem_pool needs at least one frame");
  if (!(p >= 1.0)) throw InvalidArgument("gem_pool exponent must be at least 1");
  const Eigen::Index n = frames.cols();
  Vector out(n);
  const auto t = static_cast<double>(frames.rows());
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < frames.rows(); ++i) {
      acc += std::pow(std::max(frames(i, j), kGemEpsilon), p);
    }
    out[j] = std::pow(acc / t, 1.0 / p);
  }
  return out;
}

LossBreakdown total_loss(const LossComponents& parts, const LossParams& params) {
  LossBreakdown b;
  b.l_id = parts.l_id;
  b.l_hc_tri = parts.l_hc_tri;
  b.l_mmd = std::max(parts.l_mmd, 0.0);
  b.l_intra = parts.l_intra;
  b.l_ccl = parts.l_ccl;
  b.l_total = b.l_id + b.l_hc_tri + b.l_mmd + params.lambda * b.l_ccl;
  return b;
}

}  // namespace pho
