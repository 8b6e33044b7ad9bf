#include "pho/aal.hpp"

#include <cmath>

#include "pho/errors.hpp"

namespace pho {

void AalParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("alpha must be a finite non-negative number");
  }
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
}

double p2_objective(const TransformMatrix& a, const Vector& w,
                    const ModalityMeans& means, double alpha) {
  require_dim(a.dim(), means.dim(), "transform");
  require_dim(w.size(), means.dim(), "weights");
  const Matrix& m = a.matrix();
  const Eigen::Index n = means.dim();
  double fit = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = m.row(i).dot(means.x_bar) - means.y_bar[i];
    fit += w[i] * w[i] * r * r;
  }
  return fit + alpha * m.squaredNorm();
}

double p2_objective(const TransformMatrix& a, const SimplexWeights& w,
                    const ModalityMeans& means, double alpha) {
  return p2_objective(a, w.values(), means, alpha);
}

TransformMatrix solve_p21(const Vector& w_hat, const ModalityMeans& means,
                          double alpha) {
  const Eigen::Index n = means.dim();
  require_dim(w_hat.size(), n, "weights");
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  if ((w_hat.array() < 0.0).any()) throw InvalidArgument("weights must be non-negative");
  const double sx = means.x_bar.squaredNorm();
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w2 = w_hat[i] * w_hat[i];
    const double denom = w2 * sx + alpha;
    if (denom == 0.0) {
      throw DegenerateInput("row " + std::to_string(i) +
                            " has zero denominator (alpha = 0 with zero weight or zero visible mean)");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) = w2 * means.y_bar[i] * means.x_bar[j] / denom;
    }
  }
  return TransformMatrix(std::move(a));
}

TransformMatrix solve_p21(const SimplexWeights& w_hat,
                          const ModalityMeans& means, double alpha) {
  return solve_p21(w_hat.values(), means, alpha);
}

Vector alignment_errors(const TransformMatrix& a, const ModalityMeans& means) {
  require_dim(a.dim(), means.dim(), "transform");
  const Vector r = a.matrix() * means.x_bar - means.y_bar;
  return r.array().square();
}

SimplexWeights solve_p22(const Vector& errors) {
  const Eigen::Index n = errors.size();
  if (n < 1) throw InvalidArgument("error vector is empty");
  if (!errors.allFinite() || (errors.array() < 0.0).any()) {
    throw InvalidArgument("alignment errors must be finite and non-negative");
  }
  const auto is_zero = [](double e) { return e < kZeroError; };
  Vector w = Vector::Zero(n);
  bool any_nonzero = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (is_zero(errors[i])) continue;
    any_nonzero = true;
    double ratio_sum = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!is_zero(errors[t])) ratio_sum += errors[i] / errors[t];
    }
    w[i] = 1.0 / ratio_sum;
  }
  if (!any_nonzero) return SimplexWeights::uniform(n);
  return SimplexWeights(std::move(w));
}

AalSolution solve_aal(const ModalityMeans& means, const AalParams& params,
                      const SimplexWeights& w_init) {
  params.validate();
  require_dim(w_init.dim(), means.dim(), "initial weights");

  AalSolution sol;
  SimplexWeights w = w_init;
  double previous_end = 0.0;
  for (int it = 1; it <= params.max_iters; ++it) {
    TransformMatrix a = solve_p21(w, means, params.alpha);
    const double after_a = p2_objective(a, w, means, params.alpha);
    sol.objective_trace.push_back(after_a);

    const Vector e = alignment_errors(a, means);
    const bool perfect = (e.array() < kZeroError).all();
    w = solve_p22(e);
    const double after_w = p2_objective(a, w, means, params.alpha);
    sol.objective_trace.push_back(after_w);

    sol.a_star = std::move(a);
    sol.iterations = it;
    if (perfect) break;
    const double reference = it == 1 ? after_a : previous_end;
    if (std::abs(reference - after_w) < params.tol) break;
    previous_end = after_w;
  }
  sol.w_star = std::move(w);
  return sol;
}

AalSolution solve_aal(const ModalityMeans& means, const AalParams& params) {
  return solve_aal(means, params, SimplexWeights::uniform(means.dim()));
}

}  // namespace pho
