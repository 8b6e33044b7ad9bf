#include "pho/sas.hpp"

#include <cmath>

#include "pho/errors.hpp"

namespace pho {

namespace {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("alpha must be a finite non-negative number");
  }
}

}  // namespace

double p1_objective(const TransformMatrix& a, const ModalityMeans& means,
                    const SasParams& params) {
  require_dim(a.dim(), means.dim(), "transform");
  const Vector r = a.matrix() * means.x_bar - means.y_bar;
  return r.squaredNorm() + params.alpha * a.matrix().squaredNorm();
}

Matrix p1_gradient(const Matrix& a, const ModalityMeans& means, double alpha) {
  require_dim(a.rows(), means.dim(), "transform");
  const Vector r = a * means.x_bar - means.y_bar;
  return 2.0 * r * means.x_bar.transpose() + 2.0 * alpha * a;
}

TransformMatrix solve_sas(const ModalityMeans& means, const SasParams& params) {
  check_alpha(params.alpha);
  const Eigen::Index n = means.dim();
  const double denom = means.x_bar.squaredNorm() + params.alpha;
  if (denom == 0.0) {
    throw DegenerateInput("alpha = 0 and the visible mean is zero");
  }
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) = means.y_bar[i] * means.x_bar[j] / denom;
    }
  }
  return TransformMatrix(std::move(a));
}

}  // namespace pho
