#pragma once

#include "pho/core_types.hpp"

namespace pho {

// Self-adaptive alignment: ridge-regularised map taking the visible batch
// mean onto the infrared batch mean.
struct SasParams {
  double alpha = 0.1;
};

// ||A x_bar - y_bar||^2 + alpha ||A||_F^2
double p1_objective(const TransformMatrix& a, const ModalityMeans& means,
                    const SasParams& params);

// d/dA of p1_objective: 2 (A x_bar - y_bar) x_bar^T + 2 alpha A.
Matrix p1_gradient(const Matrix& a, const ModalityMeans& means, double alpha);

// A*_ij = y_bar_i x_bar_j / (sum_p x_bar_p^2 + alpha). Rank one.
// Throws DegenerateInput for alpha == 0 with x_bar == 0.
TransformMatrix solve_sas(const ModalityMeans& means, const SasParams& params);

}  // namespace pho
