#pragma once

#include <vector>

#include "pho/core_types.hpp"

namespace pho {

// Auto-weighted alignment: alternating minimisation of
//   P2(W, A) = sum_i w_i^2 (sum_j A_ij x_bar_j - y_bar_i)^2 + alpha ||A||_F^2
// over A and simplex weights w.
struct AalParams {
  double alpha = 0.1;
  int max_iters = 100;
  double tol = 1e-10;

  void validate() const;
};

struct AalSolution {
  TransformMatrix a_star;
  SimplexWeights w_star;
  std::vector<double> objective_trace;  // P2 after every half-step
  int iterations = 0;
};

// Errors at or below this value are treated as exact zeros by solve_p22.
inline constexpr double kZeroError = 1e-300;

double p2_objective(const TransformMatrix& a, const SimplexWeights& w,
                    const ModalityMeans& means, double alpha);
double p2_objective(const TransformMatrix& a, const Vector& w,
                    const ModalityMeans& means, double alpha);

// Fixed-weight minimiser:
//   A*_ij = w_i^2 y_bar_i x_bar_j / (w_i^2 sum_p x_bar_p^2 + alpha).
// The raw-vector overload accepts any non-negative weights (all ones gives
// exactly the SAS solution).
TransformMatrix solve_p21(const Vector& w_hat, const ModalityMeans& means,
                          double alpha);
TransformMatrix solve_p21(const SimplexWeights& w_hat,
                          const ModalityMeans& means, double alpha);

// E_i = (sum_j A_ij x_bar_j - y_bar_i)^2
Vector alignment_errors(const TransformMatrix& a, const ModalityMeans& means);

// Fixed-map weight update. Dimensions with zero error get weight 0; the rest
// get w_i = 1 / sum_{E_t != 0} (E_i / E_t). An all-zero error vector yields
// uniform weights.
SimplexWeights solve_p22(const Vector& errors);

AalSolution solve_aal(const ModalityMeans& means, const AalParams& params,
                      const SimplexWeights& w_init);
AalSolution solve_aal(const ModalityMeans& means, const AalParams& params);

}  // namespace pho
