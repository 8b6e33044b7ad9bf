#pragma once

#include <string>
#include <vector>

#include "pho/core_types.hpp"

namespace pho {

struct LossParams {
  double beta = 0.5;            // weight of the per-sample terms in L_intra
  double gamma = 1.0;           // multiplier of L_intra inside the CCL hinge
  double rho = 0.3;             // CCL margin
  double lambda = 1.0;          // weight of L_CCL in the total objective
  double triplet_margin = 0.3;  // hetero-center triplet margin
  // RBF bandwidths for MMD, as multiples of the batch median pairwise distance.
  std::vector<double> mmd_bandwidths{0.5, 1.0, 2.0, 4.0};
  double gem_p = 3.0;

  void validate() const;
};

// Scalar loss plus (optionally) its gradient with respect to the rows of the
// input (feature rows or logits, depending on the loss).
struct LossValue {
  double value = 0.0;
  Matrix grad;
  bool degenerate = false;  // loss undefined for this batch; value set to 0
};

struct CclResult {
  LossValue ccl;
  LossValue intra;
  double min_inter = 0.0;
  bool hinge_active = false;
};

struct LossBreakdown {
  double l_id = 0.0;
  double l_hc_tri = 0.0;
  double l_mmd = 0.0;
  double l_intra = 0.0;
  double l_ccl = 0.0;
  double l_total = 0.0;  // l_id + l_hc_tri + l_mmd + lambda * l_ccl
};

struct LossComponents {
  double l_id = 0.0;
  double l_hc_tri = 0.0;
  double l_mmd = 0.0;
  double l_intra = 0.0;
  double l_ccl = 0.0;
};

// Euclidean norm of v. The companion direction v / sqrt(|v|^2 + 1e-12) is used
// as its gradient so that coincident points give a finite (zero) gradient.
inline constexpr double kNormSmoothing = 1e-12;

// Intra-class alignment:
//   (1/Nc) sum_c [ |A x_c - y_c| + beta ( mean_p |A X_cp - y_c|
//                                       + mean_q |A x_c - Y_cq| ) ]
// A is held constant; the gradient is with respect to batch rows.
LossValue intra_loss(const TransformMatrix& a_star, const ClassMeans& classes,
                     const FeatureBatch& batch, double beta,
                     bool with_grad = false);

// Cross-modality consistent learning loss:
//   [rho + gamma L_intra - min_{i != j} |A x_i - y_j|]_+
CclResult ccl_loss(const TransformMatrix& a_star, const ClassMeans& classes,
                   const FeatureBatch& batch, const LossParams& params,
                   bool with_grad = false);

// Mean softmax cross-entropy. Gradient is with respect to the logits.
LossValue identity_loss(const Matrix& logits, const std::vector<int>& labels,
                        bool with_grad = false);

// Hetero-center triplet loss on per-class modality centers: every center is
// an anchor, the same class's other-modality center its positive, and the
// nearest center of any other class its negative.
double hc_triplet_loss(const ClassMeans& classes, double margin);
LossValue hc_triplet_loss(const ClassMeans& classes, const FeatureBatch& batch,
                          double margin, bool with_grad);

// Biased multi-bandwidth RBF MMD^2 between the visible and infrared rows.
// Bandwidths are absolute here; kernel values are summed over bandwidths.
double mmd_loss(const Matrix& visible, const Matrix& infrared,
                const std::vector<double>& bandwidths);
LossValue mmd_loss(const FeatureBatch& batch,
                   const std::vector<double>& bandwidths, bool with_grad);

double median_pairwise_distance(const Matrix& rows);

// Generalized-mean pooling over frames (one frame per row), entries clamped
// below at kGemEpsilon.
inline constexpr double kGemEpsilon = 1e-6;
Vector gem_pool(const Matrix& frames, double p);

LossBreakdown total_loss(const LossComponents& parts, const LossParams& params);

}  // namespace pho
