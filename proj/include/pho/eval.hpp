#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pho/core_types.hpp"

namespace pho {

struct RetrievalResult {
  std::vector<double> cmc;  // cmc[k-1] = rank-k accuracy, k = 1..K
  double map = 0.0;
  std::vector<double> per_query_ap;

  double rank(int k) const;  // rank-k accuracy, clamped to K
};

// Gallery indices by ascending Euclidean distance to the (optionally
// transformed) query; ties keep ascending gallery index.
std::vector<Eigen::Index> rank_gallery(
    const Eigen::Ref<const Vector>& query, const FeatureBatch& gallery,
    const std::optional<TransformMatrix>& transform = std::nullopt);

// CMC over ranks 1..k and mAP (AP = mean of precision@r over the positions r
// of relevant gallery items). Every query class must occur in the gallery.
RetrievalResult evaluate(const FeatureBatch& queries, const FeatureBatch& gallery,
                         const std::optional<TransformMatrix>& transform, int k);

std::string metrics_json(const RetrievalResult& r, const std::string& transform_note);
std::string cmc_csv(const RetrievalResult& r);

}  // namespace pho
