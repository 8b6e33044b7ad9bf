#include "pho/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "pho/errors.hpp"
#include "pho/format.hpp"

namespace pho {

double RetrievalResult::rank(int k) const {
  if (cmc.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(std::clamp<int>(k, 1, static_cast<int>(cmc.size())));
  return cmc[idx - 1];
}

std::vector<Eigen::Index> rank_gallery(const Eigen::Ref<const Vector>& query,
                                       const FeatureBatch& gallery,
                                       const std::optional<TransformMatrix>& transform) {
  if (gallery.empty()) throw InvalidArgument("gallery is empty");
  require_dim(query.size(), gallery.dim(), "query");
  Vector q = query;
  if (transform) {
    require_dim(transform->dim(), gallery.dim(), "transform");
    q = transform->matrix() * query;
  }
  std::vector<double> dist(static_cast<std::size_t>(gallery.size()));
  for (Eigen::Index g = 0; g < gallery.size(); ++g) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < gallery.dim(); ++j) {
      const double diff = q[j] - gallery.features()(g, j);
      d += diff * diff;
    }
    dist[static_cast<std::size_t>(g)] = d;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(gallery.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
  });
  return order;
}

RetrievalResult evaluate(const FeatureBatch& queries, const FeatureBatch& gallery,
                         const std::optional<TransformMatrix>& transform, int k) {
  if (k < 1) throw InvalidArgument("K must be at least 1");
  if (queries.empty()) throw InvalidArgument("no queries");
  require_dim(queries.dim(), gallery.dim(), "queries");
  const std::set<int> gallery_classes(gallery.class_ids().begin(), gallery.class_ids().end());
  for (int c : queries.class_ids()) {
    if (!gallery_classes.count(c)) throw QueryClassAbsent(c);
  }

  RetrievalResult r;
  std::vector<long> first_hit_counts(static_cast<std::size_t>(k), 0);
  r.per_query_ap.reserve(static_cast<std::size_t>(queries.size()));
  for (Eigen::Index qi = 0; qi < queries.size(); ++qi) {
    const auto order = rank_gallery(queries.row(qi).transpose(), gallery, transform);
    const int label = queries.class_id(qi);
    std::size_t hits = 0;
    double precision_sum = 0.0;
    std::size_t first = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (gallery.class_id(order[pos]) != label) continue;
      ++hits;
      if (hits == 1) first = pos + 1;
      precision_sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
    r.per_query_ap.push_back(precision_sum / static_cast<double>(hits));
    for (std::size_t kk = first; kk <= static_cast<std::size_t>(k); ++kk) {
      ++first_hit_counts[kk - 1];
    }
  }
  const auto nq = static_cast<double>(queries.size());
  r.cmc.resize(static_cast<std::size_t>(k));
  for (std::size_t kk = 0; kk < r.cmc.size(); ++kk) {
    r.cmc[kk] = static_cast<double>(first_hit_counts[kk]) / nq;
  }
  r.map = std::accumulate(r.per_query_ap.begin(), r.per_query_ap.end(), 0.0) / nq;
  return r;
}

std::string metrics_json(const RetrievalResult& r, const std::string& transform_note) {
  nlohmann::ordered_json j;
  j["cmc"] = r.cmc;
  j["map"] = r.map;
  j["per_query_ap"] = r.per_query_ap;
  j["transform"] = transform_note;
  return j.dump(2) + "\n";
}

std::string cmc_csv(const RetrievalResult& r) {
  std::string out = "k,cmc\n";
  for (std::size_t k = 0; k < r.cmc.size(); ++k) {
    out += std::to_string(k + 1) + "," + format_double(r.cmc[k]) + "\n";
  }
  return out;
}

}  // namespace pho
