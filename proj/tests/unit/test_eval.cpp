#include <gtest/gtest.h>

#include <json.hpp>

#include "oracle.hpp"
#include "pho/errors.hpp"
#include "pho/eval.hpp"
#include "test_util.hpp"

using namespace pho;

namespace {

FeatureBatch gallery_of(const Matrix& f, const std::vector<int>& ids) {
  return FeatureBatch(f, std::vector<Modality>(ids.size(), Modality::kVisible), ids);
}

FeatureBatch queries_of(const Matrix& f, const std::vector<int>& ids) {
  return FeatureBatch(f, std::vector<Modality>(ids.size(), Modality::kInfrared), ids);
}

std::vector<oracle::Vec> rows_of(const Matrix& m) {
  std::vector<oracle::Vec> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(testutil::to_vec(m.row(i).transpose()));
  return out;
}

}  // namespace

TEST(RankGallery, QueryItselfRanksFirst) {
  Rng rng(1);
  const Matrix g = rng.normal_matrix(6, 3);
  const auto order = rank_gallery(g.row(4).transpose(), gallery_of(g, {0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(order.front(), 4);
}

TEST(RankGallery, ZeroTransformTiesBreakByIndex) {
  Matrix g(4, 2);
  g << 1, 0, 0, 1, -1, 0, 0, -1;  // equal norms
  const auto order = rank_gallery(Vector::Ones(2), gallery_of(g, {0, 1, 2, 3}), TransformMatrix::zero(2));
  EXPECT_EQ(order, (std::vector<Eigen::Index>{0, 1, 2, 3}));
}

TEST(RankGallery, MatchesFullSortOracle) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Matrix g = rng.normal_matrix(10, 4);
    const Vector q = rng.normal_vector(4);
    const auto order = rank_gallery(q, gallery_of(g, std::vector<int>(10, 0)));
    std::vector<std::pair<double, Eigen::Index>> keyed;
    for (Eigen::Index i = 0; i < 10; ++i) keyed.emplace_back((g.row(i).transpose() - q).squaredNorm(), i);
    std::sort(keyed.begin(), keyed.end());
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(order[i], keyed[i].second);
  }
}

TEST(RankGallery, MonotoneDistanceTransformInvariance) {
  // Scaling every coordinate scales every distance by the same factor.
  Rng rng(3);
  const Matrix g = rng.normal_matrix(12, 3);
  const Vector q = rng.normal_vector(3);
  const auto a = rank_gallery(q, gallery_of(g, std::vector<int>(12, 0)));
  const auto b = rank_gallery(2.5 * q, gallery_of(2.5 * g, std::vector<int>(12, 0)));
  EXPECT_EQ(a, b);
}

TEST(RankGallery, DimensionMismatch) {
  EXPECT_THROW(rank_gallery(Vector::Zero(3), gallery_of(Matrix::Zero(2, 2), {0, 1})), DimensionMismatch);
}

TEST(Evaluate, PerfectSeparation) {
  Matrix g(4, 2), q(2, 2);
  g << 0, 0, 0.1, 0, 10, 10, 10.1, 10;
  q << 0.05, 0, 10.05, 10;
  const auto r = evaluate(queries_of(q, {0, 1}), gallery_of(g, {0, 0, 1, 1}), std::nullopt, 3);
  EXPECT_EQ(r.cmc, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(r.map, 1.0);
}

TEST(Evaluate, HandComputableSingleQuery) {
  Matrix g(2, 1), q(1, 1);
  g << 1, 5;  // wrong class is closer
  q << 0;
  const auto r = evaluate(queries_of(q, {7}), gallery_of(g, {3, 7}), std::nullopt, 2);
  EXPECT_EQ(r.cmc, (std::vector<double>{0, 1}));
  EXPECT_EQ(r.map, 0.5);
}

TEST(Evaluate, QueryClassAbsent) {
  try {
    evaluate(queries_of(Matrix::Zero(1, 2), {9}), gallery_of(Matrix::Zero(1, 2), {1}), std::nullopt, 1);
    FAIL();
  } catch (const QueryClassAbsent& e) {
    EXPECT_EQ(e.class_id(), 9);
    EXPECT_EQ(e.code(), ExitCode::kEvalPrecondition);
  }
}

TEST(Evaluate, EqualsBruteForceOracleExactly) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix g = rng.normal_matrix(20, 3);
    const Matrix q = rng.normal_matrix(12, 3);
    std::vector<int> gid, qid;
    for (int i = 0; i < 20; ++i) gid.push_back(i % 5);
    for (int i = 0; i < 12; ++i) qid.push_back(i % 5);
    const std::optional<TransformMatrix> tr =
        t % 2 ? std::optional<TransformMatrix>(TransformMatrix(rng.normal_matrix(3, 3))) : std::nullopt;
    const auto r = evaluate(queries_of(q, qid), gallery_of(g, gid), tr, 10);
    const auto o = oracle::brute_force_retrieval(rows_of(q), qid, rows_of(g), gid,
                                                 tr ? std::optional<oracle::Mat>(testutil::to_mat(tr->matrix())) : std::nullopt, 10);
    EXPECT_EQ(r.cmc, o.cmc);
    EXPECT_EQ(r.per_query_ap, o.ap);
    EXPECT_EQ(r.map, o.map);
  }
}

TEST(Evaluate, FarIrrelevantItemChangesNothing) {
  Rng rng(5);
  const Matrix g = rng.normal_matrix(10, 3);
  const Matrix q = rng.normal_matrix(4, 3);
  std::vector<int> gid{0, 1, 2, 3, 0, 1, 2, 3, 0, 1};
  const auto r1 = evaluate(queries_of(q, {0, 1, 2, 3}), gallery_of(g, gid), std::nullopt, 5);
  Matrix g2(11, 3);
  g2 << g, Eigen::RowVector3d(1e6, 1e6, 1e6);
  gid.push_back(99);
  const auto r2 = evaluate(queries_of(q, {0, 1, 2, 3}), gallery_of(g2, gid), std::nullopt, 5);
  EXPECT_EQ(r1.cmc, r2.cmc);
  EXPECT_EQ(r1.map, r2.map);
}

TEST(Evaluate, Invariants) {
  Rng rng(6);
  const Matrix g = rng.normal_matrix(15, 4);
  const Matrix q = rng.normal_matrix(9, 4);
  std::vector<int> gid, qid;
  for (int i = 0; i < 15; ++i) gid.push_back(i % 3);
  for (int i = 0; i < 9; ++i) qid.push_back(i % 3);
  const auto r = evaluate(queries_of(q, qid), gallery_of(g, gid), std::nullopt, 15);
  for (std::size_t k = 1; k < r.cmc.size(); ++k) EXPECT_LE(r.cmc[k - 1], r.cmc[k]);
  EXPECT_EQ(r.cmc.back(), 1.0);
  EXPECT_GE(r.map, 0.0);
  EXPECT_LE(r.map, 1.0);
}

TEST(Metrics, JsonAndCsv) {
  RetrievalResult r;
  r.cmc = {0.5, 1.0};
  r.map = 0.75;
  r.per_query_ap = {0.5, 1.0};
  const auto j = nlohmann::json::parse(metrics_json(r, "identity"));
  EXPECT_EQ(j["map"].get<double>(), 0.75);
  EXPECT_EQ(j["transform"].get<std::string>(), "identity");
  EXPECT_EQ(cmc_csv(r), "k,cmc\n1,0.5\n2,1\n");
}
