#include "pho/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pho/errors.hpp"
#include "pho/format.hpp"
#include "pho/sas.hpp"

namespace pho {

using json = nlohmann::json;

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kBaseline: return "baseline";
    case Mode::kLearnedA: return "learned-a";
    case Mode::kSas: return "sas";
    case Mode::kAal: return "aal";
  }
  return "unknown";
}

Mode parse_mode(const std::string& s) {
  if (s == "baseline") return Mode::kBaseline;
  if (s == "learned-a") return Mode::kLearnedA;
  if (s == "sas") return Mode::kSas;
  if (s == "aal") return Mode::kAal;
  throw InvalidArgument("unknown mode '" + s + "' (expected baseline, learned-a, sas or aal)");
}

bool uses_ccl(Mode m) { return m == Mode::kSas || m == Mode::kAal; }

void TrainConfig::validate() const {
  shape.validate();
  loss.validate();
  schedule.validate();
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be non-negative");
  if (mode == Mode::kSas && alpha == 0.0) {
    throw InvalidArgument("sas mode needs alpha > 0 so that every batch is solvable");
  }
  if (mode == Mode::kAal && !(alpha > 0.0)) throw InvalidArgument("aal mode needs alpha > 0");
  AalParams{alpha, aal_max_iters, aal_tol}.validate();
  if (!uses_ccl(mode) && loss.lambda != 0.0) {
    throw InvalidArgument("lambda must be 0 in mode " + mode_name(mode) +
                          "; the CCL term only exists in the sas and aal modes");
  }
  if (!(align_weight >= 0.0)) throw InvalidArgument("align_weight must be non-negative");
  if (identities_per_batch < 2) throw InvalidArgument("identities_per_batch must be at least 2");
  if (samples_per_identity < 1) throw InvalidArgument("samples_per_identity must be positive");
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (eval_k < 1) throw InvalidArgument("eval k must be at least 1");
}

TrainState init_state(const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TrainState s;
  s.rng = Rng(seed);
  s.encoder = TwoStreamEncoder::init(cfg.shape, s.rng);
  s.velocity = s.encoder.zeros_like();
  const auto n = static_cast<Eigen::Index>(cfg.shape.embed_dim);
  s.learned_a = Matrix::Identity(n, n);
  s.learned_a_velocity = Matrix::Zero(n, n);
  return s;
}

std::size_t ParameterPartition::direct_count() const {
  std::size_t n = 0;
  for (const auto& g : direct) n += g.count;
  return n;
}

std::size_t ParameterPartition::non_direct_count() const {
  std::size_t n = 0;
  for (const auto& g : non_direct) n += g.count;
  return n;
}

ParameterPartition partition_parameters(const TrainState& state, Mode mode) {
  ParameterPartition p;
  state.encoder.for_each([&](const std::string& name, const Matrix& m) {
    p.non_direct.push_back({name, static_cast<std::size_t>(m.size())});
  });
  const auto n = static_cast<std::size_t>(state.encoder.shape().embed_dim);
  if (mode == Mode::kLearnedA) {
    p.non_direct.push_back({"A", n * n});
  } else {
    p.direct.push_back({"A", n * n});
  }
  p.direct.push_back({"W", n});
  return p;
}

std::size_t declared_parameter_count(const TrainState& state) {
  const auto n = static_cast<std::size_t>(state.encoder.shape().embed_dim);
  return state.encoder.parameter_count() + n * n + n;
}

FrozenBatchTerms solve_direct(const FeatureBatch& embeddings, const TrainConfig& cfg) {
  FrozenBatchTerms f;
  double median = median_pairwise_distance(embeddings.features());
  if (!(median > 0.0)) median = 1.0;
  for (double s : cfg.loss.mmd_bandwidths) f.mmd_bandwidths.push_back(s * median);

  if (!uses_ccl(cfg.mode)) return f;
  const ModalityMeans means = batch_means(embeddings);
  if (cfg.mode == Mode::kSas) {
    f.direct = DirectParams{solve_sas(means, SasParams{cfg.alpha}),
                            SimplexWeights::uniform(means.dim())};
  } else {
    AalSolution sol = solve_aal(means, AalParams{cfg.alpha, cfg.aal_max_iters, cfg.aal_tol});
    f.direct = DirectParams{std::move(sol.a_star), std::move(sol.w_star)};
  }
  return f;
}

namespace {

BatchObjective objective_from_cache(const TwoStreamEncoder& enc, const Matrix& learned_a,
                                    const ForwardCache& cache, const FeatureBatch& raw,
                                    const TrainConfig& cfg, const FrozenBatchTerms& frozen) {
  const FeatureBatch emb = raw.with_features(cache.embedding);
  const ClassMeans classes = class_means(emb);

  LossComponents parts;
  const LossValue id = identity_loss(cache.logits, raw.class_ids(), true);
  const LossValue hc = hc_triplet_loss(classes, emb, cfg.loss.triplet_margin, true);
  const LossValue mmd = mmd_loss(emb, frozen.mmd_bandwidths, true);
  parts.l_id = id.value;
  parts.l_hc_tri = hc.value;
  parts.l_mmd = mmd.value;
  Matrix grad_emb = hc.grad + mmd.grad;

  if (uses_ccl(cfg.mode)) {
    if (!frozen.direct) throw InvalidArgument("ccl modes need solved direct parameters");
    const CclResult ccl = ccl_loss(frozen.direct->a_star, classes, emb, cfg.loss, true);
    parts.l_intra = ccl.intra.value;
    parts.l_ccl = ccl.ccl.value;
    grad_emb += cfg.loss.lambda * ccl.ccl.grad;
  }

  BatchObjective out;
  out.loss = total_loss(parts, cfg.loss);
  out.grad_learned_a = Matrix::Zero(learned_a.rows(), learned_a.cols());
  if (cfg.mode == Mode::kLearnedA) {
    const ModalityMeans means = batch_means(emb);
    const Vector r = learned_a * means.x_bar - means.y_bar;
    out.l_align = r.squaredNorm() + cfg.alpha * learned_a.squaredNorm();
    out.grad_learned_a = cfg.align_weight * p1_gradient(learned_a, means, cfg.alpha);
    const Vector g_x = cfg.align_weight * 2.0 * (learned_a.transpose() * r);
    const Vector g_y = -cfg.align_weight * 2.0 * r;
    const auto vis = emb.indices(Modality::kVisible);
    const auto inf = emb.indices(Modality::kInfrared);
    for (auto i : vis) grad_emb.row(i) += g_x.transpose() / static_cast<double>(vis.size());
    for (auto i : inf) grad_emb.row(i) += g_y.transpose() / static_cast<double>(inf.size());
  }
  out.objective = out.loss.l_total + cfg.align_weight * out.l_align;
  out.grad = backward(enc, cache, grad_emb, id.grad);
  return out;
}

bool grads_finite(const BatchObjective& o) {
  bool ok = std::isfinite(o.objective) && o.grad_learned_a.allFinite();
  o.grad.for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

std::vector<Matrix*> tensors(TwoStreamEncoder& e) {
  std::vector<Matrix*> out;
  e.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

BatchObjective batch_objective(const TwoStreamEncoder& enc, const Matrix& learned_a,
                               const FeatureBatch& raw, const TrainConfig& cfg,
                               const FrozenBatchTerms& frozen) {
  const ForwardCache cache = forward(enc, raw, cfg.normalize_embeddings);
  return objective_from_cache(enc, learned_a, cache, raw, cfg, frozen);
}

std::vector<std::vector<Eigen::Index>> epoch_batches(const FeatureBatch& train,
                                                     const TrainConfig& cfg, Rng& rng) {
  std::map<int, std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>> by_class;
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    auto& slot = by_class[train.class_id(i)];
    (train.modality(i) == Modality::kVisible ? slot.first : slot.second).push_back(i);
  }
  std::vector<int> classes;
  std::size_t min_count = SIZE_MAX;
  for (const auto& [c, rows] : by_class) {
    if (rows.first.empty() || rows.second.empty()) continue;
    classes.push_back(c);
    min_count = std::min({min_count, rows.first.size(), rows.second.size()});
  }
  if (classes.size() < 2) throw InvalidArgument("training data needs two classes with both modalities");

  const auto k = static_cast<std::size_t>(cfg.samples_per_identity);
  const auto p = static_cast<std::size_t>(cfg.identities_per_batch);
  const std::size_t passes = std::max<std::size_t>(1, min_count / k);

  std::vector<std::vector<Eigen::Index>> batches;
  for (std::size_t pass = 0; pass < passes; ++pass) {
    rng.shuffle(classes.begin(), classes.end());
    for (std::size_t start = 0; start < classes.size(); start += p) {
      const std::size_t end = std::min(classes.size(), start + p);
      if (end - start < 2) continue;  // a lone identity cannot form negatives
      std::vector<Eigen::Index> rows;
      for (std::size_t ci = start; ci < end; ++ci) {
        auto [vis, inf] = by_class[classes[ci]];
        rng.shuffle(vis.begin(), vis.end());
        rng.shuffle(inf.begin(), inf.end());
        rows.insert(rows.end(), vis.begin(), vis.begin() + static_cast<std::ptrdiff_t>(std::min(k, vis.size())));
        rows.insert(rows.end(), inf.begin(), inf.begin() + static_cast<std::ptrdiff_t>(std::min(k, inf.size())));
      }
      batches.push_back(std::move(rows));
    }
  }
  return batches;
}

void train_epoch(TrainState& state, const SyntheticData& data, const TrainConfig& cfg,
                 const StepObserver& observer) {
  const auto batches = epoch_batches(data.train, cfg, state.rng);
  const auto nb = static_cast<double>(batches.size());

  EpochRecord rec;
  rec.epoch = state.epoch;
  rec.lr = lr_at(cfg.schedule, state.epoch, 0.0);
  const double mu = cfg.schedule.momentum;

  for (std::size_t b = 0; b < batches.size(); ++b) {
    const double lr = lr_at(cfg.schedule, state.epoch, static_cast<double>(b) / nb);
    const FeatureBatch raw = data.train.select(batches[b]);
    const ForwardCache cache = forward(state.encoder, raw, cfg.normalize_embeddings);
    if (!cache.embedding.allFinite() || !cache.logits.allFinite()) throw NonFiniteLoss(b);
    const FrozenBatchTerms frozen = solve_direct(raw.with_features(cache.embedding), cfg);
    BatchObjective obj = objective_from_cache(state.encoder, state.learned_a, cache, raw, cfg, frozen);
    if (!grads_finite(obj)) throw NonFiniteLoss(b);

    auto params = tensors(state.encoder);
    auto vels = tensors(state.velocity);
    auto grads = tensors(obj.grad);
    for (std::size_t t = 0; t < params.size(); ++t) {
      sgd_momentum_step(*params[t], *vels[t], *grads[t], lr, mu);
    }
    if (cfg.mode == Mode::kLearnedA) {
      sgd_momentum_step(state.learned_a, state.learned_a_velocity, obj.grad_learned_a, lr, mu);
    }
    state.last_direct = frozen.direct;

    rec.loss.l_id += obj.loss.l_id / nb;
    rec.loss.l_hc_tri += obj.loss.l_hc_tri / nb;
    rec.loss.l_mmd += obj.loss.l_mmd / nb;
    rec.loss.l_intra += obj.loss.l_intra / nb;
    rec.loss.l_ccl += obj.loss.l_ccl / nb;
    rec.loss.l_total += obj.loss.l_total / nb;
    rec.l_align += obj.l_align / nb;

    if (observer) {
      observer(StepRecord{state.epoch, b, lr, obj.loss, obj.l_align}, state);
    }
  }
  rec.metrics = evaluate_state(state, data, cfg);
  state.history.push_back(std::move(rec));
  ++state.epoch;
}

RetrievalResult evaluate_state(const TrainState& state, const SyntheticData& data,
                               const TrainConfig& cfg) {
  const FeatureBatch q = data.query.with_features(embed(state.encoder, data.query, cfg.normalize_embeddings));
  const FeatureBatch g = data.gallery.with_features(embed(state.encoder, data.gallery, cfg.normalize_embeddings));
  return evaluate(q, g, std::nullopt, cfg.eval_k);
}

namespace {

constexpr int kCheckpointVersion = 1;

json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols) {
    throw DimensionMismatch("checkpoint tensor " + what + " has the wrong shape");
  }
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != static_cast<std::size_t>(rows * cols)) {
    throw DimensionMismatch("checkpoint tensor " + what + " has the wrong size");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = data[static_cast<std::size_t>(i * cols + jj)];
  }
  return m;
}

json encoder_json(const TwoStreamEncoder& e) {
  json j = json::object();
  e.for_each([&](const std::string& name, const Matrix& m) { j[name] = matrix_json(m); });
  return j;
}

void encoder_from_json(const json& j, TwoStreamEncoder& e) {
  e.for_each([&](const std::string& name, Matrix& m) {
    m = matrix_from_json(j.at(name), m.rows(), m.cols(), name);
  });
}

json breakdown_json(const LossBreakdown& b) {
  return json{{"l_id", b.l_id}, {"l_hc_tri", b.l_hc_tri}, {"l_mmd", b.l_mmd},
              {"l_intra", b.l_intra}, {"l_ccl", b.l_ccl}, {"l_total", b.l_total}};
}

LossBreakdown breakdown_from_json(const json& j) {
  LossBreakdown b;
  b.l_id = j.at("l_id").get<double>();
  b.l_hc_tri = j.at("l_hc_tri").get<double>();
  b.l_mmd = j.at("l_mmd").get<double>();
  b.l_intra = j.at("l_intra").get<double>();
  b.l_ccl = j.at("l_ccl").get<double>();
  b.l_total = j.at("l_total").get<double>();
  return b;
}

}  // namespace

std::string checkpoint_json(const TrainState& state, const TrainConfig& cfg) {
  json j;
  j["format"] = "pho-checkpoint";
  j["version"] = kCheckpointVersion;
  j["mode"] = mode_name(cfg.mode);
  const auto& s = state.encoder.shape();
  j["shape"] = {{"input_dim", s.input_dim}, {"stem_dim", s.stem_dim}, {"hidden_dim", s.hidden_dim},
                {"embed_dim", s.embed_dim}, {"num_classes", s.num_classes}};
  j["epoch"] = state.epoch;
  j["rng"] = state.rng.state();
  j["encoder"] = encoder_json(state.encoder);
  j["velocity"] = encoder_json(state.velocity);
  j["learned_a"] = matrix_json(state.learned_a);
  j["learned_a_velocity"] = matrix_json(state.learned_a_velocity);
  json hist = json::array();
  for (const auto& r : state.history) {
    hist.push_back({{"epoch", r.epoch},
                    {"lr", r.lr},
                    {"loss", breakdown_json(r.loss)},
                    {"l_align", r.l_align},
                    {"cmc", r.metrics.cmc},
                    {"map", r.metrics.map},
                    {"per_query_ap", r.metrics.per_query_ap}});
  }
  j["history"] = hist;
  return j.dump() + "\n";
}

TrainState load_checkpoint_json(const std::string& text, const TrainConfig& cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "pho-checkpoint") throw InvalidArgument("not a pho checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw InvalidArgument("unsupported checkpoint version " + j.at("version").dump());
    }
    if (j.at("mode").get<std::string>() != mode_name(cfg.mode)) {
      throw InvalidArgument("checkpoint was written in mode " + j.at("mode").get<std::string>());
    }
    const auto& sj = j.at("shape");
    EncoderShape shape{sj.at("input_dim").get<int>(), sj.at("stem_dim").get<int>(),
                       sj.at("hidden_dim").get<int>(), sj.at("embed_dim").get<int>(),
                       sj.at("num_classes").get<int>()};
    if (!(shape == cfg.shape)) throw DimensionMismatch("checkpoint encoder shape differs from config");

    TrainState s;
    s.encoder = TwoStreamEncoder::zeros(shape);
    s.velocity = TwoStreamEncoder::zeros(shape);
    encoder_from_json(j.at("encoder"), s.encoder);
    encoder_from_json(j.at("velocity"), s.velocity);
    const auto n = static_cast<Eigen::Index>(shape.embed_dim);
    s.learned_a = matrix_from_json(j.at("learned_a"), n, n, "learned_a");
    s.learned_a_velocity = matrix_from_json(j.at("learned_a_velocity"), n, n, "learned_a_velocity");
    s.epoch = j.at("epoch").get<int>();
    s.rng.set_state(j.at("rng").get<std::string>());
    for (const auto& r : j.at("history")) {
      EpochRecord rec;
      rec.epoch = r.at("epoch").get<int>();
      rec.lr = r.at("lr").get<double>();
      rec.loss = breakdown_from_json(r.at("loss"));
      rec.l_align = r.at("l_align").get<double>();
      rec.metrics.cmc = r.at("cmc").get<std::vector<double>>();
      rec.metrics.map = r.at("map").get<double>();
      rec.metrics.per_query_ap = r.at("per_query_ap").get<std::vector<double>>();
      s.history.push_back(std::move(rec));
    }
    return s;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write checkpoint " + path);
  out << checkpoint_json(state, cfg);
}

TrainState load_checkpoint(const std::string& path, const TrainConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_checkpoint_json(ss.str(), cfg);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out =
      "epoch,lr,l_id,l_hc_tri,l_mmd,l_intra,l_ccl,l_align,l_total,rank1,rank5,rank10,rank20,map\n";
  for (const auto& r : history) {
    const double vals[] = {r.lr, r.loss.l_id, r.loss.l_hc_tri, r.loss.l_mmd, r.loss.l_intra,
                           r.loss.l_ccl, r.l_align, r.loss.l_total, r.metrics.rank(1),
                           r.metrics.rank(5), r.metrics.rank(10), r.metrics.rank(20), r.metrics.map};
    out += std::to_string(r.epoch);
    for (double v : vals) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace pho
