#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pho/aal.hpp"
#include "pho/core_types.hpp"
#include "pho/eval.hpp"
#include "pho/losses.hpp"
#include "pho/network.hpp"
#include "pho/synth.hpp"

namespace pho {

// Ablation variants: plain baseline, alignment map trained by SGD, and the
// two hierarchical variants where the map is solved per batch.
enum class Mode { kBaseline, kLearnedA, kSas, kAal };

std::string mode_name(Mode m);  // baseline | learned-a | sas | aal
Mode parse_mode(const std::string& s);
bool uses_ccl(Mode m);

struct TrainConfig {
  Mode mode = Mode::kSas;
  EncoderShape shape;
  LossParams loss;
  double alpha = 0.1;
  int aal_max_iters = 100;
  double aal_tol = 1e-10;
  double align_weight = 1.0;  // weight of the trained P1 penalty (learned-a)
  LrSchedule schedule;
  int identities_per_batch = 4;
  int samples_per_identity = 4;  // per modality
  int epochs = 30;
  bool normalize_embeddings = true;
  int eval_k = 20;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;         // rate at the start of the epoch
  LossBreakdown loss;      // mean over the epoch's batches
  double l_align = 0.0;    // trained P1 penalty (learned-a only)
  RetrievalResult metrics; // on the held-out query/gallery split
};

// Parameters solved per batch; never touched by the optimiser.
struct DirectParams {
  TransformMatrix a_star;
  SimplexWeights w_star;
};

struct TrainState {
  TwoStreamEncoder encoder;
  TwoStreamEncoder velocity;
  Matrix learned_a;           // learned-a mode: trained alignment map
  Matrix learned_a_velocity;
  int epoch = 0;
  Rng rng;
  std::vector<EpochRecord> history;
  std::optional<DirectParams> last_direct;
};

TrainState init_state(const TrainConfig& cfg, std::uint64_t seed);

struct ParameterGroup {
  std::string name;
  std::size_t count = 0;
};

struct ParameterPartition {
  std::vector<ParameterGroup> direct;
  std::vector<ParameterGroup> non_direct;

  std::size_t direct_count() const;
  std::size_t non_direct_count() const;
};

// A and W(n) are direct parameters in every mode except learned-a, where A
// joins the trained set.
ParameterPartition partition_parameters(const TrainState& state, Mode mode);
std::size_t declared_parameter_count(const TrainState& state);

// Everything held constant while differentiating one batch objective.
struct FrozenBatchTerms {
  std::optional<DirectParams> direct;
  std::vector<double> mmd_bandwidths;  // absolute
};

FrozenBatchTerms solve_direct(const FeatureBatch& embeddings, const TrainConfig& cfg);

struct BatchObjective {
  LossBreakdown loss;
  double l_align = 0.0;
  double objective = 0.0;  // loss.l_total + align_weight * l_align
  TwoStreamEncoder grad;
  Matrix grad_learned_a;
};

BatchObjective batch_objective(const TwoStreamEncoder& enc, const Matrix& learned_a,
                               const FeatureBatch& raw, const TrainConfig& cfg,
                               const FrozenBatchTerms& frozen);

struct StepRecord {
  int epoch = 0;
  std::size_t batch = 0;
  double lr = 0.0;
  LossBreakdown loss;
  double l_align = 0.0;
};

using StepObserver = std::function<void(const StepRecord&, const TrainState&)>;

// Sampled batches for one epoch: P identities x K samples per modality each.
std::vector<std::vector<Eigen::Index>> epoch_batches(const FeatureBatch& train,
                                                     const TrainConfig& cfg, Rng& rng);

// One pass of the hierarchical loop: per batch solve the direct parameters,
// evaluate the total objective and update the network by SGD with momentum.
// Appends one history record evaluated on data.query against data.gallery.
void train_epoch(TrainState& state, const SyntheticData& data, const TrainConfig& cfg,
                 const StepObserver& observer = {});

RetrievalResult evaluate_state(const TrainState& state, const SyntheticData& data,
                               const TrainConfig& cfg);

// Versioned JSON checkpoint; doubles round-trip exactly.
std::string checkpoint_json(const TrainState& state, const TrainConfig& cfg);
TrainState load_checkpoint_json(const std::string& text, const TrainConfig& cfg);
void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const std::string& path);
TrainState load_checkpoint(const std::string& path, const TrainConfig& cfg);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace pho
