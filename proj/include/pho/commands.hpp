#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pho/aal.hpp"
#include "pho/config.hpp"
#include "pho/eval.hpp"
#include "pho/trainer.hpp"

namespace pho {

// Plain numeric matrix CSV: one row per line, no header.
std::string matrix_csv(const Matrix& m);
Matrix parse_matrix_csv(const std::string& text);
Matrix load_matrix_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// Features for the solver commands: a CSV file if given, else the training
// split generated from the config.
FeatureBatch solver_input(const std::optional<std::string>& features_path, const RunConfig& cfg);

struct SasReport {
  TransformMatrix a_star;
  ModalityMeans means;
  double alpha = 0.0;
  double p1 = 0.0;
  double residual_norm = 0.0;  // |A* x_bar - y_bar|
};

// Writes A.csv and report.json into out_dir.
SasReport cmd_solve_sas(const FeatureBatch& input, double alpha, const std::string& out_dir);

struct AalReport {
  AalSolution solution;
  ModalityMeans means;
  AalParams params;
  double p2 = 0.0;
};

// Writes A.csv, w.csv, trace.csv and report.json into out_dir.
AalReport cmd_solve_aal(const FeatureBatch& input, const AalParams& params,
                        const std::string& out_dir);

// Trains cfg.train.epochs epochs into cfg.out (checkpoint.json, history.csv,
// metrics.json, config.json). With resume, continues from cfg.out's
// checkpoint up to the same total epoch count.
TrainState cmd_train(const RunConfig& cfg, bool resume, LogLevel log = LogLevel::kError);

struct AblationRow {
  std::uint64_t seed = 0;
  Mode mode = Mode::kBaseline;
  std::uint64_t data_hash = 0;
  std::optional<RetrievalResult> metrics;  // empty when training failed
  std::string status = "ok";
  int exit_code = 0;
};

struct OrderingCheck {
  std::uint64_t seed = 0;
  bool ordered = false;      // aal >= sas >= learned-a >= baseline
  double sas_gain = 0.0;     // sas mAP - baseline mAP
};

struct AblationResult {
  std::vector<AblationRow> rows;  // seed-major, modes in table order
  std::vector<OrderingCheck> checks;
};

inline constexpr Mode kAblationModes[] = {Mode::kBaseline, Mode::kLearnedA, Mode::kSas, Mode::kAal};

// Runs every mode for seeds cfg.seed .. cfg.seed + seeds - 1, all modes of a
// seed sharing one synthetic dataset.
AblationResult run_ablation(const RunConfig& cfg, int seeds, LogLevel log = LogLevel::kError);
std::string ablation_csv(const AblationResult& r);
std::string ablation_md(const AblationResult& r);

// Writes ablation.csv and ablation.md into cfg.out. Returns the exit code of
// the first failed row, 0 if none failed.
int cmd_ablate(const RunConfig& cfg, int seeds, LogLevel log = LogLevel::kError);

// Writes metrics.json and cmc.csv into out_dir. Without a transform path the
// identity is used and recorded as such.
RetrievalResult cmd_eval(const std::string& query_path, const std::string& gallery_path,
                         const std::optional<std::string>& transform_path, int k,
                         const std::string& out_dir);

std::string hex64(std::uint64_t v);

}  // namespace pho
