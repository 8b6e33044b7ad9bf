#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pho/commands.hpp"
#include "pho/config.hpp"
#include "pho/errors.hpp"
#include "pho/synth.hpp"

namespace {

struct Common {
  std::string config;
  pho::Overrides ov;
  std::optional<int> epochs;
};

void add_common(CLI::App* sub, Common& c, bool loss_flags) {
  sub->add_option("--config", c.config, "RunConfig JSON file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.ov.seed, "Random seed");
  sub->add_option("--out", c.ov.out, "Output directory");
  sub->add_option("--alpha", c.ov.alpha, "Ridge strength of the alignment map");
  if (!loss_flags) return;
  sub->add_option("--beta", c.ov.beta, "Per-sample weight inside L_intra");
  sub->add_option("--gamma", c.ov.gamma, "L_intra multiplier inside the CCL hinge");
  sub->add_option("--rho", c.ov.rho, "CCL margin");
  sub->add_option("--lambda", c.ov.lambda, "CCL weight in the total objective");
  sub->add_option("--mode", c.ov.mode, "baseline | learned-a | sas | aal")
      ->check(CLI::IsMember({"baseline", "learned-a", "sas", "aal"}));
  sub->add_option("--k", c.ov.k, "Largest CMC rank reported");
  sub->add_option("--epochs", c.epochs, "Total training epochs");
}

pho::RunConfig resolve(const Common& c) {
  pho::RunConfig cfg = c.config.empty() ? pho::default_run_config() : pho::load_run_config(c.config);
  if (c.epochs) cfg.train.epochs = *c.epochs;
  return pho::finalize(cfg, c.ov);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter hierarchical optimization for cross-modality alignment"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> features;
  double tol = 1e-10;
  int max_iters = 100;
  bool resume = false;
  int seeds = 1;
  std::string query, gallery, dir;
  std::optional<std::string> transform;

  auto* sas = app.add_subcommand("solve-sas", "Closed-form alignment map of the batch means");
  add_common(sas, common, false);
  sas->add_option("--features", features, "Feature CSV (default: generated training split)");

  auto* aal = app.add_subcommand("solve-aal", "Auto-weighted alignment by alternating minimisation");
  add_common(aal, common, false);
  aal->add_option("--features", features, "Feature CSV (default: generated training split)");
  aal->add_option("--tol", tol, "Absolute objective-change stopping threshold");
  aal->add_option("--max-iters", max_iters, "Iteration cap");

  auto* train = app.add_subcommand("train", "Train the two-stream encoder");
  add_common(train, common, true);
  train->add_flag("--resume", resume, "Continue from the checkpoint in --out");

  auto* ablate = app.add_subcommand("ablate", "Run all four variants on shared data");
  add_common(ablate, common, true);
  ablate->add_option("--seeds", seeds, "Number of consecutive seeds starting at --seed");

  auto* gen = app.add_subcommand("generate", "Write the synthetic splits as feature CSVs");
  add_common(gen, common, false);

  auto* ev = app.add_subcommand("eval", "CMC and mAP of queries against a gallery");
  ev->add_option("--query", query, "Query feature CSV")->required();
  ev->add_option("--gallery", gallery, "Gallery feature CSV")->required();
  ev->add_option("--transform", transform, "A.csv applied to the queries");
  int eval_k = 20;
  ev->add_option("--k", eval_k, "Largest CMC rank reported");
  ev->add_option("--out", dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(pho::ExitCode::kInputError);
  }

  try {
    const pho::LogLevel log = pho::log_level_from_env();
    if (ev->parsed()) {
      const auto r = pho::cmd_eval(query, gallery, transform, eval_k, dir);
      std::cout << "rank-1 " << r.rank(1) << "  mAP " << r.map << "\n";
      return 0;
    }
    // The solvers accept alpha = 0, which training rejects, so their alpha
    // bypasses the training config.
    const bool solver = sas->parsed() || aal->parsed();
    Common effective = common;
    if (solver) effective.ov.alpha.reset();
    const pho::RunConfig cfg = resolve(effective);
    const double alpha = common.ov.alpha.value_or(cfg.train.alpha);
    if (sas->parsed()) {
      const auto r = pho::cmd_solve_sas(pho::solver_input(features, cfg), alpha, cfg.out);
      std::cout << "P1 " << r.p1 << "  residual " << r.residual_norm << "\n";
    } else if (aal->parsed()) {
      const auto r = pho::cmd_solve_aal(pho::solver_input(features, cfg),
                                        pho::AalParams{alpha, max_iters, tol}, cfg.out);
      std::cout << "P2 " << r.p2 << "  iterations " << r.solution.iterations << "\n";
    } else if (train->parsed()) {
      const auto st = pho::cmd_train(cfg, resume, log);
      if (!st.history.empty()) {
        std::cout << "epoch " << st.history.back().epoch << "  mAP " << st.history.back().metrics.map << "\n";
      }
    } else if (ablate->parsed()) {
      const int rc = pho::cmd_ablate(cfg, seeds, log);
      std::cout << "wrote " << (std::filesystem::path(cfg.out) / "ablation.md").string() << "\n";
      return rc;
    } else if (gen->parsed()) {
      const auto data = pho::generate(cfg.synth);
      std::filesystem::create_directories(cfg.out);
      const std::filesystem::path d(cfg.out);
      pho::save_features(data.train, (d / "train.csv").string());
      pho::save_features(data.gallery, (d / "gallery.csv").string());
      pho::save_features(data.query, (d / "query.csv").string());
    }
    return 0;
  } catch (const pho::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(pho::ExitCode::kInputError);
  }
}
