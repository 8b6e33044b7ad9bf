#include "pho/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "pho/errors.hpp"
#include "pho/format.hpp"
#include "pho/sas.hpp"
#include "pho/synth.hpp"

namespace pho {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void log_at(LogLevel want, LogLevel have, const std::string& msg) {
  if (static_cast<int>(have) >= static_cast<int>(want)) std::cerr << msg << '\n';
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::uint64_t data_hash(const SyntheticData& d) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const FeatureBatch* b : {&d.train, &d.gallery, &d.query}) {
    for (unsigned char ch : write_features(*b)) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string display_name(Mode m) {
  switch (m) {
    case Mode::kBaseline: return "Baseline";
    case Mode::kLearnedA: return "LearnedA (SGD)";
    case Mode::kSas: return "SAS+CCL";
    case Mode::kAal: return "AAL+CCL";
  }
  return "?";
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix parse_matrix_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError(line_no, "empty line");
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      const auto pos = rest.find(',');
      const auto field = rest.substr(0, pos);
      double v = 0.0;
      if (!parse_double(field, v)) {
        throw ParseError(line_no, "'" + std::string(field) + "' is not a finite decimal number");
      }
      row.push_back(v);
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DimensionMismatch("matrix line " + std::to_string(line_no) + " has " +
                              std::to_string(row.size()) + " columns, expected " +
                              std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(1, "matrix file is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

Matrix load_matrix_csv(const std::string& path) { return parse_matrix_csv(read_text(path)); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FeatureBatch solver_input(const std::optional<std::string>& features_path, const RunConfig& cfg) {
  if (features_path) return load_features(*features_path);
  return generate(cfg.synth).train;
}

SasReport cmd_solve_sas(const FeatureBatch& input, double alpha, const std::string& out_dir) {
  SasReport r;
  r.alpha = alpha;
  r.means = batch_means(input);
  r.a_star = solve_sas(r.means, SasParams{alpha});
  r.p1 = p1_objective(r.a_star, r.means, SasParams{alpha});
  r.residual_norm = (r.a_star.matrix() * r.means.x_bar - r.means.y_bar).norm();

  const fs::path dir = ensure_dir(out_dir);
  write_text((dir / "A.csv").string(), matrix_csv(r.a_star.matrix()));
  ordered_json j;
  j["alpha"] = alpha;
  j["n"] = r.means.dim();
  j["p1"] = r.p1;
  j["residual_norm"] = r.residual_norm;
  j["x_bar"] = to_std(r.means.x_bar);
  j["y_bar"] = to_std(r.means.y_bar);
  write_text((dir / "report.json").string(), j.dump(2) + "\n");
  return r;
}

AalReport cmd_solve_aal(const FeatureBatch& input, const AalParams& params,
                        const std::string& out_dir) {
  params.validate();
  AalReport r;
  r.params = params;
  r.means = batch_means(input);
  r.solution = solve_aal(r.means, params);
  r.p2 = p2_objective(r.solution.a_star, r.solution.w_star, r.means, params.alpha);

  const fs::path dir = ensure_dir(out_dir);
  write_text((dir / "A.csv").string(), matrix_csv(r.solution.a_star.matrix()));
  write_text((dir / "w.csv").string(), matrix_csv(r.solution.w_star.values()));
  std::string trace = "half_step,p2\n";
  for (std::size_t i = 0; i < r.solution.objective_trace.size(); ++i) {
    trace += std::to_string(i + 1) + "," + format_double(r.solution.objective_trace[i]) + "\n";
  }
  write_text((dir / "trace.csv").string(), trace);
  ordered_json j;
  j["alpha"] = params.alpha;
  j["tol"] = params.tol;
  j["max_iters"] = params.max_iters;
  j["n"] = r.means.dim();
  j["iterations"] = r.solution.iterations;
  j["p2"] = r.p2;
  j["x_bar"] = to_std(r.means.x_bar);
  j["y_bar"] = to_std(r.means.y_bar);
  write_text((dir / "report.json").string(), j.dump(2) + "\n");
  return r;
}

TrainState cmd_train(const RunConfig& cfg, bool resume, LogLevel log) {
  cfg.validate();
  const SyntheticData data = generate(cfg.synth);
  const fs::path dir = ensure_dir(cfg.out);
  const std::string ckpt = (dir / "checkpoint.json").string();

  TrainState st = resume ? load_checkpoint(ckpt, cfg.train) : init_state(cfg.train, cfg.seed);
  log_at(LogLevel::kInfo, log,
         "train: mode " + mode_name(cfg.train.mode) + ", data " + hex64(data_hash(data)) +
             (resume ? ", resuming at epoch " + std::to_string(st.epoch) : ""));
  write_text((dir / "config.json").string(), run_config_json(cfg));

  const StepObserver observer = [&](const StepRecord& s, const TrainState&) {
    log_at(LogLevel::kDebug, log,
           "  epoch " + std::to_string(s.epoch) + " batch " + std::to_string(s.batch) +
               " lr " + format_double(s.lr) + " l_total " + format_double(s.loss.l_total));
  };
  while (st.epoch < cfg.train.epochs) {
    train_epoch(st, data, cfg.train, observer);
    const EpochRecord& rec = st.history.back();
    log_at(LogLevel::kInfo, log,
           "epoch " + std::to_string(rec.epoch) + ": l_total " + format_double(rec.loss.l_total) +
               " rank1 " + format_double(rec.metrics.rank(1)) + " mAP " + format_double(rec.metrics.map));
    save_checkpoint(st, cfg.train, ckpt);
    write_text((dir / "history.csv").string(), history_csv(st.history));
  }
  if (st.history.empty()) {
    save_checkpoint(st, cfg.train, ckpt);
    write_text((dir / "history.csv").string(), history_csv(st.history));
  }
  const RetrievalResult final_metrics =
      st.history.empty() ? evaluate_state(st, data, cfg.train) : st.history.back().metrics;
  write_text((dir / "metrics.json").string(),
             metrics_json(final_metrics, "identity (embeddings compared directly)"));
  return st;
}

AblationResult run_ablation(const RunConfig& cfg, int seeds, LogLevel log) {
  if (seeds < 1) throw InvalidArgument("seeds must be at least 1");
  AblationResult out;
  for (int s = 0; s < seeds; ++s) {
    RunConfig base = cfg;
    base.seed = cfg.seed + static_cast<std::uint64_t>(s);
    base.synth.seed = base.seed;
    const SyntheticData data = generate(base.synth);
    const std::uint64_t hash = data_hash(data);

    for (Mode m : kAblationModes) {
      AblationRow row;
      row.seed = base.seed;
      row.mode = m;
      row.data_hash = hash;
      try {
        const RunConfig rc = with_mode(base, m);
        TrainState st = init_state(rc.train, rc.seed);
        while (st.epoch < rc.train.epochs) train_epoch(st, data, rc.train);
        row.metrics = st.history.empty() ? evaluate_state(st, data, rc.train) : st.history.back().metrics;
      } catch (const Error& e) {
        row.status = std::string("failed: ") + e.what();
        row.exit_code = static_cast<int>(e.code());
      }
      log_at(LogLevel::kInfo, log,
             "seed " + std::to_string(row.seed) + " " + mode_name(m) + ": " +
                 (row.metrics ? "mAP " + format_double(row.metrics->map) : row.status));
      out.rows.push_back(std::move(row));
    }

    const auto* r = &out.rows[out.rows.size() - 4];
    if (r[0].metrics && r[1].metrics && r[2].metrics && r[3].metrics) {
      OrderingCheck c;
      c.seed = base.seed;
      c.ordered = r[3].metrics->map >= r[2].metrics->map && r[2].metrics->map >= r[1].metrics->map &&
                  r[1].metrics->map >= r[0].metrics->map;
      c.sas_gain = r[2].metrics->map - r[0].metrics->map;
      out.checks.push_back(c);
    }
  }
  return out;
}

std::string ablation_csv(const AblationResult& r) {
  std::string out = "seed,mode,rank1,rank5,rank10,rank20,map,data_hash,status\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.seed) + "," + mode_name(row.mode);
    for (int k : {1, 5, 10, 20}) out += "," + (row.metrics ? format_double(row.metrics->rank(k)) : "");
    out += "," + (row.metrics ? format_double(row.metrics->map) : "");
    out += "," + hex64(row.data_hash) + ",";
    // Status text may contain commas; keep the column parseable.
    std::string status = row.status;
    for (char& ch : status) if (ch == ',' || ch == '\n') ch = ';';
    out += status + "\n";
  }
  return out;
}

std::string ablation_md(const AblationResult& r) {
  std::string out;
  std::uint64_t current = 0;
  bool first = true;
  for (const auto& row : r.rows) {
    if (first || row.seed != current) {
      current = row.seed;
      if (!first) out += "\n";
      first = false;
      out += "### Seed " + std::to_string(row.seed) + " (data " + hex64(row.data_hash) + ")\n\n";
      out += "| Variant | rank-1 | rank-5 | rank-10 | rank-20 | mAP |\n";
      out += "|---|---|---|---|---|---|\n";
    }
    out += "| " + display_name(row.mode) + " |";
    if (row.metrics) {
      for (int k : {1, 5, 10, 20}) out += " " + pct(row.metrics->rank(k)) + " |";
      out += " " + pct(row.metrics->map) + " |\n";
    } else {
      out += " FAILED | FAILED | FAILED | FAILED | FAILED |\n";
    }
  }

  const std::size_t seeds = r.rows.size() / 4;
  if (seeds > 1) {
    out += "\n### Mean over " + std::to_string(seeds) + " seeds\n\n";
    out += "| Variant | rank-1 | rank-5 | rank-10 | rank-20 | mAP |\n";
    out += "|---|---|---|---|---|---|\n";
    for (std::size_t mi = 0; mi < 4; ++mi) {
      double sums[5] = {0, 0, 0, 0, 0};
      std::size_t ok = 0;
      for (std::size_t s = 0; s < seeds; ++s) {
        const auto& row = r.rows[s * 4 + mi];
        if (!row.metrics) continue;
        ++ok;
        sums[0] += row.metrics->rank(1);
        sums[1] += row.metrics->rank(5);
        sums[2] += row.metrics->rank(10);
        sums[3] += row.metrics->rank(20);
        sums[4] += row.metrics->map;
      }
      out += "| " + display_name(kAblationModes[mi]) + " |";
      for (double v : sums) out += " " + (ok ? pct(v / static_cast<double>(ok)) : std::string("FAILED")) + " |";
      out += "\n";
    }
  }

  if (!r.checks.empty()) {
    out += "\n| Seed | AAL >= SAS >= LearnedA >= Baseline | SAS - Baseline (mAP points) |\n";
    out += "|---|---|---|\n";
    for (const auto& c : r.checks) {
      out += "| " + std::to_string(c.seed) + " | " + (c.ordered ? "yes" : "no") + " | " +
             pct(c.sas_gain) + " |\n";
    }
  }
  return out;
}

int cmd_ablate(const RunConfig& cfg, int seeds, LogLevel log) {
  cfg.validate();
  const AblationResult r = run_ablation(cfg, seeds, log);
  const fs::path dir = ensure_dir(cfg.out);
  write_text((dir / "ablation.csv").string(), ablation_csv(r));
  write_text((dir / "ablation.md").string(), ablation_md(r));
  for (const auto& row : r.rows) {
    if (row.exit_code != 0) return row.exit_code;
  }
  return 0;
}

RetrievalResult cmd_eval(const std::string& query_path, const std::string& gallery_path,
                         const std::optional<std::string>& transform_path, int k,
                         const std::string& out_dir) {
  const FeatureBatch queries = load_features(query_path);
  const FeatureBatch gallery = load_features(gallery_path);
  std::optional<TransformMatrix> transform;
  std::string note = "identity (no A.csv given)";
  if (transform_path) {
    transform = TransformMatrix(load_matrix_csv(*transform_path));
    note = "A.csv applied to queries: " + *transform_path;
  }
  const RetrievalResult r = evaluate(queries, gallery, transform, k);
  const fs::path dir = ensure_dir(out_dir);
  write_text((dir / "metrics.json").string(), metrics_json(r, note));
  write_text((dir / "cmc.csv").string(), cmc_csv(r));
  return r;
}

}  // namespace pho
