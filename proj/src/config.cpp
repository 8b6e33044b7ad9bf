#include "pho/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pho/errors.hpp"

namespace pho {

using json = nlohmann::json;

LogLevel parse_log_level(const std::string& s) {
  if (s == "error") return LogLevel::kError;
  if (s == "info") return LogLevel::kInfo;
  if (s == "debug") return LogLevel::kDebug;
  throw InvalidArgument("PHO_LOG must be error, info or debug (got '" + s + "')");
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("PHO_LOG");
  if (v == nullptr || *v == '\0') return LogLevel::kError;
  return parse_log_level(v);
}

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  if (train.shape.input_dim != synth.input_dim) {
    throw InvalidArgument("network input_dim must equal synth input_dim");
  }
  if (train.shape.num_classes != synth.num_classes) {
    throw InvalidArgument("network num_classes must equal synth num_classes");
  }
  if (out.empty()) throw InvalidArgument("out directory must not be empty");
}

RunConfig default_run_config() {
  RunConfig c;
  c.train.schedule.warmup_epochs = 2;
  c.train.schedule.decay_points = {{20, 0.1}};
  return c;
}

namespace {

// Reads the keys of one JSON object, rejecting anything not consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument(where() + " must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& into) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      into = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key = "") const {
    const std::string p = key.empty() ? path_ : path_ + "." + key;
    return p.empty() ? "config" : "config key '" + p + "'";
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) {
        throw InvalidArgument("unknown config key '" + (path_.empty() ? k : path_ + "." + k) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_synth(const json& j, SynthSpec& s) {
  Section sec(j, "synth");
  sec.read("num_classes", s.num_classes);
  sec.read("samples_per_class_per_modality", s.samples_per_class_per_modality);
  sec.read("gallery_per_class", s.gallery_per_class);
  sec.read("query_per_class", s.query_per_class);
  sec.read("input_dim", s.input_dim);
  sec.read("noise_sigma", s.noise_sigma);
  sec.read("prototype_scale", s.prototype_scale);
  sec.read("map_strength", s.map_strength);
  sec.read("map_offset", s.map_offset);
  sec.finish();
}

void read_pho(const json& j, RunConfig& c) {
  Section sec(j, "pho");
  auto& t = c.train;
  sec.read("alpha", t.alpha);
  sec.read("beta", t.loss.beta);
  sec.read("gamma", t.loss.gamma);
  sec.read("rho", t.loss.rho);
  if (const json* l = sec.child("lambda")) {
    if (!l->is_number()) throw InvalidArgument(sec.where("lambda") + " has the wrong type");
    c.lambda = l->get<double>();
  }
  sec.read("triplet_margin", t.loss.triplet_margin);
  sec.read("mmd_bandwidths", t.loss.mmd_bandwidths);
  sec.read("gem_p", t.loss.gem_p);
  sec.read("aal_max_iters", t.aal_max_iters);
  sec.read("aal_tol", t.aal_tol);
  sec.read("align_weight", t.align_weight);
  sec.finish();
}

void read_network(const json& j, TrainConfig& t) {
  Section sec(j, "network");
  sec.read("stem_dim", t.shape.stem_dim);
  sec.read("hidden_dim", t.shape.hidden_dim);
  sec.read("embed_dim", t.shape.embed_dim);
  sec.read("normalize_embeddings", t.normalize_embeddings);
  sec.finish();
}

void read_schedule(const json& j, LrSchedule& s) {
  Section sec(j, "schedule");
  sec.read("base_lr", s.base_lr);
  sec.read("momentum", s.momentum);
  sec.read("warmup_epochs", s.warmup_epochs);
  sec.read("decay_points", s.decay_points);
  sec.finish();
}

void read_batch(const json& j, TrainConfig& t) {
  Section sec(j, "batch");
  sec.read("identities", t.identities_per_batch);
  sec.read("samples_per_identity", t.samples_per_identity);
  sec.finish();
}

void sync(RunConfig& c) {
  c.train.shape.input_dim = c.synth.input_dim;
  c.train.shape.num_classes = c.synth.num_classes;
  c.synth.seed = c.seed;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = default_run_config();
  Section top(j, "");
  top.read("seed", c.seed);
  top.read("out", c.out);
  top.read("epochs", c.train.epochs);
  top.read("eval_k", c.train.eval_k);
  std::string mode = mode_name(c.train.mode);
  top.read("mode", mode);
  c.train.mode = parse_mode(mode);
  if (const json* s = top.child("synth")) read_synth(*s, c.synth);
  if (const json* s = top.child("pho")) read_pho(*s, c);
  if (const json* s = top.child("network")) read_network(*s, c.train);
  if (const json* s = top.child("schedule")) read_schedule(*s, c.train.schedule);
  if (const json* s = top.child("batch")) read_batch(*s, c.train);
  top.finish();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

RunConfig finalize(RunConfig c, const Overrides& ov) {
  if (ov.seed) c.seed = *ov.seed;
  if (ov.out) c.out = *ov.out;
  if (ov.alpha) c.train.alpha = *ov.alpha;
  if (ov.beta) c.train.loss.beta = *ov.beta;
  if (ov.gamma) c.train.loss.gamma = *ov.gamma;
  if (ov.rho) c.train.loss.rho = *ov.rho;
  if (ov.lambda) c.lambda = *ov.lambda;
  if (ov.mode) c.train.mode = parse_mode(*ov.mode);
  if (ov.k) c.train.eval_k = *ov.k;
  c.train.loss.lambda = c.lambda.value_or(uses_ccl(c.train.mode) ? 1.0 : 0.0);
  sync(c);
  c.validate();
  return c;
}

RunConfig with_mode(const RunConfig& cfg, Mode mode) {
  RunConfig c = cfg;
  c.train.mode = mode;
  c.train.loss.lambda = uses_ccl(mode) ? c.lambda.value_or(1.0) : 0.0;
  c.validate();
  return c;
}

std::string run_config_json(const RunConfig& c) {
  const auto& t = c.train;
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["mode"] = mode_name(t.mode);
  j["epochs"] = t.epochs;
  j["eval_k"] = t.eval_k;
  j["synth"] = {{"num_classes", c.synth.num_classes},
                {"samples_per_class_per_modality", c.synth.samples_per_class_per_modality},
                {"gallery_per_class", c.synth.gallery_per_class},
                {"query_per_class", c.synth.query_per_class},
                {"input_dim", c.synth.input_dim},
                {"noise_sigma", c.synth.noise_sigma},
                {"prototype_scale", c.synth.prototype_scale},
                {"map_strength", c.synth.map_strength},
                {"map_offset", c.synth.map_offset}};
  j["pho"] = {{"alpha", t.alpha},
              {"beta", t.loss.beta},
              {"gamma", t.loss.gamma},
              {"rho", t.loss.rho},
              {"lambda", t.loss.lambda},
              {"triplet_margin", t.loss.triplet_margin},
              {"mmd_bandwidths", t.loss.mmd_bandwidths},
              {"gem_p", t.loss.gem_p},
              {"aal_max_iters", t.aal_max_iters},
              {"aal_tol", t.aal_tol},
              {"align_weight", t.align_weight}};
  j["network"] = {{"stem_dim", t.shape.stem_dim},
                  {"hidden_dim", t.shape.hidden_dim},
                  {"embed_dim", t.shape.embed_dim},
                  {"normalize_embeddings", t.normalize_embeddings}};
  j["schedule"] = {{"base_lr", t.schedule.base_lr},
                   {"momentum", t.schedule.momentum},
                   {"warmup_epochs", t.schedule.warmup_epochs},
                   {"decay_points", t.schedule.decay_points}};
  j["batch"] = {{"identities", t.identities_per_batch},
                {"samples_per_identity", t.samples_per_identity}};
  return j.dump(2) + "\n";
}

}  // namespace pho
