#include "pho/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pho/errors.hpp"
#include "pho/format.hpp"
#include "pho/losses.hpp"

namespace pho {

void SynthSpec::validate() const {
  if (num_classes < 2) throw InvalidArgument("num_classes must be at least 2");
  if (samples_per_class_per_modality < 1) throw InvalidArgument("samples_per_class_per_modality must be positive");
  if (gallery_per_class < 1 || query_per_class < 1) {
    throw InvalidArgument("gallery_per_class and query_per_class must be positive");
  }
  if (input_dim < 1) throw InvalidArgument("input_dim must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("noise_sigma must be non-negative");
  if (!(prototype_scale > 0.0)) throw InvalidArgument("prototype_scale must be positive");
  if (!(map_strength >= 0.0) || !(map_offset >= 0.0)) {
    throw InvalidArgument("map_strength and map_offset must be non-negative");
  }
  if (modality_map) {
    const auto d = static_cast<Eigen::Index>(input_dim);
    if (modality_map->linear.rows() != d || modality_map->linear.cols() != d ||
        modality_map->offset.size() != d) {
      throw InvalidArgument("modality_map does not match input_dim");
    }
    if (Eigen::FullPivLU<Matrix>(modality_map->linear).rank() != d) {
      throw InvalidArgument("modality_map is not invertible");
    }
  }
}

namespace {

ModalityMap draw_map(const SynthSpec& spec, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(spec.input_dim);
  ModalityMap m;
  m.linear = Matrix::Identity(d, d) +
             (spec.map_strength / std::sqrt(static_cast<double>(d))) * rng.normal_matrix(d, d);
  m.offset = spec.map_offset * rng.normal_vector(d);
  if (Eigen::FullPivLU<Matrix>(m.linear).rank() != d) {
    throw InvalidArgument("drawn modality map is singular; choose another seed");
  }
  return m;
}

struct Rows {
  std::vector<Vector> feats;
  std::vector<Modality> mods;
  std::vector<int> ids;

  void add(Vector v, Modality m, int id) {
    feats.push_back(std::move(v));
    mods.push_back(m);
    ids.push_back(id);
  }
  FeatureBatch build(Eigen::Index dim) {
    Matrix f(static_cast<Eigen::Index>(feats.size()), dim);
    for (std::size_t i = 0; i < feats.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = feats[i];
    return FeatureBatch(std::move(f), std::move(mods), std::move(ids));
  }
};

}  // namespace

SyntheticData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto d = static_cast<Eigen::Index>(spec.input_dim);
  SyntheticData out;
  out.prototypes = spec.prototype_scale * rng.normal_matrix(spec.num_classes, d);
  out.map = spec.modality_map ? *spec.modality_map : draw_map(spec, rng);

  Rows train, gallery, query;
  for (int c = 0; c < spec.num_classes; ++c) {
    const Vector proto = out.prototypes.row(c).transpose();
    const Vector mapped = out.map.linear * proto + out.map.offset;
    auto visible = [&] { return Vector(proto + rng.normal_vector(d, spec.noise_sigma)); };
    auto infrared = [&] { return Vector(mapped + rng.normal_vector(d, spec.noise_sigma)); };
    for (int s = 0; s < spec.samples_per_class_per_modality; ++s) train.add(visible(), Modality::kVisible, c);
    for (int s = 0; s < spec.samples_per_class_per_modality; ++s) train.add(infrared(), Modality::kInfrared, c);
    for (int s = 0; s < spec.gallery_per_class; ++s) gallery.add(visible(), Modality::kVisible, c);
    for (int s = 0; s < spec.query_per_class; ++s) query.add(infrared(), Modality::kInfrared, c);
  }
  out.train = train.build(d);
  out.gallery = gallery.build(d);
  out.query = query.build(d);
  return out;
}

void TrackletSpec::validate() const {
  if (frames_per_tracklet < 1) throw InvalidArgument("frames_per_tracklet must be at least 1");
  if (tracklets_per_identity_per_modality < 1) {
    throw InvalidArgument("tracklets_per_identity_per_modality must be at least 1");
  }
  if (!(jitter_sigma >= 0.0)) throw InvalidArgument("jitter_sigma must be non-negative");
}

TrackletData generate_tracklets(const SynthSpec& spec, const TrackletSpec& tspec,
                                double gem_p) {
  spec.validate();
  tspec.validate();
  // Tracklet bases come from their own stream so the frame-level data does
  // not shift the sample-level generator.
  SynthSpec base_spec = spec;
  base_spec.samples_per_class_per_modality = tspec.tracklets_per_identity_per_modality;
  const SyntheticData base = generate(base_spec);
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);

  TrackletData out;
  const Eigen::Index d = base.train.dim();
  Matrix pooled(base.train.size(), d);
  for (Eigen::Index i = 0; i < base.train.size(); ++i) {
    Matrix frames(tspec.frames_per_tracklet, d);
    for (int t = 0; t < tspec.frames_per_tracklet; ++t) {
      frames.row(t) = base.train.row(i) + rng.normal_vector(d, tspec.jitter_sigma).transpose();
    }
    pooled.row(i) = gem_pool(frames, gem_p).transpose();
    out.frames.push_back(std::move(frames));
  }
  out.pooled = base.train.with_features(std::move(pooled));
  return out;
}

std::string write_features(const FeatureBatch& batch) {
  std::string out = "id,modality";
  for (Eigen::Index j = 0; j < batch.dim(); ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    out += std::to_string(batch.class_id(i));
    out += ',';
    out += modality_tag(batch.modality(i));
    for (Eigen::Index j = 0; j < batch.dim(); ++j) {
      out += ',';
      out += format_double(batch.features()(i, j));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

FeatureBatch parse_features(const std::string& text) {
  if (text.find('\r') != std::string::npos) {
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(text.find('\r')), '\n'));
    throw ParseError(line, "carriage return found; LF line endings required");
  }
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw ParseError(1, "missing header");

  const auto header = split(lines[0]);
  if (header.size() < 3 || header[0] != "id" || header[1] != "modality") {
    throw ParseError(1, "header must be id,modality,f0,...");
  }
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j - 2)) {
      throw ParseError(1, "expected column f" + std::to_string(j - 2));
    }
  }
  const auto n = static_cast<Eigen::Index>(header.size() - 2);

  std::vector<Vector> feats;
  std::vector<Modality> mods;
  std::vector<int> ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const auto fields = split(lines[li]);
    if (lines[li].empty()) throw ParseError(line_no, "empty line");
    if (fields.size() != header.size()) {
      throw DimensionMismatch("line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(header.size()));
    }
    int id = 0;
    {
      const auto f = fields[0];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), id);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || id < 0) {
        throw ParseError(line_no, "id '" + std::string(f) + "' is not a non-negative integer");
      }
    }
    Modality m;
    if (fields[1] == "V") {
      m = Modality::kVisible;
    } else if (fields[1] == "I") {
      m = Modality::kInfrared;
    } else {
      throw UnknownModality(line_no, std::string(fields[1]));
    }
    Vector v(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto f = fields[static_cast<std::size_t>(j) + 2];
      if (!parse_double(f, v[j])) {
        throw ParseError(line_no, "field f" + std::to_string(j) + " = '" + std::string(f) +
                                      "' is not a finite decimal number");
      }
    }
    feats.push_back(std::move(v));
    mods.push_back(m);
    ids.push_back(id);
  }
  Matrix f(static_cast<Eigen::Index>(feats.size()), n);
  for (std::size_t i = 0; i < feats.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = feats[i];
  return FeatureBatch(std::move(f), std::move(mods), std::move(ids));
}

FeatureBatch load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open feature file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_features(ss.str());
}

void save_features(const FeatureBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write feature file " + path);
  out << write_features(batch);
}

std::uint64_t batch_hash(const FeatureBatch& batch) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : write_features(batch)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace pho
