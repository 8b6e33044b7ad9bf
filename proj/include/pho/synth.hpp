#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pho/core_types.hpp"

namespace pho {

// Ground-truth map applied to class prototypes to produce infrared inputs.
struct ModalityMap {
  Matrix linear;
  Vector offset;
};

struct SynthSpec {
  int num_classes = 10;
  int samples_per_class_per_modality = 20;  // training samples
  int gallery_per_class = 5;                // visible, held out
  int query_per_class = 5;                  // infrared, held out
  int input_dim = 12;
  double noise_sigma = 1.0;
  double prototype_scale = 1.0;
  // Random map I + map_strength * G / sqrt(d) and offset map_offset * g,
  // unless an explicit map is given.
  double map_strength = 1.0;
  double map_offset = 1.0;
  std::optional<ModalityMap> modality_map;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  FeatureBatch train;    // both modalities
  FeatureBatch gallery;  // visible only
  FeatureBatch query;    // infrared only
  Matrix prototypes;     // num_classes x input_dim
  ModalityMap map;
};

SyntheticData generate(const SynthSpec& spec);

struct TrackletSpec {
  int frames_per_tracklet = 12;
  int tracklets_per_identity_per_modality = 1;
  double jitter_sigma = 0.05;

  void validate() const;
};

struct TrackletData {
  FeatureBatch pooled;          // one row per tracklet
  std::vector<Matrix> frames;   // frames[i] is frames_per_tracklet x input_dim
};

// Tracklets for the training split: each tracklet is one sampled vector
// repeated over frames with i.i.d. jitter, then GeM-pooled with exponent p.
TrackletData generate_tracklets(const SynthSpec& spec, const TrackletSpec& tspec,
                                double gem_p);

// Feature CSV: header "id,modality,f0,...,f{n-1}", id = class id, modality V/I.
std::string write_features(const FeatureBatch& batch);
FeatureBatch parse_features(const std::string& text);
FeatureBatch load_features(const std::string& path);
void save_features(const FeatureBatch& batch, const std::string& path);

// FNV-1a over the canonical CSV serialisation.
std::uint64_t batch_hash(const FeatureBatch& batch);

}  // namespace pho
