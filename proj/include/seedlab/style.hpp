#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seedlab/corpus.hpp"
#include "seedlab/tensor.hpp"

namespace seedlab::style {

// One layer's activations, C x H x W row-major.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  // Expects a rank-3 blob [C, H, W]; throws ShapeMismatch otherwise and
  // ValidationError on non-finite activations.
  static FeatureMap from_blob(const TensorBlob& blob);
};

// What to do with a channel whose activations are identically zero.
enum class ZeroChannelPolicy {
  kZeroSimilarity,  // the channel's row and column of the Gram matrix are 0
  kThrow,           // throw DegenerateChannel
};

// Cosine-normalized Gram matrix: G(i, j) = cos(F_i, F_j) over the flattened
// spatial positions of channels i and j.
Eigen::MatrixXd gram_matrix(const FeatureMap& fm, ZeroChannelPolicy policy = ZeroChannelPolicy::kZeroSimilarity);

struct LayerSpec {
  std::string name;
  std::size_t channels = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct LayerFeatures {
  std::string name;
  FeatureMap map;
};

struct StyleVector {
  Eigen::VectorXd values;
  std::vector<LayerSpec> layers;
};

// Length of the style vector for a layer layout: sum of C(C-1)/2.
std::size_t style_vector_length(std::span<const LayerSpec> layers) noexcept;

// Concatenates, layer by layer, the strict upper triangle of each Gram matrix
// in row-major order: (0,1), (0,2), ..., (0,C-1), (1,2), ...
StyleVector style_vector(std::span<const LayerFeatures> layers,
                         ZeroChannelPolicy policy = ZeroChannelPolicy::kZeroSimilarity);

// Row s holds seed s's per-prompt 2-vectors laid out prompt-major:
// [p0.x, p0.y, p1.x, p1.y, ...]. Throws MissingCell if any (seed, prompt)
// cell is absent.
Eigen::MatrixXd aggregate_seed_style(const std::map<ImageKey, Eigen::Vector2d>& per_image,
                                     std::span<const SeedId> seeds, std::span<const std::string> prompts);

// Reads feature_maps.<layer> artifacts for every image whose prompt is in
// `prompt_filter` (all images when empty). With `layers` empty, the layer set
// is taken from the first image's feature_maps keys in key order; every image
// must carry the same set.
std::map<ImageKey, StyleVector> load_style_vectors(const CorpusManifest& manifest,
                                                   std::vector<std::string> layers = {},
                                                   const std::set<std::string>& prompt_filter = {},
                                                   ZeroChannelPolicy policy = ZeroChannelPolicy::kZeroSimilarity);

}  // namespace seedlab::style
