#include "seedlab/style.hpp"

#include <algorithm>
#include <cmath>

#include "seedlab/error.hpp"

namespace seedlab::style {

FeatureMap FeatureMap::from_blob(const TensorBlob& blob) {
  validate_blob(blob);
  if (blob.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "feature map must have shape [C,H,W], got rank " + std::to_string(blob.rank()));
  }
  if (!std::all_of(blob.data.begin(), blob.data.end(), [](float v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kValidation, "feature map contains NaN or Inf");
  }
  return FeatureMap{blob.shape[0], blob.shape[1], blob.shape[2], blob.data};
}

Eigen::MatrixXd gram_matrix(const FeatureMap& fm, ZeroChannelPolicy policy) {
  const auto c = static_cast<Eigen::Index>(fm.channels);
  const auto hw = static_cast<Eigen::Index>(fm.height * fm.width);
  if (c == 0 || hw == 0 || fm.values.size() != static_cast<std::size_t>(c * hw)) {
    throw Error(ErrorCode::kShapeMismatch, "feature map dimensions do not match its values");
  }
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXd f = Eigen::Map<const RowMajor>(fm.values.data(), c, hw).cast<double>();

  Eigen::MatrixXd g = f * f.transpose();
  Eigen::VectorXd norms(c);
  for (Eigen::Index i = 0; i < c; ++i) {
    norms(i) = std::sqrt(g(i, i));
    if (norms(i) == 0.0 && policy == ZeroChannelPolicy::kThrow) {
      throw Error(ErrorCode::kDegenerateChannel, "channel " + std::to_string(i) + " is identically zero");
    }
  }
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i; j < c; ++j) {
      double v = 0.0;
      if (norms(i) > 0.0 && norms(j) > 0.0) {
        v = (i == j) ? 1.0 : std::clamp(g(i, j) / (norms(i) * norms(j)), -1.0, 1.0);
      }
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

std::size_t style_vector_length(std::span<const LayerSpec> layers) noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.channels * (l.channels - (l.channels > 0 ? 1 : 0)) / 2;
  return n;
}

StyleVector style_vector(std::span<const LayerFeatures> layers, ZeroChannelPolicy policy) {
  if (layers.empty()) {
    throw Error(ErrorCode::kValidation, "style_vector needs at least one feature map");
  }
  StyleVector out;
  for (const auto& layer : layers) {
    out.layers.push_back({layer.name, layer.map.channels});
  }
  out.values.resize(static_cast<Eigen::Index>(style_vector_length(out.layers)));
  Eigen::Index pos = 0;
  for (const auto& layer : layers) {
    const Eigen::MatrixXd g = gram_matrix(layer.map, policy);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < g.cols(); ++j) {
        out.values(pos++) = g(i, j);
      }
    }
  }
  return out;
}

Eigen::MatrixXd aggregate_seed_style(const std::map<ImageKey, Eigen::Vector2d>& per_image,
                                     std::span<const SeedId> seeds, std::span<const std::string> prompts) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(seeds.size()), static_cast<Eigen::Index>(2 * prompts.size()));
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    for (std::size_t p = 0; p < prompts.size(); ++p) {
      auto it = per_image.find(ImageKey{seeds[s], prompts[p]});
      if (it == per_image.end()) {
        throw Error(ErrorCode::kMissingCell, "no style embedding for seed " + std::to_string(seeds[s].value) +
                                                 ", prompt " + prompts[p]);
      }
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(2 * p)) = it->second.x();
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(2 * p + 1)) = it->second.y();
    }
  }
  return out;
}

std::map<ImageKey, StyleVector> load_style_vectors(const CorpusManifest& manifest, std::vector<std::string> layers,
                                                   const std::set<std::string>& prompt_filter,
                                                   ZeroChannelPolicy policy) {
  const std::string prefix = std::string(artifact::kFeatureMaps) + ".";
  std::map<ImageKey, StyleVector> out;
  for (const auto& img : manifest.images) {
    if (!prompt_filter.empty() && !prompt_filter.contains(img.prompt_id)) continue;

    std::vector<std::string> keys;
    for (const auto& [key, path] : img.artifacts) {
      if (key.starts_with(prefix)) keys.push_back(key.substr(prefix.size()));
    }
    if (layers.empty()) {
      if (keys.empty()) {
        throw Error(ErrorCode::kValidation, "image (seed=" + std::to_string(img.seed.value) + ", prompt_id=" +
                                                img.prompt_id + ") has no feature_maps artifacts");
      }
      layers = keys;
    }

    std::vector<LayerFeatures> maps;
    for (const auto& layer : layers) {
      auto it = img.artifacts.find(prefix + layer);
      if (it == img.artifacts.end()) {
        throw Error(ErrorCode::kValidation, "image (seed=" + std::to_string(img.seed.value) + ", prompt_id=" +
                                                img.prompt_id + ") lacks feature_maps." + layer);
      }
      maps.push_back({layer, FeatureMap::from_blob(read_tensor(manifest.resolve(it->second)))});
    }
    out.emplace(img.key(), style_vector(maps, policy));
  }
  return out;
}

}  // namespace seedlab::style
