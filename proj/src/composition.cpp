#include "seedlab/composition.hpp"

#include <algorithm>
#include <cmath>

#include "seedlab/error.hpp"

namespace seedlab::composition {

PlaneView PlaneView::of(const TensorBlob& blob) {
  validate_blob(blob);
  if (blob.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "expected an [H,W] plane, got rank " + std::to_string(blob.rank()));
  }
  return PlaneView{blob.shape[0], blob.shape[1], blob.data};
}

std::optional<CompositionVector> composition_features(const PlaneView& mask, const PlaneView& depth) {
  if (mask.height != depth.height || mask.width != depth.width || mask.data.size() != mask.size() ||
      depth.data.size() != depth.size()) {
    throw Error(ErrorCode::kShapeMismatch, "mask and depth map differ in shape");
  }
  float dmin = 0.0F;
  float dmax = 0.0F;
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const float v = depth.data[i];
    if (!std::isfinite(v)) throw Error(ErrorCode::kValidation, "depth map contains NaN or Inf");
    dmin = i == 0 ? v : std::min(dmin, v);
    dmax = i == 0 ? v : std::max(dmax, v);
  }
  const double range = static_cast<double>(dmax) - static_cast<double>(dmin);

  double row_sum = 0.0;
  double col_sum = 0.0;
  double depth_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < mask.height; ++r) {
    for (std::size_t c = 0; c < mask.width; ++c) {
      const float m = mask.at(r, c);
      if (m != 0.0F && m != 1.0F) throw Error(ErrorCode::kValidation, "mask values must be 0 or 1");
      if (m == 0.0F) continue;
      ++count;
      row_sum += static_cast<double>(r);
      col_sum += static_cast<double>(c);
      if (range > 0.0) depth_sum += (static_cast<double>(depth.at(r, c)) - dmin) / range;
    }
  }
  if (count == 0) return std::nullopt;

  const double n = static_cast<double>(count);
  CompositionVector v;
  v.cx = mask.width > 1 ? col_sum / n / static_cast<double>(mask.width - 1) : 0.5;
  v.cy = mask.height > 1 ? row_sum / n / static_cast<double>(mask.height - 1) : 0.5;
  v.size = n / static_cast<double>(mask.size());
  v.depth = std::clamp(depth_sum / n, 0.0, 1.0);
  return v;
}

SeedComposition aggregate_seed_composition(const std::map<ImageKey, std::optional<CompositionVector>>& per_image,
                                           std::span<const SeedId> seeds, std::span<const std::string> prompts,
                                           MissingPolicy policy) {
  const auto cell = [&](SeedId seed, const std::string& prompt) -> const CompositionVector* {
    auto it = per_image.find(ImageKey{seed, prompt});
    return (it == per_image.end() || !it->second) ? nullptr : &*it->second;
  };

  SeedComposition out;
  for (const auto& prompt : prompts) {
    if (std::any_of(seeds.begin(), seeds.end(), [&](SeedId s) { return cell(s, prompt) != nullptr; })) {
      out.prompts_used.push_back(prompt);
    }
  }
  const auto cols = static_cast<Eigen::Index>(4 * out.prompts_used.size());

  Eigen::MatrixXd column_mean = Eigen::MatrixXd::Zero(1, cols);
  if (policy == MissingPolicy::kImpute) {
    for (std::size_t p = 0; p < out.prompts_used.size(); ++p) {
      Eigen::Vector4d sum = Eigen::Vector4d::Zero();
      double n = 0.0;
      for (SeedId s : seeds) {
        if (const auto* v = cell(s, out.prompts_used[p])) {
          sum += v->as_vector();
          n += 1.0;
        }
      }
      column_mean.block<1, 4>(0, static_cast<Eigen::Index>(4 * p)) = (sum / n).transpose();
    }
  }

  std::vector<Eigen::RowVectorXd> rows;
  for (SeedId s : seeds) {
    Eigen::RowVectorXd row(cols);
    std::size_t missing = 0;
    for (std::size_t p = 0; p < out.prompts_used.size(); ++p) {
      const auto col = static_cast<Eigen::Index>(4 * p);
      if (const auto* v = cell(s, out.prompts_used[p])) {
        row.segment<4>(col) = v->as_vector().transpose();
      } else {
        ++missing;
        row.segment<4>(col) = column_mean.block<1, 4>(0, col);
      }
    }
    const bool keep = missing == 0 || policy == MissingPolicy::kImpute;
    out.usable.push_back(keep);
    out.imputed.push_back(policy == MissingPolicy::kImpute ? missing : 0);
    if (keep) {
      rows.push_back(std::move(row));
      out.row_seeds.push_back(s);
    }
  }
  out.matrix.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) out.matrix.row(static_cast<Eigen::Index>(i)) = rows[i];
  return out;
}

std::map<ImageKey, std::optional<CompositionVector>> load_composition(const CorpusManifest& manifest,
                                                                      const std::set<std::string>& prompt_filter) {
  std::map<ImageKey, std::optional<CompositionVector>> out;
  for (const auto& img : manifest.images) {
    if (!prompt_filter.empty() && !prompt_filter.contains(img.prompt_id)) continue;
    auto mask_it = img.artifacts.find(std::string(artifact::kMask));
    auto depth_it = img.artifacts.find(std::string(artifact::kDepth));
    if (mask_it == img.artifacts.end()) {
      // The adapter omits the mask when segmentation found no object.
      out.emplace(img.key(), std::nullopt);
      continue;
    }
    if (depth_it == img.artifacts.end()) {
      throw Error(ErrorCode::kValidation, "image (seed=" + std::to_string(img.seed.value) + ", prompt_id=" +
                                              img.prompt_id + ") has a mask but no depth map");
    }
    const TensorBlob mask = read_tensor(manifest.resolve(mask_it->second));
    const TensorBlob depth = read_tensor(manifest.resolve(depth_it->second));
    out.emplace(img.key(), composition_features(PlaneView::of(mask), PlaneView::of(depth)));
  }
  return out;
}

}  // namespace seedlab::composition
