#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "seedlab/corpus.hpp"
#include "seedlab/tensor.hpp"

namespace seedlab::composition {

// Read-only view of an H x W row-major plane.
struct PlaneView {
  std::size_t height = 0;
  std::size_t width = 0;
  std::span<const float> data;

  float at(std::size_t row, std::size_t col) const { return data[row * width + col]; }
  std::size_t size() const noexcept { return height * width; }

  // Expects a rank-2 blob; throws ShapeMismatch otherwise.
  static PlaneView of(const TensorBlob& blob);
};

struct CompositionVector {
  double cx = 0;     // mean mask column / (W - 1)
  double cy = 0;     // mean mask row / (H - 1)
  double size = 0;   // mask pixels / (H * W)
  double depth = 0;  // mean min-max normalized depth over the mask

  Eigen::Vector4d as_vector() const { return {cx, cy, size, depth}; }
};

// std::nullopt is the NoObject outcome (empty mask). A mask must hold only 0
// and 1; depth must be finite. For a single-column (single-row) image the
// centroid coordinate is 0.5. A constant depth map normalizes to 0.
std::optional<CompositionVector> composition_features(const PlaneView& mask, const PlaneView& depth);

enum class MissingPolicy { kDrop, kImpute };

struct SeedComposition {
  Eigen::MatrixXd matrix;             // one row per seed kept, 4 columns per prompt used
  std::vector<SeedId> row_seeds;
  std::vector<bool> usable;           // parallel to the input seeds
  std::vector<std::size_t> imputed;   // cells imputed per input seed
  std::vector<std::string> prompts_used;
};

// Concatenates (cx, cy, size, depth) per prompt for each seed. Prompts with no
// object for any seed are left out. Absent grid cells count as NoObject.
SeedComposition aggregate_seed_composition(const std::map<ImageKey, std::optional<CompositionVector>>& per_image,
                                           std::span<const SeedId> seeds, std::span<const std::string> prompts,
                                           MissingPolicy policy = MissingPolicy::kDrop);

// Reads mask and depth artifacts for each selected image.
std::map<ImageKey, std::optional<CompositionVector>> load_composition(const CorpusManifest& manifest,
                                                                      const std::set<std::string>& prompt_filter = {});

}  // namespace seedlab::composition
