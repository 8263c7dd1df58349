#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedlab/composition.hpp"
#include "seedlab/corpus.hpp"

namespace seedlab::inpaint {

inline constexpr double kDefaultMinConfidence = 0.5;

// Fraction of mask pixels covered by the union of boxes with confidence >=
// min_confidence. A pixel is covered when its center ((c+0.5)/W, (r+0.5)/H)
// lies in [x0, x1) x [y0, y1). Throws EmptyMask for a mask with no pixels set.
double text_artifact_ratio(const std::vector<OcrBox>& boxes, const composition::PlaneView& mask, double min_confidence);

struct ArtifactScore {
  SeedId seed;
  double mean_ratio = 0;
  std::size_t n_images = 0;
};

struct ImageRatio {
  ImageKey image;
  std::optional<double> ratio;  // empty when the image was excluded
  std::string note;
};

struct ArtifactReport {
  std::vector<ArtifactScore> scores;  // ascending mean ratio, ties by seed
  std::vector<ImageRatio> images;
  std::size_t excluded = 0;
  double min_confidence = kDefaultMinConfidence;

  nlohmann::json to_json() const;
};

// Scores every image whose prompt kind is in `kinds` (all kinds when empty).
// The selected images must carry ocr_boxes and mask artifacts, otherwise
// ValidationError. Images with an empty mask are excluded and counted.
ArtifactReport rank_seeds_by_artifacts(const CorpusManifest& manifest, double min_confidence = kDefaultMinConfidence,
                                       const std::set<PromptKind>& kinds = {});

}  // namespace seedlab::inpaint
