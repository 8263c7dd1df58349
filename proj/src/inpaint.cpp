#include "seedlab/inpaint.hpp"

#include <algorithm>
#include <map>

#include "seedlab/error.hpp"
#include "seedlab/tensor.hpp"

namespace seedlab::inpaint {

using nlohmann::json;

double text_artifact_ratio(const std::vector<OcrBox>& boxes, const composition::PlaneView& mask, double min_confidence) {
  if (mask.data.size() != mask.size()) {
    throw Error(ErrorCode::kShapeMismatch, "mask view dimensions do not match its data");
  }
  std::vector<const OcrBox*> kept;
  for (const auto& b : boxes) {
    if (b.confidence >= min_confidence) kept.push_back(&b);
  }
  const double w = static_cast<double>(mask.width);
  const double h = static_cast<double>(mask.height);
  std::size_t mask_px = 0;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < mask.height; ++r) {
    const double y = (static_cast<double>(r) + 0.5) / h;
    for (std::size_t c = 0; c < mask.width; ++c) {
      if (mask.at(r, c) == 0.0F) continue;
      ++mask_px;
      const double x = (static_cast<double>(c) + 0.5) / w;
      if (std::any_of(kept.begin(), kept.end(),
                      [&](const OcrBox* b) { return x >= b->x0 && x < b->x1 && y >= b->y0 && y < b->y1; })) {
        ++covered;
      }
    }
  }
  if (mask_px == 0) {
    throw Error(ErrorCode::kEmptyMask, "inpainting mask has no pixels set");
  }
  return static_cast<double>(covered) / static_cast<double>(mask_px);
}

json ArtifactReport::to_json() const {
  json seeds = json::array();
  for (const auto& s : scores) {
    seeds.push_back(json{{"seed", s.seed.value}, {"mean_ratio", s.mean_ratio}, {"n_images", s.n_images}});
  }
  json per_image = json::array();
  for (const auto& i : images) {
    json e{{"seed", i.image.seed.value}, {"prompt_id", i.image.prompt_id}};
    e["ratio"] = i.ratio ? json(*i.ratio) : json(nullptr);
    if (!i.note.empty()) e["note"] = i.note;
    per_image.push_back(std::move(e));
  }
  return json{{"min_confidence", min_confidence},
              {"seeds", std::move(seeds)},
              {"images", std::move(per_image)},
              {"excluded_images", excluded}};
}

ArtifactReport rank_seeds_by_artifacts(const CorpusManifest& manifest, double min_confidence,
                                       const std::set<PromptKind>& kinds) {
  CorpusManifest selected = manifest;
  selected.images.clear();
  for (const auto& img : manifest.images) {
    const PromptRecord* prompt = manifest.find_prompt(img.prompt_id);
    if (kinds.empty() || (prompt && kinds.contains(prompt->kind))) selected.images.push_back(img);
  }
  const ValidationReport report =
      validate_corpus(selected, {std::string(artifact::kOcrBoxes), std::string(artifact::kMask)});
  if (!report.empty()) {
    const auto& first = report.issues.front();
    throw Error(ErrorCode::kValidation, std::to_string(report.issues.size()) +
                                            " inpainting artifact problem(s); first: seed " +
                                            std::to_string(first.image.seed.value) + ", prompt " +
                                            first.image.prompt_id + ", " + first.artifact + ": " + first.detail);
  }

  ArtifactReport out;
  out.min_confidence = min_confidence;
  std::map<SeedId, std::pair<double, std::size_t>> sums;
  for (const auto& img : selected.images) {
    const auto boxes = load_ocr_boxes(selected.resolve(img.artifacts.at(std::string(artifact::kOcrBoxes))));
    const TensorBlob mask = read_tensor(selected.resolve(img.artifacts.at(std::string(artifact::kMask))));
    try {
      const double ratio = text_artifact_ratio(boxes, composition::PlaneView::of(mask), min_confidence);
      out.images.push_back({img.key(), ratio, {}});
      auto& [sum, n] = sums[img.seed];
      sum += ratio;
      ++n;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyMask) throw;
      out.images.push_back({img.key(), std::nullopt, "EmptyMask"});
      ++out.excluded;
    }
  }
  for (const auto& [seed, acc] : sums) {
    out.scores.push_back({seed, acc.first / static_cast<double>(acc.second), acc.second});
  }
  std::stable_sort(out.scores.begin(), out.scores.end(), [](const ArtifactScore& a, const ArtifactScore& b) {
    return a.mean_ratio != b.mean_ratio ? a.mean_ratio < b.mean_ratio : a.seed < b.seed;
  });
  return out;
}

}  // namespace seedlab::inpaint
