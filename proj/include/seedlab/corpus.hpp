#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace seedlab {

struct SeedId {
  std::uint32_t value = 0;

  friend auto operator<=>(const SeedId&, const SeedId&) = default;
};

// Identifies one generated image inside a corpus.
struct ImageKey {
  SeedId seed;
  std::string prompt_id;

  friend auto operator<=>(const ImageKey&, const ImageKey&) = default;
};

enum class PromptKind { kDenseCaption, kParti, kSynthetic, kInpaintRemoval, kInpaintCompletion };

std::string_view to_string(PromptKind kind) noexcept;
PromptKind parse_prompt_kind(std::string_view text);

struct PromptRecord {
  std::string prompt_id;
  std::string text;
  PromptKind kind = PromptKind::kDenseCaption;
  std::optional<std::string> object_category;
  std::optional<std::string> modifier;

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

// Artifact keys are "<kind>" or "<kind>.<qualifier>", e.g. "mask" or
// "feature_maps.relu2_2".
namespace artifact {
inline constexpr std::string_view kFeatureMaps = "feature_maps";
inline constexpr std::string_view kPooledEmbedding = "pooled_embedding";
inline constexpr std::string_view kMask = "mask";
inline constexpr std::string_view kDepth = "depth";
inline constexpr std::string_view kOcrBoxes = "ocr_boxes";
inline constexpr std::string_view kPreferenceScore = "preference_score";

std::string_view kind_of(std::string_view key) noexcept;
}  // namespace artifact

struct ImageRecord {
  SeedId seed;
  std::string prompt_id;
  std::string image_path;
  std::map<std::string, std::string> artifacts;
  std::map<std::string, double> scores;

  ImageKey key() const { return {seed, prompt_id}; }
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

inline constexpr int kManifestFormatVersion = 1;

struct CorpusManifest {
  int format_version = kManifestFormatVersion;
  std::uint32_t num_seeds = 0;
  std::string model_name;
  std::string prompt_set_id;
  std::vector<PromptRecord> prompts;
  std::vector<ImageRecord> images;
  // Free-form model metadata (resolution, feature layers, embedding network).
  nlohmann::json metadata = nlohmann::json::object();
  // Directory that relative artifact paths resolve against. Not serialized.
  std::filesystem::path root;

  const PromptRecord* find_prompt(std::string_view prompt_id) const;
  // Distinct seeds that have at least one image, ascending.
  std::vector<SeedId> seeds() const;
  std::filesystem::path resolve(const std::string& path) const;
};

// Checks every manifest invariant; throws ValidationError on the first
// violation. Artifact files are not touched (see validate_corpus).
void check_manifest(const CorpusManifest& manifest);

CorpusManifest parse_manifest(const nlohmann::json& doc, std::filesystem::path root = {});
nlohmann::json manifest_to_json(const CorpusManifest& manifest);

CorpusManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

struct ValidationIssue {
  enum class Problem { kMissing, kUnreadable };

  ImageKey image;
  std::string artifact;
  Problem problem = Problem::kMissing;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool empty() const noexcept { return issues.empty(); }
  nlohmann::json to_json() const;
};

// A required entry naming a bare kind ("feature_maps") is satisfied by any key
// of that kind; a qualified entry ("feature_maps.relu2_2") must match exactly.
// Files are opened and decoded to catch unreadable artifacts.
ValidationReport validate_corpus(const CorpusManifest& manifest, const std::set<std::string>& required_artifacts);

// One OCR detection in normalized [0,1] image coordinates, x0<x1 and y0<y1.
struct OcrBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::string text;
  double confidence = 0;

  friend bool operator==(const OcrBox&, const OcrBox&) = default;
};

// ocr_boxes artifact: JSON list of {x0,y0,x1,y1,text,confidence}.
std::vector<OcrBox> parse_ocr_boxes(const nlohmann::json& doc);
nlohmann::json ocr_boxes_to_json(const std::vector<OcrBox>& boxes);
std::vector<OcrBox> load_ocr_boxes(const std::filesystem::path& path);

// Shared JSON helpers.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace seedlab
