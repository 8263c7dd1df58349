#include "seedlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "seedlab/error.hpp"
#include "seedlab/tensor.hpp"

namespace seedlab {

using nlohmann::json;

namespace {

constexpr std::pair<PromptKind, std::string_view> kPromptKinds[] = {
    {PromptKind::kDenseCaption, "dense_caption"},
    {PromptKind::kParti, "parti"},
    {PromptKind::kSynthetic, "synthetic"},
    {PromptKind::kInpaintRemoval, "inpaint_removal"},
    {PromptKind::kInpaintCompletion, "inpaint_completion"},
};

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::kParse, "manifest: " + what); }

const json& require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    parse_fail(std::string("missing field '") + field + "'");
  }
  return *it;
}

std::string require_string(const json& obj, const char* field) {
  const json& v = require(obj, field);
  if (!v.is_string()) {
    parse_fail(std::string("field '") + field + "' must be a string");
  }
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    return std::nullopt;
  }
  if (!it->is_string()) {
    parse_fail(std::string("field '") + field + "' must be a string");
  }
  return it->get<std::string>();
}

std::uint32_t require_u32(const json& obj, const char* field) {
  const json& v = require(obj, field);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::uint64_t>() > UINT32_MAX) {
    parse_fail(std::string("field '") + field + "' must be a non-negative 32-bit integer");
  }
  return v.get<std::uint32_t>();
}

std::string image_label(const ImageKey& key) {
  return "(seed=" + std::to_string(key.seed.value) + ", prompt_id=" + key.prompt_id + ")";
}

// Returns an empty string when the artifact decodes with a plausible rank.
std::string probe_artifact(std::string_view kind, const std::filesystem::path& path) {
  try {
    if (kind == artifact::kOcrBoxes) {
      load_ocr_boxes(path);
      return {};
    }
    std::size_t expected_rank = 0;
    if (kind == artifact::kFeatureMaps) expected_rank = 3;
    if (kind == artifact::kPooledEmbedding) expected_rank = 1;
    if (kind == artifact::kMask || kind == artifact::kDepth) expected_rank = 2;
    if (expected_rank == 0) {
      std::ifstream in(path, std::ios::binary);
      return in ? std::string{} : "cannot open file";
    }
    const TensorBlob blob = read_tensor(path);
    if (blob.rank() != expected_rank) {
      return "expected rank " + std::to_string(expected_rank) + ", found " + std::to_string(blob.rank());
    }
    return {};
  } catch (const Error& e) {
    return std::string(e.name()) + ": " + e.what();
  }
}

}  // namespace

std::string_view to_string(PromptKind kind) noexcept {
  for (const auto& [k, name] : kPromptKinds) {
    if (k == kind) return name;
  }
  return "dense_caption";
}

PromptKind parse_prompt_kind(std::string_view text) {
  for (const auto& [k, name] : kPromptKinds) {
    if (name == text) return k;
  }
  throw Error(ErrorCode::kParse, "unknown prompt_kind '" + std::string(text) + "'");
}

std::string_view artifact::kind_of(std::string_view key) noexcept { return key.substr(0, key.find('.')); }

const PromptRecord* CorpusManifest::find_prompt(std::string_view prompt_id) const {
  auto it = std::find_if(prompts.begin(), prompts.end(), [&](const PromptRecord& p) { return p.prompt_id == prompt_id; });
  return it == prompts.end() ? nullptr : &*it;
}

std::vector<SeedId> CorpusManifest::seeds() const {
  std::set<SeedId> unique;
  for (const auto& img : images) unique.insert(img.seed);
  return {unique.begin(), unique.end()};
}

std::filesystem::path CorpusManifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : root / p;
}

void check_manifest(const CorpusManifest& m) {
  if (m.format_version != kManifestFormatVersion) {
    throw Error(ErrorCode::kVersion, "unsupported manifest format_version " + std::to_string(m.format_version));
  }
  if (m.num_seeds == 0) {
    throw Error(ErrorCode::kValidation, "num_seeds must be positive");
  }
  std::set<std::string> prompt_ids;
  for (const auto& p : m.prompts) {
    if (!prompt_ids.insert(p.prompt_id).second) {
      throw Error(ErrorCode::kValidation, "duplicate prompt_id '" + p.prompt_id + "'");
    }
    if (p.kind == PromptKind::kSynthetic && !p.object_category) {
      throw Error(ErrorCode::kValidation, "synthetic prompt '" + p.prompt_id + "' lacks object_category");
    }
  }
  std::set<ImageKey> keys;
  for (const auto& img : m.images) {
    const ImageKey key = img.key();
    if (img.seed.value >= m.num_seeds) {
      throw Error(ErrorCode::kValidation, "seed out of range for image " + image_label(key));
    }
    if (!prompt_ids.contains(img.prompt_id)) {
      throw Error(ErrorCode::kValidation, "image " + image_label(key) + " references unknown prompt_id");
    }
    if (!keys.insert(key).second) {
      throw Error(ErrorCode::kValidation, "duplicate image " + image_label(key));
    }
    for (const auto& [name, value] : img.scores) {
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kValidation, "non-finite score '" + name + "' for image " + image_label(key));
      }
    }
  }
}

CorpusManifest parse_manifest(const json& doc, std::filesystem::path root) {
  if (!doc.is_object()) {
    parse_fail("top level must be an object");
  }
  CorpusManifest m;
  m.root = std::move(root);
  const json& version = require(doc, "format_version");
  if (!version.is_number_integer()) {
    parse_fail("format_version must be an integer");
  }
  m.format_version = version.get<int>();
  if (m.format_version != kManifestFormatVersion) {
    throw Error(ErrorCode::kVersion, "unsupported manifest format_version " + std::to_string(m.format_version));
  }
  m.num_seeds = require_u32(doc, "num_seeds");
  m.model_name = require_string(doc, "model_name");
  m.prompt_set_id = require_string(doc, "prompt_set_id");
  if (auto it = doc.find("metadata"); it != doc.end()) {
    if (!it->is_object()) parse_fail("metadata must be an object");
    m.metadata = *it;
  }

  const json& prompts = require(doc, "prompts");
  if (!prompts.is_array()) parse_fail("prompts must be an array");
  for (const auto& p : prompts) {
    if (!p.is_object()) parse_fail("prompt entries must be objects");
    PromptRecord rec;
    rec.prompt_id = require_string(p, "prompt_id");
    rec.text = require_string(p, "text");
    rec.kind = parse_prompt_kind(require_string(p, "prompt_kind"));
    rec.object_category = optional_string(p, "object_category");
    rec.modifier = optional_string(p, "modifier");
    m.prompts.push_back(std::move(rec));
  }

  const json& images = require(doc, "images");
  if (!images.is_array()) parse_fail("images must be an array");
  for (const auto& i : images) {
    if (!i.is_object()) parse_fail("image entries must be objects");
    ImageRecord rec;
    rec.seed = SeedId{require_u32(i, "seed")};
    rec.prompt_id = require_string(i, "prompt_id");
    rec.image_path = require_string(i, "image_path");
    if (auto it = i.find("artifacts"); it != i.end()) {
      if (!it->is_object()) parse_fail("artifacts must be an object");
      for (const auto& [k, v] : it->items()) {
        if (!v.is_string()) parse_fail("artifact path for '" + k + "' must be a string");
        rec.artifacts.emplace(k, v.get<std::string>());
      }
    }
    if (auto it = i.find("scores"); it != i.end()) {
      if (!it->is_object()) parse_fail("scores must be an object");
      for (const auto& [k, v] : it->items()) {
        if (!v.is_number()) parse_fail("score '" + k + "' must be a number");
        rec.scores.emplace(k, v.get<double>());
      }
    }
    m.images.push_back(std::move(rec));
  }

  check_manifest(m);
  return m;
}

json manifest_to_json(const CorpusManifest& m) {
  json doc;
  doc["format_version"] = m.format_version;
  doc["num_seeds"] = m.num_seeds;
  doc["model_name"] = m.model_name;
  doc["prompt_set_id"] = m.prompt_set_id;
  doc["metadata"] = m.metadata;
  doc["prompts"] = json::array();
  for (const auto& p : m.prompts) {
    json e{{"prompt_id", p.prompt_id}, {"text", p.text}, {"prompt_kind", to_string(p.kind)}};
    if (p.object_category) e["object_category"] = *p.object_category;
    if (p.modifier) e["modifier"] = *p.modifier;
    doc["prompts"].push_back(std::move(e));
  }
  doc["images"] = json::array();
  for (const auto& img : m.images) {
    doc["images"].push_back(json{{"seed", img.seed.value},
                                 {"prompt_id", img.prompt_id},
                                 {"image_path", img.image_path},
                                 {"artifacts", img.artifacts},
                                 {"scores", img.scores}});
  }
  return doc;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_json_file(path), path.parent_path());
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  check_manifest(manifest);
  write_json_file(manifest_to_json(manifest), path);
}

json ValidationReport::to_json() const {
  json entries = json::array();
  for (const auto& issue : issues) {
    entries.push_back(json{{"seed", issue.image.seed.value},
                           {"prompt_id", issue.image.prompt_id},
                           {"artifact", issue.artifact},
                           {"problem", issue.problem == ValidationIssue::Problem::kMissing ? "missing" : "unreadable"},
                           {"detail", issue.detail}});
  }
  return json{{"complete", issues.empty()}, {"issue_count", issues.size()}, {"issues", std::move(entries)}};
}

ValidationReport validate_corpus(const CorpusManifest& manifest, const std::set<std::string>& required) {
  ValidationReport report;
  for (const auto& img : manifest.images) {
    for (const auto& req : required) {
      const bool bare = req.find('.') == std::string::npos;
      std::vector<std::pair<std::string, std::string>> matches;
      for (const auto& [key, path] : img.artifacts) {
        if (key == req || (bare && artifact::kind_of(key) == req)) {
          matches.emplace_back(key, path);
        }
      }
      if (matches.empty()) {
        report.issues.push_back({img.key(), req, ValidationIssue::Problem::kMissing, "artifact not listed"});
        continue;
      }
      for (const auto& [key, path] : matches) {
        const auto resolved = manifest.resolve(path);
        std::error_code ec;
        if (!std::filesystem::is_regular_file(resolved, ec)) {
          report.issues.push_back({img.key(), key, ValidationIssue::Problem::kMissing, "file not found: " + path});
          continue;
        }
        if (auto problem = probe_artifact(artifact::kind_of(key), resolved); !problem.empty()) {
          report.issues.push_back({img.key(), key, ValidationIssue::Problem::kUnreadable, problem});
        }
      }
    }
  }
  return report;
}

std::vector<OcrBox> parse_ocr_boxes(const json& doc) {
  if (!doc.is_array()) {
    throw Error(ErrorCode::kParse, "ocr_boxes must be a JSON list");
  }
  std::vector<OcrBox> boxes;
  for (const auto& e : doc) {
    if (!e.is_object()) throw Error(ErrorCode::kParse, "ocr box entries must be objects");
    OcrBox box;
    try {
      box.x0 = e.at("x0").get<double>();
      box.y0 = e.at("y0").get<double>();
      box.x1 = e.at("x1").get<double>();
      box.y1 = e.at("y1").get<double>();
      box.text = e.value("text", std::string{});
      box.confidence = e.at("confidence").get<double>();
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kParse, std::string("malformed ocr box: ") + ex.what());
    }
    const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(in_unit(box.x0) && in_unit(box.x1) && in_unit(box.y0) && in_unit(box.y1) && box.x0 < box.x1 &&
          box.y0 < box.y1)) {
      throw Error(ErrorCode::kValidation, "ocr box coordinates must satisfy 0<=x0<x1<=1 and 0<=y0<y1<=1");
    }
    if (!in_unit(box.confidence)) {
      throw Error(ErrorCode::kValidation, "ocr box confidence must lie in [0,1]");
    }
    boxes.push_back(std::move(box));
  }
  return boxes;
}

json ocr_boxes_to_json(const std::vector<OcrBox>& boxes) {
  json doc = json::array();
  for (const auto& b : boxes) {
    doc.push_back(json{{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"text", b.text},
                       {"confidence", b.confidence}});
  }
  return doc;
}

std::vector<OcrBox> load_ocr_boxes(const std::filesystem::path& path) { return parse_ocr_boxes(read_json_file(path)); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for " + path.string());
  }
}

}  // namespace seedlab
