#include "seedlab/job.hpp"

#include <algorithm>
#include <cmath>

#include "seedlab/error.hpp"

namespace seedlab::job {

using nlohmann::json;

namespace {

bool known_kind(std::string_view key) {
  const auto kind = artifact::kind_of(key);
  for (auto k : {artifact::kFeatureMaps, artifact::kPooledEmbedding, artifact::kMask, artifact::kDepth,
                 artifact::kOcrBoxes, artifact::kPreferenceScore}) {
    if (kind == k) return true;
  }
  return false;
}

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kValidation, "job: " + msg); }

}  // namespace

std::vector<std::uint32_t> GenerationJob::seed_list() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint32_t> all(num_seeds);
  for (std::uint32_t s = 0; s < num_seeds; ++s) all[s] = s;
  return all;
}

void check_job(const GenerationJob& job) {
  if (job.format_version != kJobFormatVersion) {
    throw Error(ErrorCode::kVersion, "job format_version " + std::to_string(job.format_version) + " is not supported");
  }
  if (job.model_name.empty()) invalid("model_name is empty");
  if (job.prompts.empty()) invalid("no prompts");
  std::set<std::string> ids;
  for (const auto& p : job.prompts) {
    if (p.prompt_id.empty()) invalid("empty prompt_id");
    if (!ids.insert(p.prompt_id).second) invalid("prompt_id '" + p.prompt_id + "' appears twice");
    if (p.kind == PromptKind::kSynthetic && !p.object_category) {
      invalid("synthetic prompt '" + p.prompt_id + "' has no object_category");
    }
  }
  if (job.num_seeds == 0) invalid("num_seeds is 0");
  for (std::size_t i = 0; i < job.seeds.size(); ++i) {
    if (job.seeds[i] >= job.num_seeds) {
      invalid("seed " + std::to_string(job.seeds[i]) + " outside [0, " + std::to_string(job.num_seeds) + ")");
    }
    if (i > 0 && job.seeds[i] <= job.seeds[i - 1]) invalid("seeds must be strictly ascending");
  }
  for (const auto& a : job.artifacts) {
    if (!known_kind(a)) invalid("unknown artifact kind '" + a + "'");
  }
  for (const auto& s : job.scores) {
    if (s.empty()) invalid("empty score name");
  }
  if (job.scheduler.steps < 1) invalid("scheduler steps must be >= 1");
  if (!(job.scheduler.eta >= 0.0 && job.scheduler.eta <= 1.0)) invalid("scheduler eta must lie in [0, 1]");
}

json job_to_json(const GenerationJob& job) {
  // The prompt list shares the manifest's encoding.
  CorpusManifest shell;
  shell.prompts = job.prompts;
  json doc;
  doc["format_version"] = job.format_version;
  doc["model_name"] = job.model_name;
  doc["prompt_set_id"] = job.prompt_set_id;
  doc["prompts"] = manifest_to_json(shell)["prompts"];
  doc["num_seeds"] = job.num_seeds;
  doc["seeds"] = job.seeds;
  doc["scheduler"] = json{{"name", job.scheduler.name}, {"steps", job.scheduler.steps}, {"eta", job.scheduler.eta}};
  doc["artifacts"] = job.artifacts;
  doc["scores"] = job.scores;
  doc["output_root"] = job.output_root;
  doc["metadata"] = job.metadata;
  return doc;
}

GenerationJob parse_job(const json& doc) {
  GenerationJob job;
  try {
    job.format_version = doc.at("format_version").get<int>();
    job.model_name = doc.at("model_name").get<std::string>();
    job.prompt_set_id = doc.value("prompt_set_id", std::string{});
    // Borrow the manifest parser for the prompt records.
    json shell{{"format_version", kManifestFormatVersion},
               {"num_seeds", 1},
               {"model_name", job.model_name},
               {"prompt_set_id", job.prompt_set_id},
               {"prompts", doc.at("prompts")},
               {"images", json::array()}};
    if (job.format_version == kJobFormatVersion) job.prompts = parse_manifest(shell).prompts;
    job.num_seeds = doc.at("num_seeds").get<std::uint32_t>();
    job.seeds = doc.value("seeds", std::vector<std::uint32_t>{});
    if (doc.contains("scheduler")) {
      const auto& s = doc.at("scheduler");
      job.scheduler.name = s.value("name", job.scheduler.name);
      job.scheduler.steps = s.value("steps", job.scheduler.steps);
      job.scheduler.eta = s.value("eta", job.scheduler.eta);
    }
    job.artifacts = doc.value("artifacts", std::set<std::string>{});
    job.scores = doc.value("scores", std::set<std::string>{});
    job.output_root = doc.value("output_root", std::string{});
    job.metadata = doc.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed job file: ") + e.what());
  }
  check_job(job);
  return job;
}

GenerationJob load_job(const std::filesystem::path& path) { return parse_job(read_json_file(path)); }

void save_job(const GenerationJob& job, const std::filesystem::path& path) {
  check_job(job);
  write_json_file(job_to_json(job), path);
}

json ConformanceReport::to_json() const {
  return json{{"ok", ok()},
              {"expected_images", expected_images},
              {"found_images", found_images},
              {"no_object_images", no_object_images},
              {"problems", problems}};
}

ConformanceReport check_corpus_against_job(const GenerationJob& job, const CorpusManifest& manifest) {
  ConformanceReport r;
  auto problem = [&](std::string msg) { r.problems.push_back(std::move(msg)); };

  if (manifest.model_name != job.model_name) {
    problem("model_name '" + manifest.model_name + "' differs from the job's '" + job.model_name + "'");
  }
  if (manifest.num_seeds != job.num_seeds) {
    problem("num_seeds " + std::to_string(manifest.num_seeds) + " differs from the job's " +
            std::to_string(job.num_seeds));
  }
  if (manifest.prompts != job.prompts) problem("prompt list differs from the job's");

  const auto seeds = job.seed_list();
  std::set<ImageKey> expected;
  for (auto s : seeds)
    for (const auto& p : job.prompts) expected.insert({SeedId{s}, p.prompt_id});
  r.expected_images = expected.size();

  std::set<std::string> required;
  for (const auto& a : job.artifacts) {
    if (artifact::kind_of(a) != artifact::kMask) required.insert(a);
  }
  const bool wants_mask = std::any_of(job.artifacts.begin(), job.artifacts.end(),
                                      [](const std::string& a) { return artifact::kind_of(a) == artifact::kMask; });

  CorpusManifest masked = manifest;
  masked.images.clear();
  std::set<ImageKey> seen;
  for (const auto& img : manifest.images) {
    const std::string where = "(seed=" + std::to_string(img.seed.value) + ", prompt_id=" + img.prompt_id + ")";
    if (!expected.contains(img.key())) {
      problem("image " + where + " is not part of the job");
      continue;
    }
    seen.insert(img.key());
    for (const auto& name : job.scores) {
      auto it = img.scores.find(name);
      if (it == img.scores.end()) {
        problem("image " + where + " has no score '" + name + "'");
      } else if (!std::isfinite(it->second)) {
        problem("image " + where + " has a non-finite score '" + name + "'");
      }
    }
    if (wants_mask) {
      const bool has_mask = std::any_of(img.artifacts.begin(), img.artifacts.end(),
                                        [](const auto& kv) { return artifact::kind_of(kv.first) == artifact::kMask; });
      if (has_mask) {
        masked.images.push_back(img);
      } else {
        ++r.no_object_images;
      }
    }
  }
  r.found_images = seen.size();
  for (const auto& k : expected) {
    if (!seen.contains(k)) {
      problem("image (seed=" + std::to_string(k.seed.value) + ", prompt_id=" + k.prompt_id + ") is missing");
    }
  }

  auto report_issues = [&](const ValidationReport& v) {
    for (const auto& issue : v.issues) {
      problem("image (seed=" + std::to_string(issue.image.seed.value) + ", prompt_id=" + issue.image.prompt_id +
              ") artifact '" + issue.artifact + "': " + issue.detail);
    }
  };
  report_issues(validate_corpus(manifest, required));
  if (wants_mask) {
    std::set<std::string> mask_keys;
    for (const auto& a : job.artifacts)
      if (artifact::kind_of(a) == artifact::kMask) mask_keys.insert(a);
    report_issues(validate_corpus(masked, mask_keys));
  }
  return r;
}

}  // namespace seedlab::job
