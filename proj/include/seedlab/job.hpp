#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedlab/corpus.hpp"

// Job files handed to the model adapter, and the check that a corpus the
// adapter wrote actually answers its job.
namespace seedlab::job {

inline constexpr int kJobFormatVersion = 1;

struct Scheduler {
  std::string name = "ddim";
  int steps = 40;
  double eta = 0.0;

  friend bool operator==(const Scheduler&, const Scheduler&) = default;
};

struct GenerationJob {
  int format_version = kJobFormatVersion;
  std::string model_name;
  std::string prompt_set_id;
  std::vector<PromptRecord> prompts;
  std::uint32_t num_seeds = 0;
  // Seeds to generate, ascending; empty means every seed in [0, num_seeds).
  std::vector<std::uint32_t> seeds;
  Scheduler scheduler;
  // Artifact kinds or qualified keys to extract for every image.
  std::set<std::string> artifacts;
  // Score names every image must carry, e.g. "hpsv2".
  std::set<std::string> scores;
  std::string output_root;
  nlohmann::json metadata = nlohmann::json::object();

  std::vector<std::uint32_t> seed_list() const;
};

// ValidationError on: no prompts, duplicate prompt ids, a synthetic prompt
// without object_category, num_seeds of 0, seeds out of range or repeated,
// unknown artifact kinds, steps < 1, eta outside [0, 1].
void check_job(const GenerationJob& job);

nlohmann::json job_to_json(const GenerationJob& job);
GenerationJob parse_job(const nlohmann::json& doc);
GenerationJob load_job(const std::filesystem::path& path);
void save_job(const GenerationJob& job, const std::filesystem::path& path);

struct ConformanceReport {
  std::vector<std::string> problems;
  std::size_t expected_images = 0;
  std::size_t found_images = 0;
  std::size_t no_object_images = 0;  // mask requested but absent

  bool ok() const noexcept { return problems.empty(); }
  nlohmann::json to_json() const;
};

// Compares an adapter-written corpus with its job: model, seed range, prompt
// list, one image per (seed, prompt) and nothing else, requested artifacts
// present and readable, requested scores present and finite. A missing mask
// is allowed (the segmenter found no object) and only counted.
ConformanceReport check_corpus_against_job(const GenerationJob& job, const CorpusManifest& manifest);

}  // namespace seedlab::job
