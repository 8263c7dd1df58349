#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "seedlab/corpus.hpp"
#include "seedlab/tensor.hpp"

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "seedlab-test-XXXXXX").string();
    if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Builds a corpus on disk: prompts, images and their artifact files under
// root/artifacts, manifest at root/manifest.json.
class CorpusBuilder {
 public:
  CorpusBuilder(fs::path root, std::uint32_t num_seeds, std::string prompt_set_id = "fixture") : root_(std::move(root)) {
    fs::create_directories(root_ / "artifacts");
    m_.num_seeds = num_seeds;
    m_.model_name = "toy";
    m_.prompt_set_id = std::move(prompt_set_id);
    m_.root = root_;
  }

  seedlab::PromptRecord& add_prompt(const std::string& id, seedlab::PromptKind kind = seedlab::PromptKind::kDenseCaption) {
    seedlab::PromptRecord p;
    p.prompt_id = id;
    p.text = "prompt " + id;
    p.kind = kind;
    if (kind == seedlab::PromptKind::kSynthetic) p.object_category = "object";
    m_.prompts.push_back(p);
    return m_.prompts.back();
  }

  std::size_t add_image(std::uint32_t seed, const std::string& prompt_id) {
    seedlab::ImageRecord r;
    r.seed = {seed};
    r.prompt_id = prompt_id;
    r.image_path = "images/" + std::to_string(seed) + "_" + prompt_id + ".png";
    m_.images.push_back(r);
    return m_.images.size() - 1;
  }

  seedlab::ImageRecord& image(std::size_t i) { return m_.images[i]; }

  void put_blob(std::size_t i, const std::string& key, const seedlab::TensorBlob& blob) {
    const std::string rel = file_name(i, key) + ".sdlb";
    seedlab::write_tensor(blob, root_ / rel);
    m_.images[i].artifacts[key] = rel;
  }

  void put_json(std::size_t i, const std::string& key, const nlohmann::json& doc) {
    const std::string rel = file_name(i, key) + ".json";
    seedlab::write_json_file(doc, root_ / rel);
    m_.images[i].artifacts[key] = rel;
  }

  seedlab::CorpusManifest& manifest() { return m_; }

  fs::path save() {
    const fs::path p = root_ / "manifest.json";
    seedlab::save_manifest(m_, p);
    return p;
  }

 private:
  std::string file_name(std::size_t i, const std::string& key) const {
    return "artifacts/" + std::to_string(m_.images[i].seed.value) + "_" + m_.images[i].prompt_id + "_" + key;
  }

  fs::path root_;
  seedlab::CorpusManifest m_;
};

inline seedlab::TensorBlob plane(std::size_t h, std::size_t w, std::vector<float> values) {
  return seedlab::TensorBlob({h, w}, std::move(values));
}

}  // namespace fixtures
