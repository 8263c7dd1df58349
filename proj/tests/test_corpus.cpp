#include "doctest.h"
#include "seedlab/corpus.hpp"
#include "seedlab/error.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace seedlab;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kUsage;
}

json minimal() {
  return json::parse(R"({
    "format_version": 1, "num_seeds": 1, "model_name": "m", "prompt_set_id": "s",
    "prompts": [{"prompt_id": "p0", "text": "a cat", "prompt_kind": "parti"}],
    "images": [{"seed": 0, "prompt_id": "p0", "image_path": "x.png"}]
  })");
}

// Two seeds x two prompts with pooled embeddings and masks on disk.
fixtures::fs::path small_corpus(const fixtures::TempDir& dir, bool drop_one_mask = false) {
  fixtures::CorpusBuilder b(dir.path(), 2);
  b.add_prompt("p0");
  b.add_prompt("p1", PromptKind::kSynthetic);
  for (std::uint32_t s = 0; s < 2; ++s) {
    for (const char* p : {"p0", "p1"}) {
      const auto i = b.add_image(s, p);
      b.put_blob(i, "pooled_embedding", TensorBlob({3}, {1, 2, 3}));
      if (!(drop_one_mask && s == 1 && std::string(p) == "p1")) {
        b.put_blob(i, "mask", fixtures::plane(2, 2, {0, 1, 1, 0}));
      }
      b.put_blob(i, "feature_maps.relu1_2", TensorBlob({2, 1, 2}, {1, 0, 0, 1}));
    }
  }
  return b.save();
}

}  // namespace

TEST_CASE("minimal manifest parses") {
  const auto m = parse_manifest(minimal());
  CHECK(m.num_seeds == 1);
  CHECK(m.images.size() == 1);
  CHECK(m.prompts[0].kind == PromptKind::kParti);
  CHECK(m.seeds() == std::vector<SeedId>{{0}});
}

TEST_CASE("manifest invariants") {
  SUBCASE("duplicate (seed, prompt)") {
    auto doc = minimal();
    doc["images"].push_back(doc["images"][0]);
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kValidation);
  }
  SUBCASE("dangling prompt reference") {
    auto doc = minimal();
    doc["images"][0]["prompt_id"] = "nope";
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kValidation);
  }
  SUBCASE("seed outside [0, num_seeds)") {
    auto doc = minimal();
    doc["images"][0]["seed"] = 1;
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kValidation);
  }
  SUBCASE("synthetic prompt needs a category") {
    auto doc = minimal();
    doc["prompts"][0]["prompt_kind"] = "synthetic";
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kValidation);
    doc["prompts"][0]["object_category"] = "cup";
    CHECK_NOTHROW(parse_manifest(doc));
  }
  SUBCASE("duplicate prompt id") {
    auto doc = minimal();
    doc["prompts"].push_back(doc["prompts"][0]);
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kValidation);
  }
  SUBCASE("num_seeds zero") {
    auto doc = minimal();
    doc["num_seeds"] = 0;
    doc["images"] = json::array();
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kValidation);
  }
  SUBCASE("unsupported version") {
    auto doc = minimal();
    doc["format_version"] = 2;
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kVersion);
  }
  SUBCASE("structural problems are parse errors") {
    auto doc = minimal();
    doc.erase("model_name");
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kParse);
    doc = minimal();
    doc["images"][0]["seed"] = -1;
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kParse);
    doc = minimal();
    doc["prompts"][0]["prompt_kind"] = "poem";
    CHECK(code_of([&] { parse_manifest(doc); }) == ErrorCode::kParse);
  }
  SUBCASE("unknown fields are ignored") {
    auto doc = minimal();
    doc["extra"] = 1;
    doc["images"][0]["note"] = "x";
    CHECK_NOTHROW(parse_manifest(doc));
  }
}

TEST_CASE("non-finite scores cannot be saved") {
  auto m = parse_manifest(minimal());
  m.images[0].scores["hpsv2"] = std::nan("");
  fixtures::TempDir dir;
  CHECK(code_of([&] { save_manifest(m, dir / "m.json"); }) == ErrorCode::kValidation);
}

TEST_CASE("randomized manifests round-trip exactly") {
  CounterRng rng(77, StreamId::kFixture);
  fixtures::TempDir dir;
  for (int i = 0; i < 100; ++i) {
    const CorpusManifest m = generators::random_manifest(rng);
    const auto path = dir / ("m" + std::to_string(i) + ".json");
    save_manifest(m, path);
    const CorpusManifest back = load_manifest(path);
    REQUIRE(generators::same_manifest(m, back));
    save_manifest(back, dir / "again.json");
    REQUIRE(fixtures::read_bytes(path) == fixtures::read_bytes(dir / "again.json"));
  }
}

TEST_CASE("relative artifact paths resolve against the manifest directory") {
  fixtures::TempDir dir;
  const auto path = small_corpus(dir);
  const auto m = load_manifest(path);
  CHECK(m.root == path.parent_path());
  CHECK(m.resolve("artifacts/x") == dir.path() / "artifacts/x");
  CHECK(m.resolve("/abs/y") == fixtures::fs::path("/abs/y"));
}

TEST_CASE("validate_corpus") {
  fixtures::TempDir dir;

  SUBCASE("complete corpus") {
    const auto m = load_manifest(small_corpus(dir));
    CHECK(validate_corpus(m, {"pooled_embedding"}).empty());
    CHECK(validate_corpus(m, {"mask", "feature_maps"}).empty());
    CHECK(validate_corpus(m, {"feature_maps.relu1_2"}).empty());
    CHECK(validate_corpus(m, {}).empty());
  }
  SUBCASE("one image lacking a mask") {
    const auto m = load_manifest(small_corpus(dir, true));
    const auto report = validate_corpus(m, {"mask"});
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues[0].image == ImageKey{{1}, "p1"});
    CHECK(report.issues[0].problem == ValidationIssue::Problem::kMissing);
    CHECK(report.to_json()["issue_count"] == 1);
    CHECK(validate_corpus(m, {}).empty());
  }
  SUBCASE("qualified key must match exactly") {
    const auto m = load_manifest(small_corpus(dir));
    CHECK(validate_corpus(m, {"feature_maps.relu3_3"}).issues.size() == 4);
  }
  SUBCASE("deleted and corrupted files") {
    const auto path = small_corpus(dir);
    auto m = load_manifest(path);
    fixtures::fs::remove(m.resolve(m.images[0].artifacts.at("pooled_embedding")));
    fixtures::write_bytes(m.resolve(m.images[1].artifacts.at("pooled_embedding")), {'j', 'u', 'n', 'k'});
    const auto report = validate_corpus(m, {"pooled_embedding"});
    REQUIRE(report.issues.size() == 2);
    CHECK(report.issues[0].problem == ValidationIssue::Problem::kMissing);
    CHECK(report.issues[1].problem == ValidationIssue::Problem::kUnreadable);
  }
  SUBCASE("rank mismatch is unreadable") {
    fixtures::CorpusBuilder b(dir.path(), 1);
    b.add_prompt("p0");
    b.put_blob(b.add_image(0, "p0"), "mask", TensorBlob({4}, {0, 1, 1, 0}));
    const auto report = validate_corpus(load_manifest(b.save()), {"mask"});
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues[0].problem == ValidationIssue::Problem::kUnreadable);
  }
}

TEST_CASE("ocr boxes") {
  const auto boxes = parse_ocr_boxes(json::parse(R"([{"x0":0,"y0":0.1,"x1":0.5,"y1":0.9,"text":"SALE","confidence":0.8}])"));
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].text == "SALE");
  CHECK(parse_ocr_boxes(ocr_boxes_to_json(boxes)) == boxes);
  CHECK(code_of([] { parse_ocr_boxes(json::parse(R"({"x0":0})")); }) == ErrorCode::kParse);
  CHECK(code_of([] { parse_ocr_boxes(json::parse(R"([{"x0":0.5,"y0":0,"x1":0.4,"y1":1,"confidence":1}])")); }) ==
        ErrorCode::kValidation);
  CHECK(code_of([] { parse_ocr_boxes(json::parse(R"([{"x0":0,"y0":0,"x1":1,"y1":1,"confidence":1.5}])")); }) ==
        ErrorCode::kValidation);
}

TEST_CASE("json helpers report io and parse failures") {
  fixtures::TempDir dir;
  CHECK(code_of([&] { read_json_file(dir / "missing.json"); }) == ErrorCode::kIo);
  fixtures::write_bytes(dir / "bad.json", {'{', 'x'});
  CHECK(code_of([&] { read_json_file(dir / "bad.json"); }) == ErrorCode::kParse);
  CHECK(code_of([&] { load_manifest(dir / "missing.json"); }) == ErrorCode::kIo);
}
