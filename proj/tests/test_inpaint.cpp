#include <cmath>

#include "doctest.h"
#include "seedlab/error.hpp"
#include "seedlab/inpaint.hpp"
#include "seedlab/random.hpp"
#include "support/fixtures.hpp"

using namespace seedlab;
using namespace seedlab::inpaint;

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

OcrBox box(double x0, double y0, double x1, double y1, double conf = 0.9) { return {x0, y0, x1, y1, "txt", conf}; }

std::vector<float> rows_mask(std::size_t h, std::size_t w, std::size_t r0, std::size_t r1) {
  std::vector<float> m(h * w, 0.0f);
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = 0; c < w; ++c) m[r * w + c] = 1;
  return m;
}

// Brute-force pixel count.
double count_ratio(const std::vector<OcrBox>& boxes, const std::vector<float>& mask, std::size_t h, std::size_t w,
                   double thr) {
  std::size_t in = 0, hit = 0;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (mask[r * w + c] == 0) continue;
      ++in;
      const double x = (double(c) + 0.5) / double(w), y = (double(r) + 0.5) / double(h);
      for (const auto& b : boxes)
        if (b.confidence >= thr && x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) {
          ++hit;
          break;
        }
    }
  return double(hit) / double(in);
}

}  // namespace

TEST_CASE("text artifact ratio examples") {
  const auto mask = rows_mask(10, 10, 0, 5);
  const composition::PlaneView view{10, 10, mask};
  CHECK(text_artifact_ratio({}, view, 0.5) == 0.0);
  CHECK(text_artifact_ratio({box(0, 0, 1, 0.5)}, view, 0.5) == 1.0);
  CHECK(text_artifact_ratio({box(0, 0.3, 1, 0.7)}, view, 0.5) == 0.4);
  CHECK(text_artifact_ratio({box(0, 0.3, 1, 0.7, 0.2)}, view, 0.5) == 0.0);
  // Overlap is not double counted.
  CHECK(text_artifact_ratio({box(0, 0, 1, 0.5), box(0, 0, 1, 0.5)}, view, 0.5) == 1.0);
  // Split into two disjoint boxes with the same union.
  CHECK(text_artifact_ratio({box(0, 0.3, 0.5, 0.7), box(0.5, 0.3, 1, 0.7)}, view, 0.5) == 0.4);

  const std::vector<float> empty(100, 0.0f);
  CHECK(code_of([&] { text_artifact_ratio({}, {10, 10, empty}, 0.5); }) == ErrorCode::kEmptyMask);
}

TEST_CASE("text artifact ratio properties") {
  CounterRng rng(31, StreamId::kFixture);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 3 + rng.next_index(14), w = 3 + rng.next_index(14);
    std::vector<float> mask(h * w);
    for (auto& v : mask) v = rng.next_uniform() < 0.5 ? 1.0f : 0.0f;
    mask[rng.next_index(h * w)] = 1;
    const composition::PlaneView view{h, w, mask};
    std::vector<OcrBox> boxes;
    double prev = 0;
    for (int k = 0; k < 6; ++k) {
      double x0 = rng.next_uniform(), x1 = rng.next_uniform(), y0 = rng.next_uniform(), y1 = rng.next_uniform();
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      boxes.push_back(box(x0, y0, x1, y1, rng.next_uniform()));
      const double r = text_artifact_ratio(boxes, view, 0.5);
      REQUIRE(r >= prev);
      REQUIRE(r == count_ratio(boxes, mask, h, w, 0.5));
      prev = r;
    }
    double prev_thr = 2;
    for (double thr : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const double r = text_artifact_ratio(boxes, view, thr);
      REQUIRE(r <= prev_thr);
      prev_thr = r;
    }
  }
}

namespace {

void add_inpaint(fixtures::CorpusBuilder& b, std::uint32_t seed, const std::string& prompt, std::vector<OcrBox> boxes,
                 std::vector<float> mask) {
  const auto i = b.add_image(seed, prompt);
  b.put_blob(i, "mask", fixtures::plane(10, 10, std::move(mask)));
  b.put_json(i, "ocr_boxes", ocr_boxes_to_json(boxes));
}

}  // namespace

TEST_CASE("rank seeds by artifacts") {
  fixtures::TempDir dir;
  fixtures::CorpusBuilder b(dir.path(), 3);
  b.add_prompt("rm", PromptKind::kInpaintRemoval);
  b.add_prompt("cp", PromptKind::kInpaintCompletion);
  const auto mask = rows_mask(10, 10, 0, 5);
  // Seed 2 (A): {0, 0.4}; seed 0 (B): {0.1}; seed 1 excluded by an empty mask.
  add_inpaint(b, 2, "rm", {}, mask);
  add_inpaint(b, 2, "cp", {box(0, 0.3, 1, 0.7)}, mask);
  add_inpaint(b, 0, "rm", {box(0, 0, 0.5, 0.1)}, mask);
  add_inpaint(b, 1, "rm", {}, std::vector<float>(100, 0.0f));
  const auto m = load_manifest(b.save());

  const auto r = rank_seeds_by_artifacts(m);
  REQUIRE(r.scores.size() == 2);
  CHECK(r.scores[0].seed == SeedId{0});
  CHECK(r.scores[0].mean_ratio == doctest::Approx(0.1));
  CHECK(r.scores[1].seed == SeedId{2});
  CHECK(r.scores[1].mean_ratio == doctest::Approx(0.2));
  CHECK(r.scores[1].n_images == 2);
  CHECK(r.excluded == 1);
  CHECK(r.images.size() == 4);
  CHECK(r.to_json()["min_confidence"] == 0.5);

  const auto only_rm = rank_seeds_by_artifacts(m, 0.5, {PromptKind::kInpaintRemoval});
  CHECK(only_rm.scores[0].seed == SeedId{2});
  CHECK(only_rm.scores[0].mean_ratio == 0.0);

  auto lacking = m;
  lacking.images[0].artifacts.erase("ocr_boxes");
  CHECK(code_of([&] { rank_seeds_by_artifacts(lacking); }) == ErrorCode::kValidation);
}

TEST_CASE("all-zero ratios tie in seed order") {
  fixtures::TempDir dir;
  fixtures::CorpusBuilder b(dir.path(), 4);
  b.add_prompt("rm", PromptKind::kInpaintRemoval);
  for (std::uint32_t s : {3u, 1u, 2u, 0u}) add_inpaint(b, s, "rm", {}, rows_mask(10, 10, 2, 4));
  const auto r = rank_seeds_by_artifacts(load_manifest(b.save()));
  REQUIRE(r.scores.size() == 4);
  for (std::uint32_t i = 0; i < 4; ++i) CHECK(r.scores[i].seed == SeedId{i});
}
