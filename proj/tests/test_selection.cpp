#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "seedlab/error.hpp"
#include "seedlab/random.hpp"
#include "seedlab/selection.hpp"
#include "support/oracle.hpp"

using namespace seedlab;
using namespace seedlab::selection;

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

quality::SeedRanking ranking(std::vector<std::pair<std::uint32_t, double>> s) {
  std::map<SeedId, double> m;
  for (auto [seed, score] : s) m[SeedId{seed}] = score;
  return quality::make_ranking("m", quality::Direction::kHigherBetter, "set", m);
}

std::vector<std::uint32_t> ids(const SeedPool& p) {
  std::vector<std::uint32_t> out;
  for (auto s : p.seeds) out.push_back(s.value);
  return out;
}

std::vector<SeedFeature> line(std::vector<double> xs) {
  std::vector<SeedFeature> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({SeedId{std::uint32_t(i)}, Eigen::VectorXd::Constant(1, xs[i])});
  return out;
}

double min_pairwise(const std::vector<SeedFeature>& f, const std::vector<std::size_t>& set) {
  double best = INFINITY;
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j) best = std::min(best, (f[set[i]].f - f[set[j]].f).norm());
  return best;
}

}  // namespace

TEST_CASE("golden seeds") {
  const auto fid = ranking({{3, 10}, {7, 9}, {9, 1}, {1, 0}});
  const auto pref = ranking({{7, 10}, {9, 9}, {3, 1}, {1, 0}});
  CHECK(ids(golden_seeds(fid, pref, 2)) == std::vector<std::uint32_t>{7});
  CHECK(ids(golden_seeds(fid, pref, 3)) == std::vector<std::uint32_t>{3, 7, 9});
  CHECK(golden_seeds(fid, pref, 1).seeds.empty());
  CHECK(golden_seeds(fid, pref, 2).kind == PoolKind::kGolden);

  std::vector<std::pair<std::uint32_t, double>> s;
  for (std::uint32_t i = 0; i < 10; ++i) s.push_back({i, double((i * 7) % 10)});
  const auto r = ranking(s);
  std::vector<std::uint32_t> top5;
  for (std::size_t i = 0; i < 5; ++i) top5.push_back(r.entries[i].seed.value);
  std::sort(top5.begin(), top5.end());
  CHECK(ids(golden_seeds(r, r, 5)) == top5);

  CHECK(code_of([&] { golden_seeds(fid, pref, 0); }) == ErrorCode::kCount);
  CHECK(code_of([&] { golden_seeds(fid, pref, 5); }) == ErrorCode::kCount);
  CHECK(code_of([&] { golden_seeds(fid, r, 2); }) == ErrorCode::kSeedSetMismatch);
}

TEST_CASE("golden seeds are monotone in m") {
  CounterRng rng(11, StreamId::kFixture);
  std::vector<std::pair<std::uint32_t, double>> a, b;
  for (std::uint32_t i = 0; i < 64; ++i) {
    a.push_back({i, rng.next_normal()});
    b.push_back({i, rng.next_normal()});
  }
  const auto ra = ranking(a), rb = ranking(b);
  std::vector<std::uint32_t> prev;
  for (std::size_t m = 1; m <= 64; ++m) {
    const auto cur = ids(golden_seeds(ra, rb, m));
    REQUIRE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    REQUIRE(std::is_sorted(cur.begin(), cur.end()));
    prev = cur;
  }
  CHECK(prev.size() == 64);
}

TEST_CASE("farthest point examples") {
  const auto f = line({0.0, 1.0, 10.0});
  FarthestPointOptions opt;
  opt.first_seed = SeedId{0};
  CHECK(ids(farthest_point_seeds(f, 3, 0, opt)) == std::vector<std::uint32_t>{0, 2, 1});
  CHECK(ids(farthest_point_seeds(f, 1, 0, opt)) == std::vector<std::uint32_t>{0});

  const auto same = line({4, 4, 4, 4, 4});
  opt.first_seed = SeedId{3};
  CHECK(ids(farthest_point_seeds(same, 5, 0, opt)) == std::vector<std::uint32_t>{3, 0, 1, 2, 4});

  CHECK(code_of([&] { farthest_point_seeds(f, 4, 0); }) == ErrorCode::kCount);
  CHECK(code_of([&] { farthest_point_seeds(f, 0, 0); }) == ErrorCode::kCount);
  opt.first_seed = SeedId{8};
  CHECK(code_of([&] { farthest_point_seeds(f, 2, 0, opt); }) == ErrorCode::kValidation);
  auto bad = f;
  bad[1].f(0) = NAN;
  CHECK(code_of([&] { farthest_point_seeds(bad, 2, 0); }) == ErrorCode::kValidation);
}

TEST_CASE("farthest point first seed is reproducible and uniform") {
  const auto f = line({0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(farthest_point_seeds(f, 3, 42).seeds == farthest_point_seeds(f, 3, 42).seeds);
  std::vector<int> hits(8, 0);
  for (std::uint64_t s = 0; s < 4000; ++s) ++hits[farthest_point_seeds(f, 1, s).seeds[0].value];
  for (int h : hits) CHECK(std::abs(h - 500) < 100);
}

TEST_CASE("farthest point equals brute-force greedy") {
  CounterRng rng(12, StreamId::kFixture);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.next_index(11);
    const std::size_t c = 1 + rng.next_index(std::min<std::size_t>(4, n));
    const bool integer = trial % 2 == 0;  // small integer grids force ties
    const std::size_t dim = 1 + rng.next_index(3);
    std::vector<SeedFeature> f;
    oracle::Mat<double> raw;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
      for (auto& x : v) x = integer ? double(rng.next_index(3)) : rng.next_normal();
      f.push_back({SeedId{std::uint32_t(i * 3 + 1)}, v});
      raw.push_back({v.data(), v.data() + v.size()});
    }
    const auto pool = farthest_point_seeds(f, c, std::uint64_t(trial));
    const std::size_t first = (pool.seeds[0].value - 1) / 3;
    const auto want = oracle::greedy_farthest(raw, first, c);
    std::vector<std::size_t> got;
    for (auto s : pool.seeds) got.push_back((s.value - 1) / 3);
    REQUIRE(got == want);
    REQUIRE(std::set<std::size_t>(got.begin(), got.end()).size() == c);

    // Swapping the last pick for any unchosen seed cannot raise the min pairwise distance.
    if (c >= 2) {
      const double mine = min_pairwise(f, got);
      for (std::size_t alt = 0; alt < n; ++alt) {
        if (std::find(got.begin(), got.end(), alt) != got.end()) continue;
        auto other = got;
        other.back() = alt;
        REQUIRE(mine >= min_pairwise(f, other));
      }
    }
  }
}

TEST_CASE("farthest point picks from distinct clusters") {
  CounterRng rng(13, StreamId::kFixture);
  std::vector<SeedFeature> f;
  for (std::uint32_t s = 0; s < 40; ++s) {
    Eigen::VectorXd v(2);
    const double cx = 100.0 * (s % 4), cy = 50.0 * ((s % 4) / 2);
    v << cx + rng.next_normal(), cy + rng.next_normal();
    f.push_back({SeedId{s}, v});
  }
  for (std::uint64_t r = 0; r < 10; ++r) {
    std::set<std::uint32_t> clusters;
    for (auto s : farthest_point_seeds(f, 4, r).seeds) clusters.insert(s.value % 4);
    CHECK(clusters.size() == 4);
  }
}

TEST_CASE("diversity similarity") {
  const Eigen::Vector2d x(1, 0), y(0, 1);
  CHECK(diversity_similarity({{"a", {x, x, x, x}}}, 4).similarity == 1.0);
  CHECK(diversity_similarity({{"a", {x, y}}}, 4).similarity == 0.0);
  const auto two = diversity_similarity({{"a", {x, x}}, {"b", {x, y}}}, 4);
  CHECK(std::abs(two.similarity - 0.5) <= 1e-12);
  CHECK(two.prompts_used == 2);

  SUBCASE("skip rule") {
    const auto r = diversity_similarity({{"a", {x, x}}, {"b", {x, y}}, {"c", {y}}, {"d", {y, Eigen::Vector2d::Zero()}}}, 4);
    CHECK(r.similarity == doctest::Approx(0.5));
    CHECK(r.prompts_used == 2);
    CHECK(r.prompts_skipped == 2);
    CHECK(code_of([&] { diversity_similarity({{"c", {y}}, {"e", {}}}, 4); }) == ErrorCode::kNoUsablePrompts);
  }
  SUBCASE("only the first C images count") {
    CHECK(diversity_similarity({{"a", {x, x, y, y}}}, 2).similarity == 1.0);
    CHECK(diversity_similarity({{"a", {x, x, y}}}, 3).similarity == doctest::Approx(1.0 / 3));
  }
  SUBCASE("rescaling invariance") {
    CounterRng rng(14, StreamId::kFixture);
    std::map<std::string, std::vector<Eigen::VectorXd>> a, b;
    for (int p = 0; p < 5; ++p) {
      for (int i = 0; i < 4; ++i) {
        Eigen::VectorXd v(3);
        for (auto& e : v) e = rng.next_normal();
        a["p" + std::to_string(p)].push_back(v);
        b["p" + std::to_string(p)].push_back(v * (0.01 + 50 * rng.next_uniform()));
      }
    }
    CHECK(diversity_similarity(a, 4).similarity == doctest::Approx(diversity_similarity(b, 4).similarity).epsilon(1e-12));
  }
}

TEST_CASE("pool json round-trip") {
  SeedPool p{{SeedId{5}, SeedId{2}, SeedId{9}}, PoolKind::kDiverseComposition, {{"count", 3}}};
  const auto back = pool_from_json(nlohmann::json::parse(pool_to_json(p).dump()));
  CHECK(back.seeds == p.seeds);
  CHECK(back.kind == p.kind);
  CHECK(back.provenance == p.provenance);
  CHECK(parse_pool_kind(to_string(PoolKind::kDiverseStyle)) == PoolKind::kDiverseStyle);
  CHECK(code_of([] { pool_from_json(nlohmann::json::parse(R"({"seeds":[1,1],"pool_kind":"golden"})")); }) ==
        ErrorCode::kValidation);
}
