#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "seedlab/corpus.hpp"
#include "seedlab/quality.hpp"

namespace seedlab::selection {

struct SeedFeature {
  SeedId seed;
  Eigen::VectorXd f;
};

enum class PoolKind { kGolden, kDiverseStyle, kDiverseComposition };

std::string_view to_string(PoolKind kind) noexcept;
PoolKind parse_pool_kind(std::string_view text);

struct SeedPool {
  std::vector<SeedId> seeds;
  PoolKind kind = PoolKind::kGolden;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json pool_to_json(const SeedPool& pool);
SeedPool pool_from_json(const nlohmann::json& doc);

// Seeds ranked in the top m of both rankings, ascending by seed. Both rankings
// must cover the same seeds (SeedSetMismatch) and 1 <= m <= #seeds (CountError).
SeedPool golden_seeds(const quality::SeedRanking& fid, const quality::SeedRanking& preference, std::size_t m);

struct FarthestPointOptions {
  // Overrides the random first pick.
  std::optional<SeedId> first_seed;
  PoolKind kind = PoolKind::kDiverseStyle;
};

// Greedy max-min selection in Euclidean feature space. The first seed is drawn
// uniformly from the supplied seeds with CounterRng(rng_seed,
// StreamId::kSeedSelection); each later pick maximizes the distance to its
// nearest already-chosen seed, ties going to the smallest seed. The pool keeps
// selection order.
SeedPool farthest_point_seeds(std::span<const SeedFeature> features, std::size_t count, std::uint64_t rng_seed,
                              const FarthestPointOptions& options = {});

struct DiversityResult {
  double similarity = 0;
  std::size_t prompts_used = 0;
  std::size_t prompts_skipped = 0;
};

// Mean over prompts of the mean pairwise cosine similarity among the first C
// images of each prompt. An empty, non-finite or zero vector marks an unusable
// image (for example no detected object); prompts with fewer than two usable
// images are skipped. Throws NoUsablePrompts when every prompt is skipped.
DiversityResult diversity_similarity(const std::map<std::string, std::vector<Eigen::VectorXd>>& image_features,
                                     std::size_t c);

}  // namespace seedlab::selection
