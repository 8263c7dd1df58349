#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "seedlab/corpus.hpp"
#include "seedlab/style.hpp"

namespace seedlab::quality {

enum class CovarianceDivisor {
  kUnbiased,  // n - 1
  kBiased,    // n
};

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n = 0;
};

// Throws SampleSizeError for fewer than two rows.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features, CovarianceDivisor divisor = CovarianceDivisor::kUnbiased);

// Squared Frechet distance between two Gaussians,
//   |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}),
// with tr (S_a S_b)^{1/2} taken as the sum of square roots of the eigenvalues
// of S_a^{1/2} S_b S_a^{1/2}. Eigenvalues above -1e-8 * trace are clipped to 0;
// anything more negative is a NumericalError.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

enum class Direction { kLowerBetter, kHigherBetter };

struct RankEntry {
  SeedId seed;
  double score = 0;

  friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

struct SeedRanking {
  std::string metric_name;
  Direction direction = Direction::kLowerBetter;
  std::string prompt_set_id;
  std::vector<RankEntry> entries;  // best first; equal scores by ascending seed

  friend bool operator==(const SeedRanking&, const SeedRanking&) = default;
};

SeedRanking make_ranking(std::string metric_name, Direction direction, std::string prompt_set_id,
                         const std::map<SeedId, double>& scores);

nlohmann::json ranking_to_json(const SeedRanking& ranking);
SeedRanking ranking_from_json(const nlohmann::json& doc);

struct Exclusion {
  SeedId seed;
  std::size_t n_samples = 0;
  std::string reason;
};

struct FidRanking {
  SeedRanking ranking;
  std::vector<Exclusion> excluded;  // seeds with fewer than two images
};

// Per seed: Gaussian fit over the pooled_embedding artifacts of images whose
// prompt is in `prompt_ids` (every prompt when empty), then squared Frechet
// distance to `real`. Seeds with a single image are excluded and reported.
FidRanking fid_per_seed(const CorpusManifest& manifest, const GaussianStats& real, const std::set<std::string>& prompt_ids,
                        CovarianceDivisor divisor = CovarianceDivisor::kUnbiased);

// Same as above on in-memory embeddings keyed by image.
FidRanking fid_per_seed(const std::map<ImageKey, Eigen::VectorXd>& embeddings, const GaussianStats& real,
                        const std::set<std::string>& prompt_ids, std::string prompt_set_id,
                        CovarianceDivisor divisor = CovarianceDivisor::kUnbiased);

enum class Aggregator { kMean };

// Mean of scores[metric_name] per seed, higher is better. Throws MissingScore
// when a selected image has no such score.
SeedRanking score_per_seed(const CorpusManifest& manifest, const std::string& metric_name,
                           const std::set<std::string>& prompt_ids, Aggregator aggregator = Aggregator::kMean);

struct RankStability {
  double spearman_rho = 0;
  std::map<std::size_t, double> top_k_overlap;
};

// Spearman correlation of the two rankings' direction-adjusted scores with
// average ranks for ties, plus |topK(r1) & topK(r2)| / k for each k <= #seeds.
RankStability rank_stability(const SeedRanking& r1, const SeedRanking& r2,
                             const std::vector<std::size_t>& ks = {16, 64, 256});

// Average (fractional) ranks, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct ProbeResult {
  double accuracy = 0;
  std::size_t n_test = 0;
  std::size_t n_seeds = 0;
  // All centroids coincide, so every prediction falls to the smallest seed.
  bool degenerate = false;
};

// Nearest-centroid seed classifier: centroids from the train prompts' style
// vectors, Euclidean nearest centroid for each test vector, ties to the
// smallest seed.
ProbeResult seed_probe_accuracy(const std::map<ImageKey, Eigen::VectorXd>& features,
                                const std::set<std::string>& train_prompts, const std::set<std::string>& test_prompts);
ProbeResult seed_probe_accuracy(const std::map<ImageKey, style::StyleVector>& style_vectors,
                                const std::set<std::string>& train_prompts, const std::set<std::string>& test_prompts);

nlohmann::json stats_to_json(const GaussianStats& stats);
GaussianStats stats_from_json(const nlohmann::json& doc);

}  // namespace seedlab::quality
