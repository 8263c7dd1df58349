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
#include "seedlab/style.hpp"

namespace seedlab::dimred {

enum class Method { kPca, kTsne, kPcaThenTsne };

std::string_view to_string(Method method) noexcept;

struct Embedding {
  Eigen::MatrixXd points;  // n x d
  Method method = Method::kPca;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t rng_seed = 0;
  // PCA: rank 0 after centering. t-SNE: never set.
  bool degenerate = false;
  // t-SNE: false when KL was still dropping by more than 1e-4 per iteration
  // over the final iterations (a convergence warning, not a failure).
  bool converged = true;
  // t-SNE: KL(P||Q) at each of the final iterations, oldest first.
  std::vector<double> kl_trace;
};

struct PcaResult {
  Embedding embedding;
  Eigen::VectorXd explained_variance_ratio;  // k entries, descending
  Eigen::MatrixXd components;                // D x k, orthonormal columns
  Eigen::RowVectorXd mean;                   // column means of the input
};

// Requires 1 <= k <= min(n, D), else DimensionError. Each component is
// oriented so its largest-magnitude loading is positive.
PcaResult pca_fit_transform(const Eigen::MatrixXd& x, std::size_t k);

struct Affinities {
  Eigen::MatrixXd conditional;   // row i is p(j | i), zero diagonal
  Eigen::VectorXd entropy_bits;  // Shannon entropy of each row in bits
  Eigen::VectorXd precision;     // Gaussian precision beta_i = 1 / (2 sigma_i^2)
};

// Per-row binary search on the Gaussian precision so that each conditional
// distribution has perplexity `perplexity` (entropy log2(perplexity) bits).
Affinities conditional_affinities(const Eigen::MatrixXd& x, double perplexity);

struct TsneParams {
  // Unset: 30, clamped to (n - 1) / 3.
  std::optional<double> perplexity;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  int momentum_switch_iteration = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  // Unset: max(n / 12, 50).
  std::optional<double> learning_rate;
  double init_stddev = 1e-4;
  // Number of trailing iterations whose KL is recorded and checked.
  int kl_window = 50;
};

// Resolved perplexity for n points; throws PerplexityError when n < 4 or the
// value lies outside [1, (n - 1) / 3].
double resolve_perplexity(const TsneParams& params, std::size_t n);

// Exact-gradient t-SNE to two dimensions. Deterministic in (x, params, rng_seed).
Embedding tsne_embed(const Eigen::MatrixXd& x, const TsneParams& params, std::uint64_t rng_seed);
Embedding tsne_embed(const Eigen::MatrixXd& x, double perplexity, std::uint64_t rng_seed, int iterations);

struct PipelineParams {
  TsneParams tsne;
  std::size_t pca_dims = 50;
};

// PCA to min(pca_dims, D, n) components followed by t-SNE.
Embedding pca_tsne(const Eigen::MatrixXd& x, const PipelineParams& params, std::uint64_t rng_seed);

struct TwoStageEmbedding {
  Embedding per_image;              // N*P rows, row = seed_index * P + prompt_index
  Embedding per_seed;               // N rows in `seeds` order
  std::vector<ImageKey> image_rows;
  std::vector<SeedId> seed_rows;
};

// Stage 1 embeds every style vector to 2-D; stage 2 embeds the seeds'
// concatenated per-prompt embeddings (N x 2P) to 2-D. Both stages use
// pca_tsne with the same rng_seed.
TwoStageEmbedding two_stage_seed_embedding(const std::map<ImageKey, style::StyleVector>& style_vectors,
                                           std::span<const SeedId> seeds, std::span<const std::string> prompts,
                                           const PipelineParams& params, std::uint64_t rng_seed);

}  // namespace seedlab::dimred
