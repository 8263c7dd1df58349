#include "seedlab/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "seedlab/error.hpp"
#include "seedlab/random.hpp"

namespace seedlab::dimred {

using nlohmann::json;

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kPca: return "pca";
    case Method::kTsne: return "tsne";
    case Method::kPcaThenTsne: return "pca_then_tsne";
  }
  return "pca";
}

namespace {

void require_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) {
    throw Error(ErrorCode::kValidation, std::string(what) + " contains NaN or Inf");
  }
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

}  // namespace

PcaResult pca_fit_transform(const Eigen::MatrixXd& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto dims = static_cast<std::size_t>(x.cols());
  if (k < 1 || k > std::min(n, dims)) {
    throw Error(ErrorCode::kDimension, "PCA target dimension " + std::to_string(k) + " outside [1, min(n, D)] = [1, " +
                                           std::to_string(std::min(n, dims)) + "]");
  }
  require_finite(x, "PCA input");
  const auto kk = static_cast<Eigen::Index>(k);

  PcaResult out;
  out.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - out.mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double total = sv.squaredNorm();
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());

  out.embedding.method = Method::kPca;
  out.embedding.params = json{{"k", k}, {"centering", "column_mean"}, {"sign", "largest_loading_positive"}};
  out.components = svd.matrixV().leftCols(kk);
  for (Eigen::Index j = 0; j < kk; ++j) {
    Eigen::Index arg = 0;
    out.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, j) < 0.0) out.components.col(j) *= -1.0;
  }

  if (total == 0.0 || std::sqrt(total) <= 1e-12 * scale * std::sqrt(static_cast<double>(n))) {
    out.embedding.degenerate = true;
    out.embedding.points = Eigen::MatrixXd::Zero(x.rows(), kk);
    out.explained_variance_ratio = Eigen::VectorXd::Zero(kk);
    return out;
  }
  out.embedding.points = centered * out.components;
  out.explained_variance_ratio = sv.head(kk).array().square() / total;
  return out;
}

Affinities conditional_affinities(const Eigen::MatrixXd& x, double perplexity) {
  const Eigen::Index n = x.rows();
  if (n < 2) {
    throw Error(ErrorCode::kPerplexity, "affinities need at least two points");
  }
  if (!(perplexity >= 1.0) || perplexity > static_cast<double>(n - 1)) {
    throw Error(ErrorCode::kPerplexity, "perplexity must lie in [1, n-1]");
  }
  require_finite(x, "t-SNE input");
  const Eigen::MatrixXd dist = squared_distances(x);
  const double target = std::log(perplexity);

  Affinities out;
  out.conditional = Eigen::MatrixXd::Zero(n, n);
  out.entropy_bits.resize(n);
  out.precision.resize(n);

  Eigen::VectorXd shifted(n - 1);
  Eigen::VectorXd weights(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      shifted(k++) = dist(i, j);
      dmin = std::min(dmin, dist(i, j));
    }
    shifted.array() -= dmin;
    const double spread = shifted.mean();

    // Entropy in nats at precision beta; fills `weights` with the
    // normalized distribution.
    const auto entropy_at = [&](double beta) {
      weights = (-beta * shifted.array()).exp();
      const double z = weights.sum();
      weights /= z;
      return std::log(z) + beta * weights.dot(shifted);
    };

    double beta = spread > 0.0 ? 1.0 / spread : 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double h = entropy_at(beta);
    for (int iter = 0; iter < 200 && std::abs(h - target) > 1e-13; ++iter) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = entropy_at(beta);
    }

    for (Eigen::Index j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      out.conditional(i, j) = weights(k++);
    }
    out.entropy_bits(i) = h / std::numbers::ln2;
    out.precision(i) = beta;
  }
  return out;
}

double resolve_perplexity(const TsneParams& params, std::size_t n) {
  if (n < 4) {
    throw Error(ErrorCode::kPerplexity, "t-SNE needs at least 4 points, got " + std::to_string(n));
  }
  const double upper = static_cast<double>(n - 1) / 3.0;
  if (!params.perplexity) {
    return std::min(30.0, upper);
  }
  const double p = *params.perplexity;
  if (!(p >= 1.0 && p <= upper)) {
    throw Error(ErrorCode::kPerplexity, "perplexity " + std::to_string(p) + " outside [1, (n-1)/3] = [1, " +
                                            std::to_string(upper) + "]");
  }
  return p;
}

Embedding tsne_embed(const Eigen::MatrixXd& x, const TsneParams& params, std::uint64_t rng_seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  const double perplexity = resolve_perplexity(params, n);
  if (params.iterations < 1) {
    throw Error(ErrorCode::kUsage, "t-SNE needs at least one iteration");
  }
  const Eigen::Index nn = x.rows();
  const double learning_rate = params.learning_rate.value_or(std::max(static_cast<double>(n) / 12.0, 50.0));

  const Affinities aff = conditional_affinities(x, perplexity);
  Eigen::MatrixXd p = aff.conditional + aff.conditional.transpose();
  p /= p.sum();

  constexpr int kDims = 2;
  Eigen::MatrixXd y(nn, kDims);
  CounterRng rng(rng_seed, StreamId::kEmbeddingInit);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (int d = 0; d < kDims; ++d) y(i, d) = params.init_stddev * rng.next_normal();
  }

  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(nn, kDims);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(nn, kDims);
  Eigen::MatrixXd grad(nn, kDims);
  Eigen::MatrixXd num(nn, nn);

  Embedding out;
  const int window_start = params.iterations - std::max(params.kl_window, 0);
  for (int iter = 0; iter < params.iterations; ++iter) {
    const double exaggeration = iter < params.exaggeration_iterations ? params.early_exaggeration : 1.0;
    const double momentum = iter < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;

    double sum_q = 0.0;
    for (Eigen::Index i = 0; i < nn; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < nn; ++j) {
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(i, j) = v;
        num(j, i) = v;
        sum_q += 2.0 * v;
      }
    }

    if (iter >= window_start) {
      double kl = 0.0;
      for (Eigen::Index i = 0; i < nn; ++i) {
        for (Eigen::Index j = 0; j < nn; ++j) {
          if (i != j && p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / (num(i, j) / sum_q));
        }
      }
      out.kl_trace.push_back(kl);
    }

    for (Eigen::Index i = 0; i < nn; ++i) {
      double g0 = 0.0;
      double g1 = 0.0;
      for (Eigen::Index j = 0; j < nn; ++j) {
        if (i == j) continue;
        const double mult = (exaggeration * p(i, j) - num(i, j) / sum_q) * num(i, j);
        g0 += mult * (y(i, 0) - y(j, 0));
        g1 += mult * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * g0;
      grad(i, 1) = 4.0 * g1;
    }

    for (Eigen::Index i = 0; i < nn; ++i) {
      for (int d = 0; d < kDims; ++d) {
        const bool same_sign = (grad(i, d) > 0.0) == (update(i, d) > 0.0);
        gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
        update(i, d) = momentum * update(i, d) - learning_rate * gains(i, d) * grad(i, d);
        y(i, d) += update(i, d);
      }
    }
    y.rowwise() -= y.colwise().mean();
  }

  if (!y.allFinite()) {
    throw Error(ErrorCode::kNumerical, "t-SNE diverged (non-finite embedding)");
  }
  if (out.kl_trace.size() >= 2) {
    const double rate = (out.kl_trace.front() - out.kl_trace.back()) / static_cast<double>(out.kl_trace.size() - 1);
    out.converged = rate <= 1e-4;
  }
  out.points = std::move(y);
  out.method = Method::kTsne;
  out.rng_seed = rng_seed;
  out.params = json{{"perplexity", perplexity},
                    {"iterations", params.iterations},
                    {"early_exaggeration", params.early_exaggeration},
                    {"exaggeration_iterations", params.exaggeration_iterations},
                    {"momentum_switch_iteration", params.momentum_switch_iteration},
                    {"initial_momentum", params.initial_momentum},
                    {"final_momentum", params.final_momentum},
                    {"learning_rate", learning_rate},
                    {"init_stddev", params.init_stddev},
                    {"gradient", "exact"}};
  return out;
}

Embedding tsne_embed(const Eigen::MatrixXd& x, double perplexity, std::uint64_t rng_seed, int iterations) {
  TsneParams params;
  params.perplexity = perplexity;
  params.iterations = iterations;
  return tsne_embed(x, params, rng_seed);
}

Embedding pca_tsne(const Eigen::MatrixXd& x, const PipelineParams& params, std::uint64_t rng_seed) {
  const auto k = std::min({params.pca_dims, static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols())});
  const PcaResult pca = pca_fit_transform(x, k);
  Embedding out = tsne_embed(pca.embedding.points, params.tsne, rng_seed);
  out.method = Method::kPcaThenTsne;
  out.params["pca_dims"] = k;
  out.params["pca_degenerate"] = pca.embedding.degenerate;
  return out;
}

TwoStageEmbedding two_stage_seed_embedding(const std::map<ImageKey, style::StyleVector>& style_vectors,
                                           std::span<const SeedId> seeds, std::span<const std::string> prompts,
                                           const PipelineParams& params, std::uint64_t rng_seed) {
  if (seeds.empty() || prompts.empty()) {
    throw Error(ErrorCode::kMissingCell, "two-stage embedding needs at least one seed and one prompt");
  }
  TwoStageEmbedding out;
  Eigen::Index dims = -1;
  std::vector<const Eigen::VectorXd*> rows;
  for (SeedId seed : seeds) {
    for (const auto& prompt : prompts) {
      const ImageKey key{seed, prompt};
      auto it = style_vectors.find(key);
      if (it == style_vectors.end()) {
        throw Error(ErrorCode::kMissingCell,
                    "no style vector for seed " + std::to_string(seed.value) + ", prompt " + prompt);
      }
      if (dims >= 0 && it->second.values.size() != dims) {
        throw Error(ErrorCode::kDimensionMismatch, "style vectors have inconsistent lengths");
      }
      dims = it->second.values.size();
      rows.push_back(&it->second.values);
      out.image_rows.push_back(key);
    }
  }
  if (dims < 1) {
    throw Error(ErrorCode::kDimension, "style vectors are empty (layers need at least two channels)");
  }
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(rows.size()), dims);
  for (std::size_t r = 0; r < rows.size(); ++r) stacked.row(static_cast<Eigen::Index>(r)) = rows[r]->transpose();

  out.per_image = pca_tsne(stacked, params, rng_seed);

  std::map<ImageKey, Eigen::Vector2d> per_image;
  for (std::size_t r = 0; r < out.image_rows.size(); ++r) {
    per_image.emplace(out.image_rows[r], out.per_image.points.row(static_cast<Eigen::Index>(r)).transpose());
  }
  const Eigen::MatrixXd aggregated = style::aggregate_seed_style(per_image, seeds, prompts);
  out.per_seed = pca_tsne(aggregated, params, rng_seed);
  out.seed_rows.assign(seeds.begin(), seeds.end());
  return out;
}

}  // namespace seedlab::dimred
