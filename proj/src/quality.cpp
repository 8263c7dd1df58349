#include "seedlab/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seedlab/error.hpp"
#include "seedlab/tensor.hpp"

namespace seedlab::quality {

using nlohmann::json;

namespace {

std::string_view direction_name(Direction d) { return d == Direction::kLowerBetter ? "lower_better" : "higher_better"; }

Direction parse_direction(const std::string& s) {
  if (s == "lower_better") return Direction::kLowerBetter;
  if (s == "higher_better") return Direction::kHigherBetter;
  throw Error(ErrorCode::kParse, "unknown ranking direction '" + s + "'");
}

void check_stats(const GaussianStats& s, const char* which) {
  const Eigen::Index d = s.mean.size();
  if (s.cov.rows() != d || s.cov.cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(which) + ": covariance shape does not match mean");
  }
  if (!s.mean.allFinite() || !s.cov.allFinite()) {
    throw Error(ErrorCode::kValidation, std::string(which) + ": statistics contain NaN or Inf");
  }
  const double scale = std::max(1.0, s.cov.cwiseAbs().maxCoeff());
  if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw Error(ErrorCode::kValidation, std::string(which) + ": covariance is not symmetric");
  }
}

// Eigenvalues of a symmetric PSD matrix with the small-negative clip.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> psd_eigen(const Eigen::MatrixXd& m, const char* what) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, std::string("eigendecomposition failed for ") + what);
  }
  const double trace = std::max(sym.trace(), 0.0);
  if (es.eigenvalues().size() > 0 && es.eigenvalues().minCoeff() < -1e-8 * trace) {
    throw Error(ErrorCode::kNumerical, std::string(what) + " has an eigenvalue below -1e-8*trace (not PSD)");
  }
  return es;
}

std::map<SeedId, std::vector<const Eigen::VectorXd*>> group_by_seed(const std::map<ImageKey, Eigen::VectorXd>& features,
                                                                     const std::set<std::string>& prompts) {
  std::map<SeedId, std::vector<const Eigen::VectorXd*>> groups;
  for (const auto& [key, vec] : features) {
    if (prompts.contains(key.prompt_id)) groups[key.seed].push_back(&vec);
  }
  return groups;
}

}  // namespace

GaussianStats gaussian_stats(const Eigen::MatrixXd& features, CovarianceDivisor divisor) {
  const Eigen::Index n = features.rows();
  if (n < 2) {
    throw Error(ErrorCode::kSampleSize, "Gaussian statistics need at least two samples, got " + std::to_string(n));
  }
  GaussianStats s;
  s.n = static_cast<std::size_t>(n);
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  const double denom = divisor == CovarianceDivisor::kUnbiased ? static_cast<double>(n - 1) : static_cast<double>(n);
  s.cov = (centered.transpose() * centered) / denom;
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "Frechet distance between " + std::to_string(a.mean.size()) + "-D and " +
                                                   std::to_string(b.mean.size()) + "-D statistics");
  }
  check_stats(a, "first statistics");
  check_stats(b, "second statistics");

  const auto ea = psd_eigen(a.cov, "first covariance");
  const Eigen::VectorXd root_vals = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = ea.eigenvectors() * root_vals.asDiagonal() * ea.eigenvectors().transpose();

  const auto em = psd_eigen(sqrt_a * b.cov * sqrt_a, "covariance product");
  const double trace_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double d2 = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
  return std::max(d2, 0.0);
}

SeedRanking make_ranking(std::string metric_name, Direction direction, std::string prompt_set_id,
                         const std::map<SeedId, double>& scores) {
  SeedRanking r{std::move(metric_name), direction, std::move(prompt_set_id), {}};
  for (const auto& [seed, score] : scores) r.entries.push_back({seed, score});
  std::stable_sort(r.entries.begin(), r.entries.end(), [direction](const RankEntry& x, const RankEntry& y) {
    if (x.score != y.score) return direction == Direction::kLowerBetter ? x.score < y.score : x.score > y.score;
    return x.seed < y.seed;
  });
  return r;
}

json ranking_to_json(const SeedRanking& r) {
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(json{{"seed", e.seed.value}, {"score", e.score}});
  return json{{"metric_name", r.metric_name},
              {"direction", direction_name(r.direction)},
              {"prompt_set_id", r.prompt_set_id},
              {"entries", std::move(entries)}};
}

SeedRanking ranking_from_json(const json& doc) {
  try {
    std::map<SeedId, double> scores;
    for (const auto& e : doc.at("entries")) {
      const SeedId seed{e.at("seed").get<std::uint32_t>()};
      if (!scores.emplace(seed, e.at("score").get<double>()).second) {
        throw Error(ErrorCode::kValidation, "ranking lists seed " + std::to_string(seed.value) + " twice");
      }
    }
    return make_ranking(doc.at("metric_name").get<std::string>(), parse_direction(doc.at("direction").get<std::string>()),
                        doc.value("prompt_set_id", std::string{}), scores);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed ranking: ") + e.what());
  }
}

FidRanking fid_per_seed(const std::map<ImageKey, Eigen::VectorXd>& embeddings, const GaussianStats& real,
                        const std::set<std::string>& prompt_ids, std::string prompt_set_id,
                        CovarianceDivisor divisor) {
  std::set<std::string> prompts = prompt_ids;
  if (prompts.empty()) {
    for (const auto& [key, v] : embeddings) prompts.insert(key.prompt_id);
  }
  FidRanking out;
  std::map<SeedId, double> scores;
  for (const auto& [seed, vecs] : group_by_seed(embeddings, prompts)) {
    if (vecs.size() < 2) {
      out.excluded.push_back({seed, vecs.size(), "InsufficientSamples: fewer than two images"});
      continue;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(vecs.size()), real.mean.size());
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (vecs[i]->size() != real.mean.size()) {
        throw Error(ErrorCode::kDimensionMismatch, "pooled embedding of seed " + std::to_string(seed.value) +
                                                       " has length " + std::to_string(vecs[i]->size()) +
                                                       ", reference statistics are " +
                                                       std::to_string(real.mean.size()) + "-D");
      }
      x.row(static_cast<Eigen::Index>(i)) = vecs[i]->transpose();
    }
    scores[seed] = frechet_distance(gaussian_stats(x, divisor), real);
  }
  out.ranking = make_ranking("fid", Direction::kLowerBetter, std::move(prompt_set_id), scores);
  return out;
}

FidRanking fid_per_seed(const CorpusManifest& manifest, const GaussianStats& real, const std::set<std::string>& prompt_ids,
                        CovarianceDivisor divisor) {
  std::map<ImageKey, Eigen::VectorXd> embeddings;
  for (const auto& img : manifest.images) {
    if (!prompt_ids.empty() && !prompt_ids.contains(img.prompt_id)) continue;
    auto it = img.artifacts.find(std::string(artifact::kPooledEmbedding));
    if (it == img.artifacts.end()) {
      throw Error(ErrorCode::kValidation, "image (seed=" + std::to_string(img.seed.value) + ", prompt_id=" +
                                              img.prompt_id + ") has no pooled_embedding");
    }
    const TensorBlob blob = read_tensor(manifest.resolve(it->second));
    embeddings.emplace(img.key(), Eigen::Map<const Eigen::VectorXf>(blob.data.data(),
                                                                     static_cast<Eigen::Index>(blob.data.size()))
                                      .cast<double>());
  }
  return fid_per_seed(embeddings, real, prompt_ids, manifest.prompt_set_id, divisor);
}

SeedRanking score_per_seed(const CorpusManifest& manifest, const std::string& metric_name,
                           const std::set<std::string>& prompt_ids, Aggregator) {
  std::map<SeedId, std::pair<double, std::size_t>> sums;
  for (const auto& img : manifest.images) {
    if (!prompt_ids.empty() && !prompt_ids.contains(img.prompt_id)) continue;
    auto it = img.scores.find(metric_name);
    if (it == img.scores.end()) {
      throw Error(ErrorCode::kMissingScore, "image (seed=" + std::to_string(img.seed.value) + ", prompt_id=" +
                                                img.prompt_id + ") has no score '" + metric_name + "'");
    }
    auto& [sum, count] = sums[img.seed];
    sum += it->second;
    ++count;
  }
  std::map<SeedId, double> means;
  for (const auto& [seed, acc] : sums) means[seed] = acc.first / static_cast<double>(acc.second);
  return make_ranking(metric_name, Direction::kHigherBetter, manifest.prompt_set_id, means);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "spearman needs two equal-length, non-empty samples");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  // Constant samples carry no ordering; identical ones agree perfectly.
  if (da == 0.0 || db == 0.0) return ra == rb ? 1.0 : 0.0;
  return std::clamp(num / std::sqrt(da * db), -1.0, 1.0);
}

RankStability rank_stability(const SeedRanking& r1, const SeedRanking& r2, const std::vector<std::size_t>& ks) {
  std::map<SeedId, double> g1, g2;
  const auto goodness = [](const SeedRanking& r, const RankEntry& e) {
    return r.direction == Direction::kLowerBetter ? -e.score : e.score;
  };
  for (const auto& e : r1.entries) g1[e.seed] = goodness(r1, e);
  for (const auto& e : r2.entries) g2[e.seed] = goodness(r2, e);
  if (g1.size() != r1.entries.size() || g2.size() != r2.entries.size()) {
    throw Error(ErrorCode::kValidation, "ranking lists a seed more than once");
  }
  if (g1.size() != g2.size() || !std::equal(g1.begin(), g1.end(), g2.begin(), [](const auto& x, const auto& y) {
        return x.first == y.first;
      })) {
    throw Error(ErrorCode::kSeedSetMismatch, "rankings cover different seed sets");
  }
  if (g1.empty()) {
    throw Error(ErrorCode::kSeedSetMismatch, "rankings are empty");
  }

  std::vector<double> a, b;
  for (const auto& [seed, v] : g1) a.push_back(v);
  for (const auto& [seed, v] : g2) b.push_back(v);

  RankStability out;
  out.spearman_rho = spearman(a, b);
  for (std::size_t k : ks) {
    if (k == 0 || k > g1.size()) continue;
    std::set<SeedId> top1, common;
    for (std::size_t i = 0; i < k; ++i) top1.insert(r1.entries[i].seed);
    for (std::size_t i = 0; i < k; ++i) {
      if (top1.contains(r2.entries[i].seed)) common.insert(r2.entries[i].seed);
    }
    out.top_k_overlap[k] = static_cast<double>(common.size()) / static_cast<double>(k);
  }
  return out;
}

ProbeResult seed_probe_accuracy(const std::map<ImageKey, Eigen::VectorXd>& features,
                                const std::set<std::string>& train_prompts, const std::set<std::string>& test_prompts) {
  if (train_prompts.empty() || test_prompts.empty()) {
    throw Error(ErrorCode::kEmptySplit, "train and test prompt sets must both be non-empty");
  }
  for (const auto& p : train_prompts) {
    if (test_prompts.contains(p)) {
      throw Error(ErrorCode::kSplitOverlap, "prompt '" + p + "' is in both train and test splits");
    }
  }

  const auto train = group_by_seed(features, train_prompts);
  if (train.empty()) {
    throw Error(ErrorCode::kEmptySplit, "no style vectors for the train prompts");
  }
  std::vector<SeedId> seeds;
  std::vector<Eigen::VectorXd> centroids;
  Eigen::Index dims = train.begin()->second.front()->size();
  for (const auto& [seed, vecs] : train) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dims);
    for (const auto* v : vecs) {
      if (v->size() != dims) throw Error(ErrorCode::kDimensionMismatch, "style vectors have inconsistent lengths");
      c += *v;
    }
    seeds.push_back(seed);
    centroids.push_back(c / static_cast<double>(vecs.size()));
  }

  ProbeResult out;
  out.n_seeds = seeds.size();
  out.degenerate = std::all_of(centroids.begin(), centroids.end(),
                               [&](const Eigen::VectorXd& c) { return c == centroids.front(); });
  std::size_t correct = 0;
  for (const auto& [key, vec] : features) {
    if (!test_prompts.contains(key.prompt_id)) continue;
    if (!train.contains(key.seed)) {
      throw Error(ErrorCode::kMissingCell, "seed " + std::to_string(key.seed.value) + " has no train vectors");
    }
    if (vec.size() != dims) throw Error(ErrorCode::kDimensionMismatch, "style vectors have inconsistent lengths");
    std::size_t best = 0;
    double best_dist = (vec - centroids[0]).squaredNorm();
    for (std::size_t s = 1; s < centroids.size(); ++s) {
      const double d = (vec - centroids[s]).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = s;
      }
    }
    correct += seeds[best] == key.seed ? 1 : 0;
    ++out.n_test;
  }
  if (out.n_test == 0) {
    throw Error(ErrorCode::kEmptySplit, "no style vectors for the test prompts");
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.n_test);
  return out;
}

ProbeResult seed_probe_accuracy(const std::map<ImageKey, style::StyleVector>& style_vectors,
                                const std::set<std::string>& train_prompts, const std::set<std::string>& test_prompts) {
  std::map<ImageKey, Eigen::VectorXd> features;
  for (const auto& [key, sv] : style_vectors) features.emplace(key, sv.values);
  return seed_probe_accuracy(features, train_prompts, test_prompts);
}

json stats_to_json(const GaussianStats& stats) {
  json cov = json::array();
  for (Eigen::Index i = 0; i < stats.cov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < stats.cov.cols(); ++j) row.push_back(stats.cov(i, j));
    cov.push_back(std::move(row));
  }
  return json{{"n", stats.n}, {"mean", std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size())},
              {"cov", std::move(cov)}};
}

GaussianStats stats_from_json(const json& doc) {
  try {
    GaussianStats s;
    s.n = doc.value("n", std::size_t{0});
    const auto mean = doc.at("mean").get<std::vector<double>>();
    const auto cov = doc.at("cov").get<std::vector<std::vector<double>>>();
    const auto d = static_cast<Eigen::Index>(mean.size());
    s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    if (static_cast<Eigen::Index>(cov.size()) != d) {
      throw Error(ErrorCode::kDimensionMismatch, "covariance has " + std::to_string(cov.size()) + " rows for a " +
                                                     std::to_string(d) + "-D mean");
    }
    s.cov.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (static_cast<Eigen::Index>(cov[i].size()) != d) {
        throw Error(ErrorCode::kDimensionMismatch, "covariance row has the wrong length");
      }
      for (Eigen::Index j = 0; j < d; ++j) s.cov(i, j) = cov[i][j];
    }
    check_stats(s, "reference statistics");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed Gaussian statistics: ") + e.what());
  }
}

}  // namespace seedlab::quality
