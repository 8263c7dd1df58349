#include "seedlab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seedlab/error.hpp"
#include "seedlab/random.hpp"

namespace seedlab::selection {

using nlohmann::json;

namespace {

constexpr std::pair<PoolKind, std::string_view> kPoolKinds[] = {
    {PoolKind::kGolden, "golden"},
    {PoolKind::kDiverseStyle, "diverse_style"},
    {PoolKind::kDiverseComposition, "diverse_composition"},
};

std::set<SeedId> top_m(const quality::SeedRanking& r, std::size_t m) {
  std::set<SeedId> out;
  for (std::size_t i = 0; i < m; ++i) out.insert(r.entries[i].seed);
  return out;
}

bool usable(const Eigen::VectorXd& v) { return v.size() > 0 && v.allFinite() && v.squaredNorm() > 0.0; }

}  // namespace

std::string_view to_string(PoolKind kind) noexcept {
  for (const auto& [k, name] : kPoolKinds) {
    if (k == kind) return name;
  }
  return "golden";
}

PoolKind parse_pool_kind(std::string_view text) {
  for (const auto& [k, name] : kPoolKinds) {
    if (name == text) return k;
  }
  throw Error(ErrorCode::kParse, "unknown pool kind '" + std::string(text) + "'");
}

json pool_to_json(const SeedPool& pool) {
  std::vector<std::uint32_t> seeds;
  for (SeedId s : pool.seeds) seeds.push_back(s.value);
  return json{{"pool_kind", to_string(pool.kind)}, {"seeds", seeds}, {"size", seeds.size()},
              {"provenance", pool.provenance}};
}

SeedPool pool_from_json(const json& doc) {
  try {
    SeedPool pool;
    pool.kind = parse_pool_kind(doc.at("pool_kind").get<std::string>());
    std::set<SeedId> seen;
    for (std::uint32_t v : doc.at("seeds").get<std::vector<std::uint32_t>>()) {
      if (!seen.insert(SeedId{v}).second) {
        throw Error(ErrorCode::kValidation, "seed pool lists seed " + std::to_string(v) + " twice");
      }
      pool.seeds.push_back(SeedId{v});
    }
    pool.provenance = doc.value("provenance", json::object());
    return pool;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed seed pool: ") + e.what());
  }
}

SeedPool golden_seeds(const quality::SeedRanking& fid, const quality::SeedRanking& preference, std::size_t m) {
  std::set<SeedId> a, b;
  for (const auto& e : fid.entries) a.insert(e.seed);
  for (const auto& e : preference.entries) b.insert(e.seed);
  if (a != b || a.size() != fid.entries.size() || b.size() != preference.entries.size()) {
    throw Error(ErrorCode::kSeedSetMismatch, "golden seed selection needs two rankings over the same seeds");
  }
  if (m < 1 || m > a.size()) {
    throw Error(ErrorCode::kCount, "m=" + std::to_string(m) + " outside [1, " + std::to_string(a.size()) + "]");
  }
  const auto top_fid = top_m(fid, m);
  const auto top_pref = top_m(preference, m);

  SeedPool pool;
  pool.kind = PoolKind::kGolden;
  std::set_intersection(top_fid.begin(), top_fid.end(), top_pref.begin(), top_pref.end(),
                        std::back_inserter(pool.seeds));
  pool.provenance = json{{"rule", "top_m_intersection"},
                         {"m", m},
                         {"quality_metric", fid.metric_name},
                         {"quality_prompt_set", fid.prompt_set_id},
                         {"preference_metric", preference.metric_name},
                         {"preference_prompt_set", preference.prompt_set_id}};
  return pool;
}

SeedPool farthest_point_seeds(std::span<const SeedFeature> features, std::size_t count, std::uint64_t rng_seed,
                              const FarthestPointOptions& options) {
  if (count < 1 || count > features.size()) {
    throw Error(ErrorCode::kCount, "count " + std::to_string(count) + " outside [1, " +
                                       std::to_string(features.size()) + "]");
  }
  std::vector<const SeedFeature*> sorted;
  for (const auto& f : features) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(), [](const SeedFeature* x, const SeedFeature* y) { return x->seed < y->seed; });
  const Eigen::Index dims = sorted.front()->f.size();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i]->seed == sorted[i - 1]->seed) {
      throw Error(ErrorCode::kValidation, "seed " + std::to_string(sorted[i]->seed.value) + " appears twice");
    }
    if (sorted[i]->f.size() != dims) {
      throw Error(ErrorCode::kDimensionMismatch, "seed features have inconsistent lengths");
    }
    if (!sorted[i]->f.allFinite()) {
      throw Error(ErrorCode::kValidation, "seed features contain NaN or Inf");
    }
  }

  std::size_t first = 0;
  if (options.first_seed) {
    auto it = std::find_if(sorted.begin(), sorted.end(), [&](const SeedFeature* f) { return f->seed == *options.first_seed; });
    if (it == sorted.end()) {
      throw Error(ErrorCode::kValidation, "first seed " + std::to_string(options.first_seed->value) + " has no feature");
    }
    first = static_cast<std::size_t>(it - sorted.begin());
  } else {
    CounterRng rng(rng_seed, StreamId::kSeedSelection);
    first = static_cast<std::size_t>(rng.next_index(sorted.size()));
  }

  std::vector<bool> chosen(sorted.size(), false);
  std::vector<double> nearest(sorted.size());
  SeedPool pool;
  pool.kind = options.kind;
  const auto take = [&](std::size_t idx) {
    chosen[idx] = true;
    pool.seeds.push_back(sorted[idx]->seed);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double d = (sorted[i]->f - sorted[idx]->f).squaredNorm();
      nearest[i] = pool.seeds.size() == 1 ? d : std::min(nearest[i], d);
    }
  };
  take(first);
  while (pool.seeds.size() < count) {
    std::size_t best = sorted.size();
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (!chosen[i] && (best == sorted.size() || nearest[i] > nearest[best])) best = i;
    }
    take(best);
  }

  pool.provenance = json{{"rule", "farthest_point"},
                         {"count", count},
                         {"rng_seed", rng_seed},
                         {"first_seed", sorted[first]->seed.value},
                         {"first_seed_forced", options.first_seed.has_value()},
                         {"distance", "euclidean"},
                         {"candidates", sorted.size()}};
  return pool;
}

DiversityResult diversity_similarity(const std::map<std::string, std::vector<Eigen::VectorXd>>& image_features,
                                     std::size_t c) {
  DiversityResult out;
  double total = 0.0;
  for (const auto& [prompt, vectors] : image_features) {
    std::vector<const Eigen::VectorXd*> use;
    for (std::size_t i = 0; i < vectors.size() && i < c; ++i) {
      if (usable(vectors[i])) use.push_back(&vectors[i]);
    }
    if (use.size() < 2) {
      ++out.prompts_skipped;
      continue;
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t j = 0; j < use.size(); ++j) {
      for (std::size_t k = j + 1; k < use.size(); ++k) {
        if (use[j]->size() != use[k]->size()) {
          throw Error(ErrorCode::kDimensionMismatch, "image features for prompt '" + prompt + "' differ in length");
        }
        sum += std::clamp(use[j]->dot(*use[k]) / (use[j]->norm() * use[k]->norm()), -1.0, 1.0);
        ++pairs;
      }
    }
    total += sum / static_cast<double>(pairs);
    ++out.prompts_used;
  }
  if (out.prompts_used == 0) {
    throw Error(ErrorCode::kNoUsablePrompts, "no prompt has two or more usable images");
  }
  out.similarity = total / static_cast<double>(out.prompts_used);
  return out;
}

}  // namespace seedlab::selection
