#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "seedlab/composition.hpp"
#include "seedlab/corpus.hpp"
#include "seedlab/ddim.hpp"
#include "seedlab/dimred.hpp"
#include "seedlab/error.hpp"
#include "seedlab/inpaint.hpp"
#include "seedlab/job.hpp"
#include "seedlab/quality.hpp"
#include "seedlab/random.hpp"
#include "seedlab/selection.hpp"
#include "seedlab/style.hpp"
#include "seedlab/tensor.hpp"

namespace seedlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> split_numbers(const std::string& text, char sep = ',') {
  std::vector<T> out;
  for (const auto& item : split(text, sep)) {
    std::istringstream in(item);
    T v{};
    if (!(in >> v) || !in.eof()) throw Error(ErrorCode::kUsage, "not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// ---- params ----

const json& param_node(const RunConfig& c, const char* key) {
  auto it = c.params.find(key);
  if (it == c.params.end()) {
    throw Error(ErrorCode::kUsage, c.command + ": missing parameter '" + key + "'");
  }
  return *it;
}

template <typename T>
T param(const RunConfig& c, const char* key) {
  try {
    return param_node(c, key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kUsage, c.command + ": parameter '" + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_param(const RunConfig& c, const char* key) {
  auto it = c.params.find(key);
  if (it == c.params.end() || it->is_null()) return std::nullopt;
  return param<T>(c, key);
}

std::set<std::string> string_set(const RunConfig& c, const char* key) {
  const auto v = param<std::vector<std::string>>(c, key);
  return {v.begin(), v.end()};
}

const fs::path& input(const RunConfig& c, const std::string& role) {
  auto it = c.inputs.find(role);
  if (it == c.inputs.end()) {
    throw Error(ErrorCode::kUsage, c.command + ": missing input '" + role + "'");
  }
  return it->second;
}

// ---- outputs ----

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

TensorBlob matrix_blob(const Eigen::MatrixXd& m) {
  TensorBlob blob;
  blob.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  blob.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) blob.data.push_back(static_cast<float>(m(r, c)));
  }
  return blob;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels, const std::string& header) {
  std::ostringstream out;
  out << std::setprecision(17) << header << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << row_labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << m(r, c);
    out << '\n';
  }
  return out.str();
}

json embedding_sidecar(const dimred::Embedding& e) {
  return json{{"method", dimred::to_string(e.method)},
              {"params", e.params},
              {"rng_seed", e.rng_seed},
              {"degenerate", e.degenerate},
              {"converged", e.converged},
              {"kl_trace", e.kl_trace},
              {"dtype_note", "points are stored as f32; the csv keeps full precision"}};
}

// Feature matrix plus the seed of each row, as written by style-embed and
// composition.
std::vector<selection::SeedFeature> read_seed_features(const fs::path& blob_path, const fs::path& sidecar_path) {
  const TensorBlob blob = read_tensor(blob_path);
  if (blob.shape.size() != 2) {
    throw Error(ErrorCode::kShapeMismatch, blob_path.string() + ": expected a rank-2 feature matrix");
  }
  const json sidecar = read_json_file(sidecar_path);
  std::vector<std::uint32_t> seeds;
  try {
    seeds = sidecar.at("row_seeds").get<std::vector<std::uint32_t>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, sidecar_path.string() + ": no usable row_seeds: " + e.what());
  }
  if (seeds.size() != blob.shape[0]) {
    throw Error(ErrorCode::kValidation, "sidecar lists " + std::to_string(seeds.size()) + " seeds for " +
                                            std::to_string(blob.shape[0]) + " feature rows");
  }
  const std::size_t d = blob.shape[1];
  std::vector<selection::SeedFeature> out;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) f(static_cast<Eigen::Index>(k)) = blob.data[r * d + k];
    out.push_back({SeedId{seeds[r]}, std::move(f)});
  }
  return out;
}

// ---- commands ----

void cmd_validate(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  const ValidationReport report = validate_corpus(manifest, string_set(c, "require"));
  write_json_file(report.to_json(), c.output_dir / "validation_report.json");
  if (!report.empty()) {
    throw Error(ErrorCode::kValidation, std::to_string(report.issues.size()) + " artifact problem(s); see validation_report.json");
  }
}

void cmd_style_embed(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  const auto prompt_filter = string_set(c, "prompts");
  const auto vectors = style::load_style_vectors(manifest, param<std::vector<std::string>>(c, "layers"), prompt_filter);

  std::vector<std::string> prompts;
  for (const auto& p : manifest.prompts) {
    if (prompt_filter.empty() || prompt_filter.contains(p.prompt_id)) prompts.push_back(p.prompt_id);
  }
  const std::vector<SeedId> seeds = manifest.seeds();

  dimred::PipelineParams params;
  params.pca_dims = param<std::size_t>(c, "pca_dims");
  params.tsne.perplexity = optional_param<double>(c, "perplexity");
  params.tsne.iterations = param<int>(c, "iterations");
  const auto result = dimred::two_stage_seed_embedding(vectors, seeds, prompts, params, c.rng_seed);

  std::vector<std::string> image_labels;
  json image_rows = json::array();
  for (const auto& k : result.image_rows) {
    image_rows.push_back(json{{"seed", k.seed.value}, {"prompt_id", k.prompt_id}});
    image_labels.push_back(std::to_string(k.seed.value) + "," + k.prompt_id);
  }
  std::vector<std::string> seed_labels;
  std::vector<std::uint32_t> row_seeds;
  for (const auto& s : result.seed_rows) {
    row_seeds.push_back(s.value);
    seed_labels.push_back(std::to_string(s.value));
  }

  json image_side = embedding_sidecar(result.per_image);
  image_side["rows"] = std::move(image_rows);
  write_tensor(matrix_blob(result.per_image.points), c.output_dir / "image_embedding.sdlb");
  write_json_file(image_side, c.output_dir / "image_embedding.json");
  write_text(c.output_dir / "image_embedding.csv", matrix_csv(result.per_image.points, image_labels, "seed,prompt_id,x,y"));

  json seed_side = embedding_sidecar(result.per_seed);
  seed_side["row_seeds"] = row_seeds;
  seed_side["prompts"] = prompts;
  write_tensor(matrix_blob(result.per_seed.points), c.output_dir / "seed_embedding.sdlb");
  write_json_file(seed_side, c.output_dir / "seed_embedding.json");
  write_text(c.output_dir / "seed_embedding.csv", matrix_csv(result.per_seed.points, seed_labels, "seed,x,y"));
}

quality::CovarianceDivisor parse_divisor(const std::string& s) {
  if (s == "unbiased") return quality::CovarianceDivisor::kUnbiased;
  if (s == "biased") return quality::CovarianceDivisor::kBiased;
  throw Error(ErrorCode::kUsage, "unknown covariance divisor '" + s + "' (unbiased|biased)");
}

void cmd_fid_rank(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  const auto divisor_name = param<std::string>(c, "covariance_divisor");
  const auto divisor = parse_divisor(divisor_name);
  quality::GaussianStats real;
  if (c.inputs.contains("real_stats")) {
    real = quality::stats_from_json(read_json_file(input(c, "real_stats")));
  } else if (c.inputs.contains("real_features")) {
    const TensorBlob blob = read_tensor(input(c, "real_features"));
    if (blob.shape.size() != 2) throw Error(ErrorCode::kShapeMismatch, "real features must be an [N, D] matrix");
    const Eigen::MatrixXf m = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        blob.data.data(), static_cast<Eigen::Index>(blob.shape[0]), static_cast<Eigen::Index>(blob.shape[1]));
    real = quality::gaussian_stats(m.cast<double>(), divisor);
  } else {
    throw Error(ErrorCode::kUsage, "fid-rank needs --real-stats or --real-features");
  }
  const auto result = quality::fid_per_seed(manifest, real, string_set(c, "prompts"), divisor);
  json doc = quality::ranking_to_json(result.ranking);
  json excluded = json::array();
  for (const auto& e : result.excluded) {
    excluded.push_back(json{{"seed", e.seed.value}, {"n_samples", e.n_samples}, {"reason", e.reason}});
  }
  doc["excluded"] = std::move(excluded);
  doc["covariance_divisor"] = divisor_name;
  write_json_file(doc, c.output_dir / "fid_ranking.json");
}

void cmd_score_rank(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  const auto ranking = quality::score_per_seed(manifest, param<std::string>(c, "metric"), string_set(c, "prompts"));
  write_json_file(quality::ranking_to_json(ranking), c.output_dir / "score_ranking.json");
}

void cmd_stability(const RunConfig& c) {
  const auto a = quality::ranking_from_json(read_json_file(input(c, "ranking_a")));
  const auto b = quality::ranking_from_json(read_json_file(input(c, "ranking_b")));
  const auto s = quality::rank_stability(a, b, param<std::vector<std::size_t>>(c, "ks"));
  json overlap = json::object();
  for (const auto& [k, v] : s.top_k_overlap) overlap[std::to_string(k)] = v;
  write_json_file(json{{"spearman_rho", s.spearman_rho},
                       {"top_k_overlap", std::move(overlap)},
                       {"ranking_a", {{"metric_name", a.metric_name}, {"prompt_set_id", a.prompt_set_id}}},
                       {"ranking_b", {{"metric_name", b.metric_name}, {"prompt_set_id", b.prompt_set_id}}}},
                  c.output_dir / "stability.json");
}

void cmd_golden(const RunConfig& c) {
  const auto fid = quality::ranking_from_json(read_json_file(input(c, "fid")));
  const auto pref = quality::ranking_from_json(read_json_file(input(c, "preference")));
  auto pool = selection::golden_seeds(fid, pref, param<std::size_t>(c, "m"));
  write_json_file(selection::pool_to_json(pool), c.output_dir / "pool.json");
}

void cmd_diverse(const RunConfig& c) {
  const auto features = read_seed_features(input(c, "features"), input(c, "sidecar"));
  selection::FarthestPointOptions opts;
  opts.kind = selection::parse_pool_kind(param<std::string>(c, "kind"));
  if (auto first = optional_param<std::uint32_t>(c, "first_seed")) opts.first_seed = SeedId{*first};
  auto pool = selection::farthest_point_seeds(features, param<std::size_t>(c, "count"), c.rng_seed, opts);
  write_json_file(selection::pool_to_json(pool), c.output_dir / "pool.json");
}

void cmd_composition(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  const auto filter = string_set(c, "prompts");
  const auto policy_name = param<std::string>(c, "missing");
  composition::MissingPolicy policy;
  if (policy_name == "drop") {
    policy = composition::MissingPolicy::kDrop;
  } else if (policy_name == "impute") {
    policy = composition::MissingPolicy::kImpute;
  } else {
    throw Error(ErrorCode::kUsage, "unknown missing policy '" + policy_name + "' (drop|impute)");
  }
  const auto per_image = composition::load_composition(manifest, filter);
  std::vector<std::string> prompts;
  for (const auto& p : manifest.prompts) {
    if (filter.empty() || filter.contains(p.prompt_id)) prompts.push_back(p.prompt_id);
  }
  const std::vector<SeedId> seeds = manifest.seeds();
  const auto agg = composition::aggregate_seed_composition(per_image, seeds, prompts, policy);

  std::vector<std::uint32_t> row_seeds;
  std::vector<std::string> labels;
  for (const auto& s : agg.row_seeds) {
    row_seeds.push_back(s.value);
    labels.push_back(std::to_string(s.value));
  }
  json dropped = json::array();
  json imputed = json::object();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!agg.usable[i]) dropped.push_back(seeds[i].value);
    if (agg.imputed[i] > 0) imputed[std::to_string(seeds[i].value)] = agg.imputed[i];
  }
  if (agg.matrix.rows() > 0) {
    write_tensor(matrix_blob(agg.matrix), c.output_dir / "composition.sdlb");
  }
  std::string header = "seed";
  for (const auto& p : agg.prompts_used) {
    for (const char* f : {"cx", "cy", "size", "depth"}) header += "," + p + "." + f;
  }
  write_text(c.output_dir / "composition.csv", matrix_csv(agg.matrix, labels, header));
  write_json_file(json{{"row_seeds", row_seeds},
                       {"prompts_used", agg.prompts_used},
                       {"columns_per_prompt", {"cx", "cy", "size", "depth"}},
                       {"missing_policy", policy_name},
                       {"dropped_seeds", std::move(dropped)},
                       {"imputed_cells", std::move(imputed)}},
                  c.output_dir / "composition.json");
}

void cmd_inpaint_rank(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  std::set<PromptKind> kinds;
  for (const auto& k : param<std::vector<std::string>>(c, "kinds")) kinds.insert(parse_prompt_kind(k));
  const auto report = inpaint::rank_seeds_by_artifacts(manifest, param<double>(c, "min_confidence"), kinds);
  write_json_file(report.to_json(), c.output_dir / "artifact_report.json");
}

ddim::AnalyticDenoiser make_denoiser(const RunConfig& c, const ddim::DiffusionSchedule& schedule, std::size_t dim) {
  const auto kind = param<std::string>(c, "denoiser");
  if (kind == "point_mass") {
    auto center = param<std::vector<double>>(c, "center");
    if (center.empty()) center.assign(dim, 0.0);
    if (center.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "--center needs " + std::to_string(dim) + " values");
    return ddim::point_mass_denoiser(schedule, std::move(center));
  }
  if (kind == "mixture") {
    auto means = param<std::vector<std::vector<double>>>(c, "means");
    if (means.empty()) {
      means = {std::vector<double>(dim, 1.0), std::vector<double>(dim, -1.0)};
    }
    return ddim::gaussian_mixture_denoiser(schedule, std::move(means), param<double>(c, "variance"));
  }
  throw Error(ErrorCode::kUsage, "unknown denoiser '" + kind + "' (point_mass|mixture)");
}

void cmd_ddim_sim(const RunConfig& c) {
  const auto schedule = ddim::DiffusionSchedule::linear(param<int>(c, "steps"), param<double>(c, "eta"),
                                                        param<int>(c, "train_steps"), param<double>(c, "beta_start"),
                                                        param<double>(c, "beta_end"));
  ddim::SwapExperimentConfig cfg;
  cfg.seed_i = param<std::uint64_t>(c, "seed_i");
  cfg.seed_j = param<std::uint64_t>(c, "seed_j");
  cfg.swap_steps = param<std::vector<int>>(c, "swap_steps");
  cfg.dim = param<std::size_t>(c, "dim");
  cfg.mode = ddim::parse_resync_mode(param<std::string>(c, "resync"));
  if (cfg.swap_steps.empty()) throw Error(ErrorCode::kUsage, "ddim-sim needs at least one swap step");
  const auto denoiser = make_denoiser(c, schedule, cfg.dim);
  const auto report = ddim::seed_swap_experiment(denoiser, schedule, cfg);
  write_json_file(report.to_json(), c.output_dir / "swap_report.json");

  if (param<bool>(c, "dump_trajectory")) {
    ddim::NoiseStream stream(cfg.seed_i);
    const auto traj = ddim::sample(denoiser.predict, schedule, stream, cfg.dim);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(traj.states.size()), static_cast<Eigen::Index>(cfg.dim));
    for (std::size_t r = 0; r < traj.states.size(); ++r) {
      for (std::size_t k = 0; k < cfg.dim; ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = traj.states[r][k];
    }
    write_tensor(matrix_blob(m), c.output_dir / "baseline_trajectory.sdlb");
  }
}

void cmd_probe(const RunConfig& c) {
  const CorpusManifest manifest = load_manifest(input(c, "manifest"));
  auto train = string_set(c, "train_prompts");
  auto test = string_set(c, "test_prompts");
  if (train.empty() != test.empty()) {
    throw Error(ErrorCode::kUsage, "give both --train-prompts and --test-prompts, or neither");
  }
  if (train.empty()) {
    // Seeded shuffle of the prompt list, first half for training.
    std::vector<std::string> ids;
    for (const auto& p : manifest.prompts) ids.push_back(p.prompt_id);
    CounterRng rng(c.rng_seed, StreamId::kPromptSplit);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.next_index(i)]);
    const double frac = param<double>(c, "test_fraction");
    if (!(frac > 0.0 && frac < 1.0)) throw Error(ErrorCode::kUsage, "--test-fraction must lie in (0, 1)");
    const auto n_test = static_cast<std::size_t>(std::llround(frac * static_cast<double>(ids.size())));
    for (std::size_t i = 0; i < ids.size(); ++i) (i < n_test ? test : train).insert(ids[i]);
  }
  std::set<std::string> both = train;
  both.insert(test.begin(), test.end());
  const auto vectors = style::load_style_vectors(manifest, param<std::vector<std::string>>(c, "layers"), both);
  const auto result = quality::seed_probe_accuracy(vectors, train, test);
  write_json_file(json{{"accuracy", result.accuracy},
                       {"n_test", result.n_test},
                       {"n_seeds", result.n_seeds},
                       {"chance", result.n_seeds > 0 ? 1.0 / static_cast<double>(result.n_seeds) : 0.0},
                       {"degenerate", result.degenerate},
                       {"train_prompts", train},
                       {"test_prompts", test}},
                  c.output_dir / "probe.json");
}

void cmd_make_job(const RunConfig& c) {
  job::GenerationJob j;
  j.model_name = param<std::string>(c, "model_name");
  j.prompt_set_id = param<std::string>(c, "prompt_set_id");
  j.num_seeds = param<std::uint32_t>(c, "num_seeds");
  j.seeds = param<std::vector<std::uint32_t>>(c, "seeds");
  std::sort(j.seeds.begin(), j.seeds.end());
  j.scheduler.name = param<std::string>(c, "scheduler");
  j.scheduler.steps = param<int>(c, "steps");
  j.scheduler.eta = param<double>(c, "eta");
  j.artifacts = string_set(c, "artifacts");
  j.scores = string_set(c, "scores");
  j.output_root = param<std::string>(c, "output_root");
  // Either a bare list of prompt records or an object with a "prompts" list.
  json prompts = read_json_file(input(c, "prompt_file"));
  if (prompts.is_object() && prompts.contains("prompts")) prompts = prompts["prompts"];
  json doc = job::job_to_json(j);
  doc["prompts"] = std::move(prompts);
  j = job::parse_job(doc);
  job::save_job(j, c.output_dir / "job.json");
}

void cmd_check_job(const RunConfig& c) {
  const auto j = job::load_job(input(c, "job"));
  const auto report = job::check_corpus_against_job(j, load_manifest(input(c, "manifest")));
  write_json_file(report.to_json(), c.output_dir / "job_conformance.json");
  if (!report.ok()) {
    throw Error(ErrorCode::kValidation, std::to_string(report.problems.size()) +
                                            " conformance problem(s); first: " + report.problems.front());
  }
}

const std::map<std::string, std::function<void(const RunConfig&)>>& commands() {
  static const std::map<std::string, std::function<void(const RunConfig&)>> table = {
      {"validate", cmd_validate},   {"style-embed", cmd_style_embed},   {"fid-rank", cmd_fid_rank},
      {"score-rank", cmd_score_rank}, {"stability", cmd_stability},     {"golden", cmd_golden},
      {"diverse", cmd_diverse},     {"composition", cmd_composition},   {"inpaint-rank", cmd_inpaint_rank},
      {"ddim-sim", cmd_ddim_sim},   {"probe", cmd_probe},               {"make-job", cmd_make_job},
      {"check-job", cmd_check_job},
  };
  return table;
}

json provenance(const RunConfig& c) {
  json inputs = json::object();
  for (const auto& [role, path] : c.inputs) {
    inputs[role] = json{{"path", path.string()}, {"sha256", sha256_file(path)}, {"bytes", fs::file_size(path)}};
  }
  return json{{"toolkit", "seedlab"}, {"version", SEEDLAB_VERSION}, {"command", c.command}, {"inputs", std::move(inputs)}};
}

int exit_code(ErrorCode code) { return static_cast<int>(exit_category(code)); }

void print_error(std::ostream& err, ErrorCode code, const std::string& message) {
  err << json{{"error", std::string(error_name(code))}, {"message", message}, {"exit_code", exit_code(code)}}.dump()
      << '\n';
}

// ---- argument parsing ----

struct Flags {
  std::string out;
  std::uint64_t rng_seed = 0;
  std::string manifest;
  std::string prompts;
  std::string layers;
  std::string require;
  std::optional<double> perplexity;
  int iterations = 1000;
  std::size_t pca_dims = 50;
  std::string real_stats, real_features, divisor = "unbiased";
  std::string metric = "hpsv2";
  std::string ranking_a, ranking_b, ks = "16,64,256";
  std::string fid, preference;
  std::size_t m = 0;
  std::string features, sidecar, kind = "diverse_style";
  std::size_t count = 4;
  std::optional<std::uint32_t> first_seed;
  std::string missing = "drop";
  double min_confidence = inpaint::kDefaultMinConfidence;
  std::string kinds;
  int steps = 40, train_steps = 1000;
  double eta = 0.0, beta_start = 1e-4, beta_end = 0.02;
  std::string swap_steps = "10,20,30";
  std::uint64_t seed_i = 0, seed_j = 1;
  std::size_t dim = 2;
  std::string resync = "advanced", denoiser = "point_mass", center, means;
  double variance = 0.1;
  bool dump_trajectory = false;
  std::string train_prompts, test_prompts;
  double test_fraction = 0.5;
  std::string model, prompt_file, prompt_set, seeds, artifacts, scores = "hpsv2", scheduler = "ddim", output_root;
  std::uint32_t num_seeds = 1024;
  std::string job;
  std::string replay_config;
};

fs::path absolute_path(const std::string& p) { return fs::absolute(fs::path(p)).lexically_normal(); }

RunConfig build_config(const std::string& command, const Flags& f) {
  RunConfig c;
  c.command = command;
  c.rng_seed = f.rng_seed;
  c.output_dir = absolute_path(f.out);
  auto add_input = [&](const char* role, const std::string& p) {
    if (!p.empty()) c.inputs[role] = absolute_path(p);
  };
  add_input("manifest", f.manifest);
  json& p = c.params;
  if (command == "validate") {
    p["require"] = split(f.require, ',');
  } else if (command == "style-embed") {
    p["prompts"] = split(f.prompts, ',');
    p["layers"] = split(f.layers, ',');
    p["perplexity"] = f.perplexity ? json(*f.perplexity) : json(nullptr);
    p["iterations"] = f.iterations;
    p["pca_dims"] = f.pca_dims;
  } else if (command == "fid-rank") {
    add_input("real_stats", f.real_stats);
    add_input("real_features", f.real_features);
    p["prompts"] = split(f.prompts, ',');
    p["covariance_divisor"] = f.divisor;
  } else if (command == "score-rank") {
    p["prompts"] = split(f.prompts, ',');
    p["metric"] = f.metric;
  } else if (command == "stability") {
    add_input("ranking_a", f.ranking_a);
    add_input("ranking_b", f.ranking_b);
    p["ks"] = split_numbers<std::size_t>(f.ks);
  } else if (command == "golden") {
    add_input("fid", f.fid);
    add_input("preference", f.preference);
    p["m"] = f.m;
  } else if (command == "diverse") {
    add_input("features", f.features);
    std::string side = f.sidecar;
    if (side.empty() && !f.features.empty()) side = fs::path(f.features).replace_extension(".json").string();
    add_input("sidecar", side);
    p["count"] = f.count;
    p["kind"] = f.kind;
    p["first_seed"] = f.first_seed ? json(*f.first_seed) : json(nullptr);
  } else if (command == "composition") {
    p["prompts"] = split(f.prompts, ',');
    p["missing"] = f.missing;
  } else if (command == "inpaint-rank") {
    p["min_confidence"] = f.min_confidence;
    p["kinds"] = split(f.kinds, ',');
  } else if (command == "ddim-sim") {
    p["steps"] = f.steps;
    p["eta"] = f.eta;
    p["train_steps"] = f.train_steps;
    p["beta_start"] = f.beta_start;
    p["beta_end"] = f.beta_end;
    p["swap_steps"] = split_numbers<int>(f.swap_steps);
    p["seed_i"] = f.seed_i;
    p["seed_j"] = f.seed_j;
    p["dim"] = f.dim;
    p["resync"] = f.resync;
    p["denoiser"] = f.denoiser;
    p["center"] = split_numbers<double>(f.center);
    json means = json::array();
    for (const auto& m : split(f.means, ';')) means.push_back(split_numbers<double>(m));
    p["means"] = std::move(means);
    p["variance"] = f.variance;
    p["dump_trajectory"] = f.dump_trajectory;
  } else if (command == "probe") {
    p["layers"] = split(f.layers, ',');
    p["train_prompts"] = split(f.train_prompts, ',');
    p["test_prompts"] = split(f.test_prompts, ',');
    p["test_fraction"] = f.test_fraction;
  } else if (command == "make-job") {
    add_input("prompt_file", f.prompt_file);
    p["model_name"] = f.model;
    p["prompt_set_id"] = f.prompt_set;
    p["num_seeds"] = f.num_seeds;
    p["seeds"] = split_numbers<std::uint32_t>(f.seeds);
    p["scheduler"] = f.scheduler;
    p["steps"] = f.steps;
    p["eta"] = f.eta;
    p["artifacts"] = split(f.artifacts, ',');
    p["scores"] = split(f.scores, ',');
    p["output_root"] = f.output_root;
  } else if (command == "check-job") {
    add_input("job", f.job);
  }
  return c;
}

void add_manifest(CLI::App* sub, Flags& f) {
  sub->add_option("--manifest", f.manifest, "Corpus manifest JSON")->required();
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

json config_to_json(const RunConfig& c) {
  json inputs = json::object();
  for (const auto& [role, path] : c.inputs) inputs[role] = path.string();
  return json{{"command", c.command},
              {"inputs", std::move(inputs)},
              {"params", c.params},
              {"rng_seed", c.rng_seed},
              {"output_dir", c.output_dir.string()},
              {"version", SEEDLAB_VERSION}};
}

RunConfig config_from_json(const json& doc) {
  RunConfig c;
  try {
    c.command = doc.at("command").get<std::string>();
    for (const auto& [role, path] : doc.at("inputs").items()) c.inputs[role] = path.get<std::string>();
    c.params = doc.at("params");
    c.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    c.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed run config: ") + e.what());
  }
  if (!c.params.is_object()) throw Error(ErrorCode::kParse, "run config params must be an object");
  return c;
}

void execute(const RunConfig& config) {
  const auto& table = commands();
  auto it = table.find(config.command);
  if (it == table.end()) throw Error(ErrorCode::kUsage, "unknown command '" + config.command + "'");
  if (config.output_dir.empty()) throw Error(ErrorCode::kUsage, "no output directory");
  for (const auto& [role, path] : config.inputs) {
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::kIo, role + " input not found: " + path.string());
  }
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + config.output_dir.string() + ": " + ec.message());
  // Echo and provenance go first so a failed run can still be replayed.
  write_json_file(config_to_json(config), config.output_dir / kConfigFile);
  write_json_file(provenance(config), config.output_dir / kProvenanceFile);
  it->second(config);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seed analysis and seed selection for text-to-image diffusion corpora", "seedlab"};
  app.set_version_flag("--version", SEEDLAB_VERSION);
  app.require_subcommand(1);
  Flags f;

  std::map<std::string, CLI::App*> subs;
  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--out", f.out, "Output directory")->required();
    s->add_option("--rng-seed", f.rng_seed, "Seed for every random choice the command makes")->capture_default_str();
    subs[name] = s;
    return s;
  };

  auto* s = sub("validate", "Check that every image carries readable required artifacts");
  add_manifest(s, f);
  s->add_option("--require", f.require, "Comma-separated artifact kinds or keys");

  s = sub("style-embed", "Gram-matrix style vectors, PCA + t-SNE per image, then per seed");
  add_manifest(s, f);
  s->add_option("--layers", f.layers, "Comma-separated feature layers (default: all)");
  s->add_option("--prompts", f.prompts, "Comma-separated prompt ids (default: all)");
  s->add_option("--perplexity", f.perplexity, "t-SNE perplexity (default: min(30, (n-1)/3))");
  s->add_option("--iterations", f.iterations, "t-SNE iterations")->capture_default_str();
  s->add_option("--pca-dims", f.pca_dims, "PCA dimensions before t-SNE")->capture_default_str();

  s = sub("fid-rank", "Rank seeds by FID of their pooled embeddings against reference statistics");
  add_manifest(s, f);
  auto* rs = s->add_option("--real-stats", f.real_stats, "Reference statistics JSON {n, mean, cov}");
  auto* rf = s->add_option("--real-features", f.real_features, "Reference features [N, D] tensor file");
  rs->excludes(rf);
  s->add_option("--prompts", f.prompts, "Comma-separated prompt ids (default: all)");
  s->add_option("--covariance-divisor", f.divisor, "unbiased (n-1) or biased (n)")->capture_default_str();

  s = sub("score-rank", "Rank seeds by their mean preference score");
  add_manifest(s, f);
  s->add_option("--metric", f.metric, "Score name")->capture_default_str();
  s->add_option("--prompts", f.prompts, "Comma-separated prompt ids (default: all)");

  s = sub("stability", "Spearman correlation and top-k overlap between two rankings");
  s->add_option("--a", f.ranking_a, "First ranking JSON")->required();
  s->add_option("--b", f.ranking_b, "Second ranking JSON")->required();
  s->add_option("--ks", f.ks, "Comma-separated k values")->capture_default_str();

  s = sub("golden", "Seeds in the top m of both an FID and a preference ranking");
  s->add_option("--fid", f.fid, "FID ranking JSON")->required();
  s->add_option("--preference", f.preference, "Preference ranking JSON")->required();
  s->add_option("--m", f.m, "Top-m cutoff")->required();

  s = sub("diverse", "Farthest-point seed pool from per-seed features");
  s->add_option("--features", f.features, "Per-seed feature matrix tensor file")->required();
  s->add_option("--sidecar", f.sidecar, "JSON with row_seeds (default: features path with .json)");
  s->add_option("--count", f.count, "Pool size")->capture_default_str();
  s->add_option("--kind", f.kind, "diverse_style or diverse_composition")->capture_default_str();
  s->add_option("--first-seed", f.first_seed, "Fix the first pick instead of drawing it");

  s = sub("composition", "Per-seed (cx, cy, size, depth) composition features");
  add_manifest(s, f);
  s->add_option("--prompts", f.prompts, "Comma-separated prompt ids (default: all)");
  s->add_option("--missing", f.missing, "drop or impute seeds with NoObject cells")->capture_default_str();

  s = sub("inpaint-rank", "Rank seeds by how much OCR text lands inside the inpainting mask");
  add_manifest(s, f);
  s->add_option("--min-confidence", f.min_confidence, "OCR confidence cutoff")->capture_default_str();
  s->add_option("--kinds", f.kinds, "Comma-separated prompt kinds (default: all)");

  s = sub("ddim-sim", "Seed-swap experiment on a toy DDIM sampler");
  s->add_option("--steps", f.steps, "Sampling steps T")->capture_default_str();
  s->add_option("--eta", f.eta, "Stochasticity eta")->capture_default_str();
  s->add_option("--train-steps", f.train_steps, "Training schedule length")->capture_default_str();
  s->add_option("--beta-start", f.beta_start)->capture_default_str();
  s->add_option("--beta-end", f.beta_end)->capture_default_str();
  s->add_option("--swap-steps", f.swap_steps, "Comma-separated swap steps")->capture_default_str();
  s->add_option("--seed-i", f.seed_i, "Seed before the swap")->capture_default_str();
  s->add_option("--seed-j", f.seed_j, "Seed after the swap")->capture_default_str();
  s->add_option("--dim", f.dim, "Latent dimension")->capture_default_str();
  s->add_option("--resync", f.resync, "advanced or fresh")->capture_default_str();
  s->add_option("--denoiser", f.denoiser, "point_mass or mixture")->capture_default_str();
  s->add_option("--center", f.center, "Point-mass center, comma-separated (default: origin)");
  s->add_option("--means", f.means, "Mixture means, ';'-separated vectors (default: +-1)");
  s->add_option("--variance", f.variance, "Mixture component variance")->capture_default_str();
  s->add_flag("--dump-trajectory", f.dump_trajectory, "Also write the unswapped trajectory");

  s = sub("probe", "Nearest-centroid seed classifier on style vectors");
  add_manifest(s, f);
  s->add_option("--layers", f.layers, "Comma-separated feature layers (default: all)");
  s->add_option("--train-prompts", f.train_prompts, "Comma-separated prompt ids");
  s->add_option("--test-prompts", f.test_prompts, "Comma-separated prompt ids");
  s->add_option("--test-fraction", f.test_fraction, "Held-out share for a seeded random split")->capture_default_str();

  s = sub("make-job", "Write a generation job file for the model adapter");
  s->add_option("--model", f.model, "Model identifier")->required();
  s->add_option("--prompt-file", f.prompt_file, "JSON prompt records (a list, or an object with \"prompts\")")
      ->required();
  s->add_option("--prompt-set", f.prompt_set, "Prompt set id");
  s->add_option("--num-seeds", f.num_seeds, "Seed range [0, N)")->capture_default_str();
  s->add_option("--seeds", f.seeds, "Comma-separated subset of the range (default: all)");
  s->add_option("--scheduler", f.scheduler)->capture_default_str();
  s->add_option("--steps", f.steps, "Inference steps")->capture_default_str();
  s->add_option("--eta", f.eta)->capture_default_str();
  s->add_option("--artifacts", f.artifacts, "Comma-separated artifact kinds to extract");
  s->add_option("--scores", f.scores, "Comma-separated score names")->capture_default_str();
  s->add_option("--output-root", f.output_root, "Where the adapter writes the corpus");

  s = sub("check-job", "Check an adapter-written corpus against its job file");
  s->add_option("--job", f.job, "Job file")->required();
  add_manifest(s, f);

  CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its run_config.json");
  replay->add_option("config", f.replay_config, "run_config.json")->required();
  replay->add_option("--out", f.out, "Output directory (default: the recorded one)");

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, ErrorCode::kUsage, e.what());
    return exit_code(ErrorCode::kUsage);
  }

  try {
    RunConfig config;
    if (replay->parsed()) {
      config = config_from_json(read_json_file(f.replay_config));
      if (!f.out.empty()) config.output_dir = absolute_path(f.out);
    } else {
      for (const auto& [name, app_sub] : subs) {
        if (app_sub->parsed()) config = build_config(name, f);
      }
    }
    execute(config);
    out << json{{"status", "ok"}, {"command", config.command}, {"output_dir", config.output_dir.string()}}.dump() << '\n';
    return 0;
  } catch (const Error& e) {
    print_error(err, e.code(), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    print_error(err, ErrorCode::kIo, e.what());
    return exit_code(ErrorCode::kIo);
  }
}

}  // namespace seedlab::cli
