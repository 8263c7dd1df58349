#include "seedlab/ddim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seedlab/error.hpp"

namespace seedlab::ddim {

using nlohmann::json;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_step(const DiffusionSchedule& schedule, int t) {
  if (t < 1 || t > schedule.steps()) {
    throw Error(ErrorCode::kSchedule, "step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) + "]");
  }
}

// Runs the reverse process; `noise_for_step(t, z)` fills z for step t when eta > 0.
template <typename NoiseFn>
DdimTrajectory run(const Denoiser& denoiser, const DiffusionSchedule& schedule, Latent x_T, NoiseFn&& noise_for_step) {
  DdimTrajectory traj;
  const std::size_t dim = x_T.size();
  traj.draws_consumed = dim;
  traj.states.reserve(static_cast<std::size_t>(schedule.steps()) + 1);
  traj.states.push_back(std::move(x_T));
  Latent z;
  for (int t = schedule.steps(); t >= 1; --t) {
    const Latent& x = traj.states.back();
    const Latent eps = denoiser(x, t);
    if (eps.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "denoiser returned a prediction of the wrong size");
    }
    if (schedule.eta > 0.0) {
      z.resize(dim);
      noise_for_step(t, std::span<double>(z));
      traj.draws_consumed += dim;
    } else {
      z.clear();
    }
    traj.states.push_back(ddim_step(x, t, eps, schedule, z));
  }
  return traj;
}

}  // namespace

double NoiseStream::draw(std::uint64_t seed, std::uint64_t index) noexcept {
  return CounterRng(seed, StreamId::kDiffusionNoise).normal_at(index);
}

void NoiseStream::fill(std::span<double> out) noexcept {
  for (double& v : out) v = next();
}

DiffusionSchedule DiffusionSchedule::linear(int steps, double eta, int train_steps, double beta_start, double beta_end) {
  if (steps < 1 || train_steps < steps) {
    throw Error(ErrorCode::kSchedule, "need 1 <= steps <= train_steps");
  }
  if (!(beta_start > 0.0 && beta_end >= beta_start && beta_end < 1.0)) {
    throw Error(ErrorCode::kSchedule, "betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> train(static_cast<std::size_t>(train_steps));
  double prod = 1.0;
  for (int k = 0; k < train_steps; ++k) {
    const double beta =
        train_steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * k / static_cast<double>(train_steps - 1);
    prod *= 1.0 - beta;
    train[static_cast<std::size_t>(k)] = prod;
  }
  const int ratio = train_steps / steps;
  std::vector<double> alpha_bar(static_cast<std::size_t>(steps) + 1);
  alpha_bar[0] = 1.0;
  for (int t = 1; t <= steps; ++t) alpha_bar[static_cast<std::size_t>(t)] = train[static_cast<std::size_t>((t - 1) * ratio)];

  DiffusionSchedule s = from_alpha_bar(std::move(alpha_bar), eta);
  s.params = json{{"kind", "linear_beta"},
                  {"steps", steps},
                  {"train_steps", train_steps},
                  {"beta_start", beta_start},
                  {"beta_end", beta_end},
                  {"spacing", "leading"}};
  return s;
}

DiffusionSchedule DiffusionSchedule::from_alpha_bar(std::vector<double> alpha_bar, double eta) {
  if (alpha_bar.size() < 2) {
    throw Error(ErrorCode::kSchedule, "schedule needs at least one step");
  }
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::kSchedule, "eta must be a finite non-negative number");
  }
  for (std::size_t t = 0; t < alpha_bar.size(); ++t) {
    if (!(alpha_bar[t] > 0.0 && alpha_bar[t] <= 1.0)) {
      throw Error(ErrorCode::kSchedule, "alpha_bar values must lie in (0, 1]");
    }
    if (t > 0 && alpha_bar[t] > alpha_bar[t - 1]) {
      throw Error(ErrorCode::kSchedule, "alpha_bar must be non-increasing in t");
    }
  }
  DiffusionSchedule s;
  s.alpha_bar = std::move(alpha_bar);
  s.eta = eta;
  s.params = json{{"kind", "explicit"}, {"steps", s.steps()}};
  return s;
}

json DiffusionSchedule::to_json() const {
  json j = params;
  j["eta"] = eta;
  j["alpha_bar"] = alpha_bar;
  return j;
}

double ddim_sigma(const DiffusionSchedule& schedule, int t) {
  check_step(schedule, t);
  if (schedule.eta == 0.0) return 0.0;
  const double a_t = schedule.alpha_bar[static_cast<std::size_t>(t)];
  const double a_prev = schedule.alpha_bar[static_cast<std::size_t>(t - 1)];
  if (a_t == 1.0) return 0.0;
  return schedule.eta * std::sqrt((1.0 - a_prev) / (1.0 - a_t)) * std::sqrt(std::max(0.0, 1.0 - a_t / a_prev));
}

Latent ddim_step(std::span<const double> x_t, int t, std::span<const double> eps_hat,
                 const DiffusionSchedule& schedule, std::span<const double> z) {
  const double sigma = ddim_sigma(schedule, t);
  if (eps_hat.size() != x_t.size() || (sigma != 0.0 && z.size() != x_t.size()) || (!z.empty() && z.size() != x_t.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "ddim_step operands differ in length");
  }
  const double a_t = schedule.alpha_bar[static_cast<std::size_t>(t)];
  const double a_prev = schedule.alpha_bar[static_cast<std::size_t>(t - 1)];
  double dir_var = 1.0 - a_prev - sigma * sigma;
  if (dir_var < -1e-12) {
    throw Error(ErrorCode::kSchedule, "1 - alpha_bar[t-1] - sigma^2 = " + std::to_string(dir_var) + " < 0 at step " +
                                          std::to_string(t) + " (eta too large)");
  }
  dir_var = std::max(dir_var, 0.0);

  const double c_x = std::sqrt(a_prev / a_t);
  const double c_eps = std::sqrt(dir_var) - std::sqrt(a_prev) * std::sqrt(1.0 - a_t) / std::sqrt(a_t);
  Latent out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    out[i] = c_x * x_t[i] + c_eps * eps_hat[i];
    if (sigma != 0.0) out[i] += sigma * z[i];
  }
  return out;
}

AnalyticDenoiser point_mass_denoiser(const DiffusionSchedule& schedule, Latent center) {
  AnalyticDenoiser d;
  d.description = json{{"kind", "point_mass"}, {"center", center}};
  d.predict = [alpha_bar = schedule.alpha_bar, center = std::move(center)](std::span<const double> x, int t) {
    if (x.size() != center.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "latent and point-mass center differ in length");
    }
    const double a = alpha_bar.at(static_cast<std::size_t>(t));
    Latent eps(x.size(), 0.0);
    if (a < 1.0) {
      const double sa = std::sqrt(a);
      const double sn = std::sqrt(1.0 - a);
      for (std::size_t i = 0; i < x.size(); ++i) eps[i] = (x[i] - sa * center[i]) / sn;
    }
    return eps;
  };
  return d;
}

AnalyticDenoiser gaussian_mixture_denoiser(const DiffusionSchedule& schedule, std::vector<Latent> means, double variance,
                                           std::vector<double> weights) {
  if (means.empty()) {
    throw Error(ErrorCode::kValidation, "mixture needs at least one component");
  }
  if (!(variance >= 0.0)) {
    throw Error(ErrorCode::kValidation, "mixture variance must be non-negative");
  }
  if (weights.empty()) weights.assign(means.size(), 1.0 / static_cast<double>(means.size()));
  if (weights.size() != means.size() ||
      std::any_of(weights.begin(), weights.end(), [](double w) { return !(w > 0.0); })) {
    throw Error(ErrorCode::kValidation, "mixture weights must be positive, one per component");
  }
  for (const auto& m : means) {
    if (m.size() != means.front().size()) {
      throw Error(ErrorCode::kDimensionMismatch, "mixture means differ in length");
    }
  }

  AnalyticDenoiser d;
  d.description = json{{"kind", "gaussian_mixture"}, {"means", means}, {"variance", variance}, {"weights", weights}};
  std::vector<double> log_w;
  for (double w : weights) log_w.push_back(std::log(w));
  d.predict = [alpha_bar = schedule.alpha_bar, means = std::move(means), variance,
               log_w = std::move(log_w)](std::span<const double> x, int t) {
    const std::size_t dim = x.size();
    if (dim != means.front().size()) {
      throw Error(ErrorCode::kDimensionMismatch, "latent and mixture means differ in length");
    }
    const double a = alpha_bar.at(static_cast<std::size_t>(t));
    const double sa = std::sqrt(a);
    const double v = a * variance + (1.0 - a);
    Latent eps(dim, 0.0);
    if (v <= 0.0 || a >= 1.0) return eps;

    // Responsibilities under the noised marginal N(sqrt(a) m_k, v I).
    std::vector<double> logp(means.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < means.size(); ++k) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d2 += (x[i] - sa * means[k][i]) * (x[i] - sa * means[k][i]);
      logp[k] = log_w[k] - 0.5 * d2 / v;
      top = std::max(top, logp[k]);
    }
    double z = 0.0;
    for (double& lp : logp) {
      lp = std::exp(lp - top);
      z += lp;
    }
    // E[eps | x_t] = sqrt(1 - a) * sum_k r_k (x - sqrt(a) m_k) / v
    const double scale = std::sqrt(1.0 - a) / v;
    for (std::size_t k = 0; k < means.size(); ++k) {
      const double r = logp[k] / z;
      for (std::size_t i = 0; i < dim; ++i) eps[i] += scale * r * (x[i] - sa * means[k][i]);
    }
    return eps;
  };
  return d;
}

DdimTrajectory sample(const Denoiser& denoiser, const DiffusionSchedule& schedule, NoiseStream& stream, std::size_t dim) {
  if (dim == 0) {
    throw Error(ErrorCode::kDimension, "latent dimension must be positive");
  }
  Latent x_T(dim);
  stream.fill(x_T);
  return run(denoiser, schedule, std::move(x_T), [&](int, std::span<double> z) { stream.fill(z); });
}

std::string_view to_string(ResyncMode mode) noexcept { return mode == ResyncMode::kAdvanced ? "advanced" : "fresh"; }

ResyncMode parse_resync_mode(std::string_view text) {
  if (text == "advanced") return ResyncMode::kAdvanced;
  if (text == "fresh") return ResyncMode::kFresh;
  throw Error(ErrorCode::kUsage, "unknown resync mode '" + std::string(text) + "' (advanced|fresh)");
}

DdimTrajectory sample_with_swap(const Denoiser& denoiser, const DiffusionSchedule& schedule, std::uint64_t seed_i,
                                std::uint64_t seed_j, int swap_step, std::size_t dim, ResyncMode mode) {
  if (swap_step < 1 || swap_step > schedule.steps()) {
    throw Error(ErrorCode::kValidation, "swap step " + std::to_string(swap_step) + " outside [1, " +
                                            std::to_string(schedule.steps()) + "]");
  }
  if (dim == 0) {
    throw Error(ErrorCode::kDimension, "latent dimension must be positive");
  }
  NoiseStream first(seed_i);
  NoiseStream second(seed_j);
  bool swapped = false;
  Latent x_T(dim);
  first.fill(x_T);
  const int steps = schedule.steps();
  auto traj = run(denoiser, schedule, std::move(x_T), [&](int t, std::span<double> z) {
    if (t > swap_step) {
      first.fill(z);
      return;
    }
    if (!swapped) {
      swapped = true;
      const auto from_scratch = static_cast<std::uint64_t>(dim) * (1 + static_cast<std::uint64_t>(steps - t));
      second.seek(mode == ResyncMode::kAdvanced ? from_scratch : 0);
    }
    second.fill(z);
  });
  traj.swap = SwapRecord{swap_step, seed_i, seed_j};
  return traj;
}

json SwapReport::to_json() const {
  json points_json = json::array();
  for (const auto& p : points) {
    points_json.push_back(
        json{{"swap_step", p.swap_step}, {"divergence", p.divergence}, {"control_divergence", p.control_divergence}});
  }
  return json{{"seed_i", config.seed_i},
              {"seed_j", config.seed_j},
              {"dim", config.dim},
              {"resync_mode", to_string(config.mode)},
              {"swap_steps", config.swap_steps},
              {"schedule", schedule},
              {"denoiser", denoiser},
              {"normalizer", normalizer},
              {"baseline_final", baseline_final},
              {"baseline_draws", baseline_draws},
              {"points", std::move(points_json)}};
}

SwapReport seed_swap_experiment(const AnalyticDenoiser& denoiser, const DiffusionSchedule& schedule,
                                const SwapExperimentConfig& config) {
  SwapReport report;
  report.config = config;
  report.schedule = schedule.to_json();
  report.denoiser = denoiser.description;

  NoiseStream base_stream(config.seed_i);
  const DdimTrajectory base = sample(denoiser.predict, schedule, base_stream, config.dim);
  report.baseline_final = base.final_state();
  report.baseline_draws = base.draws_consumed;
  const double base_norm = norm(base.final_state());
  if (base_norm == 0.0) report.normalizer = "absolute";

  const auto divergence = [&](const DdimTrajectory& t) {
    const double d = distance(t.final_state(), base.final_state());
    return base_norm > 0.0 ? d / base_norm : d;
  };
  for (int s : config.swap_steps) {
    SwapPoint p;
    p.swap_step = s;
    p.divergence =
        divergence(sample_with_swap(denoiser.predict, schedule, config.seed_i, config.seed_j, s, config.dim, config.mode));
    p.control_divergence =
        divergence(sample_with_swap(denoiser.predict, schedule, config.seed_i, config.seed_i, s, config.dim, config.mode));
    report.points.push_back(p);
  }
  return report;
}

json SwapCurve::to_json() const {
  return json{{"swap_steps", swap_steps},
              {"mean_divergence", mean_divergence},
              {"max_divergence", max_divergence},
              {"pairs", pairs}};
}

SwapCurve seed_swap_curve(const AnalyticDenoiser& denoiser, const DiffusionSchedule& schedule,
                          std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs,
                          const std::vector<int>& swap_steps, std::size_t dim, ResyncMode mode) {
  SwapCurve curve;
  curve.swap_steps = swap_steps;
  curve.mean_divergence.assign(swap_steps.size(), 0.0);
  curve.max_divergence.assign(swap_steps.size(), 0.0);
  curve.pairs = pairs.size();
  for (const auto& [i, j] : pairs) {
    const SwapReport r = seed_swap_experiment(denoiser, schedule, {i, j, swap_steps, dim, mode});
    for (std::size_t k = 0; k < swap_steps.size(); ++k) {
      curve.mean_divergence[k] += r.points[k].divergence;
      curve.max_divergence[k] = std::max(curve.max_divergence[k], r.points[k].divergence);
    }
  }
  if (!pairs.empty()) {
    for (double& m : curve.mean_divergence) m /= static_cast<double>(pairs.size());
  }
  return curve;
}

}  // namespace seedlab::ddim
