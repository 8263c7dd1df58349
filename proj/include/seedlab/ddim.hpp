#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seedlab/random.hpp"

namespace seedlab::ddim {

using Latent = std::vector<double>;

// Seeded standard-normal noise. Draw k of seed s is
// CounterRng(s, StreamId::kDiffusionNoise).normal_at(k), so a stream can be
// positioned anywhere without replaying earlier draws.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) noexcept : rng_(seed, StreamId::kDiffusionNoise) {}

  static double draw(std::uint64_t seed, std::uint64_t index) noexcept;

  double next() noexcept { return rng_.next_normal(); }
  void fill(std::span<double> out) noexcept;

  std::uint64_t seed() const noexcept { return rng_.seed(); }
  std::uint64_t position() const noexcept { return rng_.normals_consumed(); }
  void seek(std::uint64_t index) noexcept { rng_.seek_normal(index); }

 private:
  CounterRng rng_;
};

// alpha_bar[t] for t = 0..T, non-increasing in t; alpha_bar[0] belongs to the
// clean sample x_0 and alpha_bar[T] to the initial latent x_T.
struct DiffusionSchedule {
  std::vector<double> alpha_bar;
  double eta = 0.0;
  nlohmann::json params = nlohmann::json::object();

  int steps() const noexcept { return static_cast<int>(alpha_bar.size()) - 1; }

  // Linear beta ramp over `train_steps` training steps. Sampling step t >= 1
  // uses training index (t - 1) * (train_steps / steps); alpha_bar[0] = 1.
  static DiffusionSchedule linear(int steps, double eta, int train_steps = 1000, double beta_start = 1e-4,
                                  double beta_end = 0.02);
  // Validates monotonicity and range; throws ScheduleError.
  static DiffusionSchedule from_alpha_bar(std::vector<double> alpha_bar, double eta);

  nlohmann::json to_json() const;
};

// sigma_t = eta * sqrt((1 - a_{t-1}) / (1 - a_t)) * sqrt(1 - a_t / a_{t-1}).
double ddim_sigma(const DiffusionSchedule& schedule, int t);

// One reverse step from x_t to x_{t-1}:
//   x0_hat  = (x_t - sqrt(1 - a_t) eps) / sqrt(a_t)
//   x_{t-1} = sqrt(a_{t-1}) x0_hat + sqrt(1 - a_{t-1} - sigma_t^2) eps + sigma_t z
// evaluated in coefficient form so that a_{t-1} = a_t, eta = 0, eps = 0 is an
// exact identity. `z` may be empty when sigma_t is 0.
Latent ddim_step(std::span<const double> x_t, int t, std::span<const double> eps_hat,
                 const DiffusionSchedule& schedule, std::span<const double> z);

// Predicts the noise component of x_t at sampling step t.
using Denoiser = std::function<Latent(std::span<const double> x_t, int t)>;

struct AnalyticDenoiser {
  Denoiser predict;
  nlohmann::json description;
};

// Exact noise prediction when the data distribution is a point mass at `center`.
AnalyticDenoiser point_mass_denoiser(const DiffusionSchedule& schedule, Latent center);

// Posterior-mean noise prediction for an isotropic Gaussian mixture with
// component means `means`, shared variance `variance` and mixing `weights`
// (uniform when empty).
AnalyticDenoiser gaussian_mixture_denoiser(const DiffusionSchedule& schedule, std::vector<Latent> means,
                                           double variance, std::vector<double> weights = {});

struct SwapRecord {
  int swap_step = 0;
  std::uint64_t seed_i = 0;
  std::uint64_t seed_j = 0;
};

struct DdimTrajectory {
  std::vector<Latent> states;  // states[k] is x_{T-k}; states.back() is x_0
  std::optional<SwapRecord> swap;
  std::uint64_t draws_consumed = 0;

  const Latent& final_state() const { return states.back(); }
};

// Draw order: x_T takes the first `dim` draws, then, only when eta > 0, each
// step t = T, T-1, ..., 1 takes the next `dim` draws for z.
DdimTrajectory sample(const Denoiser& denoiser, const DiffusionSchedule& schedule, NoiseStream& stream, std::size_t dim);

// How the second seed's stream is positioned when the swap happens.
enum class ResyncMode {
  kAdvanced,  // at the draw index a single-seed run would have reached
  kFresh,     // at draw 0, as if the generator were re-seeded
};

std::string_view to_string(ResyncMode mode) noexcept;
ResyncMode parse_resync_mode(std::string_view text);

// x_T and the z of steps T..swap_step+1 come from seed_i; steps swap_step..1
// draw from seed_j. swap_step must lie in [1, T].
DdimTrajectory sample_with_swap(const Denoiser& denoiser, const DiffusionSchedule& schedule, std::uint64_t seed_i,
                                std::uint64_t seed_j, int swap_step, std::size_t dim,
                                ResyncMode mode = ResyncMode::kAdvanced);

struct SwapExperimentConfig {
  std::uint64_t seed_i = 0;
  std::uint64_t seed_j = 1;
  std::vector<int> swap_steps;
  std::size_t dim = 2;
  ResyncMode mode = ResyncMode::kAdvanced;
};

struct SwapPoint {
  int swap_step = 0;
  double divergence = 0;          // seed_i -> seed_j
  double control_divergence = 0;  // seed_i -> seed_i
};

struct SwapReport {
  SwapExperimentConfig config;
  nlohmann::json schedule;
  nlohmann::json denoiser;
  std::vector<SwapPoint> points;
  Latent baseline_final;
  std::uint64_t baseline_draws = 0;
  // "relative" divides by |x_0| of the unswapped run; "absolute" is used when
  // that norm is zero.
  std::string normalizer = "relative";

  nlohmann::json to_json() const;
};

// Divergence |x_0(swap) - x_0(no swap)| / |x_0(no swap)| of the final state
// for every swap step, plus the seed_i = seed_j control.
SwapReport seed_swap_experiment(const AnalyticDenoiser& denoiser, const DiffusionSchedule& schedule,
                                const SwapExperimentConfig& config);

struct SwapCurve {
  std::vector<int> swap_steps;
  std::vector<double> mean_divergence;
  std::vector<double> max_divergence;
  std::size_t pairs = 0;

  nlohmann::json to_json() const;
};

// Mean and max divergence per swap step over the given (seed_i, seed_j) pairs.
SwapCurve seed_swap_curve(const AnalyticDenoiser& denoiser, const DiffusionSchedule& schedule,
                          std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs,
                          const std::vector<int>& swap_steps, std::size_t dim,
                          ResyncMode mode = ResyncMode::kAdvanced);

}  // namespace seedlab::ddim
