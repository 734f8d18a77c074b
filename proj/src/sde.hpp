#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "inverse.hpp"
#include "nnet.hpp"
#include "phantom.hpp"

namespace eit {

// Variance-exploding forward process: zero drift, geometric noise scale
// sigma(t) = sigma_min (sigma_max / sigma_min)^t on t in [0, 1], discretized
// on a K-step grid.
struct SdeSchedule {
  double sigma_min = 0.01;
  double sigma_max = 50.0;
  int K = 1000;
};

double ve_sigma(const SdeSchedule& schedule, double t);

// diffusion coefficient g(t) = sigma(t) sqrt(2 ln(sigma_max / sigma_min)),
// chosen so that int_0^t g^2 = sigma(t)^2 - sigma(0)^2
double ve_g(const SdeSchedule& schedule, double t);

// perturbation-kernel standard deviation sqrt(sigma(t)^2 - sigma(0)^2)
double ve_std(const SdeSchedule& schedule, double t);

// score estimate: (x, t) -> approximately grad_x log p_t(x)
using ScoreFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// Denoising score matching on one sampled batch: per sample draws t ~ U(0,1)
// and eps ~ N(0,I), perturbs x_t = x0 + std(t) eps, and accumulates the
// std(t)^2-weighted match in its stable factored form |std(t) s(x_t,t)+eps|^2.
// The net takes (x, t) with t appended as a final input coordinate and emits
// the score directly. Returns the batch-mean loss and its exact parameter
// gradients. Draw order per sample: t first, then the eps components.
std::pair<double, GradientSet> dsm_loss(const DenseNet& score_net,
                                        const std::vector<Eigen::VectorXd>& batch,
                                        const SdeSchedule& schedule, Rng& rng);

// Deterministic single-sample variant with (t, eps) supplied by the caller;
// used to inject oracles.
double dsm_loss_at(const DenseNet& score_net, const Eigen::VectorXd& x0, double t,
                   const Eigen::VectorXd& eps, const SdeSchedule& schedule);

// Exact marginal score for p0 = N(mean, var0 I) under the forward process:
// (x, t) -> -(x - mean) / (var0 + sigma(t)^2 - sigma(0)^2).
ScoreFunction analytic_gaussian_score(const Eigen::VectorXd& mean, double var0,
                                      const SdeSchedule& schedule);

// Wraps a trained net as a ScoreFunction.
ScoreFunction score_as_function(const DenseNet& net);

// Predictor-corrector sampler: starts at x ~ N(0, sigma_max^2 I); each step i
// from K-1 down to 0 applies the Euler reverse-diffusion predictor at
// t = (i+1)/K (x += g^2 score dt, then g sqrt(dt) noise) and then
// corrector_steps annealed-Langevin updates (x += alpha score + sqrt(2 alpha) z)
// at t = i/K with step size alpha = 2 (corrector_snr * sigma(t))^2, annealed to
// the noise scale so the corrector fades as t -> 0. One rng stream: the initial
// state, then per step the predictor noise followed by each corrector noise.
// Throws numeric_error (with the step index) if the state leaves the finite
// range.
Eigen::VectorXd pc_sample(const ScoreFunction& score, const SdeSchedule& schedule,
                          int K, int corrector_steps, double corrector_snr, int dim,
                          uint64_t seed);

// Hijacked sampler: runs only the last K_prime steps of the K-step grid,
// starting from an externally supplied state (a rasterized Gauss-Newton
// reconstruction); K_prime = 0 returns that state untouched.
struct CsdStarConfig {
  int K = 1000;
  int K_prime = 600;  // 0..K; the documented operating range is [500, 650]
  Eigen::VectorXd sigma_gn;
  int corrector_steps = 1;
  double corrector_snr = 0.16;
};

Eigen::VectorXd csd_star_sample(const ScoreFunction& score, const CsdStarConfig& config,
                                const SdeSchedule& schedule, uint64_t seed);

// Rasterization target for the pipeline output.
struct RasterContext {
  int grid_side = 128;
  double idw_power = 2.0;
  int idw_neighbors = 6;
  double outside_fill = 1.0;
};

// reconstruct -> rasterize -> flatten -> csd_star_sample -> reshape. The
// rasterized reconstruction replaces config.sigma_gn, which is ignored. Errors
// from the stages are rethrown with a stage label prefix.
PixelImage csd_star_pipeline(const MeasurementVector& v, const Mesh& mesh,
                             const std::vector<double>& contact_impedances,
                             const Protocol& protocol, const InverseConfig& inv_config,
                             const ScoreFunction& score, const CsdStarConfig& config,
                             const SdeSchedule& schedule, const RasterContext& raster,
                             uint64_t seed);

// Minibatch DSM training of a fresh tanh net (dims {dim+1, hidden..., dim}).
struct DsmTrainConfig {
  int steps = 5000;
  int batch_size = 64;
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  double momentum = 0.9;
  uint64_t seed = 0;
};

DenseNet train_dsm_score(const std::vector<Eigen::VectorXd>& data,
                         const SdeSchedule& schedule, const DsmTrainConfig& config);

// Score checkpoint: schedule parameters plus the net in the usual layout.
void save_score_checkpoint(const DenseNet& net, const SdeSchedule& schedule,
                           const std::string& path);
std::pair<DenseNet, SdeSchedule> load_score_checkpoint(const std::string& path);

// Two-mode 2-D Gaussian-mixture toy: modes (+-1.5, 0), std 0.4, weights
// 0.65 / 0.35.
std::vector<Eigen::VectorXd> sample_gmm2d(int n, uint64_t seed);

// Exact marginal score of the toy mixture under the forward process.
ScoreFunction analytic_gmm2d_score(const SdeSchedule& schedule);

// Flattened side*side phantom images painted analytically at pixel centers:
// the value of the last covering circle, background elsewhere and outside the
// disk. Record i draws its phantom with seed + i, matching dataset numbering.
std::vector<Eigen::VectorXd> sample_phantom_images(PhantomKind kind, int n, int side,
                                                   uint64_t seed);

}  // namespace eit
