#include "sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace eit {

namespace {

// toy-mixture constants: mode 0 at (+1.5, 0) with weight 0.65, mode 1 at
// (-1.5, 0) with weight 0.35, both isotropic with std 0.4
constexpr double kGmmSep = 1.5;
constexpr double kGmmStd = 0.4;
constexpr double kGmmWeight0 = 0.65;

void check_schedule(const SdeSchedule& s) {
  if (!std::isfinite(s.sigma_min) || !std::isfinite(s.sigma_max) ||
      !(s.sigma_min > 0.0) || !(s.sigma_max > s.sigma_min))
    throw std::invalid_argument("noise schedule requires 0 < sigma_min < sigma_max");
  if (s.K < 1) throw std::invalid_argument("noise schedule requires K >= 1");
}

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("diffusion time must lie in [0, 1]");
}

void check_corrector(int corrector_steps, double corrector_snr) {
  if (corrector_steps < 0) throw std::invalid_argument("corrector_steps must be >= 0");
  if (corrector_steps > 0 && !(std::isfinite(corrector_snr) && corrector_snr > 0.0))
    throw std::invalid_argument("corrector_snr must be positive");
}

void check_score_net(const DenseNet& net) {
  if (net.layers.empty() || net.input_dim() != net.output_dim() + 1)
    throw std::invalid_argument(
        "a score net must map (x, t) to a score with the dimension of x");
}

void fill_normal(Rng& rng, Eigen::VectorXd& z) {
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
}

// Steps i = n_steps-1 down to 0 of the K-step grid. Per step: reverse-diffusion
// predictor at t = (i+1)/K, then corrector_steps annealed-Langevin updates at
// t = i/K with step size alpha = 2 (corrector_snr * sigma(t))^2, which fades
// with the noise scale so the corrector shuts off as t -> 0. (A step size set
// from the sampled |z|/|score| ratio is unstable for a single chain: it
// diverges whenever the chain crosses the score's zero.) The rng is consumed
// in a fixed order: one noise vector per predictor, then one per corrector
// update.
void reverse_steps(const ScoreFunction& score, const SdeSchedule& schedule, int K,
                   int n_steps, int corrector_steps, double corrector_snr,
                   Eigen::VectorXd& x, Rng& rng, const char* who) {
  const int dim = int(x.size());
  const double dt = 1.0 / double(K);
  Eigen::VectorXd z(dim);
  for (int i = n_steps - 1; i >= 0; --i) {
    const double t_hi = double(i + 1) / double(K);
    const double g = ve_g(schedule, t_hi);
    Eigen::VectorXd grad = score(x, t_hi);
    if (int(grad.size()) != dim)
      throw std::invalid_argument(std::string(who) + ": score dimension mismatch");
    fill_normal(rng, z);
    x += (g * g * dt) * grad;
    x += (g * std::sqrt(dt)) * z;
    if (!x.allFinite())
      throw numeric_error(std::string(who) + ": non-finite state at step " +
                          std::to_string(i));
    if (corrector_steps == 0) continue;
    const double t_lo = double(i) / double(K);
    const double s_lo = ve_sigma(schedule, t_lo);
    const double alpha = 2.0 * corrector_snr * corrector_snr * s_lo * s_lo;
    const double noise_scale = std::sqrt(2.0 * alpha);
    for (int c = 0; c < corrector_steps; ++c) {
      grad = score(x, t_lo);
      if (int(grad.size()) != dim)
        throw std::invalid_argument(std::string(who) + ": score dimension mismatch");
      fill_normal(rng, z);
      x += alpha * grad;
      x += noise_scale * z;
      if (!x.allFinite())
        throw numeric_error(std::string(who) + ": non-finite state at step " +
                            std::to_string(i));
    }
  }
}

template <typename F>
auto run_stage(const char* label, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const io_error& e) {
    throw io_error(std::string(label) + " stage: " + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(std::string(label) + " stage: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(label) + " stage: " + e.what());
  }
}

}  // namespace

double ve_sigma(const SdeSchedule& schedule, double t) {
  check_schedule(schedule);
  check_time(t);
  return schedule.sigma_min * std::pow(schedule.sigma_max / schedule.sigma_min, t);
}

double ve_g(const SdeSchedule& schedule, double t) {
  return ve_sigma(schedule, t) *
         std::sqrt(2.0 * std::log(schedule.sigma_max / schedule.sigma_min));
}

double ve_std(const SdeSchedule& schedule, double t) {
  const double st = ve_sigma(schedule, t);
  return std::sqrt(std::max(0.0, st * st - schedule.sigma_min * schedule.sigma_min));
}

std::pair<double, GradientSet> dsm_loss(const DenseNet& score_net,
                                        const std::vector<Eigen::VectorXd>& batch,
                                        const SdeSchedule& schedule, Rng& rng) {
  check_schedule(schedule);
  check_score_net(score_net);
  if (batch.empty()) throw std::invalid_argument("dsm_loss requires a non-empty batch");
  const int dim = score_net.output_dim();
  for (const auto& x0 : batch)
    if (int(x0.size()) != dim)
      throw std::invalid_argument("dsm_loss: sample dimension does not match the score net");
  GradientSet grads = zero_gradients(score_net);
  const double inv_n = 1.0 / double(batch.size());
  double total = 0.0;
  Eigen::VectorXd input(dim + 1), eps(dim);
  for (const auto& x0 : batch) {
    const double t = rng.uniform();
    for (int j = 0; j < dim; ++j) eps[j] = rng.normal();
    const double sd = ve_std(schedule, t);
    input.head(dim) = x0 + sd * eps;
    input[dim] = t;
    const Eigen::VectorXd out = net_forward(score_net, input);
    const Eigen::VectorXd resid = sd * out + eps;
    total += resid.squaredNorm();
    auto [g, dx] = net_backward(score_net, input, (2.0 * sd) * resid);
    accumulate_gradients(grads, g, inv_n);
  }
  total *= inv_n;
  if (!std::isfinite(total)) throw numeric_error("dsm_loss: non-finite loss");
  return {total, std::move(grads)};
}

double dsm_loss_at(const DenseNet& score_net, const Eigen::VectorXd& x0, double t,
                   const Eigen::VectorXd& eps, const SdeSchedule& schedule) {
  check_schedule(schedule);
  check_score_net(score_net);
  check_time(t);
  const int dim = score_net.output_dim();
  if (int(x0.size()) != dim || eps.size() != x0.size())
    throw std::invalid_argument("dsm_loss_at: dimension mismatch");
  const double sd = ve_std(schedule, t);
  Eigen::VectorXd input(dim + 1);
  input.head(dim) = x0 + sd * eps;
  input[dim] = t;
  const double loss = (sd * net_forward(score_net, input) + eps).squaredNorm();
  if (!std::isfinite(loss)) throw numeric_error("dsm_loss_at: non-finite loss");
  return loss;
}

ScoreFunction analytic_gaussian_score(const Eigen::VectorXd& mean, double var0,
                                      const SdeSchedule& schedule) {
  check_schedule(schedule);
  if (!(std::isfinite(var0) && var0 > 0.0))
    throw std::invalid_argument("analytic_gaussian_score requires var0 > 0");
  if (!mean.allFinite())
    throw std::invalid_argument("analytic_gaussian_score requires a finite mean");
  return [sched = schedule, mu = Eigen::VectorXd(mean), var0](
             const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
    if (x.size() != mu.size())
      throw std::invalid_argument("analytic_gaussian_score: dimension mismatch");
    const double st = ve_sigma(sched, t);
    const double var_t = var0 + st * st - sched.sigma_min * sched.sigma_min;
    return (mu - x) / var_t;
  };
}

ScoreFunction score_as_function(const DenseNet& net) {
  check_score_net(net);
  return [n = net](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
    if (int(x.size()) + 1 != n.input_dim())
      throw std::invalid_argument("score net input dimension mismatch");
    check_time(t);
    Eigen::VectorXd input(x.size() + 1);
    input.head(x.size()) = x;
    input[x.size()] = t;
    return net_forward(n, input);
  };
}

Eigen::VectorXd pc_sample(const ScoreFunction& score, const SdeSchedule& schedule,
                          int K, int corrector_steps, double corrector_snr, int dim,
                          uint64_t seed) {
  check_schedule(schedule);
  if (!score) throw std::invalid_argument("pc_sample requires a score function");
  if (K < 1) throw std::invalid_argument("pc_sample requires K >= 1");
  if (dim < 1) throw std::invalid_argument("pc_sample requires dim >= 1");
  check_corrector(corrector_steps, corrector_snr);
  Rng rng(seed);
  Eigen::VectorXd x(dim);
  for (int j = 0; j < dim; ++j) x[j] = schedule.sigma_max * rng.normal();
  reverse_steps(score, schedule, K, K, corrector_steps, corrector_snr, x, rng,
                "pc_sample");
  return x;
}

Eigen::VectorXd csd_star_sample(const ScoreFunction& score, const CsdStarConfig& config,
                                const SdeSchedule& schedule, uint64_t seed) {
  check_schedule(schedule);
  if (!score) throw std::invalid_argument("csd_star_sample requires a score function");
  if (config.K < 1) throw std::invalid_argument("csd_star_sample requires K >= 1");
  if (config.K_prime < 0 || config.K_prime > config.K)
    throw std::invalid_argument("csd_star_sample requires 0 <= K_prime <= K");
  if (config.sigma_gn.size() == 0)
    throw std::invalid_argument("csd_star_sample requires a non-empty starting state");
  if (!config.sigma_gn.allFinite())
    throw std::invalid_argument("csd_star_sample requires a finite starting state");
  check_corrector(config.corrector_steps, config.corrector_snr);
  Eigen::VectorXd x = config.sigma_gn;
  if (config.K_prime == 0) return x;
  Rng rng(seed);
  reverse_steps(score, schedule, config.K, config.K_prime, config.corrector_steps,
                config.corrector_snr, x, rng, "csd_star_sample");
  return x;
}

PixelImage csd_star_pipeline(const MeasurementVector& v, const Mesh& mesh,
                             const std::vector<double>& contact_impedances,
                             const Protocol& protocol, const InverseConfig& inv_config,
                             const ScoreFunction& score, const CsdStarConfig& config,
                             const SdeSchedule& schedule, const RasterContext& raster,
                             uint64_t seed) {
  ReconstructionResult rec = run_stage("reconstruction", [&] {
    ReconstructionResult r = reconstruct(v, mesh, contact_impedances, protocol, inv_config);
    if (r.aborted) throw numeric_error(r.abort_message);
    return r;
  });
  PixelImage image = run_stage("rasterization", [&] {
    return rasterize_idw(mesh, rec.sigma, raster.grid_side, raster.idw_power,
                         raster.idw_neighbors, raster.outside_fill);
  });
  const Eigen::VectorXd flat = run_stage("sampling", [&] {
    CsdStarConfig cfg = config;
    cfg.sigma_gn = Eigen::Map<const Eigen::VectorXd>(image.values.data(),
                                                     Eigen::Index(image.values.size()));
    return csd_star_sample(score, cfg, schedule, seed);
  });
  std::copy(flat.data(), flat.data() + flat.size(), image.values.begin());
  return image;
}

DenseNet train_dsm_score(const std::vector<Eigen::VectorXd>& data,
                         const SdeSchedule& schedule, const DsmTrainConfig& config) {
  check_schedule(schedule);
  if (data.empty()) throw std::invalid_argument("train_dsm_score requires data");
  const int dim = int(data.front().size());
  if (dim < 1) throw std::invalid_argument("train_dsm_score requires non-empty samples");
  for (const auto& x : data)
    if (int(x.size()) != dim)
      throw std::invalid_argument("train_dsm_score: inconsistent sample dimensions");
  if (config.steps < 1 || config.batch_size < 1)
    throw std::invalid_argument("train_dsm_score requires steps >= 1 and batch_size >= 1");
  for (int h : config.hidden)
    if (h < 1) throw std::invalid_argument("hidden layer widths must be positive");

  std::vector<int> dims;
  dims.push_back(dim + 1);
  for (int h : config.hidden) dims.push_back(h);
  dims.push_back(dim);
  std::vector<Act> acts(dims.size() - 1, Act::tanh);
  acts.back() = Act::linear;
  DenseNet net = make_dense_net(dims, acts, config.seed);

  const OptConfig opt{config.learning_rate, config.momentum};
  OptState state = make_opt_state(net);
  Rng rng(splitmix64(config.seed));
  std::vector<Eigen::VectorXd> batch(size_t(config.batch_size));
  for (int step = 0; step < config.steps; ++step) {
    for (auto& b : batch) b = data[size_t(rng.raw() % uint64_t(data.size()))];
    auto [loss, grads] = dsm_loss(net, batch, schedule, rng);
    (void)loss;
    optimizer_step(net, grads, state, opt);
  }
  return net;
}

void save_score_checkpoint(const DenseNet& net, const SdeSchedule& schedule,
                           const std::string& path) {
  check_schedule(schedule);
  check_score_net(net);
  AtomicFile f(path);
  f.write("EITS", 4);
  f.write_u32(1);
  f.write_f64(schedule.sigma_min);
  f.write_f64(schedule.sigma_max);
  f.write_u32(uint32_t(schedule.K));
  write_net_block(f, net);
  f.commit();
}

std::pair<DenseNet, SdeSchedule> load_score_checkpoint(const std::string& path) {
  BinaryReader r(read_binary_file(path), path);
  r.expect_magic("EITS");
  const uint32_t version = r.u32();
  if (version != 1)
    throw io_error(path + ": unsupported score checkpoint version " +
                   std::to_string(version));
  SdeSchedule schedule;
  schedule.sigma_min = r.f64();
  schedule.sigma_max = r.f64();
  const uint32_t k = r.u32();
  if (!std::isfinite(schedule.sigma_min) || !std::isfinite(schedule.sigma_max) ||
      !(schedule.sigma_min > 0.0) || !(schedule.sigma_max > schedule.sigma_min) ||
      k == 0 || k > (1u << 24))
    throw io_error(path + ": invalid noise schedule parameters");
  schedule.K = int(k);
  DenseNet net = read_net_block(r, path);
  r.done();
  if (net.input_dim() != net.output_dim() + 1)
    throw io_error(path + ": net dimensions do not form a score model");
  return {std::move(net), schedule};
}

std::vector<Eigen::VectorXd> sample_gmm2d(int n, uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_gmm2d requires n >= 0");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> out(static_cast<size_t>(n));
  for (auto& x : out) {
    const double cx = rng.uniform() < kGmmWeight0 ? kGmmSep : -kGmmSep;
    x.resize(2);
    x[0] = cx + kGmmStd * rng.normal();
    x[1] = kGmmStd * rng.normal();
  }
  return out;
}

ScoreFunction analytic_gmm2d_score(const SdeSchedule& schedule) {
  check_schedule(schedule);
  return [sched = schedule](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
    if (x.size() != 2)
      throw std::invalid_argument("analytic_gmm2d_score expects 2-D points");
    const double st = ve_sigma(sched, t);
    const double var_t = kGmmStd * kGmmStd + st * st - sched.sigma_min * sched.sigma_min;
    const Eigen::Vector2d mu0(kGmmSep, 0.0), mu1(-kGmmSep, 0.0);
    const double a0 = std::log(kGmmWeight0) - (x - mu0).squaredNorm() / (2.0 * var_t);
    const double a1 =
        std::log(1.0 - kGmmWeight0) - (x - mu1).squaredNorm() / (2.0 * var_t);
    const double m = std::max(a0, a1);
    const double w0 = std::exp(a0 - m), w1 = std::exp(a1 - m);
    const double r0 = w0 / (w0 + w1);
    return -(r0 * (x - mu0) + (1.0 - r0) * (x - mu1)) / var_t;
  };
}

std::vector<Eigen::VectorXd> sample_phantom_images(PhantomKind kind, int n, int side,
                                                   uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_phantom_images: n < 0");
  if (side < 1) throw std::invalid_argument("sample_phantom_images: side < 1");
  std::vector<Eigen::VectorXd> out(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    PhantomSpec spec = sample_phantom(kind, seed + uint64_t(k));
    Eigen::VectorXd img(side * side);
    for (int i = 0; i < side; ++i) {
      for (int j = 0; j < side; ++j) {
        const double x = pixel_x(side, 1.0, j), y = pixel_y(side, 1.0, i);
        double v = spec.background;
        if (x * x + y * y <= 1.0) {
          for (const Circle& c : spec.circles) {
            const double dx = x - c.cx, dy = y - c.cy;
            if (dx * dx + dy * dy <= c.r * c.r) v = c.value;
          }
        }
        img[i * side + j] = v;
      }
    }
    out[size_t(k)] = std::move(img);
  }
  return out;
}

}  // namespace eit
