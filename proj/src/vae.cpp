#include "vae.hpp"

#include <cmath>

namespace eit {

namespace {

void check_gaussian(const DiagonalGaussian& g) {
  if (g.mu.size() != g.sigma_std.size())
    throw std::invalid_argument("mu/sigma_std length mismatch");
  if (g.mu.size() == 0) throw std::invalid_argument("empty Gaussian");
  for (int i = 0; i < g.sigma_std.size(); ++i)
    if (!(g.sigma_std[i] > 0) || !std::isfinite(g.sigma_std[i]))
      throw std::invalid_argument("sigma_std must be strictly positive");
}

}  // namespace

Eigen::VectorXd reparameterize(const DiagonalGaussian& g, const Eigen::VectorXd& eps) {
  check_gaussian(g);
  if (eps.size() != g.mu.size()) throw std::invalid_argument("eps length mismatch");
  return g.mu + g.sigma_std.cwiseProduct(eps);
}

double kl_to_standard_normal(const DiagonalGaussian& g) {
  check_gaussian(g);
  double s = 0;
  for (int i = 0; i < g.mu.size(); ++i) {
    double sd = g.sigma_std[i];
    s += g.mu[i] * g.mu[i] + sd * sd - 2.0 * std::log(sd) - 1.0;
  }
  return 0.5 * s;
}

double vae_loss(const Eigen::VectorXd& recon, const Eigen::VectorXd& target,
                const DiagonalGaussian& g) {
  if (recon.size() != target.size())
    throw std::invalid_argument("recon/target length mismatch");
  return (recon - target).squaredNorm() + kl_to_standard_normal(g);
}

double vae_loss_batch(const std::vector<Eigen::VectorXd>& recons,
                      const std::vector<Eigen::VectorXd>& targets,
                      const std::vector<DiagonalGaussian>& gs) {
  if (recons.empty() || recons.size() != targets.size() || recons.size() != gs.size())
    throw std::invalid_argument("batch size mismatch");
  double s = 0;
  for (size_t i = 0; i < recons.size(); ++i) s += vae_loss(recons[i], targets[i], gs[i]);
  return s / double(recons.size());
}

double fcn_loss(const std::vector<Eigen::VectorXd>& predicted_latents,
                const std::vector<Eigen::VectorXd>& encoded_latents) {
  if (predicted_latents.empty() || predicted_latents.size() != encoded_latents.size())
    throw std::invalid_argument("batch size mismatch");
  double s = 0;
  for (size_t i = 0; i < predicted_latents.size(); ++i) {
    if (predicted_latents[i].size() != encoded_latents[i].size())
      throw std::invalid_argument("latent dimension mismatch");
    s += (predicted_latents[i] - encoded_latents[i]).squaredNorm();
  }
  return s / double(predicted_latents.size());
}

Eigen::VectorXd cvae_reconstruct(const Eigen::VectorXd& v, const DenseNet& fcn,
                                 const DenseNet& decoder) {
  if (fcn.output_dim() != decoder.input_dim())
    throw std::invalid_argument("latent dimension chain mismatch");
  return net_forward(decoder, net_forward(fcn, v));
}

}  // namespace eit
