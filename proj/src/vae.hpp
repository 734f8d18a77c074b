#pragma once

#include <vector>

#include "nnet.hpp"

namespace eit {

// Diagonal Gaussian in standard-deviation parameterization.
struct DiagonalGaussian {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma_std;  // strictly positive, same length as mu
};

// mu + sigma_std .* eps
Eigen::VectorXd reparameterize(const DiagonalGaussian& g, const Eigen::VectorXd& eps);

// KL(g || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 2 log sigma - 1); nonnegative,
// zero exactly at the standard Gaussian.
double kl_to_standard_normal(const DiagonalGaussian& g);

// Squared reconstruction error plus the KL penalty for one sample.
double vae_loss(const Eigen::VectorXd& recon, const Eigen::VectorXd& target,
                const DiagonalGaussian& g);

// Batch average of per-sample vae_loss terms.
double vae_loss_batch(const std::vector<Eigen::VectorXd>& recons,
                      const std::vector<Eigen::VectorXd>& targets,
                      const std::vector<DiagonalGaussian>& gs);

// Mean squared L2 distance between predicted and encoded latent codes.
double fcn_loss(const std::vector<Eigen::VectorXd>& predicted_latents,
                const std::vector<Eigen::VectorXd>& encoded_latents);

// Mean-path inference: decoder(fcn(v)), no sampling.
Eigen::VectorXd cvae_reconstruct(const Eigen::VectorXd& v, const DenseNet& fcn,
                                 const DenseNet& decoder);

}  // namespace eit
