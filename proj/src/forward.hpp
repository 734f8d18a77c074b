#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace eit {

// Adjacent drive/measurement pattern. Drive l injects +I at electrode l and -I at
// l+1 (mod L); per drive every adjacent pair (k, k+1 mod L) not touching a driven
// electrode is measured as U_k - U_{k+1}, enumerated cyclically k = l+2 .. l+L-2
// (mod L), drive-major concatenation.
struct Protocol {
  struct Drive {
    int source = 0, sink = 0;
    double current = 1.0;
  };
  int n_electrodes = 0;
  std::vector<Drive> drives;
  std::vector<std::vector<std::array<int, 2>>> measurement_pairs;  // (pos, neg)

  int measurement_count() const {
    size_t n = 0;
    for (const auto& p : measurement_pairs) n += p.size();
    return int(n);
  }
};

Protocol build_adjacent_protocol(int n_electrodes, double current = 1.0);

using MeasurementVector = std::vector<double>;

// CEM weak form over (node potentials, electrode potentials, gauge multiplier):
// unknown layout [u_0..u_{n-1}, U_0..U_{L-1}, mu]; symmetric, nonsingular.
struct CemSystem {
  Eigen::SparseMatrix<double> K;
  int n_nodes = 0;
  int n_electrodes = 0;
  int dim() const { return n_nodes + n_electrodes + 1; }
};

CemSystem assemble_cem_system(const Mesh& mesh, const ConductivityField& sigma,
                              const std::vector<double>& contact_impedances);

struct ForwardSolution {
  std::vector<Eigen::VectorXd> node_potentials;       // per drive, n
  std::vector<Eigen::VectorXd> electrode_potentials;  // per drive, L
};

struct ForwardResult {
  ForwardSolution solution;
  MeasurementVector measurements;
};

ForwardResult solve_forward(const Mesh& mesh, const ConductivityField& sigma,
                            const std::vector<double>& contact_impedances,
                            const Protocol& protocol);

// v + iid zero-mean Gaussian noise with variance sum(v^2)*10^(-snr/10)/m so the
// expected noise power matches the requested SNR; +inf passes v through.
MeasurementVector add_measurement_noise(const MeasurementVector& v, double snr_db,
                                        uint64_t seed);

std::vector<double> default_contact_impedances(int n_electrodes, double z = 0.01);

void save_measurements_csv(const MeasurementVector& v, const std::string& path);
MeasurementVector load_measurements_csv(const std::string& path);

}  // namespace eit
