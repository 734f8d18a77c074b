#include "forward.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <sstream>

#include "common.hpp"

namespace eit {

Protocol build_adjacent_protocol(int n_electrodes, double current) {
  if (n_electrodes < 4) throw std::invalid_argument("n_electrodes < 4");
  if (!(current > 0.0)) throw std::invalid_argument("current <= 0");
  const int L = n_electrodes;
  Protocol p;
  p.n_electrodes = L;
  p.drives.resize(L);
  p.measurement_pairs.resize(L);
  for (int l = 0; l < L; ++l) {
    p.drives[l] = {l, (l + 1) % L, current};
    // cyclic enumeration starting just past the driven pair keeps the block
    // covariant under rotation of the drive index
    for (int j = 2; j <= L - 2; ++j) {
      int k = (l + j) % L;
      p.measurement_pairs[l].push_back({k, (k + 1) % L});
    }
  }
  return p;
}

CemSystem assemble_cem_system(const Mesh& mesh, const ConductivityField& sigma,
                              const std::vector<double>& z) {
  check_field(mesh, sigma);
  const int n = mesh.node_count();
  const int L = mesh.electrode_count();
  if (int(z.size()) != L) throw std::invalid_argument("contact impedance count != L");
  for (double zi : z)
    if (!(zi > 0.0)) throw std::invalid_argument("contact impedance <= 0");

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.elements.size() * 9 + mesh.boundary_edges.size() * 8 + 2 * L + 4);

  // interior stiffness: grad(phi_i) = (b_i, c_i)/(2A)
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.elements[e];
    const auto& p1 = mesh.nodes[t[0]];
    const auto& p2 = mesh.nodes[t[1]];
    const auto& p3 = mesh.nodes[t[2]];
    double area = element_area(mesh, e);
    if (!(area > 0.0)) throw numeric_error("element with nonpositive area");
    double b[3] = {p2[1] - p3[1], p3[1] - p1[1], p1[1] - p2[1]};
    double c[3] = {p3[0] - p2[0], p1[0] - p3[0], p2[0] - p1[0]};
    double s = sigma[e] / (4.0 * area);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(t[i], t[j], s * (b[i] * b[j] + c[i] * c[j]));
  }

  // electrode boundary terms
  for (int l = 0; l < L; ++l) {
    double zi = z[l];
    for (int ei : mesh.electrode_arcs[l]) {
      const auto& edge = mesh.boundary_edges[ei];
      const auto& pa = mesh.nodes[edge[0]];
      const auto& pb = mesh.nodes[edge[1]];
      double h = std::hypot(pb[0] - pa[0], pb[1] - pa[1]);
      trip.emplace_back(edge[0], edge[0], h / (3.0 * zi));
      trip.emplace_back(edge[1], edge[1], h / (3.0 * zi));
      trip.emplace_back(edge[0], edge[1], h / (6.0 * zi));
      trip.emplace_back(edge[1], edge[0], h / (6.0 * zi));
      trip.emplace_back(edge[0], n + l, -h / (2.0 * zi));
      trip.emplace_back(n + l, edge[0], -h / (2.0 * zi));
      trip.emplace_back(edge[1], n + l, -h / (2.0 * zi));
      trip.emplace_back(n + l, edge[1], -h / (2.0 * zi));
      trip.emplace_back(n + l, n + l, h / zi);
    }
  }

  // gauge: sum_l U_l = 0 through one Lagrange multiplier
  for (int l = 0; l < L; ++l) {
    trip.emplace_back(n + L, n + l, 1.0);
    trip.emplace_back(n + l, n + L, 1.0);
  }

  CemSystem sys;
  sys.n_nodes = n;
  sys.n_electrodes = L;
  sys.K.resize(n + L + 1, n + L + 1);
  sys.K.setFromTriplets(trip.begin(), trip.end());
  return sys;
}

ForwardResult solve_forward(const Mesh& mesh, const ConductivityField& sigma,
                            const std::vector<double>& z, const Protocol& protocol) {
  if (protocol.n_electrodes != mesh.electrode_count())
    throw std::invalid_argument("protocol/mesh electrode count mismatch");
  CemSystem sys = assemble_cem_system(mesh, sigma, z);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(sys.K);
  lu.factorize(sys.K);
  if (lu.info() != Eigen::Success) throw numeric_error("CEM system factorization failed");

  const int n = sys.n_nodes, L = sys.n_electrodes;
  ForwardResult out;
  out.measurements.reserve(protocol.measurement_count());
  for (size_t d = 0; d < protocol.drives.size(); ++d) {
    const auto& drive = protocol.drives[d];
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.dim());
    rhs[n + drive.source] += drive.current;
    rhs[n + drive.sink] -= drive.current;
    Eigen::VectorXd x = lu.solve(rhs);
    double rel = (sys.K * x - rhs).norm() / rhs.norm();
    if (!(rel <= 1e-10)) throw numeric_error("forward solve residual above 1e-10");
    out.solution.node_potentials.push_back(x.head(n));
    out.solution.electrode_potentials.push_back(x.segment(n, L));
    for (const auto& pair : protocol.measurement_pairs[d])
      out.measurements.push_back(x[n + pair[0]] - x[n + pair[1]]);
  }
  return out;
}

MeasurementVector add_measurement_noise(const MeasurementVector& v, double snr_db,
                                        uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return v;
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite or +inf");
  if (v.empty()) return v;
  double power = 0;
  for (double x : v) power += x * x;
  double var = power * std::pow(10.0, -snr_db / 10.0) / double(v.size());
  double sd = std::sqrt(var);
  Rng rng(seed);
  MeasurementVector out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] + sd * rng.normal();
  return out;
}

std::vector<double> default_contact_impedances(int n_electrodes, double z) {
  if (!(z > 0.0)) throw std::invalid_argument("contact impedance <= 0");
  return std::vector<double>(n_electrodes, z);
}

void save_measurements_csv(const MeasurementVector& v, const std::string& path) {
  std::ostringstream out;
  for (double x : v) out << format_g17(x) << "\n";
  write_text_atomic(path, out.str());
}

MeasurementVector load_measurements_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  MeasurementVector v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t pos = 0;
    double x = 0;
    try {
      x = std::stod(line, &pos);
    } catch (const std::exception&) {
      throw io_error("bad measurement line in " + path + ": " + line);
    }
    v.push_back(x);
  }
  if (v.empty()) throw io_error("no measurements in " + path);
  return v;
}

}  // namespace eit
