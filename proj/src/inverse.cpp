#include "inverse.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <map>
#include <sstream>

#include "common.hpp"

namespace eit {

namespace {

// per-element gradient of a P1 field given its node values
struct ElementGeometry {
  std::vector<std::array<double, 3>> b, c;  // shape-gradient coefficients
  std::vector<double> area;
};

ElementGeometry element_geometry(const Mesh& mesh) {
  ElementGeometry g;
  const int ne = mesh.element_count();
  g.b.resize(ne);
  g.c.resize(ne);
  g.area.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.elements[e];
    const auto& p1 = mesh.nodes[t[0]];
    const auto& p2 = mesh.nodes[t[1]];
    const auto& p3 = mesh.nodes[t[2]];
    g.b[e] = {p2[1] - p3[1], p3[1] - p1[1], p1[1] - p2[1]};
    g.c[e] = {p3[0] - p2[0], p1[0] - p3[0], p2[0] - p1[0]};
    g.area[e] = element_area(mesh, e);
  }
  return g;
}

// (sum_i x_i b_i, sum_i x_i c_i) per element; grad = that / (2 area)
void field_gradients(const Mesh& mesh, const ElementGeometry& g,
                     const Eigen::VectorXd& nodal, std::vector<double>& gb,
                     std::vector<double>& gc) {
  const int ne = mesh.element_count();
  gb.assign(ne, 0.0);
  gc.assign(ne, 0.0);
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.elements[e];
    for (int i = 0; i < 3; ++i) {
      gb[e] += nodal[t[i]] * g.b[e][i];
      gc[e] += nodal[t[i]] * g.c[e][i];
    }
  }
}

double relative_misfit(const MeasurementVector& v, const MeasurementVector& f) {
  double num = 0, den = 0;
  for (size_t i = 0; i < v.size(); ++i) {
    num += (v[i] - f[i]) * (v[i] - f[i]);
    den += v[i] * v[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

JacobianMatrix compute_jacobian(const Mesh& mesh, const ConductivityField& sigma,
                                const std::vector<double>& contact_impedances,
                                const Protocol& protocol) {
  if (protocol.n_electrodes != mesh.electrode_count())
    throw std::invalid_argument("protocol/mesh electrode count mismatch");
  CemSystem sys = assemble_cem_system(mesh, sigma, contact_impedances);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(sys.K);
  lu.factorize(sys.K);
  if (lu.info() != Eigen::Success) throw numeric_error("CEM system factorization failed");
  const int n = sys.n_nodes;

  auto solve_pair_field = [&](int pos, int neg) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.dim());
    rhs[n + pos] += 1.0;
    rhs[n + neg] -= 1.0;
    Eigen::VectorXd x = lu.solve(rhs);
    double rel = (sys.K * x - rhs).norm() / rhs.norm();
    if (!(rel <= 1e-10)) throw numeric_error("adjoint solve residual above 1e-10");
    return x;
  };

  ElementGeometry geom = element_geometry(mesh);
  const int ne = mesh.element_count();

  // drive fields
  std::vector<std::vector<double>> ub(protocol.drives.size()), uc(protocol.drives.size());
  for (size_t d = 0; d < protocol.drives.size(); ++d) {
    const auto& drv = protocol.drives[d];
    Eigen::VectorXd x = drv.current * solve_pair_field(drv.source, drv.sink);
    field_gradients(mesh, geom, x.head(n), ub[d], uc[d]);
  }

  // one measurement field per distinct electrode pair
  std::map<std::array<int, 2>, int> pair_index;
  std::vector<std::vector<double>> wb, wc;
  for (const auto& pairs : protocol.measurement_pairs)
    for (const auto& pr : pairs)
      if (!pair_index.count(pr)) {
        Eigen::VectorXd x = solve_pair_field(pr[0], pr[1]);
        pair_index.emplace(pr, int(wb.size()));
        wb.emplace_back();
        wc.emplace_back();
        field_gradients(mesh, geom, x.head(n), wb.back(), wc.back());
      }

  JacobianMatrix J(protocol.measurement_count(), ne);
  int row = 0;
  for (size_t d = 0; d < protocol.drives.size(); ++d) {
    for (const auto& pr : protocol.measurement_pairs[d]) {
      int w = pair_index.at(pr);
      for (int e = 0; e < ne; ++e)
        J(row, e) = -(wb[w][e] * ub[d][e] + wc[w][e] * uc[d][e]) / (4.0 * geom.area[e]);
      ++row;
    }
  }
  return J;
}

namespace {

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& N,
                                       const Eigen::VectorXd& rhs) {
  if (rhs.norm() == 0.0) return Eigen::VectorXd::Zero(N.cols());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(N);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-12))
    throw numeric_error("normal equations numerically singular");
  Eigen::VectorXd d = ldlt.solve(rhs);
  double rel = (N * d - rhs).norm() / rhs.norm();
  if (!(rel <= 1e-8)) throw numeric_error("normal equations numerically singular");
  return d;
}

}  // namespace

Eigen::VectorXd gn_direction(const JacobianMatrix& J, const Eigen::VectorXd& residual) {
  if (residual.size() != J.rows()) throw std::invalid_argument("residual size mismatch");
  return solve_normal_equations(J.transpose() * J, -(J.transpose() * residual));
}

Eigen::VectorXd lm_direction(const JacobianMatrix& J, const Eigen::VectorXd& residual,
                             double lambda) {
  if (residual.size() != J.rows()) throw std::invalid_argument("residual size mismatch");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be finite and >= 0");
  Eigen::MatrixXd N = J.transpose() * J;
  if (lambda > 0.0) {
    for (int i = 0; i < N.rows(); ++i) {
      if (N(i, i) == 0.0)
        throw numeric_error("zero sensitivity diagonal; damping cannot regularize");
      N(i, i) *= 1.0 + lambda;
    }
  }
  return solve_normal_equations(N, -(J.transpose() * residual));
}

ReconstructionResult reconstruct(const MeasurementVector& v, const Mesh& mesh,
                                 const std::vector<double>& contact_impedances,
                                 const Protocol& protocol, const InverseConfig& config) {
  if (int(v.size()) != protocol.measurement_count())
    throw std::invalid_argument("measurement count does not match protocol");
  if (config.max_iters < 1) throw std::invalid_argument("max_iters < 1");
  if (!(config.lambda >= 0.0)) throw std::invalid_argument("lambda < 0");
  if (!(config.misfit_tol >= 0.0)) throw std::invalid_argument("misfit_tol < 0");
  if (!(config.positivity_floor > 0.0)) throw std::invalid_argument("floor <= 0");
  double vnorm = 0;
  for (double x : v) vnorm += x * x;
  if (!(vnorm > 0.0)) throw std::invalid_argument("zero measurement vector");

  ConductivityField sigma = config.initial_sigma.empty()
                                ? ConductivityField(mesh.element_count(), 1.0)
                                : config.initial_sigma;
  check_field(mesh, sigma);
  for (double& s : sigma) s = std::max(s, config.positivity_floor);

  ReconstructionResult out;
  MeasurementVector f = solve_forward(mesh, sigma, contact_impedances, protocol).measurements;
  double misfit = relative_misfit(v, f);
  out.trace.push_back(misfit);

  for (int k = 0; k < config.max_iters; ++k) {
    if (misfit <= config.misfit_tol) {
      out.converged = true;
      break;
    }
    ConductivityField cand;
    double cand_misfit = 0;
    try {
      JacobianMatrix J = compute_jacobian(mesh, sigma, contact_impedances, protocol);
      Eigen::VectorXd r(v.size());
      for (size_t i = 0; i < v.size(); ++i) r[i] = f[i] - v[i];
      Eigen::VectorXd d = config.lambda > 0.0 ? lm_direction(J, r, config.lambda)
                                              : gn_direction(J, r);
      MeasurementVector cf;
      int halvings = 0;
      for (;; ++halvings) {
        cand = sigma;
        for (size_t e = 0; e < cand.size(); ++e)
          cand[e] = std::max(cand[e] + d[e], config.positivity_floor);
        cf = solve_forward(mesh, cand, contact_impedances, protocol).measurements;
        cand_misfit = relative_misfit(v, cf);
        if (cand_misfit <= misfit || halvings >= 30) break;
        d *= 0.5;
      }
      if (cand_misfit > misfit) break;  // no descent after 30 halvings
      f = cf;
    } catch (const numeric_error& err) {
      out.aborted = true;
      out.abort_message = err.what();
      break;
    }
    sigma = cand;
    misfit = cand_misfit;
    out.trace.push_back(misfit);
    if (misfit <= config.misfit_tol) {
      out.converged = true;
      break;
    }
  }
  out.sigma = sigma;
  return out;
}

void save_trace_csv(const std::vector<double>& trace, const std::string& path) {
  std::ostringstream out;
  out << "iteration,misfit\n";
  for (size_t i = 0; i < trace.size(); ++i)
    out << i << "," << format_g17(trace[i]) << "\n";
  write_text_atomic(path, out.str());
}

}  // namespace eit
