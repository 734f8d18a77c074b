#include "mesh.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <utility>

#include "common.hpp"

namespace eit {

static constexpr double kTwoPi = 6.283185307179586476925286766559;

Mesh build_disk_mesh(int n_electrodes, int refinement, double electrode_coverage,
                     double radius) {
  if (n_electrodes < 4) throw std::invalid_argument("n_electrodes < 4");
  if (refinement < 1) throw std::invalid_argument("refinement < 1");
  if (!(electrode_coverage > 0.0 && electrode_coverage < 1.0))
    throw std::invalid_argument("electrode_coverage outside (0,1)");
  if (!(radius > 0.0)) throw std::invalid_argument("radius <= 0.0");

  const int L = n_electrodes;
  const int sub = refinement;          // sub-arcs per electrode and per gap
  const int nt = L * 2 * sub;          // angular sectors
  const int nr = 2 * refinement;       // rings
  const long n_elem = long(nt) * (4L * nr - 3);
  if (n_elem < 64) throw std::invalid_argument("refinement yields fewer than 64 elements");

  // Angular grid. Electrode l spans [th_l - w/2, th_l + w/2] with th_l = 2*pi*l/L.
  const double pitch = kTwoPi / L;
  const double w = electrode_coverage * pitch;
  const double gapw = pitch - w;
  std::vector<double> theta(nt);
  for (int l = 0; l < L; ++l) {
    double start = l * pitch - 0.5 * w;
    for (int k = 0; k < sub; ++k) theta[l * 2 * sub + k] = start + w * k / sub;
    for (int k = 0; k < sub; ++k) theta[l * 2 * sub + sub + k] = start + w + gapw * k / sub;
  }

  Mesh m;
  m.radius = radius;
  m.nodes.reserve(1 + size_t(nt) * nr + size_t(nt) * (nr - 1));
  m.nodes.push_back({0.0, 0.0});
  // ring nodes: ring i (1-based) at radius i/nr
  auto ring_node = [&](int i, int j) { return 1 + (i - 1) * nt + (j % nt); };
  for (int i = 1; i <= nr; ++i) {
    double r = radius * i / nr;
    for (int j = 0; j < nt; ++j)
      m.nodes.push_back({r * std::cos(theta[j]), r * std::sin(theta[j])});
  }
  // quad-center nodes for bands between ring i and i+1
  const int center0 = 1 + nr * nt;
  auto center_node = [&](int i, int j) { return center0 + (i - 1) * nt + (j % nt); };
  for (int i = 1; i < nr; ++i) {
    double r = radius * (i + 0.5) / nr;
    for (int j = 0; j < nt; ++j) {
      double t1 = theta[j];
      double t2 = (j + 1 < nt) ? theta[j + 1] : theta[0] + kTwoPi;
      double tm = 0.5 * (t1 + t2);
      m.nodes.push_back({r * std::cos(tm), r * std::sin(tm)});
    }
  }

  m.elements.reserve(size_t(n_elem));
  // center fan
  for (int j = 0; j < nt; ++j)
    m.elements.push_back({0, ring_node(1, j), ring_node(1, j + 1)});
  // criss-cross bands; quad CCW order: (outer_j, outer_j+1, inner_j+1, inner_j)
  for (int i = 1; i < nr; ++i) {
    for (int j = 0; j < nt; ++j) {
      int a = ring_node(i, j), b = ring_node(i, j + 1);
      int c = ring_node(i + 1, j), d = ring_node(i + 1, j + 1);
      int x = center_node(i, j);
      m.elements.push_back({c, d, x});
      m.elements.push_back({d, b, x});
      m.elements.push_back({b, a, x});
      m.elements.push_back({a, c, x});
    }
  }

  m.boundary_edges.reserve(nt);
  for (int j = 0; j < nt; ++j)
    m.boundary_edges.push_back({ring_node(nr, j), ring_node(nr, j + 1)});
  m.electrode_arcs.resize(L);
  for (int l = 0; l < L; ++l) {
    m.electrode_arcs[l].reserve(sub);
    for (int k = 0; k < sub; ++k) m.electrode_arcs[l].push_back(l * 2 * sub + k);
  }
  return m;
}

double element_area(const Mesh& mesh, int e) {
  const auto& t = mesh.elements[e];
  const auto& p1 = mesh.nodes[t[0]];
  const auto& p2 = mesh.nodes[t[1]];
  const auto& p3 = mesh.nodes[t[2]];
  return 0.5 * ((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]));
}

std::array<double, 2> element_centroid(const Mesh& mesh, int e) {
  const auto& t = mesh.elements[e];
  const auto& p1 = mesh.nodes[t[0]];
  const auto& p2 = mesh.nodes[t[1]];
  const auto& p3 = mesh.nodes[t[2]];
  return {(p1[0] + p2[0] + p3[0]) / 3.0, (p1[1] + p2[1] + p3[1]) / 3.0};
}

std::vector<std::array<double, 2>> element_centroids(const Mesh& mesh) {
  std::vector<std::array<double, 2>> c(mesh.elements.size());
  for (int e = 0; e < mesh.element_count(); ++e) c[e] = element_centroid(mesh, e);
  return c;
}

ConductivityField paint_phantom(const Mesh& mesh, double background,
                                const std::vector<Circle>& circles) {
  if (!(background > 0.0)) throw std::invalid_argument("background <= 0");
  for (const auto& c : circles) {
    if (!(c.value > 0.0)) throw std::invalid_argument("circle conductivity <= 0");
    if (std::hypot(c.cx, c.cy) >= mesh.radius)
      throw std::invalid_argument("circle center outside disk");
  }
  ConductivityField f(mesh.elements.size(), background);
  for (int e = 0; e < mesh.element_count(); ++e) {
    auto cen = element_centroid(mesh, e);
    for (auto it = circles.rbegin(); it != circles.rend(); ++it) {
      double dx = cen[0] - it->cx, dy = cen[1] - it->cy;
      if (dx * dx + dy * dy <= it->r * it->r) {
        f[e] = it->value;
        break;  // last circle in list order wins
      }
    }
  }
  return f;
}

void check_field(const Mesh& mesh, const ConductivityField& field) {
  if (int(field.size()) != mesh.element_count())
    throw std::invalid_argument("field length != element count");
  for (double v : field)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("field value not positive finite");
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ostringstream out;
  out << "nodes " << mesh.node_count() << " elements " << mesh.element_count()
      << " electrodes " << mesh.electrode_count() << "\n";
  out << "radius " << format_g17(mesh.radius) << "\n";
  for (const auto& p : mesh.nodes)
    out << format_g17(p[0]) << " " << format_g17(p[1]) << "\n";
  for (const auto& t : mesh.elements)
    out << t[0] << " " << t[1] << " " << t[2] << "\n";
  for (const auto& arc : mesh.electrode_arcs) {
    out << arc.size();
    for (int ei : arc) {
      const auto& e = mesh.boundary_edges[ei];
      out << " " << e[0] << " " << e[1];
    }
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

Mesh load_mesh(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string kw1, kw2, kw3, kw4;
  int n = 0, me = 0, L = 0;
  if (!(in >> kw1 >> n >> kw2 >> me >> kw3 >> L) || kw1 != "nodes" || kw2 != "elements" ||
      kw3 != "electrodes" || n <= 0 || me <= 0 || L <= 0)
    throw io_error("bad mesh header: " + path);
  Mesh m;
  if (!(in >> kw4 >> m.radius) || kw4 != "radius" || !(m.radius > 0))
    throw io_error("bad mesh radius line: " + path);
  m.nodes.resize(n);
  for (auto& p : m.nodes)
    if (!(in >> p[0] >> p[1])) throw io_error("bad mesh node line: " + path);
  m.elements.resize(me);
  for (auto& t : m.elements) {
    if (!(in >> t[0] >> t[1] >> t[2])) throw io_error("bad mesh element line: " + path);
    for (int v : t)
      if (v < 0 || v >= n) throw io_error("mesh element node out of range: " + path);
  }
  // electrode arcs come as node pairs; rebuild the boundary edge list from them,
  // then append the remaining boundary edges discovered from element adjacency.
  std::map<std::pair<int, int>, int> edge_index;
  m.electrode_arcs.resize(L);
  for (auto& arc : m.electrode_arcs) {
    size_t k = 0;
    if (!(in >> k)) throw io_error("bad electrode line: " + path);
    for (size_t i = 0; i < k; ++i) {
      int a = 0, b = 0;
      if (!(in >> a >> b)) throw io_error("bad electrode edge: " + path);
      if (a < 0 || a >= n || b < 0 || b >= n)
        throw io_error("electrode edge node out of range: " + path);
      auto key = std::minmax(a, b);
      auto [it, fresh] = edge_index.emplace(key, int(m.boundary_edges.size()));
      if (fresh) m.boundary_edges.push_back({a, b});
      arc.push_back(it->second);
    }
  }
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : m.elements)
    for (int k = 0; k < 3; ++k)
      edge_count[std::minmax(t[k], t[(k + 1) % 3])]++;
  for (const auto& [key, cnt] : edge_count) {
    if (cnt == 1 && !edge_index.count(key)) {
      edge_index.emplace(key, int(m.boundary_edges.size()));
      m.boundary_edges.push_back({key.first, key.second});
    }
  }
  return m;
}

}  // namespace eit
