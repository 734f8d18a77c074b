#pragma once

#include <array>
#include <string>
#include <vector>

namespace eit {

// Disk mesh with L boundary electrode arcs. Nodes are 2-D points, elements are
// counter-clockwise node triples, electrode arcs index into boundary_edges.
struct Mesh {
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 3>> elements;
  std::vector<std::array<int, 2>> boundary_edges;   // (node, node), circle edges
  std::vector<std::vector<int>> electrode_arcs;     // per electrode: edge indices
  double radius = 1.0;

  int node_count() const { return int(nodes.size()); }
  int element_count() const { return int(elements.size()); }
  int electrode_count() const { return int(electrode_arcs.size()); }
};

// Per-element conductivity, positive, one value per element.
using ConductivityField = std::vector<double>;

struct Circle {
  double cx = 0, cy = 0, r = 0;
  double value = 1;  // conductivity painted inside
};

// Structured polar mesh: the angular grid subdivides each electrode arc and each
// gap into `refinement` equal sub-arcs (so arcs land exactly on nodes for any
// coverage), 2*refinement rings, quads split criss-cross around a center node.
// The triangulation is exactly invariant under rotation by 2*pi/L and under
// reflection across the x axis.
Mesh build_disk_mesh(int n_electrodes, int refinement, double electrode_coverage = 0.5,
                     double radius = 1.0);

double element_area(const Mesh& mesh, int e);
std::array<double, 2> element_centroid(const Mesh& mesh, int e);
std::vector<std::array<double, 2>> element_centroids(const Mesh& mesh);

// Piecewise-constant painting: element takes the conductivity of the last circle
// containing its centroid, else background.
ConductivityField paint_phantom(const Mesh& mesh, double background,
                                const std::vector<Circle>& circles);

void save_mesh(const Mesh& mesh, const std::string& path);
Mesh load_mesh(const std::string& path);

// Throws std::invalid_argument when field is not a valid per-element positive field.
void check_field(const Mesh& mesh, const ConductivityField& field);

}  // namespace eit
