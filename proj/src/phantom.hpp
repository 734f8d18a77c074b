#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forward.hpp"
#include "mesh.hpp"

namespace eit {

enum class PhantomKind { two, four };

PhantomKind parse_phantom_kind(const std::string& name);  // "two" | "four"
const std::vector<double>& kind_conductivities(PhantomKind kind);

struct PhantomSpec {
  double background = 1.0;
  std::vector<Circle> circles;
};

// Each circle draws cx, cy ~ U(-0.55, 0.55) and r ~ U(0.1, 0.3), redrawing the
// whole triple until the circle lies inside the unit disk; conductivities are
// assigned in the fixed kind order.
PhantomSpec sample_phantom(PhantomKind kind, uint64_t seed);

void save_phantom_json(const PhantomSpec& spec, const std::string& path);
PhantomSpec load_phantom_json(const std::string& path);

// Row-major square image; the disk maps to the inscribed circle of the square.
struct PixelImage {
  int side = 0;
  std::vector<double> values;

  double& at(int i, int j) { return values[size_t(i) * side + j]; }
  double at(int i, int j) const { return values[size_t(i) * side + j]; }
};

// center of pixel (i, j): x spans left to right, y top to bottom
inline double pixel_x(int side, double radius, int j) {
  return -radius + (j + 0.5) * 2.0 * radius / side;
}
inline double pixel_y(int side, double radius, int i) {
  return radius - (i + 0.5) * 2.0 * radius / side;
}

// Inverse-distance weighting from element centroids: per in-disk pixel, the k
// nearest centroids contribute value_i * d_i^(-power); a centroid closer than
// 1e-12 short-circuits to its element value. Pixels whose centers fall outside
// the disk take outside_fill (callers pass the phantom background).
PixelImage rasterize_idw(const Mesh& mesh, const ConductivityField& field,
                         int grid_side, double power, int neighbors,
                         double outside_fill);

struct SplitSpec {
  int train = 0, val = 0, test = 0;
};

struct DatasetParams {
  int n_electrodes = 16;
  int refinement = 2;
  double coverage = 0.5;
  double current = 1.0;
  double contact_impedance = 0.01;
  int grid_side = 128;
  double idw_power = 2.0;
  int idw_neighbors = 6;
};

// Writes train/val/test record files plus a manifest of contiguous index
// ranges. Record i uses seed base_seed + i; its noise stream is derived from
// that seed, so any record regenerates independently of the others.
void generate_dataset(PhantomKind kind, int count, double snr_db, SplitSpec split,
                      uint64_t base_seed, const std::string& out_dir,
                      const DatasetParams& params = {});

struct DatasetRecord {
  uint64_t seed = 0;
  PixelImage image;
  MeasurementVector measurements;
};

struct DatasetFile {
  uint32_t version = 0;
  int side = 0;
  int measurement_count = 0;
  std::vector<DatasetRecord> records;
};

DatasetFile load_dataset(const std::string& path);

struct ManifestEntry {
  std::string name;
  int start = 0, count = 0;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);

// Structural pass over manifest plus record files: header/manifest agreement,
// finite values, constant value outside the disk matching `background`,
// measurement lengths. Throws io_error with the first violation.
void validate_dataset(const std::string& dir, double background = 1.0);

// image stacks (sampler outputs): header magic, version, count, side; f32 data
void save_image_stack(const std::vector<PixelImage>& images, const std::string& path);
std::vector<PixelImage> load_image_stack(const std::string& path);

// 8-bit binary PGM, min-max normalized (constant images map to black)
void save_image_pgm(const PixelImage& image, const std::string& path);

}  // namespace eit
