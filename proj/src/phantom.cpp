#include "phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace eit {

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "two") return PhantomKind::two;
  if (name == "four") return PhantomKind::four;
  throw std::invalid_argument("unknown phantom kind: " + name);
}

const std::vector<double>& kind_conductivities(PhantomKind kind) {
  static const std::vector<double> two = {0.5, 1.5};
  static const std::vector<double> four = {0.01, 0.1, 0.5, 1.5};
  return kind == PhantomKind::two ? two : four;
}

PhantomSpec sample_phantom(PhantomKind kind, uint64_t seed) {
  Rng rng(seed);
  PhantomSpec spec;
  for (double value : kind_conductivities(kind)) {
    Circle c;
    do {
      c.cx = rng.uniform(-0.55, 0.55);
      c.cy = rng.uniform(-0.55, 0.55);
      c.r = rng.uniform(0.1, 0.3);
    } while (std::hypot(c.cx, c.cy) + c.r >= 1.0);
    c.value = value;
    spec.circles.push_back(c);
  }
  return spec;
}

void save_phantom_json(const PhantomSpec& spec, const std::string& path) {
  nlohmann::json j;
  j["background"] = spec.background;
  j["circles"] = nlohmann::json::array();
  for (const Circle& c : spec.circles)
    j["circles"].push_back({{"cx", c.cx}, {"cy", c.cy}, {"r", c.r}, {"value", c.value}});
  write_text_atomic(path, j.dump(2) + "\n");
}

PhantomSpec load_phantom_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad phantom json " + path + ": " + e.what());
  }
  PhantomSpec spec;
  try {
    spec.background = j.at("background").get<double>();
    for (const auto& jc : j.at("circles")) {
      Circle c;
      c.cx = jc.at("cx").get<double>();
      c.cy = jc.at("cy").get<double>();
      c.r = jc.at("r").get<double>();
      c.value = jc.at("value").get<double>();
      spec.circles.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error("bad phantom json " + path + ": " + e.what());
  }
  if (!(spec.background > 0.0) || !std::isfinite(spec.background))
    throw io_error("bad phantom json " + path + ": background must be positive");
  for (const Circle& c : spec.circles) {
    if (!std::isfinite(c.cx) || !std::isfinite(c.cy) || !(c.r > 0.0) || !(c.value > 0.0))
      throw io_error("bad phantom json " + path + ": invalid circle");
  }
  return spec;
}

PixelImage rasterize_idw(const Mesh& mesh, const ConductivityField& field,
                         int grid_side, double power, int neighbors,
                         double outside_fill) {
  check_field(mesh, field);
  if (grid_side < 1) throw std::invalid_argument("grid_side < 1");
  if (!(power > 0.0)) throw std::invalid_argument("power <= 0");
  if (neighbors < 1) throw std::invalid_argument("neighbors < 1");
  if (!std::isfinite(outside_fill)) throw std::invalid_argument("outside_fill not finite");

  const int ne = mesh.element_count();
  const int k = std::min(neighbors, ne);
  std::vector<std::array<double, 2>> ctr(ne);
  for (int e = 0; e < ne; ++e) ctr[e] = element_centroid(mesh, e);

  PixelImage img;
  img.side = grid_side;
  img.values.assign(size_t(grid_side) * grid_side, outside_fill);

  std::vector<int> idx(ne);
  std::vector<double> d2(ne);
  const double snap2 = 1e-24;  // (1e-12)^2
  for (int i = 0; i < grid_side; ++i) {
    double y = pixel_y(grid_side, mesh.radius, i);
    for (int j = 0; j < grid_side; ++j) {
      double x = pixel_x(grid_side, mesh.radius, j);
      if (std::hypot(x, y) > mesh.radius) continue;
      for (int e = 0; e < ne; ++e) {
        double dx = x - ctr[e][0], dy = y - ctr[e][1];
        d2[e] = dx * dx + dy * dy;
        idx[e] = e;
      }
      std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
      });
      if (d2[idx[0]] < snap2) {
        img.at(i, j) = field[idx[0]];
        continue;
      }
      double vmin = field[idx[0]], vmax = vmin;
      for (int t = 1; t < k; ++t) {
        vmin = std::min(vmin, field[idx[t]]);
        vmax = std::max(vmax, field[idx[t]]);
      }
      if (vmin == vmax) {  // exact for locally constant fields
        img.at(i, j) = vmin;
        continue;
      }
      double wsum = 0, vsum = 0;
      for (int t = 0; t < k; ++t) {
        double w = std::pow(d2[idx[t]], -0.5 * power);
        wsum += w;
        vsum += w * field[idx[t]];
      }
      // convex combination; keep FP rounding inside the neighbor range
      img.at(i, j) = std::clamp(vsum / wsum, vmin, vmax);
    }
  }
  return img;
}

namespace {

constexpr uint32_t kDatasetVersion = 1;

void write_record(AtomicFile& f, uint64_t seed, const PixelImage& img,
                  const MeasurementVector& v) {
  f.write_u64(seed);
  for (double x : img.values) f.write_f32(float(x));
  for (double x : v) f.write_f32(float(x));
}

}  // namespace

void generate_dataset(PhantomKind kind, int count, double snr_db, SplitSpec split,
                      uint64_t base_seed, const std::string& out_dir,
                      const DatasetParams& params) {
  if (count < 1) throw std::invalid_argument("count < 1");
  if (split.train < 0 || split.val < 0 || split.test < 0)
    throw std::invalid_argument("negative split");
  if (split.train + split.val + split.test != count)
    throw std::invalid_argument("split does not sum to count");
  if (std::isnan(snr_db)) throw std::invalid_argument("snr_db is NaN");

  Mesh mesh = build_disk_mesh(params.n_electrodes, params.refinement, params.coverage);
  Protocol protocol = build_adjacent_protocol(params.n_electrodes, params.current);
  auto z = default_contact_impedances(params.n_electrodes, params.contact_impedance);

  std::filesystem::create_directories(out_dir);
  auto path = [&](const std::string& name) { return out_dir + "/" + name; };

  const std::array<std::pair<std::string, int>, 3> splits = {
      {{"train", split.train}, {"val", split.val}, {"test", split.test}}};
  int start = 0;
  std::ostringstream manifest;
  for (const auto& [name, cnt] : splits) {
    AtomicFile f(path(name + ".eitd"));
    f.write("EITD", 4);
    f.write_u32(kDatasetVersion);
    f.write_u32(uint32_t(cnt));
    f.write_u32(uint32_t(params.grid_side));
    f.write_u32(uint32_t(protocol.measurement_count()));
    for (int i = start; i < start + cnt; ++i) {
      uint64_t seed = base_seed + uint64_t(i);
      PhantomSpec spec = sample_phantom(kind, seed);
      ConductivityField sigma = paint_phantom(mesh, spec.background, spec.circles);
      MeasurementVector v = solve_forward(mesh, sigma, z, protocol).measurements;
      v = add_measurement_noise(v, snr_db, splitmix64(seed));
      PixelImage img = rasterize_idw(mesh, sigma, params.grid_side, params.idw_power,
                                     params.idw_neighbors, spec.background);
      write_record(f, seed, img, v);
    }
    manifest << name << " " << start << " " << cnt << "\n";
    f.commit();
    start += cnt;
  }
  write_text_atomic(path("manifest.txt"), manifest.str());
}

DatasetFile load_dataset(const std::string& path) {
  BinaryReader r(read_binary_file(path), path);
  r.expect_magic("EITD");
  DatasetFile f;
  f.version = r.u32();
  if (f.version != kDatasetVersion) throw io_error("unsupported dataset version: " + path);
  uint32_t count = r.u32();
  f.side = int(r.u32());
  f.measurement_count = int(r.u32());
  if (f.side < 1 || f.side > 4096 || f.measurement_count < 1 ||
      f.measurement_count > 1000000 || count > 10000000)
    throw io_error("implausible dataset header: " + path);
  f.records.resize(count);
  for (auto& rec : f.records) {
    rec.seed = r.u64();
    rec.image.side = f.side;
    rec.image.values.resize(size_t(f.side) * f.side);
    for (double& x : rec.image.values) x = r.f32();
    rec.measurements.resize(f.measurement_count);
    for (double& x : rec.measurements) x = r.f32();
  }
  r.done();
  return f;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.name >> e.start >> e.count) || e.start < 0 || e.count < 0)
      throw io_error("bad manifest line in " + path + ": " + line);
    entries.push_back(e);
  }
  if (entries.empty()) throw io_error("empty manifest: " + path);
  return entries;
}

void validate_dataset(const std::string& dir, double background) {
  auto entries = load_manifest(dir + "/manifest.txt");
  int expect_start = 0;
  int side = -1, m = -1;
  bool have_prev_seed = false;
  uint64_t prev_seed = 0;
  for (const auto& e : entries) {
    if (e.start != expect_start)
      throw io_error("manifest ranges not contiguous at split " + e.name);
    expect_start += e.count;
    DatasetFile f = load_dataset(dir + "/" + e.name + ".eitd");
    if (int(f.records.size()) != e.count)
      throw io_error("record count mismatch for split " + e.name);
    if (side < 0) side = f.side, m = f.measurement_count;
    if (f.side != side || f.measurement_count != m)
      throw io_error("inconsistent shapes across splits");
    for (const auto& rec : f.records) {
      if (have_prev_seed && rec.seed != prev_seed + 1)
        throw io_error("non-consecutive record seeds in split " + e.name);
      prev_seed = rec.seed;
      have_prev_seed = true;
      for (double x : rec.measurements)
        if (!std::isfinite(x)) throw io_error("non-finite measurement in " + e.name);
      double fill = double(float(background));
      for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
          double v = rec.image.at(i, j);
          if (!std::isfinite(v)) throw io_error("non-finite pixel in " + e.name);
          bool outside = std::hypot(pixel_x(side, 1.0, j), pixel_y(side, 1.0, i)) > 1.0;
          if (outside && v != fill)
            throw io_error("outside-disk pixel not at background in " + e.name);
        }
    }
  }
}

void save_image_stack(const std::vector<PixelImage>& images, const std::string& path) {
  if (images.empty()) throw std::invalid_argument("empty image stack");
  int side = images[0].side;
  for (const auto& img : images)
    if (img.side != side || int(img.values.size()) != side * side)
      throw std::invalid_argument("inconsistent image sides in stack");
  AtomicFile f(path);
  f.write("EITI", 4);
  f.write_u32(1);
  f.write_u32(uint32_t(images.size()));
  f.write_u32(uint32_t(side));
  for (const auto& img : images)
    for (double x : img.values) f.write_f32(float(x));
  f.commit();
}

std::vector<PixelImage> load_image_stack(const std::string& path) {
  BinaryReader r(read_binary_file(path), path);
  r.expect_magic("EITI");
  if (r.u32() != 1) throw io_error("unsupported image stack version: " + path);
  uint32_t count = r.u32();
  int side = int(r.u32());
  if (side < 1 || side > 4096 || count > 10000000)
    throw io_error("implausible image stack header: " + path);
  std::vector<PixelImage> images(count);
  for (auto& img : images) {
    img.side = side;
    img.values.resize(size_t(side) * side);
    for (double& x : img.values) x = r.f32();
  }
  r.done();
  return images;
}

void save_image_pgm(const PixelImage& image, const std::string& path) {
  if (image.side < 1 || int(image.values.size()) != image.side * image.side)
    throw std::invalid_argument("invalid image");
  double lo = image.values[0], hi = image.values[0];
  for (double v : image.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  AtomicFile f(path);
  std::string header = "P5\n" + std::to_string(image.side) + " " +
                       std::to_string(image.side) + "\n255\n";
  f.write(header.data(), header.size());
  for (double v : image.values) {
    unsigned char b = range > 0 ? (unsigned char)(255.0 * (v - lo) / range + 0.5) : 0;
    f.write(&b, 1);
  }
  f.commit();
}

}  // namespace eit
