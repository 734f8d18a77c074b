#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "doctest.h"
#include "forward.hpp"
#include "phantom.hpp"

using namespace eit;

namespace {

// two-sided KS statistic against U(lo, hi)
double ks_stat(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  double n = double(xs.size()), d = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double f = (xs[i] - lo) / (hi - lo);
    d = std::max(d, std::abs((i + 1) / n - f));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("sample_phantom kinds, bounds, determinism") {
  PhantomSpec two = sample_phantom(PhantomKind::two, 11);
  REQUIRE(two.circles.size() == 2);
  CHECK(two.circles[0].value == 0.5);
  CHECK(two.circles[1].value == 1.5);
  CHECK(two.background == 1.0);

  PhantomSpec four = sample_phantom(PhantomKind::four, 11);
  REQUIRE(four.circles.size() == 4);
  CHECK(four.circles[0].value == 0.01);
  CHECK(four.circles[1].value == 0.1);
  CHECK(four.circles[2].value == 0.5);
  CHECK(four.circles[3].value == 1.5);

  for (uint64_t s = 0; s < 1000; ++s) {
    PhantomSpec p = sample_phantom(PhantomKind::four, s);
    for (const Circle& c : p.circles) {
      CHECK(std::hypot(c.cx, c.cy) + c.r < 1.0);
      CHECK(c.cx > -0.55);
      CHECK(c.cx < 0.55);
      CHECK(c.cy > -0.55);
      CHECK(c.cy < 0.55);
      CHECK(c.r >= 0.1);
      CHECK(c.r < 0.3);
    }
  }

  PhantomSpec a = sample_phantom(PhantomKind::two, 99);
  PhantomSpec b = sample_phantom(PhantomKind::two, 99);
  CHECK(a.circles[0].cx == b.circles[0].cx);
  CHECK(a.circles[1].r == b.circles[1].r);
  CHECK(parse_phantom_kind("two") == PhantomKind::two);
  CHECK(parse_phantom_kind("four") == PhantomKind::four);
  CHECK_THROWS_AS(parse_phantom_kind("six"), std::invalid_argument);
}

TEST_CASE("sample_phantom coordinates pass Kolmogorov-Smirnov at the 1% level") {
  const int n = 10000;
  std::vector<double> cx0, cy0, cx1, cy1, r0;
  for (uint64_t s = 0; s < n; ++s) {
    PhantomSpec p = sample_phantom(PhantomKind::two, s);
    cx0.push_back(p.circles[0].cx);
    cy0.push_back(p.circles[0].cy);
    cx1.push_back(p.circles[1].cx);
    cy1.push_back(p.circles[1].cy);
    r0.push_back(p.circles[0].r);
  }
  double crit = 1.628 / std::sqrt(double(n));  // 1% critical value
  CHECK(ks_stat(cx0, -0.55, 0.55) < crit);
  CHECK(ks_stat(cy0, -0.55, 0.55) < crit);
  CHECK(ks_stat(cx1, -0.55, 0.55) < crit);
  CHECK(ks_stat(cy1, -0.55, 0.55) < crit);
  CHECK(ks_stat(r0, 0.1, 0.3) < crit);
}

TEST_CASE("phantom json round trip and validation") {
  PhantomSpec spec = sample_phantom(PhantomKind::four, 7);
  spec.background = 2.5;
  save_phantom_json(spec, "ph_rt.json");
  PhantomSpec r = load_phantom_json("ph_rt.json");
  CHECK(r.background == spec.background);
  REQUIRE(r.circles.size() == spec.circles.size());
  for (size_t i = 0; i < r.circles.size(); ++i) {
    CHECK(r.circles[i].cx == spec.circles[i].cx);
    CHECK(r.circles[i].cy == spec.circles[i].cy);
    CHECK(r.circles[i].r == spec.circles[i].r);
    CHECK(r.circles[i].value == spec.circles[i].value);
  }
  std::remove("ph_rt.json");

  write_text_atomic("ph_bad.json", "{not json");
  CHECK_THROWS_AS(load_phantom_json("ph_bad.json"), io_error);
  write_text_atomic("ph_bad.json", "{\"background\": -1, \"circles\": []}");
  CHECK_THROWS_AS(load_phantom_json("ph_bad.json"), io_error);
  write_text_atomic("ph_bad.json",
                    "{\"background\": 1, \"circles\": [{\"cx\":0,\"cy\":0,\"r\":-0.1,\"value\":1}]}");
  CHECK_THROWS_AS(load_phantom_json("ph_bad.json"), io_error);
  std::remove("ph_bad.json");
  CHECK_THROWS_AS(load_phantom_json("ph_missing.json"), io_error);
}

TEST_CASE("rasterize_idw basics") {
  Mesh m = build_disk_mesh(16, 1, 0.5);

  ConductivityField flat(m.element_count(), 2.25);
  PixelImage img = rasterize_idw(m, flat, 64, 2.0, 6, 7.0);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      bool outside = std::hypot(pixel_x(64, 1.0, j), pixel_y(64, 1.0, i)) > 1.0;
      CHECK(img.at(i, j) == (outside ? 7.0 : 2.25));
    }

  auto painted = paint_phantom(m, 1.0, {{0.3, 0.1, 0.3, 1.5}, {-0.3, -0.2, 0.2, 0.5}});
  double lo = *std::min_element(painted.begin(), painted.end());
  double hi = *std::max_element(painted.begin(), painted.end());
  PixelImage p = rasterize_idw(m, painted, 96, 2.0, 6, 1.0);
  for (int i = 0; i < 96; ++i)
    for (int j = 0; j < 96; ++j) {
      bool outside = std::hypot(pixel_x(96, 1.0, j), pixel_y(96, 1.0, i)) > 1.0;
      if (outside) continue;
      CHECK(p.at(i, j) >= lo);
      CHECK(p.at(i, j) <= hi);
    }

  CHECK_THROWS_AS(rasterize_idw(m, flat, 0, 2.0, 6, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rasterize_idw(m, flat, 8, 0.0, 6, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rasterize_idw(m, flat, 8, 2.0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rasterize_idw(m, ConductivityField(3, 1.0), 8, 2.0, 6, 1.0),
                  std::invalid_argument);
}

TEST_CASE("rasterize_idw single pixel matches hand-computed weights") {
  // triangles with centroids at distances 0.2, 0.4, 0.5 from the origin
  Mesh m;
  m.radius = 1.0;
  auto add_tri = [&](double cx, double cy) {
    double a = 0.01;
    int base = int(m.nodes.size());
    m.nodes.push_back({cx - a, cy - a});
    m.nodes.push_back({cx + 2 * a, cy - a});
    m.nodes.push_back({cx - a, cy + 2 * a});
    m.elements.push_back({base, base + 1, base + 2});
  };
  add_tri(0.2, 0.0);
  add_tri(0.0, 0.4);
  add_tri(-0.5, 0.0);

  // grid of one pixel centered at the origin; weights d^-2 = 25, 6.25, 4
  PixelImage img = rasterize_idw(m, {1.0, 2.0, 3.0}, 1, 2.0, 3, 9.0);
  REQUIRE(img.side == 1);
  CHECK(std::abs(img.at(0, 0) - 66.0 / 47.0) < 1e-12);

  // snapped pixel: centroid exactly at the pixel center
  Mesh ms;
  ms.radius = 1.0;
  ms.nodes = {{-0.01, -0.01}, {0.02, -0.01}, {-0.01, 0.02}};
  ms.elements = {{0, 1, 2}};
  PixelImage snap = rasterize_idw(ms, {5.5}, 1, 2.0, 1, 0.0);
  CHECK(snap.at(0, 0) == 5.5);
}

TEST_CASE("rasterize_idw is reflection equivariant") {
  Mesh m = build_disk_mesh(16, 2, 0.5);
  auto field = paint_phantom(m, 1.0, {{0.3, 0.25, 0.28, 1.5}, {-0.2, -0.4, 0.15, 0.5}});

  // mirror the field across the x-axis by matching reflected centroids
  const int ne = m.element_count();
  ConductivityField mirrored(ne);
  for (int e = 0; e < ne; ++e) {
    auto c = element_centroid(m, e);
    int match = -1;
    for (int f = 0; f < ne; ++f) {
      auto cf = element_centroid(m, f);
      if (std::abs(cf[0] - c[0]) < 1e-12 && std::abs(cf[1] + c[1]) < 1e-12) {
        match = f;
        break;
      }
    }
    REQUIRE(match >= 0);
    mirrored[match] = field[e];
  }

  PixelImage a = rasterize_idw(m, field, 64, 2.0, 6, 1.0);
  PixelImage b = rasterize_idw(m, mirrored, 64, 2.0, 6, 1.0);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j)
      CHECK(std::abs(b.at(63 - i, j) - a.at(i, j)) < 1e-9);
}

TEST_CASE("dataset generation, reload, validation, determinism") {
  TempDir dir("eitd_case");
  DatasetParams params;
  params.refinement = 1;
  params.grid_side = 32;
  generate_dataset(PhantomKind::two, 30, 40.0, {20, 6, 4}, 500, dir.str(), params);

  auto manifest = load_manifest(dir.str() + "/manifest.txt");
  REQUIRE(manifest.size() == 3);
  CHECK(manifest[0].name == "train");
  CHECK(manifest[0].start == 0);
  CHECK(manifest[0].count == 20);
  CHECK(manifest[1].name == "val");
  CHECK(manifest[1].start == 20);
  CHECK(manifest[1].count == 6);
  CHECK(manifest[2].name == "test");
  CHECK(manifest[2].start == 26);
  CHECK(manifest[2].count == 4);

  DatasetFile train = load_dataset(dir.str() + "/train.eitd");
  CHECK(train.records.size() == 20);
  CHECK(train.side == 32);
  CHECK(train.measurement_count == 208);
  CHECK(train.records[0].seed == 500);
  CHECK(train.records[19].seed == 519);

  validate_dataset(dir.str());

  // byte-identical regeneration
  TempDir dir2("eitd_case2");
  generate_dataset(PhantomKind::two, 30, 40.0, {20, 6, 4}, 500, dir2.str(), params);
  for (const char* f : {"train.eitd", "val.eitd", "test.eitd", "manifest.txt"}) {
    std::string a = read_binary_file(dir.str() + "/" + std::string(f));
    std::string b = read_binary_file(dir2.str() + "/" + std::string(f));
    CHECK(a == b);
  }

  // a stored record reproduces from its seed alone
  Mesh mesh = build_disk_mesh(16, 1, 0.5);
  Protocol protocol = build_adjacent_protocol(16, 1.0);
  auto z = default_contact_impedances(16);
  const DatasetRecord& rec = train.records[7];
  PhantomSpec spec = sample_phantom(PhantomKind::two, rec.seed);
  auto sigma = paint_phantom(mesh, spec.background, spec.circles);
  auto v = solve_forward(mesh, sigma, z, protocol).measurements;
  v = add_measurement_noise(v, 40.0, splitmix64(rec.seed));
  PixelImage img = rasterize_idw(mesh, sigma, 32, 2.0, 6, spec.background);
  for (size_t i = 0; i < v.size(); ++i) CHECK(rec.measurements[i] == double(float(v[i])));
  for (size_t i = 0; i < img.values.size(); ++i)
    CHECK(rec.image.values[i] == double(float(img.values[i])));

  CHECK_THROWS_AS(generate_dataset(PhantomKind::two, 10, 40.0, {5, 4, 2}, 1, dir.str()),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_dataset(PhantomKind::two, 0, 40.0, {0, 0, 0}, 1, dir.str()),
                  std::invalid_argument);
}

TEST_CASE("dataset validation rejects corruption") {
  TempDir dir("eitd_corrupt");
  DatasetParams params;
  params.refinement = 1;
  params.grid_side = 16;
  generate_dataset(PhantomKind::two, 6, 30.0, {4, 1, 1}, 42, dir.str(), params);
  validate_dataset(dir.str());

  // corner pixel (0,0) lies outside the disk; poke a wrong value into it
  std::string path = dir.str() + "/train.eitd";
  std::string bytes = read_binary_file(path);
  float wrong = 9.0f;
  std::memcpy(bytes.data() + 20 + 8, &wrong, 4);
  std::ofstream(path, std::ios::binary) << bytes;
  CHECK_THROWS_AS(validate_dataset(dir.str()), io_error);

  // truncated file
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(load_dataset(path), io_error);

  // bad magic
  bytes[0] = 'X';
  std::ofstream(path, std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_dataset(path), io_error);
}

TEST_CASE("image stack round trip and pgm") {
  Rng rng(5);
  std::vector<PixelImage> imgs(3);
  for (auto& img : imgs) {
    img.side = 8;
    for (int i = 0; i < 64; ++i) img.values.push_back(double(float(rng.uniform())));
  }
  save_image_stack(imgs, "stack_rt.eiti");
  auto r = load_image_stack("stack_rt.eiti");
  REQUIRE(r.size() == 3);
  for (int s = 0; s < 3; ++s) {
    CHECK(r[s].side == 8);
    CHECK(r[s].values == imgs[s].values);
  }
  std::remove("stack_rt.eiti");

  CHECK_THROWS_AS(load_image_stack("missing.eiti"), io_error);
  CHECK_THROWS_AS(save_image_stack({}, "x.eiti"), std::invalid_argument);

  PixelImage tiny;
  tiny.side = 2;
  tiny.values = {0.0, 1.0, 0.5, 1.0};
  save_image_pgm(tiny, "tiny.pgm");
  std::string pgm = read_binary_file("tiny.pgm");
  CHECK(pgm == std::string("P5\n2 2\n255\n") + '\0' + '\xff' + '\x80' + '\xff');
  std::remove("tiny.pgm");

  PixelImage flat;
  flat.side = 2;
  flat.values = {3.0, 3.0, 3.0, 3.0};
  save_image_pgm(flat, "flat.pgm");
  std::string fp = read_binary_file("flat.pgm");
  CHECK(fp.substr(fp.size() - 4) == std::string(4, '\0'));
  std::remove("flat.pgm");
}
