// eit: command-line front end over the C API (libeit).
//
// Subcommands: mesh | forward | dataset | reconstruct | sample | metrics |
// toy-score. Global flags: --seed (default seed for any subcommand whose own
// --seed was not given), --config (key=value file, command line overrides),
// --out-dir (prepended to relative output paths). Every subcommand prints one
// space-separated key=value summary line on success; failures print
// "error: <usage|io|numeric>: <message>" to stderr and exit 2/3/4.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eit/eit.h"

namespace {

struct Buf {
  double* p = nullptr;
  ~Buf() { eit_buffer_free(p); }
};

struct MeshHandle {
  eit_mesh* h = nullptr;
  ~MeshHandle() { eit_mesh_free(h); }
};

struct ScoreHandle {
  eit_score* h = nullptr;
  ~ScoreHandle() { eit_score_free(h); }
};

int fail(eit_status st) {
  const char* cat = st == EIT_ERR_INVALID_ARGUMENT ? "usage"
                    : st == EIT_ERR_IO             ? "io"
                                                   : "numeric";
  std::fprintf(stderr, "error: %s: %s\n", cat, eit_last_error());
  return int(st);
}

int usage_fail(const std::string& msg) {
  std::fprintf(stderr, "error: usage: %s\n", msg.c_str());
  return 2;
}

int io_fail(const std::string& msg) {
  std::fprintf(stderr, "error: io: %s\n", msg.c_str());
  return 3;
}

#define TRY(expr)                             \
  do {                                        \
    eit_status try_st_ = (expr);              \
    if (try_st_ != EIT_OK) return fail(try_st_); \
  } while (0)

// round-trip decimal with trailing zeros trimmed; integral values keep one
// decimal so numeric fields always read as numbers ("40.0", not "40")
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string pgm_path(std::string p) {
  if (p.size() > 4 && p.compare(p.size() - 4, 4, ".bin") == 0)
    p.replace(p.size() - 4, 4, ".pgm");
  else
    p += ".pgm";
  return p;
}

int write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) return io_fail("cannot open " + tmp);
    f << text;
    f.flush();
    if (!f) return io_fail("cannot write " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) return io_fail("cannot rename " + tmp + " to " + path);
  return 0;
}

struct Ctx {
  std::string out_dir;

  std::string out(const std::string& p) const {
    if (out_dir.empty() || p.empty() || p.front() == '/') return p;
    return out_dir + "/" + p;
  }
};

// writes <path> as a one-image stack plus a PGM sibling; returns 0 or exit code
int export_image(const double* image, int side, const std::string& path,
                 std::string* pgm_out) {
  TRY(eit_image_stack_save(image, 1, side, path.c_str()));
  const std::string pgm = pgm_path(path);
  TRY(eit_image_save_pgm(image, side, pgm.c_str()));
  if (pgm_out) *pgm_out = pgm;
  return 0;
}

/* ---- mesh --------------------------------------------------------------- */

struct MeshArgs {
  int electrodes = 16;
  int refinement = 2;
  double coverage = 0.5;
  std::string out;
};

int run_mesh(const MeshArgs& a, const Ctx& ctx) {
  MeshHandle mesh;
  TRY(eit_mesh_build(a.electrodes, a.refinement, a.coverage, &mesh.h));
  const std::string path = ctx.out(a.out);
  TRY(eit_mesh_save(mesh.h, path.c_str()));
  std::printf("mesh=%s electrodes=%d refinement=%d nodes=%d elements=%d\n",
              path.c_str(), a.electrodes, a.refinement,
              eit_mesh_node_count(mesh.h), eit_mesh_element_count(mesh.h));
  return 0;
}

/* ---- forward ------------------------------------------------------------ */

struct ForwardArgs {
  std::string mesh, phantom, phantom_kind, phantom_out, out, image_out;
  uint64_t phantom_seed = 0, seed = 0;
  double snr = INFINITY, contact_z = 0.01, current = 1.0;
  int image_side = 128, image_neighbors = 1;
  double image_power = 2.0, image_fill = 1.0;
};

int run_forward(const ForwardArgs& a, const Ctx& ctx) {
  if (a.phantom.empty() == a.phantom_kind.empty())
    return usage_fail("exactly one of --phantom and --phantom-kind is required");
  MeshHandle mesh;
  TRY(eit_mesh_load(a.mesh.c_str(), &mesh.h));
  std::vector<double> sigma(size_t(eit_mesh_element_count(mesh.h)));
  if (!a.phantom.empty()) {
    TRY(eit_phantom_paint_json(mesh.h, a.phantom.c_str(), sigma.data()));
  } else {
    TRY(eit_phantom_paint_kind(mesh.h, a.phantom_kind.c_str(), a.phantom_seed,
                               sigma.data()));
  }
  std::string phantom_json;
  if (!a.phantom_out.empty()) {
    phantom_json = ctx.out(a.phantom_out);
    TRY(eit_phantom_sample_json(a.phantom_kind.c_str(), a.phantom_seed,
                                phantom_json.c_str()));
  }

  Buf v;
  int m = 0;
  TRY(eit_forward_solve(mesh.h, sigma.data(), a.contact_z, a.current, &v.p, &m));
  TRY(eit_add_noise(v.p, m, a.snr, a.seed));
  const std::string out = ctx.out(a.out);
  TRY(eit_measurements_save_csv(v.p, m, out.c_str()));

  std::string image_keys;
  if (!a.image_out.empty()) {
    std::vector<double> img(size_t(a.image_side) * a.image_side);
    TRY(eit_rasterize(mesh.h, sigma.data(), a.image_side, a.image_power,
                      a.image_neighbors, a.image_fill, img.data()));
    const std::string ipath = ctx.out(a.image_out);
    std::string pgm;
    if (int rc = export_image(img.data(), a.image_side, ipath, &pgm)) return rc;
    image_keys = " image=" + ipath + " pgm=" + pgm;
  }
  std::printf("measurements=%s m=%d snr=%s seed=%llu%s%s\n", out.c_str(), m,
              fmt(a.snr).c_str(), (unsigned long long)a.seed,
              phantom_json.empty() ? "" : (" phantom_json=" + phantom_json).c_str(),
              image_keys.c_str());
  return 0;
}

/* ---- reconstruct -------------------------------------------------------- */

struct ReconstructArgs {
  std::string mesh, measurements, out, trace, image_out;
  double lambda = 0.01, contact_z = 0.01, current = 1.0;
  int iters = 20;
  int image_side = 128, image_neighbors = 6;
  double image_power = 2.0, image_fill = 1.0;
};

int run_reconstruct(const ReconstructArgs& a, const Ctx& ctx) {
  MeshHandle mesh;
  TRY(eit_mesh_load(a.mesh.c_str(), &mesh.h));
  Buf v;
  int m = 0;
  TRY(eit_measurements_load_csv(a.measurements.c_str(), &v.p, &m));
  Buf sigma, trace;
  int n = 0, trace_len = 0, converged = 0;
  TRY(eit_reconstruct_run(mesh.h, v.p, m, a.contact_z, a.current, a.lambda,
                          a.iters, nullptr, &sigma.p, &n, &trace.p, &trace_len,
                          &converged));
  const std::string out = ctx.out(a.out);
  TRY(eit_measurements_save_csv(sigma.p, n, out.c_str()));
  std::string extra;
  if (!a.trace.empty()) {
    const std::string tpath = ctx.out(a.trace);
    TRY(eit_trace_save_csv(trace.p, trace_len, tpath.c_str()));
    extra += " trace=" + tpath;
  }
  if (!a.image_out.empty()) {
    std::vector<double> img(size_t(a.image_side) * a.image_side);
    TRY(eit_rasterize(mesh.h, sigma.p, a.image_side, a.image_power,
                      a.image_neighbors, a.image_fill, img.data()));
    const std::string ipath = ctx.out(a.image_out);
    std::string pgm;
    if (int rc = export_image(img.data(), a.image_side, ipath, &pgm)) return rc;
    extra += " image=" + ipath + " pgm=" + pgm;
  }
  std::printf("sigma=%s elements=%d iterations=%d misfit0=%s misfit=%s "
              "converged=%s%s\n",
              out.c_str(), n, trace_len - 1, fmt(trace.p[0]).c_str(),
              fmt(trace.p[trace_len - 1]).c_str(), converged ? "true" : "false",
              extra.c_str());
  return 0;
}

/* ---- dataset ------------------------------------------------------------ */

struct DatasetArgs {
  std::string kind, out;
  int count = 0, train = 0, val = 0, test = 0;
  double snr = INFINITY;
  uint64_t seed = 0;
  int electrodes = 16, refinement = 2, grid = 128, idw_neighbors = 6;
  double coverage = 0.5, current = 1.0, contact_z = 0.01, idw_power = 2.0;
};

int run_dataset(const DatasetArgs& a, const Ctx& ctx) {
  eit_dataset_params p;
  eit_dataset_params_init(&p);
  p.n_electrodes = a.electrodes;
  p.refinement = a.refinement;
  p.coverage = a.coverage;
  p.current = a.current;
  p.contact_impedance = a.contact_z;
  p.grid_side = a.grid;
  p.idw_power = a.idw_power;
  p.idw_neighbors = a.idw_neighbors;
  int train = a.train, val = a.val, test = a.test;
  if (train == 0 && val == 0 && test == 0) train = a.count;
  const std::string dir = ctx.out(a.out);
  TRY(eit_dataset_generate(a.kind.c_str(), a.count, a.snr, train, val, test,
                           a.seed, dir.c_str(), &p));
  std::printf("dir=%s kind=%s count=%d train=%d val=%d test=%d side=%d m=%d "
              "snr=%s seed=%llu\n",
              dir.c_str(), a.kind.c_str(), a.count, train, val, test, a.grid,
              a.electrodes * (a.electrodes - 3), fmt(a.snr).c_str(),
              (unsigned long long)a.seed);
  return 0;
}

/* ---- metrics ------------------------------------------------------------ */

struct MetricsArgs {
  std::string recon, gt, out;
};

int run_metrics(const MetricsArgs& a, const Ctx& ctx) {
  double means[6];
  int pairs = 0;
  const std::string report = a.out.empty() ? std::string() : ctx.out(a.out);
  TRY(eit_metrics_report(a.recon.c_str(), a.gt.c_str(),
                         report.empty() ? nullptr : report.c_str(), means,
                         &pairs));
  std::printf("pairs=%d mse=%s psnr=%s ssim=%s re=%s ae=%s dr=%s%s\n", pairs,
              fmt(means[0]).c_str(), fmt(means[1]).c_str(), fmt(means[2]).c_str(),
              fmt(means[3]).c_str(), fmt(means[4]).c_str(), fmt(means[5]).c_str(),
              report.empty() ? "" : (" report=" + report).c_str());
  return 0;
}

/* ---- sample ------------------------------------------------------------- */

struct SampleArgs {
  std::string mode = "csd-star", mesh, measurements, score, out;
  int k = 0, k_prime = 600, corrector_steps = 1, count = 1, iters = 20;
  double corrector_snr = 0.16, contact_z = 0.01, current = 1.0, lambda = 0.01;
  uint64_t seed = 0;
};

int run_sample(const SampleArgs& a, const Ctx& ctx) {
  ScoreHandle score;
  TRY(eit_score_load(a.score.c_str(), &score.h));
  int ckpt_k = 0;
  TRY(eit_score_schedule(score.h, nullptr, nullptr, &ckpt_k));
  const int side = eit_score_image_side(score.h);
  if (side == 0)
    return usage_fail("score checkpoint dimension " +
                      std::to_string(eit_score_dim(score.h)) +
                      " is not a square image");
  const std::string out = ctx.out(a.out);

  if (a.mode == "csd-star") {
    if (a.mesh.empty() || a.measurements.empty())
      return usage_fail("--mode csd-star requires --mesh and --measurements");
    if (a.k > 0 && a.k != ckpt_k)
      return usage_fail("--k " + std::to_string(a.k) +
                        " does not match the checkpoint schedule (K=" +
                        std::to_string(ckpt_k) + ")");
    MeshHandle mesh;
    TRY(eit_mesh_load(a.mesh.c_str(), &mesh.h));
    Buf v;
    int m = 0;
    TRY(eit_measurements_load_csv(a.measurements.c_str(), &v.p, &m));
    std::vector<double> img(size_t(side) * side);
    TRY(eit_csd_star_run(mesh.h, v.p, m, score.h, a.k_prime, a.corrector_steps,
                         a.corrector_snr, a.contact_z, a.current, a.lambda,
                         a.iters, a.seed, img.data()));
    std::string pgm;
    if (int rc = export_image(img.data(), side, out, &pgm)) return rc;
    std::printf("recon=%s pgm=%s side=%d mode=csd-star k=%d k_prime=%d seed=%llu\n",
                out.c_str(), pgm.c_str(), side, ckpt_k, a.k_prime,
                (unsigned long long)a.seed);
    return 0;
  }

  // unconditional predictor-corrector sampling
  if (a.count < 1) return usage_fail("--count must be >= 1");
  std::vector<double> images(size_t(a.count) * side * side);
  TRY(eit_pc_sample(score.h, a.k, a.corrector_steps, a.corrector_snr, a.count,
                    a.seed, images.data()));
  std::string pgm;
  if (a.count == 1) {
    if (int rc = export_image(images.data(), side, out, &pgm)) return rc;
  } else {
    TRY(eit_image_stack_save(images.data(), a.count, side, out.c_str()));
  }
  std::printf("recon=%s%s side=%d mode=pc count=%d k=%d seed=%llu\n", out.c_str(),
              pgm.empty() ? "" : (" pgm=" + pgm).c_str(), side, a.count,
              a.k > 0 ? a.k : ckpt_k, (unsigned long long)a.seed);
  return 0;
}

/* ---- toy-score ---------------------------------------------------------- */

struct ToyArgs {
  std::string family, out, histogram;
  int side = 16, samples = 4096, steps = 5000, batch = 64, k = 1000;
  std::vector<int> hidden = {64, 64};
  double lr = 1e-3, momentum = 0.9, sigma_min = 0.01, sigma_max = 50.0;
  int report_samples = 2000, bins = 40;
  uint64_t seed = 0;
};

int run_toy_score(const ToyArgs& a, const Ctx& ctx) {
  if (a.hidden.empty() || a.hidden.size() > 8)
    return usage_fail("--hidden takes 1..8 layer widths");
  eit_train_config cfg;
  eit_train_config_init(&cfg);
  cfg.steps = a.steps;
  cfg.batch_size = a.batch;
  for (size_t i = 0; i < a.hidden.size(); ++i) cfg.hidden[i] = a.hidden[i];
  cfg.hidden_count = int(a.hidden.size());
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.seed = a.seed;
  cfg.sigma_min = a.sigma_min;
  cfg.sigma_max = a.sigma_max;
  cfg.k = a.k;

  const std::string out = ctx.out(a.out);
  double loss = 0.0;
  TRY(eit_toy_train(a.family.c_str(), a.side, a.samples, &cfg, out.c_str(),
                    &loss));

  std::string base = "checkpoint=" + out + " family=" + a.family;
  if (a.family != "gmm2d") base += " side=" + std::to_string(a.side);
  base += " steps=" + std::to_string(a.steps) +
          " samples=" + std::to_string(a.samples) + " loss=" + fmt(loss) +
          " seed=" + std::to_string((unsigned long long)a.seed);

  // histogram report: PC-sample the trained 2-D toy and bin the x coordinate
  if (a.family == "gmm2d" && a.report_samples > 0) {
    ScoreHandle score;
    TRY(eit_score_load(out.c_str(), &score.h));
    std::vector<double> pts(size_t(a.report_samples) * 2);
    TRY(eit_pc_sample(score.h, 0, 1, 0.16, a.report_samples, a.seed, pts.data()));
    int pos = 0;
    for (int i = 0; i < a.report_samples; ++i)
      if (pts[size_t(i) * 2] > 0.0) ++pos;
    const double w0 = double(pos) / double(a.report_samples);
    const double w1 = double(a.report_samples - pos) / double(a.report_samples);

    const double lo = -4.0, hi = 4.0;
    std::vector<int> counts(size_t(a.bins), 0);
    for (int i = 0; i < a.report_samples; ++i) {
      const double x = pts[size_t(i) * 2];
      int b = int(std::floor((x - lo) / (hi - lo) * a.bins));
      if (b < 0) b = 0;
      if (b >= a.bins) b = a.bins - 1;
      ++counts[size_t(b)];
    }
    std::string csv = "bin_lo,bin_hi,count\n";
    for (int b = 0; b < a.bins; ++b) {
      const double bl = lo + (hi - lo) * b / a.bins;
      const double bh = lo + (hi - lo) * (b + 1) / a.bins;
      csv += fmt(bl) + "," + fmt(bh) + "," + std::to_string(counts[size_t(b)]) +
             "\n";
    }
    const std::string hist =
        ctx.out(a.histogram.empty() ? a.out + ".hist.csv" : a.histogram);
    if (int rc = write_text_atomic(hist, csv)) return rc;
    base += " weight0=" + fmt(w0) + " weight1=" + fmt(w1) + " histogram=" + hist;
  }
  std::printf("%s\n", base.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EIT forward simulation, reconstruction, and score-based sampling"};
  app.require_subcommand(1);
  app.allow_config_extras(false);
  app.set_config("--config", "", "key=value config file; command line overrides");
  app.set_version_flag("--version", std::string(eit_version()));

  Ctx ctx;
  uint64_t global_seed = 0;
  auto* g_seed =
      app.add_option("--seed", global_seed,
                     "default seed for any subcommand whose --seed is not given");
  app.add_option("--out-dir", ctx.out_dir,
                 "directory prepended to relative output paths");

  MeshArgs mesh_args;
  auto* c_mesh = app.add_subcommand("mesh", "build a disk mesh and save it");
  c_mesh->add_option("--electrodes", mesh_args.electrodes, "electrode count");
  c_mesh->add_option("--refinement", mesh_args.refinement, "angular subdivisions");
  c_mesh->add_option("--coverage", mesh_args.coverage,
                     "electrode arc fraction of the boundary");
  c_mesh->add_option("--out", mesh_args.out, "mesh text file")->required();

  ForwardArgs fw;
  auto* c_fw = app.add_subcommand("forward", "solve the forward problem");
  c_fw->add_option("--mesh", fw.mesh, "mesh text file")->required();
  auto* fw_json = c_fw->add_option("--phantom", fw.phantom, "phantom JSON file");
  auto* fw_kind = c_fw->add_option("--phantom-kind", fw.phantom_kind,
                                   "sample a fresh phantom: two | four");
  fw_json->excludes(fw_kind);
  c_fw->add_option("--phantom-seed", fw.phantom_seed, "phantom sampling seed")
      ->needs(fw_kind);
  c_fw->add_option("--phantom-out", fw.phantom_out,
                   "also save the sampled phantom as JSON")
      ->needs(fw_kind);
  c_fw->add_option("--snr", fw.snr, "measurement SNR in dB (default: noiseless)");
  auto* fw_seed = c_fw->add_option("--seed", fw.seed, "noise seed");
  c_fw->add_option("--out", fw.out, "measurement CSV")->required();
  c_fw->add_option("--contact-z", fw.contact_z, "contact impedance");
  c_fw->add_option("--current", fw.current, "drive current");
  c_fw->add_option("--image-out", fw.image_out,
                   "export the painted phantom as image + PGM");
  c_fw->add_option("--image-side", fw.image_side, "export grid side");
  c_fw->add_option("--image-neighbors", fw.image_neighbors,
                   "IDW neighbors (1 = nearest element)");
  c_fw->add_option("--image-power", fw.image_power, "IDW power");
  c_fw->add_option("--image-fill", fw.image_fill, "value outside the disk");

  ReconstructArgs rc;
  auto* c_rc = app.add_subcommand("reconstruct",
                                  "Levenberg-Marquardt conductivity estimate");
  c_rc->add_option("--mesh", rc.mesh, "mesh text file")->required();
  c_rc->add_option("--measurements", rc.measurements, "measurement CSV")
      ->required();
  c_rc->add_option("--lambda", rc.lambda, "LM damping");
  c_rc->add_option("--iters", rc.iters, "max iterations");
  c_rc->add_option("--out", rc.out, "per-element conductivity CSV")->required();
  c_rc->add_option("--trace", rc.trace, "misfit trace CSV");
  c_rc->add_option("--contact-z", rc.contact_z, "contact impedance");
  c_rc->add_option("--current", rc.current, "drive current");
  c_rc->add_option("--image-out", rc.image_out,
                   "export the reconstruction as image + PGM");
  c_rc->add_option("--image-side", rc.image_side, "export grid side");
  c_rc->add_option("--image-neighbors", rc.image_neighbors, "IDW neighbors");
  c_rc->add_option("--image-power", rc.image_power, "IDW power");
  c_rc->add_option("--image-fill", rc.image_fill, "value outside the disk");

  DatasetArgs ds;
  auto* c_ds = app.add_subcommand("dataset", "synthesize a phantom dataset");
  c_ds->add_option("--kind", ds.kind, "phantom kind: two | four")->required();
  c_ds->add_option("--count", ds.count, "total record count")->required();
  c_ds->add_option("--snr", ds.snr, "measurement SNR in dB (default: noiseless)");
  auto* ds_seed = c_ds->add_option("--seed", ds.seed, "base seed (record i uses seed+i)");
  c_ds->add_option("--out", ds.out, "output directory")->required();
  c_ds->add_option("--train", ds.train, "train split count");
  c_ds->add_option("--val", ds.val, "val split count");
  c_ds->add_option("--test", ds.test, "test split count");
  c_ds->add_option("--electrodes", ds.electrodes, "electrode count");
  c_ds->add_option("--refinement", ds.refinement, "mesh refinement");
  c_ds->add_option("--coverage", ds.coverage, "electrode coverage");
  c_ds->add_option("--current", ds.current, "drive current");
  c_ds->add_option("--contact-z", ds.contact_z, "contact impedance");
  c_ds->add_option("--grid", ds.grid, "image grid side");
  c_ds->add_option("--idw-power", ds.idw_power, "IDW power");
  c_ds->add_option("--idw-neighbors", ds.idw_neighbors, "IDW neighbors");

  MetricsArgs mt;
  auto* c_mt = app.add_subcommand("metrics", "image-pair quality metrics");
  c_mt->add_option("--recon", mt.recon, "reconstruction image stack")->required();
  c_mt->add_option("--gt", mt.gt, "ground-truth image stack")->required();
  c_mt->add_option("--out", mt.out, "per-pair report CSV");

  SampleArgs sp;
  auto* c_sp = app.add_subcommand("sample", "sample from a score checkpoint");
  c_sp->add_option("--mode", sp.mode, "csd-star | pc")
      ->check(CLI::IsMember({"csd-star", "pc"}));
  c_sp->add_option("--mesh", sp.mesh, "mesh text file (csd-star)");
  c_sp->add_option("--measurements", sp.measurements,
                   "measurement CSV (csd-star)");
  c_sp->add_option("--score", sp.score, "score checkpoint")->required();
  c_sp->add_option("--k", sp.k, "schedule steps (0 = checkpoint K)");
  c_sp->add_option("--k-prime", sp.k_prime, "hijack step count (csd-star)");
  c_sp->add_option("--corrector-steps", sp.corrector_steps,
                   "Langevin steps per grid point");
  c_sp->add_option("--corrector-snr", sp.corrector_snr, "corrector step scale");
  c_sp->add_option("--count", sp.count, "sample count (pc)");
  c_sp->add_option("--lambda", sp.lambda, "LM damping (csd-star)");
  c_sp->add_option("--iters", sp.iters, "LM max iterations (csd-star)");
  c_sp->add_option("--contact-z", sp.contact_z, "contact impedance (csd-star)");
  c_sp->add_option("--current", sp.current, "drive current (csd-star)");
  auto* sp_seed = c_sp->add_option("--seed", sp.seed, "sampling seed");
  c_sp->add_option("--out", sp.out, "output image stack")->required();

  ToyArgs toy;
  auto* c_toy = app.add_subcommand("toy-score", "train a toy score model");
  c_toy->add_option("--train", toy.family, "family: gmm2d | two | four")
      ->required()
      ->check(CLI::IsMember({"gmm2d", "two", "four"}));
  c_toy->add_option("--side", toy.side, "image side (two | four)");
  c_toy->add_option("--samples", toy.samples, "training set size");
  c_toy->add_option("--steps", toy.steps, "optimizer steps");
  c_toy->add_option("--batch", toy.batch, "batch size");
  c_toy->add_option("--hidden", toy.hidden, "hidden layer widths")
      ->delimiter(',');
  c_toy->add_option("--lr", toy.lr, "learning rate");
  c_toy->add_option("--momentum", toy.momentum, "momentum");
  c_toy->add_option("--sigma-min", toy.sigma_min, "schedule sigma_min");
  c_toy->add_option("--sigma-max", toy.sigma_max, "schedule sigma_max");
  c_toy->add_option("--k", toy.k, "schedule steps");
  c_toy->add_option("--report-samples", toy.report_samples,
                    "PC samples for the gmm2d histogram report (0 = skip)");
  c_toy->add_option("--bins", toy.bins, "histogram bins");
  c_toy->add_option("--histogram", toy.histogram,
                    "histogram CSV (default: <out>.hist.csv)");
  auto* toy_seed = c_toy->add_option("--seed", toy.seed, "training seed");
  c_toy->add_option("--out", toy.out, "score checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 2;
  }

  if (!ctx.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) return io_fail("cannot create " + ctx.out_dir);
  }

  if (g_seed->count()) {
    if (!fw_seed->count()) fw.seed = global_seed;
    if (!ds_seed->count()) ds.seed = global_seed;
    if (!sp_seed->count()) sp.seed = global_seed;
    if (!toy_seed->count()) toy.seed = global_seed;
  }

  if (c_mesh->parsed()) return run_mesh(mesh_args, ctx);
  if (c_fw->parsed()) return run_forward(fw, ctx);
  if (c_rc->parsed()) return run_reconstruct(rc, ctx);
  if (c_ds->parsed()) return run_dataset(ds, ctx);
  if (c_mt->parsed()) return run_metrics(mt, ctx);
  if (c_sp->parsed()) return run_sample(sp, ctx);
  if (c_toy->parsed()) return run_toy_score(toy, ctx);
  return usage_fail("no subcommand given");
}
