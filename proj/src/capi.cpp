#include "eit/eit.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "forward.hpp"
#include "inverse.hpp"
#include "mesh.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "sde.hpp"

struct eit_mesh {
  eit::Mesh m;
};

struct eit_score {
  eit::DenseNet net;
  eit::SdeSchedule schedule;
};

namespace {

thread_local std::string t_last_error;

template <typename F>
eit_status guarded(F&& f) noexcept {
  try {
    t_last_error.clear();
    f();
    return EIT_OK;
  } catch (const std::invalid_argument& e) {
    t_last_error = e.what();
    return EIT_ERR_INVALID_ARGUMENT;
  } catch (const eit::io_error& e) {
    t_last_error = e.what();
    return EIT_ERR_IO;
  } catch (const eit::numeric_error& e) {
    t_last_error = e.what();
    return EIT_ERR_NUMERIC;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return EIT_ERR_NUMERIC;
  } catch (...) {
    t_last_error = "unknown error";
    return EIT_ERR_NUMERIC;
  }
}

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double* alloc_buffer(size_t n) {
  double* p = static_cast<double*>(std::malloc(n * sizeof(double)));
  if (!p) throw std::bad_alloc();
  return p;
}

double* alloc_copy(const std::vector<double>& v) {
  double* p = alloc_buffer(v.size());
  std::memcpy(p, v.data(), v.size() * sizeof(double));
  return p;
}

eit::PixelImage make_image(const double* values, int side) {
  require(side >= 1, "image side must be >= 1");
  eit::PixelImage img;
  img.side = side;
  img.values.assign(values, values + size_t(side) * side);
  return img;
}

eit::PhantomKind parse_family_kind(const char* family) {
  try {
    return eit::parse_phantom_kind(family);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string("unknown toy family: ") + family);
  }
}

}  // namespace

extern "C" {

const char* eit_last_error(void) { return t_last_error.c_str(); }

const char* eit_version(void) { return "0.1.0"; }

void eit_buffer_free(double* buffer) { std::free(buffer); }

/* ---- mesh ------------------------------------------------------------- */

eit_status eit_mesh_build(int n_electrodes, int refinement, double coverage,
                          eit_mesh** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    auto* h = new eit_mesh{eit::build_disk_mesh(n_electrodes, refinement, coverage)};
    *out = h;
  });
}

eit_status eit_mesh_load(const char* path, eit_mesh** out) {
  return guarded([&] {
    require(path != nullptr, "null path");
    require(out != nullptr, "null output handle");
    auto* h = new eit_mesh{eit::load_mesh(path)};
    *out = h;
  });
}

eit_status eit_mesh_save(const eit_mesh* mesh, const char* path) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(path != nullptr, "null path");
    eit::save_mesh(mesh->m, path);
  });
}

void eit_mesh_free(eit_mesh* mesh) { delete mesh; }

int eit_mesh_node_count(const eit_mesh* mesh) {
  return mesh ? mesh->m.node_count() : 0;
}

int eit_mesh_element_count(const eit_mesh* mesh) {
  return mesh ? mesh->m.element_count() : 0;
}

int eit_mesh_electrode_count(const eit_mesh* mesh) {
  return mesh ? mesh->m.electrode_count() : 0;
}

/* ---- phantoms ---------------------------------------------------------- */

eit_status eit_phantom_sample_json(const char* kind, uint64_t seed,
                                   const char* path) {
  return guarded([&] {
    require(kind != nullptr, "null kind");
    require(path != nullptr, "null path");
    eit::PhantomSpec spec = eit::sample_phantom(eit::parse_phantom_kind(kind), seed);
    eit::save_phantom_json(spec, path);
  });
}

eit_status eit_phantom_paint_json(const eit_mesh* mesh, const char* json_path,
                                  double* sigma_out) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(json_path != nullptr, "null path");
    require(sigma_out != nullptr, "null output buffer");
    eit::PhantomSpec spec = eit::load_phantom_json(json_path);
    eit::ConductivityField f =
        eit::paint_phantom(mesh->m, spec.background, spec.circles);
    std::memcpy(sigma_out, f.data(), f.size() * sizeof(double));
  });
}

eit_status eit_phantom_paint_kind(const eit_mesh* mesh, const char* kind,
                                  uint64_t seed, double* sigma_out) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(kind != nullptr, "null kind");
    require(sigma_out != nullptr, "null output buffer");
    eit::PhantomSpec spec = eit::sample_phantom(eit::parse_phantom_kind(kind), seed);
    eit::ConductivityField f =
        eit::paint_phantom(mesh->m, spec.background, spec.circles);
    std::memcpy(sigma_out, f.data(), f.size() * sizeof(double));
  });
}

/* ---- forward problem --------------------------------------------------- */

eit_status eit_forward_solve(const eit_mesh* mesh, const double* sigma,
                             double contact_impedance, double current,
                             double** v_out, int* m_out) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(sigma != nullptr, "null conductivity field");
    require(v_out != nullptr && m_out != nullptr, "null output pointer");
    const eit::Mesh& m = mesh->m;
    eit::ConductivityField field(sigma, sigma + m.element_count());
    auto z = eit::default_contact_impedances(m.electrode_count(), contact_impedance);
    eit::Protocol protocol = eit::build_adjacent_protocol(m.electrode_count(), current);
    eit::MeasurementVector v =
        eit::solve_forward(m, field, z, protocol).measurements;
    *v_out = alloc_copy(v);
    *m_out = int(v.size());
  });
}

eit_status eit_add_noise(double* v, int m, double snr_db, uint64_t seed) {
  return guarded([&] {
    require(v != nullptr, "null measurement buffer");
    require(m >= 1, "measurement count must be >= 1");
    eit::MeasurementVector vec(v, v + m);
    vec = eit::add_measurement_noise(vec, snr_db, seed);
    std::memcpy(v, vec.data(), vec.size() * sizeof(double));
  });
}

eit_status eit_measurements_save_csv(const double* v, int m, const char* path) {
  return guarded([&] {
    require(v != nullptr, "null measurement buffer");
    require(m >= 1, "measurement count must be >= 1");
    require(path != nullptr, "null path");
    eit::save_measurements_csv(eit::MeasurementVector(v, v + m), path);
  });
}

eit_status eit_measurements_load_csv(const char* path, double** v_out,
                                     int* m_out) {
  return guarded([&] {
    require(path != nullptr, "null path");
    require(v_out != nullptr && m_out != nullptr, "null output pointer");
    eit::MeasurementVector v = eit::load_measurements_csv(path);
    *v_out = alloc_copy(v);
    *m_out = int(v.size());
  });
}

/* ---- reconstruction ---------------------------------------------------- */

eit_status eit_reconstruct_run(const eit_mesh* mesh, const double* v, int m,
                               double contact_impedance, double current,
                               double lambda, int max_iters,
                               const double* initial_sigma, double** sigma_out,
                               int* n_out, double** trace_out, int* trace_len_out,
                               int* converged_out) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(v != nullptr, "null measurement buffer");
    require(m >= 1, "measurement count must be >= 1");
    require(sigma_out != nullptr && n_out != nullptr, "null output pointer");
    require(trace_out != nullptr && trace_len_out != nullptr,
            "null output pointer");
    const eit::Mesh& msh = mesh->m;
    auto z = eit::default_contact_impedances(msh.electrode_count(), contact_impedance);
    eit::Protocol protocol =
        eit::build_adjacent_protocol(msh.electrode_count(), current);
    eit::InverseConfig cfg;
    cfg.lambda = lambda;
    cfg.max_iters = max_iters;
    if (initial_sigma)
      cfg.initial_sigma.assign(initial_sigma, initial_sigma + msh.element_count());
    eit::ReconstructionResult r =
        eit::reconstruct(eit::MeasurementVector(v, v + m), msh, z, protocol, cfg);
    if (r.aborted) throw eit::numeric_error(r.abort_message);
    *sigma_out = alloc_copy(r.sigma);
    *n_out = int(r.sigma.size());
    *trace_out = alloc_copy(r.trace);
    *trace_len_out = int(r.trace.size());
    if (converged_out) *converged_out = r.converged ? 1 : 0;
  });
}

eit_status eit_trace_save_csv(const double* misfits, int n, const char* path) {
  return guarded([&] {
    require(misfits != nullptr, "null trace buffer");
    require(n >= 1, "trace length must be >= 1");
    require(path != nullptr, "null path");
    eit::save_trace_csv(std::vector<double>(misfits, misfits + n), path);
  });
}

/* ---- images ------------------------------------------------------------ */

eit_status eit_rasterize(const eit_mesh* mesh, const double* field, int side,
                         double power, int neighbors, double outside_fill,
                         double* image_out) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(field != nullptr, "null field buffer");
    require(image_out != nullptr, "null output buffer");
    const eit::Mesh& m = mesh->m;
    eit::ConductivityField f(field, field + m.element_count());
    eit::PixelImage img =
        eit::rasterize_idw(m, f, side, power, neighbors, outside_fill);
    std::memcpy(image_out, img.values.data(), img.values.size() * sizeof(double));
  });
}

eit_status eit_image_stack_save(const double* images, int count, int side,
                                const char* path) {
  return guarded([&] {
    require(images != nullptr, "null image buffer");
    require(count >= 1, "image count must be >= 1");
    require(path != nullptr, "null path");
    std::vector<eit::PixelImage> stack;
    stack.reserve(size_t(count));
    for (int i = 0; i < count; ++i)
      stack.push_back(make_image(images + size_t(i) * side * side, side));
    eit::save_image_stack(stack, path);
  });
}

eit_status eit_image_stack_load(const char* path, double** images_out,
                                int* count_out, int* side_out) {
  return guarded([&] {
    require(path != nullptr, "null path");
    require(images_out != nullptr && count_out != nullptr && side_out != nullptr,
            "null output pointer");
    std::vector<eit::PixelImage> stack = eit::load_image_stack(path);
    const int side = stack[0].side;
    const size_t per = size_t(side) * side;
    double* buf = alloc_buffer(per * stack.size());
    for (size_t i = 0; i < stack.size(); ++i)
      std::memcpy(buf + i * per, stack[i].values.data(), per * sizeof(double));
    *images_out = buf;
    *count_out = int(stack.size());
    *side_out = side;
  });
}

eit_status eit_image_save_pgm(const double* image, int side, const char* path) {
  return guarded([&] {
    require(image != nullptr, "null image buffer");
    require(path != nullptr, "null path");
    eit::save_image_pgm(make_image(image, side), path);
  });
}

/* ---- metrics ----------------------------------------------------------- */

eit_status eit_metrics_compute(const double* recon, const double* gt, int side,
                               double* out) {
  return guarded([&] {
    require(recon != nullptr && gt != nullptr, "null image buffer");
    require(out != nullptr, "null output buffer");
    eit::MetricReport r =
        eit::compute_metrics(make_image(recon, side), make_image(gt, side));
    out[0] = r.mse;
    out[1] = r.psnr;
    out[2] = r.ssim;
    out[3] = r.re;
    out[4] = r.ae;
    out[5] = r.dr;
  });
}

eit_status eit_metrics_report(const char* recon_path, const char* gt_path,
                              const char* csv_path, double* means_out,
                              int* pairs_out) {
  return guarded([&] {
    require(recon_path != nullptr && gt_path != nullptr, "null path");
    std::vector<eit::PixelImage> recon = eit::load_image_stack(recon_path);
    std::vector<eit::PixelImage> gt = eit::load_image_stack(gt_path);
    if (recon.size() != gt.size())
      throw eit::io_error("image stacks differ in record count: " +
                          std::string(recon_path) + " vs " + gt_path);
    if (recon[0].side != gt[0].side)
      throw eit::io_error("image stacks differ in side: " +
                          std::string(recon_path) + " vs " + gt_path);
    std::vector<eit::MetricReport> rows;
    rows.reserve(recon.size());
    for (size_t i = 0; i < recon.size(); ++i)
      rows.push_back(eit::compute_metrics(recon[i], gt[i]));
    if (csv_path) eit::save_metric_report_csv(rows, csv_path);
    if (means_out) {
      double acc[6] = {0, 0, 0, 0, 0, 0};
      for (const auto& r : rows) {
        acc[0] += r.mse;
        acc[1] += r.psnr;
        acc[2] += r.ssim;
        acc[3] += r.re;
        acc[4] += r.ae;
        acc[5] += r.dr;
      }
      for (int j = 0; j < 6; ++j) means_out[j] = acc[j] / double(rows.size());
    }
    if (pairs_out) *pairs_out = int(rows.size());
  });
}

/* ---- dataset ----------------------------------------------------------- */

void eit_dataset_params_init(eit_dataset_params* params) {
  if (!params) return;
  eit::DatasetParams d;
  params->n_electrodes = d.n_electrodes;
  params->refinement = d.refinement;
  params->coverage = d.coverage;
  params->current = d.current;
  params->contact_impedance = d.contact_impedance;
  params->grid_side = d.grid_side;
  params->idw_power = d.idw_power;
  params->idw_neighbors = d.idw_neighbors;
}

eit_status eit_dataset_generate(const char* kind, int count, double snr_db,
                                int train, int val, int test, uint64_t base_seed,
                                const char* out_dir,
                                const eit_dataset_params* params) {
  return guarded([&] {
    require(kind != nullptr, "null kind");
    require(out_dir != nullptr, "null output directory");
    eit::DatasetParams d;
    if (params) {
      d.n_electrodes = params->n_electrodes;
      d.refinement = params->refinement;
      d.coverage = params->coverage;
      d.current = params->current;
      d.contact_impedance = params->contact_impedance;
      d.grid_side = params->grid_side;
      d.idw_power = params->idw_power;
      d.idw_neighbors = params->idw_neighbors;
    }
    eit::generate_dataset(eit::parse_phantom_kind(kind), count, snr_db,
                          eit::SplitSpec{train, val, test}, base_seed, out_dir, d);
  });
}

/* ---- score models ------------------------------------------------------ */

eit_status eit_score_load(const char* path, eit_score** out) {
  return guarded([&] {
    require(path != nullptr, "null path");
    require(out != nullptr, "null output handle");
    auto [net, schedule] = eit::load_score_checkpoint(path);
    *out = new eit_score{std::move(net), schedule};
  });
}

void eit_score_free(eit_score* score) { delete score; }

int eit_score_dim(const eit_score* score) {
  return score ? score->net.output_dim() : 0;
}

int eit_score_image_side(const eit_score* score) {
  if (!score) return 0;
  const int dim = score->net.output_dim();
  const int side = int(std::lround(std::sqrt(double(dim))));
  return side * side == dim ? side : 0;
}

eit_status eit_score_schedule(const eit_score* score, double* sigma_min,
                              double* sigma_max, int* k) {
  return guarded([&] {
    require(score != nullptr, "null score handle");
    if (sigma_min) *sigma_min = score->schedule.sigma_min;
    if (sigma_max) *sigma_max = score->schedule.sigma_max;
    if (k) *k = score->schedule.K;
  });
}

eit_status eit_pc_sample(const eit_score* score, int k, int corrector_steps,
                         double corrector_snr, int n_samples, uint64_t seed,
                         double* out) {
  return guarded([&] {
    require(score != nullptr, "null score handle");
    require(n_samples >= 1, "sample count must be >= 1");
    require(out != nullptr, "null output buffer");
    const int steps = k <= 0 ? score->schedule.K : k;
    const int dim = score->net.output_dim();
    eit::ScoreFunction fn = eit::score_as_function(score->net);
    for (int i = 0; i < n_samples; ++i) {
      const uint64_t s =
          eit::splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * uint64_t(i + 1)));
      Eigen::VectorXd x = eit::pc_sample(fn, score->schedule, steps,
                                         corrector_steps, corrector_snr, dim, s);
      std::memcpy(out + size_t(i) * dim, x.data(), size_t(dim) * sizeof(double));
    }
  });
}

eit_status eit_csd_star_run(const eit_mesh* mesh, const double* v, int m,
                            const eit_score* score, int k_prime,
                            int corrector_steps, double corrector_snr,
                            double contact_impedance, double current,
                            double lambda, int max_iters, uint64_t seed,
                            double* image_out) {
  return guarded([&] {
    require(mesh != nullptr, "null mesh");
    require(v != nullptr, "null measurement buffer");
    require(m >= 1, "measurement count must be >= 1");
    require(score != nullptr, "null score handle");
    require(image_out != nullptr, "null output buffer");
    const int side = eit_score_image_side(score);
    require(side >= 1, "score checkpoint is not a square image model");
    const eit::Mesh& msh = mesh->m;
    auto z = eit::default_contact_impedances(msh.electrode_count(), contact_impedance);
    eit::Protocol protocol =
        eit::build_adjacent_protocol(msh.electrode_count(), current);
    eit::InverseConfig inv;
    inv.lambda = lambda;
    inv.max_iters = max_iters;
    eit::CsdStarConfig cfg;
    cfg.K = score->schedule.K;
    cfg.K_prime = k_prime;
    cfg.corrector_steps = corrector_steps;
    cfg.corrector_snr = corrector_snr;
    eit::RasterContext raster;
    raster.grid_side = side;
    eit::ScoreFunction fn = eit::score_as_function(score->net);
    eit::PixelImage img = eit::csd_star_pipeline(
        eit::MeasurementVector(v, v + m), msh, z, protocol, inv, fn, cfg,
        score->schedule, raster, seed);
    std::memcpy(image_out, img.values.data(), img.values.size() * sizeof(double));
  });
}

/* ---- toy score training ------------------------------------------------ */

void eit_train_config_init(eit_train_config* config) {
  if (!config) return;
  eit::DsmTrainConfig d;
  eit::SdeSchedule s;
  config->steps = d.steps;
  config->batch_size = d.batch_size;
  std::memset(config->hidden, 0, sizeof(config->hidden));
  config->hidden_count = int(d.hidden.size());
  for (size_t i = 0; i < d.hidden.size(); ++i) config->hidden[i] = d.hidden[i];
  config->learning_rate = d.learning_rate;
  config->momentum = d.momentum;
  config->seed = d.seed;
  config->sigma_min = s.sigma_min;
  config->sigma_max = s.sigma_max;
  config->k = s.K;
}

eit_status eit_toy_train(const char* family, int side, int n_train,
                         const eit_train_config* config,
                         const char* checkpoint_path, double* final_loss) {
  return guarded([&] {
    require(family != nullptr, "null family");
    require(config != nullptr, "null train config");
    require(checkpoint_path != nullptr, "null path");
    require(n_train >= 1, "training sample count must be >= 1");
    require(config->hidden_count >= 1 && config->hidden_count <= 8,
            "hidden layer count must be 1..8");
    eit::SdeSchedule schedule{config->sigma_min, config->sigma_max, config->k};
    eit::DsmTrainConfig train;
    train.steps = config->steps;
    train.batch_size = config->batch_size;
    train.hidden.assign(config->hidden, config->hidden + config->hidden_count);
    train.learning_rate = config->learning_rate;
    train.momentum = config->momentum;
    train.seed = config->seed;
    std::vector<Eigen::VectorXd> data;
    if (std::string(family) == "gmm2d") {
      data = eit::sample_gmm2d(n_train, config->seed);
    } else {
      data = eit::sample_phantom_images(parse_family_kind(family), n_train, side,
                                        config->seed);
    }
    eit::DenseNet net = eit::train_dsm_score(data, schedule, train);
    if (final_loss) {
      const size_t n_eval = std::min<size_t>(256, data.size());
      std::vector<Eigen::VectorXd> batch(data.begin(), data.begin() + n_eval);
      eit::Rng rng(eit::splitmix64(config->seed ^ 0xE7A1ULL));
      *final_loss = eit::dsm_loss(net, batch, schedule, rng).first;
    }
    eit::save_score_checkpoint(net, schedule, checkpoint_path);
  });
}

}  // extern "C"
