/* C interface to the EIT reconstruction core.
 *
 * Conventions:
 *   - Every fallible call returns eit_status; nonzero values match the CLI
 *     exit codes (2 usage, 3 I/O, 4 numeric). eit_last_error() describes the
 *     most recent failure on the calling thread.
 *   - double** / int* out-parameters are written only on EIT_OK. Buffers
 *     returned through double** are released with eit_buffer_free().
 *   - Fixed-size outputs (eit_rasterize, eit_csd_star_run, ...) are written
 *     into caller-provided arrays whose length is stated per function.
 *   - Images are row-major side*side arrays; the unit disk maps to the
 *     inscribed circle of the square.
 */
#ifndef EIT_H
#define EIT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eit_status {
  EIT_OK = 0,
  EIT_ERR_INVALID_ARGUMENT = 2,
  EIT_ERR_IO = 3,
  EIT_ERR_NUMERIC = 4
} eit_status;

/* Message for the most recent failing call on this thread; "" if none. The
 * pointer stays valid until the next library call on the same thread. */
const char* eit_last_error(void);

const char* eit_version(void);

void eit_buffer_free(double* buffer);

/* ---- mesh ------------------------------------------------------------- */

typedef struct eit_mesh eit_mesh;  /* unit-disk FEM mesh with electrode arcs */

eit_status eit_mesh_build(int n_electrodes, int refinement, double coverage,
                          eit_mesh** out);
eit_status eit_mesh_load(const char* path, eit_mesh** out);
eit_status eit_mesh_save(const eit_mesh* mesh, const char* path);
void eit_mesh_free(eit_mesh* mesh);

/* 0 on a null handle */
int eit_mesh_node_count(const eit_mesh* mesh);
int eit_mesh_element_count(const eit_mesh* mesh);
int eit_mesh_electrode_count(const eit_mesh* mesh);

/* ---- phantoms ---------------------------------------------------------- */

/* kind is "two" or "four" */
eit_status eit_phantom_sample_json(const char* kind, uint64_t seed,
                                   const char* path);

/* Paint per-element conductivities; sigma_out has element_count entries. */
eit_status eit_phantom_paint_json(const eit_mesh* mesh, const char* json_path,
                                  double* sigma_out);
eit_status eit_phantom_paint_kind(const eit_mesh* mesh, const char* kind,
                                  uint64_t seed, double* sigma_out);

/* ---- forward problem --------------------------------------------------- */

/* Adjacent drive/measurement protocol with the given drive current; uniform
 * contact impedance on all electrodes. Returns L*(L-3) voltages. */
eit_status eit_forward_solve(const eit_mesh* mesh, const double* sigma,
                             double contact_impedance, double current,
                             double** v_out, int* m_out);

/* In place; expected noise power matches snr_db. +infinity leaves v alone. */
eit_status eit_add_noise(double* v, int m, double snr_db, uint64_t seed);

/* One value per line, drive-major order. Also used for per-element fields. */
eit_status eit_measurements_save_csv(const double* v, int m, const char* path);
eit_status eit_measurements_load_csv(const char* path, double** v_out,
                                     int* m_out);

/* ---- reconstruction ---------------------------------------------------- */

/* Levenberg-Marquardt from initial_sigma (NULL means homogeneous 1.0).
 * sigma_out gets element_count values, trace_out the per-iteration relative
 * misfit (trace_len = iterations + 1). A solver abort reports EIT_ERR_NUMERIC
 * with the abort reason in eit_last_error(). */
eit_status eit_reconstruct_run(const eit_mesh* mesh, const double* v, int m,
                               double contact_impedance, double current,
                               double lambda, int max_iters,
                               const double* initial_sigma, double** sigma_out,
                               int* n_out, double** trace_out, int* trace_len_out,
                               int* converged_out);

/* "iteration,misfit" CSV */
eit_status eit_trace_save_csv(const double* misfits, int n, const char* path);

/* ---- images ------------------------------------------------------------ */

/* Inverse-distance interpolation of a per-element field onto a side*side
 * grid; neighbors = 1 gives the nearest-element raster. image_out has
 * side*side entries. */
eit_status eit_rasterize(const eit_mesh* mesh, const double* field, int side,
                         double power, int neighbors, double outside_fill,
                         double* image_out);

/* Stack file: magic EITI, version, count, side, f32 pixels. */
eit_status eit_image_stack_save(const double* images, int count, int side,
                                const char* path);
eit_status eit_image_stack_load(const char* path, double** images_out,
                                int* count_out, int* side_out);

/* 8-bit binary PGM, min-max normalized. */
eit_status eit_image_save_pgm(const double* image, int side, const char* path);

/* ---- metrics ----------------------------------------------------------- */

/* out[6] = mse, psnr, ssim, re, ae, dr; gt is the reference image. */
eit_status eit_metrics_compute(const double* recon, const double* gt, int side,
                               double* out);

/* Pairs two equally sized image stacks row by row. csv_path (optional) gets
 * one row per pair plus a mean+-std summary row; means_out[6] (optional)
 * gets the per-metric means, pairs_out (optional) the pair count. */
eit_status eit_metrics_report(const char* recon_path, const char* gt_path,
                              const char* csv_path, double* means_out,
                              int* pairs_out);

/* ---- dataset ----------------------------------------------------------- */

typedef struct eit_dataset_params {
  int n_electrodes;
  int refinement;
  double coverage;
  double current;
  double contact_impedance;
  int grid_side;
  double idw_power;
  int idw_neighbors;
} eit_dataset_params;

void eit_dataset_params_init(eit_dataset_params* params);

/* Writes train/val/test .eitd record files plus manifest.txt under out_dir.
 * Split counts must sum to count; record i uses seed base_seed + i. NULL
 * params means defaults (16 electrodes, refinement 2, 128 grid). */
eit_status eit_dataset_generate(const char* kind, int count, double snr_db,
                                int train, int val, int test, uint64_t base_seed,
                                const char* out_dir,
                                const eit_dataset_params* params);

/* ---- score models ------------------------------------------------------ */

typedef struct eit_score eit_score;  /* score network plus noise schedule */

eit_status eit_score_load(const char* path, eit_score** out);
void eit_score_free(eit_score* score);

/* Sample dimension (net output size); 0 on a null handle. */
int eit_score_dim(const eit_score* score);

/* sqrt(dim) when the model is a square image, else 0. */
int eit_score_image_side(const eit_score* score);

/* Any output pointer may be NULL. */
eit_status eit_score_schedule(const eit_score* score, double* sigma_min,
                              double* sigma_max, int* k);

/* Unconditional predictor-corrector sampling. k <= 0 uses the checkpoint
 * schedule's K. out gets n_samples * dim values, row-major; sample i draws
 * from a stream derived from (seed, i). */
eit_status eit_pc_sample(const eit_score* score, int k, int corrector_steps,
                         double corrector_snr, int n_samples, uint64_t seed,
                         double* out);

/* Conditional sampling: LM reconstruction from v, rasterized to the score's
 * image grid (IDW power 2, 6 neighbors, background fill 1.0), then k_prime
 * reverse-diffusion steps of the checkpoint's K-step grid. image_out gets
 * side*side values with side = eit_score_image_side(). */
eit_status eit_csd_star_run(const eit_mesh* mesh, const double* v, int m,
                            const eit_score* score, int k_prime,
                            int corrector_steps, double corrector_snr,
                            double contact_impedance, double current,
                            double lambda, int max_iters, uint64_t seed,
                            double* image_out);

/* ---- toy score training ------------------------------------------------ */

typedef struct eit_train_config {
  int steps;
  int batch_size;
  int hidden[8];
  int hidden_count;
  double learning_rate;
  double momentum;
  uint64_t seed;
  double sigma_min;
  double sigma_max;
  int k;
} eit_train_config;

void eit_train_config_init(eit_train_config* config);

/* Trains a denoising score model on a built-in family and writes a score
 * checkpoint. family "gmm2d" ignores side and trains on the two-mode 2-D
 * mixture; "two" / "four" train on side*side phantom images. n_train samples
 * are drawn with the config seed. final_loss (optional) gets the training
 * objective evaluated on a fixed 256-sample batch after training. */
eit_status eit_toy_train(const char* family, int side, int n_train,
                         const eit_train_config* config,
                         const char* checkpoint_path, double* final_loss);

#ifdef __cplusplus
}
#endif

#endif /* EIT_H */
