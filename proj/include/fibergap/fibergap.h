#ifndef FIBERGAP_H
#define FIBERGAP_H

#include <stddef.h>
#include <stdint.h>

#if defined(FIBERGAP_BUILDING_DLL)
#define FG_API __attribute__((visibility("default")))
#else
#define FG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fg_status {
  FG_OK = 0,
  FG_BOUNDARY_POINT,
  FG_OUT_OF_DOMAIN,
  FG_SINGULAR_PREIMAGE,
  FG_BAD_RADIUS,
  FG_BAD_EXPONENT,
  FG_INSUFFICIENT_ITERATE,
  FG_CYLINDER_BLOWUP,
  FG_NOT_DECAYING,
  FG_MASS_MISMATCH,
  FG_RANGE_VIOLATION,
  FG_BAD_DENSITY,
  FG_ATOM_BUDGET_EXCEEDED,
  FG_NOT_CONVERGED,
  FG_BAD_INPUT,
  FG_PRECONDITION_FAILED,
  FG_NOT_DIFFEOMORPHISM,
  FG_CHECKLIST_FAILURE,
  FG_GRID_MISMATCH,
  FG_INSUFFICIENT_DATA,
  FG_EMPTY_TABLE,
  FG_CONFIG_ERROR,
  FG_EXPERIMENT_ERROR,
  FG_IO_ERROR,
  FG_NULL_ARGUMENT,
  FG_INTERNAL_ERROR
} fg_status;

typedef struct fg_atoms fg_atoms;
typedef struct fg_system fg_system;
typedef struct fg_measure fg_measure;

typedef struct fg_norms {
  double l1;
  double linf;
  double s1;
  double var;
  double mass;
  size_t atoms;
} fg_norms;

FG_API const char* fg_status_name(fg_status s);
/* Message of the last failing call on this thread ("" if none). */
FG_API const char* fg_last_error(void);

/* Signed atomic measures on [0,1]. */
FG_API fg_status fg_atoms_create(fg_atoms** out);
FG_API fg_status fg_atoms_add(fg_atoms* mu, double pos, double weight);
FG_API fg_status fg_atoms_bl_norm(const fg_atoms* mu, double* out);
FG_API fg_status fg_atoms_bl_norm_oracle(const fg_atoms* mu, size_t grid_n, double* out);
FG_API fg_status fg_atoms_cdf_distance(const fg_atoms* a, const fg_atoms* b, double* out);
FG_API void fg_atoms_destroy(fg_atoms* mu);

/* Bundled skew products: "doubling_affine", "trivial_product", "lorenz_cusp".
   q holds polynomial coefficients in increasing degree. */
FG_API fg_status fg_system_create(const char* family, double kappa, double alpha, const double* q, size_t q_len,
                                  fg_system** out);
FG_API fg_status fg_system_create_default(const char* family, fg_system** out);
FG_API void fg_system_destroy(fg_system* s);

FG_API fg_status fg_measure_lebesgue(size_t n, size_t atoms, fg_measure** out);
FG_API fg_status fg_measure_lebesgue_dirac(size_t n, double c, fg_measure** out);
/* n applications of F* on the measure's grid. */
FG_API fg_status fg_transfer(const fg_system* s, const fg_measure* mu, int steps, fg_measure** out);
FG_API fg_status fg_invariant_measure(const fg_system* s, size_t n, double tol, int n_max, fg_measure** out,
                                      double* residual);
FG_API fg_status fg_measure_norms(const fg_measure* mu, fg_norms* out);
FG_API fg_status fg_measure_distance_l1(const fg_measure* a, const fg_measure* b, double* out);
FG_API fg_status fg_measure_write_csv(const fg_measure* mu, const char* path);
FG_API void fg_measure_destroy(fg_measure* mu);

/* Config-driven runs. fg_run_experiment returns FG_OK, FG_EXPERIMENT_ERROR
   (artifacts written, some check failed) or FG_CONFIG_ERROR. out_dir may be
   NULL to use the config's output. *manifest (optional) receives the
   manifest text; release it with fg_string_free. */
FG_API fg_status fg_validate_config(const char* path);
FG_API fg_status fg_run_experiment(const char* config_path, const char* out_dir, char** manifest);
/* Norm-oracle property suite; *report gets the CSV table. */
FG_API fg_status fg_selftest(char** report);
FG_API void fg_set_threads(unsigned n);
FG_API void fg_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
