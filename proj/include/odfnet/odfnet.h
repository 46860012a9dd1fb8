/* C interface to the odfnet library. Every function that can fail returns an
 * odfnet_status; the message for the most recent failure on the calling
 * thread is available from odfnet_last_error(). Objects returned through
 * **out parameters are owned by the caller and released with the matching
 * _destroy function. All handles are safe to use from multiple threads for
 * read-only operations. */
#ifndef ODFNET_H
#define ODFNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ODFNET_API __declspec(dllexport)
#else
#define ODFNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum odfnet_status {
  ODFNET_OK = 0,
  ODFNET_ERR_INVALID_ARGUMENT = 1,
  ODFNET_ERR_PARSE = 2,
  ODFNET_ERR_IO = 3,
  ODFNET_ERR_DEGENERATE = 4,
  ODFNET_ERR_COMPUTE = 5
} odfnet_status;

/* Alignment modes. */
#define ODFNET_ALIGN_NONE 0
#define ODFNET_ALIGN_RIXY 1
#define ODFNET_ALIGN_RIXYZ 2

/* Network modes. */
#define ODFNET_MODE_STANDARD 0
#define ODFNET_MODE_XYZ 1

/* Rotation scenarios. */
#define ODFNET_ROTATION_NONE 0
#define ODFNET_ROTATION_Z 1
#define ODFNET_ROTATION_SO3 2

ODFNET_API const char* odfnet_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
ODFNET_API const char* odfnet_last_error(void);

/* Worker count from the ODF_WORKERS environment variable, falling back to the
 * hardware concurrency. */
ODFNET_API int odfnet_default_workers(void);

typedef struct odfnet_cloud odfnet_cloud;
typedef struct odfnet_directions odfnet_directions;
typedef struct odfnet_field odfnet_field;
typedef struct odfnet_dataset odfnet_dataset;
typedef struct odfnet_model odfnet_model;

/* ---------- point clouds ---------- */

/* Reads .xyz, .off or .ply (ascii) by extension. */
ODFNET_API odfnet_status odfnet_cloud_load(const char* path, odfnet_cloud** out);
/* Builds a cloud from `count` packed xyz triples. */
ODFNET_API odfnet_status odfnet_cloud_create(const double* xyz, size_t count,
                                             odfnet_cloud** out);
/* Centers on the centroid and scales the farthest point onto the unit
 * sphere, in place. */
ODFNET_API odfnet_status odfnet_cloud_normalize(odfnet_cloud* cloud);
ODFNET_API size_t odfnet_cloud_size(const odfnet_cloud* cloud);
/* Copies packed xyz triples into `xyz` (3 * size doubles). */
ODFNET_API odfnet_status odfnet_cloud_points(const odfnet_cloud* cloud, double* xyz);
ODFNET_API odfnet_status odfnet_cloud_save_xyz(const odfnet_cloud* cloud,
                                               const char* path);
ODFNET_API void odfnet_cloud_destroy(odfnet_cloud* cloud);

/* ---------- probe directions ---------- */

/* Icosahedron subdivision: level 0/1/2 gives 12/42/162 unit directions. */
ODFNET_API odfnet_status odfnet_directions_create(int level, odfnet_directions** out);
ODFNET_API size_t odfnet_directions_count(const odfnet_directions* dirs);
/* Copies packed xyz triples into `xyz` (3 * count doubles). */
ODFNET_API odfnet_status odfnet_directions_get(const odfnet_directions* dirs,
                                               double* xyz);
ODFNET_API void odfnet_directions_destroy(odfnet_directions* dirs);

/* ---------- descriptor extraction ---------- */

typedef struct odfnet_bank_config {
  int direction_level;          /* icosahedron subdivision level */
  const int32_t* ranks;         /* strictly ascending neighbor ranks, or NULL */
  size_t rank_count;            /* 0 selects the default 8/16/24/32 */
  const double* alphas_radians; /* cone half-angles, or NULL */
  size_t alpha_count;           /* 0 selects the default pair */
  int align;                    /* ODFNET_ALIGN_* */
} odfnet_bank_config;

/* Fills the default bank: level 1, ranks 8/16/24/32, two half-angles. */
ODFNET_API void odfnet_bank_config_init(odfnet_bank_config* config);

/* Per-point cone densities for the whole cloud. workers <= 0 selects the
 * default worker count. */
ODFNET_API odfnet_status odfnet_field_compute(const odfnet_cloud* cloud,
                                              const odfnet_bank_config* config,
                                              int workers, odfnet_field** out);
ODFNET_API size_t odfnet_field_points(const odfnet_field* field);
ODFNET_API size_t odfnet_field_directions(const odfnet_field* field);
ODFNET_API size_t odfnet_field_scales(const odfnet_field* field);
ODFNET_API int odfnet_field_align(const odfnet_field* field);
/* Borrowed pointer to points * directions * scales floats, point-major;
 * valid until the field is destroyed. */
ODFNET_API const float* odfnet_field_values(const odfnet_field* field);
ODFNET_API odfnet_status odfnet_field_save(const odfnet_field* field,
                                           const char* path);
ODFNET_API odfnet_status odfnet_field_load(const char* path, odfnet_field** out);
ODFNET_API void odfnet_field_destroy(odfnet_field* field);

/* Recomputes every cone density of a seeded random cloud with a direct
 * per-cone scan and compares against the indexed extraction. On mismatch the
 * offending point and cone index are stored and ODFNET_ERR_COMPUTE is
 * returned. `perturb` injects a deliberate off-by-one into one density to
 * prove the check can fail. Outputs are set to -1 when the check passes. */
ODFNET_API odfnet_status odfnet_oracle_check(uint64_t seed, int point_count,
                                             const odfnet_bank_config* config,
                                             int perturb, int64_t* mismatch_point,
                                             int64_t* mismatch_cone);

/* OBJ line glyphs for the selected points (all points if selection is NULL).
 * Segment lengths are normalized per point by its strongest cone. */
ODFNET_API odfnet_status odfnet_export_glyphs(const odfnet_cloud* cloud,
                                              const odfnet_field* field,
                                              const odfnet_directions* dirs,
                                              const int32_t* selection,
                                              size_t selection_count, double scale,
                                              const char* path);

/* ---------- datasets ---------- */

/* Four synthetic shape classes (sphere shell, box, corner, cylinder). */
ODFNET_API odfnet_status odfnet_dataset_synthetic(int per_class, int points,
                                                  double sigma, uint64_t seed,
                                                  odfnet_dataset** out);
/* Directory of class subdirectories holding .xyz/.off/.ply files. */
ODFNET_API odfnet_status odfnet_dataset_load_dir(const char* path,
                                                 odfnet_dataset** out);
/* Fixed 80/20 split by per-class sample index. */
ODFNET_API odfnet_status odfnet_dataset_split(const odfnet_dataset* all,
                                              odfnet_dataset** train,
                                              odfnet_dataset** test);
ODFNET_API size_t odfnet_dataset_size(const odfnet_dataset* data);
ODFNET_API int odfnet_dataset_class_count(const odfnet_dataset* data);
/* Borrowed pointer, valid until the dataset is destroyed. */
ODFNET_API const char* odfnet_dataset_class_name(const odfnet_dataset* data,
                                                 int label);
ODFNET_API int odfnet_dataset_label(const odfnet_dataset* data, size_t index);
/* Copies one cloud out of the dataset. */
ODFNET_API odfnet_status odfnet_dataset_cloud(const odfnet_dataset* data,
                                              size_t index, odfnet_cloud** out);
ODFNET_API void odfnet_dataset_destroy(odfnet_dataset* data);

/* ---------- models ---------- */

typedef struct odfnet_net_config {
  int mode;        /* ODFNET_MODE_* */
  int align;       /* ODFNET_ALIGN_*; forced to rixyz in xyz mode */
  int class_count; /* >= 2 */
  int edge_k;      /* neighbors per edge block */
} odfnet_net_config;

ODFNET_API void odfnet_net_config_init(odfnet_net_config* config);

/* Fresh model with deterministic random initialization. */
ODFNET_API odfnet_status odfnet_model_create(const odfnet_net_config* config,
                                             uint64_t seed, odfnet_model** out);
ODFNET_API odfnet_status odfnet_model_load(const char* path, odfnet_model** out);
ODFNET_API odfnet_status odfnet_model_save(const odfnet_model* model,
                                           const char* path);
ODFNET_API int odfnet_model_mode(const odfnet_model* model);
ODFNET_API int odfnet_model_align(const odfnet_model* model);
ODFNET_API int odfnet_model_class_count(const odfnet_model* model);
ODFNET_API size_t odfnet_model_parameter_count(const odfnet_model* model);
ODFNET_API void odfnet_model_destroy(odfnet_model* model);

typedef struct odfnet_train_config {
  int epochs;
  int batch_size;
  double learning_rate;
  double momentum;
  uint64_t seed;
  int rotation;      /* ODFNET_ROTATION_* applied after augmentation */
  int augment;       /* nonzero enables scale/flip/quarter-turn augmentation */
  int half_deletion; /* nonzero masks a random half of each cloud's pool */
  int workers;       /* <= 0 selects the default worker count */
  int verbose;       /* nonzero prints per-epoch loss to stderr */
} odfnet_train_config;

ODFNET_API void odfnet_train_config_init(odfnet_train_config* config);

/* SGD with momentum; deterministic in the seed for any worker count.
 * `epoch_loss` (length `epochs`) receives the mean loss per epoch when
 * non-NULL. */
ODFNET_API odfnet_status odfnet_model_train(odfnet_model* model,
                                            const odfnet_dataset* data,
                                            const odfnet_train_config* config,
                                            double* epoch_loss);

/* Single prediction; with votes > 1, averages softmax outputs over randomly
 * rescaled copies. `probabilities` (length class_count) may be NULL. */
ODFNET_API odfnet_status odfnet_model_predict(const odfnet_model* model,
                                              const odfnet_cloud* cloud, int votes,
                                              uint64_t seed, int workers,
                                              int* label, double* probabilities);

/* Accuracy over a labeled set; each cloud is first rotated by a seeded draw
 * from the scenario. `predicted` (length dataset size) may be NULL. */
ODFNET_API odfnet_status odfnet_model_evaluate(const odfnet_model* model,
                                               const odfnet_dataset* test,
                                               int rotation, uint64_t seed,
                                               int votes, int workers,
                                               double* accuracy,
                                               int32_t* predicted);

/* Per-point counts of global feature channels won in the final max-pool.
 * `credits` has one entry per cloud point; `degenerate` (may be NULL) is set
 * to 1 when every channel credits the same point. */
ODFNET_API odfnet_status odfnet_model_contribution(const odfnet_model* model,
                                                   const odfnet_cloud* cloud,
                                                   int workers, int32_t* credits,
                                                   int* degenerate);

#ifdef __cplusplus
}
#endif

#endif /* ODFNET_H */
