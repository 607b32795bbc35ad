#ifndef COMBO_H
#define COMBO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ComboNormalMethod {
  COMBO_NORMAL_METHOD_BARYCENTER = 0,
  COMBO_NORMAL_METHOD_SECOND_MOMENT = 1,
} ComboNormalMethod;

typedef enum ComboStatus {
  COMBO_STATUS_OK = 0,
  COMBO_STATUS_NULL_POINTER = 1,
  COMBO_STATUS_INVALID_ARGUMENT = 2,
  COMBO_STATUS_CONFIG_INVALID = 3,
  COMBO_STATUS_UPSTREAM_ARTIFACT_MISSING = 4,
  COMBO_STATUS_IO = 5,
  COMBO_STATUS_NO_CONVERGENCE = 6,
  COMBO_STATUS_INADMISSIBLE = 7,
  COMBO_STATUS_BAD_MATERIAL = 8,
  COMBO_STATUS_BAD_GEOMETRY = 9,
  COMBO_STATUS_PANIC = 10,
  COMBO_STATUS_OTHER = 11,
} ComboStatus;

// Boxel grid with volume fractions and normals.
typedef struct ComboGrid ComboGrid;

// Voxel phase image.
typedef struct ComboImage ComboImage;

// Converged cell state.
typedef struct ComboSolution ComboSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call into the library on the same thread.
const char *combo_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *combo_version(void);

// Voxelizes a shape given as JSON, e.g. `{"shape":"sphere","radius":0.4}`.
//
// # Safety
// `shape_json` must be a NUL-terminated string, `dims` and `lengths` must
// point to three values, `out` must be writable.
enum ComboStatus combo_image_generate(const char *shape_json,
                                      const size_t *dims,
                                      const double *lengths,
                                      struct ComboImage **out);

// # Safety
// `header` must be a NUL-terminated path, `out` must be writable.
enum ComboStatus combo_image_read(const char *header, struct ComboImage **out);

// # Safety
// `img` must be a live handle and `header` a NUL-terminated path.
enum ComboStatus combo_image_write(const struct ComboImage *img, const char *header);

// Writes the voxel counts per axis to `dims[0..3]`.
//
// # Safety
// `img` must be a live handle and `dims` must point to three writable values.
enum ComboStatus combo_image_dims(const struct ComboImage *img, size_t *dims);

// # Safety
// `img` must be a live handle and `out` writable.
enum ComboStatus combo_image_inclusion_fraction(const struct ComboImage *img, double *out);

// # Safety
// `img` must be NULL or a handle that is not used afterwards.
void combo_image_free(struct ComboImage *img);

// # Safety
// `img` must be a live handle, `factors` must point to three values and
// `out` must be writable.
enum ComboStatus combo_grid_coarsen(const struct ComboImage *img,
                                    const size_t *factors,
                                    struct ComboGrid **out);

// Estimates the normals of all composite boxels from the image the grid was
// coarsened from.
//
// # Safety
// `grid` and `img` must be live handles.
enum ComboStatus combo_grid_assign_normals(struct ComboGrid *grid,
                                           const struct ComboImage *img,
                                           enum ComboNormalMethod method);

// # Safety
// `grid` must be a live handle and `out` writable.
enum ComboStatus combo_grid_composite_count(const struct ComboGrid *grid, size_t *out);

// # Safety
// `grid` must be a live handle and `out` writable.
enum ComboStatus combo_grid_inclusion_fraction(const struct ComboGrid *grid, double *out);

// # Safety
// `grid` must be a live handle and `header` a NUL-terminated path.
enum ComboStatus combo_grid_write(const struct ComboGrid *grid, const char *header);

// # Safety
// `header` must be a NUL-terminated path, `out` must be writable.
enum ComboStatus combo_grid_read(const char *header, struct ComboGrid **out);

// # Safety
// `grid` must be NULL or a handle that is not used afterwards.
void combo_grid_free(struct ComboGrid *grid);

// Solves the cell problem on `grid`. `config_json` is a run configuration
// (NULL for defaults); its `materials`, `loading` and `solver` sections are
// used.
//
// # Safety
// `grid` must be a live handle, `config_json` NULL or a NUL-terminated
// string, `out` writable.
enum ComboStatus combo_solve(const struct ComboGrid *grid,
                             const char *config_json,
                             struct ComboSolution **out);

// Writes the mean first Piola-Kirchhoff stress, row-major, to `p[0..9]`.
//
// # Safety
// `sol` must be a live handle and `p` must point to nine writable values.
enum ComboStatus combo_solution_mean_stress(const struct ComboSolution *sol, double *p);

// Total outer iterations over all load steps.
//
// # Safety
// `sol` must be a live handle and `out` writable.
enum ComboStatus combo_solution_iterations(const struct ComboSolution *sol, size_t *out);

// Number of cells treated with the laminate law.
//
// # Safety
// `sol` must be a live handle and `out` writable.
enum ComboStatus combo_solution_composites(const struct ComboSolution *sol, size_t *out);

// # Safety
// `sol` must be NULL or a handle that is not used afterwards.
void combo_solution_free(struct ComboSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMBO_H */
