#ifndef SINGEX3D_H
#define SINGEX3D_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define SX3D_KERNEL_G 0

#define SX3D_KERNEL_HBAR 1

#define SX3D_MODE_AUTO 0

#define SX3D_MODE_SUBTRACT 1

#define SX3D_MODE_DIVIDE 2

#define SX3D_SUPPORT_RECT 0

#define SX3D_SUPPORT_TRI 1

#define SX3D_AUX_ONE 0

#define SX3D_AUX_AREA_ELEMENT 1

#define SX3D_DOMAIN_SQUARE 0

#define SX3D_DOMAIN_TRIANGLE 1

/**
 * Result code of every fallible call.
 */
typedef enum Sx3dStatus {
  Ok = 0,
  NullPointer = 1,
  InvalidArgument = 2,
  Geometry = 3,
  Kernel = 4,
  DivisionGuard = 5,
  NotRemovable = 6,
  Analytic = 7,
  Quadrature = 8,
  Fit = 9,
  Io = 10,
  Panic = 11,
} Sx3dStatus;

/**
 * Opaque surface patch.
 */
typedef struct Sx3dPatch Sx3dPatch;

/**
 * Opaque lookup table.
 */
typedef struct Sx3dTable Sx3dTable;

/**
 * Input of [`sx3d_integrate`].
 */
typedef struct Sx3dIntegralOptions {
  /**
   * `SX3D_KERNEL_*`.
   */
  int32_t kernel;
  /**
   * `SX3D_MODE_*`.
   */
  int32_t mode;
  /**
   * Series terms; 0 disables regularization.
   */
  uint32_t n;
  double source[2];
  /**
   * `SX3D_SUPPORT_*`.
   */
  int32_t support_kind;
  /**
   * Rectangle `x0, x1, y0, y1` or triangle `ax, ay, bx, by, cx, cy`.
   */
  double support[6];
  bool has_eta;
  double eta;
  /**
   * Gauss nodes per direction.
   */
  uint32_t nodes;
  /**
   * `SX3D_AUX_*`.
   */
  int32_t aux;
} Sx3dIntegralOptions;

/**
 * Output of [`sx3d_integrate`].
 */
typedef struct Sx3dIntegralReport {
  double value;
  double analytic_part;
  double quadrature_part;
  /**
   * NaN when no fit was used.
   */
  double fit_residual;
  double condition;
  /**
   * 0 quadrature, 1 subtract, 2 divide.
   */
  int32_t mode_used;
  /**
   * 0 regular, 1 nearly singular, 2 singular.
   */
  int32_t classification;
  uint64_t edge_quadrature;
} Sx3dIntegralReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sx3d_version(void);

/**
 * Message of the last failed call on this thread; valid until the next failing call.
 */
const char *sx3d_last_error(void);

/**
 * Builtin patch: `"spheroid"`, `"sphere-face"` or `"flat"`.
 */
enum Sx3dStatus sx3d_patch_builtin(const char *name, struct Sx3dPatch **out);

/**
 * Patch from a JSON file.
 */
enum Sx3dStatus sx3d_patch_load(const char *path, struct Sx3dPatch **out);

/**
 * Releases a patch; null is ignored.
 */
void sx3d_patch_free(struct Sx3dPatch *patch);

/**
 * `F(t)` into `out[0..3]`.
 */
enum Sx3dStatus sx3d_patch_eval(const struct Sx3dPatch *patch, double t1, double t2, double *out);

/**
 * `G(s,t)` or `H̄(s,t)`.
 */
enum Sx3dStatus sx3d_kernel_eval(const struct Sx3dPatch *patch,
                                 int32_t kernel,
                                 double s1,
                                 double s2,
                                 double t1,
                                 double t2,
                                 double *out);

/**
 * `∫∫ R^p x^q y^r` for `R² = a x² + b xy + c y²` over `[x0,x1]×[y0,y1]` with a corner at the origin.
 */
enum Sx3dStatus sx3d_definite_rect(int32_t p,
                                   uint32_t q,
                                   uint32_t r,
                                   double a,
                                   double b,
                                   double c,
                                   const double *rect,
                                   double *out);

/**
 * `∫∫ R^p x^q y^r` over the reference triangle `(0,0), (1,0), (0,1)`.
 */
enum Sx3dStatus sx3d_definite_tri(int32_t p,
                                  uint32_t q,
                                  uint32_t r,
                                  double a,
                                  double b,
                                  double c,
                                  double *out);

/**
 * Regularized `∫ K(s,t) v(t) dt` over a support, with `B ≡ 1`.
 */
enum Sx3dStatus sx3d_integrate(const struct Sx3dPatch *patch,
                               const struct Sx3dIntegralOptions *opts,
                               struct Sx3dIntegralReport *report);

/**
 * Builds a table on the default ranges with `nb × nc` nodes.
 */
enum Sx3dStatus sx3d_table_build(int32_t p,
                                 uint32_t q,
                                 uint32_t r,
                                 int32_t domain,
                                 uint32_t nb,
                                 uint32_t nc,
                                 struct Sx3dTable **out);

enum Sx3dStatus sx3d_table_load(const char *path, struct Sx3dTable **out);

/**
 * Writes the binary table and its JSON sidecar into `dir`.
 */
enum Sx3dStatus sx3d_table_save(const struct Sx3dTable *table, const char *dir);

/**
 * Interpolated value, or direct evaluation outside the served region.
 */
enum Sx3dStatus sx3d_table_query(const struct Sx3dTable *table,
                                 double bbar,
                                 double cbar,
                                 double *out);

/**
 * Number of queries answered by direct evaluation; 0 for null.
 */
uint64_t sx3d_table_fallbacks(const struct Sx3dTable *table);

void sx3d_table_free(struct Sx3dTable *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SINGEX3D_H */
