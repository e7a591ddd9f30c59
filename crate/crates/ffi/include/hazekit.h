#ifndef HAZEKIT_H
#define HAZEKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HkAttackKind {
  HK_HADVHAZE = 0,
  HK_IADVHAZE = 1,
  HK_FGSM = 2,
  HK_IFGSM = 3,
  HK_MIFGSM = 4,
} HkAttackKind;

/**
 * Status codes. `HK_OK` is zero; everything else is an error.
 */
typedef enum HkStatus {
  HK_OK = 0,
  HK_ERR_NULL_POINTER = 1,
  HK_ERR_INVALID_ARGUMENT = 2,
  HK_ERR_IO = 3,
  HK_ERR_FORMAT = 4,
  HK_ERR_SHAPE = 5,
  HK_ERR_RANGE = 6,
  HK_ERR_ADAPTER = 7,
  HK_ERR_CONFIG = 8,
  HK_ERR_PANIC = 9,
} HkStatus;

/**
 * Opaque reference CNN.
 */
typedef struct HkClassifier HkClassifier;

/**
 * Opaque RGB image, row-major, channel-interleaved, values in `[0, 1]`.
 */
typedef struct HkImage HkImage;

/**
 * Scalar outcome of one attack.
 */
typedef struct HkAttackSummary {
  size_t true_label;
  size_t pred_clean;
  size_t pred_adv;
  bool success;
  double loss_initial;
  double loss_final;
  size_t iterations_run;
} HkAttackSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *hk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hk_version(void);

/**
 * Copies `height * width * 3` doubles into a new image.
 *
 * # Safety
 * `data` must point to that many readable doubles; `out` must be writable.
 */
enum HkStatus hk_image_new(size_t height, size_t width, const double *data, struct HkImage **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HkStatus hk_image_load_png(const char *path, struct HkImage **out);

/**
 * Writes an 8-bit PNG.
 *
 * # Safety
 * `img` must be a live handle; `path` a NUL-terminated string.
 */
enum HkStatus hk_image_save_png(const struct HkImage *img, const char *path);

/**
 * # Safety
 * `img` must be a live handle; `height` and `width` writable.
 */
enum HkStatus hk_image_dims(const struct HkImage *img, size_t *height, size_t *width);

/**
 * Pixel data (`height * width * 3` doubles), borrowed from the handle.
 * NULL for a NULL handle.
 *
 * # Safety
 * `img` must be NULL or a live handle.
 */
const double *hk_image_data(const struct HkImage *img);

/**
 * # Safety
 * `img` must be NULL or a handle not freed before.
 */
void hk_image_free(struct HkImage *img);

/**
 * Loads a reference CNN weight file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HkStatus hk_classifier_load(const char *path, struct HkClassifier **out);

/**
 * # Safety
 * `clf` must be NULL or a handle not freed before.
 */
void hk_classifier_free(struct HkClassifier *clf);

/**
 * Number of classes, or 0 for a NULL handle.
 *
 * # Safety
 * `clf` must be NULL or a live handle.
 */
size_t hk_classifier_num_classes(const struct HkClassifier *clf);

/**
 * Writes the logits into `out[0..len]`; `len` must equal the class count.
 *
 * # Safety
 * Handles must be live; `out` must hold `len` doubles.
 */
enum HkStatus hk_classifier_logits(const struct HkClassifier *clf,
                                   const struct HkImage *img,
                                   double *out,
                                   size_t len);

/**
 * # Safety
 * Handles must be live; `label` writable.
 */
enum HkStatus hk_classifier_predict(const struct HkClassifier *clf,
                                    const struct HkImage *img,
                                    size_t *label);

/**
 * Renders homogeneous haze with atmospheric light `a` and density `beta`.
 * `depth` holds `height * width` values in `[0, 1]`, or is NULL for a
 * top-to-bottom ramp.
 *
 * # Safety
 * `img` must be live; `depth` NULL or sized as described; `out` writable.
 */
enum HkStatus hk_haze_homogeneous(const struct HkImage *img,
                                  const double *depth,
                                  double a,
                                  double beta,
                                  struct HkImage **out);

/**
 * Runs one untargeted attack against `label`.
 *
 * `config_json` is NULL for defaults, or a JSON object with the fields of
 * the attack's configuration (`eps_a`, `eps_b`, `a0`, `b0`, `alpha_a`,
 * `alpha_b`, `n`, `mu`, `sigma_a`, `sigma_b`, `early_stop` for haze attacks;
 * `eps`, `n`, `mu` for pixel attacks). `depth` is as in
 * [`hk_haze_homogeneous`] and ignored by pixel attacks. `summary` may be
 * NULL.
 *
 * # Safety
 * Handles must be live; pointers NULL or valid as described.
 */
enum HkStatus hk_attack(const struct HkClassifier *clf,
                        const struct HkImage *img,
                        const double *depth,
                        size_t label,
                        enum HkAttackKind kind,
                        const char *config_json,
                        struct HkImage **adversarial,
                        struct HkAttackSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAZEKIT_H */
