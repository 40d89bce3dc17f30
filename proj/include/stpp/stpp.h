/* stpp — spatio-temporal point-process fitting, simulation and diagnostics.
 *
 * C interface of the shared library. All functions return a status code:
 *   0  success
 *   1  numerical failure (non-convergence, singular system)
 *   2  input failure (missing file, malformed data, bad configuration)
 * On failure stpp_last_error() describes the problem; the message is
 * thread-local and valid until the next failing call on the same thread.
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function.
 */
#ifndef STPP_H
#define STPP_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define STPP_OK 0
#define STPP_ERR_NUMERIC 1
#define STPP_ERR_INPUT 2

const char* stpp_version(void);
const char* stpp_last_error(void);

/* ---- rasters ----------------------------------------------------------- */

typedef struct stpp_raster stpp_raster;

/* values/mask are row-major (row 0 northernmost), nrows*ncols long; mask may
 * be NULL for an all-in grid. */
int stpp_raster_create(int ncols, int nrows, double xllcorner, double yllcorner,
                       double cellsize, const double* values, const unsigned char* mask,
                       stpp_raster** out);
int stpp_raster_read(const char* path, stpp_raster** out);
int stpp_raster_write(const stpp_raster* raster, const char* path);
void stpp_raster_free(stpp_raster* raster);

int stpp_raster_dims(const stpp_raster* raster, int* ncols, int* nrows, double* xllcorner,
                     double* yllcorner, double* cellsize);
/* Copies nrows*ncols values (masked-out cells as 0). buflen is the element
 * count of buf. */
int stpp_raster_values(const stpp_raster* raster, double* buf, size_t buflen);
int stpp_raster_mask(const stpp_raster* raster, unsigned char* buf, size_t buflen);

/* Gaussian kernel smoothing of n weighted points (xyw = x0,y0,w0,x1,...) onto
 * the grid of `grid_like`. */
int stpp_smooth_points(const stpp_raster* grid_like, const double* xyw, size_t n, double sigma,
                       stpp_raster** out);
int stpp_smooth_areal(const stpp_raster* box_totals, double sigma, stpp_raster** out);
int stpp_translation_overlap(const stpp_raster* grid_like, double dx, double dy, double* area);

/* ---- event patterns ----------------------------------------------------- */

typedef struct stpp_pattern stpp_pattern;

/* CSV `x,y,t,k`; t is a day index, or an ISO date when start_date (YYYY-MM-DD)
 * is non-NULL. */
int stpp_pattern_read(const char* path, const stpp_raster* window, double t_len,
                      const char* start_date, stpp_pattern** out);
int stpp_pattern_write(const stpp_pattern* pattern, const char* path);
void stpp_pattern_free(stpp_pattern* pattern);
int stpp_pattern_size(const stpp_pattern* pattern, size_t* n);
int stpp_pattern_get(const stpp_pattern* pattern, size_t i, double* x, double* y, double* t,
                     int* k);

/* ---- fitted models ------------------------------------------------------ */

typedef struct stpp_model stpp_model;

/* Loads a fit.json / truth.json artifact; relative raster references resolve
 * against the file's directory. */
int stpp_model_load(const char* json_path, stpp_model** out);
void stpp_model_free(stpp_model* model);
int stpp_model_set_weather(stpp_model* model, const char* weather_csv);
int stpp_model_n_types(const stpp_model* model, int* n);
/* Per-house daily rate exp(theta_k · C(t)). Requires weather. */
int stpp_model_temporal(const stpp_model* model, int k, double t, double* out);
/* Full intensity sum_k h_k(u)·rate_k(t) in m^-2 day^-1. Requires weather. */
int stpp_model_intensity(const stpp_model* model, double x, double y, double t, double* out);

/* ---- commands ----------------------------------------------------------- */

/* Each command takes the merged JSON configuration text (not a path); see the
 * README for the per-command schema and artifacts. */
int stpp_cmd_importance(const char* config_json);
int stpp_cmd_fit(const char* config_json);
int stpp_cmd_predict(const char* config_json);
int stpp_cmd_diagnose(const char* config_json);
int stpp_cmd_simulate(const char* config_json);

#ifdef __cplusplus
}
#endif

#endif /* STPP_H */
