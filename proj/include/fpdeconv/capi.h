#ifndef FPDECONV_CAPI_H
#define FPDECONV_CAPI_H

/* C API of the fpdeconv shared library. All heavy lifting lives behind this
 * boundary; handles are opaque and every call reports a status code. The
 * message for the most recent failure on the calling thread is available via
 * fpd_last_error(). */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fpd_status {
  FPD_OK = 0,
  FPD_ERR_VALIDATION = 1, /* bad arguments, config or file contents */
  FPD_ERR_NUMERIC = 2,    /* numerical failure */
  FPD_ERR_IO = 3          /* filesystem failure */
} fpd_status;

typedef struct fpd_config fpd_config;

const char* fpd_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* fpd_last_error(void);

/* Configuration handles. */
fpd_status fpd_config_create(fpd_config** out);
fpd_status fpd_config_load(const char* path, fpd_config** out);
fpd_status fpd_config_override(fpd_config* cfg, const char* json_fragment);
fpd_status fpd_config_write(const fpd_config* cfg, const char* path);
void fpd_config_destroy(fpd_config* cfg);

/* Pipeline entry points. Every runner writes its artifacts plus a
 * manifest.json into out_dir and is deterministic for a fixed seed. */
fpd_status fpd_simulate_1d(const fpd_config* cfg, uint64_t seed,
                           const char* out_dir);
fpd_status fpd_simulate_phantom(const fpd_config* cfg, int simulation /* 1|2 */,
                                uint64_t seed, const char* out_dir);
fpd_status fpd_fit(const fpd_config* cfg, const char* scan_dir,
                   const char* out_dir);
fpd_status fpd_baseline(const fpd_config* cfg, const char* method,
                        const char* scan_dir, const char* out_dir);
fpd_status fpd_benchmark(const fpd_config* cfg, const char* kind /* sim1|sim2|1d */,
                         int runs, uint64_t seed, const char* out_dir);
fpd_status fpd_test_retest(const fpd_config* cfg, const char* vt1_header,
                           const char* vt2_header, const char* out_csv);
fpd_status fpd_calibrate_noise(const fpd_config* cfg, uint64_t seed,
                               const char* out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FPDECONV_CAPI_H */
