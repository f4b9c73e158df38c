/* Exercises the C interface from a C translation unit. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "trurm/trurm.h"

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

int main(void) {
  trurm_key* key = NULL;
  char fp[16];
  size_t bits = 0;
  char attempts[64];
  double a[3] = {0.0, 1.0, 2.0};
  double b[4] = {0.0, 0.0, 1.0, 2.0};
  double d = -1.0;
  double y[1200];
  double rate = 0.0;
  double prom = 0.0;
  trurm_ptn* ptn = NULL;
  size_t i;

  EXPECT(strcmp(trurm_status_name(TRURM_OK), "ok") == 0);
  EXPECT(strcmp(trurm_status_name(TRURM_E_FORMAT), "format error") == 0);
  EXPECT(trurm_version() != NULL);

  EXPECT(trurm_key_from_hex("a3f1", &key) == TRURM_OK);
  EXPECT(trurm_key_length(key) == 16);
  EXPECT(trurm_key_fingerprint(key, fp, sizeof fp) == TRURM_OK);
  EXPECT(strlen(fp) == 8);
  EXPECT(trurm_key_fingerprint(key, fp, 4) == TRURM_E_INVALID_ARGUMENT);
  trurm_key_free(key);
  key = NULL;
  EXPECT(trurm_key_from_hex("zz", &key) == TRURM_E_FORMAT);
  EXPECT(key == NULL);
  EXPECT(strlen(trurm_last_error()) > 0);
  EXPECT(trurm_key_from_hex(NULL, &key) == TRURM_E_INVALID_ARGUMENT);

  EXPECT(trurm_irreversibility_budget(128, 32, &bits, attempts, sizeof attempts) == TRURM_OK);
  EXPECT(bits == 96);
  EXPECT(strcmp(attempts, "79228162514264337593543950336") == 0);
  EXPECT(trurm_irreversibility_budget(16, 16, &bits, attempts, sizeof attempts) ==
         TRURM_E_INVALID_ARGUMENT);

  EXPECT(trurm_dtw_distance(a, 3, b, 4, &d) == TRURM_OK);
  EXPECT(d == 0.0);
  EXPECT(trurm_dtw_distance(a, 0, b, 4, &d) == TRURM_E_INVALID_ARGUMENT);

  for (i = 0; i < 1200; ++i) y[i] = sin(2.0 * 3.14159265358979323846 * 0.25 * (double)i / 20.0);
  EXPECT(trurm_estimate_rate(y, 1200, 20.0, &rate, &prom) == TRURM_OK);
  EXPECT(fabs(rate - 15.0) < 0.1);
  EXPECT(prom >= 3.0);

  EXPECT(trurm_ptn_identity(&ptn) == TRURM_OK);
  EXPECT(trurm_ptn_monitor(ptn, y, 1200, 20.0, &rate) == TRURM_OK);
  EXPECT(fabs(rate - 15.0) < 0.1);
  trurm_ptn_free(ptn);

  memset(y, 0, sizeof y);
  EXPECT(trurm_estimate_rate(y, 1200, 20.0, &rate, &prom) == TRURM_E_NO_RESPIRATION);
  EXPECT(trurm_ptn_load("/nonexistent/ptn.json", &ptn) == TRURM_E_IO);

  if (failures == 0) printf("capi: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
