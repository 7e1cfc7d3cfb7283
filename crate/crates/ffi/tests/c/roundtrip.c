#include <math.h>
#include <stdio.h>
#include <string.h>

#include "estim.h"

int main(void) {
    EstimRng *rng = NULL;
    if (estim_rng_new(7, 0, &rng) != ESTIM_STATUS_OK) return 1;

    double x[50], y[250];
    for (int i = 0; i < 50; i++) x[i] = i;
    size_t offset = 99;
    if (estim_replicate(x, 50, 250, rng, y, &offset) != ESTIM_STATUS_OK) return 2;
    for (int k = 0; k < 5; k++)
        if (memcmp(y + 50 * k, x, sizeof x) != 0) return 3;

    double s[3] = {0.8, 1.0, 1.3}, theta = 1.0, lo, hi;
    if (estim_update_bounds(&theta, s, 3, 1, ESTIM_BOUNDS_RULE_BASIC, &lo, &hi) != ESTIM_STATUS_OK) return 4;
    if (!(lo < theta && theta < hi)) return 5;

    double out;
    if (estim_transform_apply(ESTIM_TRANSFORM_LOG, -1.0, &out) != ESTIM_STATUS_DOMAIN) return 6;
    if (strlen(estim_last_error()) == 0) return 7;

    estim_rng_free(rng);
    printf("ok %s\n", estim_version());
    return 0;
}
