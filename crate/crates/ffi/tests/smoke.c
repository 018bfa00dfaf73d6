#include <stdio.h>
#include "taildep.h"

int main(void) {
    const double corr[9] = {1.0, -0.5, 0.3, -0.5, 1.0, 0.3, 0.3, 0.3, 1.0};
    const size_t idx[3] = {0, 1, 2};
    size_t active[3];
    size_t len = 0;
    double q = 0.0;
    if (taildep_solve_alpha(corr, 3, idx, 3, &q, active, &len) != TAILDEP_STATUS_OK || len != 2) {
        fprintf(stderr, "solve failed: %s\n", taildep_last_error_message());
        return 1;
    }
    const double x[4] = {1.0, 2.0, 3.0, 4.0};
    double tau = 0.0;
    if (taildep_kendall_tau(x, x, 4, &tau) != TAILDEP_STATUS_OK) {
        return 1;
    }
    TaildepModel *model = NULL;
    const double bad[4] = {1.0, 1.5, 1.5, 1.0};
    if (taildep_model_gaussian(bad, 2, &model) != TAILDEP_STATUS_MODEL_ERROR || model != NULL) {
        return 1;
    }
    printf("q=%g active=%zu,%zu tau=%g\n", q, active[0], active[1], tau);
    return 0;
}
