#include <math.h>
#include <stdio.h>
#include <string.h>

#include "rankshrink.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        RksStatus st_ = (call);                                              \
        if (st_ != RKS_STATUS_OK) {                                          \
            char msg_[256];                                                  \
            rks_last_error(msg_, sizeof msg_);                               \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)st_, msg_);  \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    const double x[] = {1.0, 0.9, 2.0, 2.2, 3.0, 2.8, -1.0, -1.1, 0.5, 0.7, -2.0, -1.9};
    const double y[] = {2.3, 3.9, 6.1, -1.7, 1.0, -4.4};
    RksDataset *ds = NULL;
    RksFit *ls = NULL, *ridge = NULL;
    double b_ls[2], b_ridge[2], k = 0.0;
    size_t len = 0;

    CHECK(rks_dataset_new(x, y, 6, 2, false, &ds));
    CHECK(rks_fit(ds, RKS_ESTIMATOR_LS, NAN, NAN, NULL, &ls));
    CHECK(rks_fit(ds, RKS_ESTIMATOR_RIDGE, NAN, NAN, NULL, &ridge));
    CHECK(rks_fit_len(ls, &len));
    CHECK(rks_fit_coefficients(ls, b_ls, 2));
    CHECK(rks_fit_coefficients(ridge, b_ridge, 2));
    CHECK(rks_fit_params(ridge, &k, NULL));
    if (len != 2 || !(k > 0.0)) {
        fprintf(stderr, "unexpected fit shape\n");
        return 1;
    }
    /* Ridge shrinks the coefficient norm. */
    if (b_ridge[0] * b_ridge[0] + b_ridge[1] * b_ridge[1] >= b_ls[0] * b_ls[0] + b_ls[1] * b_ls[1]) {
        fprintf(stderr, "ridge did not shrink\n");
        return 1;
    }
    if (rks_fit(ds, 77, 0.0, 0.0, NULL, &ls) != RKS_STATUS_INVALID_ARGUMENT) {
        return 1;
    }
    rks_fit_free(ls);
    rks_fit_free(ridge);
    rks_dataset_free(ds);
    printf("ok %s\n", rks_version());
    return 0;
}
