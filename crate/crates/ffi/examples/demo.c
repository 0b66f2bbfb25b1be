/* Build: cargo build -p ibr-ffi --release
 *        cc crates/ffi/examples/demo.c -Icrates/ffi/include -Ltarget/release \
 *           -l:libibr_ffi.a -lm -lpthread -ldl -o demo
 */
#include <math.h>
#include <stdio.h>
#include "ibr.h"

int main(void) {
    enum { N = 50 };
    double x[N], y[N];
    for (int i = 0; i < N; i++) {
        x[i] = (double)i / (N - 1);
        y[i] = sin(6.0 * x[i]) + 0.05 * ((i * 7) % 5 - 2);
    }
    IbrFitOptions opts = ibr_fit_options_default();
    IbrModel *model = NULL;
    if (ibr_fit(x, N, 1, y, &opts, &model) != IBR_STATUS_OK) {
        fprintf(stderr, "fit failed: %s\n", ibr_last_error_message());
        return 1;
    }
    double k, df;
    ibr_model_k(model, &k);
    ibr_model_final_df(model, &df);
    double at = 0.5, pred;
    ibr_model_predict(model, &at, 1, 1, &pred);
    printf("ibr %s: k = %.2f, df = %.2f, m(0.5) = %.4f\n", ibr_version(), k, df, pred);
    ibr_model_free(model);
    return 0;
}
