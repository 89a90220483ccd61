#include <math.h>
#include <stdio.h>
#include "countseq.h"

#define CHECK(x)                                           \
    do {                                                   \
        if (!(x)) {                                        \
            fprintf(stderr, "failed: %s (line %d)\n", #x, __LINE__); \
            return 1;                                      \
        }                                                  \
    } while (0)

int main(void) {
    double theta0[2] = {0.5, 0.5};
    CsTest *t = NULL;
    CHECK(cs_test_new(theta0, 2, 0.0, &t) == CS_STATUS_OK);
    for (int i = 0; i < 200; i++) {
        CHECK(cs_test_observe(t, i % 4 == 0 ? 1 : 0) == CS_STATUS_OK);
    }
    double p = 1.0;
    bool reject = false;
    CHECK(cs_test_p_value(t, &p) == CS_STATUS_OK);
    CHECK(cs_test_reject(t, 0.05, &reject) == CS_STATUS_OK);
    CHECK(reject && p < 0.05);

    double lo, hi;
    CHECK(cs_test_marginal_ci(t, 0.05, 0, &lo, &hi) == CS_STATUS_OK);
    CHECK(lo < 0.75 && 0.75 < hi);

    CHECK(cs_test_observe(t, 5) == CS_STATUS_OUT_OF_RANGE);
    char msg[128];
    CHECK(cs_last_error_message(msg, sizeof msg) > 0);

    char *json = NULL;
    CHECK(cs_test_to_json(t, &json) == CS_STATUS_OK);
    CsTest *copy = NULL;
    CHECK(cs_test_from_json(json, &copy) == CS_STATUS_OK);
    cs_string_free(json);
    double a, b;
    cs_test_log_odds(t, &a);
    cs_test_log_odds(copy, &b);
    CHECK(a == b && isfinite(a));
    cs_test_free(copy);
    cs_test_free(t);
    puts("ok");
    return 0;
}
