/* Minimal tour of the predopt C interface: build a knapsack, solve it
 * under true and predicted values, and print the regret of acting on the
 * prediction.
 *
 * Build from the repository root:
 *   cargo build -p predopt-ffi
 *   cc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *      -Ltarget/debug -lpredopt_ffi -lm -o demo
 *   LD_LIBRARY_PATH=target/debug ./demo
 */

#include <stdio.h>
#include <stdlib.h>

#include "predopt.h"

static void check(PredoptStatus status, const char *what) {
  if (status != PREDOPT_STATUS_OK) {
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)status,
            predopt_last_error_message());
    exit(1);
  }
}

int main(void) {
  const uint32_t weights[3] = {5, 4, 3};
  PredoptInstance *instance = NULL;
  check(predopt_knapsack_new(weights, 3, 7, "demo-day", &instance),
        "knapsack_new");

  PredoptOracle *oracle = NULL;
  check(predopt_oracle_new("exact", true, true, false, &oracle),
        "oracle_new");

  const double truth[3] = {10.0, 7.0, 4.0};
  double assignment[3];
  double objective = 0.0;
  check(predopt_oracle_solve(oracle, instance, truth, 3, assignment,
                             &objective),
        "solve");
  printf("true optimum picks [%g %g %g] worth %g\n", assignment[0],
         assignment[1], assignment[2], objective);

  const double predicted[3] = {10.0, 2.0, 4.0};
  double value = 0.0;
  check(predopt_regret(oracle, instance, truth, predicted, 3, &value),
        "regret");
  printf("acting on the prediction forfeits %g\n", value);

  predopt_oracle_free(oracle);
  predopt_instance_free(instance);
  return 0;
}
