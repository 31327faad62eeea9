/* C interface for the ssnsdp semidefinite-programming solver.
 *
 * Conventions:
 *   - every fallible call returns an int error code (SSN_OK == 0) and
 *     writes its result through an out-pointer;
 *   - handles are opaque and freed by the matching ssn_*_free function;
 *   - ssn_last_error() returns the message of the most recent failure on
 *     the calling thread (valid until the next failing call there).
 */

#ifndef SSNSDP_H
#define SSNSDP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes. */
#define SSN_OK 0
#define SSN_ERR_NULL 1
#define SSN_ERR_UTF8 2
#define SSN_ERR_PARSE 3
#define SSN_ERR_IO 4
#define SSN_ERR_INVALID 5
#define SSN_ERR_NUMERIC 6

/* Terminal solver statuses. */
#define SSN_STATUS_OPTIMAL 0
#define SSN_STATUS_MAX_ITER 1
#define SSN_STATUS_LINESEARCH_FAIL 2
#define SSN_STATUS_LINEAR_SOLVER_FAIL 3

typedef struct SsnProblem SsnProblem;
typedef struct SsnConfig SsnConfig;
typedef struct SsnReport SsnReport;

const char *ssn_last_error(void);

/* Problems: single-block SDPA sparse input. */
int ssn_problem_parse_sdpa(const char *text, SsnProblem **out);
int ssn_problem_read_file(const char *path, SsnProblem **out);
void ssn_problem_free(SsnProblem *p);
int ssn_problem_dim(const SsnProblem *p);             /* n, or -1 */
int ssn_problem_num_constraints(const SsnProblem *p); /* m, or -1 */

/* Configuration. Presets: "maxcut", "theta", "biq", "clustering". */
int ssn_config_new(SsnConfig **out);
int ssn_config_preset(const char *name, SsnConfig **out);
void ssn_config_free(SsnConfig *c);
int ssn_config_set_tol(SsnConfig *c, double value);
int ssn_config_set_eps_hat(SsnConfig *c, double value);
int ssn_config_set_nu(SsnConfig *c, double value);
int ssn_config_set_kappa_c(SsnConfig *c, double value);
int ssn_config_set_max_iterations(SsnConfig *c, int value);
int ssn_config_set_warmstart(SsnConfig *c, int enabled);

/* Solving and reports. */
int ssn_solve(const SsnProblem *problem, const SsnConfig *config, SsnReport **out);
void ssn_report_free(SsnReport *r);
int ssn_report_status(const SsnReport *r); /* SSN_STATUS_*, or -1 */
int64_t ssn_report_it0(const SsnReport *r);
int64_t ssn_report_it1(const SsnReport *r);
int64_t ssn_report_it2(const SsnReport *r);
double ssn_report_cpu_seconds(const SsnReport *r);
double ssn_report_obj_primal(const SsnReport *r);
double ssn_report_obj_dual(const SsnReport *r);
double ssn_report_eta_p(const SsnReport *r);
double ssn_report_eta_d(const SsnReport *r);
double ssn_report_eta_c(const SsnReport *r);
double ssn_report_eta_kkt(const SsnReport *r);

/* Solution access: X and Z copy row-major into len == n*n doubles,
 * y into len == m doubles. */
int ssn_report_dim(const SsnReport *r);             /* n, or -1 */
int ssn_report_num_multipliers(const SsnReport *r); /* m, or -1 */
int ssn_report_copy_x(const SsnReport *r, double *buf, uintptr_t len);
int ssn_report_copy_y(const SsnReport *r, double *buf, uintptr_t len);
int ssn_report_copy_z(const SsnReport *r, double *buf, uintptr_t len);

#ifdef __cplusplus
}
#endif

#endif /* SSNSDP_H */
