#ifndef BFFG_H
#define BFFG_H

/* C interface to the guided-filtering library.
 *
 * Every function that can fail returns an error code (BFFG_OK on success) and
 * leaves a human-readable description in bffg_last_error().  Strings returned
 * through char** out-parameters are heap-allocated; release them with
 * bffg_string_free().  Handles are opaque; a NULL handle is reported as a
 * validation error, never dereferenced. */

#ifdef __cplusplus
extern "C" {
#endif

#define BFFG_OK 0
#define BFFG_EVALIDATION 2 /* bad model, argument, or schema violation */
#define BFFG_ENUMERIC 3    /* numerical failure during a computation */
#define BFFG_EOTHER 4      /* anything else (I/O, allocation, ...) */

const char* bffg_version(void);

/* Description of the most recent failure on this thread; empty on success. */
const char* bffg_last_error(void);

/* A loaded model document plus its current parameter values. */
typedef struct bffg_model bffg_model;

int bffg_model_load_file(const char* path, bffg_model** out);
int bffg_model_load_string(const char* text, bffg_model** out);
void bffg_model_free(bffg_model* m);

/* Structure queries; return a negative count on a NULL handle. */
int bffg_model_num_vertices(const bffg_model* m);
int bffg_model_num_edges(const bffg_model* m);
int bffg_model_param_count(const bffg_model* m);
const char* bffg_model_param_name(const bffg_model* m, int index);
int bffg_model_param_get(const bffg_model* m, const char* name, double* value);
int bffg_model_param_set(bffg_model* m, const char* name, double value);

/* Backward filter at the current parameter values.  *out receives a JSON
 * document with one entry per edge message (family-specific fields), the
 * fused root potential, and its log value at the root state.  Non-finite
 * numbers are serialized as null. */
int bffg_filter_json(const bffg_model* m, char** out);

/* n guided trajectories.  *out receives CSV in long format with a leading
 * "# bffg-guide v1" schema comment; columns rep,kind,id,component,value with
 * kind one of state, arc_log_weight, total_log_weight. */
int bffg_guide_csv(const bffg_model* m, int n, unsigned long long seed, char** out);

/* Importance-sampling likelihood estimate from n guided draws.  degenerate
 * (may be NULL) is set to 1 when every draw had zero weight. */
int bffg_log_likelihood(const bffg_model* m, int n, unsigned long long seed,
                        double* log_estimate, double* rel_std_error, int* degenerate);

/* Random-walk-within-pCN posterior sampling over the model's declared
 * parameters.  *out receives CSV with a "# bffg-mcmc v1" schema comment,
 * acceptance-rate comment lines, a header row (iter, one column per
 * parameter, log_psi), and one row per iteration. */
int bffg_mcmc_csv(const bffg_model* m, int iterations, int burnin, double lambda,
                  unsigned long long seed, char** out);

/* JSON text of a built-in example model ("tanh_tree" or "finite_chain").
 * seed = 0 keeps the example's canned observations; any other value
 * regenerates them by simulating with that seed. */
int bffg_write_example_model(const char* name, unsigned long long seed, char** out);

void bffg_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* BFFG_H */
