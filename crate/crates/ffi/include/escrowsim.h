#ifndef ESCROWSIM_H
#define ESCROWSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum EsimStatus {
  ESIM_STATUS_OK = 0,
  ESIM_STATUS_NULL_POINTER = 1,
  ESIM_STATUS_INVALID_UTF8 = 2,
  ESIM_STATUS_PARSE_ERROR = 3,
  ESIM_STATUS_VALIDATION_ERROR = 4,
  /**
   * The simulated chain rejected the event; the simulator is still usable.
   */
  ESIM_STATUS_EVENT_REJECTED = 5,
  ESIM_STATUS_INSUFFICIENT_FUNDS = 6,
  ESIM_STATUS_INVALID_INPUT = 7,
  ESIM_STATUS_ARITHMETIC_OVERFLOW = 8,
  ESIM_STATUS_BUFFER_TOO_SMALL = 9,
  ESIM_STATUS_PANIC = 10,
} EsimStatus;

/**
 * Opaque simulator handle.
 */
typedef struct EsimSimulator EsimSimulator;

typedef struct EsimFeeRow {
  /**
   * Static string owned by the library; do not free.
   */
  const char *method;
  uint64_t fee_min_usd_cents;
  uint64_t fee_max_usd_cents;
  /**
   * Gas cost in GWEI; zero for card and wallet methods.
   */
  uint64_t fee_gwei;
  bool proportional;
  uint32_t merchant_min_bp;
  uint32_t merchant_fixed_usd_cents;
  bool flexible_lockin;
} EsimFeeRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *esim_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *esim_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void esim_string_free(char *s);

/**
 * Creates a simulator from a scenario script. The script's events are
 * queued and applied by [`esim_simulator_step`]; further events can be
 * injected with [`esim_simulator_apply_event`].
 *
 * # Safety
 * `script_json` must be a NUL-terminated string; `out` must be writable.
 */
enum EsimStatus esim_simulator_new(const char *script_json,
                                   bool use_seed,
                                   uint64_t seed,
                                   struct EsimSimulator **out);

/**
 * # Safety
 * `sim` must be NULL or a handle from [`esim_simulator_new`] not yet freed.
 */
void esim_simulator_free(struct EsimSimulator *sim);

/**
 * Applies the next queued script event. Sets `*done` when the queue was
 * already empty. A rejected event returns `ESIM_STATUS_EVENT_REJECTED` (or a
 * more specific code) and leaves the simulator usable.
 *
 * # Safety
 * `sim` must be a live handle; `done` must be writable.
 */
enum EsimStatus esim_simulator_step(struct EsimSimulator *sim, bool *done);

/**
 * Applies one event given as a JSON object in script syntax.
 *
 * # Safety
 * `sim` must be a live handle; `event_json` a NUL-terminated string.
 */
enum EsimStatus esim_simulator_apply_event(struct EsimSimulator *sim, const char *event_json);

/**
 * Applies every queued event, then lets pending expiries fire.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum EsimStatus esim_simulator_finish(struct EsimSimulator *sim);

/**
 * Current settlement report as JSON.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable. Free the result
 * with [`esim_string_free`].
 */
enum EsimStatus esim_simulator_report_json(struct EsimSimulator *sim, char **out);

/**
 * Current conservation check result.
 *
 * # Safety
 * `sim` must be a live handle; `ok` must be writable.
 */
enum EsimStatus esim_simulator_conservation_ok(struct EsimSimulator *sim, bool *ok);

/**
 * Runs a whole script and returns the report JSON.
 *
 * # Safety
 * `script_json` must be a NUL-terminated string; `out` must be writable.
 */
enum EsimStatus esim_run_script(const char *script_json, bool use_seed, uint64_t seed, char **out);

/**
 * Expected outcome of a script according to the independent oracle, as JSON.
 *
 * # Safety
 * `script_json` must be a NUL-terminated string; `out` must be writable.
 */
enum EsimStatus esim_oracle_json(const char *script_json, bool use_seed, uint64_t seed, char **out);

/**
 * Fills `rows` with the payment-method comparison. `*written` receives the
 * number of rows; with too small a buffer nothing is written, `*written`
 * holds the required count and `ESIM_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `rows` must point to `capacity` writable rows; `written` must be writable.
 */
enum EsimStatus esim_fee_comparison(uint64_t amount_usd_cents,
                                    uint64_t eth_usd_cents,
                                    uint64_t gas_price_gwei,
                                    uint64_t gas_units,
                                    bool enforce_gas_bounds,
                                    struct EsimFeeRow *rows,
                                    size_t capacity,
                                    size_t *written);

/**
 * Linear proration of `price_wei` (decimal string) for `used_seconds` of a
 * `lock_seconds` period. Both results are decimal strings to be freed with
 * [`esim_string_free`].
 *
 * # Safety
 * `price_wei` must be a NUL-terminated string; both outputs must be writable.
 */
enum EsimStatus esim_prorate(const char *price_wei,
                             uint64_t used_seconds,
                             uint64_t lock_seconds,
                             char **charge_out,
                             char **refund_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ESCROWSIM_H */
