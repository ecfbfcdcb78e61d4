//! C ABI over the `escrowsim` simulator.
//!
//! Conventions:
//! * every fallible function returns an [`EsimStatus`]; `ESIM_STATUS_OK` is 0,
//! * details of the last failure on the calling thread are available from
//!   [`esim_last_error_message`],
//! * strings handed out by this library are NUL-terminated UTF-8 and must be
//!   released with [`esim_string_free`],
//! * wei amounts cross the boundary as decimal strings.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use escrowsim::contracts::prorate;
use escrowsim::pricing::{compare_fee_methods, FeeQuery, LockIn};
use escrowsim::scenario::{
    oracle_settle, parse_scenario, run_script, ScenarioScript, ScriptEvent, Simulation,
};
use escrowsim::{Amount, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    /// The simulated chain rejected the event; the simulator is still usable.
    EventRejected = 5,
    InsufficientFunds = 6,
    InvalidInput = 7,
    ArithmeticOverflow = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque simulator handle.
pub struct EsimSimulator {
    sim: Simulation,
    pending: std::vec::IntoIter<ScriptEvent>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EsimFeeRow {
    /// Static string owned by the library; do not free.
    pub method: *const libc::c_char,
    pub fee_min_usd_cents: u64,
    pub fee_max_usd_cents: u64,
    /// Gas cost in GWEI; zero for card and wallet methods.
    pub fee_gwei: u64,
    pub proportional: bool,
    pub merchant_min_bp: u32,
    pub merchant_fixed_usd_cents: u32,
    pub flexible_lockin: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> EsimStatus {
    match err {
        Error::Parse { .. } => EsimStatus::ParseError,
        Error::Validation(_) => EsimStatus::ValidationError,
        Error::InsufficientFunds { .. } => EsimStatus::InsufficientFunds,
        Error::AmountOverflow | Error::AmountUnderflow => EsimStatus::ArithmeticOverflow,
        Error::InvalidInput(_) | Error::InvalidPreferences(_) | Error::GasPriceOutOfRange { .. } => {
            EsimStatus::InvalidInput
        }
        _ => EsimStatus::EventRejected,
    }
}

fn fail(err: Error) -> EsimStatus {
    set_last_error(err.to_string());
    status_of(&err)
}

/// Runs `f`, turning panics into `EsimStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), EsimStatus>) -> EsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EsimStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("internal panic");
            EsimStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const libc::c_char) -> Result<&'a str, EsimStatus> {
    if p.is_null() {
        set_last_error("null pointer argument");
        return Err(EsimStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_last_error("argument is not valid UTF-8");
        EsimStatus::InvalidUtf8
    })
}

unsafe fn write_string(out: *mut *mut libc::c_char, text: String) -> Result<(), EsimStatus> {
    if out.is_null() {
        set_last_error("null output pointer");
        return Err(EsimStatus::NullPointer);
    }
    let c = CString::new(text).map_err(|_| {
        set_last_error("output contains NUL");
        EsimStatus::InvalidInput
    })?;
    *out = c.into_raw();
    Ok(())
}

fn seed_of(use_seed: bool, seed: u64) -> Option<u64> {
    use_seed.then_some(seed)
}

fn parse(text: &str) -> Result<ScenarioScript, EsimStatus> {
    parse_scenario(text).map_err(fail)
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn esim_last_error_message() -> *const libc::c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn esim_version() -> *const libc::c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn esim_string_free(s: *mut libc::c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a simulator from a scenario script. The script's events are
/// queued and applied by [`esim_simulator_step`]; further events can be
/// injected with [`esim_simulator_apply_event`].
///
/// # Safety
/// `script_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_new(
    script_json: *const libc::c_char,
    use_seed: bool,
    seed: u64,
    out: *mut *mut EsimSimulator,
) -> EsimStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null output pointer");
            return Err(EsimStatus::NullPointer);
        }
        let script = parse(read_str(script_json)?)?;
        let sim = Simulation::from_script(&script, seed_of(use_seed, seed)).map_err(fail)?;
        let handle = Box::new(EsimSimulator {
            sim,
            pending: script.events.into_iter(),
        });
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle from [`esim_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_free(sim: *mut EsimSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn handle<'a>(sim: *mut EsimSimulator) -> Result<&'a mut EsimSimulator, EsimStatus> {
    sim.as_mut().ok_or_else(|| {
        set_last_error("null simulator handle");
        EsimStatus::NullPointer
    })
}

/// Applies the next queued script event. Sets `*done` when the queue was
/// already empty. A rejected event returns `ESIM_STATUS_EVENT_REJECTED` (or a
/// more specific code) and leaves the simulator usable.
///
/// # Safety
/// `sim` must be a live handle; `done` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_step(sim: *mut EsimSimulator, done: *mut bool) -> EsimStatus {
    guard(|| {
        let h = handle(sim)?;
        if done.is_null() {
            set_last_error("null output pointer");
            return Err(EsimStatus::NullPointer);
        }
        match h.pending.next() {
            None => {
                *done = true;
                Ok(())
            }
            Some(event) => {
                *done = false;
                h.sim.apply(&event).map_err(fail)
            }
        }
    })
}

/// Applies one event given as a JSON object in script syntax.
///
/// # Safety
/// `sim` must be a live handle; `event_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_apply_event(
    sim: *mut EsimSimulator,
    event_json: *const libc::c_char,
) -> EsimStatus {
    guard(|| {
        let h = handle(sim)?;
        let text = read_str(event_json)?;
        let event: ScriptEvent = serde_json::from_str(text).map_err(|e| {
            fail(Error::Parse {
                line: e.line(),
                column: e.column(),
                path: ".".into(),
                message: e.to_string(),
            })
        })?;
        h.sim.apply(&event).map_err(fail)
    })
}

/// Applies every queued event, then lets pending expiries fire.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_finish(sim: *mut EsimSimulator) -> EsimStatus {
    guard(|| {
        let h = handle(sim)?;
        for event in h.pending.by_ref() {
            if let Err(e @ Error::Validation(_)) = h.sim.apply(&event) {
                return Err(fail(e));
            }
        }
        h.sim.drain_wakeups();
        Ok(())
    })
}

/// Current settlement report as JSON.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable. Free the result
/// with [`esim_string_free`].
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_report_json(
    sim: *mut EsimSimulator,
    out: *mut *mut libc::c_char,
) -> EsimStatus {
    guard(|| {
        let h = handle(sim)?;
        write_string(out, h.sim.report().to_json())
    })
}

/// Current conservation check result.
///
/// # Safety
/// `sim` must be a live handle; `ok` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_simulator_conservation_ok(
    sim: *mut EsimSimulator,
    ok: *mut bool,
) -> EsimStatus {
    guard(|| {
        let h = handle(sim)?;
        if ok.is_null() {
            set_last_error("null output pointer");
            return Err(EsimStatus::NullPointer);
        }
        *ok = h.sim.orchestrator().ledger().conservation_check();
        Ok(())
    })
}

/// Runs a whole script and returns the report JSON.
///
/// # Safety
/// `script_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_run_script(
    script_json: *const libc::c_char,
    use_seed: bool,
    seed: u64,
    out: *mut *mut libc::c_char,
) -> EsimStatus {
    guard(|| {
        let script = parse(read_str(script_json)?)?;
        let report = run_script(&script, seed_of(use_seed, seed)).map_err(fail)?;
        write_string(out, report.to_json())
    })
}

/// Expected outcome of a script according to the independent oracle, as JSON.
///
/// # Safety
/// `script_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_oracle_json(
    script_json: *const libc::c_char,
    use_seed: bool,
    seed: u64,
    out: *mut *mut libc::c_char,
) -> EsimStatus {
    guard(|| {
        let script = parse(read_str(script_json)?)?;
        let outcome = oracle_settle(&script, seed_of(use_seed, seed)).map_err(fail)?;
        write_string(out, serde_json::to_string_pretty(&outcome).expect("serializes"))
    })
}

static METHOD_NAMES: [(&str, &CStr); 4] = [
    ("Visa", c"Visa"),
    ("Mastercard", c"Mastercard"),
    ("PayPal", c"PayPal"),
    ("Ethereum", c"Ethereum"),
];

/// Fills `rows` with the payment-method comparison. `*written` receives the
/// number of rows; with too small a buffer nothing is written, `*written`
/// holds the required count and `ESIM_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `rows` must point to `capacity` writable rows; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_fee_comparison(
    amount_usd_cents: u64,
    eth_usd_cents: u64,
    gas_price_gwei: u64,
    gas_units: u64,
    enforce_gas_bounds: bool,
    rows: *mut EsimFeeRow,
    capacity: usize,
    written: *mut usize,
) -> EsimStatus {
    guard(|| {
        if written.is_null() || (rows.is_null() && capacity > 0) {
            set_last_error("null output pointer");
            return Err(EsimStatus::NullPointer);
        }
        let table = compare_fee_methods(&FeeQuery {
            amount_usd_cents,
            eth_usd_cents,
            gas_price_gwei,
            gas_units,
            enforce_gas_bounds,
        })
        .map_err(fail)?;
        *written = table.len();
        if capacity < table.len() {
            set_last_error(format!("{} rows needed", table.len()));
            return Err(EsimStatus::BufferTooSmall);
        }
        for (i, row) in table.iter().enumerate() {
            let name = METHOD_NAMES
                .iter()
                .find(|(n, _)| *n == row.method)
                .map_or(ptr::null(), |(_, c)| c.as_ptr());
            let cents = |v: u128| u64::try_from(v).unwrap_or(u64::MAX);
            let gwei = row.fee_wei.map_or(0, |w| {
                u64::try_from(w.wei() / escrowsim::amount::WEI_PER_GWEI).unwrap_or(u64::MAX)
            });
            rows.add(i).write(EsimFeeRow {
                method: name,
                fee_min_usd_cents: cents(row.fee_min_usd_cents),
                fee_max_usd_cents: cents(row.fee_max_usd_cents),
                fee_gwei: gwei,
                proportional: row.proportional,
                merchant_min_bp: row.merchant_min_bp,
                merchant_fixed_usd_cents: row.merchant_fixed_usd_cents,
                flexible_lockin: row.lockin == LockIn::Flexible,
            });
        }
        Ok(())
    })
}

/// Linear proration of `price_wei` (decimal string) for `used_seconds` of a
/// `lock_seconds` period. Both results are decimal strings to be freed with
/// [`esim_string_free`].
///
/// # Safety
/// `price_wei` must be a NUL-terminated string; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn esim_prorate(
    price_wei: *const libc::c_char,
    used_seconds: u64,
    lock_seconds: u64,
    charge_out: *mut *mut libc::c_char,
    refund_out: *mut *mut libc::c_char,
) -> EsimStatus {
    guard(|| {
        if charge_out.is_null() || refund_out.is_null() {
            set_last_error("null output pointer");
            return Err(EsimStatus::NullPointer);
        }
        let price: Amount = read_str(price_wei)?
            .parse()
            .map_err(|_| fail(Error::InvalidInput("price is not a decimal wei amount".into())))?;
        let s = prorate(price, used_seconds, lock_seconds).map_err(fail)?;
        write_string(charge_out, s.charge.to_string())?;
        if let Err(status) = write_string(refund_out, s.refund.to_string()) {
            esim_string_free(*charge_out);
            *charge_out = ptr::null_mut();
            return Err(status);
        }
        Ok(())
    })
}
