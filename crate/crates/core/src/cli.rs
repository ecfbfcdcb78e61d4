//! Command-line front end. `run` is the entry point used by `main`; it
//! takes explicit output streams so tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 the run completed with rejected events or a
//! conservation failure, 2 unusable input (parse, validation, I/O).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::pricing::{compare_fee_methods, format_usd_cents, FeeQuery};
use crate::scenario::{demo_script, oracle_settle, parse_scenario, render_summary, Simulation, DEMO_SESSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILED: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "escrowsim",
    version,
    about = "Escrow settlement simulator for on-demand video conferencing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a JSON scenario script and print the settlement report.
    Run {
        script: PathBuf,
        /// Use jittered blocks with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the transaction log as JSON lines.
        #[arg(long)]
        tx_log: Option<PathBuf>,
        /// Print the human-readable summary instead of JSON.
        #[arg(long)]
        summary: bool,
        #[arg(long, hide = true)]
        inject_conservation_fault: bool,
    },
    /// Compute expected settlements with the independent oracle.
    Oracle {
        script: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare card, wallet and gas fees for one payment.
    Fees {
        /// Payment amount in USD, e.g. 100 or 12.50.
        #[arg(long)]
        amount_usd: String,
        #[arg(long, default_value = "500")]
        eth_usd: String,
        #[arg(long, default_value_t = 20)]
        gas_price_gwei: u64,
        #[arg(long, default_value_t = 21_000)]
        gas_units: u64,
        /// Accept gas prices outside 1-40 GWEI.
        #[arg(long)]
        allow_any_gas_price: bool,
        #[arg(long)]
        json: bool,
    },
    /// Walk through the canonical one-hour session.
    Demo {
        /// Let the alarm clock close the session instead of the user.
        #[arg(long)]
        timeout: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

/// Parses a non-negative decimal with at most two fractional digits.
pub fn parse_usd_cents(text: &str) -> Result<u64, Error> {
    let bad = || Error::InvalidInput(format!("not a dollar amount: {text:?}"));
    let text = text.strip_prefix('$').unwrap_or(text);
    let (whole, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || frac.len() > 2 || (!frac.is_empty() && !digits(frac)) {
        return Err(bad());
    }
    let whole: u64 = whole.parse().map_err(|_| bad())?;
    let frac: u64 = format!("{frac:0<2}").parse().map_err(|_| bad())?;
    whole
        .checked_mul(100)
        .and_then(|c| c.checked_add(frac))
        .ok_or_else(bad)
}

fn fail(err: &mut dyn Write, code: i32, msg: impl std::fmt::Display) -> i32 {
    let _ = writeln!(err, "escrowsim: {msg}");
    code
}

fn read_script(path: &PathBuf, err: &mut dyn Write) -> Result<crate::scenario::ScenarioScript, i32> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(err, EXIT_BAD_INPUT, format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| fail(err, EXIT_BAD_INPUT, format!("{}: {e}", path.display())))
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match cli.command {
        Command::Run {
            script,
            seed,
            out: out_path,
            tx_log,
            summary,
            inject_conservation_fault,
        } => {
            let parsed = match read_script(&script, err) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let mut sim = match Simulation::from_script(&parsed, seed) {
                Ok(sim) => sim,
                Err(e) => return fail(err, EXIT_BAD_INPUT, e),
            };
            for event in &parsed.events {
                if let Err(e @ Error::Validation(_)) = sim.apply(event) {
                    return fail(err, EXIT_BAD_INPUT, e);
                }
            }
            sim.drain_wakeups();
            if inject_conservation_fault {
                if let Some(addr) = sim.actors().values().next().copied() {
                    let ledger = sim.orchestrator_mut().ledger_mut();
                    let bumped = ledger
                        .balance_of(addr)
                        .ok()
                        .and_then(|b| b.checked_add(crate::Amount::from_wei(1)).ok())
                        .unwrap_or(crate::Amount::ZERO);
                    ledger.inject_balance_fault(addr, bumped);
                }
            }
            let report = sim.report();
            if let Some(path) = tx_log {
                let log = sim.orchestrator().ledger().export_tx_log();
                if let Err(e) = fs::write(&path, log) {
                    return fail(err, EXIT_BAD_INPUT, format!("{}: {e}", path.display()));
                }
            }
            let body = if summary {
                render_summary(&report)
            } else {
                report.to_json() + "\n"
            };
            match out_path {
                Some(path) => {
                    if let Err(e) = fs::write(&path, &body) {
                        return fail(err, EXIT_BAD_INPUT, format!("{}: {e}", path.display()));
                    }
                }
                None => {
                    let _ = out.write_all(body.as_bytes());
                }
            }
            for e in &report.event_errors {
                let _ = writeln!(
                    err,
                    "event {} ({} by {}): {}",
                    e.index, e.action, e.actor, e.error
                );
            }
            if !report.conservation_ok {
                return fail(err, EXIT_RUN_FAILED, "conservation check failed");
            }
            if report.event_errors.is_empty() {
                EXIT_OK
            } else {
                EXIT_RUN_FAILED
            }
        }
        Command::Oracle { script, seed } => {
            let parsed = match read_script(&script, err) {
                Ok(s) => s,
                Err(code) => return code,
            };
            match oracle_settle(&parsed, seed) {
                Ok(outcome) => {
                    let _ = writeln!(
                        out,
                        "{}",
                        serde_json::to_string_pretty(&outcome).expect("serializes")
                    );
                    EXIT_OK
                }
                Err(e) => fail(err, EXIT_BAD_INPUT, e),
            }
        }
        Command::Fees {
            amount_usd,
            eth_usd,
            gas_price_gwei,
            gas_units,
            allow_any_gas_price,
            json,
        } => {
            let query = match (parse_usd_cents(&amount_usd), parse_usd_cents(&eth_usd)) {
                (Ok(amount), Ok(eth)) => FeeQuery {
                    amount_usd_cents: amount,
                    eth_usd_cents: eth,
                    gas_price_gwei,
                    gas_units,
                    enforce_gas_bounds: !allow_any_gas_price,
                },
                (Err(e), _) | (_, Err(e)) => return fail(err, EXIT_BAD_INPUT, e),
            };
            let rows = match compare_fee_methods(&query) {
                Ok(rows) => rows,
                Err(e) => return fail(err, EXIT_BAD_INPUT, e),
            };
            if json {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&rows).expect("serializes")
                );
                return EXIT_OK;
            }
            for row in rows {
                let fee = if row.fee_min_usd_cents == row.fee_max_usd_cents {
                    format_usd_cents(row.fee_min_usd_cents)
                } else {
                    format!(
                        "{}\u{2013}{}",
                        format_usd_cents(row.fee_min_usd_cents),
                        format_usd_cents(row.fee_max_usd_cents)
                    )
                };
                let merchant = if row.proportional {
                    format!(
                        "merchant min {}.{:02}%{}",
                        row.merchant_min_bp / 100,
                        row.merchant_min_bp % 100,
                        if row.merchant_fixed_usd_cents > 0 {
                            format!(
                                " + {}",
                                format_usd_cents(u128::from(row.merchant_fixed_usd_cents))
                            )
                        } else {
                            String::new()
                        }
                    )
                } else {
                    format!(
                        "{} wei gas",
                        row.fee_wei.map(|w| w.to_string()).unwrap_or_default()
                    )
                };
                let lockin = match row.lockin {
                    crate::pricing::LockIn::Limited => "limited",
                    crate::pricing::LockIn::Flexible => "flexible",
                };
                let _ = writeln!(
                    out,
                    "{:<11} {:<14} {:<28} lock-in {}",
                    row.method, fee, merchant, lockin
                );
            }
            EXIT_OK
        }
        Command::Demo { timeout, seed, json } => {
            let script = demo_script(timeout);
            let mut sim = match Simulation::from_script(&script, seed) {
                Ok(sim) => sim,
                Err(e) => return fail(err, EXIT_BAD_INPUT, e),
            };
            for event in &script.events {
                let _ = sim.apply(event);
            }
            let report = sim.finish();
            if json {
                let _ = writeln!(out, "{}", report.to_json());
            } else {
                if let Some(session) = report.sessions.iter().find(|s| s.session == DEMO_SESSION) {
                    for step in &session.step_log {
                        let _ = writeln!(out, "step {step:>2}: {}", step_label(*step));
                    }
                }
                let _ = write!(out, "{}", render_summary(&report));
                let _ = writeln!(out, "tx log sha256 {}", report.tx_log_sha256);
            }
            if report.is_clean() {
                EXIT_OK
            } else {
                EXIT_RUN_FAILED
            }
        }
    }
}

fn step_label(step: u8) -> &'static str {
    match step {
        1 => "price estimated from QoS preferences",
        2 => "contract deployed, quote delivered",
        3 => "end user approved and paid, funds locked",
        4 => "owner countersigned",
        5 => "deployment requested",
        6 => "placement selected",
        7 => "containers deployed",
        8 => "deployment reported",
        9 => "session URL issued",
        10 => "URL shared with participants",
        11 => "end user signed the stop",
        12 => "service undeployed",
        13 => "escrow settled",
        14 => "owner notified",
        15 => "provider paid",
        16 => "end user notified of completion",
        _ => "unknown",
    }
}
