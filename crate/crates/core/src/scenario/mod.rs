//! Scripted scenarios: JSON scripts, the runner, reports, the independent
//! oracle and generators for demo and randomized scripts.

mod demo;
mod generate;
mod oracle;
mod report;
mod runner;
mod script;

pub use demo::{demo_script, DEMO_END_USER, DEMO_OWNER, DEMO_SESSION};
pub use generate::{random_script, GeneratorLimits};
pub use oracle::{oracle_settle, OracleOutcome};
pub use report::{
    render_summary, sha256_hex, ContractReport, EventError, SessionReport, SettlementReport,
    SettlementSummary, WakeupReport,
};
pub use runner::{run_script, Simulation};
pub use script::{
    parse_scenario, validate_config, validate_script, Action, JitterConfig, ScenarioConfig, ScenarioScript,
    ScriptEvent, SharePart, SharesSpec,
};
