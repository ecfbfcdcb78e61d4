//! Scenario script format and its validation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::amount::{Amount, BASIS_POINTS};
use crate::contracts::{ConstraintTerms, ProviderOffer, Vote};
use crate::error::{Error, Result};
use crate::ledger::{
    GasSchedule, DEFAULT_BLOCK_INTERVAL, DEFAULT_JITTER_SPREAD, MAX_GAS_PRICE_GWEI, MIN_GAS_PRICE_GWEI,
};
use crate::orchestrator::OrchestratorConfig;
use crate::pricing::{QosPreferences, RateCard};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    #[serde(default)]
    pub config: ScenarioConfig,
    /// Actor name to opening balance in wei.
    pub genesis: BTreeMap<String, Amount>,
    #[serde(default)]
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub block_interval_seconds: u64,
    pub jitter: Option<JitterConfig>,
    pub gas: GasSchedule,
    pub enforce_gas_bounds: bool,
    pub rate_card: RateCard,
    pub refund_threshold_bp: u32,
    pub vote_threshold_bp: u32,
    pub provider: ProviderOffer,
    pub deploy_latency_seconds: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let orchestrator = OrchestratorConfig::default();
        ScenarioConfig {
            block_interval_seconds: DEFAULT_BLOCK_INTERVAL,
            jitter: None,
            gas: GasSchedule::default(),
            enforce_gas_bounds: true,
            rate_card: orchestrator.rate_card,
            refund_threshold_bp: orchestrator.refund_threshold_bp,
            vote_threshold_bp: orchestrator.vote_threshold_bp,
            provider: orchestrator.provider,
            deploy_latency_seconds: orchestrator.deploy_latency_seconds,
        }
    }
}

impl ScenarioConfig {
    pub fn orchestrator_config(&self) -> OrchestratorConfig {
        OrchestratorConfig {
            rate_card: self.rate_card.clone(),
            provider: self.provider.clone(),
            refund_threshold_bp: self.refund_threshold_bp,
            vote_threshold_bp: self.vote_threshold_bp,
            deploy_latency_seconds: self.deploy_latency_seconds,
        }
    }

    /// Replaces the block mode with jitter seeded by `seed`, keeping a
    /// configured spread.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let spread = self.jitter.map_or(DEFAULT_JITTER_SPREAD, |j| j.spread_seconds);
        self.jitter = Some(JitterConfig {
            seed,
            spread_seconds: spread,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterConfig {
    pub seed: u64,
    #[serde(default = "default_spread")]
    pub spread_seconds: u64,
}

fn default_spread() -> u64 {
    DEFAULT_JITTER_SPREAD
}

/// One scripted action. It runs in the first block whose timestamp is at
/// least `at`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub at: u64,
    pub actor: String,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Transfer {
        to: String,
        value: Amount,
    },
    /// The actor is the end user.
    RequestSession {
        session: String,
        owner: String,
        prefs: QosPreferences,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constraints: Option<ConstraintTerms>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shares: Option<SharesSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        voters: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        fail_deployment: bool,
    },
    /// Pays the quoted price unless `value` overrides it.
    Pay {
        session: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<Amount>,
    },
    Stop {
        session: String,
    },
    Qos {
        session: String,
        available: bool,
    },
    QuotaStart {
        session: String,
    },
    QuotaStop {
        session: String,
    },
    Vote {
        session: String,
        choice: Vote,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Transfer { .. } => "transfer",
            Action::RequestSession { .. } => "request_session",
            Action::Pay { .. } => "pay",
            Action::Stop { .. } => "stop",
            Action::Qos { .. } => "qos",
            Action::QuotaStart { .. } => "quota_start",
            Action::QuotaStop { .. } => "quota_stop",
            Action::Vote { .. } => "vote",
        }
    }

    pub fn session(&self) -> Option<&str> {
        match self {
            Action::Transfer { .. } => None,
            Action::RequestSession { session, .. }
            | Action::Pay { session, .. }
            | Action::Stop { session }
            | Action::Qos { session, .. }
            | Action::QuotaStart { session }
            | Action::QuotaStop { session }
            | Action::Vote { session, .. } => Some(session),
        }
    }

    /// Every actor name the action refers to besides the acting one.
    pub fn named_parties(&self) -> Vec<&str> {
        match self {
            Action::Transfer { to, .. } => vec![to],
            Action::RequestSession {
                owner,
                shares,
                voters,
                ..
            } => {
                let mut names = vec![owner.as_str()];
                names.extend(
                    shares
                        .iter()
                        .flat_map(|s| s.parties.iter().map(|p| p.party.as_str())),
                );
                names.extend(voters.iter().flatten().map(String::as_str));
                names
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharesSpec {
    pub denominator: u64,
    pub parties: Vec<SharePart>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharePart {
    pub party: String,
    pub numerator: u64,
}

/// Parses and validates a JSON scenario.
pub fn parse_scenario(text: &str) -> Result<ScenarioScript> {
    let mut de = serde_json::Deserializer::from_str(text);
    let script: ScenarioScript = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        path: ".".into(),
        message: e.to_string(),
    })?;
    validate_script(&script)?;
    Ok(script)
}

pub fn validate_config(config: &ScenarioConfig) -> Result<()> {
    let invalid = |msg: String| Err(Error::Validation(msg));
    if config.block_interval_seconds == 0 {
        return invalid("config.block_interval_seconds must be positive".into());
    }
    if let Some(j) = config.jitter {
        if j.spread_seconds >= config.block_interval_seconds {
            return invalid(format!(
                "config.jitter.spread_seconds {} must be below the block interval {}",
                j.spread_seconds, config.block_interval_seconds
            ));
        }
    }
    if config.enforce_gas_bounds {
        config
            .gas
            .check_price_bounds(MIN_GAS_PRICE_GWEI, MAX_GAS_PRICE_GWEI)
            .map_err(|e| Error::Validation(format!("config.gas.gas_price: {e}")))?;
    }
    if config.refund_threshold_bp > BASIS_POINTS as u32 {
        return invalid("config.refund_threshold_bp must be at most 10000".into());
    }
    if config.vote_threshold_bp >= BASIS_POINTS as u32 {
        return invalid("config.vote_threshold_bp must be below 10000".into());
    }
    if config.rate_card.standby_window_seconds == 0 {
        return invalid("config.rate_card.standby_window_seconds must be positive".into());
    }
    Ok(())
}

/// Structural checks that need no simulation: time order, declared actors,
/// and session labels introduced before use.
pub fn validate_script(script: &ScenarioScript) -> Result<()> {
    validate_config(&script.config)?;
    script
        .genesis
        .values()
        .try_fold(Amount::ZERO, |acc, v| acc.checked_add(*v))
        .map_err(|_| Error::Validation("genesis balances overflow".into()))?;

    let mut last_at = 0;
    let mut sessions = BTreeSet::new();
    for (i, event) in script.events.iter().enumerate() {
        let here = |msg: String| Error::Validation(format!("events[{i}]: {msg}"));
        if event.at < last_at {
            return Err(here(format!(
                "time {} precedes the previous event at {last_at}",
                event.at
            )));
        }
        last_at = event.at;
        for name in std::iter::once(event.actor.as_str()).chain(event.action.named_parties()) {
            if !script.genesis.contains_key(name) {
                return Err(here(format!("undeclared actor {name:?}")));
            }
        }
        match &event.action {
            Action::RequestSession { session, .. } => {
                if !sessions.insert(session.as_str()) {
                    return Err(here(format!("session {session:?} requested twice")));
                }
            }
            other => {
                if let Some(session) = other.session() {
                    if !sessions.contains(session) {
                        return Err(here(format!("session {session:?} used before it is requested")));
                    }
                }
            }
        }
    }
    Ok(())
}

impl ScenarioScript {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario scripts serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "genesis": {"alice": "1000000000000000000000", "bob": "0"},
        "events": [
            {"at": 0, "actor": "alice", "action": "request_session", "session": "s",
             "owner": "bob",
             "prefs": {"availability_target_bp": 9980, "video_quality": "hd",
                       "max_period_seconds": 3600, "monetization_kind": "dynamic_price"}},
            {"at": 15, "actor": "alice", "action": "pay", "session": "s"},
            {"at": 1815, "actor": "alice", "action": "stop", "session": "s"}
        ]
    }"#;

    #[test]
    fn parses_minimal_script() {
        let script = parse_scenario(MINIMAL).unwrap();
        assert_eq!(script.events.len(), 3);
        assert_eq!(script.config, ScenarioConfig::default());
        assert!(matches!(script.events[1].action, Action::Pay { value: None, .. }));
    }

    #[test]
    fn round_trips_through_json() {
        let script = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&script.to_json()).unwrap(), script);
    }

    #[test]
    fn parse_error_reports_position_and_path() {
        let text = "{\n  \"genesis\": {\"alice\": 12}\n}";
        match parse_scenario(text) {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(path, "genesis.alice");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        let undeclared = MINIMAL.replace("\"owner\": \"bob\"", "\"owner\": \"carol\"");
        assert!(matches!(parse_scenario(&undeclared), Err(Error::Validation(m)) if m.contains("carol")));
        let unordered = MINIMAL.replace("\"at\": 1815", "\"at\": 10");
        assert!(matches!(parse_scenario(&unordered), Err(Error::Validation(_))));
        let early = MINIMAL.replace(
            "\"action\": \"pay\", \"session\": \"s\"",
            "\"action\": \"pay\", \"session\": \"t\"",
        );
        assert!(matches!(parse_scenario(&early), Err(Error::Validation(m)) if m.contains("\"t\"")));
    }

    #[test]
    fn gas_bounds_are_validated() {
        let text = r#"{"config": {"gas": {"gas_price": "41000000000"}}, "genesis": {}}"#;
        assert!(matches!(parse_scenario(text), Err(Error::Validation(m)) if m.contains("gas_price")));
        let text = r#"{"config": {"gas": {"gas_price": "41000000000"}, "enforce_gas_bounds": false}, "genesis": {}}"#;
        assert!(parse_scenario(text).is_ok());
    }
}
