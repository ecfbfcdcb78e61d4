//! Settlement report of a scripted run: machine-readable JSON plus a short
//! human summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::amount::Amount;
use crate::contracts::{AgreementContract, ContractKindTag};
use crate::ledger::{Address, Block};
use crate::orchestrator::{QuotaSessionRecord, SessionRecord, UrlToken, WakeupOutcome};
use crate::pricing::Quote;

use super::runner::Simulation;

/// Money released by one session, with parties named as in the script.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SettlementSummary {
    pub charge: Amount,
    pub refund: Amount,
    pub payouts: BTreeMap<String, Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventError {
    pub index: usize,
    pub at: u64,
    pub block_height: u64,
    pub actor: String,
    pub action: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WakeupReport {
    pub contract: Address,
    pub fire_at: u64,
    pub block: Block,
    pub settled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WakeupReport {
    pub(crate) fn new(outcome: &WakeupOutcome) -> Self {
        let (settled, error) = match &outcome.result {
            Ok(s) => (s.is_some(), None),
            Err(e) => (false, Some(e.to_string())),
        };
        WakeupReport {
            contract: outcome.wakeup.contract,
            fire_at: outcome.wakeup.fire_at,
            block: outcome.block,
            settled,
            error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionReport {
    pub session: String,
    pub kind: ContractKindTag,
    pub end_user: String,
    pub owner: String,
    pub quote: Quote,
    pub agreement: Option<Address>,
    pub companion: Option<Address>,
    pub contract_count: usize,
    pub url_token: Option<UrlToken>,
    pub deploy_block: Option<Block>,
    pub stop_block: Option<Block>,
    pub availability_bp: u32,
    pub qos_samples: usize,
    pub step_log: Vec<u8>,
    pub quota_sessions: Vec<QuotaSessionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContractReport {
    pub address: Address,
    pub session: Option<String>,
    pub role: &'static str,
    pub contract: AgreementContract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SettlementReport {
    pub final_block: Block,
    pub conservation_ok: bool,
    pub genesis_total: Amount,
    pub fee_sink: Amount,
    pub final_balances: BTreeMap<String, Amount>,
    pub settlements: BTreeMap<String, SettlementSummary>,
    pub sessions: Vec<SessionReport>,
    pub contracts: Vec<ContractReport>,
    pub wakeups: Vec<WakeupReport>,
    pub event_errors: Vec<EventError>,
    pub tx_count: usize,
    pub tx_log_sha256: String,
}

impl SettlementReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn is_clean(&self) -> bool {
        self.conservation_ok && self.event_errors.is_empty()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn build_report(sim: &Simulation) -> SettlementReport {
    let orch = sim.orchestrator();
    let ledger = orch.ledger();
    let names: BTreeMap<Address, String> = sim.actors().iter().map(|(n, a)| (*a, n.clone())).collect();
    let name_of = |a: Address| names.get(&a).cloned().unwrap_or_else(|| a.to_string());
    let labels = sim.session_labels();

    let mut settlements = BTreeMap::new();
    let mut sessions = Vec::new();
    let mut roles: BTreeMap<Address, (String, &'static str)> = BTreeMap::new();
    for record in orch.sessions() {
        let label = labels[&record.id].clone();
        if let Some(s) = &record.settlement {
            settlements.insert(
                label.clone(),
                SettlementSummary {
                    charge: s.charge,
                    refund: s.refund,
                    payouts: s.payouts.iter().map(|(a, v)| (name_of(*a), *v)).collect(),
                },
            );
        }
        if let Some(a) = record.contract_address {
            roles.insert(a, (label.clone(), "agreement"));
        }
        if let Some(a) = record.companion_address {
            let role = match record.kind {
                ContractKindTag::ConsensusDecision => "voting",
                _ => "share_registry",
            };
            roles.insert(a, (label.clone(), role));
        }
        sessions.push(session_report(label, record, &name_of));
    }

    let contracts = ledger
        .contracts()
        .map(|(addr, c)| {
            let (session, role) = match roles.get(addr) {
                Some((label, role)) => (Some(label.clone()), *role),
                None => (None, "agreement"),
            };
            ContractReport {
                address: *addr,
                session,
                role,
                contract: c.clone(),
            }
        })
        .collect();

    let final_balances = sim
        .actors()
        .iter()
        .map(|(name, addr)| (name.clone(), ledger.balance_of(*addr).unwrap_or(Amount::ZERO)))
        .collect();

    SettlementReport {
        final_block: ledger.current_block(),
        conservation_ok: ledger.conservation_check(),
        genesis_total: ledger.genesis_total(),
        fee_sink: ledger.fee_sink(),
        final_balances,
        settlements,
        sessions,
        contracts,
        wakeups: sim.wakeups().to_vec(),
        event_errors: sim.event_errors().to_vec(),
        tx_count: ledger.tx_log().len(),
        tx_log_sha256: sha256_hex(ledger.export_tx_log().as_bytes()),
    }
}

fn session_report(
    label: String,
    record: &SessionRecord,
    name_of: &dyn Fn(Address) -> String,
) -> SessionReport {
    SessionReport {
        session: label,
        kind: record.kind,
        end_user: name_of(record.end_user),
        owner: name_of(record.owner),
        quote: record.quote.clone(),
        agreement: record.contract_address,
        companion: record.companion_address,
        contract_count: record.contract_count(),
        url_token: record.url_token.clone(),
        deploy_block: record.deploy_block,
        stop_block: record.stop_block,
        availability_bp: record.availability_bp(),
        qos_samples: record.qos.samples.len(),
        step_log: record.step_log.clone(),
        quota_sessions: record.quota_sessions.clone(),
    }
}

/// Plain-text digest of a report for terminals.
pub fn render_summary(report: &SettlementReport) -> String {
    let mut out = String::new();
    let b = report.final_block;
    let _ = writeln!(out, "final block {} at t={}s", b.height, b.timestamp);
    for s in &report.sessions {
        let steps: Vec<String> = s.step_log.iter().map(u8::to_string).collect();
        let _ = writeln!(
            out,
            "session {} ({}) price {} wei, availability {} bp, steps [{}]",
            s.session,
            s.kind.name(),
            s.quote.price,
            s.availability_bp,
            steps.join(",")
        );
        if let Some(token) = &s.url_token {
            let _ = writeln!(out, "  url {}", token.as_str());
        }
        if let Some(st) = report.settlements.get(&s.session) {
            let _ = writeln!(out, "  charge {} wei, refund {} wei", st.charge, st.refund);
            for (party, amount) in &st.payouts {
                let _ = writeln!(out, "  paid {party} {amount} wei");
            }
        }
    }
    for (name, balance) in &report.final_balances {
        let _ = writeln!(out, "balance {name} {balance} wei");
    }
    let _ = writeln!(out, "fee sink {} wei", report.fee_sink);
    for e in &report.event_errors {
        let _ = writeln!(
            out,
            "event {} ({} by {} at t={}): {}",
            e.index, e.action, e.actor, e.at, e.error
        );
    }
    let _ = writeln!(
        out,
        "conservation {}",
        if report.conservation_ok { "ok" } else { "VIOLATED" }
    );
    out
}
