//! Drives an [`Orchestrator`] from script events.

use std::collections::{BTreeMap, BTreeSet};

use crate::amount::Amount;
use crate::contracts::{ContractKindTag, IncomeShares};
use crate::error::{Error, Result};
use crate::ledger::{Address, BlockClock, BlockMode, LedgerState};
use crate::orchestrator::{Orchestrator, SessionId, SessionRequest};

use super::report::{build_report, EventError, SettlementReport, WakeupReport};
use super::script::{validate_config, validate_script, Action, ScenarioConfig, ScenarioScript, ScriptEvent};

/// An in-progress scripted run. Events are applied one at a time; each
/// executes in the first block whose timestamp reaches its `at`.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    orchestrator: Orchestrator,
    actors: BTreeMap<String, Address>,
    genesis: BTreeMap<Address, Amount>,
    declared_sessions: BTreeSet<String>,
    sessions: BTreeMap<String, SessionId>,
    last_at: u64,
    applied: usize,
    event_errors: Vec<EventError>,
    wakeups: Vec<WakeupReport>,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig, genesis: &BTreeMap<String, Amount>) -> Result<Self> {
        validate_config(config)?;
        let mode = match config.jitter {
            Some(j) => BlockMode::Jittered {
                seed: j.seed,
                spread: j.spread_seconds,
            },
            None => BlockMode::Deterministic,
        };
        let clock = BlockClock::new(config.block_interval_seconds, mode)?;
        let mut ledger = LedgerState::new(config.gas, clock);
        let mut actors = BTreeMap::new();
        let mut grants = BTreeMap::new();
        for (name, balance) in genesis {
            let addr = ledger.open_account(*balance)?;
            actors.insert(name.clone(), addr);
            grants.insert(addr, *balance);
        }
        Ok(Simulation {
            config: config.clone(),
            orchestrator: Orchestrator::new(ledger, config.orchestrator_config()),
            actors,
            genesis: grants,
            declared_sessions: BTreeSet::new(),
            sessions: BTreeMap::new(),
            last_at: 0,
            applied: 0,
            event_errors: Vec::new(),
            wakeups: Vec::new(),
        })
    }

    /// Sets up a run of `script`. A seed switches block production to
    /// jittered mode with that seed.
    pub fn from_script(script: &ScenarioScript, seed: Option<u64>) -> Result<Self> {
        let config = match seed {
            Some(seed) => script.config.clone().with_seed(seed),
            None => script.config.clone(),
        };
        Simulation::new(&config, &script.genesis)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orchestrator
    }

    #[doc(hidden)]
    pub fn orchestrator_mut(&mut self) -> &mut Orchestrator {
        &mut self.orchestrator
    }

    pub fn actors(&self) -> &BTreeMap<String, Address> {
        &self.actors
    }

    pub fn genesis(&self) -> &BTreeMap<Address, Amount> {
        &self.genesis
    }

    pub fn session_id(&self, label: &str) -> Option<SessionId> {
        self.sessions.get(label).copied()
    }

    pub fn session_labels(&self) -> BTreeMap<SessionId, String> {
        self.sessions.iter().map(|(l, id)| (*id, l.clone())).collect()
    }

    pub fn event_errors(&self) -> &[EventError] {
        &self.event_errors
    }

    pub fn wakeups(&self) -> &[WakeupReport] {
        &self.wakeups
    }

    fn actor(&self, name: &str) -> Result<Address> {
        self.actors
            .get(name)
            .copied()
            .ok_or_else(|| Error::Validation(format!("undeclared actor {name:?}")))
    }

    fn session(&self, label: &str) -> Result<SessionId> {
        self.sessions
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownSession(label.to_string()))
    }

    fn check_structure(&self, event: &ScriptEvent) -> Result<()> {
        if event.at < self.last_at {
            return Err(Error::Validation(format!(
                "time {} precedes the previous event at {}",
                event.at, self.last_at
            )));
        }
        self.actor(&event.actor)?;
        for name in event.action.named_parties() {
            self.actor(name)?;
        }
        match &event.action {
            Action::RequestSession { session, .. } if self.declared_sessions.contains(session) => {
                Err(Error::Validation(format!("session {session:?} requested twice")))
            }
            Action::RequestSession { .. } => Ok(()),
            other => match other.session() {
                Some(s) if !self.declared_sessions.contains(s) => Err(Error::Validation(format!(
                    "session {s:?} used before it is requested"
                ))),
                _ => Ok(()),
            },
        }
    }

    fn advance_block(&mut self) {
        self.orchestrator.advance_block();
        for outcome in self.orchestrator.take_wakeup_outcomes() {
            self.wakeups.push(WakeupReport::new(&outcome));
        }
    }

    /// Applies one event. Structural problems (time going backwards, unknown
    /// actors or labels) return `Error::Validation` and change nothing.
    /// Any other error means the event was rejected by the simulated chain;
    /// it is recorded and the simulation stays usable.
    pub fn apply(&mut self, event: &ScriptEvent) -> Result<()> {
        self.check_structure(event)?;
        self.last_at = event.at;
        if let Action::RequestSession { session, .. } = &event.action {
            self.declared_sessions.insert(session.clone());
        }
        while self.orchestrator.ledger().current_block().timestamp < event.at {
            self.advance_block();
        }
        let index = self.applied;
        self.applied += 1;
        let result = self.execute(event);
        if let Err(e) = &result {
            self.event_errors.push(EventError {
                index,
                at: event.at,
                block_height: self.orchestrator.ledger().current_block().height,
                actor: event.actor.clone(),
                action: event.action.name().to_string(),
                error: e.to_string(),
            });
        }
        result
    }

    fn execute(&mut self, event: &ScriptEvent) -> Result<()> {
        let actor = self.actor(&event.actor)?;
        match &event.action {
            Action::Transfer { to, value } => {
                let to = self.actor(to)?;
                self.orchestrator.ledger_mut().transfer(actor, to, *value)?;
            }
            Action::RequestSession {
                session,
                owner,
                prefs,
                constraints,
                shares,
                voters,
                fail_deployment,
            } => {
                let mut req = SessionRequest::new(actor, self.actor(owner)?, *prefs);
                req.constraints = constraints.clone();
                req.fail_deployment = *fail_deployment;
                if let Some(spec) = shares {
                    let parties = spec
                        .parties
                        .iter()
                        .map(|p| Ok((self.actor(&p.party)?, p.numerator)))
                        .collect::<Result<Vec<_>>>()?;
                    req.income_shares = Some(IncomeShares::new(spec.denominator, parties)?);
                }
                if let Some(names) = voters {
                    req.voters = Some(names.iter().map(|n| self.actor(n)).collect::<Result<_>>()?);
                }
                let (id, _) = self.orchestrator.request_session(req)?;
                self.sessions.insert(session.clone(), id);
            }
            Action::Pay { session, value } => {
                let id = self.session(session)?;
                let quoted = self.orchestrator.session(id)?.quote.price;
                self.orchestrator
                    .user_approve_and_pay(id, actor, value.unwrap_or(quoted))?;
                if self.orchestrator.session(id)?.kind != ContractKindTag::TimeLimitedQuota {
                    self.orchestrator.countersign_and_deploy(id)?;
                }
            }
            Action::Stop { session } => {
                let id = self.session(session)?;
                self.orchestrator.end_session(id, actor)?;
            }
            Action::Qos { session, available } => {
                let id = self.session(session)?;
                self.orchestrator.record_qos_sample(id, *available)?;
            }
            Action::QuotaStart { session } => {
                let id = self.session(session)?;
                self.orchestrator.quota_start(id, actor)?;
            }
            Action::QuotaStop { session } => {
                let id = self.session(session)?;
                self.orchestrator.quota_stop(id, actor)?;
            }
            Action::Vote { session, choice } => {
                let id = self.session(session)?;
                self.orchestrator.cast_vote(id, actor, *choice)?;
            }
        }
        Ok(())
    }

    /// Produces blocks until no alarm-clock wakeup is pending.
    pub fn drain_wakeups(&mut self) {
        while self.orchestrator.ledger().pending_wakeups().next().is_some() {
            self.advance_block();
        }
    }

    /// Report of the current state, without advancing time.
    pub fn report(&self) -> SettlementReport {
        build_report(self)
    }

    /// Lets every pending expiry fire, then reports.
    pub fn finish(mut self) -> SettlementReport {
        self.drain_wakeups();
        self.report()
    }
}

/// Runs every event of a validated script and returns the final report.
pub fn run_script(script: &ScenarioScript, seed: Option<u64>) -> Result<SettlementReport> {
    validate_script(script)?;
    let mut sim = Simulation::from_script(script, seed)?;
    for event in &script.events {
        match sim.apply(event) {
            Err(Error::Validation(msg)) => return Err(Error::Validation(msg)),
            _ => continue,
        }
    }
    Ok(sim.finish())
}
