//! Session workflow: quote, agreement, simulated deployment, URL issuance,
//! monitoring, alarm-clock expiry, undeployment and settlement.
//!
//! Each session keeps a step log using the numbering of the dynamic-price
//! sequence:
//!
//! | step  | meaning                                              |
//! |-------|------------------------------------------------------|
//! | 1-2   | price estimated, contract deployed, quote delivered  |
//! | 3     | end user pays, funds locked                          |
//! | 4-6   | owner countersigns, deployment requested             |
//! | 7-8   | deployment executed, success reported                |
//! | 9-10  | session URL issued and shareable                     |
//! | 11    | end user signs the stop                              |
//! | 12    | undeployment                                         |
//! | 13    | funds unlocked and settled                           |
//! | 14-15 | settlement notifications                             |
//! | 16    | completion notice to the end user                    |

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::amount::Amount;
use crate::contracts::{
    availability_bp, evaluate_constraints, AgreementContract, ConstraintTerms, ContractKind, ContractKindTag,
    ContractState, FlexibleTerms, IncomeShares, ProviderOffer, QuotaTerms, QuotaUsage, Settlement, Vote,
    DEFAULT_REFUND_THRESHOLD_BP, STRICT_MAJORITY_BP,
};
use crate::error::{Error, Result};
use crate::ledger::{Address, Block, CallOutcome, LedgerState, Payout, TxKind, Wakeup};
use crate::pricing::{apply_constraint_pricing, quote_price, QosPreferences, Quote, RateCard};

pub const STEP_COUNT: u8 = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrchestratorConfig {
    pub rate_card: RateCard,
    /// The single provider the placement stub always selects.
    pub provider: ProviderOffer,
    pub refund_threshold_bp: u32,
    pub vote_threshold_bp: u32,
    pub deploy_latency_seconds: u64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            rate_card: RateCard::default(),
            provider: ProviderOffer {
                region: "EU".into(),
                gdpr_compliant: true,
            },
            refund_threshold_bp: DEFAULT_REFUND_THRESHOLD_BP,
            vote_threshold_bp: STRICT_MAJORITY_BP,
            deploy_latency_seconds: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SessionId(u32);

impl SessionId {
    pub fn index(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct UrlToken(String);

impl UrlToken {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRequest {
    pub end_user: Address,
    pub owner: Address,
    pub prefs: QosPreferences,
    /// Only for constraint-based sessions.
    pub constraints: Option<ConstraintTerms>,
    /// Only for income-division sessions.
    pub income_shares: Option<IncomeShares>,
    /// Only for consensus-decision sessions.
    pub voters: Option<BTreeSet<Address>>,
    /// Fault injection: the simulated deployment fails after countersigning.
    pub fail_deployment: bool,
}

impl SessionRequest {
    pub fn new(end_user: Address, owner: Address, prefs: QosPreferences) -> Self {
        SessionRequest {
            end_user,
            owner,
            prefs,
            constraints: None,
            income_shares: None,
            voters: None,
            fail_deployment: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QosSample {
    pub timestamp: u64,
    pub available: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QosTrace {
    pub samples: Vec<QosSample>,
}

impl QosTrace {
    /// Unweighted sample mean, floored to basis points; 10000 with no samples.
    pub fn availability_bp(&self) -> u32 {
        let up = self.samples.iter().filter(|s| s.available).count() as u64;
        availability_bp(up, self.samples.len() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotaSessionRecord {
    pub url_token: UrlToken,
    pub start_block: Block,
    pub stop_block: Option<Block>,
    pub minutes: u64,
}

/// Cumulative money released by a session's agreement contract.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SettlementRecord {
    pub charge: Amount,
    pub refund: Amount,
    /// Distribution of the charge.
    pub payouts: BTreeMap<Address, Amount>,
}

impl SettlementRecord {
    fn absorb(&mut self, settlement: &Settlement, payouts: &[Payout]) -> Result<()> {
        self.charge = self.charge.checked_add(settlement.charge)?;
        self.refund = self.refund.checked_add(settlement.refund)?;
        for p in payouts.iter().filter(|p| p.kind == TxKind::Payout) {
            let slot = self.payouts.entry(p.to).or_insert(Amount::ZERO);
            *slot = slot.checked_add(p.amount)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionRecord {
    pub id: SessionId,
    pub kind: ContractKindTag,
    pub end_user: Address,
    pub owner: Address,
    pub prefs: QosPreferences,
    pub quote: Quote,
    /// The priced agreement; absent until a consensus proposal is enacted.
    pub contract_address: Option<Address>,
    /// Share registry or voting contract deployed alongside the agreement.
    pub companion_address: Option<Address>,
    pub url_token: Option<UrlToken>,
    pub deploy_block: Option<Block>,
    pub ready_at: Option<u64>,
    pub stop_block: Option<Block>,
    pub qos: QosTrace,
    pub step_log: Vec<u8>,
    pub quota_sessions: Vec<QuotaSessionRecord>,
    pub settlement: Option<SettlementRecord>,
    #[serde(skip)]
    fail_deployment: bool,
}

impl SessionRecord {
    pub fn availability_bp(&self) -> u32 {
        self.qos.availability_bp()
    }

    /// Contracts instantiated for this session.
    pub fn contract_count(&self) -> usize {
        usize::from(self.contract_address.is_some()) + usize::from(self.companion_address.is_some())
    }

    fn log_steps(&mut self, steps: impl IntoIterator<Item = u8>) {
        self.step_log.extend(steps);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WakeupOutcome {
    pub wakeup: Wakeup,
    pub block: Block,
    pub result: Result<Option<SettlementRecord>>,
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    ledger: LedgerState,
    config: OrchestratorConfig,
    sessions: BTreeMap<SessionId, SessionRecord>,
    by_contract: BTreeMap<Address, SessionId>,
    url_counter: u64,
    wakeup_outcomes: Vec<WakeupOutcome>,
}

impl Orchestrator {
    pub fn new(ledger: LedgerState, config: OrchestratorConfig) -> Self {
        Orchestrator {
            ledger,
            config,
            sessions: BTreeMap::new(),
            by_contract: BTreeMap::new(),
            url_counter: 0,
            wakeup_outcomes: Vec::new(),
        }
    }

    pub fn ledger(&self) -> &LedgerState {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut LedgerState {
        &mut self.ledger
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn session(&self, id: SessionId) -> Result<&SessionRecord> {
        self.sessions
            .get(&id)
            .ok_or_else(|| Error::UnknownSession(id.0.to_string()))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionRecord> {
        self.sessions.values()
    }

    fn session_mut(&mut self, id: SessionId) -> Result<&mut SessionRecord> {
        self.sessions
            .get_mut(&id)
            .ok_or_else(|| Error::UnknownSession(id.0.to_string()))
    }

    fn agreement_address(&self, id: SessionId) -> Result<Address> {
        self.session(id)?
            .contract_address
            .ok_or(Error::ProposalNotEnacted)
    }

    fn next_url_token(&mut self, session: SessionId) -> UrlToken {
        self.url_counter += 1;
        let digest = Sha256::new()
            .chain_update(session.0.to_be_bytes())
            .chain_update(self.url_counter.to_be_bytes())
            .finalize();
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        UrlToken(format!("vc-{:06}-{hex}", self.url_counter))
    }

    /// Advances one block and runs every wakeup that became due.
    pub fn advance_block(&mut self) -> Block {
        let block = self.ledger.produce_block();
        for wakeup in self.ledger.take_delivered_wakeups() {
            let result = self.on_wakeup(wakeup.contract);
            self.wakeup_outcomes.push(WakeupOutcome {
                wakeup,
                block,
                result,
            });
        }
        block
    }

    /// Produces blocks until the chain time reaches `timestamp`.
    pub fn advance_to(&mut self, timestamp: u64) -> Block {
        while self.ledger.current_block().timestamp < timestamp {
            self.advance_block();
        }
        self.ledger.current_block()
    }

    pub fn take_wakeup_outcomes(&mut self) -> Vec<WakeupOutcome> {
        std::mem::take(&mut self.wakeup_outcomes)
    }

    fn agreement_template(&self, req: &SessionRequest) -> Result<ContractKind> {
        Ok(match req.prefs.monetization_kind {
            ContractKindTag::FixedPrice => ContractKind::FixedPrice,
            ContractKindTag::TimeLimitedQuota => ContractKind::TimeLimitedQuota(QuotaTerms::default()),
            ContractKindTag::FlexiblePeriod => ContractKind::FlexiblePeriod(FlexibleTerms::new(
                self.config.rate_card.standby_rate_wei_per_second,
                self.config.rate_card.standby_window_seconds,
            )?),
            ContractKindTag::ConstraintBased => {
                ContractKind::ConstraintBased(req.constraints.clone().unwrap_or_default())
            }
            ContractKindTag::DynamicPrice
            | ContractKindTag::IncomeDivision
            | ContractKindTag::ConsensusDecision => ContractKind::DynamicPrice,
        })
    }

    fn check_request_shape(&self, req: &SessionRequest) -> Result<()> {
        let kind = req.prefs.monetization_kind;
        let mismatch = |what: &str| {
            Err(Error::InvalidPreferences(format!(
                "{what} not valid for {}",
                kind.name()
            )))
        };
        match (
            kind,
            req.constraints.is_some(),
            req.income_shares.is_some(),
            req.voters.is_some(),
        ) {
            (ContractKindTag::IncomeDivision, false, false, _) => {
                return Err(Error::InvalidShares("income division needs shares".into()))
            }
            (ContractKindTag::ConsensusDecision, false, _, false) => {
                return Err(Error::InvalidInput("consensus decision needs voters".into()))
            }
            (ContractKindTag::ConsensusDecision, _, _, true)
                if req.voters.as_ref().is_some_and(|v| v.is_empty()) =>
            {
                return Err(Error::InvalidInput("consensus decision needs voters".into()))
            }
            (k, true, _, _) if k != ContractKindTag::ConstraintBased => return mismatch("constraints"),
            (k, _, true, _) if k != ContractKindTag::IncomeDivision => return mismatch("income shares"),
            (k, _, _, true) if k != ContractKindTag::ConsensusDecision => return mismatch("voters"),
            _ => {}
        }
        for addr in [req.end_user, req.owner]
            .into_iter()
            .chain(
                req.income_shares
                    .iter()
                    .flat_map(|s| s.shares().iter().map(|(a, _)| *a)),
            )
            .chain(req.voters.iter().flatten().copied())
        {
            if !self.ledger.is_user(addr) {
                return Err(Error::UnknownAddress(addr));
            }
        }
        Ok(())
    }

    /// Steps 1-2: price the request and deploy the contract(s) in `Quoted`.
    /// The owner pays every deployment and setup fee; the whole request is
    /// rejected up front if the owner cannot cover them.
    pub fn request_session(&mut self, req: SessionRequest) -> Result<(SessionId, Quote)> {
        req.prefs.validate()?;
        self.check_request_shape(&req)?;
        let height = self.ledger.current_block().height;
        let mut quote = quote_price(&req.prefs, &self.config.rate_card, height)?;
        if req.prefs.monetization_kind == ContractKindTag::ConstraintBased {
            let terms = req.constraints.clone().unwrap_or_default();
            let eval = evaluate_constraints(&terms, &self.config.provider);
            quote = apply_constraint_pricing(&quote, &eval)?;
        }

        let gas = *self.ledger.gas();
        let setup = gas.deploy_fee()?.checked_add(gas.call_fee()?)?;
        let needed = match req.prefs.monetization_kind {
            ContractKindTag::IncomeDivision => setup.checked_mul(2)?,
            _ => setup,
        };
        let available = self.ledger.balance_of(req.owner)?;
        if available < needed {
            return Err(Error::InsufficientFunds { needed, available });
        }

        let template = self.agreement_template(&req)?;
        let id = SessionId(self.sessions.len() as u32);
        let mut record = SessionRecord {
            id,
            kind: req.prefs.monetization_kind,
            end_user: req.end_user,
            owner: req.owner,
            prefs: req.prefs,
            quote: quote.clone(),
            contract_address: None,
            companion_address: None,
            url_token: None,
            deploy_block: None,
            ready_at: None,
            stop_block: None,
            qos: QosTrace::default(),
            step_log: Vec::new(),
            quota_sessions: Vec::new(),
            settlement: None,
            fail_deployment: req.fail_deployment,
        };

        let threshold = self.config.refund_threshold_bp;
        match req.prefs.monetization_kind {
            ContractKindTag::IncomeDivision => {
                let shares = req.income_shares.clone().expect("checked above");
                let registry = AgreementContract::new(
                    ContractKind::IncomeDivision { shares: None },
                    req.owner,
                    req.end_user,
                    Amount::ZERO,
                    0,
                    threshold,
                );
                let addr = self.ledger.deploy(req.owner, registry)?;
                self.ledger.call(req.owner, addr, Amount::ZERO, |c, ctx| {
                    c.set_income_shares(ctx.caller.expect("sender"), shares)
                        .map(CallOutcome::new)
                })?;
                record.companion_address = Some(addr);
            }
            ContractKindTag::ConsensusDecision => {
                let voters = req.voters.clone().expect("checked above");
                let vote_threshold = self.config.vote_threshold_bp;
                let poll = AgreementContract::new(
                    ContractKind::ConsensusDecision { voting: None },
                    req.owner,
                    req.end_user,
                    Amount::ZERO,
                    0,
                    threshold,
                );
                let addr = self.ledger.deploy(req.owner, poll)?;
                self.ledger.call(req.owner, addr, Amount::ZERO, |c, ctx| {
                    c.init_vote(ctx.caller.expect("sender"), voters, vote_threshold)
                        .map(CallOutcome::new)
                })?;
                record.companion_address = Some(addr);
            }
            _ => {}
        }
        if req.prefs.monetization_kind != ContractKindTag::ConsensusDecision {
            let addr = self.deploy_agreement(&record, template, req.prefs.max_period_seconds)?;
            record.contract_address = Some(addr);
            self.by_contract.insert(addr, id);
        }
        record.log_steps([1, 2]);
        self.sessions.insert(id, record);
        Ok((id, quote))
    }

    fn deploy_agreement(
        &mut self,
        record: &SessionRecord,
        template: ContractKind,
        lock_time: u64,
    ) -> Result<Address> {
        let price = record.quote.per_minute_price.unwrap_or(record.quote.price);
        let contract = AgreementContract::new(
            template,
            record.owner,
            record.end_user,
            Amount::ZERO,
            lock_time,
            self.config.refund_threshold_bp,
        );
        // deploy and pricing succeed or fail together
        let gas = *self.ledger.gas();
        let needed = gas.deploy_fee()?.checked_add(gas.call_fee()?)?;
        let available = self.ledger.balance_of(record.owner)?;
        if available < needed {
            return Err(Error::InsufficientFunds { needed, available });
        }
        let addr = self.ledger.deploy(record.owner, contract)?;
        self.ledger.call(record.owner, addr, Amount::ZERO, |c, ctx| {
            c.set_price(ctx.caller.expect("sender"), price)
                .map(CallOutcome::new)
        })?;
        Ok(addr)
    }

    /// Step 3: the end user pays the quoted amount into escrow. For
    /// time-based templates the alarm-clock wakeup is scheduled at the
    /// release time.
    pub fn user_approve_and_pay(&mut self, id: SessionId, payer: Address, value: Amount) -> Result<()> {
        let session = self.session(id)?;
        if payer != session.end_user {
            return Err(Error::NotEndUser);
        }
        let addr = self.agreement_address(id)?;
        let now = self.ledger.current_block();
        if now.height > session.quote.expires_at_block {
            return Err(Error::QuoteExpired {
                expires_at_block: session.quote.expires_at_block,
            });
        }
        if session.kind == ContractKindTag::TimeLimitedQuota {
            let minutes = session.quote.minutes.unwrap_or(0);
            self.ledger.call(payer, addr, value, |c, ctx| {
                match c.quota_purchase(payer, minutes, ctx.value)? {
                    true => Ok(CallOutcome::new(())),
                    false => Err(Error::PriceMismatch),
                }
            })?;
        } else {
            let release = self.ledger.call(payer, addr, value, |c, ctx| {
                match c.lock_funds(payer, ctx.value, &ctx.now)? {
                    true => Ok(CallOutcome::new(c.core.release_time.expect("locked"))),
                    false => Err(Error::PriceMismatch),
                }
            })?;
            self.ledger.schedule_wakeup(addr, release)?;
        }
        self.session_mut(id)?.log_steps([3]);
        Ok(())
    }

    /// Steps 4-10: owner countersigns, the service is deployed and a URL
    /// issued. With injected deployment failure the escrow is refunded in
    /// full and `DeploymentFailed` is returned after the refund is committed.
    pub fn countersign_and_deploy(&mut self, id: SessionId) -> Result<UrlToken> {
        let addr = self.agreement_address(id)?;
        let session = self.session(id)?;
        if session.kind == ContractKindTag::TimeLimitedQuota {
            return Err(Error::WrongKind(session.kind.name()));
        }
        let owner = session.owner;
        self.ledger.call(owner, addr, Amount::ZERO, |c, ctx| {
            c.countersign(ctx.caller.expect("sender")).map(CallOutcome::new)
        })?;
        self.session_mut(id)?.log_steps([4, 5, 6, 7]);

        if self.session(id)?.fail_deployment {
            let (settlement, payouts) = self.ledger.system_call(addr, |c, _| {
                let s = c.abort_and_refund()?;
                let payouts = c.settlement_payouts(&s, None)?;
                Ok(CallOutcome::with_payouts((s, payouts.clone()), payouts))
            })?;
            self.ledger.cancel_wakeups(addr);
            let now = self.ledger.current_block();
            let session = self.session_mut(id)?;
            session
                .settlement
                .get_or_insert_with(SettlementRecord::default)
                .absorb(&settlement, &payouts)?;
            session.stop_block = Some(now);
            session.log_steps([13, 16]);
            return Err(Error::DeploymentFailed);
        }

        let now = self.ledger.current_block();
        let latency = self.config.deploy_latency_seconds;
        let token = self.next_url_token(id);
        let session = self.session_mut(id)?;
        session.deploy_block = Some(now);
        session.ready_at = Some(now.timestamp + latency);
        session.url_token = Some(token.clone());
        session.log_steps([8, 9, 10]);
        Ok(token)
    }

    fn division_for(&self, id: SessionId) -> Result<Option<IncomeShares>> {
        let session = self.session(id)?;
        match (session.kind, session.companion_address) {
            (ContractKindTag::IncomeDivision, Some(registry)) => {
                Ok(self.ledger.contract(registry)?.income_shares().cloned())
            }
            _ => Ok(None),
        }
    }

    /// Steps 11-16: end user stops the session; undeploy and settle with the
    /// availability measured so far.
    pub fn end_session(&mut self, id: SessionId, caller: Address) -> Result<SettlementRecord> {
        let addr = self.agreement_address(id)?;
        let session = self.session(id)?;
        if caller != session.end_user {
            return Err(Error::NotEndUser);
        }
        let availability = session.availability_bp();
        let division = self.division_for(id)?;
        let (settlement, payouts) = self.ledger.call(caller, addr, Amount::ZERO, |c, ctx| {
            let s = c.stop_and_settle(caller, &ctx.now, availability)?;
            let payouts = c.settlement_payouts(&s, division.as_ref())?;
            Ok(CallOutcome::with_payouts((s, payouts.clone()), payouts))
        })?;
        self.ledger.cancel_wakeups(addr);
        self.finish(id, &settlement, &payouts, [11, 12, 13, 14, 15, 16].as_slice())
    }

    /// Alarm-clock expiry (steps 12-16). A no-op when the contract is no
    /// longer active, e.g. because the user already stopped.
    pub fn on_wakeup(&mut self, contract: Address) -> Result<Option<SettlementRecord>> {
        let Some(&id) = self.by_contract.get(&contract) else {
            return Ok(None);
        };
        if self.ledger.contract(contract)?.state() != ContractState::Active {
            return Ok(None);
        }
        let availability = self.session(id)?.availability_bp();
        let division = self.division_for(id)?;
        let (settlement, payouts) = self.ledger.system_call(contract, |c, ctx| {
            let s = c.expire_and_settle(&ctx.now, availability)?;
            let payouts = c.settlement_payouts(&s, division.as_ref())?;
            Ok(CallOutcome::with_payouts((s, payouts.clone()), payouts))
        })?;
        self.finish(id, &settlement, &payouts, [12, 13, 14, 15, 16].as_slice())
            .map(Some)
    }

    fn finish(
        &mut self,
        id: SessionId,
        settlement: &Settlement,
        payouts: &[Payout],
        steps: &[u8],
    ) -> Result<SettlementRecord> {
        let now = self.ledger.current_block();
        let session = self.session_mut(id)?;
        let record = session.settlement.get_or_insert_with(SettlementRecord::default);
        record.absorb(settlement, payouts)?;
        let record = record.clone();
        session.stop_block = Some(now);
        session.log_steps(steps.iter().copied());
        Ok(record)
    }

    pub fn record_qos_sample(&mut self, id: SessionId, available: bool) -> Result<()> {
        let session = self.session(id)?;
        let Some(addr) = session.contract_address else {
            return Err(Error::SessionNotActive);
        };
        let deployed = session.deploy_block.is_some() || session.kind == ContractKindTag::TimeLimitedQuota;
        if !deployed || self.ledger.contract(addr)?.state() != ContractState::Active {
            return Err(Error::SessionNotActive);
        }
        let timestamp = self.ledger.current_block().timestamp;
        self.session_mut(id)?
            .qos
            .samples
            .push(QosSample { timestamp, available });
        Ok(())
    }

    /// Opens one metered access of a quota session and issues its URL.
    pub fn quota_start(&mut self, id: SessionId, caller: Address) -> Result<UrlToken> {
        let addr = self.agreement_address(id)?;
        self.ledger.call(caller, addr, Amount::ZERO, |c, ctx| {
            c.quota_start(caller, &ctx.now).map(CallOutcome::new)
        })?;
        let now = self.ledger.current_block();
        let token = self.next_url_token(id);
        self.session_mut(id)?.quota_sessions.push(QuotaSessionRecord {
            url_token: token.clone(),
            start_block: now,
            stop_block: None,
            minutes: 0,
        });
        Ok(token)
    }

    pub fn quota_stop(&mut self, id: SessionId, caller: Address) -> Result<QuotaUsage> {
        let addr = self.agreement_address(id)?;
        let (usage, payouts) = self.ledger.call(caller, addr, Amount::ZERO, |c, ctx| {
            let usage = c.quota_stop(caller, &ctx.now)?;
            let payouts = c.quota_payouts(&usage, None)?;
            Ok(CallOutcome::with_payouts((usage, payouts.clone()), payouts))
        })?;
        let now = self.ledger.current_block();
        let session = self.session_mut(id)?;
        if let Some(open) = session
            .quota_sessions
            .iter_mut()
            .rev()
            .find(|s| s.stop_block.is_none())
        {
            open.stop_block = Some(now);
            open.minutes = usage.minutes;
        }
        let charge = Settlement {
            charge: usage.charge,
            refund: Amount::ZERO,
        };
        session
            .settlement
            .get_or_insert_with(SettlementRecord::default)
            .absorb(&charge, &payouts)?;
        if usage.exhausted {
            session.stop_block = Some(now);
            session.log_steps([13, 16]);
        }
        Ok(usage)
    }

    /// Casts a ballot and tallies. The first time the proposal passes, the
    /// agreement contract is deployed and priced. Returns whether the
    /// proposal is enacted.
    pub fn cast_vote(&mut self, id: SessionId, voter: Address, choice: Vote) -> Result<bool> {
        let session = self.session(id)?;
        let poll = match (session.kind, session.companion_address) {
            (ContractKindTag::ConsensusDecision, Some(addr)) => addr,
            _ => return Err(Error::WrongKind(session.kind.name())),
        };
        let enacted = self.ledger.call(voter, poll, Amount::ZERO, |c, _| {
            c.cast_vote(voter, choice)?;
            c.tally_and_enact().map(CallOutcome::new)
        })?;
        self.deploy_if_enacted(id, enacted)?;
        Ok(enacted)
    }

    fn deploy_if_enacted(&mut self, id: SessionId, enacted: bool) -> Result<()> {
        let session = self.session(id)?;
        if !enacted || session.contract_address.is_some() {
            return Ok(());
        }
        let record = session.clone();
        let addr = self.deploy_agreement(
            &record,
            ContractKind::DynamicPrice,
            record.prefs.max_period_seconds,
        )?;
        self.by_contract.insert(addr, id);
        self.session_mut(id)?.contract_address = Some(addr);
        Ok(())
    }
}
