//! Independent settlement oracle.
//!
//! Replays a script with its own bookkeeping in arbitrary-precision
//! integers and exact rationals. It shares only the script types and the
//! block-interval RNG with the engine; pricing, proration, income division,
//! fee charging and every acceptance rule are restated here from scratch so
//! that agreement between the two is evidence rather than tautology.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amount::Amount;
use crate::contracts::{ContractKindTag, Vote};
use crate::error::{Error, Result};

use super::report::SettlementSummary;
use super::script::{validate_script, Action, ScenarioScript, SharesSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleOutcome {
    pub final_height: u64,
    pub final_timestamp: u64,
    pub final_balances: BTreeMap<String, Amount>,
    pub fee_sink: Amount,
    pub settlements: BTreeMap<String, SettlementSummary>,
    /// Indices of events the oracle expects the chain to reject.
    pub rejected_events: Vec<usize>,
}

struct Clock {
    height: u64,
    timestamp: u64,
    interval: u64,
    jitter: Option<(ChaCha8Rng, u64)>,
}

impl Clock {
    fn tick(&mut self) {
        let gap = match &mut self.jitter {
            Some((rng, spread)) => rng.gen_range(self.interval - *spread..=self.interval + *spread),
            None => self.interval,
        };
        self.height += 1;
        self.timestamp += gap;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Agreement priced, waiting for payment.
    Offered,
    /// Paid but not countersigned.
    Locked,
    Running,
    Closed,
}

struct Session {
    kind: ContractKindTag,
    end_user: String,
    owner: String,
    price: BigInt,
    per_minute: BigInt,
    minutes: u64,
    min_charge: BigInt,
    lock: u64,
    expires_at: u64,
    has_agreement: bool,
    phase: Phase,
    escrow: BigInt,
    start: u64,
    up: u64,
    samples: u64,
    shares: Vec<(String, u64)>,
    denominator: u64,
    voters: BTreeSet<String>,
    ballots: BTreeMap<String, Vote>,
    consumed: u64,
    open: Option<u64>,
    fail_deployment: bool,
    settled: Option<(BigInt, BigInt, BTreeMap<String, BigInt>)>,
}

struct Oracle<'a> {
    script: &'a ScenarioScript,
    clock: Clock,
    balances: BTreeMap<String, BigInt>,
    fee_sink: BigInt,
    sessions: BTreeMap<String, Session>,
    wakeups: Vec<(u64, u64, String)>,
    wakeup_seq: u64,
    transfer_fee: BigInt,
    call_fee: BigInt,
    deploy_fee: BigInt,
}

fn big(a: Amount) -> BigInt {
    BigInt::from(a.wei())
}

fn floor_ratio(num: BigInt, den: BigInt) -> BigInt {
    BigRational::new(num, den).floor().to_integer()
}

/// Splits `charge` by `parts / denominator`: floors first, then one wei per
/// largest fractional part until nothing is left, earlier parties first on
/// equal fractions.
fn split(charge: &BigInt, parts: &[(String, u64)], denominator: u64) -> Vec<(String, BigInt)> {
    let exact: Vec<BigRational> = parts
        .iter()
        .map(|(_, n)| BigRational::new(charge * BigInt::from(*n), BigInt::from(denominator)))
        .collect();
    let mut amounts: Vec<BigInt> = exact.iter().map(|r| r.floor().to_integer()).collect();
    let mut left = charge - amounts.iter().sum::<BigInt>();
    let mut taken = vec![false; parts.len()];
    while left > BigInt::zero() {
        let mut best: Option<usize> = None;
        for i in 0..parts.len() {
            if taken[i] {
                continue;
            }
            let frac = exact[i].fract();
            if best.is_none_or(|b| frac > exact[b].fract()) {
                best = Some(i);
            }
        }
        let i = best.expect("fewer leftover wei than parties");
        taken[i] = true;
        amounts[i] += 1;
        left -= 1;
    }
    parts.iter().map(|(p, _)| p.clone()).zip(amounts).collect()
}

fn shares_valid(spec: &SharesSpec) -> bool {
    let mut seen = BTreeSet::new();
    let mut total: u128 = 0;
    for p in &spec.parties {
        if p.numerator == 0 || !seen.insert(p.party.as_str()) {
            return false;
        }
        total += u128::from(p.numerator);
    }
    !spec.parties.is_empty() && total == u128::from(spec.denominator)
}

impl<'a> Oracle<'a> {
    fn new(script: &'a ScenarioScript, seed: Option<u64>) -> Self {
        let cfg = &script.config;
        let jitter = match (seed, cfg.jitter) {
            (Some(seed), j) => Some((
                seed,
                j.map_or(crate::ledger::DEFAULT_JITTER_SPREAD, |j| j.spread_seconds),
            )),
            (None, Some(j)) => Some((j.seed, j.spread_seconds)),
            (None, None) => None,
        };
        let price = big(cfg.gas.gas_price);
        Oracle {
            script,
            clock: Clock {
                height: 0,
                timestamp: 0,
                interval: cfg.block_interval_seconds,
                jitter: jitter.map(|(seed, spread)| (ChaCha8Rng::seed_from_u64(seed), spread)),
            },
            balances: script.genesis.iter().map(|(n, v)| (n.clone(), big(*v))).collect(),
            fee_sink: BigInt::zero(),
            sessions: BTreeMap::new(),
            wakeups: Vec::new(),
            wakeup_seq: 0,
            transfer_fee: &price * cfg.gas.transfer_gas,
            call_fee: &price * cfg.gas.contract_call_gas,
            deploy_fee: &price * cfg.gas.contract_deploy_gas,
        }
    }

    fn balance(&self, who: &str) -> BigInt {
        self.balances[who].clone()
    }

    fn debit(&mut self, who: &str, value: &BigInt, fee: &BigInt) {
        *self.balances.get_mut(who).expect("declared") -= value + fee;
        self.fee_sink += fee;
    }

    fn credit(&mut self, who: &str, value: &BigInt) {
        *self.balances.get_mut(who).expect("declared") += value;
    }

    fn step_block(&mut self) {
        self.clock.tick();
        let now = self.clock.timestamp;
        let mut due: Vec<(u64, u64, String)> = Vec::new();
        self.wakeups.retain(|w| {
            if w.0 <= now {
                due.push(w.clone());
                false
            } else {
                true
            }
        });
        due.sort();
        for (_, _, label) in due {
            let running = self
                .sessions
                .get(&label)
                .is_some_and(|s| s.phase == Phase::Running);
            if running {
                let lock = self.sessions[&label].lock;
                self.settle(&label, lock);
            }
        }
    }

    /// Price of `seconds` of service before any constraint multiplier.
    fn usage_price(&self, seconds: u64, quality_hd: bool, target_bp: u32) -> BigInt {
        let rc = &self.script.config.rate_card;
        let q = if quality_hd {
            rc.hd_multiplier_bp
        } else {
            rc.sd_multiplier_bp
        };
        let a = if target_bp > rc.high_availability_threshold_bp {
            rc.high_availability_multiplier_bp
        } else {
            10_000
        };
        let num = big(rc.base_rate_wei_per_second) * seconds * q * a;
        floor_ratio(num, BigInt::from(100_000_000u64))
    }

    fn settle(&mut self, label: &str, used: u64) {
        let threshold = self.script.config.refund_threshold_bp;
        let s = &self.sessions[label];
        let availability = (s.up * 10_000).checked_div(s.samples).unwrap_or(10_000);
        let used = used.min(s.lock);
        let escrow = s.escrow.clone();
        let charge = if availability < u64::from(threshold) {
            BigInt::zero()
        } else {
            match s.kind {
                ContractKindTag::FixedPrice => escrow.clone(),
                ContractKindTag::FlexiblePeriod => {
                    &s.min_charge + floor_ratio((&escrow - &s.min_charge) * used, BigInt::from(s.lock))
                }
                _ => floor_ratio(&escrow * used, BigInt::from(s.lock)),
            }
        };
        let refund = &escrow - &charge;
        let distribution = if s.kind == ContractKindTag::IncomeDivision {
            split(&charge, &s.shares, s.denominator)
        } else {
            vec![(s.owner.clone(), charge.clone())]
        };
        let end_user = s.end_user.clone();
        let mut payouts = BTreeMap::new();
        for (party, amount) in distribution {
            if !amount.is_zero() {
                self.credit(&party, &amount);
                *payouts.entry(party).or_insert_with(BigInt::zero) += amount;
            }
        }
        self.credit(&end_user, &refund);
        let s = self.sessions.get_mut(label).expect("exists");
        s.escrow = BigInt::zero();
        s.phase = Phase::Closed;
        s.settled = Some((charge, refund, payouts));
        self.wakeups.retain(|w| w.2 != label);
    }

    /// Returns whether the chain accepts the event.
    fn apply(&mut self, actor: &str, action: &Action) -> bool {
        match action {
            Action::Transfer { to, value } => {
                let value = big(*value);
                if self.balance(actor) < &value + &self.transfer_fee {
                    return false;
                }
                let fee = self.transfer_fee.clone();
                self.debit(actor, &value, &fee);
                self.credit(to, &value);
                true
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
                let kind = prefs.monetization_kind;
                if shares.as_ref().is_some_and(|s| !shares_valid(s)) {
                    return false;
                }
                if prefs.availability_target_bp == 0
                    || prefs.availability_target_bp > 10_000
                    || prefs.max_period_seconds == 0
                {
                    return false;
                }
                let shape_ok = (constraints.is_none() || kind == ContractKindTag::ConstraintBased)
                    && (shares.is_some() == (kind == ContractKindTag::IncomeDivision))
                    && (voters.is_some() == (kind == ContractKindTag::ConsensusDecision))
                    && voters.as_ref().is_none_or(|v| !v.is_empty());
                if !shape_ok {
                    return false;
                }
                let hd = prefs.video_quality == crate::pricing::VideoQuality::Hd;
                let target = prefs.availability_target_bp;
                let period = prefs.max_period_seconds;
                let rc = &self.script.config.rate_card;
                let mut per_minute = BigInt::zero();
                let mut minutes = 0;
                let mut min_charge = BigInt::zero();
                let mut price = match kind {
                    ContractKindTag::TimeLimitedQuota => {
                        per_minute = self.usage_price(60, hd, target);
                        minutes = period.div_ceil(60);
                        &per_minute * minutes
                    }
                    ContractKindTag::FlexiblePeriod => {
                        min_charge = big(rc.standby_rate_wei_per_second) * rc.standby_window_seconds;
                        self.usage_price(period, hd, target) + &min_charge
                    }
                    _ => self.usage_price(period, hd, target),
                };
                if price.is_zero() || (kind == ContractKindTag::TimeLimitedQuota && per_minute.is_zero()) {
                    return false;
                }
                if kind == ContractKindTag::ConstraintBased {
                    let terms = constraints.clone().unwrap_or_default();
                    let provider = &self.script.config.provider;
                    if terms.gdpr_required && !provider.gdpr_compliant {
                        return false;
                    }
                    if !terms.allowed_regions.is_empty() && !terms.allowed_regions.contains(&provider.region)
                    {
                        return false;
                    }
                    price = floor_ratio(price * terms.price_multiplier_bp, BigInt::from(10_000));
                    if price.is_zero() {
                        return false;
                    }
                }
                let setup = &self.deploy_fee + &self.call_fee;
                let needed = if kind == ContractKindTag::IncomeDivision {
                    &setup * 2
                } else {
                    setup
                };
                if self.balance(owner) < needed {
                    return false;
                }
                self.debit(owner, &BigInt::zero(), &needed);
                let (shares, denominator) = match shares {
                    Some(spec) => (
                        spec.parties
                            .iter()
                            .map(|p| (p.party.clone(), p.numerator))
                            .collect(),
                        spec.denominator,
                    ),
                    None => (Vec::new(), 1),
                };
                self.sessions.insert(
                    session.clone(),
                    Session {
                        kind,
                        end_user: actor.to_string(),
                        owner: owner.clone(),
                        price,
                        per_minute,
                        minutes,
                        min_charge,
                        lock: period,
                        expires_at: self.clock.height + rc.quote_validity_blocks,
                        has_agreement: kind != ContractKindTag::ConsensusDecision,
                        phase: Phase::Offered,
                        escrow: BigInt::zero(),
                        start: 0,
                        up: 0,
                        samples: 0,
                        shares,
                        denominator,
                        voters: voters.iter().flatten().cloned().collect(),
                        ballots: BTreeMap::new(),
                        consumed: 0,
                        open: None,
                        fail_deployment: *fail_deployment,
                        settled: None,
                    },
                );
                true
            }
            Action::Pay { session, value } => {
                let Some(s) = self.sessions.get(session) else {
                    return false;
                };
                let value = value.map(big).unwrap_or_else(|| s.price.clone());
                let expected = if s.kind == ContractKindTag::TimeLimitedQuota {
                    &s.per_minute * s.minutes
                } else {
                    s.price.clone()
                };
                let ok = actor == s.end_user
                    && s.has_agreement
                    && self.clock.height <= s.expires_at
                    && s.phase == Phase::Offered
                    && value == expected
                    && self.balance(actor) >= &value + &self.call_fee;
                if !ok {
                    return false;
                }
                let fee = self.call_fee.clone();
                self.debit(actor, &value, &fee);
                let now = self.clock.timestamp;
                let s = self.sessions.get_mut(session).expect("exists");
                s.escrow = value;
                if s.kind == ContractKindTag::TimeLimitedQuota {
                    s.phase = Phase::Running;
                    return true;
                }
                s.phase = Phase::Locked;
                s.start = now;
                self.wakeup_seq += 1;
                self.wakeups
                    .push((now + s.lock, self.wakeup_seq, session.clone()));

                let owner = s.owner.clone();
                if self.balance(&owner) < self.call_fee {
                    return false;
                }
                let fee = self.call_fee.clone();
                self.debit(&owner, &BigInt::zero(), &fee);
                let s = self.sessions.get_mut(session).expect("exists");
                s.phase = Phase::Running;
                if !s.fail_deployment {
                    return true;
                }
                let refund = std::mem::take(&mut s.escrow);
                let end_user = s.end_user.clone();
                s.phase = Phase::Closed;
                s.settled = Some((BigInt::zero(), refund.clone(), BTreeMap::new()));
                self.credit(&end_user, &refund);
                self.wakeups.retain(|w| &w.2 != session);
                false
            }
            Action::Stop { session } => {
                let Some(s) = self.sessions.get(session) else {
                    return false;
                };
                let ok = s.has_agreement
                    && actor == s.end_user
                    && s.kind != ContractKindTag::TimeLimitedQuota
                    && s.phase == Phase::Running
                    && self.balance(actor) >= self.call_fee;
                if !ok {
                    return false;
                }
                let used = self.clock.timestamp - s.start;
                let fee = self.call_fee.clone();
                self.debit(actor, &BigInt::zero(), &fee);
                self.settle(session, used);
                true
            }
            Action::Qos { session, available } => {
                let Some(s) = self.sessions.get_mut(session) else {
                    return false;
                };
                if !(s.has_agreement && s.phase == Phase::Running) {
                    return false;
                }
                s.samples += 1;
                s.up += u64::from(*available);
                true
            }
            Action::QuotaStart { session } => {
                let Some(s) = self.sessions.get(session) else {
                    return false;
                };
                let ok = s.has_agreement
                    && self.balance(actor) >= self.call_fee
                    && s.kind == ContractKindTag::TimeLimitedQuota
                    && s.phase == Phase::Running
                    && actor == s.end_user
                    && s.open.is_none();
                if !ok {
                    return false;
                }
                let fee = self.call_fee.clone();
                self.debit(actor, &BigInt::zero(), &fee);
                let now = self.clock.timestamp;
                self.sessions.get_mut(session).expect("exists").open = Some(now);
                true
            }
            Action::QuotaStop { session } => {
                let Some(s) = self.sessions.get(session) else {
                    return false;
                };
                let ok = s.has_agreement
                    && self.balance(actor) >= self.call_fee
                    && s.kind == ContractKindTag::TimeLimitedQuota
                    && s.open.is_some()
                    && actor == s.end_user;
                if !ok {
                    return false;
                }
                let fee = self.call_fee.clone();
                self.debit(actor, &BigInt::zero(), &fee);
                let now = self.clock.timestamp;
                let s = self.sessions.get_mut(session).expect("exists");
                let elapsed = now - s.open.take().expect("checked");
                let minutes = elapsed.div_ceil(60).min(s.minutes - s.consumed);
                let charge = &s.per_minute * minutes;
                s.consumed += minutes;
                s.escrow -= &charge;
                if s.consumed == s.minutes {
                    s.phase = Phase::Closed;
                }
                let owner = s.owner.clone();
                let entry = s
                    .settled
                    .get_or_insert_with(|| (BigInt::zero(), BigInt::zero(), BTreeMap::new()));
                entry.0 += &charge;
                if !charge.is_zero() {
                    *entry.2.entry(owner.clone()).or_insert_with(BigInt::zero) += &charge;
                }
                self.credit(&owner, &charge);
                true
            }
            Action::Vote { session, choice } => {
                let Some(s) = self.sessions.get(session) else {
                    return false;
                };
                let ok = s.kind == ContractKindTag::ConsensusDecision
                    && self.balance(actor) >= self.call_fee
                    && s.voters.contains(actor)
                    && !s.ballots.contains_key(actor);
                if !ok {
                    return false;
                }
                let fee = self.call_fee.clone();
                self.debit(actor, &BigInt::zero(), &fee);
                let threshold = u64::from(self.script.config.vote_threshold_bp);
                let s = self.sessions.get_mut(session).expect("exists");
                s.ballots.insert(actor.to_string(), *choice);
                let yes = s.ballots.values().filter(|c| **c == Vote::Yes).count() as u64;
                let enacted = yes * 10_000 > s.voters.len() as u64 * threshold;
                if !enacted || s.has_agreement {
                    return true;
                }
                let owner = s.owner.clone();
                let needed = &self.deploy_fee + &self.call_fee;
                if self.balance(&owner) < needed {
                    return false;
                }
                self.debit(&owner, &BigInt::zero(), &needed);
                self.sessions.get_mut(session).expect("exists").has_agreement = true;
                true
            }
        }
    }
}

fn to_amount(v: &BigInt) -> Result<Amount> {
    v.to_u128().map(Amount::from_wei).ok_or(Error::AmountOverflow)
}

/// Expected final balances and settlements for `script`. A seed switches
/// block production to jittered mode exactly as the engine does.
pub fn oracle_settle(script: &ScenarioScript, seed: Option<u64>) -> Result<OracleOutcome> {
    validate_script(script)?;
    let mut oracle = Oracle::new(script, seed);
    let mut rejected = Vec::new();
    for (i, event) in script.events.iter().enumerate() {
        while oracle.clock.timestamp < event.at {
            oracle.step_block();
        }
        if !oracle.apply(&event.actor, &event.action) {
            rejected.push(i);
        }
    }
    while !oracle.wakeups.is_empty() {
        oracle.step_block();
    }

    let mut settlements = BTreeMap::new();
    for (label, s) in &oracle.sessions {
        if let Some((charge, refund, payouts)) = &s.settled {
            settlements.insert(
                label.clone(),
                SettlementSummary {
                    charge: to_amount(charge)?,
                    refund: to_amount(refund)?,
                    payouts: payouts
                        .iter()
                        .map(|(p, v)| Ok((p.clone(), to_amount(v)?)))
                        .collect::<Result<_>>()?,
                },
            );
        }
    }
    Ok(OracleOutcome {
        final_height: oracle.clock.height,
        final_timestamp: oracle.clock.timestamp,
        final_balances: oracle
            .balances
            .iter()
            .map(|(n, v)| Ok((n.clone(), to_amount(v)?)))
            .collect::<Result<_>>()?,
        fee_sink: to_amount(&oracle.fee_sink)?,
        settlements,
        rejected_events: rejected,
    })
}
