//! Monetization contract templates as explicit escrow state machines.
//!
//! Contract operations only mutate the contract value itself. Funds the
//! contract releases are returned as [`Payout`]s which the ledger applies,
//! so a contract can be exercised in isolation in tests.
//!
//! Lifecycle: `Deployed -> Quoted -> UserSigned -> Active -> (Stopped | Expired) -> Settled`.
//! `Stopped` and `Expired` are passed through inside the settling call and
//! recorded in [`AgreementCore::closed_via`].

mod constraints;
mod division;
mod quota;
mod voting;

pub use constraints::{evaluate_constraints, ConstraintEvaluation, ConstraintTerms, ProviderOffer};
pub use division::{divide_by_shares, IncomeShares};
pub use quota::{QuotaSession, QuotaTerms, QuotaUsage};
pub use voting::{Vote, VotingState, STRICT_MAJORITY_BP};

use serde::{Deserialize, Serialize};

use crate::amount::{Amount, BASIS_POINTS};
use crate::error::{Error, Result};
use crate::ledger::{Address, Block, Payout, TxKind};

pub const DEFAULT_REFUND_THRESHOLD_BP: u32 = 7_500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractState {
    Deployed,
    Quoted,
    UserSigned,
    Active,
    Stopped,
    Expired,
    Settled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKindTag {
    FixedPrice,
    DynamicPrice,
    TimeLimitedQuota,
    FlexiblePeriod,
    IncomeDivision,
    ConsensusDecision,
    ConstraintBased,
}

impl ContractKindTag {
    pub fn name(self) -> &'static str {
        match self {
            ContractKindTag::FixedPrice => "fixed_price",
            ContractKindTag::DynamicPrice => "dynamic_price",
            ContractKindTag::TimeLimitedQuota => "time_limited_quota",
            ContractKindTag::FlexiblePeriod => "flexible_period",
            ContractKindTag::IncomeDivision => "income_division",
            ContractKindTag::ConsensusDecision => "consensus_decision",
            ContractKindTag::ConstraintBased => "constraint_based",
        }
    }
}

/// Standby terms of the flexible-period template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlexibleTerms {
    pub standby_rate: Amount,
    pub standby_window_seconds: u64,
    pub min_charge: Amount,
}

impl FlexibleTerms {
    pub fn new(standby_rate: Amount, standby_window_seconds: u64) -> Result<Self> {
        if standby_window_seconds == 0 {
            return Err(Error::InvalidInput("standby window must be positive".into()));
        }
        let min_charge = standby_rate.checked_mul(u128::from(standby_window_seconds))?;
        Ok(FlexibleTerms {
            standby_rate,
            standby_window_seconds,
            min_charge,
        })
    }
}

/// Template-specific terms. The variant is fixed at deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum ContractKind {
    FixedPrice,
    DynamicPrice,
    TimeLimitedQuota(QuotaTerms),
    FlexiblePeriod(FlexibleTerms),
    IncomeDivision { shares: Option<IncomeShares> },
    ConsensusDecision { voting: Option<VotingState> },
    ConstraintBased(ConstraintTerms),
}

impl ContractKind {
    pub fn tag(&self) -> ContractKindTag {
        match self {
            ContractKind::FixedPrice => ContractKindTag::FixedPrice,
            ContractKind::DynamicPrice => ContractKindTag::DynamicPrice,
            ContractKind::TimeLimitedQuota(_) => ContractKindTag::TimeLimitedQuota,
            ContractKind::FlexiblePeriod(_) => ContractKindTag::FlexiblePeriod,
            ContractKind::IncomeDivision { .. } => ContractKindTag::IncomeDivision,
            ContractKind::ConsensusDecision { .. } => ContractKindTag::ConsensusDecision,
            ContractKind::ConstraintBased(_) => ContractKindTag::ConstraintBased,
        }
    }

    /// Templates that escrow a maximum price for a bounded time period.
    pub fn is_time_based(&self) -> bool {
        matches!(
            self,
            ContractKind::FixedPrice
                | ContractKind::DynamicPrice
                | ContractKind::FlexiblePeriod(_)
                | ContractKind::ConstraintBased(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Settlement {
    pub charge: Amount,
    pub refund: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgreementCore {
    pub owner: Address,
    pub end_user: Address,
    /// Maximum price for time-based templates, per-minute price for quotas.
    pub price: Amount,
    pub lock_time_seconds: u64,
    pub session_start_time: Option<u64>,
    pub release_time: Option<u64>,
    pub escrow: Amount,
    pub state: ContractState,
    pub refund_threshold_bp: u32,
    pub depositor: Option<Address>,
    pub closed_via: Option<ContractState>,
    /// Running totals of everything released from escrow.
    pub settlement: Option<Settlement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgreementContract {
    pub kind: ContractKind,
    pub core: AgreementCore,
}

/// Linear proration with floor rounding: the provider is charged
/// `floor(price * used / lock_time)` and the remainder is refunded.
pub fn prorate(price: Amount, used_seconds: u64, lock_time_seconds: u64) -> Result<Settlement> {
    if lock_time_seconds == 0 {
        return Err(Error::InvalidInput("lock time must be positive".into()));
    }
    let used = used_seconds.min(lock_time_seconds);
    let charge = price.mul_div_floor(u128::from(used), u128::from(lock_time_seconds))?;
    Ok(Settlement {
        charge,
        refund: price.checked_sub(charge)?,
    })
}

/// `floor(10000 * up / total)`, or full availability with no samples.
pub fn availability_bp(up: u64, total: u64) -> u32 {
    if total == 0 {
        return BASIS_POINTS as u32;
    }
    let up = up.min(total);
    (u128::from(up) * BASIS_POINTS / u128::from(total)) as u32
}

impl AgreementContract {
    pub fn new(
        kind: ContractKind,
        owner: Address,
        end_user: Address,
        price: Amount,
        lock_time_seconds: u64,
        refund_threshold_bp: u32,
    ) -> Self {
        AgreementContract {
            kind,
            core: AgreementCore {
                owner,
                end_user,
                price,
                lock_time_seconds,
                session_start_time: None,
                release_time: None,
                escrow: Amount::ZERO,
                state: ContractState::Deployed,
                refund_threshold_bp,
                depositor: None,
                closed_via: None,
                settlement: None,
            },
        }
    }

    pub fn escrow(&self) -> Amount {
        self.core.escrow
    }

    pub fn state(&self) -> ContractState {
        self.core.state
    }

    pub fn tag(&self) -> ContractKindTag {
        self.kind.tag()
    }

    fn require_state(&self, expected: ContractState, label: &'static str) -> Result<()> {
        if self.core.state == expected {
            Ok(())
        } else {
            Err(Error::WrongState {
                expected: label,
                actual: self.core.state,
            })
        }
    }

    fn require_time_based(&self) -> Result<()> {
        if self.kind.is_time_based() {
            Ok(())
        } else {
            Err(Error::WrongKind(self.tag().name()))
        }
    }

    /// Owner publishes the price: `Deployed -> Quoted`.
    pub fn set_price(&mut self, caller: Address, price: Amount) -> Result<()> {
        if caller != self.core.owner {
            return Err(Error::NotOwner);
        }
        self.require_state(ContractState::Deployed, "Deployed")?;
        if price.is_zero() {
            return Err(Error::InvalidInput("price must be positive".into()));
        }
        match &self.kind {
            ContractKind::IncomeDivision { .. } | ContractKind::ConsensusDecision { .. } => {
                return Err(Error::WrongKind(self.tag().name()))
            }
            ContractKind::FlexiblePeriod(terms) if price < terms.min_charge => {
                return Err(Error::InvalidInput(
                    "flexible-period price must cover the minimum charge".into(),
                ))
            }
            ContractKind::TimeLimitedQuota(_) => {}
            _ if self.core.lock_time_seconds == 0 => {
                return Err(Error::InvalidInput("lock time must be positive".into()))
            }
            _ => {}
        }
        if let ContractKind::TimeLimitedQuota(terms) = &mut self.kind {
            terms.per_minute_price = price;
        }
        self.core.price = price;
        self.core.state = ContractState::Quoted;
        Ok(())
    }

    /// Escrows the full price if `value` matches it exactly. A mismatch is
    /// not an error: it returns `false` and changes nothing.
    pub fn lock_funds(&mut self, from: Address, value: Amount, now: &Block) -> Result<bool> {
        self.require_time_based()?;
        self.require_state(ContractState::Quoted, "Quoted")?;
        if value != self.core.price {
            return Ok(false);
        }
        let release = now
            .timestamp
            .checked_add(self.core.lock_time_seconds)
            .ok_or(Error::AmountOverflow)?;
        self.core.escrow = self.core.escrow.checked_add(value)?;
        self.core.depositor = Some(from);
        self.core.session_start_time = Some(now.timestamp);
        self.core.release_time = Some(release);
        self.core.state = ContractState::UserSigned;
        Ok(true)
    }

    pub fn countersign(&mut self, signer: Address) -> Result<()> {
        self.require_state(ContractState::UserSigned, "UserSigned")?;
        if signer != self.core.owner {
            return Err(Error::NotOwner);
        }
        self.core.state = ContractState::Active;
        Ok(())
    }

    /// End user stops the service before (or at) the release time.
    pub fn stop_and_settle(
        &mut self,
        caller: Address,
        now: &Block,
        availability_bp: u32,
    ) -> Result<Settlement> {
        self.require_time_based()?;
        self.require_state(ContractState::Active, "Active")?;
        if caller != self.core.end_user {
            return Err(Error::NotEndUser);
        }
        let start = self
            .core
            .session_start_time
            .expect("active contract has a start time");
        if now.timestamp < start {
            return Err(Error::InvalidInput("stop precedes session start".into()));
        }
        self.settle(now.timestamp - start, availability_bp, ContractState::Stopped)
    }

    /// Alarm-clock expiry: settles as if the full period was used.
    pub fn expire_and_settle(&mut self, now: &Block, availability_bp: u32) -> Result<Settlement> {
        self.require_time_based()?;
        self.require_state(ContractState::Active, "Active")?;
        let release_time = self
            .core
            .release_time
            .expect("active contract has a release time");
        if now.timestamp < release_time {
            return Err(Error::NotYetReleased {
                release_time,
                now: now.timestamp,
            });
        }
        self.settle(
            self.core.lock_time_seconds,
            availability_bp,
            ContractState::Expired,
        )
    }

    /// Returns the whole escrow to the depositor, e.g. when deployment of the
    /// service failed after both parties signed.
    pub fn abort_and_refund(&mut self) -> Result<Settlement> {
        self.require_time_based()?;
        self.require_state(ContractState::Active, "Active")?;
        let settlement = Settlement {
            charge: Amount::ZERO,
            refund: self.core.escrow,
        };
        self.close(settlement, ContractState::Stopped);
        Ok(settlement)
    }

    fn settle(&mut self, used: u64, availability_bp: u32, via: ContractState) -> Result<Settlement> {
        let escrow = self.core.escrow;
        let settlement = if availability_bp < self.core.refund_threshold_bp {
            Settlement {
                charge: Amount::ZERO,
                refund: escrow,
            }
        } else {
            match &self.kind {
                ContractKind::FixedPrice => Settlement {
                    charge: escrow,
                    refund: Amount::ZERO,
                },
                ContractKind::FlexiblePeriod(terms) => {
                    let usage_cap = escrow.checked_sub(terms.min_charge)?;
                    let usage = prorate(usage_cap, used, self.core.lock_time_seconds)?;
                    Settlement {
                        charge: terms.min_charge.checked_add(usage.charge)?,
                        refund: usage.refund,
                    }
                }
                _ => prorate(escrow, used, self.core.lock_time_seconds)?,
            }
        };
        self.close(settlement, via);
        Ok(settlement)
    }

    fn close(&mut self, settlement: Settlement, via: ContractState) {
        self.core.state = via;
        self.core.escrow = Amount::ZERO;
        self.core.closed_via = Some(via);
        self.core.settlement = Some(settlement);
        self.core.state = ContractState::Settled;
    }

    /// Turns a settlement into ledger payouts: the charge goes to the owner
    /// or is split by `division`; the refund goes to whoever funded the escrow.
    pub fn settlement_payouts(
        &self,
        settlement: &Settlement,
        division: Option<&IncomeShares>,
    ) -> Result<Vec<Payout>> {
        let mut payouts = Vec::new();
        match division {
            Some(shares) => {
                for (party, amount) in shares.divide(settlement.charge)? {
                    if !amount.is_zero() {
                        payouts.push(Payout {
                            to: party,
                            amount,
                            kind: TxKind::Payout,
                        });
                    }
                }
            }
            None if !settlement.charge.is_zero() => payouts.push(Payout {
                to: self.core.owner,
                amount: settlement.charge,
                kind: TxKind::Payout,
            }),
            None => {}
        }
        if !settlement.refund.is_zero() {
            payouts.push(Payout {
                to: self.core.depositor.unwrap_or(self.core.end_user),
                amount: settlement.refund,
                kind: TxKind::Refund,
            });
        }
        Ok(payouts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ETH: u128 = crate::amount::WEI_PER_ETH;
    const OWNER: Address = Address::from_raw(1);
    const USER: Address = Address::from_raw(2);
    const STRANGER: Address = Address::from_raw(3);

    fn block(timestamp: u64) -> Block {
        Block {
            height: timestamp / 15,
            timestamp,
        }
    }

    fn quoted(kind: ContractKind, price: u128, lock: u64) -> AgreementContract {
        let mut c =
            AgreementContract::new(kind, OWNER, USER, Amount::ZERO, lock, DEFAULT_REFUND_THRESHOLD_BP);
        c.set_price(OWNER, Amount::from_wei(price)).unwrap();
        c
    }

    fn active_at(kind: ContractKind, price: u128, lock: u64, start: u64) -> AgreementContract {
        let mut c = quoted(kind, price, lock);
        assert!(c
            .lock_funds(USER, Amount::from_wei(price), &block(start))
            .unwrap());
        c.countersign(OWNER).unwrap();
        c
    }

    #[test]
    fn lock_rejects_price_mismatch_without_change() {
        let mut c = quoted(ContractKind::DynamicPrice, ETH, 3600);
        let before = c.clone();
        assert!(!c.lock_funds(USER, Amount::from_wei(ETH - 1), &block(30)).unwrap());
        assert_eq!(c, before);
    }

    #[test]
    fn lock_sets_release_time_from_block_time() {
        let mut c = quoted(ContractKind::DynamicPrice, ETH, 3600);
        assert!(c.lock_funds(USER, Amount::from_wei(ETH), &block(30)).unwrap());
        assert_eq!(c.core.release_time, Some(3630));
        assert_eq!(c.core.session_start_time, Some(30));
        assert_eq!(c.escrow(), Amount::from_wei(ETH));
        assert_eq!(c.state(), ContractState::UserSigned);
    }

    #[test]
    fn second_lock_is_wrong_state() {
        let mut c = quoted(ContractKind::DynamicPrice, ETH, 3600);
        c.lock_funds(USER, Amount::from_wei(ETH), &block(30)).unwrap();
        let err = c.lock_funds(USER, Amount::from_wei(ETH), &block(45)).unwrap_err();
        assert!(matches!(
            err,
            Error::WrongState {
                actual: ContractState::UserSigned,
                ..
            }
        ));
    }

    #[test]
    fn countersign_rules() {
        let mut c = quoted(ContractKind::DynamicPrice, ETH, 3600);
        assert!(matches!(c.countersign(OWNER), Err(Error::WrongState { .. })));
        c.lock_funds(USER, Amount::from_wei(ETH), &block(0)).unwrap();
        assert_eq!(c.countersign(STRANGER), Err(Error::NotOwner));
        c.countersign(OWNER).unwrap();
        assert_eq!(c.state(), ContractState::Active);
    }

    #[test]
    fn stop_at_full_period_charges_everything() {
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 0);
        let s = c.stop_and_settle(USER, &block(3600), 9980).unwrap();
        assert_eq!(
            s,
            Settlement {
                charge: Amount::from_wei(ETH),
                refund: Amount::ZERO
            }
        );
        assert_eq!(c.state(), ContractState::Settled);
        assert_eq!(c.core.closed_via, Some(ContractState::Stopped));
        assert!(c.escrow().is_zero());
    }

    #[test]
    fn stop_at_half_period_refunds_half() {
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 0);
        let s = c.stop_and_settle(USER, &block(1800), 9980).unwrap();
        assert_eq!(s.charge.wei(), 500_000_000_000_000_000);
        assert_eq!(s.refund.wei(), 500_000_000_000_000_000);
    }

    #[test]
    fn low_availability_forces_full_refund() {
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 0);
        let s = c.stop_and_settle(USER, &block(1800), 7000).unwrap();
        assert_eq!(
            s,
            Settlement {
                charge: Amount::ZERO,
                refund: Amount::from_wei(ETH)
            }
        );
    }

    #[test]
    fn proration_floors_toward_the_user() {
        // floor(10^18 * 1000 / 3600) = 277777777777777777 (exact: ...777.7)
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 0);
        let s = c.stop_and_settle(USER, &block(1000), 10_000).unwrap();
        assert_eq!(s.charge.wei(), 277_777_777_777_777_777);
        assert_eq!(s.refund.wei(), 722_222_222_222_222_223);
    }

    #[test]
    fn stop_caller_and_state_checks() {
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 0);
        assert_eq!(
            c.stop_and_settle(OWNER, &block(60), 10_000),
            Err(Error::NotEndUser)
        );
        c.stop_and_settle(USER, &block(60), 10_000).unwrap();
        assert!(matches!(
            c.stop_and_settle(USER, &block(75), 10_000),
            Err(Error::WrongState {
                actual: ContractState::Settled,
                ..
            })
        ));
    }

    #[test]
    fn expiry_requires_release_time() {
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 30);
        assert_eq!(
            c.expire_and_settle(&block(3615), 10_000),
            Err(Error::NotYetReleased {
                release_time: 3630,
                now: 3615
            })
        );
        let s = c.expire_and_settle(&block(3630), 10_000).unwrap();
        assert_eq!(s.charge.wei(), ETH);
        assert_eq!(c.core.closed_via, Some(ContractState::Expired));
    }

    #[test]
    fn expiry_with_poor_availability_refunds() {
        let mut c = active_at(ContractKind::DynamicPrice, ETH, 3600, 30);
        let s = c.expire_and_settle(&block(3630), 7400).unwrap();
        assert_eq!(s.refund.wei(), ETH);
    }

    #[test]
    fn fixed_price_never_prorates() {
        let mut c = active_at(ContractKind::FixedPrice, ETH, 3600, 0);
        let s = c.stop_and_settle(USER, &block(60), 10_000).unwrap();
        assert_eq!(
            s,
            Settlement {
                charge: Amount::from_wei(ETH),
                refund: Amount::ZERO
            }
        );
    }

    #[test]
    fn flexible_min_charge_is_kept_on_early_stop() {
        let terms = FlexibleTerms::new(Amount::from_wei(10), 100).unwrap();
        assert_eq!(terms.min_charge.wei(), 1000);
        let mut c = active_at(ContractKind::FlexiblePeriod(terms), 4600, 3600, 0);
        let s = c.stop_and_settle(USER, &block(1800), 10_000).unwrap();
        assert_eq!(s.charge.wei(), 1000 + 1800);
        assert_eq!(s.refund.wei(), 1800);
    }

    #[test]
    fn flexible_price_must_cover_min_charge() {
        let terms = FlexibleTerms::new(Amount::from_wei(10), 100).unwrap();
        let mut c = AgreementContract::new(
            ContractKind::FlexiblePeriod(terms),
            OWNER,
            USER,
            Amount::ZERO,
            3600,
            7500,
        );
        assert!(c.set_price(OWNER, Amount::from_wei(999)).is_err());
        assert!(FlexibleTerms::new(Amount::from_wei(10), 0).is_err());
        assert_eq!(
            FlexibleTerms::new(Amount::ZERO, 86_400).unwrap().min_charge,
            Amount::ZERO
        );
    }

    #[test]
    fn undeclared_transitions_are_rejected_unchanged() {
        let mut c = AgreementContract::new(ContractKind::DynamicPrice, OWNER, USER, Amount::ZERO, 3600, 7500);
        let before = c.clone();
        assert!(c.lock_funds(USER, Amount::ZERO, &block(0)).is_err());
        assert!(c.countersign(OWNER).is_err());
        assert!(c.stop_and_settle(USER, &block(0), 10_000).is_err());
        assert!(c.expire_and_settle(&block(9999), 10_000).is_err());
        assert!(c.abort_and_refund().is_err());
        assert_eq!(c, before);
        assert_eq!(c.set_price(STRANGER, Amount::from_wei(1)), Err(Error::NotOwner));
    }

    #[test]
    fn payouts_follow_settlement() {
        let c = active_at(ContractKind::DynamicPrice, 100, 3600, 0);
        let s = Settlement {
            charge: Amount::from_wei(60),
            refund: Amount::from_wei(40),
        };
        let p = c.settlement_payouts(&s, None).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!((p[0].to, p[0].amount.wei()), (OWNER, 60));
        assert_eq!(
            (p[1].to, p[1].amount.wei(), p[1].kind),
            (USER, 40, TxKind::Refund)
        );

        let shares = IncomeShares::new(3, vec![(OWNER, 1), (STRANGER, 2)]).unwrap();
        let p = c.settlement_payouts(&s, Some(&shares)).unwrap();
        assert_eq!(p.iter().map(|x| x.amount.wei()).sum::<u128>(), 100);
    }

    #[test]
    fn availability_aggregation() {
        assert_eq!(availability_bp(4, 4), 10_000);
        assert_eq!(availability_bp(3, 4), 7_500);
        assert_eq!(availability_bp(2, 3), 6_666);
        assert_eq!(availability_bp(0, 0), 10_000);
    }
}
