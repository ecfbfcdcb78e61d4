use serde::Serialize;

use super::{AgreementContract, ContractKind, ContractState, IncomeShares, Settlement};
use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::ledger::{Block, Payout};

const SECONDS_PER_MINUTE: u64 = 60;

/// Prepaid per-minute balance consumed across several sessions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct QuotaTerms {
    pub per_minute_price: Amount,
    pub minutes_purchased: u64,
    pub minutes_consumed: u64,
    pub open_session: Option<u64>,
    pub sessions: Vec<QuotaSession>,
}

impl QuotaTerms {
    pub fn remaining(&self) -> u64 {
        self.minutes_purchased - self.minutes_consumed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuotaSession {
    pub started_at: u64,
    pub stopped_at: u64,
    pub minutes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuotaUsage {
    pub minutes: u64,
    pub charge: Amount,
    pub exhausted: bool,
}

/// Minutes billed for a session: every started minute counts.
pub fn billable_minutes(elapsed_seconds: u64) -> u64 {
    elapsed_seconds.div_ceil(SECONDS_PER_MINUTE)
}

impl AgreementContract {
    fn quota(&self) -> Result<&QuotaTerms> {
        match &self.kind {
            ContractKind::TimeLimitedQuota(q) => Ok(q),
            _ => Err(Error::WrongKind(self.tag().name())),
        }
    }

    fn quota_mut(&mut self) -> Result<&mut QuotaTerms> {
        let name = self.tag().name();
        match &mut self.kind {
            ContractKind::TimeLimitedQuota(q) => Ok(q),
            _ => Err(Error::WrongKind(name)),
        }
    }

    /// Buys `minutes` of service. Accepted only for an exact payment of
    /// `per_minute_price * minutes`; the contract then goes straight to
    /// `Active` through `UserSigned`.
    pub fn quota_purchase(&mut self, from: super::Address, minutes: u64, value: Amount) -> Result<bool> {
        let per_minute = self.quota()?.per_minute_price;
        self.require_state(ContractState::Quoted, "Quoted")?;
        if minutes == 0 {
            return Err(Error::InvalidInput(
                "quota purchase needs at least one minute".into(),
            ));
        }
        if per_minute.checked_mul(u128::from(minutes))? != value {
            return Ok(false);
        }
        self.core.escrow = self.core.escrow.checked_add(value)?;
        self.core.depositor = Some(from);
        self.core.state = ContractState::UserSigned;
        self.quota_mut()?.minutes_purchased = minutes;
        self.core.state = ContractState::Active;
        Ok(true)
    }

    /// Opens a metered session; returns its zero-based index.
    pub fn quota_start(&mut self, caller: super::Address, now: &Block) -> Result<usize> {
        let quota = self.quota()?;
        if quota.minutes_purchased > 0 && quota.remaining() == 0 {
            return Err(Error::QuotaExhausted);
        }
        self.require_state(ContractState::Active, "Active")?;
        if caller != self.core.end_user {
            return Err(Error::NotEndUser);
        }
        let quota = self.quota_mut()?;
        if quota.open_session.is_some() {
            return Err(Error::SessionAlreadyOpen);
        }
        quota.open_session = Some(now.timestamp);
        Ok(quota.sessions.len())
    }

    /// Closes the open session and moves its charge out of escrow.
    pub fn quota_stop(&mut self, caller: super::Address, now: &Block) -> Result<QuotaUsage> {
        let quota = self.quota()?;
        let Some(started_at) = quota.open_session else {
            return Err(Error::NoOpenSession);
        };
        if caller != self.core.end_user {
            return Err(Error::NotEndUser);
        }
        let elapsed = now.timestamp.saturating_sub(started_at);
        let minutes = billable_minutes(elapsed).min(quota.remaining());
        let charge = quota.per_minute_price.checked_mul(u128::from(minutes))?;

        self.core.escrow = self.core.escrow.checked_sub(charge)?;
        let quota = self.quota_mut()?;
        quota.minutes_consumed += minutes;
        quota.open_session = None;
        quota.sessions.push(QuotaSession {
            started_at,
            stopped_at: now.timestamp,
            minutes,
        });
        let exhausted = quota.remaining() == 0;

        let previous = self.core.settlement.unwrap_or(Settlement {
            charge: Amount::ZERO,
            refund: Amount::ZERO,
        });
        self.core.settlement = Some(Settlement {
            charge: previous.charge.checked_add(charge)?,
            refund: previous.refund,
        });
        if exhausted {
            self.core.state = ContractState::Stopped;
            self.core.closed_via = Some(ContractState::Stopped);
            self.core.state = ContractState::Settled;
        }
        Ok(QuotaUsage {
            minutes,
            charge,
            exhausted,
        })
    }

    /// Payouts for one quota session's charge.
    pub fn quota_payouts(&self, usage: &QuotaUsage, division: Option<&IncomeShares>) -> Result<Vec<Payout>> {
        self.settlement_payouts(
            &Settlement {
                charge: usage.charge,
                refund: Amount::ZERO,
            },
            division,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::DEFAULT_REFUND_THRESHOLD_BP;
    use crate::ledger::Address;

    const OWNER: Address = Address::from_raw(1);
    const USER: Address = Address::from_raw(2);
    const PER_MINUTE: u128 = 1_000_000_000_000_000;

    fn at(timestamp: u64) -> Block {
        Block { height: 0, timestamp }
    }

    fn quota_contract() -> AgreementContract {
        let mut c = AgreementContract::new(
            ContractKind::TimeLimitedQuota(QuotaTerms::default()),
            OWNER,
            USER,
            Amount::ZERO,
            0,
            DEFAULT_REFUND_THRESHOLD_BP,
        );
        c.set_price(OWNER, Amount::from_wei(PER_MINUTE)).unwrap();
        c
    }

    #[test]
    fn purchase_requires_exact_product() {
        let mut c = quota_contract();
        let before = c.clone();
        assert!(!c
            .quota_purchase(USER, 60, Amount::from_wei(PER_MINUTE * 60 + 1))
            .unwrap());
        assert_eq!(c, before);
        assert!(c
            .quota_purchase(USER, 60, Amount::from_wei(60_000_000_000_000_000))
            .unwrap());
        assert_eq!(c.state(), ContractState::Active);
        assert_eq!(c.escrow().wei(), PER_MINUTE * 60);
    }

    #[test]
    fn zero_minutes_is_rejected() {
        let mut c = quota_contract();
        assert!(matches!(
            c.quota_purchase(USER, 0, Amount::ZERO),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ceiling_metering() {
        assert_eq!(billable_minutes(0), 0);
        assert_eq!(billable_minutes(1), 1);
        assert_eq!(billable_minutes(60), 1);
        assert_eq!(billable_minutes(125), 3);
    }

    #[test]
    fn session_of_125_seconds_consumes_three_minutes() {
        let mut c = quota_contract();
        c.quota_purchase(USER, 10, Amount::from_wei(PER_MINUTE * 10))
            .unwrap();
        c.quota_start(USER, &at(100)).unwrap();
        let usage = c.quota_stop(USER, &at(225)).unwrap();
        assert_eq!(usage.minutes, 3);
        assert_eq!(usage.charge.wei(), 3 * PER_MINUTE);
        assert_eq!(c.escrow().wei(), 7 * PER_MINUTE);
    }

    #[test]
    fn session_bookkeeping_errors() {
        let mut c = quota_contract();
        c.quota_purchase(USER, 2, Amount::from_wei(PER_MINUTE * 2))
            .unwrap();
        assert_eq!(c.quota_stop(USER, &at(0)), Err(Error::NoOpenSession));
        assert_eq!(c.quota_start(OWNER, &at(0)), Err(Error::NotEndUser));
        c.quota_start(USER, &at(0)).unwrap();
        assert_eq!(c.quota_start(USER, &at(1)), Err(Error::SessionAlreadyOpen));
        // clamped to what is left
        let usage = c.quota_stop(USER, &at(600)).unwrap();
        assert_eq!(usage.minutes, 2);
        assert!(usage.exhausted);
        assert_eq!(c.state(), ContractState::Settled);
        assert!(c.escrow().is_zero());
        assert_eq!(c.quota_start(USER, &at(700)), Err(Error::QuotaExhausted));
    }

    #[test]
    fn consumed_never_exceeds_purchased() {
        let mut c = quota_contract();
        c.quota_purchase(USER, 5, Amount::from_wei(PER_MINUTE * 5))
            .unwrap();
        let mut t = 0;
        for _ in 0..4 {
            if c.quota_start(USER, &at(t)).is_err() {
                break;
            }
            t += 150;
            c.quota_stop(USER, &at(t)).unwrap();
        }
        let q = c.quota().unwrap();
        assert_eq!(q.minutes_consumed, 5);
        assert_eq!(c.core.settlement.unwrap().charge.wei(), 5 * PER_MINUTE);
    }
}
