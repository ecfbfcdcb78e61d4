use std::collections::BTreeSet;

use serde::Serialize;

use super::{AgreementContract, ContractKind, ContractState};
use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::ledger::Address;

/// Agreed income split. Each party holds `numerator / denominator`; the
/// listed order is the tie-break order for leftover wei.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncomeShares {
    denominator: u64,
    shares: Vec<(Address, u64)>,
}

impl IncomeShares {
    pub fn new(denominator: u64, shares: Vec<(Address, u64)>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::InvalidShares("no parties".into()));
        }
        let mut seen = BTreeSet::new();
        let mut total: u64 = 0;
        for (party, numerator) in &shares {
            if *numerator == 0 {
                return Err(Error::InvalidShares(format!("{party} has a zero share")));
            }
            if !seen.insert(*party) {
                return Err(Error::InvalidShares(format!("{party} listed twice")));
            }
            total = total
                .checked_add(*numerator)
                .ok_or_else(|| Error::InvalidShares("numerators overflow".into()))?;
        }
        if total != denominator {
            return Err(Error::InvalidShares(format!(
                "numerators sum to {total}, expected {denominator}"
            )));
        }
        Ok(IncomeShares { denominator, shares })
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn shares(&self) -> &[(Address, u64)] {
        &self.shares
    }

    pub fn divide(&self, charge: Amount) -> Result<Vec<(Address, Amount)>> {
        let parts: Vec<u64> = self.shares.iter().map(|(_, n)| *n).collect();
        let amounts = divide_by_shares(charge, &parts, self.denominator)?;
        Ok(self.shares.iter().map(|(party, _)| *party).zip(amounts).collect())
    }
}

/// Largest-remainder split of `charge` by `numerators / denominator`.
///
/// Each party first gets `floor(charge * n / d)`. The leftover wei (fewer
/// than the number of parties) go one each to the largest remainders, ties
/// resolved by position. The result always sums to `charge`.
pub fn divide_by_shares(charge: Amount, numerators: &[u64], denominator: u64) -> Result<Vec<Amount>> {
    if denominator == 0 {
        return Err(Error::InvalidShares("zero denominator".into()));
    }
    let mut floors = Vec::with_capacity(numerators.len());
    let mut remainders = Vec::with_capacity(numerators.len());
    let mut assigned = Amount::ZERO;
    for &n in numerators {
        let (q, r) = charge.mul_div_rem(u128::from(n), u128::from(denominator))?;
        assigned = assigned.checked_add(q)?;
        floors.push(q);
        remainders.push(r);
    }
    let leftover = charge.checked_sub(assigned)?.wei();
    let mut order: Vec<usize> = (0..numerators.len()).collect();
    // stable sort keeps listing order among equal remainders
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    for &i in order.iter().take(leftover as usize) {
        floors[i] = floors[i].checked_add(Amount::from_wei(1))?;
    }
    Ok(floors)
}

impl AgreementContract {
    fn shares_slot(&mut self) -> Result<&mut Option<IncomeShares>> {
        let name = self.tag().name();
        match &mut self.kind {
            ContractKind::IncomeDivision { shares } => Ok(shares),
            _ => Err(Error::WrongKind(name)),
        }
    }

    /// Records the agreed split: `Deployed -> Quoted`.
    pub fn set_income_shares(&mut self, proposer: Address, shares: IncomeShares) -> Result<()> {
        self.shares_slot()?;
        self.require_state(ContractState::Deployed, "Deployed")?;
        if proposer != self.core.owner {
            return Err(Error::NotOwner);
        }
        *self.shares_slot()? = Some(shares);
        self.core.state = ContractState::Quoted;
        Ok(())
    }

    pub fn income_shares(&self) -> Option<&IncomeShares> {
        match &self.kind {
            ContractKind::IncomeDivision { shares } => shares.as_ref(),
            _ => None,
        }
    }

    pub fn settle_with_division(&self, charge: Amount) -> Result<Vec<(Address, Amount)>> {
        match &self.kind {
            ContractKind::IncomeDivision { shares: Some(shares) } => shares.divide(charge),
            ContractKind::IncomeDivision { shares: None } => Err(Error::WrongState {
                expected: "Quoted",
                actual: self.core.state,
            }),
            _ => Err(Error::WrongKind(self.tag().name())),
        }
    }
}
