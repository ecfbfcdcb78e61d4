use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AgreementContract, ContractKind, ContractState};
use crate::amount::BASIS_POINTS;
use crate::error::{Error, Result};
use crate::ledger::Address;

/// More than half of the registered voters must say yes.
pub const STRICT_MAJORITY_BP: u32 = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VotingState {
    pub voters: BTreeSet<Address>,
    pub votes: BTreeMap<Address, Vote>,
    /// Enacted iff `yes * 10000 > voters * threshold_bp`.
    pub threshold_bp: u32,
    pub enacted: bool,
}

impl VotingState {
    pub fn yes_votes(&self) -> usize {
        self.votes.values().filter(|v| **v == Vote::Yes).count()
    }

    pub fn passes(&self) -> bool {
        let yes = self.yes_votes() as u128 * u128::from(BASIS_POINTS as u32);
        yes > self.voters.len() as u128 * u128::from(self.threshold_bp)
    }
}

impl AgreementContract {
    fn voting_slot(&mut self) -> Result<&mut Option<VotingState>> {
        let name = self.tag().name();
        match &mut self.kind {
            ContractKind::ConsensusDecision { voting } => Ok(voting),
            _ => Err(Error::WrongKind(name)),
        }
    }

    fn open_voting(&mut self) -> Result<&mut VotingState> {
        let state = self.core.state;
        match self.voting_slot()? {
            Some(v) if state == ContractState::Quoted => Ok(v),
            _ => Err(Error::WrongState {
                expected: "Quoted",
                actual: state,
            }),
        }
    }

    pub fn voting(&self) -> Option<&VotingState> {
        match &self.kind {
            ContractKind::ConsensusDecision { voting } => voting.as_ref(),
            _ => None,
        }
    }

    /// Registers the electorate: `Deployed -> Quoted`.
    pub fn init_vote(&mut self, owner: Address, voters: BTreeSet<Address>, threshold_bp: u32) -> Result<()> {
        self.voting_slot()?;
        self.require_state(ContractState::Deployed, "Deployed")?;
        if owner != self.core.owner {
            return Err(Error::NotOwner);
        }
        if voters.is_empty() {
            return Err(Error::InvalidInput("at least one voter is required".into()));
        }
        if threshold_bp >= BASIS_POINTS as u32 {
            return Err(Error::InvalidInput(
                "vote threshold must be below 10000 bp".into(),
            ));
        }
        *self.voting_slot()? = Some(VotingState {
            voters,
            votes: BTreeMap::new(),
            threshold_bp,
            enacted: false,
        });
        self.core.state = ContractState::Quoted;
        Ok(())
    }

    pub fn cast_vote(&mut self, voter: Address, choice: Vote) -> Result<()> {
        let voting = self.open_voting()?;
        if !voting.voters.contains(&voter) {
            return Err(Error::NotAVoter);
        }
        if voting.votes.contains_key(&voter) {
            return Err(Error::AlreadyVoted);
        }
        voting.votes.insert(voter, choice);
        Ok(())
    }

    /// Counts the ballots; once a proposal passes it stays enacted.
    pub fn tally_and_enact(&mut self) -> Result<bool> {
        let voting = self.open_voting()?;
        if voting.passes() {
            voting.enacted = true;
        }
        Ok(voting.enacted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::Amount;

    const OWNER: Address = Address::from_raw(1);

    fn addr(i: u64) -> Address {
        Address::from_raw(100 + i)
    }

    fn poll(n: u64) -> AgreementContract {
        let mut c = AgreementContract::new(
            ContractKind::ConsensusDecision { voting: None },
            OWNER,
            OWNER,
            Amount::ZERO,
            0,
            7_500,
        );
        c.init_vote(OWNER, (0..n).map(addr).collect(), STRICT_MAJORITY_BP)
            .unwrap();
        c
    }

    #[test]
    fn two_of_three_enacts() {
        let mut c = poll(3);
        c.cast_vote(addr(0), Vote::Yes).unwrap();
        assert!(!c.tally_and_enact().unwrap());
        c.cast_vote(addr(1), Vote::Yes).unwrap();
        assert!(c.tally_and_enact().unwrap());
        assert!(c.tally_and_enact().unwrap());
    }

    #[test]
    fn tie_fails() {
        let mut c = poll(2);
        c.cast_vote(addr(0), Vote::Yes).unwrap();
        c.cast_vote(addr(1), Vote::No).unwrap();
        assert!(!c.tally_and_enact().unwrap());
    }

    #[test]
    fn ballot_errors() {
        let mut c = poll(2);
        assert_eq!(c.cast_vote(addr(9), Vote::Yes), Err(Error::NotAVoter));
        c.cast_vote(addr(0), Vote::No).unwrap();
        assert_eq!(c.cast_vote(addr(0), Vote::Yes), Err(Error::AlreadyVoted));
        assert_eq!(c.voting().unwrap().votes.len(), 1);
    }

    #[test]
    fn votes_before_init_are_wrong_state() {
        let mut c = AgreementContract::new(
            ContractKind::ConsensusDecision { voting: None },
            OWNER,
            OWNER,
            Amount::ZERO,
            0,
            7_500,
        );
        assert!(matches!(
            c.cast_vote(addr(0), Vote::Yes),
            Err(Error::WrongState { .. })
        ));
        assert!(matches!(c.tally_and_enact(), Err(Error::WrongState { .. })));
        assert!(c.init_vote(OWNER, BTreeSet::new(), STRICT_MAJORITY_BP).is_err());
        assert_eq!(
            c.init_vote(addr(0), [addr(0)].into(), STRICT_MAJORITY_BP),
            Err(Error::NotOwner)
        );
    }

    #[test]
    fn configurable_supermajority() {
        let mut c = AgreementContract::new(
            ContractKind::ConsensusDecision { voting: None },
            OWNER,
            OWNER,
            Amount::ZERO,
            0,
            7_500,
        );
        c.init_vote(OWNER, (0..3).map(addr).collect(), 6_667).unwrap();
        c.cast_vote(addr(0), Vote::Yes).unwrap();
        c.cast_vote(addr(1), Vote::Yes).unwrap();
        assert!(!c.tally_and_enact().unwrap());
        c.cast_vote(addr(2), Vote::Yes).unwrap();
        assert!(c.tally_and_enact().unwrap());
    }
}
