use thiserror::Error;

use crate::amount::Amount;
use crate::contracts::ContractState;
use crate::ledger::Address;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("amount arithmetic overflowed")]
    AmountOverflow,
    #[error("amount arithmetic underflowed")]
    AmountUnderflow,
    #[error("insufficient funds: needed {needed} wei, available {available} wei")]
    InsufficientFunds { needed: Amount, available: Amount },
    #[error("unknown address {0}")]
    UnknownAddress(Address),
    #[error("address {0} is not a user account")]
    NotAUserAccount(Address),
    #[error("accounts can only be opened at genesis")]
    GenesisClosed,
    #[error("contract in state {actual:?}, operation requires {expected}")]
    WrongState {
        expected: &'static str,
        actual: ContractState,
    },
    #[error("operation is not supported by a {0} contract")]
    WrongKind(&'static str),
    #[error("caller is not the contract owner")]
    NotOwner,
    #[error("caller is not the end user")]
    NotEndUser,
    #[error("release time {release_time} not reached (now {now})")]
    NotYetReleased { release_time: u64, now: u64 },
    #[error("value does not match the agreed price")]
    PriceMismatch,
    #[error("quota exhausted")]
    QuotaExhausted,
    #[error("a quota session is already open")]
    SessionAlreadyOpen,
    #[error("no quota session is open")]
    NoOpenSession,
    #[error("invalid income shares: {0}")]
    InvalidShares(String),
    #[error("address is not a registered voter")]
    NotAVoter,
    #[error("voter has already voted")]
    AlreadyVoted,
    #[error("proposal has not been enacted")]
    ProposalNotEnacted,
    #[error("invalid preferences: {0}")]
    InvalidPreferences(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("offer is not admissible under the requested constraints")]
    InadmissibleOffer,
    #[error("gas price {gwei} GWEI outside [{min}, {max}] GWEI")]
    GasPriceOutOfRange { gwei: u64, min: u64, max: u64 },
    #[error("quote expired at block {expires_at_block}")]
    QuoteExpired { expires_at_block: u64 },
    #[error("deployment failed")]
    DeploymentFailed,
    #[error("session is not active")]
    SessionNotActive,
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("contract escrow changed inconsistently with the transferred value")]
    EscrowMismatch,
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}
