use alloc::string::String;
use core::fmt;

/// Every failure the engine can report.
///
/// The variants split into caller errors (bad input), normal early exits
/// (`BudgetExhausted`, `EmptyResidue`) and fail-stop signals that a protocol
/// invariant was violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    EndpointOutOfRange,
    InvalidInterval,
    EndpointOutsidePiece,
    TargetExceedsAvailable,
    InvalidValuation(&'static str),
    EmptyTrimSet,
    UnknownPiece,
    MalformedAssignment,
    TooManyAgents,
    EmptyResidue,
    BudgetExhausted,
    InsufficientSnapshots,
    BenchmarkInfeasible,
    NoMarginalAgent,
    CannotFormDivisions,
    /// A runtime invariant check failed.
    ProtocolBug(String),
}

impl Error {
    /// True for errors that indicate a defect rather than bad input or an
    /// exhausted budget.
    pub fn is_protocol_bug(&self) -> bool {
        matches!(
            self,
            Error::BenchmarkInfeasible
                | Error::NoMarginalAgent
                | Error::CannotFormDivisions
                | Error::ProtocolBug(_)
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EndpointOutOfRange => write!(f, "interval endpoint outside [0,1]"),
            Error::InvalidInterval => write!(f, "interval has left endpoint after right endpoint"),
            Error::EndpointOutsidePiece => write!(f, "cut point lies outside the piece"),
            Error::TargetExceedsAvailable => write!(f, "cut target exceeds available value"),
            Error::InvalidValuation(why) => write!(f, "invalid valuation: {why}"),
            Error::EmptyTrimSet => write!(f, "no pieces to tag"),
            Error::UnknownPiece => write!(f, "piece not registered in the ledger"),
            Error::MalformedAssignment => write!(f, "share is not contained in exactly one piece"),
            Error::TooManyAgents => write!(f, "too many agents for exhaustive search"),
            Error::EmptyResidue => write!(f, "residue has no value for the cutter"),
            Error::BudgetExhausted => write!(f, "query budget exhausted"),
            Error::InsufficientSnapshots => write!(f, "working set of snapshots ran out"),
            Error::BenchmarkInfeasible => write!(f, "subcore could not meet a benchmark"),
            Error::NoMarginalAgent => write!(f, "no non-winner margin on an unallocated contested piece"),
            Error::CannotFormDivisions => write!(f, "agent cannot form the required divisions"),
            Error::ProtocolBug(msg) => write!(f, "protocol invariant violated: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn bug<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::ProtocolBug(msg.into()))
}
