#![cfg_attr(not(feature = "std"), no_std)]
//! Exact-arithmetic envy-free cake cutting.

extern crate alloc;

pub mod error;
pub mod piece;
pub mod tiebreak;
pub mod valuation;
pub mod verify;
pub mod subcore;
pub mod core_protocol;
pub mod snapshot;
pub mod main_protocol;
pub mod discrepancy;
pub mod goleft;
pub mod partial;

pub use error::{Error, Result};
pub use piece::{int, is_partition, rat, Interval, Piece, Rat};
pub use tiebreak::{AugmentedValue, EpsSymbol, ImaginaryLedger, Infinitesimal, PieceId};
pub use valuation::{random_instance, Oracle, QueryCounter, Segment, TraceSink, Valuation};
pub use core_protocol::{core, CoreOutcome};
pub use main_protocol::{run_main, MainOutcome, MainStats};
pub use snapshot::{Mode, Params};
pub use verify::Allocation;
