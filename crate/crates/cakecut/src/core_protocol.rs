//! The Core protocol: a cutter splits the residue into as many equally
//! valued pieces as there are agents, SubCore serves everyone else and the
//! cutter takes an untouched piece.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{bug, Error, Result};
use crate::piece::{Piece, Rat};
use crate::subcore::{subcore, SubCoreInput, SubCoreStats};
use crate::tiebreak::{AugmentedValue, ImaginaryLedger, Infinitesimal, PieceId};
use crate::valuation::{Oracle, Valuation};

/// Result of one Core run.
#[derive(Clone, Debug)]
pub struct CoreOutcome {
    pub cutter: usize,
    /// The agents that took part, in introduction order.
    pub agents: Vec<usize>,
    /// The cutter's pieces, left to right.
    pub cut_pieces: Vec<(Piece, PieceId)>,
    /// `(agent, index into cut_pieces, share)`, one per agent.
    pub shares: Vec<(usize, usize, Piece)>,
    /// What is left of the residue.
    pub leftover: Piece,
    /// The residue the cutter divided.
    pub residue: Piece,
    pub subcore: SubCoreStats,
}

impl CoreOutcome {
    pub fn share_of(&self, agent: usize) -> Option<&Piece> {
        self.shares.iter().find(|(a, _, _)| *a == agent).map(|(_, _, p)| p)
    }

    /// Index of the cut piece `agent` draws from.
    pub fn class_of(&self, agent: usize) -> Option<usize> {
        self.shares.iter().find(|(a, _, _)| *a == agent).map(|(_, k, _)| *k)
    }

    /// True iff `agent` holds a whole cut piece.
    pub fn holds_full_piece(&self, agent: usize) -> bool {
        self.shares
            .iter()
            .any(|(a, k, p)| *a == agent && *p == self.cut_pieces[*k].0)
    }

    /// Everything handed out in this run.
    pub fn allocated(&self) -> Piece {
        self.shares.iter().fold(Piece::empty(), |acc, (_, _, p)| acc.union(p))
    }
}

/// Cuts `residue` into `n` pieces the cutter values equally, slicing along
/// the residue's own geometry. Each piece carries a fresh cutter symbol.
pub fn cut_equal(
    cutter: usize,
    residue: &Piece,
    n: usize,
    oracle: &mut Oracle,
    ledger: &mut ImaginaryLedger,
) -> Result<Vec<(Piece, PieceId)>> {
    let total = oracle.eval(cutter, residue)?;
    if total.is_zero() {
        return Err(Error::EmptyResidue);
    }
    let share = &total / Rat::from_integer(n.into());
    let mut rest = residue.clone();
    let mut pieces = Vec::with_capacity(n);
    for k in 0..n {
        let piece = if k + 1 == n {
            rest.clone()
        } else {
            let x = oracle.cut_in_piece(cutter, &rest, &share)?;
            let left = rest.left_of(&x);
            rest = rest.right_of(&x);
            left
        };
        let e = ledger.issue_epsilon(cutter);
        let id = ledger.register(Infinitesimal::symbol(e));
        pieces.push((piece, id));
    }
    Ok(pieces)
}

/// Runs Core with `cutter` over `agents` (which must contain the cutter).
pub fn core(
    cutter: usize,
    agents: &[usize],
    residue: &Piece,
    oracle: &mut Oracle,
    ledger: &mut ImaginaryLedger,
) -> Result<CoreOutcome> {
    if !agents.contains(&cutter) {
        return bug("cutter is not among the agents");
    }
    let n = agents.len();
    let cut_pieces = cut_equal(cutter, residue, n, oracle, ledger)?;
    oracle.event(|| {
        let list: Vec<_> = cut_pieces.iter().map(|(p, _)| format!("{p}")).collect();
        format!("CORE cutter {} pieces {}", cutter + 1, list.join(" "))
    });
    let others: Vec<usize> = agents.iter().copied().filter(|&a| a != cutter).collect();
    let input = SubCoreInput {
        pieces: cut_pieces.clone(),
        benchmarks: alloc::vec![AugmentedValue::zero(); others.len()],
        agents: others,
    };
    let out = subcore(&input, oracle, ledger)?;
    let free = out.unallocated(n);
    let take = *free.first().ok_or_else(|| Error::ProtocolBug("no piece left for the cutter".into()))?;
    let mut shares: Vec<(usize, usize, Piece)> =
        out.shares.iter().map(|s| (s.agent, s.piece_index, s.piece.clone())).collect();
    shares.push((cutter, take, cut_pieces[take].0.clone()));
    shares.sort_by_key(|s| s.0);
    let allocated = shares.iter().fold(Piece::empty(), |acc, (_, _, p)| acc.union(p));
    let leftover = residue.subtract(&allocated);
    oracle.event(|| {
        let list: Vec<_> = shares.iter().map(|(a, _, p)| format!("{}:{}", a + 1, p)).collect();
        format!("CORE shares {}", list.join(" "))
    });
    Ok(CoreOutcome { cutter, agents: agents.to_vec(), cut_pieces, shares, leftover, residue: residue.clone(), subcore: out.stats })
}

/// The non-cutter whose share the cutter values least, with the cutter's
/// bonus over it. Measured with direct evaluation.
pub fn cutter_advantage(outcome: &CoreOutcome, vals: &[Valuation]) -> Option<(usize, Rat)> {
    let v = &vals[outcome.cutter];
    let own = v.value(outcome.share_of(outcome.cutter)?);
    outcome
        .shares
        .iter()
        .filter(|(a, _, _)| *a != outcome.cutter)
        .map(|(a, _, p)| (*a, &own - v.value(p)))
        .max_by(|x, y| x.1.cmp(&y.1).then_with(|| y.0.cmp(&x.0)))
}

/// The Core query bound `n³(n²)ⁿ`, saturating.
pub fn core_query_bound(n: usize) -> u128 {
    let n = n as u128;
    let mut b = n.saturating_pow(3);
    for _ in 0..n {
        b = b.saturating_mul(n * n);
    }
    b
}
