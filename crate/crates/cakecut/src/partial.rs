//! Two partial allocators built on Core and SubCore: `n` Core rounds with
//! rotating cutters, and an allocator whose shares are single intervals.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::core_protocol::core;
use crate::error::{bug, Error, Result};
use crate::piece::{Piece, Rat};
use crate::subcore::{subcore, SubCoreInput};
use crate::tiebreak::{AugmentedValue, ImaginaryLedger, Infinitesimal};
use crate::valuation::Oracle;
use crate::verify::Allocation;

#[derive(Clone, Debug)]
pub struct PartialOutcome {
    pub allocation: Allocation,
    /// Core rounds actually run.
    pub rounds: usize,
}

/// Runs Core once with each agent of `agents` as cutter, in order. An
/// agent who no longer values the residue is skipped. The result is
/// envy-free and proportional.
pub fn proportional_ef_partial(
    agents: &[usize],
    cake: &Piece,
    oracle: &mut Oracle,
    ledger: &mut ImaginaryLedger,
) -> Result<PartialOutcome> {
    let mut allocation = Allocation::fresh(oracle.n(), cake.clone());
    let mut rounds = 0;
    for &cutter in agents {
        if allocation.residue.is_empty() {
            break;
        }
        let out = match core(cutter, agents, &allocation.residue, oracle, ledger) {
            Ok(out) => out,
            Err(Error::EmptyResidue) => continue,
            Err(e) => return Err(e),
        };
        for (a, _, p) in &out.shares {
            allocation.shares[*a] = allocation.shares[*a].union(p);
        }
        allocation.residue = out.leftover;
        rounds += 1;
    }
    Ok(PartialOutcome { allocation, rounds })
}

#[derive(Clone, Debug)]
pub struct ConnectedOutcome {
    pub allocation: Allocation,
    pub iterations: usize,
    pub upgrades: usize,
}

/// Left-to-right pieces of `piece` worth exactly `unit` to `agent`, taken
/// within each component, at most `want` of them.
fn divisions(agent: usize, piece: &Piece, unit: &Rat, want: usize, oracle: &mut Oracle) -> Result<Vec<Piece>> {
    let mut out = Vec::new();
    for iv in piece.intervals() {
        let mut rest = Piece::interval(iv.left().clone(), iv.right().clone())?;
        loop {
            if out.len() == want {
                return Ok(out);
            }
            if oracle.eval(agent, &rest)? < *unit {
                break;
            }
            let x = oracle.cut_in_piece(agent, &rest, unit)?;
            out.push(rest.left_of(&x));
            rest = rest.right_of(&x);
        }
    }
    Ok(out)
}

/// Gives every agent a single interval worth at least a `1/(3n)` share of
/// `cake` to him, envy-free.
pub fn connected_pieces(
    agents: &[usize],
    cake: &Piece,
    oracle: &mut Oracle,
    ledger: &mut ImaginaryLedger,
) -> Result<ConnectedOutcome> {
    let n = agents.len();
    let scale = Rat::from_integer((3 * n as i64).into());
    let mut unit = Vec::with_capacity(n);
    for &a in agents {
        unit.push(oracle.eval(a, cake)? / &scale);
    }
    let mut held: Vec<Option<Piece>> = alloc::vec![None; n];
    let mut residue = cake.clone();
    let mut iterations = 0;
    let mut upgrades = 0;
    while let Some(x) = (0..n).find(|&x| held[x].is_none()) {
        iterations += 1;
        if iterations > n {
            return bug("connected pieces did not settle within n iterations");
        }
        let divider = agents[x];
        if unit[x].is_zero() {
            held[x] = Some(Piece::empty());
            continue;
        }
        let divs = divisions(divider, &residue, &unit[x], n, oracle)?;
        if divs.len() < n {
            return Err(Error::CannotFormDivisions);
        }
        oracle.event(|| {
            let list: Vec<_> = divs.iter().map(|p| format!("{p}")).collect();
            format!("CONNECTED divider {} divisions {}", divider + 1, list.join(" "))
        });
        let pieces: Vec<_> = divs
            .iter()
            .map(|p| {
                let e = ledger.issue_epsilon(divider);
                (p.clone(), ledger.register(Infinitesimal::symbol(e)))
            })
            .collect();
        let others: Vec<usize> = (0..n).filter(|&y| y != x).collect();
        let (shares, take) = if others.is_empty() {
            (Vec::new(), 0)
        } else {
            let input = SubCoreInput {
                pieces: pieces.clone(),
                agents: others.iter().map(|&y| agents[y]).collect(),
                benchmarks: alloc::vec![AugmentedValue::zero(); others.len()],
            };
            let out = subcore(&input, oracle, ledger)?;
            let free = out.unallocated(n);
            let take = *free.first().ok_or_else(|| Error::ProtocolBug("no division left for the divider".into()))?;
            (out.shares, take)
        };
        residue = residue.subtract(&divs[take]);
        held[x] = Some(divs[take].clone());
        for s in shares {
            if s.piece.is_empty() {
                continue;
            }
            let y = agents.iter().position(|&a| a == s.agent).expect("subcore agent");
            let v = oracle.eval(s.agent, &s.piece)?;
            let current = match &held[y] {
                Some(p) if !p.is_empty() => oracle.eval(s.agent, p)?,
                _ => Rat::zero(),
            };
            if v > current && v > unit[y] {
                if let Some(old) = held[y].take() {
                    residue = residue.union(&old);
                }
                residue = residue.subtract(&s.piece);
                oracle.event(|| format!("CONNECTED agent {} takes {}", s.agent + 1, s.piece));
                held[y] = Some(s.piece);
                upgrades += 1;
            }
        }
    }
    let mut allocation = Allocation::fresh(oracle.n(), cake.clone());
    for (x, p) in held.into_iter().enumerate() {
        allocation.shares[agents[x]] = p.unwrap_or_else(Piece::empty);
    }
    allocation.residue = residue;
    Ok(ConnectedOutcome { allocation, iterations, upgrades })
}
