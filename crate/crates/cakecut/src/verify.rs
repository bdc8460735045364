//! Independent certification of allocations.
//!
//! Everything here reads valuations directly and never touches the query
//! counter, so verdicts cannot be influenced by the protocol under test.

use alloc::vec::Vec;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::piece::{is_partition, Piece, Rat};
use crate::valuation::Valuation;

/// Shares indexed by agent, the unallocated residue and the cake being
/// divided.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub shares: Vec<Piece>,
    pub residue: Piece,
    pub origin: Piece,
}

impl Allocation {
    /// Nothing allocated yet.
    pub fn fresh(n: usize, origin: Piece) -> Self {
        Allocation { shares: alloc::vec![Piece::empty(); n], residue: origin.clone(), origin }
    }

    pub fn n(&self) -> usize {
        self.shares.len()
    }

    pub fn all_agents(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.residue.is_empty()
    }
}

/// First pair `(i, j)` among `agents` with `V_i(X_i) < V_i(X_j)`.
pub fn envy_witness(shares: &[Piece], agents: &[usize], vals: &[Valuation]) -> Option<(usize, usize)> {
    for &i in agents {
        let own = vals[i].value(&shares[i]);
        for &j in agents {
            if i != j && own < vals[i].value(&shares[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

pub fn is_envy_free(a: &Allocation, vals: &[Valuation]) -> bool {
    envy_witness(&a.shares, &a.all_agents(), vals).is_none()
}

/// `V_i(X_i) ≥ V_i(origin)/n` for every agent.
pub fn is_proportional(a: &Allocation, vals: &[Valuation]) -> bool {
    let n = Rat::from_integer(a.n().into());
    (0..a.n()).all(|i| vals[i].value(&a.shares[i]) * &n >= vals[i].value(&a.origin))
}

/// `V_i(X_i) ≥ V_i(X_j) + V_i(R)`.
pub fn dominates(shares: &[Piece], residue: &Piece, i: usize, j: usize, vals: &[Valuation]) -> bool {
    let v = &vals[i];
    v.value(&shares[i]) >= v.value(&shares[j]) + v.value(residue)
}

/// Shares and residue are pairwise disjoint and together make up the origin.
pub fn conservation(a: &Allocation) -> bool {
    let mut parts = a.shares.clone();
    parts.push(a.residue.clone());
    is_partition(&parts, &a.origin)
}

pub fn is_connected(p: &Piece) -> bool {
    p.is_connected()
}

/// Largest agent count accepted by [`find_dominated_set`].
pub const DOMINATION_SEARCH_LIMIT: usize = 8;

/// Searches for a non-empty `A ⊊ agents` such that every agent outside `A`
/// dominates every agent inside it.
///
/// Among valid sets the inclusion-minimal ones are kept, then those of
/// smallest size, then the lexicographically greatest sorted member list.
pub fn find_dominated_set(
    shares: &[Piece],
    residue: &Piece,
    agents: &[usize],
    vals: &[Valuation],
) -> Result<Option<Vec<usize>>> {
    let m = agents.len();
    if m > DOMINATION_SEARCH_LIMIT {
        return Err(Error::TooManyAgents);
    }
    if m < 2 {
        return Ok(None);
    }
    let mut dom = alloc::vec![alloc::vec![false; m]; m];
    for (x, &i) in agents.iter().enumerate() {
        for (y, &j) in agents.iter().enumerate() {
            dom[x][y] = x == y || dominates(shares, residue, i, j, vals);
        }
    }
    Ok(select_dominated_set(&dom, agents))
}

/// The selection rule of [`find_dominated_set`] applied to a precomputed
/// matrix, `dom[x][y]` meaning `agents[x]` dominates `agents[y]`.
pub fn select_dominated_set(dom: &[Vec<bool>], agents: &[usize]) -> Option<Vec<usize>> {
    let m = agents.len();
    if m < 2 || m > DOMINATION_SEARCH_LIMIT {
        return None;
    }
    let full = (1u32 << m) - 1;
    let valid: Vec<u32> = (1..full)
        .filter(|&mask| {
            (0..m).all(|x| mask & (1 << x) != 0 || (0..m).all(|y| mask & (1 << y) == 0 || x == y || dom[x][y]))
        })
        .collect();
    let minimal: Vec<u32> = valid
        .iter()
        .copied()
        .filter(|&a| !valid.iter().any(|&b| b != a && b & a == b))
        .collect();
    let members = |mask: u32| -> Vec<usize> { (0..m).filter(|x| mask & (1 << x) != 0).map(|x| agents[x]).collect() };
    minimal
        .into_iter()
        .map(members)
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| b.cmp(a)))
}

/// Checks the four neatness clauses for `shares` given as
/// `(agent, host piece index, sub-piece)`:
///
/// * every share lies inside its host and no piece hosts two shares;
/// * at least one piece is untouched;
/// * nobody prefers an untouched piece to his share;
/// * nobody envies another share.
///
/// A share may be empty and still occupy its host. Preferences are
/// physical. With tags shared by all agents the augmented form of the last
/// clause cannot hold for identical agents, so the augmented guarantees are
/// checked separately as benchmark attainment.
pub fn is_neat(pieces: &[Piece], shares: &[(usize, usize, Piece)], vals: &[Valuation]) -> Result<bool> {
    let mut taken: Vec<bool> = alloc::vec![false; pieces.len()];
    for (_, host, share) in shares {
        match pieces.get(*host) {
            Some(p) if p.contains(share) => {}
            _ => return Err(Error::MalformedAssignment),
        }
        if taken[*host] {
            return Ok(false);
        }
        taken[*host] = true;
    }
    let free: Vec<&Piece> = pieces.iter().zip(&taken).filter(|(_, t)| !**t).map(|(p, _)| p).collect();
    if free.is_empty() {
        return Ok(false);
    }
    for (agent, _, share) in shares {
        let v = &vals[*agent];
        let own = v.value(share);
        if free.iter().any(|p| v.value(p) > own) {
            return Ok(false);
        }
        if shares.iter().any(|(other, _, theirs)| other != agent && v.value(theirs) > own) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest envy `V_i(X_j) − V_i(X_i)` over all pairs, zero when envy-free.
pub fn max_envy(shares: &[Piece], vals: &[Valuation]) -> Rat {
    let mut worst = Rat::zero();
    for i in 0..shares.len() {
        let own = vals[i].value(&shares[i]);
        for (j, s) in shares.iter().enumerate() {
            if i != j {
                let gap = vals[i].value(s) - &own;
                if gap > worst {
                    worst = gap;
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piece::{int, rat};

    fn iv(a: Rat, b: Rat) -> Piece {
        Piece::interval(a, b).unwrap()
    }

    fn left_lover() -> Valuation {
        Valuation::from_breaks(&[rat(1, 2)], &[int(1), int(0)]).unwrap()
    }

    #[test]
    fn divide_and_choose_outcome_is_envy_free() {
        let vals = [Valuation::uniform(), left_lover()];
        let mut a = Allocation::fresh(2, Piece::whole());
        a.shares = alloc::vec![iv(rat(1, 2), int(1)), iv(int(0), rat(1, 2))];
        a.residue = Piece::empty();
        assert!(is_envy_free(&a, &vals));
        assert!(is_proportional(&a, &vals));
        assert!(conservation(&a));
        a.shares.swap(0, 1);
        assert_eq!(envy_witness(&a.shares, &[0, 1], &vals), Some((1, 0)));
    }

    #[test]
    fn empty_shares_are_envy_free_not_proportional() {
        let vals = [Valuation::uniform(), Valuation::uniform()];
        let a = Allocation::fresh(2, Piece::whole());
        assert!(is_envy_free(&a, &vals));
        assert!(!is_proportional(&a, &vals));
        assert!(conservation(&a));
    }

    #[test]
    fn domination_examples() {
        let vals = [Valuation::uniform(), Valuation::uniform()];
        let shares = [iv(int(0), rat(1, 2)), iv(rat(1, 2), rat(3, 4))];
        assert!(dominates(&shares, &iv(rat(3, 4), rat(7, 8)), 0, 1, &vals));
        let shares = [iv(int(0), rat(1, 4)), iv(rat(1, 4), rat(1, 2))];
        assert!(!dominates(&shares, &iv(rat(1, 2), int(1)), 0, 1, &vals));
        assert!(dominates(&shares, &Piece::empty(), 0, 1, &vals));
    }

    #[test]
    fn dominated_set_prefers_last_singleton() {
        let vals = alloc::vec![Valuation::uniform(); 3];
        let shares = [iv(int(0), rat(1, 3)), iv(rat(1, 3), rat(2, 3)), iv(rat(2, 3), int(1))];
        let got = find_dominated_set(&shares, &Piece::empty(), &[0, 1, 2], &vals).unwrap();
        assert_eq!(got, Some(alloc::vec![2]));
        let shares = [iv(int(0), rat(1, 4)), iv(rat(1, 4), rat(1, 2)), iv(rat(1, 2), rat(3, 4))];
        let got = find_dominated_set(&shares, &iv(rat(3, 4), int(1)), &[0, 1, 2], &vals).unwrap();
        assert_eq!(got, None);
    }

    #[test]
    fn dominated_set_guard() {
        let vals = alloc::vec![Valuation::uniform(); 9];
        let shares = alloc::vec![Piece::empty(); 9];
        let agents: Vec<usize> = (0..9).collect();
        assert_eq!(find_dominated_set(&shares, &Piece::empty(), &agents, &vals), Err(Error::TooManyAgents));
    }

    #[test]
    fn neatness_examples() {
        let vals = [Valuation::uniform()];
        let q = |a, b| iv(rat(a, 4), rat(b, 4));
        let pieces = [q(0, 1), q(1, 3)];
        assert!(is_neat(&pieces, &[(0, 1, q(1, 3))], &vals).unwrap());
        assert!(!is_neat(&pieces, &[(0, 0, q(0, 1))], &vals).unwrap());
        assert!(!is_neat(&pieces, &[(0, 1, q(1, 3)), (0, 0, q(0, 1))], &vals).unwrap());
        assert!(!is_neat(&pieces, &[(0, 1, Piece::empty())], &vals).unwrap());
        assert_eq!(is_neat(&pieces, &[(0, 0, iv(int(0), rat(1, 2)))], &vals), Err(Error::MalformedAssignment));
    }

    #[test]
    fn connectivity() {
        assert!(is_connected(&iv(int(0), rat(1, 3))));
        assert!(!is_connected(&Piece::from_pairs(&[(int(0), rat(1, 4)), (rat(1, 2), int(1))]).unwrap()));
    }
}
