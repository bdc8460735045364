//! Symbolic infinitesimals used to break every tie inside Core and SubCore.
//!
//! Each piece created during a run carries a sparse integer combination of
//! symbols. Symbols are strictly ordered and any symbol outweighs every
//! integer combination of the symbols below it, so values are compared by
//! their physical part first and then lexicographically on the symbols from
//! the largest down.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::piece::Rat;

/// One symbolic infinitesimal.
///
/// `rank` is the global issue sequence number. A smaller `rank` means an
/// earlier and therefore larger symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EpsSymbol {
    pub rank: u64,
    pub owner: usize,
    pub owner_index: u64,
}

/// Sparse integer combination of symbols, keyed by rank.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Infinitesimal {
    terms: BTreeMap<u64, i64>,
}

impl Infinitesimal {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn symbol(s: EpsSymbol) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(s.rank, 1);
        Infinitesimal { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, s: &EpsSymbol) -> i64 {
        self.terms.get(&s.rank).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u64, i64)> + '_ {
        self.terms.iter().map(|(&r, &c)| (r, c))
    }

    pub fn add_scaled(&mut self, other: &Infinitesimal, scale: i64) {
        for (&rank, &c) in &other.terms {
            let e = self.terms.entry(rank).or_insert(0);
            *e += c * scale;
            if *e == 0 {
                self.terms.remove(&rank);
            }
        }
    }

    pub fn plus(&self, other: &Infinitesimal) -> Infinitesimal {
        let mut out = self.clone();
        out.add_scaled(other, 1);
        out
    }

    pub fn minus(&self, other: &Infinitesimal) -> Infinitesimal {
        let mut out = self.clone();
        out.add_scaled(other, -1);
        out
    }
}

impl Ord for Infinitesimal {
    fn cmp(&self, other: &Self) -> Ordering {
        // The leading term of the difference decides.
        let diff = self.minus(other);
        match diff.terms.iter().next() {
            None => Ordering::Equal,
            Some((_, &c)) if c > 0 => Ordering::Greater,
            Some(_) => Ordering::Less,
        }
    }
}

impl PartialOrd for Infinitesimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A physical value plus an infinitesimal tie-breaker.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AugmentedValue {
    pub phys: Rat,
    pub inf: Infinitesimal,
}

impl AugmentedValue {
    pub fn new(phys: Rat, inf: Infinitesimal) -> Self {
        AugmentedValue { phys, inf }
    }

    pub fn physical(phys: Rat) -> Self {
        AugmentedValue { phys, inf: Infinitesimal::zero() }
    }

    pub fn zero() -> Self {
        Self::physical(Rat::from_integer(0.into()))
    }
}

/// Physical part first, then the infinitesimal part.
pub fn compare(a: &AugmentedValue, b: &AugmentedValue) -> Ordering {
    a.phys.cmp(&b.phys).then_with(|| a.inf.cmp(&b.inf))
}

impl Ord for AugmentedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(self, other)
    }
}

impl PartialOrd for AugmentedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Handle for a piece registered with the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PieceId(pub u64);

/// Counters fed by instrumented comparisons and trim events.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TieStats {
    pub comparisons: u64,
    pub augmented_ties: u64,
    pub trim_events: u64,
    pub order_violations: u64,
}

/// Issues symbols and holds the shared imaginary tag of every protocol piece.
#[derive(Clone, Debug, Default)]
pub struct ImaginaryLedger {
    next_rank: u64,
    issued_per_agent: BTreeMap<usize, u64>,
    tags: BTreeMap<PieceId, Infinitesimal>,
    next_piece: u64,
    pub stats: TieStats,
}

impl ImaginaryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Issues a fresh symbol smaller than every symbol issued before it.
    pub fn issue_epsilon(&mut self, agent: usize) -> EpsSymbol {
        let rank = self.next_rank;
        self.next_rank += 1;
        let idx = self.issued_per_agent.entry(agent).or_insert(0);
        let s = EpsSymbol { rank, owner: agent, owner_index: *idx };
        *idx += 1;
        s
    }

    pub fn symbols_issued(&self) -> u64 {
        self.next_rank
    }

    /// Registers a new piece carrying `tag`.
    pub fn register(&mut self, tag: Infinitesimal) -> PieceId {
        let id = PieceId(self.next_piece);
        self.next_piece += 1;
        self.tags.insert(id, tag);
        id
    }

    pub fn piece_imaginary_value(&self, id: PieceId) -> Result<&Infinitesimal> {
        self.tags.get(&id).ok_or(Error::UnknownPiece)
    }

    /// Adds `delta` to a registered tag.
    pub fn add_to_tag(&mut self, id: PieceId, delta: &Infinitesimal) -> Result<()> {
        let tag = self.tags.get_mut(&id).ok_or(Error::UnknownPiece)?;
        tag.add_scaled(delta, 1);
        Ok(())
    }

    /// Gives each piece in `trimmed` the tag `benchmark + fresh symbol`.
    ///
    /// `trimmed` is ordered least preferred first (by the agent's pre-trim
    /// order). The batch of symbols is issued in one go and the largest of
    /// them goes to the most preferred piece, so the post-trim order matches
    /// the pre-trim order while every trimmed piece still beats the benchmark.
    pub fn tag_equalized_pieces(
        &mut self,
        agent: usize,
        trimmed: &[PieceId],
        benchmark: &Infinitesimal,
    ) -> Result<()> {
        if trimmed.is_empty() {
            return Err(Error::EmptyTrimSet);
        }
        for id in trimmed {
            if !self.tags.contains_key(id) {
                return Err(Error::UnknownPiece);
            }
        }
        let symbols: Vec<EpsSymbol> = (0..trimmed.len()).map(|_| self.issue_epsilon(agent)).collect();
        for (id, s) in trimmed.iter().rev().zip(symbols) {
            let mut tag = benchmark.clone();
            tag.add_scaled(&Infinitesimal::symbol(s), 1);
            self.tags.insert(*id, tag);
        }
        self.stats.trim_events += 1;
        Ok(())
    }

    /// Compares two values belonging to distinct pieces and records an
    /// augmented tie if one occurs.
    pub fn compare_distinct(&mut self, a: &AugmentedValue, b: &AugmentedValue) -> Ordering {
        self.stats.comparisons += 1;
        let ord = compare(a, b);
        if ord == Ordering::Equal {
            self.stats.augmented_ties += 1;
        }
        ord
    }

    /// Records the outcome of an order-conservation check.
    pub fn record_order_check(&mut self, ok: bool) {
        if !ok {
            self.stats.order_violations += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piece::rat;

    fn aug(p: Rat, terms: &[(EpsSymbol, i64)]) -> AugmentedValue {
        let mut inf = Infinitesimal::zero();
        for (s, c) in terms {
            inf.add_scaled(&Infinitesimal::symbol(*s), *c);
        }
        AugmentedValue::new(p, inf)
    }

    #[test]
    fn physical_part_dominates() {
        let mut l = ImaginaryLedger::new();
        let e = l.issue_epsilon(0);
        assert_eq!(compare(&aug(rat(1, 2), &[]), &aug(rat(1, 3), &[(e, 99)])), Ordering::Greater);
    }

    #[test]
    fn larger_symbol_dominates() {
        let mut l = ImaginaryLedger::new();
        let e1 = l.issue_epsilon(0);
        let e2 = l.issue_epsilon(0);
        assert_eq!(compare(&aug(rat(1, 2), &[(e1, 1)]), &aug(rat(1, 2), &[(e2, 5)])), Ordering::Greater);
        assert_eq!(compare(&aug(rat(1, 2), &[]), &aug(rat(1, 2), &[])), Ordering::Equal);
    }

    #[test]
    fn issue_order_is_rank_order() {
        let mut l = ImaginaryLedger::new();
        let a = l.issue_epsilon(1);
        let b = l.issue_epsilon(1);
        let c = l.issue_epsilon(2);
        assert!(Infinitesimal::symbol(a) > Infinitesimal::symbol(b));
        assert!(Infinitesimal::symbol(b) > Infinitesimal::symbol(c));
        assert_eq!((a.owner_index, b.owner_index, c.owner_index), (0, 1, 0));
    }

    #[test]
    fn supply_is_unbounded() {
        let mut l = ImaginaryLedger::new();
        let mut last = l.issue_epsilon(0);
        for _ in 0..10_000 {
            let next = l.issue_epsilon(0);
            assert!(Infinitesimal::symbol(last) > Infinitesimal::symbol(next));
            last = next;
        }
    }

    #[test]
    fn tagging_preserves_order() {
        let mut l = ImaginaryLedger::new();
        let bench = l.register(Infinitesimal::zero());
        let a = l.register(Infinitesimal::zero());
        let c = l.register(Infinitesimal::zero());
        let btag = l.piece_imaginary_value(bench).unwrap().clone();
        l.tag_equalized_pieces(3, &[a, c], &btag).unwrap();
        let va = AugmentedValue::new(rat(1, 4), l.piece_imaginary_value(a).unwrap().clone());
        let vc = AugmentedValue::new(rat(1, 4), l.piece_imaginary_value(c).unwrap().clone());
        let vb = AugmentedValue::new(rat(1, 4), btag);
        assert!(va < vc);
        assert!(va > vb);
        assert!(vc > vb);
    }

    #[test]
    fn tags_accumulate() {
        let mut l = ImaginaryLedger::new();
        let id = l.register(Infinitesimal::zero());
        assert!(l.piece_imaginary_value(id).unwrap().is_zero());
        let e1 = l.issue_epsilon(0);
        let e2 = l.issue_epsilon(1);
        l.add_to_tag(id, &Infinitesimal::symbol(e1)).unwrap();
        assert_eq!(l.piece_imaginary_value(id).unwrap().coefficient(&e1), 1);
        l.add_to_tag(id, &Infinitesimal::symbol(e2)).unwrap();
        let tag = l.piece_imaginary_value(id).unwrap();
        assert_eq!((tag.coefficient(&e1), tag.coefficient(&e2)), (1, 1));
        assert_eq!(l.piece_imaginary_value(PieceId(99)).unwrap_err(), Error::UnknownPiece);
    }

    #[test]
    fn empty_trim_set_rejected() {
        let mut l = ImaginaryLedger::new();
        assert_eq!(l.tag_equalized_pieces(0, &[], &Infinitesimal::zero()).unwrap_err(), Error::EmptyTrimSet);
    }
}
