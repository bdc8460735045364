//! Exact rational geometry of the cake `[0,1]`.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Exact rational number, always kept in lowest terms with a positive
/// denominator.
pub type Rat = BigRational;

/// Builds `num/den` as an exact rational.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Builds an integer-valued rational.
pub fn int(v: i64) -> Rat {
    Rat::from_integer(BigInt::from(v))
}

/// A closed subinterval `[left, right]` of the cake.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    left: Rat,
    right: Rat,
}

impl Interval {
    pub fn new(left: Rat, right: Rat) -> Result<Self> {
        if left < Rat::zero() || right > Rat::one() || left > Rat::one() || right < Rat::zero() {
            return Err(Error::EndpointOutOfRange);
        }
        if left > right {
            return Err(Error::InvalidInterval);
        }
        Ok(Interval { left, right })
    }

    pub fn left(&self) -> &Rat {
        &self.left
    }

    pub fn right(&self) -> &Rat {
        &self.right
    }

    pub fn length(&self) -> Rat {
        &self.right - &self.left
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.left, self.right)
    }
}

/// A finite union of interior-disjoint intervals in canonical form: sorted,
/// touching intervals merged and zero-length intervals dropped.
///
/// Because the form is canonical, structural equality is set equality up to
/// measure-zero boundaries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl Piece {
    pub fn empty() -> Self {
        Piece { intervals: Vec::new() }
    }

    /// The whole cake `[0,1]`.
    pub fn whole() -> Self {
        Piece { intervals: alloc::vec![Interval { left: Rat::zero(), right: Rat::one() }] }
    }

    /// A single interval; zero-length intervals give the empty piece.
    pub fn interval(left: Rat, right: Rat) -> Result<Self> {
        Self::normalize(alloc::vec![Interval::new(left, right)?])
    }

    /// Canonicalises an arbitrary list of intervals.
    pub fn normalize(mut raw: Vec<Interval>) -> Result<Self> {
        for iv in &raw {
            if iv.left < Rat::zero() || iv.right > Rat::one() {
                return Err(Error::EndpointOutOfRange);
            }
            if iv.left > iv.right {
                return Err(Error::InvalidInterval);
            }
        }
        raw.retain(|iv| iv.left < iv.right);
        raw.sort();
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match out.last_mut() {
                Some(last) if iv.left <= last.right => {
                    if iv.right > last.right {
                        last.right = iv.right;
                    }
                }
                _ => out.push(iv),
            }
        }
        Ok(Piece { intervals: out })
    }

    /// Builds a piece from `(left, right)` pairs.
    pub fn from_pairs(pairs: &[(Rat, Rat)]) -> Result<Self> {
        let raw = pairs
            .iter()
            .map(|(l, r)| Interval::new(l.clone(), r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::normalize(raw)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> Rat {
        self.intervals.iter().fold(Rat::zero(), |acc, iv| acc + iv.length())
    }

    pub fn left_extreme(&self) -> Option<&Rat> {
        self.intervals.first().map(|iv| &iv.left)
    }

    pub fn right_extreme(&self) -> Option<&Rat> {
        self.intervals.last().map(|iv| &iv.right)
    }

    /// True iff the piece is a single interval. The empty piece is not
    /// connected.
    pub fn is_connected(&self) -> bool {
        self.intervals.len() == 1
    }

    pub fn union(&self, other: &Piece) -> Piece {
        let mut raw = self.intervals.clone();
        raw.extend(other.intervals.iter().cloned());
        Self::normalize(raw).expect("union of valid pieces is valid")
    }

    pub fn intersect(&self, other: &Piece) -> Piece {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = if a[i].left > b[j].left { &a[i].left } else { &b[j].left };
            let hi = if a[i].right < b[j].right { &a[i].right } else { &b[j].right };
            if lo < hi {
                out.push(Interval { left: lo.clone(), right: hi.clone() });
            }
            if a[i].right < b[j].right {
                i += 1;
            } else {
                j += 1;
            }
        }
        Piece { intervals: out }
    }

    /// Points of `[0,1]` not in the piece.
    pub fn complement(&self) -> Piece {
        let mut out = Vec::new();
        let mut cursor = Rat::zero();
        for iv in &self.intervals {
            if cursor < iv.left {
                out.push(Interval { left: cursor.clone(), right: iv.left.clone() });
            }
            cursor = iv.right.clone();
        }
        if cursor < Rat::one() {
            out.push(Interval { left: cursor, right: Rat::one() });
        }
        Piece { intervals: out }
    }

    pub fn subtract(&self, other: &Piece) -> Piece {
        self.intersect(&other.complement())
    }

    /// True iff `other` is contained in `self` up to measure zero.
    pub fn contains(&self, other: &Piece) -> bool {
        other.subtract(self).is_empty()
    }

    /// True iff the two pieces overlap in positive measure.
    pub fn overlaps(&self, other: &Piece) -> bool {
        !self.intersect(other).is_empty()
    }

    /// The part of the piece lying in `[x, 1]`.
    pub fn right_of(&self, x: &Rat) -> Piece {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if &iv.right <= x {
                continue;
            }
            let left = if &iv.left < x { x.clone() } else { iv.left.clone() };
            out.push(Interval { left, right: iv.right.clone() });
        }
        Piece { intervals: out }
    }

    /// The part of the piece lying in `[0, x]`.
    pub fn left_of(&self, x: &Rat) -> Piece {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if &iv.left >= x {
                break;
            }
            let right = if &iv.right > x { x.clone() } else { iv.right.clone() };
            out.push(Interval { left: iv.left.clone(), right });
        }
        Piece { intervals: out }
    }

    /// The sub-piece left of `endpoint`, measured along the piece so that
    /// gaps are skipped.
    pub fn leftmost_prefix(&self, endpoint: &Rat) -> Result<Piece> {
        match (self.left_extreme(), self.right_extreme()) {
            (Some(lo), Some(hi)) if endpoint < lo || endpoint > hi => Err(Error::EndpointOutsidePiece),
            _ => Ok(self.left_of(endpoint)),
        }
    }

    /// Canonical form of a cut coordinate: the infimum of the part right of
    /// `x`, or the right extreme when that part is empty. Two coordinates
    /// give the same right part iff their canonical forms agree.
    pub fn canonical_cut(&self, x: &Rat) -> Rat {
        let rest = self.right_of(x);
        match rest.left_extreme() {
            Some(l) => l.clone(),
            None => self.right_extreme().cloned().unwrap_or_else(|| x.clone()),
        }
    }
}

/// True iff `parts` are pairwise interior-disjoint and their union is `whole`.
pub fn is_partition(parts: &[Piece], whole: &Piece) -> bool {
    let mut union = Piece::empty();
    let mut total = Rat::zero();
    for p in parts {
        total += p.measure();
        union = union.union(p);
    }
    union == *whole && total == union.measure()
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{iv}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(i64, i64, i64, i64)]) -> Piece {
        let v: Vec<(Rat, Rat)> = pairs.iter().map(|&(a, b, c, d)| (rat(a, b), rat(c, d))).collect();
        Piece::from_pairs(&v).unwrap()
    }

    #[test]
    fn normalize_merges_adjacent() {
        assert_eq!(p(&[(0, 1, 1, 2), (1, 2, 3, 4)]), p(&[(0, 1, 3, 4)]));
    }

    #[test]
    fn normalize_drops_zero_length() {
        let got = Piece::from_pairs(&[(rat(1, 4), rat(1, 4)), (rat(0, 1), rat(1, 8))]).unwrap();
        assert_eq!(got.intervals().len(), 1);
        assert_eq!(got, p(&[(0, 1, 1, 8)]));
    }

    #[test]
    fn normalize_sorts() {
        let got = p(&[(1, 2, 1, 1), (0, 1, 1, 4)]);
        assert_eq!(got.intervals()[0].left(), &rat(0, 1));
        assert_eq!(got.intervals().len(), 2);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        let err = Piece::from_pairs(&[(rat(-1, 2), rat(1, 2))]).unwrap_err();
        assert_eq!(err, Error::EndpointOutOfRange);
        let err = Piece::from_pairs(&[(rat(1, 2), rat(3, 2))]).unwrap_err();
        assert_eq!(err, Error::EndpointOutOfRange);
    }

    #[test]
    fn set_operations() {
        assert_eq!(p(&[(0, 1, 1, 2)]).union(&p(&[(1, 4, 3, 4)])), p(&[(0, 1, 3, 4)]));
        assert_eq!(Piece::whole().subtract(&p(&[(1, 3, 2, 3)])), p(&[(0, 1, 1, 3), (2, 3, 1, 1)]));
        assert!(p(&[(0, 1, 1, 2)]).intersect(&p(&[(1, 2, 1, 1)])).is_empty());
    }

    #[test]
    fn partition_checks() {
        let whole = Piece::whole();
        assert!(is_partition(&[p(&[(0, 1, 1, 3)]), p(&[(1, 3, 1, 1)])], &whole));
        assert!(!is_partition(&[p(&[(0, 1, 1, 2)]), p(&[(1, 4, 1, 1)])], &whole));
        assert!(!is_partition(&[p(&[(0, 1, 1, 2)])], &whole));
    }

    #[test]
    fn leftmost_prefix_skips_gaps() {
        let piece = p(&[(0, 1, 1, 4), (1, 2, 1, 1)]);
        assert_eq!(piece.leftmost_prefix(&rat(3, 4)).unwrap(), p(&[(0, 1, 1, 4), (1, 2, 3, 4)]));
        assert!(Piece::whole().leftmost_prefix(&rat(0, 1)).unwrap().is_empty());
        assert_eq!(Piece::whole().leftmost_prefix(&rat(1, 1)).unwrap(), Piece::whole());
        let inner = p(&[(1, 4, 1, 2)]);
        assert_eq!(inner.leftmost_prefix(&rat(3, 4)).unwrap_err(), Error::EndpointOutsidePiece);
    }

    #[test]
    fn canonical_cut_collapses_gaps() {
        let piece = p(&[(0, 1, 1, 4), (1, 2, 1, 1)]);
        assert_eq!(piece.canonical_cut(&rat(1, 3)), rat(1, 2));
        assert_eq!(piece.canonical_cut(&rat(1, 8)), rat(1, 8));
        assert_eq!(piece.canonical_cut(&rat(1, 1)), rat(1, 1));
    }

    #[test]
    fn display_is_compact() {
        assert_eq!(alloc::format!("{}", p(&[(0, 1, 1, 4), (1, 2, 1, 1)])), "{[0,1/4],[1/2,1]}");
        assert_eq!(alloc::format!("{}", Piece::empty()), "{}");
    }
}
