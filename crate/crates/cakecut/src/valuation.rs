//! Piecewise-constant valuations and the metered Robertson-Webb oracle.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::piece::{Piece, Rat};

/// One constant-density segment `[left, right]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub left: Rat,
    pub right: Rat,
    pub density: Rat,
}

/// A non-negative piecewise-constant density on `[0,1]` with positive total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Valuation {
    segments: Vec<Segment>,
    total: Rat,
}

impl Valuation {
    /// Validates that `segments` tile `[0,1]` in order with non-negative
    /// densities and a positive total.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidValuation("no segments"));
        }
        let mut cursor = Rat::zero();
        let mut total = Rat::zero();
        for s in &segments {
            if s.left != cursor {
                return Err(Error::InvalidValuation("segments do not tile [0,1]"));
            }
            if s.right <= s.left || s.right > Rat::one() {
                return Err(Error::InvalidValuation("segment has non-positive length or leaves [0,1]"));
            }
            if s.density < Rat::zero() {
                return Err(Error::InvalidValuation("negative density"));
            }
            total += &s.density * (&s.right - &s.left);
            cursor = s.right.clone();
        }
        if cursor != Rat::one() {
            return Err(Error::InvalidValuation("segments do not reach 1"));
        }
        if total.is_zero() {
            return Err(Error::InvalidValuation("total value is zero"));
        }
        Ok(Valuation { segments, total })
    }

    /// Density 1 on the whole cake.
    pub fn uniform() -> Self {
        Self::from_breaks(&[], &[Rat::one()]).expect("uniform is valid")
    }

    /// Builds a valuation from interior breakpoints and one density per
    /// segment.
    pub fn from_breaks(breaks: &[Rat], densities: &[Rat]) -> Result<Self> {
        if densities.len() != breaks.len() + 1 {
            return Err(Error::InvalidValuation("need one density per segment"));
        }
        let mut points = Vec::with_capacity(breaks.len() + 2);
        points.push(Rat::zero());
        points.extend(breaks.iter().cloned());
        points.push(Rat::one());
        let segments = densities
            .iter()
            .enumerate()
            .map(|(i, d)| Segment { left: points[i].clone(), right: points[i + 1].clone(), density: d.clone() })
            .collect();
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `V([0,1])`.
    pub fn total(&self) -> &Rat {
        &self.total
    }

    /// Value of `[a, b]`, unmetered.
    pub fn value_between(&self, a: &Rat, b: &Rat) -> Rat {
        let mut acc = Rat::zero();
        if a >= b {
            return acc;
        }
        let first = self.segments.partition_point(|s| &s.right <= a);
        for s in &self.segments[first..] {
            if &s.left >= b {
                break;
            }
            let lo = if &s.left > a { &s.left } else { a };
            let hi = if &s.right < b { &s.right } else { b };
            acc += &s.density * (hi - lo);
        }
        acc
    }

    /// Value of a piece, unmetered.
    pub fn value(&self, piece: &Piece) -> Rat {
        piece
            .intervals()
            .iter()
            .fold(Rat::zero(), |acc, iv| acc + self.value_between(iv.left(), iv.right()))
    }

    /// Smallest `y` with `V([start, y]) = target`, unmetered.
    pub fn cut_point(&self, start: &Rat, target: &Rat) -> Result<Rat> {
        if start < &Rat::zero() || start > &Rat::one() || target < &Rat::zero() {
            return Err(Error::EndpointOutOfRange);
        }
        if target.is_zero() {
            return Ok(start.clone());
        }
        let mut rem = target.clone();
        let first = self.segments.partition_point(|s| &s.right <= start);
        for s in &self.segments[first..] {
            if s.density.is_zero() {
                continue;
            }
            let lo = if &s.left > start { &s.left } else { start };
            let v = &s.density * (&s.right - lo);
            if v >= rem {
                return Ok(lo + &rem / &s.density);
            }
            rem -= v;
        }
        Err(Error::TargetExceedsAvailable)
    }

    /// Coordinate splitting `piece` so that its left part (as given by
    /// `Piece::leftmost_prefix`) is worth exactly `target`, unmetered.
    /// Returns the coordinate and the number of intervals inspected.
    pub fn cut_point_in_piece(&self, piece: &Piece, target: &Rat) -> Result<(Rat, usize)> {
        if target < &Rat::zero() {
            return Err(Error::TargetExceedsAvailable);
        }
        if target.is_zero() {
            return Ok((piece.left_extreme().cloned().unwrap_or_else(Rat::zero), 0));
        }
        let mut rem = target.clone();
        for (i, iv) in piece.intervals().iter().enumerate() {
            let v = self.value_between(iv.left(), iv.right());
            if v >= rem {
                return Ok((self.cut_point(iv.left(), &rem)?, i + 1));
            }
            rem -= v;
        }
        Err(Error::TargetExceedsAvailable)
    }
}

/// Per-agent Cut and Eval counts with an optional global budget.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryCounter {
    cuts: Vec<u64>,
    evals: Vec<u64>,
    budget: Option<u64>,
}

impl QueryCounter {
    pub fn new(n: usize, budget: Option<u64>) -> Self {
        QueryCounter { cuts: alloc::vec![0; n], evals: alloc::vec![0; n], budget }
    }

    pub fn cuts(&self, agent: usize) -> u64 {
        self.cuts[agent]
    }

    pub fn evals(&self, agent: usize) -> u64 {
        self.evals[agent]
    }

    pub fn total(&self) -> u64 {
        self.cuts.iter().sum::<u64>() + self.evals.iter().sum::<u64>()
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    fn charge(&mut self, agent: usize, cut: bool) -> Result<()> {
        if let Some(b) = self.budget {
            if self.total() >= b {
                return Err(Error::BudgetExhausted);
            }
        }
        if cut {
            self.cuts[agent] += 1;
        } else {
            self.evals[agent] += 1;
        }
        Ok(())
    }
}

/// Receives trace lines: one per query plus protocol state transitions.
pub trait TraceSink {
    fn line(&mut self, text: &str);
}

/// The metered query interface shared by every protocol.
///
/// Agents are indexed from 0 internally; trace lines print them from 1.
pub struct Oracle {
    valuations: Vec<Valuation>,
    counter: QueryCounter,
    sink: Option<Box<dyn TraceSink>>,
}

impl Oracle {
    pub fn new(valuations: Vec<Valuation>) -> Self {
        let n = valuations.len();
        Oracle { valuations, counter: QueryCounter::new(n, None), sink: None }
    }

    pub fn with_budget(mut self, budget: Option<u64>) -> Self {
        self.counter.budget = budget;
        self
    }

    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.counter.budget = budget;
    }

    pub fn with_trace(mut self, sink: Box<dyn TraceSink>) -> Self {
        self.sink = Some(sink);
        self
    }

    /// Removes and returns the trace sink.
    pub fn take_trace(&mut self) -> Option<Box<dyn TraceSink>> {
        self.sink.take()
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn valuations(&self) -> &[Valuation] {
        &self.valuations
    }

    pub fn valuation(&self, agent: usize) -> &Valuation {
        &self.valuations[agent]
    }

    pub fn counter(&self) -> &QueryCounter {
        &self.counter
    }

    pub fn tracing(&self) -> bool {
        self.sink.is_some()
    }

    /// Writes a state-transition line to the trace, if one is attached.
    pub fn event(&mut self, text: impl FnOnce() -> String) {
        if let Some(s) = self.sink.as_mut() {
            s.line(&text());
        }
    }

    /// Eval query.
    pub fn eval(&mut self, agent: usize, piece: &Piece) -> Result<Rat> {
        self.counter.charge(agent, false)?;
        let v = self.valuations[agent].value(piece);
        if let Some(s) = self.sink.as_mut() {
            s.line(&format!("Q {} EVAL {} -> {}", agent + 1, piece, v));
        }
        Ok(v)
    }

    /// Cut query: smallest `y` with `V([start, y]) = target`.
    pub fn cut(&mut self, agent: usize, start: &Rat, target: &Rat) -> Result<Rat> {
        self.counter.charge(agent, true)?;
        let y = self.valuations[agent].cut_point(start, target)?;
        if let Some(s) = self.sink.as_mut() {
            s.line(&format!("Q {} CUT {} {} -> {}", agent + 1, start, target, y));
        }
        Ok(y)
    }

    /// Cut inside a possibly gapped piece. Intervals wholly to the left of
    /// the cut are charged as Eval queries and the final one as a Cut.
    pub fn cut_in_piece(&mut self, agent: usize, piece: &Piece, target: &Rat) -> Result<Rat> {
        if target.is_zero() {
            return Ok(piece.left_extreme().cloned().unwrap_or_else(Rat::zero));
        }
        let mut rem = target.clone();
        for iv in piece.intervals() {
            let single = Piece::interval(iv.left().clone(), iv.right().clone())?;
            let v = self.valuations[agent].value(&single);
            if v >= rem {
                return self.cut(agent, iv.left(), &rem);
            }
            self.eval(agent, &single)?;
            rem -= v;
        }
        Err(Error::TargetExceedsAvailable)
    }
}

/// Deterministic random instance: `n` valuations, each with `k` segments,
/// rational breakpoints on a grid of `4k` and integer densities in `0..=9`
/// with at least one positive density.
pub fn random_instance(n: usize, k: usize, seed: u64) -> Vec<Valuation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = k.max(1);
    let grid = 4 * k as i64;
    (0..n)
        .map(|_| {
            let mut cuts: Vec<i64> = Vec::new();
            while cuts.len() < k - 1 {
                let c = rng.gen_range(1..grid);
                if !cuts.contains(&c) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            let mut dens: Vec<i64> = (0..k).map(|_| rng.gen_range(0..=9)).collect();
            if dens.iter().all(|&d| d == 0) {
                let i = rng.gen_range(0..k);
                dens[i] = rng.gen_range(1..=9);
            }
            let breaks: Vec<Rat> = cuts.iter().map(|&c| Rat::new(BigInt::from(c), BigInt::from(grid))).collect();
            let dens: Vec<Rat> = dens.into_iter().map(|d| Rat::from_integer(BigInt::from(d))).collect();
            Valuation::from_breaks(&breaks, &dens).expect("generated valuation is valid")
        })
        .collect()
}

/// Checks the `Valuation` invariants on an already-built value.
pub fn check_invariants(v: &Valuation) -> bool {
    Valuation::new(v.segments.clone()).is_ok()
}
