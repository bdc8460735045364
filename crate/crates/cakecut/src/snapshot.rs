//! Protocol parameters, snapshots of Core runs, bonus and significance
//! tests, extraction from the residue and isomorphism classes.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::core_protocol::CoreOutcome;
use crate::error::{bug, Error, Result};
use crate::piece::{Piece, Rat};
use crate::valuation::Oracle;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Adaptive,
}

/// The power tower `base^base^...^base` with `height` copies of `base`.
///
/// The strict parameters are far too large to write down for any `n ≥ 3`,
/// so they are kept in this form and compared symbolically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tower {
    pub base: u32,
    pub height: u32,
}

impl Tower {
    pub fn new(base: u32, height: u32) -> Self {
        Tower { base, height }
    }

    /// The exact value when it has at most `max_bits` bits.
    pub fn value(&self, max_bits: u64) -> Option<BigUint> {
        let mut v = BigUint::one();
        for _ in 0..self.height {
            let e = u64::try_from(&v).ok()?;
            let floor_log = u64::from(u32::BITS - self.base.max(2).leading_zeros() - 1);
            if e.saturating_mul(floor_log) > max_bits {
                return None;
            }
            v = BigUint::from(self.base).pow(e as u32);
            if v.bits() > max_bits {
                return None;
            }
        }
        Some(v)
    }

    /// `self ≥ x`, decided exactly without expanding the tower.
    pub fn at_least(&self, x: &BigUint) -> bool {
        if self.base < 2 {
            let v = if self.height == 0 { 1u32 } else { self.base };
            return BigUint::from(v) >= *x;
        }
        let limit = BigUint::from(x.bits());
        let mut v = BigUint::one();
        for _ in 0..self.height {
            // The next level is base^v ≥ 2^v > x once v ≥ bits(x).
            if v >= limit {
                return true;
            }
            v = BigUint::from(self.base).pow(u32::try_from(&v).expect("below bit length"));
        }
        v >= *x
    }
}

/// `base^exp ≥ x` for `base ≥ 2`, exact. Large exponents are settled by
/// `base^exp ≥ 2^exp ≥ 2^bits(x) > x`.
pub fn pow_at_least(base: u32, exp: &BigUint, x: &BigUint) -> bool {
    debug_assert!(base >= 2);
    if *exp >= BigUint::from(x.bits()) {
        return true;
    }
    let e = u32::try_from(exp).expect("exponent below bit length");
    BigUint::from(base).pow(e) >= *x
}

/// Parameters of one Main run over `n` agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    pub n: usize,
    pub c: Tower,
    pub c_prime: Tower,
    pub b: Tower,
    pub b_prime: Tower,
    pub mode: Mode,
    /// Adaptive significance threshold, `0 < s < 1`.
    pub s: Rat,
    /// Isomorphic snapshots GoLeft starts from (adaptive).
    pub working_set: Option<usize>,
    /// Labelled snapshots kept per Main call (adaptive).
    pub snapshot_cap: usize,
    /// Total query budget.
    pub budget: Option<u64>,
    /// Core rounds allowed for band tightening, the discrepancy gap loop and
    /// conversion, each.
    pub round_cap: usize,
}

impl Params {
    pub fn strict(n: usize) -> Self {
        let b = n as u32;
        Params {
            n,
            c: Tower::new(b, 3),
            c_prime: Tower::new(b, 4),
            b: Tower::new(b, 5),
            b_prime: Tower::new(b, 6),
            mode: Mode::Strict,
            s: Rat::new(BigInt::one(), BigInt::one() << 20),
            working_set: None,
            snapshot_cap: usize::MAX,
            budget: None,
            round_cap: usize::MAX,
        }
    }

    pub fn adaptive(n: usize) -> Self {
        Params { mode: Mode::Adaptive, snapshot_cap: 512, round_cap: 4000, ..Params::strict(n) }
    }

    pub fn with_threshold(mut self, s: Rat) -> Result<Self> {
        if s <= Rat::zero() || s >= Rat::one() {
            return Err(Error::InvalidValuation("significance threshold must lie strictly between 0 and 1"));
        }
        self.s = s;
        Ok(self)
    }

    pub fn with_budget(mut self, budget: Option<u64>) -> Self {
        self.budget = budget;
        self
    }

    /// The same settings for a sub-problem with `m` agents.
    pub fn for_agents(&self, m: usize) -> Params {
        let towers = Params::strict(m);
        Params { n: m, c: towers.c, c_prime: towers.c_prime, b: towers.b, b_prime: towers.b_prime, ..self.clone() }
    }

    /// Size of the isomorphic working set handed to GoLeft, `None` when it
    /// is the strict `C` and cannot be reached.
    pub fn working_set_target(&self) -> Option<usize> {
        match self.mode {
            Mode::Adaptive => Some(self.working_set.unwrap_or_else(|| (self.n * self.n + 2).max(8))),
            Mode::Strict => self.c.value(20).and_then(|v| usize::try_from(&v).ok()),
        }
    }

    /// `value ≥ V(R)·threshold`, where `vr` is the agent's residue value.
    pub fn is_significant(&self, value: &Rat, vr: &Rat) -> bool {
        if vr.is_zero() {
            return *value >= Rat::zero();
        }
        match self.mode {
            Mode::Adaptive => *value >= vr * &self.s,
            Mode::Strict => {
                if value.is_zero() {
                    return false;
                }
                strict_ratio_exceeds_f(self.n, &self.b, &(value / vr))
            }
        }
    }

    /// Bonus strictly inside `(V(R)·s², V(R)·√s)`, compared as
    /// `x > s²` and `x² < s` with `x = bonus / V(R)`.
    pub fn in_band(&self, bonus: &Rat, vr: &Rat) -> bool {
        if vr.is_zero() || bonus.is_zero() {
            return false;
        }
        match self.mode {
            Mode::Adaptive => {
                let x = bonus / vr;
                x > &self.s * &self.s && &x * &x < self.s
            }
            // f(B)² and √f(B) bracket no representable positive ratio
            // larger than f(B) itself.
            Mode::Strict => !strict_ratio_exceeds_f(self.n, &self.b, &(bonus / vr)),
        }
    }
}

/// Whether a positive ratio `r = p/q` is at least `f(B)` for the strict
/// tower `B`: `f(B) ≤ e^{-2B/n} < 2^{-2B/n}` and `r ≥ 2^{-bits(q)}`, so
/// `B ≥ n·bits(q)` settles it; smaller `B` are compared exactly.
fn strict_ratio_exceeds_f(n: usize, b: &Tower, r: &Rat) -> bool {
    if n < 3 {
        return true;
    }
    if *r >= Rat::one() {
        return true;
    }
    let q = r.denom().magnitude().clone();
    let need = BigUint::from(n as u64) * BigUint::from(q.bits());
    if b.at_least(&need) {
        return true;
    }
    let exp = b.value(64).and_then(|v| u64::try_from(&v).ok()).expect("below n·bits(q)");
    *r >= f(exp, n)
}

/// `((n−2)/n)^b`.
pub fn f(b: u64, n: usize) -> Rat {
    let base = Rat::new(BigInt::from(n as i64 - 2), BigInt::from(n as i64));
    num_traits::pow::pow(base, b as usize)
}

/// `C′ ≥ (n+1)^(n²−n)·C` for the strict towers.
///
/// With `e = n^n`, `C = n^e` and `C′ = n^C ≥ 2^C`. The right side is below
/// `2^K` with `K = (n²−n)·bits(n+1) + e·bits(n)`, so `C ≥ K` suffices.
pub fn check_snapshot_pigeonhole(n: u32) -> bool {
    let nn = BigUint::from(n);
    let e = nn.pow(n);
    let k = BigUint::from(n * n - n) * BigUint::from(BigUint::from(n + 1).bits()) + &e * BigUint::from(nn.bits());
    pow_at_least(n, &e, &k)
}

/// `C′·n²·f(B) < 1/n` for the strict towers.
///
/// Equivalent to `n³·C′ < (n/(n−2))^B`. Bernoulli gives
/// `(n/(n−2))^B > 2B/(n−2) > B/n`, so `B ≥ n⁴·C′` suffices. With
/// `B = n^C′` and `C′ = n^C` that is `C′ ≥ C + 4`, which follows from
/// `C ≥ bits(C+4)`, and `bits(C+4) ≤ e·bits(n) + 1` where `C = n^e`.
pub fn check_residue_stability(n: u32) -> bool {
    if n < 3 {
        return false;
    }
    let nn = BigUint::from(n);
    let e = nn.pow(n);
    let k = &e * BigUint::from(nn.bits()) + BigUint::one();
    pow_at_least(n, &e, &k)
}

/// An extracted piece and the agent whose trim closed it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub agent: usize,
    pub piece: Piece,
}

/// One piece of a snapshot together with its GoLeft bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassState {
    /// The agent the piece was allocated to by Core.
    pub origin: usize,
    pub piece: Piece,
    pub holder: usize,
    /// Left to right.
    pub extractions: Vec<Extraction>,
    pub attached: usize,
    /// Sorted, without repeats.
    pub history: Vec<usize>,
}

impl ClassState {
    /// Attachments the current holder actually receives: none for the
    /// original holder, otherwise those up to and including his own.
    pub fn reach(&self) -> usize {
        if self.holder == self.origin {
            return 0;
        }
        match self.extractions.iter().position(|e| e.agent == self.holder) {
            Some(p) => self.attached.min(p + 1),
            None => 0,
        }
    }

    pub fn realized(&self) -> Piece {
        self.extractions[..self.reach()].iter().fold(self.piece.clone(), |acc, e| acc.union(&e.piece))
    }

    /// The piece together with every attached extraction.
    pub fn with_attachments(&self) -> Piece {
        self.extractions[..self.attached].iter().fold(self.piece.clone(), |acc, e| acc.union(&e.piece))
    }

    /// Attached but beyond the holder's reach.
    pub fn escrow(&self) -> Piece {
        self.extractions[self.reach()..self.attached].iter().fold(Piece::empty(), |acc, e| acc.union(&e.piece))
    }

    pub fn unattached(&self) -> Piece {
        self.extractions[self.attached..].iter().fold(Piece::empty(), |acc, e| acc.union(&e.piece))
    }

    fn note_holder(&mut self, agent: usize) {
        self.holder = agent;
        if let Err(at) = self.history.binary_search(&agent) {
            self.history.insert(at, agent);
        }
    }
}

/// Extractor sequences per class, classes in agent order.
pub type IsoSignature = Vec<Vec<usize>>;

/// The allocation produced by one labelled Core run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub id: usize,
    pub cutter: usize,
    /// Agents of the Main call; class `k` is the piece Core gave `agents[k]`.
    pub agents: Vec<usize>,
    pub classes: Vec<ClassState>,
    /// `values[x][k]`: value of class `k`'s piece to `agents[x]`.
    pub values: Vec<Vec<Rat>>,
}

impl Snapshot {
    /// Records a Core outcome, asking every agent for the value of every
    /// piece.
    pub fn from_core(id: usize, out: &CoreOutcome, oracle: &mut Oracle) -> Result<Self> {
        let agents = out.agents.clone();
        let mut classes = Vec::with_capacity(agents.len());
        for &a in &agents {
            let piece = out.share_of(a).cloned().ok_or(Error::MalformedAssignment)?;
            classes.push(ClassState {
                origin: a,
                piece,
                holder: a,
                extractions: Vec::new(),
                attached: 0,
                history: alloc::vec![a],
            });
        }
        let mut values = Vec::with_capacity(agents.len());
        for &a in &agents {
            let mut row = Vec::with_capacity(classes.len());
            for c in &classes {
                row.push(if c.piece.is_empty() { Rat::zero() } else { oracle.eval(a, &c.piece)? });
            }
            values.push(row);
        }
        Ok(Snapshot { id, cutter: out.cutter, agents, classes, values })
    }

    pub fn position(&self, agent: usize) -> Option<usize> {
        self.agents.iter().position(|&a| a == agent)
    }

    /// Class currently held by `agent`.
    pub fn class_held_by(&self, agent: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.holder == agent)
    }

    /// `V_i(c_{ji}) − V_i(c_{jk})` against `i`'s original class.
    pub fn bonus(&self, agent: usize, k: usize) -> Result<Rat> {
        let x = self.position(agent).ok_or(Error::UnknownPiece)?;
        Ok(&self.values[x][x] - &self.values[x][k])
    }

    pub fn signature(&self) -> IsoSignature {
        self.classes.iter().map(|c| c.extractions.iter().map(|e| e.agent).collect()).collect()
    }

    /// What each agent holds in this snapshot right now.
    pub fn holdings(&self) -> Vec<(usize, Piece)> {
        self.classes.iter().map(|c| (c.holder, c.realized())).collect()
    }

    /// Every extracted piece that is not in anyone's hands.
    pub fn loose_pieces(&self) -> Piece {
        self.classes.iter().fold(Piece::empty(), |acc, c| acc.union(&c.escrow()).union(&c.unattached()))
    }

    /// Removes all extractions, handing back their union.
    pub fn clear_extractions(&mut self) -> Piece {
        let mut out = Piece::empty();
        for c in &mut self.classes {
            if c.attached != 0 {
                continue;
            }
            for e in c.extractions.drain(..) {
                out = out.union(&e.piece);
            }
        }
        out
    }

    /// Hands class `k` to `agent`.
    pub fn give(&mut self, k: usize, agent: usize) {
        self.classes[k].note_holder(agent);
    }
}

/// Result of extracting for one snapshot piece.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtractOutcome {
    /// Everything delimited was removed from the residue.
    Extracted(Vec<Extraction>),
    /// A delimited piece is significant to someone. Pieces before it in
    /// the same call were already extracted and are listed.
    Discrepant { piece: Piece, trimmer: usize, bonus: Rat, extracted: Vec<Extraction> },
}

/// Extraction for class `k` of `snap`.
///
/// `vr[x]` is `agents[x]`'s value of the residue when the pass began;
/// significance is judged against it throughout.
pub fn extract_for_piece(
    snap: &Snapshot,
    k: usize,
    residue: &mut Piece,
    vr: &[Rat],
    params: &Params,
    oracle: &mut Oracle,
) -> Result<ExtractOutcome> {
    let origin = snap.classes[k].origin;
    let mut trims: Vec<(Rat, usize, usize, Rat)> = Vec::new();
    for (x, &i) in snap.agents.iter().enumerate() {
        if i == origin {
            continue;
        }
        let b = snap.bonus(i, k)?;
        if b < Rat::zero() {
            return bug("negative bonus in a snapshot");
        }
        if params.is_significant(&b, &vr[x]) {
            continue;
        }
        let t = oracle.cut_in_piece(i, residue, &b)?;
        trims.push((residue.canonical_cut(&t), x, i, b));
    }
    trims.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = Vec::new();
    let mut before = Piece::empty();
    for (t, _, agent, b) in trims {
        let prefix = residue.left_of(&t);
        let piece = prefix.subtract(&before);
        if !piece.is_empty() {
            for (x, &j) in snap.agents.iter().enumerate() {
                let v = oracle.eval(j, &piece)?;
                if params.is_significant(&v, &vr[x]) {
                    return Ok(ExtractOutcome::Discrepant { piece, trimmer: agent, bonus: b, extracted: out });
                }
            }
        }
        before = before.union(&piece);
        out.push(Extraction { agent, piece });
    }
    *residue = residue.subtract(&before);
    Ok(ExtractOutcome::Extracted(out))
}

/// Groups snapshots by signature and returns the members of a class with
/// at least `target` members, choosing the class whose `target`-th member
/// was generated first.
pub fn find_isomorphic_subset(snapshots: &[Snapshot], target: usize) -> Option<Vec<usize>> {
    let target = target.max(1);
    let mut groups: BTreeMap<IsoSignature, Vec<usize>> = BTreeMap::new();
    for (idx, s) in snapshots.iter().enumerate() {
        groups.entry(s.signature()).or_default().push(idx);
    }
    groups
        .into_values()
        .filter(|g| g.len() >= target)
        .min_by_key(|g| g[target - 1])
}

/// Number of possible signatures, `(n+1)^(n²−n)` as in the pigeonhole
/// count.
pub fn signature_count_bound(n: u32) -> BigUint {
    BigUint::from(n + 1).pow(n * n - n)
}

pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}
