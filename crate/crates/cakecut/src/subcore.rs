//! The SubCore protocol: a neat partial allocation of a list of pieces to a
//! smaller ordered set of agents, each agent meeting a benchmark value.
//!
//! A piece is never cut from the right. Every sub-piece handed out is the
//! part of an input piece right of some margin, so a share is identified by
//! a `Slot`: the input piece, the margin and the ledger id carrying the tag.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_traits::Zero;

use crate::error::{bug, Error, Result};
use crate::piece::{Piece, Rat};
use crate::tiebreak::{AugmentedValue, ImaginaryLedger, PieceId};
use crate::valuation::Oracle;
use crate::verify::is_neat;

/// The part of input piece `base` lying right of `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub base: usize,
    pub x: Rat,
    pub id: PieceId,
}

/// A trim left by one agent during one contest.
#[derive(Clone, Debug)]
struct Trim {
    agent: usize,
    slot: Slot,
}

/// Input to a root SubCore call.
#[derive(Clone, Debug)]
pub struct SubCoreInput {
    /// Pieces with their ledger ids; margins start at the left extremes.
    pub pieces: Vec<(Piece, PieceId)>,
    /// Agents in the order they are introduced.
    pub agents: Vec<usize>,
    /// One benchmark per entry of `agents`.
    pub benchmarks: Vec<AugmentedValue>,
}

/// One agent's share.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Share {
    pub agent: usize,
    pub piece_index: usize,
    pub piece: Piece,
    pub id: PieceId,
    /// True iff the share is the whole input piece.
    pub full: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubCoreStats {
    pub calls: u64,
    pub max_depth: usize,
    pub trims: u64,
    pub growth_steps: u64,
    /// Root calls restarted with a rotated agent order.
    pub retries: u64,
}

#[derive(Clone, Debug)]
pub struct SubCoreOutput {
    pub shares: Vec<Share>,
    pub stats: SubCoreStats,
}

impl SubCoreOutput {
    /// Input pieces nobody received any part of.
    pub fn unallocated(&self, n_pieces: usize) -> Vec<usize> {
        (0..n_pieces).filter(|k| !self.shares.iter().any(|s| s.piece_index == *k)).collect()
    }
}

struct Run<'a> {
    oracle: &'a mut Oracle,
    ledger: &'a mut ImaginaryLedger,
    bases: Vec<Piece>,
    memo: BTreeMap<(usize, usize, Rat), Rat>,
    stats: SubCoreStats,
    depth_limit: usize,
}

impl<'a> Run<'a> {
    fn piece_of(&self, s: &Slot) -> Piece {
        self.bases[s.base].right_of(&s.x)
    }

    fn phys(&mut self, agent: usize, s: &Slot) -> Result<Rat> {
        let key = (agent, s.base, s.x.clone());
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let piece = self.piece_of(s);
        let v = self.oracle.eval(agent, &piece)?;
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    fn aug(&mut self, agent: usize, s: &Slot) -> Result<AugmentedValue> {
        let phys = self.phys(agent, s)?;
        let tag = self.ledger.piece_imaginary_value(s.id)?.clone();
        Ok(AugmentedValue::new(phys, tag))
    }

    /// Index of `agent`'s favourite among `slots`.
    fn favourite(&mut self, agent: usize, slots: &[Slot]) -> Result<Option<(usize, AugmentedValue)>> {
        let mut best: Option<(usize, AugmentedValue)> = None;
        for (k, s) in slots.iter().enumerate() {
            let v = self.aug(agent, s)?;
            best = match best {
                None => Some((k, v)),
                Some((bk, bv)) => {
                    if self.ledger.compare_distinct(&v, &bv) == Ordering::Greater {
                        Some((k, v))
                    } else {
                        Some((bk, bv))
                    }
                }
            };
        }
        Ok(best)
    }

    /// Orders two trims on the same piece by position: `Greater` means
    /// further right, i.e. leaving less cake. Equal coordinates fall back to
    /// the tag, the smaller tag being further right.
    fn position_cmp(&mut self, a: &Slot, b: &Slot) -> Result<Ordering> {
        match a.x.cmp(&b.x) {
            Ordering::Equal => {
                let ta = self.ledger.piece_imaginary_value(a.id)?.clone();
                let tb = self.ledger.piece_imaginary_value(b.id)?.clone();
                self.ledger.stats.comparisons += 1;
                if ta == tb {
                    self.ledger.stats.augmented_ties += 1;
                }
                Ok(tb.cmp(&ta))
            }
            o => Ok(o),
        }
    }

    /// Agent `j` trims every slot worth more than `bench` down to it. A slot
    /// worth exactly `bench` is the benchmark piece itself and counts as a
    /// trim on its own margin.
    fn place_trims(&mut self, j: usize, slots: &[Slot], bench: &AugmentedValue) -> Result<Vec<Trim>> {
        let mut over: Vec<(AugmentedValue, &Slot)> = Vec::new();
        let mut exact: Vec<Trim> = Vec::new();
        for s in slots {
            let v = self.aug(j, s)?;
            match v.cmp(bench) {
                Ordering::Greater => over.push((v, s)),
                Ordering::Equal => exact.push(Trim { agent: j, slot: s.clone() }),
                Ordering::Less => {}
            }
        }
        if over.is_empty() {
            return Ok(exact);
        }
        over.sort_by(|a, b| a.0.cmp(&b.0));
        let mut trims = Vec::with_capacity(over.len());
        for (v, s) in &over {
            let target = &v.phys - &bench.phys;
            let x = if target.is_zero() {
                s.x.clone()
            } else {
                let piece = self.piece_of(s);
                let raw = self.oracle.cut_in_piece(j, &piece, &target)?;
                self.bases[s.base].canonical_cut(&raw).max(s.x.clone())
            };
            let id = self.ledger.register(Default::default());
            self.memo.insert((j, s.base, x.clone()), bench.phys.clone());
            trims.push(Trim { agent: j, slot: Slot { base: s.base, x, id } });
        }
        let ids: Vec<PieceId> = trims.iter().map(|t| t.slot.id).collect();
        self.ledger.tag_equalized_pieces(j, &ids, &bench.inf)?;
        self.stats.trims += trims.len() as u64;
        let mut after = Vec::with_capacity(trims.len());
        for t in &trims {
            after.push(self.aug(j, &t.slot)?);
        }
        let conserved = after.windows(2).all(|w| w[0] < w[1]) && after.iter().all(|a| a > bench);
        self.ledger.record_order_check(conserved);
        if !conserved {
            return bug(format!("trim by agent {} changed the preference order", j + 1));
        }
        if self.oracle.tracing() {
            for t in &trims {
                let line = format!("TRIM {} piece {} at {}", j + 1, t.slot.base + 1, t.slot.x);
                self.oracle.event(|| line);
            }
        }
        trims.extend(exact);
        Ok(trims)
    }

    /// Growth when no unallocated contested piece carries a non-winner
    /// margin. Moves a winner onto an open piece it values exactly as much
    /// as its current one (and at least at its benchmark), freeing a piece
    /// whose margin belongs to a non-winner, and returns that non-winner.
    ///
    /// Other winners valued the freed piece at most their own before, and
    /// nobody preferred the open piece, so the physical allocation stays
    /// neat with respect to the margins.
    fn swap_onto_open(
        &mut self,
        res: &mut [(usize, Slot)],
        open: &[&(Slot, Option<usize>)],
        margins: &[(Slot, Option<usize>)],
        bprime: &BTreeMap<usize, AugmentedValue>,
    ) -> Result<usize> {
        for (u, _) in open {
            for k in 0..res.len() {
                let (w, held) = res[k].clone();
                let Some(newcomer) = margins.iter().find(|(s, _)| s.base == held.base).and_then(|m| m.1) else {
                    continue;
                };
                if self.phys(w, u)? != self.phys(w, &held)? || self.aug(w, u)? < bprime[&w] {
                    continue;
                }
                res[k].1 = u.clone();
                let line = format!("SWAP agent {} moves from piece {} to piece {}", w + 1, held.base + 1, u.base + 1);
                self.oracle.event(|| line);
                return Ok(newcomer);
            }
        }
        Err(Error::NoMarginalAgent)
    }

    /// Rightmost trim on `base` among agents accepted by `keep`.
    fn rightmost<'t>(&mut self, trims: &'t [Trim], base: usize, keep: impl Fn(usize) -> bool) -> Result<Option<&'t Trim>> {
        let mut best: Option<&Trim> = None;
        for t in trims.iter().filter(|t| t.slot.base == base && keep(t.agent)) {
            best = match best {
                None => Some(t),
                Some(b) => {
                    if self.position_cmp(&t.slot, &b.slot)? == Ordering::Greater {
                        Some(t)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        Ok(best)
    }

    /// One (possibly recursive) SubCore call. `outside` holds the slots of
    /// the enclosing calls that count towards benchmarks but cannot be
    /// handed out here.
    fn call(
        &mut self,
        agents: &[usize],
        slots: &[Slot],
        bench: &BTreeMap<usize, AugmentedValue>,
        outside: &[Slot],
        depth: usize,
    ) -> Result<Vec<(usize, Slot)>> {
        self.stats.calls += 1;
        self.stats.max_depth = self.stats.max_depth.max(depth);
        if depth > self.depth_limit {
            return bug("subcore recursion deeper than the agent count");
        }
        if slots.len() < agents.len() {
            return bug("subcore called with fewer pieces than agents");
        }
        if self.oracle.tracing() {
            let ags: Vec<_> = agents.iter().map(|a| format!("{}", a + 1)).collect();
            let sl: Vec<_> = slots.iter().map(|s| format!("{}@{}", s.base + 1, s.x)).collect();
            let line = format!("SUBCORE depth {} agents {} pieces {}", depth, ags.join(","), sl.join(" "));
            self.oracle.event(|| line);
        }
        let mut launch = BTreeMap::new();
        for &a in agents {
            let (k, _) = self.favourite(a, slots)?.expect("slots are non-empty");
            launch.insert(a, k);
        }
        // Tentative allocation: agent -> slot.
        let mut held: Vec<(usize, Slot)> = Vec::new();
        for (mi, &m) in agents.iter().enumerate() {
            let fav = launch[&m];
            if !held.iter().any(|(_, s)| s.base == slots[fav].base) {
                held.push((m, slots[fav].clone()));
                continue;
            }
            let first: Vec<usize> = agents[..=mi].to_vec();
            let contested: Vec<Slot> =
                slots.iter().filter(|s| held.iter().any(|(_, h)| h.base == s.base)).cloned().collect();
            let free: Vec<Slot> =
                slots.iter().filter(|s| !held.iter().any(|(_, h)| h.base == s.base)).cloned().collect();
            let mut visible = free.clone();
            visible.extend(outside.iter().cloned());

            let mut bprime: BTreeMap<usize, AugmentedValue> = BTreeMap::new();
            for &j in &first {
                let mut b = bench.get(&j).cloned().unwrap_or_else(AugmentedValue::zero);
                if let Some((_, v)) = self.favourite(j, &visible)? {
                    if v > b {
                        b = v;
                    }
                }
                if self.oracle.tracing() {
                    let line = format!("BPRIME depth {} agent {} {} {:?}", depth, j + 1, b.phys, b.inf);
                    self.oracle.event(|| line);
                }
                bprime.insert(j, b);
            }

            let mut trims: Vec<Trim> = Vec::new();
            for &j in &first {
                let b = bprime[&j].clone();
                trims.extend(self.place_trims(j, &contested, &b)?);
            }

            let mut winners: BTreeSet<usize> = BTreeSet::new();
            for s in &contested {
                match self.rightmost(&trims, s.base, |_| true)? {
                    Some(t) => {
                        winners.insert(t.agent);
                    }
                    None => return bug(format!("contested piece {} carries no trim", s.base + 1)),
                }
            }

            let need = first.len() - 1;
            let result = loop {
                let mut margins: Vec<(Slot, Option<usize>)> = Vec::with_capacity(contested.len());
                for s in &contested {
                    let w = &winners;
                    match self.rightmost(&trims, s.base, |a| !w.contains(&a))? {
                        Some(t) => margins.push((t.slot.clone(), Some(t.agent))),
                        None => margins.push((s.clone(), None)),
                    }
                }
                let order: Vec<usize> = first.iter().copied().filter(|a| winners.contains(a)).collect();
                let sub_slots: Vec<Slot> = margins.iter().map(|(s, _)| s.clone()).collect();
                let sub_bench: BTreeMap<usize, AugmentedValue> =
                    order.iter().map(|a| (*a, bprime[a].clone())).collect();
                let mut res = self.call(&order, &sub_slots, &sub_bench, &visible, depth + 1)?;
                if winners.len() >= need {
                    break res;
                }
                self.stats.growth_steps += 1;
                let open: Vec<&(Slot, Option<usize>)> =
                    margins.iter().filter(|(s, _)| !res.iter().any(|(_, r)| r.base == s.base)).collect();
                if open.is_empty() {
                    return bug("no unallocated contested piece");
                }
                let newcomer = match open.iter().find_map(|(_, a)| *a) {
                    Some(a) => a,
                    None => self.swap_onto_open(&mut res, &open, &margins, &bprime)?,
                };
                winners.insert(newcomer);
                let line = format!("GROW agent {} joins winners at depth {}", newcomer + 1, depth);
                self.oracle.event(|| line);
            };

            let loser = *first
                .iter()
                .find(|a| !winners.contains(a))
                .ok_or_else(|| Error::ProtocolBug("no agent left outside the winners".into()))?;
            let (k, _) = self
                .favourite(loser, &free)?
                .ok_or_else(|| Error::ProtocolBug("no uncontested piece for the remaining agent".into()))?;
            held = result;
            held.push((loser, free[k].clone()));
        }

        for (a, s) in &held {
            let b = bench.get(a).cloned().unwrap_or_else(AugmentedValue::zero);
            let v = self.aug(*a, s)?;
            if v < b {
                let line = format!("BENCHMARK agent {} holds {}@{} worth {:?} below {:?}", a + 1, s.base + 1, s.x, v, b);
                self.oracle.event(|| line);
                return Err(Error::BenchmarkInfeasible);
            }
        }
        self.check_relaxed(agents, slots, &held)?;
        Ok(held)
    }

    /// Physical envy-freeness among the call's agents and, when some piece is
    /// left over, nobody preferring a left-over piece at its current margin.
    fn check_relaxed(&mut self, agents: &[usize], slots: &[Slot], held: &[(usize, Slot)]) -> Result<()> {
        if held.len() != agents.len() {
            return bug("subcore left an agent without a piece");
        }
        let bases: BTreeSet<usize> = held.iter().map(|(_, s)| s.base).collect();
        if bases.len() != held.len() {
            return bug("two agents share a piece");
        }
        let vals = self.oracle.valuations();
        for (a, s) in held {
            let own = vals[*a].value(&self.bases[s.base].right_of(&s.x));
            for (b, t) in held {
                if a != b && vals[*a].value(&self.bases[t.base].right_of(&t.x)) > own {
                    return bug(format!("agent {} envies agent {} inside subcore {:?}", a + 1, b + 1, held.iter().map(|(a, s)| format!("{}:{}@{}", a + 1, s.base + 1, s.x)).collect::<Vec<_>>()));
                }
            }
            for u in slots.iter().filter(|u| !bases.contains(&u.base)) {
                if vals[*a].value(&self.bases[u.base].right_of(&u.x)) > own {
                    return bug(format!("agent {} prefers an unallocated piece", a + 1));
                }
            }
        }
        Ok(())
    }
}

/// Runs SubCore from the root and certifies the result: neat, benchmarks
/// met, one piece untouched and at least one agent holding a full piece.
pub fn subcore(input: &SubCoreInput, oracle: &mut Oracle, ledger: &mut ImaginaryLedger) -> Result<SubCoreOutput> {
    if input.benchmarks.len() != input.agents.len() {
        return bug("one benchmark per agent is required");
    }
    if input.pieces.len() <= input.agents.len() {
        return bug("subcore needs more pieces than agents");
    }
    let bases: Vec<Piece> = input.pieces.iter().map(|(p, _)| p.clone()).collect();
    let slots: Vec<Slot> = input
        .pieces
        .iter()
        .enumerate()
        .map(|(k, (p, id))| Slot { base: k, x: p.left_extreme().cloned().unwrap_or_default(), id: *id })
        .collect();
    let bench: BTreeMap<usize, AugmentedValue> =
        input.agents.iter().copied().zip(input.benchmarks.iter().cloned()).collect();
    let depth_limit = input.agents.len() + 1;
    let mut run = Run { oracle, ledger, bases, memo: BTreeMap::new(), stats: SubCoreStats::default(), depth_limit };
    // Exact ties can defeat a growth step; every order is valid, so the
    // introduction order is rotated, then reversed, before giving up.
    let mut order = input.agents.clone();
    let mut attempt = 0;
    let held = loop {
        match run.call(&order, &slots, &bench, &[], 0) {
            Ok(held) => break held,
            Err(e @ (Error::NoMarginalAgent | Error::BenchmarkInfeasible)) => {
                attempt += 1;
                if attempt >= 2 * order.len() {
                    return Err(e);
                }
                run.stats.retries += 1;
                order.rotate_left(1);
                if attempt == order.len() {
                    order.reverse();
                }
                run.oracle.event(|| format!("SUBCORE retry {attempt} after: {e}"));
            }
            Err(e) => return Err(e),
        }
    };

    let mut shares: Vec<Share> = held
        .iter()
        .map(|(a, s)| {
            let piece = run.piece_of(s);
            let full = piece == run.bases[s.base];
            Share { agent: *a, piece_index: s.base, piece, id: s.id, full }
        })
        .collect();
    shares.sort_by_key(|s| s.agent);
    let pairs: Vec<(usize, usize, Piece)> = shares.iter().map(|s| (s.agent, s.piece_index, s.piece.clone())).collect();
    if !is_neat(&run.bases, &pairs, run.oracle.valuations())? {
        return bug("subcore output is not neat");
    }
    if !shares.is_empty() && !shares.iter().any(|s| s.full) {
        return bug("no agent received a full piece");
    }
    Ok(SubCoreOutput { shares, stats: run.stats })
}
