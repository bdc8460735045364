//! GoLeft: exchanges along permutation-graph cycles and ordered attachment
//! of extracted pieces over a shrinking working set of isomorphic
//! snapshots.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{bug, Error, Result};
use crate::main_protocol::{main_rec, Ctx, QuotaEvent};
use crate::piece::{Piece, Rat};
use crate::snapshot::{ceil_div, Snapshot};

/// Agents as nodes; an edge `i → j` means `i` accepts whatever `j` holds in
/// the working set. `T′` holds the nodes whose class is fully attached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationGraph {
    pub nodes: Vec<usize>,
    pub edges: BTreeSet<(usize, usize)>,
    pub t_prime: BTreeSet<usize>,
}

impl PermutationGraph {
    /// Every node in `T` with a self-loop.
    pub fn new(nodes: &[usize]) -> Self {
        PermutationGraph {
            nodes: nodes.to_vec(),
            edges: nodes.iter().map(|&v| (v, v)).collect(),
            t_prime: BTreeSet::new(),
        }
    }

    pub fn in_t(&self, v: usize) -> bool {
        !self.t_prime.contains(&v)
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == v).map(|e| e.0)
    }

    /// In-degree at least one everywhere, exactly one on `T`, and every
    /// node points at every node of `T′`.
    pub fn invariants_hold(&self) -> bool {
        self.nodes.iter().all(|&v| {
            let d = self.in_edges(v).count();
            if self.in_t(v) {
                d == 1
            } else {
                self.nodes.iter().all(|&u| self.edges.contains(&(u, v)))
            }
        }) && self.t_prime.len() < self.nodes.len()
    }

    /// A simple cycle through at least one `T` node, as the node list
    /// `v0 → v1 → … → v0`.
    ///
    /// Walks back along unique in-edges from the smallest `T` node until a
    /// node repeats or a `T′` node is met; the start points at every `T′`
    /// node, which closes the cycle.
    pub fn find_cycle_with_t_node(&self) -> Option<Vec<usize>> {
        let start = self.nodes.iter().copied().filter(|&v| self.in_t(v)).min()?;
        let mut chain = alloc::vec![start];
        loop {
            let cur = *chain.last().unwrap();
            let mut preds = self.in_edges(cur);
            let p = preds.next()?;
            if preds.next().is_some() {
                return None;
            }
            if !self.in_t(p) {
                let mut cycle = alloc::vec![p];
                cycle.extend(chain.iter().rev().copied());
                return Some(cycle);
            }
            if let Some(at) = chain.iter().position(|&v| v == p) {
                let mut cycle: Vec<usize> = chain[at..].iter().rev().copied().collect();
                cycle.rotate_right(1);
                return Some(cycle);
            }
            chain.push(p);
        }
    }

    /// True iff `cycle` is a simple directed cycle of the graph with a node
    /// in `T`.
    pub fn is_valid_cycle(&self, cycle: &[usize]) -> bool {
        let m = cycle.len();
        if m == 0 {
            return false;
        }
        let distinct: BTreeSet<usize> = cycle.iter().copied().collect();
        distinct.len() == m
            && (0..m).all(|i| self.edges.contains(&(cycle[i], cycle[(i + 1) % m])))
            && cycle.iter().any(|&v| self.in_t(v))
    }

    /// Each cycle node takes over the pieces of its successor: in-edges of
    /// the successor move to it and so does `T′` membership.
    pub fn exchange(&mut self, cycle: &[usize]) {
        let m = cycle.len();
        let new_holder = |y: usize| -> usize {
            match cycle.iter().position(|&v| v == y) {
                Some(i) => cycle[(i + m - 1) % m],
                None => y,
            }
        };
        self.edges = self.edges.iter().map(|&(x, y)| (x, new_holder(y))).collect();
        self.t_prime = self.t_prime.iter().map(|&y| new_holder(y)).collect();
    }

    /// Replaces `holder`'s self-loop by an edge from `extractor`.
    pub fn attach(&mut self, holder: usize, extractor: usize) {
        self.edges.remove(&(holder, holder));
        self.edges.insert((extractor, holder));
    }

    pub fn promote(&mut self, v: usize) {
        self.t_prime.insert(v);
        for &u in &self.nodes {
            self.edges.insert((u, v));
        }
    }
}

/// All simple cycles with a `T` node, by exhaustive search. Used as an
/// oracle for small graphs.
pub fn all_cycles_with_t_node(g: &PermutationGraph) -> Vec<Vec<usize>> {
    fn extend(g: &PermutationGraph, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let first = path[0];
        let last = *path.last().unwrap();
        for &(x, y) in &g.edges {
            if x != last {
                continue;
            }
            if y == first {
                if path.iter().any(|&v| g.in_t(v)) {
                    out.push(path.clone());
                }
            } else if y > first && !path.contains(&y) {
                path.push(y);
                extend(g, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for &v in &g.nodes {
        let mut path = alloc::vec![v];
        extend(g, &mut path, &mut out);
    }
    out
}

/// Bookkeeping GoLeft exposes for testing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoLeftReport {
    pub cycles: Vec<Vec<usize>>,
    pub attachments: usize,
    pub a: Vec<usize>,
}

/// Runs GoLeft over the snapshots `work` (indices into `snaps`), all with
/// one signature. Returns the dominated set `A`.
///
/// Loose extracted pieces of discarded snapshots go back to `residue` as
/// they are discarded; at separation every remaining loose piece does too.
pub fn goleft(
    ctx: &mut Ctx<'_>,
    agents: &[usize],
    snaps: &mut [Snapshot],
    work: Vec<usize>,
    residue: &mut Piece,
    cake: &Piece,
) -> Result<GoLeftReport> {
    let n = agents.len();
    let mut s: Vec<usize> = work;
    let mut graph = PermutationGraph::new(agents);
    let mut report = GoLeftReport::default();
    ctx.stats.goleft_calls += 1;
    ctx.oracle.event(|| format!("GOLEFT start agents {} working-set {}", fmt_agents(agents), s.len()));
    loop {
        if !graph.invariants_hold() {
            return bug("permutation graph invariants violated");
        }
        let cycle = match graph.find_cycle_with_t_node() {
            Some(c) => c,
            None => return bug("no cycle through a T node"),
        };
        exchange_along_cycle(ctx, &cycle, &s, snaps)?;
        graph.exchange(&cycle);
        ctx.oracle.event(|| format!("GOLEFT cycle {}", fmt_agents(&cycle)));
        report.cycles.push(cycle.clone());
        ctx.boundary(agents, cake, residue, &loose(snaps))?;

        let first = &snaps[s[0]];
        if let Some(k) = separating_class(&graph, &cycle, first) {
            report.a = separated_set(snaps, &s, k);
            if report.a.len() >= n {
                return bug("separation set contains every agent");
            }
            for snap in snaps.iter_mut() {
                *residue = residue.union(&snap.loose_pieces());
                for c in &mut snap.classes {
                    c.extractions.truncate(c.reach());
                    c.attached = c.extractions.len();
                }
            }
            ctx.stats.goleft_separations += 1;
            ctx.oracle.event(|| format!("GOLEFT separate A {}", fmt_agents(&report.a)));
            return Ok(report);
        }

        let i = *cycle.iter().find(|&&v| graph.in_t(v)).expect("cycle has a T node");
        let k = snaps[s[0]].class_held_by(i).expect("every agent holds a class");
        attach_next(ctx, agents, snaps, &mut s, k, residue)?;
        report.attachments += 1;
        let c = &snaps[s[0]].classes[k];
        let extractor = c.extractions[c.attached - 1].agent;
        graph.attach(i, extractor);
        if c.attached == n - 1 {
            graph.promote(i);
        }
        ctx.oracle.event(|| format!("GOLEFT attach class {} holder {} edge {}->{}", k + 1, i + 1, extractor + 1, i + 1));
        ctx.boundary(agents, cake, residue, &loose(snaps))?;
    }
}

/// Class held by a `T` node of `cycle` that has nothing left to attach.
pub fn separating_class(graph: &PermutationGraph, cycle: &[usize], snap: &Snapshot) -> Option<usize> {
    cycle.iter().filter(|&&v| graph.in_t(v)).find_map(|&v| {
        let k = snap.class_held_by(v)?;
        let c = &snap.classes[k];
        (c.attached == c.extractions.len()).then_some(k)
    })
}

/// Every agent that has held class `k` in some snapshot of `work`.
pub fn separated_set(snaps: &[Snapshot], work: &[usize], k: usize) -> Vec<usize> {
    let mut a: BTreeSet<usize> = BTreeSet::new();
    for &j in work {
        a.extend(snaps[j].classes[k].history.iter().copied());
    }
    a.into_iter().collect()
}

fn loose(snaps: &[Snapshot]) -> Vec<Piece> {
    snaps.iter().map(|s| s.loose_pieces()).collect()
}

fn fmt_agents(list: &[usize]) -> alloc::string::String {
    let parts: Vec<_> = list.iter().map(|a| format!("{}", a + 1)).collect();
    format!("{{{}}}", parts.join(","))
}

/// In every snapshot of `work`, each cycle node takes the class its
/// successor held. Shares follow and every agent's value of his holding
/// is checked to be unchanged.
pub fn exchange_along_cycle(ctx: &mut Ctx<'_>, cycle: &[usize], work: &[usize], snaps: &mut [Snapshot]) -> Result<()> {
    let m = cycle.len();
    if m == 1 {
        return Ok(());
    }
    for &j in work {
        let snap = &mut snaps[j];
        let before: Vec<(usize, Piece)> = snap.holdings();
        let held: Vec<usize> = cycle
            .iter()
            .map(|&v| snap.class_held_by(v).ok_or_else(|| Error::ProtocolBug("agent without class".into())))
            .collect::<Result<_>>()?;
        for (idx, &v) in cycle.iter().enumerate() {
            snap.give(held[(idx + 1) % m], v);
        }
        let after = snap.holdings();
        ctx.replace_holdings(&before, &after)?;
        for &v in cycle {
            let vals = ctx.oracle.valuations();
            let old = before.iter().find(|h| h.0 == v).map(|h| vals[v].value(&h.1)).unwrap_or_else(Rat::zero);
            let new = after.iter().find(|h| h.0 == v).map(|h| vals[v].value(&h.1)).unwrap_or_else(Rat::zero);
            ctx.stats.exchange_value_checks += 1;
            if old != new {
                return bug(format!("exchange changed agent {}'s value in snapshot {}", v + 1, snap.id));
            }
        }
    }
    ctx.stats.exchanges += 1;
    Ok(())
}

/// Attaches the next extraction of class `k` across the working set,
/// after the two reservation phases.
pub fn attach_next(
    ctx: &mut Ctx<'_>,
    agents: &[usize],
    snaps: &mut [Snapshot],
    s: &mut Vec<usize>,
    k: usize,
    residue: &mut Piece,
) -> Result<()> {
    let n = agents.len();
    let sample = snaps[s[0]].classes[k].clone();
    let l = sample.attached + 1;
    let holder = sample.holder;
    let expected = if l == 1 { sample.origin } else { sample.extractions[l - 2].agent };
    if holder != expected {
        return bug("holder is not the last attached extractor");
    }
    // Index order: original holder, extractors left to right, then the rest.
    let mut order = alloc::vec![sample.origin];
    order.extend(sample.extractions.iter().map(|e| e.agent));
    order.extend(agents.iter().copied().filter(|a| *a != sample.origin && !sample.extractions.iter().any(|e| e.agent == *a)));
    if order.len() != n {
        return bug("extractors are not distinct agents");
    }

    // Phase 1: agents l+1..n keep the snapshots where c_k with its
    // attachments is worth least to them.
    let choosers = &order[l..];
    let mut counts = Vec::new();
    for (idx, &o) in choosers.iter().enumerate() {
        let c = choosers.len() - idx;
        let q = ceil_div(s.len(), c + 1);
        let mut scored = Vec::with_capacity(s.len());
        for &j in s.iter() {
            let snap = &snaps[j];
            let own = snap.class_held_by(o).map(|h| snap.classes[h].realized()).unwrap_or_else(Piece::empty);
            let d = ctx.oracle.eval(o, &own)? - ctx.oracle.eval(o, &snap.classes[k].with_attachments())?;
            scored.push((d, j));
        }
        let taken = take_best(&mut scored, q);
        discard(snaps, &taken, residue, None);
        s.retain(|j| !taken.contains(j));
        counts.push(taken.len());
    }
    record(ctx, 1, counts, s.len(), 1)?;

    // Phase 2: agents 1..l take the snapshots where the next extraction is
    // worth most to them; those pieces are divided among them.
    let choosers = &order[..l];
    let mut counts = Vec::new();
    let mut aggregate = Piece::empty();
    for (idx, &r) in choosers.iter().enumerate() {
        let c = choosers.len() - idx;
        let q = ceil_div(n * s.len(), n * c + 1);
        let mut scored = Vec::with_capacity(s.len());
        for &j in s.iter() {
            let e = &snaps[j].classes[k].extractions[l - 1].piece;
            let v = if e.is_empty() { Rat::zero() } else { ctx.oracle.eval(r, e)? };
            scored.push((v, j));
        }
        let taken = take_best(&mut scored, q);
        for &j in &taken {
            aggregate = aggregate.union(&snaps[j].classes[k].extractions[l - 1].piece);
        }
        discard(snaps, &taken, residue, Some((k, l - 1)));
        s.retain(|j| !taken.contains(j));
        counts.push(taken.len());
    }
    record(ctx, 2, counts, s.len(), n)?;
    if s.is_empty() {
        return Err(Error::InsufficientSnapshots);
    }
    let group = order[..l].to_vec();
    ctx.oracle.event(|| format!("GOLEFT divide {} among {}", aggregate, fmt_agents(&group)));
    main_rec(ctx, &aggregate, &group)?;

    for &j in s.iter() {
        let snap = &mut snaps[j];
        let before = snap.holdings();
        snap.classes[k].attached += 1;
        let after = snap.holdings();
        ctx.replace_holdings(&before, &after)?;
    }
    ctx.stats.attachments += 1;
    Ok(())
}

/// The `q` best-scoring snapshots, earliest first on ties.
fn take_best(scored: &mut [(Rat, usize)], q: usize) -> Vec<usize> {
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.iter().take(q).map(|x| x.1).collect()
}

/// Freezes the listed snapshots and sends their loose extracted pieces to
/// the residue, except the one extraction named by `keep`.
fn discard(snaps: &mut [Snapshot], which: &[usize], residue: &mut Piece, keep: Option<(usize, usize)>) {
    for &j in which {
        let snap = &mut snaps[j];
        for (kk, c) in snap.classes.iter_mut().enumerate() {
            let reach = c.reach();
            for (idx, e) in c.extractions.iter().enumerate().skip(reach) {
                if keep == Some((kk, idx)) {
                    continue;
                }
                *residue = residue.union(&e.piece);
            }
            c.extractions.truncate(reach);
            c.attached = reach;
        }
    }
}

fn record(ctx: &mut Ctx<'_>, phase: u8, counts: Vec<usize>, remainder: usize, factor: usize) -> Result<()> {
    let ok = counts.iter().all(|&c| c >= factor * remainder);
    ctx.stats.quota_events.push(QuotaEvent { phase, counts, remainder, factor });
    if !ok {
        return bug("reservation quota below the required multiple of the remainder");
    }
    if remainder == 0 {
        return Err(Error::InsufficientSnapshots);
    }
    Ok(())
}
