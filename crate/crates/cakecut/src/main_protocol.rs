//! The Main protocol: base cases, snapshot generation, band tightening,
//! extraction with discrepancy handling, GoLeft, conversion to domination
//! and recursion on the dominated agents.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::core_protocol::{core, CoreOutcome};
use crate::discrepancy::discrepancy;
use crate::error::{bug, Error, Result};
use crate::goleft::goleft;
use crate::piece::{is_partition, Piece, Rat};
use crate::snapshot::{extract_for_piece, find_isomorphic_subset, ExtractOutcome, Mode, Params, Snapshot};
use crate::tiebreak::ImaginaryLedger;
use crate::valuation::Oracle;
use crate::verify::{select_dominated_set, Allocation, DOMINATION_SEARCH_LIMIT};

/// Snapshot counts removed by one reservation phase of an attachment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuotaEvent {
    /// 1 or 2.
    pub phase: u8,
    /// One entry per chooser, in order.
    pub counts: Vec<usize>,
    /// Working-set size after the phase.
    pub remainder: usize,
    /// Required multiple of the remainder: 1 in phase 1, `n` in phase 2.
    pub factor: usize,
}

impl QuotaEvent {
    pub fn holds(&self) -> bool {
        self.counts.iter().all(|&c| c >= self.factor * self.remainder)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MainStats {
    pub core_rounds: u64,
    pub snapshots: u64,
    pub band_rounds: u64,
    pub resets: u64,
    pub discrepancy_calls: u64,
    /// `(D, D′)` of every exploited discrepancy.
    pub splits: Vec<(Vec<usize>, Vec<usize>)>,
    pub goleft_calls: u64,
    pub goleft_separations: u64,
    pub insufficient_retries: u64,
    pub attachments: u64,
    pub exchanges: u64,
    pub exchange_value_checks: u64,
    pub quota_events: Vec<QuotaEvent>,
    /// Sets `A` returned by GoLeft, with whether domination was reached
    /// after conversion.
    pub conversions: Vec<(Vec<usize>, bool)>,
    /// Dominated sets found directly after snapshot generation.
    pub dominations: Vec<Vec<usize>>,
    pub boundaries: u64,
    pub checkpoints: u64,
    pub max_depth: usize,
}

/// State shared by every level of one Main run.
pub struct Ctx<'a> {
    pub oracle: &'a mut Oracle,
    pub ledger: &'a mut ImaginaryLedger,
    pub params: Params,
    /// Everything allocated so far, by agent.
    pub shares: Vec<Piece>,
    pub origin: Piece,
    /// Latest allocation seen envy-free across all agents.
    pub checkpoint: Vec<Piece>,
    pub stats: MainStats,
    cutter_uses: Vec<u64>,
    depth: usize,
}

impl<'a> Ctx<'a> {
    pub fn new(oracle: &'a mut Oracle, ledger: &'a mut ImaginaryLedger, params: Params, origin: Piece) -> Self {
        let n = oracle.n();
        Ctx {
            oracle,
            ledger,
            params,
            shares: alloc::vec![Piece::empty(); n],
            origin,
            checkpoint: alloc::vec![Piece::empty(); n],
            stats: MainStats::default(),
            cutter_uses: alloc::vec![0; n],
            depth: 0,
        }
    }

    fn give(&mut self, agent: usize, piece: &Piece) {
        self.shares[agent] = self.shares[agent].union(piece);
    }

    /// Swaps one set of snapshot holdings for another.
    pub fn replace_holdings(&mut self, before: &[(usize, Piece)], after: &[(usize, Piece)]) -> Result<()> {
        for (a, p) in before {
            if !self.shares[*a].contains(p) {
                return bug("holding missing from the agent's share");
            }
            self.shares[*a] = self.shares[*a].subtract(p);
        }
        for (a, p) in after {
            self.give(*a, p);
        }
        Ok(())
    }

    /// Checks a phase boundary of the call over `agents` dividing `cake`:
    /// envy-freeness among the call's agents and that shares, residue and
    /// `pending` partition the cake. Records a checkpoint when the whole
    /// allocation is envy-free.
    pub fn boundary(&mut self, agents: &[usize], cake: &Piece, residue: &Piece, pending: &[Piece]) -> Result<()> {
        self.stats.boundaries += 1;
        let n = self.shares.len();
        let vals = self.oracle.valuations();
        let matrix: Vec<Vec<Rat>> =
            (0..n).map(|i| self.shares.iter().map(|s| vals[i].value(s)).collect()).collect();
        for &i in agents {
            for &j in agents {
                if matrix[i][j] > matrix[i][i] {
                    return bug(format!("agent {} envies agent {} at a phase boundary", i + 1, j + 1));
                }
            }
        }
        let mut parts: Vec<Piece> = self.shares.iter().map(|s| s.intersect(cake)).collect();
        parts.push(residue.clone());
        parts.extend(pending.iter().cloned());
        if !is_partition(&parts, cake) {
            return bug("shares, residue and set-aside pieces do not partition the cake");
        }
        let global_ef = (0..n).all(|i| (0..n).all(|j| matrix[i][j] <= matrix[i][i]));
        if global_ef && is_partition(&self.shares, &self.shares.iter().fold(Piece::empty(), |a, s| a.union(s))) {
            self.checkpoint = self.shares.clone();
            self.stats.checkpoints += 1;
        }
        Ok(())
    }

    /// One Core run whose shares join the allocation.
    pub fn core_round(&mut self, cutter: usize, agents: &[usize], residue: &mut Piece) -> Result<CoreOutcome> {
        let out = core(cutter, agents, residue, self.oracle, self.ledger)?;
        for (a, _, p) in &out.shares {
            self.give(*a, p);
        }
        *residue = out.leftover.clone();
        self.cutter_uses[cutter] += 1;
        self.stats.core_rounds += 1;
        Ok(out)
    }

    /// Core with the least-used cutter among `candidates` that values the
    /// residue, lowest index on ties. `None` when nobody does.
    pub fn core_round_least_used(
        &mut self,
        candidates: &[usize],
        agents: &[usize],
        residue: &mut Piece,
    ) -> Result<Option<CoreOutcome>> {
        let mut order: Vec<usize> = candidates.to_vec();
        order.sort_by_key(|&a| (self.cutter_uses[a], a));
        for c in order {
            match self.core_round(c, agents, residue) {
                Err(Error::EmptyResidue) => continue,
                other => return other.map(Some),
            }
        }
        Ok(None)
    }

    pub fn eval_all(&mut self, agents: &[usize], piece: &Piece) -> Result<Vec<Rat>> {
        agents
            .iter()
            .map(|&a| if piece.is_empty() { Ok(Rat::zero()) } else { self.oracle.eval(a, piece) })
            .collect()
    }

    /// `dom[x][y]`: `agents[x]` dominates `agents[y]` w.r.t. `residue`,
    /// measured with Eval queries.
    pub fn domination_matrix(&mut self, agents: &[usize], residue: &Piece) -> Result<Vec<Vec<bool>>> {
        let m = agents.len();
        let mut dom = alloc::vec![alloc::vec![true; m]; m];
        for x in 0..m {
            let i = agents[x];
            let own = self.oracle.eval(i, &self.shares[i].clone())?;
            let vr = if residue.is_empty() { Rat::zero() } else { self.oracle.eval(i, residue)? };
            for y in 0..m {
                if x != y {
                    let other = self.oracle.eval(i, &self.shares[agents[y]].clone())?;
                    dom[x][y] = own >= other + &vr;
                }
            }
        }
        Ok(dom)
    }
}

/// What a Main run produced: the full allocation, or on failure the last
/// allocation that was envy-free, with the error.
#[derive(Clone, Debug)]
pub struct MainOutcome {
    pub allocation: Allocation,
    pub stats: MainStats,
    pub error: Option<Error>,
}

/// Runs Main over every agent of the oracle, dividing `cake`.
pub fn run_main(oracle: &mut Oracle, ledger: &mut ImaginaryLedger, params: &Params, cake: &Piece) -> MainOutcome {
    if params.budget.is_some() {
        oracle.set_budget(params.budget);
    }
    let n = oracle.n();
    let agents: Vec<usize> = (0..n).collect();
    let mut ctx = Ctx::new(oracle, ledger, params.for_agents(n), cake.clone());
    let result = main_rec(&mut ctx, cake, &agents).and_then(|_| {
        let allocated = ctx.shares.iter().fold(Piece::empty(), |a, s| a.union(s));
        let alloc = Allocation { shares: ctx.shares.clone(), residue: cake.subtract(&allocated), origin: cake.clone() };
        if !alloc.is_complete() {
            return bug("Main finished with cake left over");
        }
        Ok(alloc)
    });
    match result {
        Ok(allocation) => MainOutcome { allocation, stats: ctx.stats, error: None },
        Err(e) => {
            let allocated = ctx.checkpoint.iter().fold(Piece::empty(), |a, s| a.union(s));
            let allocation =
                Allocation { shares: ctx.checkpoint.clone(), residue: cake.subtract(&allocated), origin: cake.clone() };
            MainOutcome { allocation, stats: ctx.stats, error: Some(e) }
        }
    }
}

/// Main over `agents` on `cake`, allocating into `ctx.shares`.
pub fn main_rec(ctx: &mut Ctx<'_>, cake: &Piece, agents: &[usize]) -> Result<()> {
    if cake.is_empty() || agents.is_empty() {
        return Ok(());
    }
    ctx.depth += 1;
    ctx.stats.max_depth = ctx.stats.max_depth.max(ctx.depth);
    ctx.oracle.event(|| format!("MAIN enter agents {} cake {}", fmt_set(agents), cake));
    let result = main_body(ctx, cake, agents);
    ctx.depth -= 1;
    result
}

fn main_body(ctx: &mut Ctx<'_>, cake: &Piece, agents: &[usize]) -> Result<()> {
    let vr = ctx.eval_all(agents, cake)?;
    if vr.iter().all(|v| v.is_zero()) {
        ctx.give(agents[0], cake);
        return ctx.boundary(agents, cake, &Piece::empty(), &[]);
    }
    match agents.len() {
        1 => {
            ctx.give(agents[0], cake);
            ctx.boundary(agents, cake, &Piece::empty(), &[])
        }
        2 => {
            for (a, p) in divide_and_choose(cake, agents[0], agents[1], ctx.oracle)? {
                ctx.give(a, &p);
            }
            ctx.stats.core_rounds += 1;
            ctx.boundary(agents, cake, &Piece::empty(), &[])
        }
        3 => {
            let mut residue = cake.clone();
            ctx.core_round_least_used(agents, agents, &mut residue)?;
            ctx.boundary(agents, cake, &residue, &[])?;
            if !residue.is_empty() {
                for (a, p) in selfridge_conway(&residue, [agents[0], agents[1], agents[2]], ctx.oracle)? {
                    ctx.give(a, &p);
                }
            }
            ctx.boundary(agents, cake, &Piece::empty(), &[])
        }
        m if m > DOMINATION_SEARCH_LIMIT => Err(Error::TooManyAgents),
        _ => main_general(ctx, cake, agents),
    }
}

fn fmt_set(list: &[usize]) -> String {
    let parts: Vec<_> = list.iter().map(|a| format!("{}", a + 1)).collect();
    format!("{{{}}}", parts.join(","))
}

fn loose(snaps: &[Snapshot]) -> Vec<Piece> {
    snaps.iter().map(|s| s.loose_pieces()).collect()
}

enum Pass {
    Ready,
    Reset,
    Split { e: Piece, d: Vec<usize>, d_prime: Vec<usize> },
}

fn main_general(ctx: &mut Ctx<'_>, cake: &Piece, agents: &[usize]) -> Result<()> {
    let n = agents.len();
    let params = ctx.params.for_agents(n);
    let target = params.working_set_target();
    let mut residue = cake.clone();
    let mut snaps: Vec<Snapshot> = Vec::new();
    let mut want = target.unwrap_or(usize::MAX);
    loop {
        let vr = ctx.eval_all(agents, &residue)?;
        if vr.iter().all(|v| v.is_zero()) {
            // Worthless to everybody: any assignment keeps envy-freeness.
            for s in &mut snaps {
                residue = residue.union(&s.clear_extractions());
            }
            ctx.give(agents[0], &residue);
            return ctx.boundary(agents, cake, &Piece::empty(), &[]);
        }

        // Snapshot generation, or plain residue shrinking once the store is
        // full.
        if snaps.len() < want.min(params.snapshot_cap) {
            while snaps.len() < want.min(params.snapshot_cap) && !residue.is_empty() {
                let Some(out) = ctx.core_round_least_used(agents, agents, &mut residue)? else { break };
                let id = snaps.len();
                snaps.push(Snapshot::from_core(id, &out, ctx.oracle)?);
                ctx.stats.snapshots += 1;
                ctx.oracle.event(|| format!("SNAPSHOT {} cutter {}", id + 1, out.cutter + 1));
                ctx.boundary(agents, cake, &residue, &[])?;
            }
        } else {
            for _ in 0..n {
                if residue.is_empty() || ctx.core_round_least_used(agents, agents, &mut residue)?.is_none() {
                    break;
                }
                ctx.boundary(agents, cake, &residue, &[])?;
            }
        }
        if residue.is_empty() {
            return ctx.boundary(agents, cake, &residue, &[]);
        }

        tighten_band(ctx, &params, agents, cake, &snaps, &mut residue)?;
        if residue.is_empty() {
            return ctx.boundary(agents, cake, &residue, &[]);
        }

        let dom = ctx.domination_matrix(agents, &residue)?;
        if let Some(a) = select_dominated_set(&dom, agents) {
            ctx.stats.dominations.push(a.clone());
            ctx.oracle.event(|| format!("DOMINATED {}", fmt_set(&a)));
            return main_rec(ctx, &residue, &a);
        }

        match extraction_pass(ctx, &params, agents, cake, &mut snaps, &mut residue)? {
            Pass::Split { e, d, d_prime } => {
                ctx.stats.splits.push((d.clone(), d_prime.clone()));
                main_rec(ctx, &e, &d)?;
                return main_rec(ctx, &residue, &d_prime);
            }
            Pass::Reset => {
                ctx.stats.resets += 1;
                continue;
            }
            Pass::Ready => {}
        }

        let class = target.and_then(|t| find_isomorphic_subset(&snaps, t));
        let Some(class) = class else {
            for s in &mut snaps {
                residue = residue.union(&s.clear_extractions());
            }
            want = snaps.len() + target.unwrap_or(0).max(1);
            continue;
        };
        for (j, s) in snaps.iter_mut().enumerate() {
            if !class.contains(&j) {
                residue = residue.union(&s.clear_extractions());
            }
        }
        ctx.boundary(agents, cake, &residue, &loose(&snaps))?;

        let saved = (ctx.shares.clone(), ctx.checkpoint.clone(), snaps.clone(), residue.clone());
        match goleft(ctx, agents, &mut snaps, class, &mut residue, cake) {
            Ok(report) => {
                snaps.clear();
                want = target.unwrap_or(usize::MAX);
                ctx.boundary(agents, cake, &residue, &[])?;
                let reached = convert(ctx, &params, agents, cake, &mut residue, &report.a)?;
                ctx.stats.conversions.push((report.a.clone(), reached));
                if reached {
                    return main_rec(ctx, &residue, &report.a);
                }
            }
            Err(Error::InsufficientSnapshots) => {
                ctx.stats.insufficient_retries += 1;
                ctx.shares = saved.0;
                ctx.checkpoint = saved.1;
                snaps = saved.2;
                residue = saved.3;
                for s in &mut snaps {
                    residue = residue.union(&s.clear_extractions());
                }
                want = snaps.len() + target.unwrap_or(0);
                ctx.boundary(agents, cake, &residue, &[])?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Runs Core with agent `i` as cutter while some bonus of `i` lies strictly
/// inside the band `(V_i(R)·s², V_i(R)·√s)`.
fn tighten_band(
    ctx: &mut Ctx<'_>,
    params: &Params,
    agents: &[usize],
    cake: &Piece,
    snaps: &[Snapshot],
    residue: &mut Piece,
) -> Result<()> {
    let mut rounds = 0usize;
    let mut last: Vec<Option<Rat>> = alloc::vec![None; agents.len()];
    loop {
        let vr = ctx.eval_all(agents, residue)?;
        let mut hit = None;
        'find: for (x, &i) in agents.iter().enumerate() {
            for s in snaps {
                for k in 0..s.classes.len() {
                    if params.in_band(&s.bonus(i, k)?, &vr[x]) {
                        hit = Some((x, i));
                        break 'find;
                    }
                }
            }
        }
        let Some((x, i)) = hit else { return Ok(()) };
        if let Some(prev) = &last[x] {
            if vr[x] >= *prev {
                return bug("cutter's residue value did not shrink");
            }
        }
        last[x] = Some(vr[x].clone());
        if rounds >= params.round_cap {
            return Err(Error::BudgetExhausted);
        }
        ctx.core_round(i, agents, residue)?;
        ctx.stats.band_rounds += 1;
        rounds += 1;
        ctx.boundary(agents, cake, residue, &[])?;
        if residue.is_empty() {
            return Ok(());
        }
    }
}

fn extraction_pass(
    ctx: &mut Ctx<'_>,
    params: &Params,
    agents: &[usize],
    cake: &Piece,
    snaps: &mut [Snapshot],
    residue: &mut Piece,
) -> Result<Pass> {
    let vr = ctx.eval_all(agents, residue)?;
    for j in 0..snaps.len() {
        for k in 0..snaps[j].classes.len() {
            match extract_for_piece(&snaps[j], k, residue, &vr, params, ctx.oracle)? {
                ExtractOutcome::Extracted(list) => {
                    if ctx.oracle.tracing() {
                        for e in &list {
                            let (id, agent, piece) = (snaps[j].id, e.agent, e.piece.clone());
                            ctx.oracle.event(|| format!("EXTRACT snapshot {} class {} agent {} {}", id + 1, k + 1, agent + 1, piece));
                        }
                    }
                    snaps[j].classes[k].extractions = list;
                }
                ExtractOutcome::Discrepant { piece, trimmer, bonus, .. } => {
                    for s in snaps.iter_mut() {
                        *residue = residue.union(&s.clear_extractions());
                    }
                    *residue = residue.subtract(&piece);
                    ctx.stats.discrepancy_calls += 1;
                    let out = discrepancy(ctx, params, agents, cake, &piece, trimmer, &bonus, residue)?;
                    if out.flag {
                        return Ok(Pass::Split { e: piece, d: out.d, d_prime: out.d_prime });
                    }
                    *residue = residue.union(&piece);
                    ctx.boundary(agents, cake, residue, &[])?;
                    return Ok(Pass::Reset);
                }
            }
        }
    }
    ctx.boundary(agents, cake, residue, &loose(snaps))?;
    Ok(Pass::Ready)
}

/// Core rounds with rotating cutters until every agent outside `a`
/// dominates every agent in `a`. Returns whether that was reached.
pub fn convert(
    ctx: &mut Ctx<'_>,
    params: &Params,
    agents: &[usize],
    cake: &Piece,
    residue: &mut Piece,
    a: &[usize],
) -> Result<bool> {
    let mut rounds = 0usize;
    loop {
        let dom = ctx.domination_matrix(agents, residue)?;
        let done = agents.iter().enumerate().all(|(x, i)| {
            a.contains(i) || agents.iter().enumerate().all(|(y, j)| !a.contains(j) || dom[x][y])
        });
        if done {
            return Ok(true);
        }
        if rounds >= params.round_cap || residue.is_empty() {
            return Ok(false);
        }
        if ctx.core_round_least_used(agents, agents, residue)?.is_none() {
            return Ok(false);
        }
        rounds += 1;
        ctx.boundary(agents, cake, residue, &[])?;
    }
}

/// Splits `piece` into `parts` pieces `agent` values equally, left to
/// right. A piece the agent does not value is split by length instead.
pub fn split_equal(agent: usize, piece: &Piece, parts: usize, oracle: &mut Oracle) -> Result<Vec<Piece>> {
    let total = if piece.is_empty() { Rat::zero() } else { oracle.eval(agent, piece)? };
    let mut out = Vec::with_capacity(parts);
    let mut rest = piece.clone();
    for k in 0..parts {
        if k + 1 == parts {
            out.push(rest.clone());
            break;
        }
        let remaining = (parts - k) as i64;
        let x = if total.is_zero() {
            length_cut(&rest, &(rest.measure() / Rat::from_integer(remaining.into())))
        } else {
            let share = &total / Rat::from_integer((parts as i64).into());
            oracle.cut_in_piece(agent, &rest, &share)?
        };
        out.push(rest.left_of(&x));
        rest = rest.right_of(&x);
    }
    Ok(out)
}

/// Point splitting off a left part of the given length.
fn length_cut(piece: &Piece, length: &Rat) -> Rat {
    let mut rem = length.clone();
    for iv in piece.intervals() {
        let l = iv.length();
        if l >= rem {
            return iv.left() + rem;
        }
        rem -= l;
    }
    piece.right_extreme().cloned().unwrap_or_else(Rat::zero)
}

/// Divide and choose: `cutter` halves the cake by his own measure and
/// `chooser` takes the half he prefers, the left one on ties.
pub fn divide_and_choose(cake: &Piece, cutter: usize, chooser: usize, oracle: &mut Oracle) -> Result<Vec<(usize, Piece)>> {
    let halves = split_equal(cutter, cake, 2, oracle)?;
    let l = oracle.eval(chooser, &halves[0])?;
    let r = oracle.eval(chooser, &halves[1])?;
    oracle.event(|| format!("DIVIDE cutter {} halves {} {}", cutter + 1, halves[0], halves[1]));
    let (mine, theirs) = if l >= r { (0, 1) } else { (1, 0) };
    let out = alloc::vec![(cutter, halves[theirs].clone()), (chooser, halves[mine].clone())];
    check_local_ef(&out, oracle)?;
    Ok(out)
}

/// The Selfridge–Conway procedure for three agents; `agents[0]` divides.
pub fn selfridge_conway(cake: &Piece, agents: [usize; 3], oracle: &mut Oracle) -> Result<Vec<(usize, Piece)>> {
    let [p1, p2, p3] = agents;
    let thirds = split_equal(p1, cake, 3, oracle)?;
    let mut v2 = Vec::with_capacity(3);
    for t in &thirds {
        v2.push(oracle.eval(p2, t)?);
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| v2[b].cmp(&v2[a]).then(a.cmp(&b)));
    let (top, second) = (order[0], order[1]);
    let mut pieces = thirds.clone();
    let mut trimmed: Option<usize> = None;
    let mut leftover = Piece::empty();
    if v2[top] > v2[second] {
        let excess = &v2[top] - &v2[second];
        let x = oracle.cut_in_piece(p2, &thirds[top], &excess)?;
        leftover = thirds[top].left_of(&x);
        pieces[top] = thirds[top].right_of(&x);
        trimmed = Some(top);
    }
    oracle.event(|| {
        let list: Vec<_> = pieces.iter().map(|p| format!("{p}")).collect();
        format!("SC pieces {} trimmings {}", list.join(" "), leftover)
    });
    let best = |agent: usize, avail: &[usize], oracle: &mut Oracle| -> Result<usize> {
        let mut pick = avail[0];
        let mut pv = oracle.eval(agent, &pieces[pick])?;
        for &k in &avail[1..] {
            let v = oracle.eval(agent, &pieces[k])?;
            if v > pv {
                pick = k;
                pv = v;
            }
        }
        Ok(pick)
    };
    let mut avail: Vec<usize> = (0..3).collect();
    let c3 = best(p3, &avail, oracle)?;
    avail.retain(|&k| k != c3);
    let c2 = match trimmed {
        Some(t) if avail.contains(&t) => t,
        _ => best(p2, &avail, oracle)?,
    };
    avail.retain(|&k| k != c2);
    let c1 = avail[0];
    let mut out = alloc::vec![(p1, pieces[c1].clone()), (p2, pieces[c2].clone()), (p3, pieces[c3].clone())];
    if let Some(t) = trimmed {
        if !leftover.is_empty() {
            let (taker, other) = if c2 == t { (p2, p3) } else { (p3, p2) };
            let parts = split_equal(other, &leftover, 3, oracle)?;
            let mut left: Vec<usize> = (0..3).collect();
            let pick = |agent: usize, left: &mut Vec<usize>, oracle: &mut Oracle| -> Result<usize> {
                let mut choice = left[0];
                let mut cv = oracle.eval(agent, &parts[choice])?;
                for &k in &left[1..] {
                    let v = oracle.eval(agent, &parts[k])?;
                    if v > cv {
                        choice = k;
                        cv = v;
                    }
                }
                left.retain(|&k| k != choice);
                Ok(choice)
            };
            let a = pick(taker, &mut left, oracle)?;
            let b = pick(p1, &mut left, oracle)?;
            let c = left[0];
            for (agent, k) in [(taker, a), (p1, b), (other, c)] {
                let slot = out.iter_mut().find(|s| s.0 == agent).unwrap();
                slot.1 = slot.1.union(&parts[k]);
            }
        }
    }
    check_local_ef(&out, oracle)?;
    Ok(out)
}

fn check_local_ef(out: &[(usize, Piece)], oracle: &Oracle) -> Result<()> {
    let vals = oracle.valuations();
    for (i, own) in out {
        let mine = vals[*i].value(own);
        for (j, other) in out {
            if i != j && vals[*i].value(other) > mine {
                return bug(format!("agent {} envies agent {} in a base case", i + 1, j + 1));
            }
        }
    }
    Ok(())
}

/// Whether Main would run the full machinery for `n` agents under `mode`.
pub fn uses_general_case(n: usize, _mode: Mode) -> bool {
    n >= 4
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::piece::{int, rat};
    use crate::valuation::{random_instance, Valuation};
    use crate::verify::{conservation, is_envy_free, is_proportional};

    #[test]
    fn divide_and_choose_example() {
        let chooser = Valuation::from_breaks(&[rat(1, 2)], &[int(2), int(0)]).unwrap();
        let mut oracle = Oracle::new(alloc::vec![Valuation::uniform(), chooser]);
        let out = divide_and_choose(&Piece::whole(), 0, 1, &mut oracle).unwrap();
        assert_eq!(out[1].1, Piece::interval(int(0), rat(1, 2)).unwrap());
        assert_eq!(out[0].1, Piece::interval(rat(1, 2), int(1)).unwrap());
    }

    #[test]
    fn selfridge_conway_identical_gives_thirds() {
        let mut oracle = Oracle::new(alloc::vec![Valuation::uniform(); 3]);
        let out = selfridge_conway(&Piece::whole(), [0, 1, 2], &mut oracle).unwrap();
        for (_, p) in &out {
            assert_eq!(p.measure(), rat(1, 3));
        }
    }

    fn full_run(vals: Vec<Valuation>) -> MainOutcome {
        let n = vals.len();
        let mut oracle = Oracle::new(vals);
        let mut ledger = ImaginaryLedger::new();
        run_main(&mut oracle, &mut ledger, &Params::adaptive(n), &Piece::whole())
    }

    #[test]
    fn single_agent_gets_everything() {
        let out = full_run(alloc::vec![Valuation::uniform()]);
        assert_eq!(out.allocation.shares[0], Piece::whole());
    }

    #[test]
    fn identical_agents_finish_in_one_round() {
        for n in 2..=6 {
            let out = full_run(alloc::vec![Valuation::uniform(); n]);
            assert!(out.error.is_none());
            assert_eq!(out.stats.core_rounds, 1);
            assert!(out.allocation.is_complete());
        }
    }

    #[test]
    fn random_runs_are_complete_and_envy_free() {
        for seed in 0..6u64 {
            let n = 2 + (seed as usize % 4);
            let vals = random_instance(n, 3, seed);
            let out = full_run(vals.clone());
            assert_eq!(out.error, None, "seed {seed}");
            assert!(out.allocation.is_complete());
            assert!(is_envy_free(&out.allocation, &vals));
            assert!(is_proportional(&out.allocation, &vals));
            assert!(conservation(&out.allocation));
        }
    }

    #[test]
    fn split_equal_by_length_when_worthless() {
        let v = Valuation::from_breaks(&[rat(1, 2)], &[int(0), int(2)]).unwrap();
        let mut oracle = Oracle::new(alloc::vec![v]);
        let parts = split_equal(0, &Piece::interval(int(0), rat(1, 2)).unwrap(), 2, &mut oracle).unwrap();
        assert_eq!(parts[0], Piece::interval(int(0), rat(1, 4)).unwrap());
    }
}
