//! Brute-force oracle suites run against the engine on small cases.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use cakecut::goleft::PermutationGraph;
use cakecut::subcore::{subcore, SubCoreInput};
use cakecut::verify::{find_dominated_set, is_neat, select_dominated_set};
use cakecut::{
    core, random_instance, AugmentedValue, Error, ImaginaryLedger, Infinitesimal, Oracle, Piece, Rat, Valuation,
};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub agreements: usize,
    /// Cases the brute force could not settle; they are not disagreements.
    pub undecided: usize,
    pub disagreements: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport { name, ..Default::default() }
    }

    pub fn agrees(&self) -> bool {
        self.disagreements.is_empty()
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "suite {}: {} cases, {} agree, {} undecided, {} disagree\n",
            self.name,
            self.cases,
            self.agreements,
            self.undecided,
            self.disagreements.len()
        );
        for d in self.disagreements.iter().take(10) {
            let _ = writeln!(s, "  {d}");
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Neat allocations.

/// A tiny SubCore case: single-interval pieces tiling the cake, agents
/// `0..agents` and physical benchmarks.
#[derive(Clone, Debug)]
pub struct TinyCase {
    pub vals: Vec<Valuation>,
    pub pieces: Vec<Piece>,
    pub benchmarks: Vec<Rat>,
}

pub fn tiny_case(seed: u64) -> TinyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let agents = rng.gen_range(1..=3usize);
    let m = rng.gen_range(agents + 1..=4usize);
    let vals = random_instance(agents, rng.gen_range(1..=4), seed);
    let grid = 12i64;
    let mut cuts: BTreeSet<i64> = BTreeSet::new();
    while cuts.len() < m - 1 {
        cuts.insert(rng.gen_range(1..grid));
    }
    let mut pts = vec![Rat::zero()];
    pts.extend(cuts.iter().map(|&c| Rat::new(c.into(), grid.into())));
    pts.push(Rat::from_integer(1.into()));
    let pieces: Vec<Piece> = pts.windows(2).map(|w| Piece::interval(w[0].clone(), w[1].clone()).unwrap()).collect();
    let raise = rng.gen_bool(0.5);
    let benchmarks = vals
        .iter()
        .map(|v| if raise { pieces.iter().map(|p| v.value(p)).min().unwrap() } else { Rat::zero() })
        .collect();
    TinyCase { vals, pieces, benchmarks }
}

/// Largest `x` in `[l, r]` with `V([x, r]) = t`.
fn right_margin(v: &Valuation, l: &Rat, r: &Rat, t: &Rat) -> Rat {
    let whole = v.value_between(l, r);
    let mut x = v.cut_point(l, &(whole - t)).expect("target within the piece");
    // Move across zero-density stretches: the share stays the same value
    // and gets smaller.
    loop {
        let seg = v.segments().iter().find(|s| s.left <= x && x < s.right);
        match seg {
            Some(s) if s.density.is_zero() && x < *r => x = if s.right < *r { s.right.clone() } else { r.clone() },
            _ => return x,
        }
    }
}

enum Fixpoint {
    Feasible(Vec<Piece>),
    Infeasible,
    Undecided,
}

/// Least own-values for the assignment `host[a]`: start from the lower
/// bounds and raise any agent who would envy another's minimal share. The
/// iterates never pass the least solution, so overshooting a host's value
/// proves infeasibility.
fn least_solution(case: &TinyCase, host: &[usize]) -> Fixpoint {
    let k = host.len();
    let free: Vec<usize> = (0..case.pieces.len()).filter(|p| !host.contains(p)).collect();
    let bounds = |a: usize| {
        let iv = &case.pieces[host[a]].intervals()[0];
        (iv.left().clone(), iv.right().clone())
    };
    let upper: Vec<Rat> = (0..k).map(|a| case.vals[a].value(&case.pieces[host[a]])).collect();
    let mut t: Vec<Rat> = (0..k)
        .map(|a| {
            free.iter().map(|&p| case.vals[a].value(&case.pieces[p])).fold(case.benchmarks[a].clone(), |m, v| m.max(v))
        })
        .collect();
    let share = |a: usize, t: &Rat| {
        let (l, r) = bounds(a);
        let x = right_margin(&case.vals[a], &l, &r, t);
        Piece::interval(x, r).unwrap()
    };
    for _ in 0..500 {
        if (0..k).any(|a| t[a] > upper[a]) {
            return Fixpoint::Infeasible;
        }
        let shares: Vec<Piece> = (0..k).map(|a| share(a, &t[a])).collect();
        let mut changed = false;
        for a in 0..k {
            for (b, s) in shares.iter().enumerate() {
                let v = case.vals[a].value(s);
                if b != a && v > t[a] {
                    t[a] = v;
                    changed = true;
                }
            }
        }
        if !changed {
            return Fixpoint::Feasible(shares);
        }
    }
    Fixpoint::Undecided
}

fn assignments(agents: usize, pieces: usize) -> Vec<Vec<usize>> {
    fn go(agents: usize, pieces: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == agents {
            out.push(cur.clone());
            return;
        }
        for p in 0..pieces {
            if !cur.contains(&p) {
                cur.push(p);
                go(agents, pieces, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(agents, pieces, &mut Vec::new(), &mut out);
    out
}

/// Whether a neat allocation meeting the benchmarks exists, with a witness
/// checked by [`is_neat`]. `None` when some assignment stayed undecided
/// and none succeeded.
pub fn neat_exists(case: &TinyCase) -> Option<bool> {
    let k = case.vals.len();
    let mut undecided = false;
    for host in assignments(k, case.pieces.len()) {
        match least_solution(case, &host) {
            Fixpoint::Feasible(shares) => {
                let triples: Vec<(usize, usize, Piece)> =
                    shares.into_iter().enumerate().map(|(a, s)| (a, host[a], s)).collect();
                let neat = is_neat(&case.pieces, &triples, &case.vals).unwrap_or(false);
                let meets = triples.iter().all(|(a, _, s)| case.vals[*a].value(s) >= case.benchmarks[*a]);
                if neat && meets {
                    return Some(true);
                }
            }
            Fixpoint::Infeasible => {}
            Fixpoint::Undecided => undecided = true,
        }
    }
    if undecided {
        None
    } else {
        Some(false)
    }
}

pub fn neat_suite(cases: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("subcore-vs-neat-enumerator");
    for c in 0..cases as u64 {
        let case = tiny_case(seed.wrapping_add(c));
        rep.cases += 1;
        let k = case.vals.len();
        let mut oracle = Oracle::new(case.vals.clone());
        let mut ledger = ImaginaryLedger::new();
        let pieces = case
            .pieces
            .iter()
            .map(|p| {
                let e = ledger.issue_epsilon(k);
                (p.clone(), ledger.register(Infinitesimal::symbol(e)))
            })
            .collect();
        let input = SubCoreInput {
            pieces,
            agents: (0..k).collect(),
            benchmarks: case.benchmarks.iter().cloned().map(AugmentedValue::physical).collect(),
        };
        let engine = subcore(&input, &mut oracle, &mut ledger);
        let engine_ok = match &engine {
            Ok(out) => {
                let triples: Vec<(usize, usize, Piece)> =
                    out.shares.iter().map(|s| (s.agent, s.piece_index, s.piece.clone())).collect();
                let neat = is_neat(&case.pieces, &triples, &case.vals).unwrap_or(false);
                let meets = out.shares.iter().all(|s| case.vals[s.agent].value(&s.piece) >= case.benchmarks[s.agent]);
                if !(neat && meets) {
                    rep.disagreements.push(format!("case {c}: subcore output fails neatness or a benchmark"));
                    continue;
                }
                true
            }
            Err(_) => false,
        };
        match (engine_ok, neat_exists(&case)) {
            (_, None) => rep.undecided += 1,
            (true, Some(true)) => rep.agreements += 1,
            (false, Some(false)) => rep.agreements += 1,
            (true, Some(false)) => rep.disagreements.push(format!("case {c}: subcore succeeded, enumerator found nothing")),
            (false, Some(true)) => {
                let e = engine.err().unwrap();
                rep.disagreements.push(format!("case {c}: subcore failed ({e}) but a neat allocation exists"))
            }
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// Dominated sets.

/// Every valid set under the same rule as the engine: nonempty, proper,
/// dominated by everyone outside it; then inclusion-minimal, smallest and
/// lexicographically greatest.
pub fn brute_dominated_set(dom: &dyn Fn(usize, usize) -> bool, agents: &[usize]) -> Option<Vec<usize>> {
    let m = agents.len();
    if m < 2 {
        return None;
    }
    let mut valid: Vec<Vec<usize>> = Vec::new();
    let mut subset = Vec::new();
    fn walk(
        i: usize,
        agents: &[usize],
        subset: &mut Vec<usize>,
        dom: &dyn Fn(usize, usize) -> bool,
        valid: &mut Vec<Vec<usize>>,
    ) {
        if i == agents.len() {
            if subset.is_empty() || subset.len() == agents.len() {
                return;
            }
            let outside: Vec<usize> = agents.iter().copied().filter(|a| !subset.contains(a)).collect();
            if outside.iter().all(|&o| subset.iter().all(|&s| dom(o, s))) {
                valid.push(subset.clone());
            }
            return;
        }
        walk(i + 1, agents, subset, dom, valid);
        subset.push(agents[i]);
        walk(i + 1, agents, subset, dom, valid);
        subset.pop();
    }
    walk(0, agents, &mut subset, dom, &mut valid);
    let is_sub = |a: &Vec<usize>, b: &Vec<usize>| a.len() < b.len() && a.iter().all(|x| b.contains(x));
    let mut minimal: Vec<Vec<usize>> =
        valid.iter().filter(|b| !valid.iter().any(|a| is_sub(a, b))).cloned().collect();
    for s in &mut minimal {
        s.sort_unstable();
    }
    minimal.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| b.cmp(a)));
    minimal.into_iter().next()
}

pub fn domination_suite(cases: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("find-dominated-set-vs-bipartitions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in 0..cases {
        let n = 2 + c % 5;
        // Allocation states from a few Core rounds.
        let vals = random_instance(n, 3, seed.wrapping_add(c as u64));
        let agents: Vec<usize> = (0..n).collect();
        let mut oracle = Oracle::new(vals.clone());
        let mut ledger = ImaginaryLedger::new();
        let mut shares = vec![Piece::empty(); n];
        let mut residue = Piece::whole();
        for _ in 0..rng.gen_range(1..=2 * n) {
            let cutter = rng.gen_range(0..n);
            match core(cutter, &agents, &residue, &mut oracle, &mut ledger) {
                Ok(out) => {
                    for (a, _, p) in &out.shares {
                        shares[*a] = shares[*a].union(p);
                    }
                    residue = out.leftover;
                }
                Err(Error::EmptyResidue) => {}
                Err(e) => {
                    rep.disagreements.push(format!("case {c}: core failed: {e}"));
                    break;
                }
            }
        }
        rep.cases += 1;
        let direct = |i: usize, j: usize| {
            let v = &vals[i];
            v.value(&shares[i]) - v.value(&shares[j]) - v.value(&residue) >= Rat::zero()
        };
        let expected = brute_dominated_set(&|i, j| i == j || direct(i, j), &agents);
        match find_dominated_set(&shares, &residue, &agents, &vals) {
            Ok(got) if got == expected => rep.agreements += 1,
            Ok(got) => rep.disagreements.push(format!("case {c}: engine {got:?}, brute force {expected:?}")),
            Err(e) => rep.disagreements.push(format!("case {c}: {e}")),
        }

        // The same rule on an arbitrary relation.
        rep.cases += 1;
        let m = 2 + rng.gen_range(0..5);
        let ids: Vec<usize> = (0..m).map(|x| 10 + 3 * x).collect();
        let density = rng.gen_range(0.2..0.95);
        let dom: Vec<Vec<bool>> = (0..m).map(|x| (0..m).map(|y| x == y || rng.gen_bool(density)).collect()).collect();
        let pos = |a: usize| ids.iter().position(|&b| b == a).unwrap();
        let expected = brute_dominated_set(&|i, j| dom[pos(i)][pos(j)], &ids);
        let got = select_dominated_set(&dom, &ids);
        if got == expected {
            rep.agreements += 1;
        } else {
            rep.disagreements.push(format!("relation case {c}: engine {got:?}, brute force {expected:?}"));
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// Permutation-graph cycles.

/// Every graph on `m` nodes meeting the invariants: `T′` a proper subset,
/// one in-edge on each `T` node, every node pointing at each `T′` node.
pub fn valid_graphs(m: usize) -> Vec<PermutationGraph> {
    let nodes: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    for mask in 0..(1u32 << m) - 1 {
        let t_prime: BTreeSet<usize> = (0..m).filter(|v| mask & (1 << v) != 0).collect();
        let t: Vec<usize> = (0..m).filter(|v| !t_prime.contains(v)).collect();
        let combos = m.pow(t.len() as u32);
        for mut code in 0..combos {
            let mut g = PermutationGraph::new(&nodes);
            g.edges.clear();
            for &v in &t {
                g.edges.insert((code % m, v));
                code /= m;
            }
            for &v in &t_prime {
                for &u in &nodes {
                    g.edges.insert((u, v));
                }
            }
            g.t_prime = t_prime.clone();
            out.push(g);
        }
    }
    out
}

/// Simple cycles through a `T` node, each rotated to start at its
/// smallest node.
fn exhaustive_cycles(g: &PermutationGraph) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let n = g.nodes.len();
    // All sequences of distinct nodes, by counting in base n.
    for len in 1..=n {
        let total = n.pow(len as u32);
        for mut code in 0..total {
            let mut seq = Vec::with_capacity(len);
            for _ in 0..len {
                seq.push(g.nodes[code % n]);
                code /= n;
            }
            let distinct: BTreeSet<usize> = seq.iter().copied().collect();
            if distinct.len() != len {
                continue;
            }
            let closed = (0..len).all(|i| g.edges.contains(&(seq[i], seq[(i + 1) % len])));
            if closed && seq.iter().any(|&v| !g.t_prime.contains(&v)) {
                out.insert(normalize(&seq));
            }
        }
    }
    out
}

fn normalize(cycle: &[usize]) -> Vec<usize> {
    let at = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap_or(0);
    let mut c = cycle.to_vec();
    c.rotate_left(at);
    c
}

pub fn cycle_suite() -> SuiteReport {
    let mut rep = SuiteReport::new("cycle-finder-vs-exhaustive");
    for m in 1..=4 {
        for (idx, g) in valid_graphs(m).into_iter().enumerate() {
            rep.cases += 1;
            if !g.invariants_hold() {
                rep.disagreements.push(format!("m={m} graph {idx}: generated graph fails the invariants"));
                continue;
            }
            let all = exhaustive_cycles(&g);
            match g.find_cycle_with_t_node() {
                Some(c) if all.contains(&normalize(&c)) => rep.agreements += 1,
                Some(c) => rep.disagreements.push(format!("m={m} graph {idx}: {c:?} is not a cycle with a T node")),
                None if all.is_empty() => rep.agreements += 1,
                None => rep.disagreements.push(format!("m={m} graph {idx}: finder missed {:?}", all.first())),
            }
        }
    }
    rep
}
