//! One PASS/FAIL line per acceptance criterion.

#[path = "../../cakecut/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use cakecut::main_protocol::{divide_and_choose, selfridge_conway};
use cakecut::partial::{connected_pieces, proportional_ef_partial};
use cakecut::snapshot::{check_residue_stability, check_snapshot_pigeonhole, Tower};
use cakecut::verify::{conservation, is_envy_free, is_proportional, Allocation};
use cakecut::*;
use cakecut_cli::oracle;
use num_bigint::BigUint;
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn from_pairs(n: usize, out: Vec<(usize, Piece)>) -> Allocation {
    let mut a = Allocation::fresh(n, Piece::whole());
    for (i, p) in out {
        a.shares[i] = p;
    }
    let taken = a.shares.iter().fold(Piece::empty(), |acc, p| acc.union(p));
    a.residue = Piece::whole().subtract(&taken);
    a
}

fn full_fair(a: &Allocation, vals: &[Valuation]) -> bool {
    a.is_complete() && is_envy_free(a, vals) && is_proportional(a, vals) && conservation(a)
}

fn c1() -> Outcome {
    let start = Instant::now();
    let seeds = 200;
    for seed in 0..seeds {
        let vals = random_instance(2, 1 + (seed % 6) as usize, seed);
        let mut oracle = Oracle::new(vals.clone());
        let out = divide_and_choose(&Piece::whole(), 0, 1, &mut oracle).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(full_fair(&from_pairs(2, out), &vals), || format!("divide-choose seed {seed}"))?;

        let vals = random_instance(3, 1 + (seed % 6) as usize, seed);
        let mut oracle = Oracle::new(vals.clone());
        let out =
            selfridge_conway(&Piece::whole(), [0, 1, 2], &mut oracle).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(full_fair(&from_pairs(3, out), &vals), || format!("selfridge-conway seed {seed}"))?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("{seeds} seeds each, {t:.2?}"))
}

fn c2() -> Outcome {
    let mut runs = 0;
    for n in 3..=7usize {
        let agents: Vec<usize> = (0..n).collect();
        for seed in 0..100u64 {
            let vals = random_instance(n, 2 + (seed % 5) as usize, 1000 * n as u64 + seed);
            let cutter = (seed as usize) % n;
            let mut oracle = Oracle::new(vals.clone());
            let mut ledger = ImaginaryLedger::new();
            let out = core(cutter, &agents, &Piece::whole(), &mut oracle, &mut ledger)
                .map_err(|e| format!("n={n} seed {seed}: {e}"))?;
            let mut a = Allocation::fresh(n, Piece::whole());
            for (i, _, p) in &out.shares {
                a.shares[*i] = p.clone();
            }
            a.residue = out.leftover.clone();
            ensure(is_envy_free(&a, &vals) && conservation(&a), || format!("n={n} seed {seed}: not EF"))?;
            ensure(out.holds_full_piece(cutter), || format!("n={n} seed {seed}: cutter trimmed"))?;
            ensure(agents.iter().any(|&i| i != cutter && out.holds_full_piece(i)), || {
                format!("n={n} seed {seed}: no non-cutter holds a full piece")
            })?;
            let v = &vals[cutter];
            let bound = v.value(&out.residue) * rat(n as i64 - 2, n as i64);
            ensure(v.value(&out.leftover) <= bound, || format!("n={n} seed {seed}: leftover too large"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} Core runs"))
}

fn c3() -> Outcome {
    let rep = oracle::neat_suite(300, 0);
    ensure(rep.agrees() && rep.undecided == 0 && rep.cases >= 100, || rep.text())?;
    Ok(format!("{} tiny instances, {} agree", rep.cases, rep.agreements))
}

fn c4() -> Outcome {
    let mut runs = 0;
    let mut worst = 0u64;
    for n in 2..=7usize {
        let agents: Vec<usize> = (0..n).collect();
        let nn = BigUint::from(n);
        let bound = &nn * nn.pow(3) * (&nn * &nn).pow(n as u32);
        for seed in 0..100u64 {
            let vals = random_instance(n, 2 + (seed % 4) as usize, 7 * n as u64 + 31 * seed);
            let mut oracle = Oracle::new(vals.clone());
            let mut ledger = ImaginaryLedger::new();
            let out = proportional_ef_partial(&agents, &Piece::whole(), &mut oracle, &mut ledger)
                .map_err(|e| format!("n={n} seed {seed}: {e}"))?;
            let a = &out.allocation;
            ensure(is_proportional(a, &vals) && is_envy_free(a, &vals) && conservation(a), || {
                format!("n={n} seed {seed}: not proportional and EF")
            })?;
            let q = oracle.counter().total();
            ensure(BigUint::from(q) <= bound, || format!("n={n} seed {seed}: {q} queries"))?;
            worst = worst.max(q);
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, at most {worst} queries"))
}

fn c5() -> Outcome {
    let mut runs = 0;
    for n in 1..=8usize {
        let agents: Vec<usize> = (0..n).collect();
        for seed in 0..100u64 {
            let vals = random_instance(n, 1 + (seed % 5) as usize, 500 * n as u64 + seed);
            let mut oracle = Oracle::new(vals.clone());
            let mut ledger = ImaginaryLedger::new();
            let out = connected_pieces(&agents, &Piece::whole(), &mut oracle, &mut ledger)
                .map_err(|e| format!("n={n} seed {seed}: {e}"))?;
            let a = &out.allocation;
            for i in 0..n {
                ensure(a.shares[i].is_connected(), || format!("n={n} seed {seed}: agent {} split", i + 1))?;
                let worth = vals[i].value(&a.shares[i]) * int(3 * n as i64);
                ensure(worth >= *vals[i].total(), || format!("n={n} seed {seed}: agent {} short", i + 1))?;
            }
            ensure(is_envy_free(a, &vals) && conservation(a), || format!("n={n} seed {seed}: not EF"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs"))
}

/// Two-block members `(n, split, k, working set, threshold, seed)` found by
/// search; each splits on its first discrepancy along the blocks.
const TWO_BLOCK: &[(usize, usize, usize, usize, (i64, i64), u64)] = &[
    (4, 1, 3, 1, (1, 2), 0),
    (4, 1, 3, 2, (1, 4), 2),
    (4, 1, 2, 2, (1, 2), 10),
    (5, 2, 2, 1, (1, 4), 10),
    (5, 2, 2, 1, (1, 2), 22),
    (5, 3, 2, 1, (1, 4), 10),
    (5, 1, 2, 1, (1, 2), 10),
    (6, 2, 2, 1, (1, 2), 4),
    (6, 2, 2, 1, (1, 4), 22),
    (6, 1, 3, 1, (1, 2), 0),
    (6, 2, 3, 1, (1, 2), 15),
];

fn c6() -> Outcome {
    for &(n, split, k, w, (p, q), seed) in TWO_BLOCK {
        let tag = format!("n={n} split={split} k={k} seed={seed}");
        let vals = common::two_block(n, split, k, seed);
        let mut params = Params::adaptive(n).with_threshold(rat(p, q)).unwrap();
        params.working_set = Some(w);
        let mut oracle = Oracle::new(vals.clone());
        let mut ledger = ImaginaryLedger::new();
        let out = run_main(&mut oracle, &mut ledger, &params, &Piece::whole());
        ensure(out.error.is_none(), || format!("{tag}: {:?}", out.error))?;
        let groups = ((0..split).collect::<Vec<_>>(), (split..n).collect::<Vec<_>>());
        let (d, dp) = out.stats.splits.first().cloned().ok_or_else(|| format!("{tag}: no discrepancy split"))?;
        ensure((d.clone(), dp.clone()) == groups || (dp.clone(), d.clone()) == groups, || {
            format!("{tag}: split {d:?}/{dp:?}")
        })?;
        ensure(full_fair(&out.allocation, &vals), || format!("{tag}: final allocation not EF"))?;
    }
    Ok(format!("{} family members", TWO_BLOCK.len()))
}

/// One random base valuation shared by all agents, each density nudged by
/// `0` or `1/100`.
fn perturbed(n: usize, k: usize, seed: u64) -> Vec<Valuation> {
    let base = random_instance(1, k, seed).remove(0);
    let mut r = common::rng(seed);
    (0..n)
        .map(|_| {
            let segs = base
                .segments()
                .iter()
                .map(|s| Segment {
                    left: s.left.clone(),
                    right: s.right.clone(),
                    density: &s.density + rat(r.gen_range(0..=1), 100),
                })
                .collect();
            Valuation::new(segs).unwrap()
        })
        .collect()
}

fn c7() -> Outcome {
    let mut boundaries = 0;
    for n in 2..=8usize {
        for seed in 0..5u64 {
            let v = random_instance(1, 3, 90 + seed).remove(0);
            let vals = vec![v; n];
            let mut oracle = Oracle::new(vals.clone());
            let mut ledger = ImaginaryLedger::new();
            let out = run_main(&mut oracle, &mut ledger, &Params::adaptive(n), &Piece::whole());
            ensure(out.error.is_none(), || format!("identical n={n}: {:?}", out.error))?;
            ensure(out.stats.core_rounds == 1, || format!("identical n={n}: {} Core rounds", out.stats.core_rounds))?;
            ensure(full_fair(&out.allocation, &vals), || format!("identical n={n}: not EF"))?;
            boundaries += out.stats.boundaries;
        }
    }
    let (mut complete, mut partial) = (0, 0);
    for seed in 0..20u64 {
        let vals = perturbed(5, 4, seed);
        let mut oracle = Oracle::new(vals.clone());
        let mut ledger = ImaginaryLedger::new();
        let params = Params::adaptive(5).with_budget(Some(10_000_000));
        let out = run_main(&mut oracle, &mut ledger, &params, &Piece::whole());
        let a = &out.allocation;
        match &out.error {
            None => {
                ensure(full_fair(a, &vals), || format!("perturbed seed {seed}: not EF"))?;
                complete += 1;
            }
            Some(Error::BudgetExhausted) => {
                ensure(is_envy_free(a, &vals) && conservation(a), || format!("perturbed seed {seed}: partial not EF"))?;
                partial += 1;
            }
            Some(e) => return Err(format!("perturbed seed {seed}: {e}")),
        }
        ensure(out.stats.boundaries > 0, || format!("perturbed seed {seed}: no boundary checked"))?;
        boundaries += out.stats.boundaries;
    }
    Ok(format!("perturbed n=5: {complete} complete, {partial} budget exits; {boundaries} boundary checks"))
}

/// Valuations built to tie: identical agents, agents equal on blocks, and
/// densities repeated across many equal segments.
fn tie_instance(n: usize, seed: u64) -> Vec<Valuation> {
    let mut r = common::rng(seed);
    let m = 2 * n;
    let breaks: Vec<Rat> = (1..m).map(|j| rat(j as i64, m as i64)).collect();
    let palette: Vec<i64> = (0..2).map(|_| r.gen_range(0..=3)).collect();
    let shared: Vec<Rat> = (0..m).map(|_| int(palette[r.gen_range(0..2)] + 1)).collect();
    (0..n)
        .map(|_| {
            let dens: Vec<Rat> = match r.gen_range(0..3) {
                0 => shared.clone(),
                1 => (0..m).map(|j| if j % 2 == 0 { int(2) } else { int(0) }).collect(),
                _ => (0..m).map(|_| int(palette[r.gen_range(0..2)])).collect(),
            };
            let dens = if dens.iter().all(|d| *d == int(0)) { vec![int(1); m] } else { dens };
            Valuation::from_breaks(&breaks, &dens).unwrap()
        })
        .collect()
}

fn c8() -> Outcome {
    let mut runs = 0;
    let (mut comparisons, mut trims) = (0, 0);
    for seed in 0..120u64 {
        let n = 3 + (seed % 4) as usize;
        let vals = tie_instance(n, seed);
        let agents: Vec<usize> = (0..n).collect();
        let mut oracle = Oracle::new(vals.clone());
        let mut ledger = ImaginaryLedger::new();
        for cutter in 0..n {
            let _ = core(cutter, &agents, &Piece::whole(), &mut oracle, &mut ledger)
                .map_err(|e| format!("seed {seed} cutter {cutter}: {e}"))?;
        }
        let out = run_main(&mut oracle, &mut ledger, &Params::adaptive(n), &Piece::whole());
        ensure(out.error.is_none(), || format!("seed {seed}: {:?}", out.error))?;
        let s = &ledger.stats;
        ensure(s.augmented_ties == 0, || format!("seed {seed}: {} augmented ties", s.augmented_ties))?;
        ensure(s.order_violations == 0, || format!("seed {seed}: {} order violations", s.order_violations))?;
        comparisons += s.comparisons;
        trims += s.trim_events;
        runs += 1;
    }
    ensure(trims > 0, || "no trim events were exercised".into())?;
    Ok(format!("{runs} tie instances, {comparisons} comparisons, {trims} trim events"))
}

fn c9() -> Outcome {
    let cycles = oracle::cycle_suite();
    ensure(cycles.agrees(), || cycles.text())?;
    let (mut separations, mut exchange_checks, mut quota) = (0, 0, 0);
    let runs: &[(usize, usize, u64)] = &[(3, 300, 2), (3, 300, 3), (4, 60, 3), (4, 60, 7)];
    for &(n, copies, seed) in runs {
        let tag = format!("n={n} copies={copies} seed={seed}");
        let (_, run) = common::goleft_fixture(n, copies, seed).ok_or_else(|| format!("{tag}: no threshold"))?;
        let rep = run.report.map_err(|e| format!("{tag}: {e}"))?;
        ensure(run.dominated_after_conversion == Some(true), || format!("{tag}: A={:?} not dominated", rep.a))?;
        ensure(run.stats.quota_events.iter().all(|q| q.holds()), || format!("{tag}: quota violated"))?;
        separations += 1;
        exchange_checks += run.stats.exchange_value_checks;
        quota += run.stats.quota_events.len();
    }
    ensure(exchange_checks > 0, || "no exchange happened".into())?;
    ensure(quota > 0, || "no attachment happened".into())?;
    Ok(format!(
        "{} graphs; {separations} separations, {exchange_checks} exchange value checks, {quota} quota events",
        cycles.cases
    ))
}

fn c10() -> Outcome {
    let start = Instant::now();
    for n in 5..=8u32 {
        ensure(check_snapshot_pigeonhole(n), || format!("n={n}: C′ bound"))?;
        ensure(check_residue_stability(n), || format!("n={n}: residue stability"))?;
        // Independent route. With C = n^m, m = n^n:
        //  C′ = n^C ≥ (n+1)^(n²−n)·C  ⇐  C ≥ 2(n²−n) + m, since n+1 ≤ n².
        //  n³·C′ < (n/(n−2))^B with B = n^C′  ⇐  n^(C′−2) ≥ C′ + 3,
        //  using ln(n/(n−2)) ≥ 2/n; that holds once C′ ≥ 5.
        let nn = BigUint::from(n);
        let m = nn.pow(n);
        let m_small = u64::try_from(&m).unwrap();
        let c_lower = BigUint::from(1u8) << m_small;
        ensure(c_lower >= BigUint::from(2 * (n * n - n)) + &m, || format!("n={n}: C too small"))?;
        ensure(nn.pow(2) >= BigUint::from(5u8), || format!("n={n}: C′ below 5"))?;
        for x in 5u32..64 {
            ensure(nn.pow(x - 2) >= BigUint::from(x + 3), || format!("n={n}: step {x}"))?;
        }
        ensure(Tower::new(n, 4).at_least(&(BigUint::from(1u8) << 64)), || format!("n={n}: tower"))?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(5), || format!("took {t:?}"))?;
    Ok(format!("n=5..8 in {t:.2?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("small-n full EF (divide-choose, selfridge-conway)", c1),
        ("Core neatness and leftover bound", c2),
        ("SubCore vs neat enumerator", c3),
        ("n Core rounds: proportional, EF, query bound", c4),
        ("connected pieces", c5),
        ("discrepancy on the two-block family", c6),
        ("adaptive Main end to end", c7),
        ("tie-breaking soundness", c8),
        ("GoLeft mechanics", c9),
        ("symbolic strict bounds", c10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let t = start.elapsed();
        match res {
            Ok(msg) => println!("criterion {:>2}: PASS  {name}: {msg} [{t:.1?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {msg} [{t:.1?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
