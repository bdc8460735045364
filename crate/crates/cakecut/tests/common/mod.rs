#![allow(dead_code)]

use cakecut::goleft::{goleft, GoLeftReport};
use cakecut::main_protocol::{convert, Ctx, MainStats};
use cakecut::snapshot::{extract_for_piece, ExtractOutcome, Snapshot};
use cakecut::verify::dominates;
use cakecut::*;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Agents `0..split` value only `[0,1/2]`, the rest only `[1/2,1]`; each
/// half is cut into `k` segments with random densities in `1..=9`.
pub fn two_block(n: usize, split: usize, k: usize, seed: u64) -> Vec<Valuation> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let g = usize::from(i >= split);
            let m = 2 * k;
            let breaks: Vec<Rat> = (1..m).map(|j| rat(j as i64, m as i64)).collect();
            let dens: Vec<Rat> =
                (0..m).map(|j| if j / k == g { int(r.gen_range(1..=9)) } else { int(0) }).collect();
            Valuation::from_breaks(&breaks, &dens).unwrap()
        })
        .collect()
}

/// A random positive density per agent on `[1/2,1]`, and on `[0,1/2]` the
/// same `width`-segment pattern repeated in each of `copies` blocks.
pub fn repeated_blocks(n: usize, copies: usize, width: usize, seed: u64) -> Vec<Valuation> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let pattern: Vec<i64> = (0..width).map(|_| r.gen_range(1..=9)).collect();
            let tail = 50 * r.gen_range(1..=9);
            let m = copies * width;
            let mut breaks: Vec<Rat> = (1..=m).map(|j| rat(j as i64, 2 * m as i64)).collect();
            breaks.pop();
            breaks.push(rat(1, 2));
            let mut dens: Vec<Rat> = (0..m).map(|j| int(pattern[j % width])).collect();
            dens.push(int(tail));
            Valuation::from_breaks(&breaks, &dens).unwrap()
        })
        .collect()
}

pub struct GoLeftRun {
    pub report: Result<GoLeftReport>,
    pub dominated_after_conversion: Option<bool>,
    pub stats: MainStats,
    pub working_set: usize,
}

/// Builds one snapshot per block with Core and extracts against
/// `[1/2,1]`, then hands the largest isomorphic class to `f`.
///
/// The threshold is placed between two observed bonus ratios, as high as
/// possible while some positive bonus stays significant and extraction
/// fits in the residue. `None` when no such threshold exists.
pub fn with_extracted<R>(
    n: usize,
    copies: usize,
    seed: u64,
    f: impl FnOnce(&mut Ctx<'_>, &Params, &[usize], &mut Vec<Snapshot>, Vec<usize>, &mut Piece, &Piece) -> R,
) -> Option<(Vec<Valuation>, R)> {
    let width = 2 * n;
    let vals = repeated_blocks(n, copies, width, seed);
    let agents: Vec<usize> = (0..n).collect();
    let cake = Piece::whole();
    let mut oracle = Oracle::new(vals.clone());
    let mut ledger = ImaginaryLedger::new();
    let mut ctx = Ctx::new(&mut oracle, &mut ledger, Params::adaptive(n), cake.clone());
    let mut residue = Piece::interval(rat(1, 2), int(1)).unwrap();
    let mut snaps = Vec::new();
    for b in 0..copies {
        let mut block =
            Piece::interval(rat(b as i64, 2 * copies as i64), rat(b as i64 + 1, 2 * copies as i64)).unwrap();
        let out = ctx.core_round(0, &agents, &mut block).ok()?;
        residue = residue.union(&block);
        snaps.push(Snapshot::from_core(b, &out, ctx.oracle).unwrap());
    }
    let vr = ctx.eval_all(&agents, &residue).unwrap();
    let mut ratios: Vec<Rat> = Vec::new();
    for snap in &snaps {
        for (x, &i) in agents.iter().enumerate() {
            for k in 0..n {
                let b = snap.bonus(i, k).unwrap();
                if snap.classes[k].origin != i && b > int(0) {
                    ratios.push(b / &vr[x]);
                }
            }
        }
    }
    ratios.sort();
    ratios.dedup();
    let mut chosen = None;
    for t in (0..ratios.len().saturating_sub(1)).rev() {
        let s = (&ratios[t] + &ratios[t + 1]) / int(2);
        if s >= int(1) {
            continue;
        }
        let params = Params::adaptive(n).with_threshold(s).unwrap();
        let mut trial = snaps.clone();
        let mut rest = residue.clone();
        let mut ok = true;
        'all: for snap in trial.iter_mut() {
            for k in 0..n {
                match extract_for_piece(snap, k, &mut rest, &vr, &params, ctx.oracle) {
                    Ok(ExtractOutcome::Extracted(list)) => snap.classes[k].extractions = list,
                    _ => {
                        ok = false;
                        break 'all;
                    }
                }
            }
        }
        if ok {
            chosen = Some((params, trial, rest));
            break;
        }
    }
    let (params, mut snaps, mut residue) = chosen?;
    ctx.params = params.clone();
    let mut groups: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (j, s) in snaps.iter().enumerate() {
        groups.entry(s.signature()).or_default().push(j);
    }
    let class = groups.into_values().max_by_key(|g| g.len()).unwrap();
    for (j, s) in snaps.iter_mut().enumerate() {
        if !class.contains(&j) {
            residue = residue.union(&s.clear_extractions());
        }
    }
    let r = f(&mut ctx, &params, &agents, &mut snaps, class, &mut residue, &cake);
    Some((vals, r))
}

/// GoLeft on the largest isomorphic class of a repeated-block instance,
/// followed by conversion when it separates.
pub fn goleft_fixture(n: usize, copies: usize, seed: u64) -> Option<(Vec<Valuation>, GoLeftRun)> {
    with_extracted(n, copies, seed, |ctx, params, agents, snaps, class, residue, cake| {
        let working_set = class.len();
        let report = goleft(ctx, agents, snaps, class, residue, cake);
        let mut dominated_after_conversion = None;
        if let Ok(rep) = &report {
            let reached = convert(ctx, params, agents, cake, residue, &rep.a).unwrap();
            let shares = ctx.shares.clone();
            let vals = ctx.oracle.valuations().to_vec();
            let all = agents
                .iter()
                .filter(|i| !rep.a.contains(i))
                .all(|&i| rep.a.iter().all(|&j| dominates(&shares, residue, i, j, &vals)));
            dominated_after_conversion = Some(reached && all);
        }
        GoLeftRun { report, dominated_after_conversion, stats: ctx.stats.clone(), working_set }
    })
}
