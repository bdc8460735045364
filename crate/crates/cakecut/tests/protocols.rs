mod common;

use cakecut::partial::{connected_pieces, proportional_ef_partial};
use cakecut::verify::{conservation, is_connected, is_envy_free, is_proportional};
use cakecut::*;
use proptest::prelude::*;
use rand::Rng;

/// Valuations that agree on blocks of a uniform grid, so that physical
/// ties between pieces are common.
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

fn check_core(vals: &[Valuation], cutter: usize) -> std::result::Result<(), String> {
    let n = vals.len();
    let agents: Vec<usize> = (0..n).collect();
    let mut oracle = Oracle::new(vals.to_vec());
    let mut ledger = ImaginaryLedger::new();
    let out = core(cutter, &agents, &Piece::whole(), &mut oracle, &mut ledger).map_err(|e| e.to_string())?;
    let mut a = Allocation::fresh(n, Piece::whole());
    for (i, _, p) in &out.shares {
        a.shares[*i] = p.clone();
    }
    a.residue = out.leftover.clone();
    if !is_envy_free(&a, vals) || !conservation(&a) {
        return Err("shares are not envy-free".into());
    }
    if !out.holds_full_piece(cutter) {
        return Err("cutter lost a full piece".into());
    }
    if !agents.iter().any(|&i| i != cutter && out.holds_full_piece(i)) {
        return Err("no other agent holds a full piece".into());
    }
    let v = &vals[cutter];
    if v.value(&out.leftover) * int(n as i64) > v.value(&out.residue) * int(n as i64 - 2).max(int(0)) {
        return Err("leftover too large".into());
    }
    if ledger.stats.order_violations != 0 {
        return Err("tie order violated".into());
    }
    Ok(())
}

#[test]
fn core_survives_engineered_ties() {
    for seed in 0..150u64 {
        let n = 3 + (seed % 4) as usize;
        let vals = tie_instance(n, seed);
        for cutter in 0..n {
            check_core(&vals, cutter).unwrap_or_else(|e| panic!("seed {seed} cutter {cutter}: {e}"));
        }
    }
}

#[test]
fn main_is_complete_and_envy_free() {
    for seed in 0..40u64 {
        let n = 2 + (seed % 5) as usize;
        let mut oracle = Oracle::new(random_instance(n, 3, seed));
        let mut ledger = ImaginaryLedger::new();
        let out = run_main(&mut oracle, &mut ledger, &Params::adaptive(n), &Piece::whole());
        assert!(out.error.is_none(), "seed {seed}: {:?}", out.error);
        let a = &out.allocation;
        assert!(a.is_complete() && conservation(a), "seed {seed}");
        assert!(is_envy_free(a, oracle.valuations()), "seed {seed}");
        assert!(is_proportional(a, oracle.valuations()), "seed {seed}");
    }
}

#[test]
fn connected_pieces_are_intervals() {
    for seed in 0..30u64 {
        let n = 1 + (seed % 6) as usize;
        let vals = random_instance(n, 4, seed);
        let mut oracle = Oracle::new(vals.clone());
        let mut ledger = ImaginaryLedger::new();
        let agents: Vec<usize> = (0..n).collect();
        let out = connected_pieces(&agents, &Piece::whole(), &mut oracle, &mut ledger).unwrap();
        let a = &out.allocation;
        assert!(conservation(a));
        assert!(is_envy_free(a, &vals), "seed {seed}");
        for (i, s) in a.shares.iter().enumerate() {
            assert!(is_connected(s), "seed {seed} agent {i}");
            assert!(vals[i].value(s) * int(3 * n as i64) >= *vals[i].total(), "seed {seed} agent {i}");
        }
    }
}

#[test]
fn goleft_fixture_separates() {
    let (_, run) = common::goleft_fixture(3, 300, 2).expect("a threshold exists");
    assert!(run.report.is_ok());
    assert_eq!(run.dominated_after_conversion, Some(true));
    assert!(run.stats.quota_events.iter().all(|q| q.holds()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partial_rounds_are_proportional(n in 2usize..6, k in 1usize..5, seed in any::<u64>()) {
        let vals = random_instance(n, k, seed);
        let mut oracle = Oracle::new(vals.clone());
        let mut ledger = ImaginaryLedger::new();
        let agents: Vec<usize> = (0..n).collect();
        let out = proportional_ef_partial(&agents, &Piece::whole(), &mut oracle, &mut ledger).unwrap();
        prop_assert!(conservation(&out.allocation));
        prop_assert!(is_envy_free(&out.allocation, &vals));
        prop_assert!(is_proportional(&out.allocation, &vals));
    }

    #[test]
    fn core_guarantees_hold_for_any_cutter(n in 2usize..6, k in 1usize..4, seed in any::<u64>(), c in any::<usize>()) {
        let vals = random_instance(n, k, seed);
        prop_assert_eq!(check_core(&vals, c % n), Ok(()));
    }
}
