//! Exploiting a delimited piece that some agents find significant and
//! others do not.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{bug, Error, Result};
use crate::main_protocol::Ctx;
use crate::piece::{Piece, Rat};
use crate::snapshot::Params;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscrepancyOutcome {
    pub flag: bool,
    /// Agents valuing `e` at least `n` times the residue.
    pub d: Vec<usize>,
    pub d_prime: Vec<usize>,
}

/// `V(R)/n ≤ V(e) ≤ n·V(R)` with a positive residue value.
pub fn in_gap(ve: &Rat, vr: &Rat, n: usize) -> bool {
    let n = Rat::from_integer((n as i64).into());
    !vr.is_zero() && ve * &n >= *vr && *ve <= vr * &n
}

/// Splits `agents` by their values of `e` against the residue. `D` gets
/// every agent with `V(e) ≥ n·V(R)` and `V(e) > 0`.
pub fn classify(agents: &[usize], ve: &[Rat], vr: &[Rat]) -> DiscrepancyOutcome {
    let n = Rat::from_integer((agents.len() as i64).into());
    let mut d = Vec::new();
    let mut d_prime = Vec::new();
    for (x, &i) in agents.iter().enumerate() {
        if !ve[x].is_zero() && ve[x] >= &vr[x] * &n {
            d.push(i);
        } else {
            d_prime.push(i);
        }
    }
    DiscrepancyOutcome { flag: !d.is_empty() && !d_prime.is_empty(), d, d_prime }
}

/// Runs Core on the residue (with `e` set aside) until no agent's value of
/// `e` lies within a factor `n` of its residue value, then classifies. On
/// no split, keeps running Core with `trimmer` cutting until `bonus` is
/// significant to it.
#[allow(clippy::too_many_arguments)]
pub fn discrepancy(
    ctx: &mut Ctx<'_>,
    params: &Params,
    agents: &[usize],
    cake: &Piece,
    e: &Piece,
    trimmer: usize,
    bonus: &Rat,
    residue: &mut Piece,
) -> Result<DiscrepancyOutcome> {
    let n = agents.len();
    let pending = [e.clone()];
    let ve = ctx.eval_all(agents, e)?;
    let mut rounds = 0usize;
    let mut last: Vec<Option<Rat>> = alloc::vec![None; n];
    loop {
        let vr = ctx.eval_all(agents, residue)?;
        let gap: Vec<usize> = (0..n).filter(|&x| in_gap(&ve[x], &vr[x], n)).collect();
        if gap.is_empty() {
            let out = classify(agents, &ve, &vr);
            ctx.oracle.event(|| {
                let show = |s: &[usize]| s.iter().map(|a| format!("{}", a + 1)).collect::<Vec<_>>().join(",");
                format!("DISCREPANCY flag {} D {{{}}} D' {{{}}}", out.flag as u8, show(&out.d), show(&out.d_prime))
            });
            if !out.flag {
                make_significant(ctx, params, agents, cake, trimmer, bonus, residue, &pending)?;
            }
            return Ok(out);
        }
        for &x in &gap {
            if let Some(prev) = &last[x] {
                if vr[x] >= *prev {
                    return bug("residue did not shrink for an agent in the gap");
                }
            }
        }
        if rounds >= params.round_cap {
            return Err(Error::BudgetExhausted);
        }
        let cutters: Vec<usize> = gap.iter().map(|&x| agents[x]).collect();
        if ctx.core_round_least_used(&cutters, agents, residue)?.is_none() {
            return bug("agent in the gap values an empty residue");
        }
        rounds += 1;
        for &x in &gap {
            last[x] = Some(vr[x].clone());
        }
        ctx.boundary(agents, cake, residue, &pending)?;
    }
}

#[allow(clippy::too_many_arguments)]
fn make_significant(
    ctx: &mut Ctx<'_>,
    params: &Params,
    agents: &[usize],
    cake: &Piece,
    u: usize,
    bonus: &Rat,
    residue: &mut Piece,
    pending: &[Piece],
) -> Result<()> {
    let mut rounds = 0usize;
    loop {
        let vr = if residue.is_empty() { Rat::zero() } else { ctx.oracle.eval(u, residue)? };
        if params.is_significant(bonus, &vr) {
            return Ok(());
        }
        if rounds >= params.round_cap {
            return Err(Error::BudgetExhausted);
        }
        match ctx.core_round(u, agents, residue) {
            Ok(_) => {}
            Err(Error::EmptyResidue) => return Ok(()),
            Err(e) => return Err(e),
        }
        rounds += 1;
        ctx.boundary(agents, cake, residue, pending)?;
    }
}
