//! Human-readable run reports. Verdicts are recomputed here from the
//! valuations, never taken from the engine.

use std::fmt::Write as _;

use cakecut::verify::{conservation, envy_witness, is_proportional, Allocation};
use cakecut::{Piece, QueryCounter, Rat, Valuation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Which verdicts apply beyond envy-freeness and conservation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Checks {
    pub complete: bool,
    pub proportional: bool,
    /// Single-interval shares worth `1/(3n)` of the cake.
    pub connected: bool,
}

pub fn verdicts(a: &Allocation, vals: &[Valuation], checks: Checks) -> Vec<Verdict> {
    let mut out = Vec::new();
    let witness = envy_witness(&a.shares, &a.all_agents(), vals);
    out.push(Verdict {
        name: "envy-free",
        pass: witness.is_none(),
        detail: witness.map(|(i, j)| format!("agent {} envies agent {}", i + 1, j + 1)).unwrap_or_default(),
    });
    out.push(Verdict { name: "conservation", pass: conservation(a), detail: String::new() });
    if checks.complete {
        out.push(Verdict { name: "complete", pass: a.is_complete(), detail: String::new() });
    }
    if checks.proportional {
        out.push(Verdict { name: "proportional", pass: is_proportional(a, vals), detail: String::new() });
    }
    if checks.connected {
        let bad = (0..a.n()).find(|&i| !a.shares[i].is_connected());
        out.push(Verdict {
            name: "connected",
            pass: bad.is_none(),
            detail: bad.map(|i| format!("agent {} holds {}", i + 1, a.shares[i])).unwrap_or_default(),
        });
        let scale = Rat::from_integer((3 * a.n() as i64).into());
        let bad = (0..a.n()).find(|&i| vals[i].value(&a.shares[i]) * &scale < vals[i].value(&a.origin));
        out.push(Verdict {
            name: "third-share",
            pass: bad.is_none(),
            detail: bad.map(|i| format!("agent {} below 1/(3n)", i + 1)).unwrap_or_default(),
        });
    }
    out
}

fn cell(p: &Piece) -> String {
    if p.is_empty() {
        "{}".into()
    } else {
        p.to_string()
    }
}

/// Shares, the value matrix, the residue and query counts.
pub fn allocation_text(a: &Allocation, vals: &[Valuation], queries: Option<&QueryCounter>) -> String {
    let mut s = String::new();
    for (i, p) in a.shares.iter().enumerate() {
        let _ = writeln!(s, "share {} {}", i + 1, cell(p));
    }
    let _ = writeln!(s, "residue {}", cell(&a.residue));
    let _ = writeln!(s, "values (row: agent; columns: shares 1..n, residue)");
    for (i, v) in vals.iter().enumerate() {
        let row: Vec<String> = a.shares.iter().map(|p| v.value(p).to_string()).collect();
        let _ = writeln!(
            s,
            "  agent {}: self {} | {} | residue {}",
            i + 1,
            v.value(&a.shares[i]),
            row.join(" "),
            v.value(&a.residue)
        );
    }
    if let Some(q) = queries {
        for i in 0..a.n() {
            let _ = writeln!(s, "queries agent {}: cut {} eval {}", i + 1, q.cuts(i), q.evals(i));
        }
        let _ = writeln!(s, "queries total {}", q.total());
    }
    s
}

pub fn verdict_text(vs: &[Verdict]) -> String {
    let mut s = String::new();
    for v in vs {
        let _ = write!(s, "verdict {} {}", v.name, if v.pass { "PASS" } else { "FAIL" });
        if !v.detail.is_empty() {
            let _ = write!(s, " ({})", v.detail);
        }
        s.push('\n');
    }
    s
}
