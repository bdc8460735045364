//! The `run` and `verify` commands, independent of argument parsing.

use std::fmt::Write as _;

use cakecut::main_protocol::{divide_and_choose, selfridge_conway};
use cakecut::partial::{connected_pieces, proportional_ef_partial};
use cakecut::verify::Allocation;
use cakecut::{core, run_main, Error, ImaginaryLedger, Mode, Oracle, Params, Piece, Rat, TraceSink, Valuation};

use crate::format::AllocationFile;
use crate::report::{allocation_text, verdict_text, verdicts, Checks, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_BUG: i32 = 4;

/// Budget used in strict mode when none is given.
pub const STRICT_DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    Main,
    Core,
    PropEf,
    Connected,
    DivideChoose,
    SelfridgeConway,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Main => "main",
            Protocol::Core => "core",
            Protocol::PropEf => "prop-ef",
            Protocol::Connected => "connected",
            Protocol::DivideChoose => "divide-choose",
            Protocol::SelfridgeConway => "selfridge-conway",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub mode: Mode,
    pub threshold: Option<Rat>,
    pub max_queries: Option<u64>,
    /// 0-based.
    pub cutter: usize,
}

impl RunConfig {
    pub fn new(protocol: Protocol) -> Self {
        RunConfig { protocol, mode: Mode::Adaptive, threshold: None, max_queries: None, cutter: 0 }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub allocation: Allocation,
    pub verdicts: Vec<Verdict>,
    pub error: Option<Error>,
    pub report: String,
    pub exit: i32,
}

fn usage(report: String, msg: String) -> RunResult {
    RunResult {
        allocation: Allocation::fresh(0, Piece::whole()),
        verdicts: Vec::new(),
        error: None,
        report: format!("{report}error: {msg}\n"),
        exit: EXIT_PARSE,
    }
}

fn from_pairs(n: usize, out: Vec<(usize, Piece)>) -> Allocation {
    let mut a = Allocation::fresh(n, Piece::whole());
    for (i, p) in out {
        a.shares[i] = a.shares[i].union(&p);
    }
    let taken = a.shares.iter().fold(Piece::empty(), |acc, p| acc.union(p));
    a.residue = a.origin.subtract(&taken);
    a
}

/// Runs one protocol on `vals` and builds the report. The trace, if any,
/// receives every query, the protocol's state lines and the final
/// allocation.
pub fn run(vals: Vec<Valuation>, cfg: &RunConfig, trace: Option<Box<dyn TraceSink>>) -> RunResult {
    let n = vals.len();
    let mut report = String::new();
    let _ = writeln!(report, "protocol {} agents {}", cfg.protocol.name(), n);
    let need = match cfg.protocol {
        Protocol::DivideChoose => Some(2),
        Protocol::SelfridgeConway => Some(3),
        _ => None,
    };
    if let Some(m) = need {
        if n != m {
            return usage(report, format!("{} needs exactly {m} agents, got {n}", cfg.protocol.name()));
        }
    }
    if cfg.protocol == Protocol::Core && cfg.cutter >= n {
        return usage(report, format!("cutter {} out of range", cfg.cutter + 1));
    }
    if cfg.protocol == Protocol::Main && n > 8 {
        return usage(report, "main supports at most 8 agents".into());
    }

    let mut budget = cfg.max_queries;
    if cfg.mode == Mode::Strict && cfg.threshold.is_some() {
        eprintln!("warning: --sig-threshold is ignored in strict mode");
    }
    if cfg.protocol == Protocol::Main && cfg.mode == Mode::Strict {
        budget = Some(budget.unwrap_or(STRICT_DEFAULT_BUDGET));
    }
    let mut oracle = Oracle::new(vals.clone()).with_budget(budget);
    if let Some(t) = trace {
        oracle = oracle.with_trace(t);
    }
    let mut ledger = ImaginaryLedger::new();
    let cake = Piece::whole();
    let agents: Vec<usize> = (0..n).collect();
    let mut checks = Checks::default();
    let mut extra = String::new();

    let (allocation, error) = match cfg.protocol {
        Protocol::DivideChoose => {
            checks = Checks { complete: true, proportional: true, connected: false };
            match divide_and_choose(&cake, 0, 1, &mut oracle) {
                Ok(out) => (from_pairs(n, out), None),
                Err(e) => (Allocation::fresh(n, cake.clone()), Some(e)),
            }
        }
        Protocol::SelfridgeConway => {
            checks = Checks { complete: true, proportional: true, connected: false };
            match selfridge_conway(&cake, [0, 1, 2], &mut oracle) {
                Ok(out) => (from_pairs(n, out), None),
                Err(e) => (Allocation::fresh(n, cake.clone()), Some(e)),
            }
        }
        Protocol::Core => match core(cfg.cutter, &agents, &cake, &mut oracle, &mut ledger) {
            Ok(out) => {
                let mut a = Allocation::fresh(n, cake.clone());
                for (i, _, p) in &out.shares {
                    a.shares[*i] = p.clone();
                }
                a.residue = out.leftover.clone();
                let full: Vec<String> =
                    agents.iter().filter(|&&i| out.holds_full_piece(i)).map(|i| (i + 1).to_string()).collect();
                let _ = writeln!(extra, "core cutter {} full pieces held by {}", cfg.cutter + 1, full.join(","));
                let _ = writeln!(extra, "subcore calls {} trims {}", out.subcore.calls, out.subcore.trims);
                (a, None)
            }
            Err(e) => (Allocation::fresh(n, cake.clone()), Some(e)),
        },
        Protocol::PropEf => {
            checks.proportional = true;
            match proportional_ef_partial(&agents, &cake, &mut oracle, &mut ledger) {
                Ok(out) => {
                    let _ = writeln!(extra, "core rounds {}", out.rounds);
                    (out.allocation, None)
                }
                Err(e) => (Allocation::fresh(n, cake.clone()), Some(e)),
            }
        }
        Protocol::Connected => {
            checks.connected = true;
            match connected_pieces(&agents, &cake, &mut oracle, &mut ledger) {
                Ok(out) => {
                    let _ = writeln!(extra, "iterations {} upgrades {}", out.iterations, out.upgrades);
                    (out.allocation, None)
                }
                Err(e) => (Allocation::fresh(n, cake.clone()), Some(e)),
            }
        }
        Protocol::Main => {
            let mut params = match cfg.mode {
                Mode::Adaptive => Params::adaptive(n),
                Mode::Strict => Params::strict(n),
            };
            if let (Mode::Adaptive, Some(s)) = (cfg.mode, &cfg.threshold) {
                params = match params.with_threshold(s.clone()) {
                    Ok(p) => p,
                    Err(e) => return usage(report, e.to_string()),
                };
            }
            params = params.with_budget(budget);
            let out = run_main(&mut oracle, &mut ledger, &params, &cake);
            let st = &out.stats;
            let _ = writeln!(
                extra,
                "core rounds {} snapshots {} band rounds {} resets {}",
                st.core_rounds, st.snapshots, st.band_rounds, st.resets
            );
            let _ = writeln!(
                extra,
                "discrepancies {} splits {} goleft calls {} separations {}",
                st.discrepancy_calls,
                st.splits.len(),
                st.goleft_calls,
                st.goleft_separations
            );
            let _ = writeln!(extra, "attachments {} exchanges {}", st.attachments, st.exchanges);
            if out.error.is_none() {
                checks = Checks { complete: true, proportional: true, connected: false };
            }
            (out.allocation, out.error)
        }
    };

    oracle.event(|| "FINAL".into());
    for (i, p) in allocation.shares.iter().enumerate() {
        oracle.event(|| format!("FINAL share {} {}", i + 1, p));
    }
    oracle.event(|| format!("FINAL residue {}", allocation.residue));
    drop(oracle.take_trace());

    let vs = verdicts(&allocation, &vals, checks);
    report.push_str(&allocation_text(&allocation, &vals, Some(oracle.counter())));
    report.push_str(&extra);
    if let Some(e) = &error {
        let _ = writeln!(report, "stopped: {e}");
    }
    report.push_str(&verdict_text(&vs));
    let all_pass = vs.iter().all(|v| v.pass);
    let exit = match &error {
        Some(Error::BudgetExhausted) if all_pass => EXIT_BUDGET,
        Some(Error::BudgetExhausted) | Some(_) => EXIT_BUG,
        None if all_pass => EXIT_OK,
        None => EXIT_BUG,
    };
    RunResult { allocation, verdicts: vs, error, report, exit }
}

/// Checks a third-party allocation against `vals`: envy-freeness,
/// conservation and proportionality.
pub fn verify(vals: &[Valuation], file: &AllocationFile) -> Result<(Allocation, Vec<Verdict>, String), String> {
    let n = vals.len();
    if file.shares.len() > n {
        return Err(format!("allocation names agent {} but only {n} agents are valued", file.shares.len()));
    }
    let piece = |spans: &[(Rat, Rat)]| Piece::from_pairs(spans).map_err(|e| e.to_string());
    let mut shares = vec![Piece::empty(); n];
    let mut overlap = false;
    for (i, spans) in file.shares.iter().enumerate() {
        for s in spans {
            let p = piece(std::slice::from_ref(s))?;
            overlap |= shares[i].overlaps(&p);
            shares[i] = shares[i].union(&p);
        }
    }
    let taken = shares.iter().fold(Piece::empty(), |acc, p| acc.union(p));
    let residue = match &file.residue {
        Some(spans) => piece(spans)?,
        None => Piece::whole().subtract(&taken),
    };
    let a = Allocation { shares, residue, origin: Piece::whole() };
    let mut vs = verdicts(&a, vals, Checks { complete: false, proportional: true, connected: false });
    if overlap {
        // Overlaps inside one agent's own list merge silently in a piece;
        // report them as a conservation failure.
        for v in &mut vs {
            if v.name == "conservation" {
                v.pass = false;
                v.detail = "an agent's intervals overlap".into();
            }
        }
    }
    let mut text = allocation_text(&a, vals, None);
    text.push_str(&verdict_text(&vs));
    Ok((a, vs, text))
}
