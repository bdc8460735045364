//! Line-oriented valuation and allocation files.
//!
//! Valuation file:
//!
//! ```text
//! # comment
//! agent 1
//! seg 0 1/2 3
//! seg 1/2 1 1
//! ```
//!
//! Allocation file: `share <agent> <l> <r>` lines, any number per agent,
//! and optionally `residue <l> <r>` lines. Without residue lines the
//! residue is whatever no share covers.

use std::fmt::Write as _;

use cakecut::{Piece, Rat, Segment, Valuation};
use num_bigint::BigInt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, msg: msg.into() })
}

/// `p/q` or an integer, with `q > 0`.
pub fn parse_fraction(s: &str) -> Option<Rat> {
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p, q),
        None => (s, "1"),
    };
    let p: BigInt = p.parse().ok()?;
    let q: BigInt = q.parse().ok()?;
    if q <= BigInt::from(0) {
        return None;
    }
    Some(Rat::new(p, q))
}

/// Meaningful lines with their 1-based numbers, comments and blanks dropped.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            None
        } else {
            Some((i + 1, l.split_whitespace().collect()))
        }
    })
}

fn fraction_at(line: usize, tok: &str) -> Result<Rat, ParseError> {
    parse_fraction(tok).ok_or_else(|| ParseError { line, msg: format!("bad fraction `{tok}`") })
}

/// Agent ids must run 1, 2, … in order.
fn agent_id(line: usize, tok: &str, expected: Option<usize>) -> Result<usize, ParseError> {
    let id: usize = match tok.parse() {
        Ok(id) if id >= 1 => id,
        _ => return err(line, format!("bad agent id `{tok}`")),
    };
    if let Some(e) = expected {
        if id != e {
            return err(line, format!("expected agent {e}, found {id}"));
        }
    }
    Ok(id)
}

pub fn parse_valuations(text: &str) -> Result<Vec<Valuation>, ParseError> {
    let mut out = Vec::new();
    // (line of the `agent` header, segments so far)
    let mut open: Option<(usize, Vec<Segment>)> = None;
    let finish = |open: Option<(usize, Vec<Segment>)>, out: &mut Vec<Valuation>| -> Result<(), ParseError> {
        if let Some((line, segs)) = open {
            let v = Valuation::new(segs).map_err(|e| ParseError { line, msg: format!("agent {}: {e}", out.len() + 1) })?;
            out.push(v);
        }
        Ok(())
    };
    for (line, toks) in lines(text) {
        match toks.as_slice() {
            ["agent", id] => {
                finish(open.take(), &mut out)?;
                agent_id(line, id, Some(out.len() + 1))?;
                open = Some((line, Vec::new()));
            }
            ["seg", l, r, d] => {
                let Some((_, segs)) = open.as_mut() else {
                    return err(line, "`seg` before any `agent` line");
                };
                let seg = Segment { left: fraction_at(line, l)?, right: fraction_at(line, r)?, density: fraction_at(line, d)? };
                if segs.last().map_or(seg.left != Rat::from_integer(0.into()), |p: &Segment| p.right != seg.left) {
                    return err(line, "segment does not start where the previous one ends");
                }
                if seg.right <= seg.left {
                    return err(line, "segment is empty or reversed");
                }
                if seg.density < Rat::from_integer(0.into()) {
                    return err(line, "negative density");
                }
                segs.push(seg);
            }
            _ => return err(line, format!("unrecognised line `{}`", toks.join(" "))),
        }
    }
    finish(open, &mut out)?;
    if out.is_empty() {
        return err(0, "no agents");
    }
    Ok(out)
}

pub fn write_valuations(vals: &[Valuation]) -> String {
    let mut s = String::new();
    for (i, v) in vals.iter().enumerate() {
        let _ = writeln!(s, "agent {}", i + 1);
        for seg in v.segments() {
            let _ = writeln!(s, "seg {} {} {}", seg.left, seg.right, seg.density);
        }
    }
    s
}

/// Shares of an allocation file, one list of intervals per agent, and the
/// explicit residue if one was given.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationFile {
    pub shares: Vec<Vec<(Rat, Rat)>>,
    pub residue: Option<Vec<(Rat, Rat)>>,
}

pub fn parse_allocation(text: &str) -> Result<AllocationFile, ParseError> {
    let mut shares: Vec<Vec<(Rat, Rat)>> = Vec::new();
    let mut residue: Option<Vec<(Rat, Rat)>> = None;
    let zero = Rat::from_integer(0.into());
    let one = Rat::from_integer(1.into());
    let span = |line: usize, l: &str, r: &str| -> Result<(Rat, Rat), ParseError> {
        let (l, r) = (fraction_at(line, l)?, fraction_at(line, r)?);
        if l < zero || r > one || l > r {
            return err(line, "interval must satisfy 0 ≤ l ≤ r ≤ 1");
        }
        Ok((l, r))
    };
    for (line, toks) in lines(text) {
        match toks.as_slice() {
            ["share", id, l, r] => {
                let id = agent_id(line, id, None)?;
                if shares.len() < id {
                    shares.resize(id, Vec::new());
                }
                shares[id - 1].push(span(line, l, r)?);
            }
            ["residue", l, r] => residue.get_or_insert_with(Vec::new).push(span(line, l, r)?),
            _ => return err(line, format!("unrecognised line `{}`", toks.join(" "))),
        }
    }
    Ok(AllocationFile { shares, residue })
}

pub fn write_allocation(shares: &[Piece]) -> String {
    let mut s = String::new();
    for (i, p) in shares.iter().enumerate() {
        for iv in p.intervals() {
            let _ = writeln!(s, "share {} {} {}", i + 1, iv.left(), iv.right());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use cakecut::{random_instance, rat};

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("3"), Some(rat(3, 1)));
        assert_eq!(parse_fraction("2/4"), Some(rat(1, 2)));
        assert_eq!(parse_fraction("1/0"), None);
        assert_eq!(parse_fraction("x"), None);
    }

    #[test]
    fn valuations_round_trip() {
        for seed in 0..20 {
            let vals = random_instance(3, 4, seed);
            let text = write_valuations(&vals);
            assert_eq!(parse_valuations(&text).unwrap(), vals);
        }
    }

    #[test]
    fn bad_seg_reports_line() {
        let text = "# two agents\nagent 1\nseg 0 1 1\nagent 2\nseg 0 1/2\n";
        assert_eq!(parse_valuations(text).unwrap_err().line, 5);
        let gap = "agent 1\nseg 0 1/3 1\nseg 1/2 1 1\n";
        assert_eq!(parse_valuations(gap).unwrap_err().line, 3);
    }

    #[test]
    fn short_cover_is_rejected_at_the_agent_line() {
        let text = "agent 1\nseg 0 1/2 1\n";
        assert_eq!(parse_valuations(text).unwrap_err().line, 1);
    }

    #[test]
    fn allocation_lines() {
        let a = parse_allocation("share 2 1/2 1\nshare 1 0 1/2\n").unwrap();
        assert_eq!(a.shares[0], vec![(rat(0, 1), rat(1, 2))]);
        assert_eq!(a.shares[1], vec![(rat(1, 2), rat(1, 1))]);
        assert_eq!(parse_allocation("share 1 1/2 2\n").unwrap_err().line, 1);
    }
}
