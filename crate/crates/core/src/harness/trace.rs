use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,passes,objective,subopt,stat,sigma_t,lambda_t,wall_ms";

/// One checkpoint of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    /// Cumulative data passes.
    pub passes: f64,
    pub objective: f64,
    /// `F(x) − F*` against the cached reference.
    pub subopt: f64,
    pub stat: Option<f64>,
    pub sigma_t: Option<f64>,
    pub lambda_t: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Smallest suboptimality seen.
    pub fn best_subopt(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.subopt).reduce(f64::min)
    }

    /// Passes at the first row with `subopt ≤ threshold`.
    pub fn passes_to(&self, threshold: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.subopt <= threshold)
            .map(|r| r.passes)
    }

    /// Bitwise comparison (treats equal NaNs as equal).
    pub fn same_bits(&self, other: &ConvergenceTrace) -> bool {
        let key = |r: &TraceRow| {
            let o = |v: Option<f64>| v.map(f64::to_bits);
            (
                r.epoch,
                r.passes.to_bits(),
                r.objective.to_bits(),
                r.subopt.to_bits(),
                o(r.stat),
                o(r.sigma_t),
                o(r.lambda_t),
                r.wall_ms,
            )
        };
        self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| key(a) == key(b))
    }
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// CSV text: header plus one newline-terminated row per checkpoint. Floats use the shortest
/// representation that round-trips; absent values are empty fields.
pub fn to_csv(trace: &ConvergenceTrace) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch,
            num(r.passes),
            num(r.objective),
            num(r.subopt),
            opt(r.stat),
            opt(r.sigma_t),
            opt(r.lambda_t),
            r.wall_ms
        ));
    }
    out
}

pub fn emit_csv(trace: &ConvergenceTrace, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(to_csv(trace).as_bytes())?;
    f.sync_all()?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<ConvergenceTrace> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing trace header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        let line_no = no + 1;
        let bad = |msg: String| Error::Parse { line: line_no, msg };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", cols.len())));
        }
        let f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("bad number '{s}'")))
        };
        let o = |s: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                f(s).map(Some)
            }
        };
        rows.push(TraceRow {
            epoch: cols[0]
                .parse()
                .map_err(|_| bad(format!("bad epoch '{}'", cols[0])))?,
            passes: f(cols[1])?,
            objective: f(cols[2])?,
            subopt: f(cols[3])?,
            stat: o(cols[4])?,
            sigma_t: o(cols[5])?,
            lambda_t: o(cols[6])?,
            wall_ms: cols[7]
                .parse()
                .map_err(|_| bad(format!("bad wall_ms '{}'", cols[7])))?,
        });
    }
    Ok(ConvergenceTrace { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(
            to_csv(&ConvergenceTrace::default()),
            format!("{CSV_HEADER}\n")
        );
    }

    #[test]
    fn round_trip_exact() {
        let t = ConvergenceTrace {
            rows: vec![
                TraceRow {
                    epoch: 0,
                    passes: 0.0,
                    objective: 0.1 + 0.2,
                    subopt: 1e-300,
                    stat: None,
                    sigma_t: Some(1.0 / 3.0),
                    lambda_t: None,
                    wall_ms: 0,
                },
                TraceRow {
                    epoch: 3,
                    passes: 12.005,
                    objective: -2.5e17,
                    subopt: f64::NAN,
                    stat: Some(f64::MIN_POSITIVE),
                    sigma_t: None,
                    lambda_t: Some(0.125),
                    wall_ms: 42,
                },
            ],
        };
        let text = to_csv(&t);
        assert!(text.lines().all(|l| l.split(',').count() == 8));
        assert!(text.ends_with('\n'));
        assert!(parse_csv(&text).unwrap().same_bits(&t));
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_csv("nope\n").is_err());
        let e = parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
