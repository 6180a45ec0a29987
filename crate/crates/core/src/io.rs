//! Plain-text observation, model, alignment, report and trace formats.
//!
//! Floats are written with Rust's shortest round-trip representation, so a
//! value read back from any file written here is bit-identical. Input accepts
//! any `f64` literal Rust accepts ('.' decimal point, optional exponent) but
//! rejects non-finite values. `#` starts a comment line in both input formats.

use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{GaussianState, HmmModel};
use crate::observation::ObservationSequence;
use crate::trainer::TrainingReport;
use crate::viterbi::{AlignmentResult, Trellis};

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{token}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("'{token}' is not finite") });
    }
    Ok(v)
}

fn parse_usize(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("'{token}' is not a non-negative integer"),
    })
}

/// Yields `(1-based line number, trimmed content)` for non-blank, non-comment lines.
fn data_lines<R: BufRead>(source: R) -> impl Iterator<Item = Result<(usize, String)>> {
    source.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok((i + 1, t.to_string())))
        }
    })
}

pub fn read_observations<R: BufRead>(source: R) -> Result<ObservationSequence> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim = None;
    for item in data_lines(source) {
        let (line, text) = item?;
        let row = text
            .split_whitespace()
            .map(|tok| parse_f64(tok, line))
            .collect::<Result<Vec<_>>>()?;
        match dim {
            None => dim = Some((row.len(), line)),
            Some((d, first)) if d != row.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "ragged row: {} values, but line {first} has {d}",
                        row.len()
                    ),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "no observations found".into() });
    }
    ObservationSequence::from_rows(&rows)
}

pub fn parse_observations(text: &str) -> Result<ObservationSequence> {
    read_observations(text.as_bytes())
}

pub fn write_observations<W: Write>(obs: &ObservationSequence, mut sink: W) -> Result<()> {
    for row in obs.data().rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(sink, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Line-oriented model reader.
///
/// ```text
/// NUMSTATES 4
/// DIM 3
/// STATE 2
/// MEAN 0.065 -0.1583 -0.5923
/// VAR 0.8717 0.4701 0.0295
/// STATE 3
/// ...
/// TRANSP
/// 0.0 1.0 0.0 0.0
/// ...            (N rows of N linear probabilities)
/// ```
pub fn read_model<R: BufRead>(source: R) -> Result<HmmModel> {
    let mut lines = data_lines(source);
    let mut next = |what: &str, last_line: usize| -> Result<(usize, String)> {
        lines.next().unwrap_or_else(|| {
            Err(Error::Parse { line: last_line + 1, message: format!("unexpected end of file, expected {what}") })
        })
    };

    let keyword_value = |text: &str, line: usize, kw: &str| -> Result<usize> {
        let mut it = text.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(k), Some(v), None) if k == kw => parse_usize(v, line),
            _ => Err(Error::Parse { line, message: format!("expected '{kw} <integer>', got '{text}'") }),
        }
    };

    let (line, text) = next("NUMSTATES", 0)?;
    let num_states = keyword_value(&text, line, "NUMSTATES")?;
    if num_states < 3 {
        return Err(Error::Parse { line, message: format!("NUMSTATES must be at least 3, got {num_states}") });
    }
    let (line, text) = next("DIM", line)?;
    let dim = keyword_value(&text, line, "DIM")?;
    if dim == 0 {
        return Err(Error::Parse { line, message: "DIM must be at least 1".into() });
    }

    let vector = |text: &str, line: usize, kw: &str| -> Result<Vec<f64>> {
        let mut it = text.split_whitespace();
        if it.next() != Some(kw) {
            return Err(Error::Parse { line, message: format!("expected {kw}, got '{text}'") });
        }
        let v = it.map(|t| parse_f64(t, line)).collect::<Result<Vec<_>>>()?;
        if v.len() != dim {
            return Err(Error::Parse {
                line,
                message: format!("{kw} has {} values, expected {dim}", v.len()),
            });
        }
        Ok(v)
    };

    let mut states = Vec::with_capacity(num_states - 2);
    let mut line = line;
    for expected in 2..num_states {
        let (l, text) = next("STATE", line)?;
        let j = keyword_value(&text, l, "STATE")?;
        if j != expected {
            return Err(Error::Parse { line: l, message: format!("expected STATE {expected}, got STATE {j}") });
        }
        let (l, text) = next("MEAN", l)?;
        let mean = vector(&text, l, "MEAN")?;
        let (l, text) = next("VAR", l)?;
        let variance = vector(&text, l, "VAR")?;
        states.push(GaussianState::new(mean, variance));
        line = l;
    }

    let (l, text) = next("TRANSP", line)?;
    if text != "TRANSP" {
        let kw = text.split_whitespace().next().unwrap_or_default();
        let message = if ["STATE", "MEAN", "VAR", "NUMSTATES", "DIM"].contains(&kw) {
            format!("unexpected '{kw}', expected TRANSP")
        } else {
            format!("unknown keyword '{kw}'")
        };
        return Err(Error::Parse { line: l, message });
    }
    let mut line = l;
    let mut trans = Array2::zeros((num_states, num_states));
    for r in 0..num_states {
        let (l, text) = next("transition row", line)?;
        let row = text.split_whitespace().map(|t| parse_f64(t, l)).collect::<Result<Vec<_>>>()?;
        if row.len() != num_states {
            return Err(Error::Parse {
                line: l,
                message: format!("transition row has {} values, expected {num_states}", row.len()),
            });
        }
        trans.row_mut(r).assign(&ndarray::ArrayView1::from(&row[..]));
        line = l;
    }
    if let Some(extra) = lines.next() {
        let (l, text) = extra?;
        let kw = text.split_whitespace().next().unwrap_or_default().to_string();
        return Err(Error::Parse { line: l, message: format!("unexpected trailing content '{kw}'") });
    }

    HmmModel::new(trans, states)
}

pub fn parse_model(text: &str) -> Result<HmmModel> {
    read_model(text.as_bytes())
}

pub fn write_model<W: Write>(model: &HmmModel, mut sink: W) -> Result<()> {
    let join = |v: &[f64]| v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
    writeln!(sink, "NUMSTATES {}", model.num_states())?;
    writeln!(sink, "DIM {}", model.dim())?;
    for (k, g) in model.states().iter().enumerate() {
        writeln!(sink, "STATE {}", k + 2)?;
        writeln!(sink, "MEAN {}", join(g.mean()))?;
        writeln!(sink, "VAR {}", join(g.variance()))?;
    }
    writeln!(sink, "TRANSP")?;
    for row in model.transitions().rows() {
        writeln!(sink, "{}", join(&row.to_vec()))?;
    }
    Ok(())
}

pub fn write_alignment<W: Write>(result: &AlignmentResult, mut sink: W) -> Result<()> {
    writeln!(sink, "LOGPROB {}", fmt_f64(result.log_score))?;
    let path: Vec<String> = result.path.iter().map(ToString::to_string).collect();
    writeln!(sink, "PATH {}", path.join(" "))?;
    for (t, state) in result.emitting_path().iter().enumerate() {
        writeln!(sink, "{} {}", t + 1, state)?;
    }
    Ok(())
}

pub fn write_report<W: Write>(report: &TrainingReport, mut sink: W) -> Result<()> {
    for (k, (score, delta)) in report.scores.iter().zip(&report.deltas).enumerate() {
        let delta = delta.map_or_else(|| "-".to_string(), fmt_f64);
        writeln!(sink, "ITER {} LOGPROB {} DELTA {}", k + 1, fmt_f64(*score), delta)?;
    }
    writeln!(sink, "CONVERGED {}", if report.converged { "yes" } else { "no" })?;
    Ok(())
}

/// `DELTA t j value` and `PSI t j state` lines, column by column. Unreachable
/// cells print `-`.
pub fn write_trace<W: Write>(trellis: &Trellis, mut sink: W) -> Result<()> {
    let ne = trellis.num_emitting();
    for t in 1..=trellis.filled() {
        for j in 2..ne + 2 {
            let d = trellis.delta(t, j);
            let shown = if crate::logmath::is_log_zero(d) { "-".to_string() } else { fmt_f64(d) };
            writeln!(sink, "DELTA {t} {j} {shown}")?;
        }
        for j in 2..ne + 2 {
            let shown = trellis.psi(t, j).map_or_else(|| "-".to_string(), |p| p.to_string());
            writeln!(sink, "PSI {t} {j} {shown}")?;
        }
    }
    Ok(())
}
