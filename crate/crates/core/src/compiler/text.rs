//! Line-oriented text form of gate programs.
//!
//! ```text
//! version 1
//! qubits 2
//! ---
//! prepare_all
//! rz 0 -3.141592653589793
//! cnot 0 1
//! measure_all
//! ```
//!
//! Angles inside `[1e-3, 1e3]` in magnitude are printed positionally with
//! the shortest digits that round-trip; others use scientific notation.
//! `#` starts a comment.

use std::fmt::Write;

use crate::error::{Error, Result};

use super::program::{Gate, GateProgram};

pub fn format_angle(a: f64) -> String {
    if a == 0.0 {
        "0".to_string()
    } else if (1e-3..=1e3).contains(&a.abs()) {
        format!("{a}")
    } else {
        format!("{a:e}")
    }
}

pub fn emit_text(program: &GateProgram) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version 1");
    let _ = writeln!(s, "qubits {}", program.n_qubits());
    let _ = writeln!(s, "---");
    for g in program.gates() {
        let line = match *g {
            Gate::PrepareAll => "prepare_all".to_string(),
            Gate::Rz(q, a) => format!("rz {q} {}", format_angle(a)),
            Gate::Ry(q, a) => format!("ry {q} {}", format_angle(a)),
            Gate::R(q, t, p) => format!("r {q} {} {}", format_angle(t), format_angle(p)),
            Gate::Cnot(c, t) => format!("cnot {c} {t}"),
            Gate::Ms(a, b, t) => format!("ms {a} {b} {}", format_angle(t)),
            Gate::GlobalPhase(a) => format!("gphase {}", format_angle(a)),
            Gate::MeasureAll => "measure_all".to_string(),
        };
        s.push_str(&line);
        s.push('\n');
    }
    s
}

pub fn parse_text(text: &str) -> Result<GateProgram> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut header = |want: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, l)) if l.split_whitespace().next() == Some(want) => Ok((n, l.to_string())),
            Some((n, l)) => Err(Error::parse(n, format!("expected `{want}`, found `{l}`"))),
            None => Err(Error::parse(0, format!("missing `{want}` header"))),
        }
    };
    let (n, v) = header("version")?;
    if v.split_whitespace().nth(1) != Some("1") || v.split_whitespace().count() != 2 {
        return Err(Error::parse(n, format!("unsupported version line `{v}`")));
    }
    let (n, q) = header("qubits")?;
    let n_qubits: usize = q
        .split_whitespace()
        .nth(1)
        .and_then(|x| x.parse().ok())
        .filter(|_| q.split_whitespace().count() == 2)
        .ok_or_else(|| Error::parse(n, format!("malformed qubit count `{q}`")))?;
    let (n, sep) = header("---")?;
    if sep != "---" {
        return Err(Error::parse(n, "separator must be `---`"));
    }

    let mut gates = Vec::new();
    for (n, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let int = |k: usize| -> Result<usize> {
            toks.get(k)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(n, format!("bad qubit operand in `{line}`")))
        };
        let ang = |k: usize| -> Result<f64> {
            toks.get(k)
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|a| a.is_finite())
                .ok_or_else(|| Error::parse(n, format!("bad angle operand in `{line}`")))
        };
        let arity = |k: usize| -> Result<()> {
            if toks.len() == k + 1 {
                Ok(())
            } else {
                Err(Error::parse(n, format!("`{}` takes {k} operand(s)", toks[0])))
            }
        };
        let g = match toks[0] {
            "prepare_all" => arity(0).map(|_| Gate::PrepareAll)?,
            "measure_all" => arity(0).map(|_| Gate::MeasureAll)?,
            "rz" => arity(2).and_then(|_| Ok(Gate::Rz(int(1)?, ang(2)?)))?,
            "ry" => arity(2).and_then(|_| Ok(Gate::Ry(int(1)?, ang(2)?)))?,
            "r" => arity(3).and_then(|_| Ok(Gate::R(int(1)?, ang(2)?, ang(3)?)))?,
            "cnot" => arity(2).and_then(|_| Ok(Gate::Cnot(int(1)?, int(2)?)))?,
            "ms" => arity(3).and_then(|_| Ok(Gate::Ms(int(1)?, int(2)?, ang(3)?)))?,
            "gphase" => arity(1).and_then(|_| Ok(Gate::GlobalPhase(ang(1)?)))?,
            other => return Err(Error::parse(n, format!("unknown mnemonic `{other}`"))),
        };
        gates.push(g);
    }
    GateProgram::from_gates(n_qubits, gates)
}
