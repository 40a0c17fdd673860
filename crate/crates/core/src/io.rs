//! Text formats: lattice JSON and landmark CSV.
//!
//! Lattice files look like
//!
//! ```text
//! {
//!   "spec": {"w": 128, "h": 128, "k": 9, "l": 9},
//!   "displacements": [
//!     [0.25, -1.5],
//!     ...
//!   ]
//! }
//! ```
//!
//! with one `[dx, dy]` pair per line, row-major from node `(-1, -1)`.
//! Numbers are written in shortest round-trip form, so write, read, write
//! is byte-identical.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ffd::{ControlLattice, LatticeSpec};
use crate::Vec2;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeFile {
    spec: LatticeSpec,
    displacements: Vec<Vec2>,
}

pub fn lattice_to_json(lat: &ControlLattice) -> String {
    let s = lat.spec();
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"spec\": {{\"w\": {}, \"h\": {}, \"k\": {}, \"l\": {}}},", s.w, s.h, s.k, s.l);
    out.push_str("  \"displacements\": [\n");
    let n = lat.displacements().len();
    for (i, d) in lat.displacements().iter().enumerate() {
        let sep = if i + 1 < n { "," } else { "" };
        let _ = writeln!(out, "    [{}, {}]{sep}", json_number(d[0]), json_number(d[1]));
    }
    out.push_str("  ]\n}\n");
    out
}

fn json_number(v: f64) -> String {
    // JSON has no NaN/inf; lattices never hold them, but keep output parseable.
    if v.is_finite() {
        format!("{v}")
    } else {
        "0".into()
    }
}

/// Parses a lattice file. Syntax and schema errors carry the line and column
/// reported by the JSON parser.
pub fn lattice_from_json(text: &str) -> Result<ControlLattice> {
    let file: LatticeFile = serde_json::from_str(text).map_err(|e| Error::Lattice(e.to_string()))?;
    file.spec.validate().map_err(|e| Error::Lattice(format!("spec: {e}")))?;
    ControlLattice::from_displacements(file.spec, file.displacements)
}

pub fn write_landmarks<W: Write>(out: W, points: &[Vec2]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"])?;
    for p in points {
        w.write_record([p[0].to_string(), p[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `x,y` CSV with a header row.
pub fn read_landmarks<R: Read>(input: R) -> Result<Vec<Vec2>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Landmarks {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Landmarks {
                line,
                reason: format!("expected 2 fields (x,y), found {}", record.len()),
            });
        }
        let mut p = [0.0; 2];
        for (slot, (field, name)) in p.iter_mut().zip(record.iter().zip(["x", "y"])) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Landmarks {
                    line,
                    reason: format!("field `{name}`: `{field}` is not a finite number"),
                })?;
        }
        out.push(p);
    }
    Ok(out)
}
