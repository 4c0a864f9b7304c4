//! Versioned plain-text parameter checkpoints.
//!
//! ```text
//! tdrl-mlp 1
//! widths 3 64 64 1
//! hidden relu
//! output identity
//! W 3 64
//! <fan_out values per line, fan_in lines>
//! b 64
//! <fan_out values>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip scientific notation, so a load
//! reproduces every parameter bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, Mlp};
use crate::error::{Error, Result};

pub const MLP_FORMAT_MAGIC: &str = "tdrl-mlp";
pub const MLP_FORMAT_VERSION: u32 = 1;

pub fn to_text(net: &Mlp) -> String {
    let mut out = String::new();
    let widths: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
    writeln!(out, "{MLP_FORMAT_MAGIC} {MLP_FORMAT_VERSION}").unwrap();
    writeln!(out, "widths {}", widths.join(" ")).unwrap();
    writeln!(out, "hidden {}", net.hidden_activation().tag()).unwrap();
    writeln!(out, "output {}", net.output_activation().tag()).unwrap();
    for l in 0..net.num_layers() {
        let w = net.weight(l);
        writeln!(out, "W {} {}", w.nrows(), w.ncols()).unwrap();
        for row in w.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        let b = net.bias(l);
        writeln!(out, "b {}", b.len()).unwrap();
        let cells: Vec<String> = b.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", cells.join(" ")).unwrap();
    }
    out
}

fn bad(what: &str) -> Error {
    Error::Checkpoint {
        artifact: "mlp".into(),
        message: what.to_owned(),
    }
}

fn parse_values(line: Option<&str>, expected: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| bad("truncated parameter data"))?;
    let values = line
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| bad(&format!("bad number `{tok}`"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(bad(&format!("expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}

fn header<'a>(line: Option<&'a str>, key: &str) -> Result<Vec<&'a str>> {
    let line = line.ok_or_else(|| bad(&format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(bad(&format!("expected `{key}` line, found `{line}`")));
    }
    Ok(parts.collect())
}

pub fn from_text(text: &str) -> Result<Mlp> {
    let mut lines = text.lines();
    let magic = header(lines.next(), MLP_FORMAT_MAGIC)?;
    if magic != [MLP_FORMAT_VERSION.to_string().as_str()] {
        return Err(bad(&format!("unsupported version {magic:?}")));
    }
    let widths = header(lines.next(), "widths")?
        .into_iter()
        .map(|w| w.parse::<usize>().map_err(|_| bad("bad width")))
        .collect::<Result<Vec<_>>>()?;
    if widths.len() < 2 || widths.contains(&0) {
        return Err(bad("invalid widths"));
    }
    let activation = |key: &str, line: Option<&str>| -> Result<Activation> {
        let parts = header(line, key)?;
        parts
            .first()
            .and_then(|t| Activation::from_tag(t))
            .ok_or_else(|| bad(&format!("unknown {key} activation")))
    };
    let hidden = activation("hidden", lines.next())?;
    let output = activation("output", lines.next())?;
    let mut net = Mlp::zeros(&widths, hidden, output);
    for l in 0..net.num_layers() {
        let dims = header(lines.next(), "W")?;
        let (rows, cols) = (widths[l], widths[l + 1]);
        if dims != [rows.to_string(), cols.to_string()] {
            return Err(bad(&format!("layer {l} shape mismatch")));
        }
        for r in 0..rows {
            let values = parse_values(lines.next(), cols)?;
            net.weight_mut(l).row_mut(r).iter_mut().zip(values).for_each(|(s, v)| *s = v);
        }
        let dims = header(lines.next(), "b")?;
        if dims != [cols.to_string()] {
            return Err(bad(&format!("layer {l} bias shape mismatch")));
        }
        let values = parse_values(lines.next(), cols)?;
        net.bias_mut(l).iter_mut().zip(values).for_each(|(s, v)| *s = v);
    }
    Ok(net)
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(net))?;
    Ok(())
}

/// Loads a network; a missing or malformed file is reported with its path.
pub fn load(path: &Path) -> Result<Mlp> {
    let artifact = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Checkpoint {
        artifact: artifact.clone(),
        message: e.to_string(),
    })?;
    from_text(&text).map_err(|e| match e {
        Error::Checkpoint { message, .. } => Error::Checkpoint { artifact, message },
        other => other,
    })
}
