//! Text checkpoint format.
//!
//! ```text
//! fedpandemic-mlp 1
//! layer 50 32
//! <32 lines of 50 weights, one line per output unit>
//! bias <32 values>
//! layer 32 16
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so a save/load cycle
//! reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use super::params::{Dense, MlpParameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "fedpandemic-mlp 1";

impl MlpParameters {
    pub fn to_checkpoint_string(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        for layer in self.layers() {
            let _ = writeln!(out, "layer {} {}", layer.inputs, layer.outputs);
            for o in 0..layer.outputs {
                push_values(&mut out, None, layer.row(o));
            }
            push_values(&mut out, Some("bias"), &layer.bias);
        }
        out
    }

    pub fn from_checkpoint_str(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::parse(origin, format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l == CHECKPOINT_MAGIC => {}
            _ => return Err(Error::parse(origin, format!("missing header {CHECKPOINT_MAGIC:?}"))),
        }
        let mut layers = Vec::new();
        while let Some((n, header)) = lines.next() {
            if header.is_empty() {
                continue;
            }
            let dims: Vec<&str> = header.split(' ').collect();
            let (inputs, outputs) = match dims.as_slice() {
                ["layer", i, o] => (
                    i.parse::<usize>().map_err(|e| err(n, e.to_string()))?,
                    o.parse::<usize>().map_err(|e| err(n, e.to_string()))?,
                ),
                _ => return Err(err(n, format!("expected layer header, got {header:?}"))),
            };
            let mut layer = Dense::zeros(inputs, outputs);
            for o in 0..outputs {
                let (n, line) = lines.next().ok_or_else(|| err(n, "truncated layer".into()))?;
                let row = parse_values(line, None, inputs).map_err(|m| err(n, m))?;
                layer.weights[o * inputs..(o + 1) * inputs].copy_from_slice(&row);
            }
            let (n, line) = lines.next().ok_or_else(|| err(n, "missing bias".into()))?;
            layer.bias = parse_values(line, Some("bias"), outputs).map_err(|m| err(n, m))?;
            layers.push(layer);
        }
        let params = MlpParameters::from_layers(layers).map_err(|e| Error::parse(origin, e.to_string()))?;
        if !params.is_finite() {
            return Err(Error::parse(origin, "non-finite parameter"));
        }
        Ok(params)
    }
}

fn push_values(out: &mut String, tag: Option<&str>, values: &[f64]) {
    let mut first = true;
    if let Some(tag) = tag {
        out.push_str(tag);
        first = false;
    }
    for v in values {
        if !first {
            out.push(' ');
        }
        let _ = write!(out, "{v:?}");
        first = false;
    }
    out.push('\n');
}

fn parse_values(line: &str, tag: Option<&str>, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let mut fields = line.split(' ');
    if let Some(tag) = tag {
        if fields.next() != Some(tag) {
            return Err(format!("expected {tag:?} line"));
        }
    }
    let values = fields
        .map(|f| f.parse::<f64>().map_err(|_| format!("bad number {f:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!("expected {expected} values, found {}", values.len()));
    }
    Ok(values)
}

pub fn save_checkpoint(params: &MlpParameters, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, params.to_checkpoint_string()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParameters> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MlpParameters::from_checkpoint_str(&text, path)
}
