//! Plain-text parameter checkpoints.
//!
//! ```text
//! labelgcn-checkpoint 1
//! input_dim 1440
//! hidden_dim 16
//! n_classes 7
//! dropout_rate 0.5
//! masked_first_layer true
//! tensor W0 1440 16
//! <one row per line, space separated>
//! ...
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! reading a checkpoint back yields bit-identical parameters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

const MAGIC: &str = "labelgcn-checkpoint 1";

pub fn to_string(config: &ModelConfig, params: &ModelParams) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "input_dim {}", config.input_dim).unwrap();
    writeln!(out, "hidden_dim {}", config.hidden_dim).unwrap();
    writeln!(out, "n_classes {}", config.n_classes).unwrap();
    writeln!(out, "dropout_rate {}", config.dropout_rate).unwrap();
    writeln!(out, "masked_first_layer {}", config.masked_first_layer).unwrap();
    let b2 = DenseMatrix::from_vec(1, params.b2.len(), params.b2.clone()).expect("row vector");
    for (name, m) in [("W0", &params.w0), ("W1", &params.w1), ("W2", &params.w2), ("b2", &b2)] {
        writeln!(out, "tensor {name} {} {}", m.n_rows(), m.n_cols()).unwrap();
        for row in m.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
    }
    writeln!(out, "end").unwrap();
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        let (i, l) = self.inner.next().ok_or_else(|| self.err("unexpected end of checkpoint"))?;
        self.line = i + 1;
        Ok(l)
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key} <value>`")))?;
        value.parse().map_err(|_| self.err(format!("bad value for {key}")))
    }

    fn tensor(&mut self, name: &str) -> Result<DenseMatrix> {
        let header = self.next_line()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "tensor" || parts[1] != name {
            return Err(self.err(format!("expected `tensor {name} <rows> <cols>`")));
        }
        let rows: usize = parts[2].parse().map_err(|_| self.err("bad row count"))?;
        let cols: usize = parts[3].parse().map_err(|_| self.err("bad column count"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| self.err(format!("bad value `{tok}`")))?;
                if !v.is_finite() {
                    return Err(self.err("non-finite parameter"));
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(self.err(format!("expected {cols} values")));
            }
        }
        DenseMatrix::from_vec(rows, cols, data)
    }
}

pub fn from_str(text: &str, path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
        line: 0,
    };
    if lines.next_line()? != MAGIC {
        return Err(lines.err("not a labelgcn checkpoint"));
    }
    let config = ModelConfig {
        input_dim: lines.field("input_dim")?,
        hidden_dim: lines.field("hidden_dim")?,
        n_classes: lines.field("n_classes")?,
        dropout_rate: lines.field("dropout_rate")?,
        masked_first_layer: lines.field("masked_first_layer")?,
    };
    config.validate()?;
    let params = ModelParams {
        w0: lines.tensor("W0")?,
        w1: lines.tensor("W1")?,
        w2: lines.tensor("W2")?,
        b2: lines.tensor("b2")?.into_vec(),
    };
    params.check_shapes(&config)?;
    if lines.next_line()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok((config, params))
}

pub fn save(path: &Path, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    fs::write(path, to_string(config, params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, path)
}
