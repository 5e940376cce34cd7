//! Line-oriented text serialization for networks and optimizer state.
//!
//! Parameters are written in row-major order as decimal scientific notation
//! with 17 significant digits, which round-trips every finite `f64` bit-exactly.

use super::{Activation, Layer, LayerGradients, Mlp, RmsPropState};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unexpected end of checkpoint (expected {expected})")]
    UnexpectedEnd { expected: String },
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Appends a `network <name>` section.
pub fn write_mlp(out: &mut String, name: &str, net: &Mlp) {
    out.push_str(&format!("network {name}\n"));
    out.push_str(&format!("layers {}\n", net.layers().len()));
    for layer in net.layers() {
        out.push_str(&format!(
            "layer {} {} {}\n",
            layer.input_size,
            layer.output_size,
            layer.activation.name()
        ));
        push_values(out, "weights", &layer.weights);
        push_values(out, "bias", &layer.bias);
    }
}

/// Appends an `optimizer <name>` section mirroring the shapes of its network.
pub fn write_rmsprop(out: &mut String, name: &str, opt: &RmsPropState) {
    out.push_str(&format!("optimizer {name}\n"));
    out.push_str(&format!("learning_rate {}\n", format_f64(opt.learning_rate)));
    out.push_str(&format!("decay {}\n", format_f64(opt.decay)));
    out.push_str(&format!("epsilon {}\n", format_f64(opt.epsilon)));
    out.push_str(&format!("layers {}\n", opt.square_avg.len()));
    for lg in &opt.square_avg {
        push_values(out, "vweights", &lg.weights);
        push_values(out, "vbias", &lg.bias);
    }
}

fn push_values(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        out.push(' ');
        out.push_str(&format_f64(*v));
    }
    out.push('\n');
}

/// Cursor over checkpoint lines with 1-based line numbers for error messages.
pub struct Reader<'a> {
    lines: std::str::Lines<'a>,
    pub line_no: usize,
}

impl<'a> Reader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines(),
            line_no: 0,
        }
    }

    pub fn next_line(&mut self, expected: &str) -> Result<&'a str, CheckpointError> {
        loop {
            match self.lines.next() {
                Some(line) => {
                    self.line_no += 1;
                    let trimmed = line.trim_end();
                    if trimmed.is_empty() {
                        continue;
                    }
                    return Ok(trimmed);
                }
                None => {
                    return Err(CheckpointError::UnexpectedEnd {
                        expected: expected.to_string(),
                    })
                }
            }
        }
    }

    /// Reads a line that must start with `tag` followed by whitespace (or be
    /// exactly `tag`); returns the remainder.
    pub fn expect_tag(&mut self, tag: &str) -> Result<&'a str, CheckpointError> {
        let line = self.next_line(tag)?;
        match line.strip_prefix(tag) {
            Some(rest) if rest.is_empty() => Ok(""),
            Some(rest) if rest.starts_with(' ') => Ok(rest.trim_start()),
            _ => Err(CheckpointError::Parse {
                line: self.line_no,
                message: format!("expected `{tag}`, found `{line}`"),
            }),
        }
    }

    pub fn parse_f64(&self, token: &str) -> Result<f64, CheckpointError> {
        token.parse().map_err(|_| CheckpointError::Parse {
            line: self.line_no,
            message: format!("invalid number `{token}`"),
        })
    }

    pub fn parse_usize(&self, token: &str) -> Result<usize, CheckpointError> {
        token.parse().map_err(|_| CheckpointError::Parse {
            line: self.line_no,
            message: format!("invalid integer `{token}`"),
        })
    }

    fn parse_values(&mut self, tag: &str, expected_len: usize) -> Result<Vec<f64>, CheckpointError> {
        let rest = self.expect_tag(tag)?;
        let values: Result<Vec<f64>, _> = rest.split_whitespace().map(|t| self.parse_f64(t)).collect();
        let values = values?;
        if values.len() != expected_len {
            return Err(CheckpointError::Parse {
                line: self.line_no,
                message: format!(
                    "`{tag}` holds {} values, expected {expected_len}",
                    values.len()
                ),
            });
        }
        Ok(values)
    }
}

/// Reads a `network <name>` section; returns the name and the network.
pub fn read_mlp(reader: &mut Reader) -> Result<(String, Mlp), CheckpointError> {
    let name = reader.expect_tag("network")?.to_string();
    let raw = reader_tag(reader, "layers")?;
    let n_layers = reader.parse_usize(&raw)?;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rest = reader.expect_tag("layer")?;
        let mut parts = rest.split_whitespace();
        let input_size = reader.parse_usize(parts.next().unwrap_or(""))?;
        let output_size = reader.parse_usize(parts.next().unwrap_or(""))?;
        let act_name = parts.next().unwrap_or("");
        let activation = Activation::from_name(act_name).ok_or_else(|| CheckpointError::Parse {
            line: reader.line_no,
            message: format!("unknown activation `{act_name}`"),
        })?;
        let weights = reader.parse_values("weights", input_size * output_size)?;
        let bias = reader.parse_values("bias", output_size)?;
        layers.push(Layer {
            input_size,
            output_size,
            weights,
            bias,
            activation,
        });
    }
    let net = Mlp::from_layers(layers).map_err(|e| CheckpointError::Parse {
        line: reader.line_no,
        message: e.to_string(),
    })?;
    Ok((name, net))
}

/// Reads an `optimizer <name>` section; shapes are validated against `net`.
pub fn read_rmsprop(reader: &mut Reader, net: &Mlp) -> Result<(String, RmsPropState), CheckpointError> {
    let name = reader.expect_tag("optimizer")?.to_string();
    let raw = reader_tag(reader, "learning_rate")?;
    let learning_rate = reader.parse_f64(&raw)?;
    let raw = reader_tag(reader, "decay")?;
    let decay = reader.parse_f64(&raw)?;
    let raw = reader_tag(reader, "epsilon")?;
    let epsilon = reader.parse_f64(&raw)?;
    let raw = reader_tag(reader, "layers")?;
    let n_layers = reader.parse_usize(&raw)?;
    if n_layers != net.layers().len() {
        return Err(CheckpointError::Parse {
            line: reader.line_no,
            message: format!(
                "optimizer covers {n_layers} layers, network has {}",
                net.layers().len()
            ),
        });
    }
    let mut square_avg = Vec::with_capacity(n_layers);
    for layer in net.layers() {
        let weights = reader.parse_values("vweights", layer.weights.len())?;
        let bias = reader.parse_values("vbias", layer.bias.len())?;
        square_avg.push(LayerGradients { weights, bias });
    }
    Ok((
        name,
        RmsPropState {
            learning_rate,
            decay,
            epsilon,
            square_avg,
        },
    ))
}

fn reader_tag(reader: &mut Reader, tag: &str) -> Result<String, CheckpointError> {
    Ok(reader.expect_tag(tag)?.to_string())
}
