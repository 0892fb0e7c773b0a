//! Line-oriented architecture format.
//!
//! ```text
//! # comment
//! model rccnet input 32x32x3
//! conv 32 3x3 stride=1 pad=1
//! relu
//! batchnorm
//! maxpool
//! flatten
//! fc 512
//! dropout 0.5
//! ```
//!
//! `stride` defaults to 1 and `pad` to 0 when omitted.

use crate::error::{Error, Result};
use crate::model::spec::{LayerSpec, ModelSpec};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number(line: usize, what: &str, text: &str) -> Result<usize> {
    text.parse::<usize>().map_err(|_| {
        parse_err(
            line,
            format!("{what} must be a non-negative integer, got `{text}`"),
        )
    })
}

/// `AxB[xC...]` into its parts.
fn dims(line: usize, what: &str, text: &str, count: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split('x').collect();
    if parts.len() != count {
        return Err(parse_err(
            line,
            format!("{what} must have {count} `x`-separated dimensions, got `{text}`"),
        ));
    }
    parts.iter().map(|p| number(line, what, p)).collect()
}

fn parse_header(line: usize, words: &[&str]) -> Result<(String, [usize; 3])> {
    match words {
        ["model", name, "input", shape] => {
            let d = dims(line, "input shape", shape, 3)?;
            if d.contains(&0) {
                return Err(parse_err(line, "input dimensions must be at least 1"));
            }
            Ok((name.to_string(), [d[0], d[1], d[2]]))
        }
        _ => Err(parse_err(
            line,
            "expected header `model <name> input <H>x<W>x<C>`",
        )),
    }
}

fn parse_conv(line: usize, args: &[&str]) -> Result<LayerSpec> {
    let (filters, kernel, options) = match args {
        [f, k, rest @ ..] => (f, k, rest),
        _ => {
            return Err(parse_err(
                line,
                "expected `conv <filters> <k>x<k> [stride=<s>] [pad=<p>]`",
            ))
        }
    };
    let filters = number(line, "filter count", filters)?;
    let k = dims(line, "kernel", kernel, 2)?;
    if k[0] != k[1] {
        return Err(parse_err(
            line,
            format!("only square kernels are supported, got `{kernel}`"),
        ));
    }
    let (mut stride, mut pad) = (None, None);
    for opt in options {
        let (key, value) = opt
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key=value`, got `{opt}`")))?;
        let slot = match key {
            "stride" => &mut stride,
            "pad" => &mut pad,
            _ => return Err(parse_err(line, format!("unknown conv option `{key}`"))),
        };
        if slot.is_some() {
            return Err(parse_err(line, format!("`{key}` given twice")));
        }
        *slot = Some(number(line, key, value)?);
    }
    if filters == 0 || k[0] == 0 {
        return Err(parse_err(
            line,
            "filters and kernel size must be at least 1",
        ));
    }
    let stride = stride.unwrap_or(1);
    if stride == 0 {
        return Err(parse_err(line, "stride must be at least 1"));
    }
    Ok(LayerSpec::Conv {
        filters,
        kernel: k[0],
        stride,
        pad: pad.unwrap_or(0),
    })
}

fn no_args(line: usize, kind: &str, args: &[&str], layer: LayerSpec) -> Result<LayerSpec> {
    if !args.is_empty() {
        return Err(parse_err(line, format!("`{kind}` takes no arguments")));
    }
    Ok(layer)
}

fn parse_layer(line: usize, words: &[&str]) -> Result<LayerSpec> {
    let (kind, args) = words.split_first().expect("caller skips blank lines");
    match *kind {
        "conv" => parse_conv(line, args),
        "maxpool" => no_args(line, kind, args, LayerSpec::MaxPool),
        "relu" => no_args(line, kind, args, LayerSpec::Relu),
        "batchnorm" => no_args(line, kind, args, LayerSpec::BatchNorm),
        "flatten" => no_args(line, kind, args, LayerSpec::Flatten),
        "fc" => match args {
            [n] => {
                let neurons = number(line, "neuron count", n)?;
                if neurons == 0 {
                    return Err(parse_err(line, "fc needs at least one neuron"));
                }
                Ok(LayerSpec::Fc { neurons })
            }
            _ => Err(parse_err(line, "expected `fc <neurons>`")),
        },
        "dropout" => match args {
            [r] => {
                let rate: f64 = r.parse().map_err(|_| {
                    parse_err(line, format!("dropout rate must be a number, got `{r}`"))
                })?;
                if !(0.0..1.0).contains(&rate) {
                    return Err(parse_err(
                        line,
                        format!("dropout rate must be in [0, 1), got {rate}"),
                    ));
                }
                Ok(LayerSpec::Dropout { rate })
            }
            _ => Err(parse_err(line, "expected `dropout <rate>`")),
        },
        other => Err(parse_err(line, format!("unknown layer kind `{other}`"))),
    }
}

pub fn parse_model_spec(text: &str) -> Result<ModelSpec> {
    let mut header = None;
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(parse_header(line, &words)?);
        } else {
            layers.push(parse_layer(line, &words)?);
        }
    }
    let (name, input_shape) =
        header.ok_or_else(|| parse_err(text.lines().count().max(1), "missing `model` header"))?;
    Ok(ModelSpec::new(name, input_shape, layers))
}
