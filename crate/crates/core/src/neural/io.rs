//! Model file: a versioned line-oriented text document.
//!
//! ```text
//! maskforge-mlp
//! format_version 1
//! tag D4
//! layer_dims 1026 256 256 1026
//! cost discriminative
//! lambda 4.0000000000000002e-1
//! source_dims 513 513
//! seed 7
//! weight 0 256 1026
//! <256 rows of 1026 numbers>
//! bias 0 256
//! <one row of 256 numbers>
//! …
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{CostSpec, Mlp};
use crate::error::{Error, Result};
use crate::textfile::{fmt_f64, read_text, TextReader, TextWriter};

const MAGIC: &str = "maskforge-mlp";
pub const MLP_FORMAT_VERSION: u32 = 1;

pub(crate) fn encode_mlp(net: &Mlp) -> String {
    let mut w = TextWriter::new(MAGIC, MLP_FORMAT_VERSION);
    w.field("tag", if net.tag.is_empty() { "-" } else { &net.tag });
    w.list("layer_dims", net.layer_dims());
    match &net.cost {
        CostSpec::MaskMse => w.field("cost", "mask_mse"),
        CostSpec::Discriminative {
            lambda,
            source_dims,
        } => {
            w.field("cost", "discriminative");
            w.field("lambda", fmt_f64(*lambda));
            w.list("source_dims", source_dims);
        }
    }
    w.field("seed", net.seed);
    for (l, (weight, bias)) in net.weights.iter().zip(&net.biases).enumerate() {
        w.field("weight", format!("{l} {} {}", weight.nrows(), weight.ncols()));
        for row in weight.rows() {
            w.row(row.iter().copied());
        }
        w.field("bias", format!("{l} {}", bias.len()));
        w.row(bias.iter().copied());
    }
    w.finish()
}

pub(crate) fn decode_mlp(text: &str) -> Result<Mlp> {
    let mut r = TextReader::open(text, MAGIC, MLP_FORMAT_VERSION)?;
    let tag: String = r.parse_field("tag")?;
    let dims: Vec<usize> = r.parse_list("layer_dims")?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::format("layer_dims", format!("invalid dims {dims:?}")));
    }
    let kind: String = r.parse_field("cost")?;
    let cost = match kind.as_str() {
        "mask_mse" => CostSpec::MaskMse,
        "discriminative" => {
            let lambda: f64 = r.parse_field("lambda")?;
            let source_dims: Vec<usize> = r.parse_list("source_dims")?;
            CostSpec::Discriminative {
                lambda,
                source_dims,
            }
        }
        other => return Err(Error::format("cost", format!("unknown cost kind `{other}`"))),
    };
    cost.validate(*dims.last().unwrap())
        .map_err(|e| Error::format("cost", e.to_string()))?;
    let seed: u64 = r.parse_field("seed")?;

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let header: Vec<usize> = r.parse_list("weight")?;
        if header != [l, fan_out, fan_in] {
            return Err(Error::format(
                format!("weight {l}"),
                format!("expected header [{l}, {fan_out}, {fan_in}], found {header:?}"),
            ));
        }
        let mut flat = Vec::with_capacity(fan_in * fan_out);
        for row in 0..fan_out {
            flat.extend(r.row(&format!("weight {l} row {row}"), fan_in)?);
        }
        weights.push(Array2::from_shape_vec((fan_out, fan_in), flat).expect("row count checked"));
        let header: Vec<usize> = r.parse_list("bias")?;
        if header != [l, fan_out] {
            return Err(Error::format(
                format!("bias {l}"),
                format!("expected header [{l}, {fan_out}], found {header:?}"),
            ));
        }
        biases.push(Array1::from(r.row(&format!("bias {l}"), fan_out)?));
    }
    r.finish()?;

    let mut net = Mlp::from_parameters(weights, biases)?;
    net.cost = cost;
    net.seed = seed;
    net.tag = if tag == "-" { String::new() } else { tag };
    Ok(net)
}

pub fn save_mlp(net: &Mlp, path: &Path) -> Result<()> {
    std::fs::write(path, encode_mlp(net))
        .map_err(|e| Error::io(format!("writing model {}", path.display()), e))
}

pub fn load_mlp(path: &Path) -> Result<Mlp> {
    decode_mlp(&read_text(path)?)
}
