//! Model checkpoints: magic `TDNMDL01`, a JSON architecture descriptor, then
//! raw little-endian `f64` tensors in a fixed order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::extractor::{ArchKind, ArchShape, CnnParams, ExtractorParams, MlpParams};
use super::{Head, ModelParams};
use crate::decomp::DecompConfig;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::num::Real;
use crate::signal::RngSeed;

const MAGIC: &[u8; 8] = b"TDNMDL01";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorDesc {
    name: String,
    rows: usize,
    cols: usize,
}

/// Companion data stored with a checkpoint so inference can reproduce the
/// training-time decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub arch: ArchKind,
    pub shape: ArchShape,
    /// Decomposition settings the selector was trained against.
    pub decomposition: Option<DecompConfig>,
    /// Seed used to derive per-trial decomposition seeds at inference.
    pub seed: Option<RngSeed>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderJson {
    meta: CheckpointMeta,
    tensors: Vec<TensorDesc>,
}

fn tensor_descs<F: Real>(params: &ModelParams<F>) -> Vec<TensorDesc> {
    let mut out = Vec::new();
    let named: Vec<(&str, usize, usize)> = match &params.extractor {
        ExtractorParams::BandPowerMlp(p) => vec![
            ("w1", p.w1.rows(), p.w1.cols()),
            ("b1", 1, p.b1.len()),
            ("w2", p.w2.rows(), p.w2.cols()),
            ("b2", 1, p.b2.len()),
        ],
        ExtractorParams::CompactCnn(p) => vec![
            ("temporal", p.temporal.rows(), p.temporal.cols()),
            ("b_temporal", 1, p.b_temporal.len()),
            ("spatial", p.spatial.rows(), p.spatial.cols()),
            ("b_spatial", 1, p.b_spatial.len()),
            ("pointwise", p.pointwise.rows(), p.pointwise.cols()),
            ("b_pointwise", 1, p.b_pointwise.len()),
        ],
    };
    for (name, rows, cols) in named {
        out.push(TensorDesc {
            name: name.to_string(),
            rows,
            cols,
        });
    }
    out.push(TensorDesc {
        name: "selector_w".into(),
        rows: params.selector.weight.rows(),
        cols: params.selector.weight.cols(),
    });
    out.push(TensorDesc {
        name: "selector_b".into(),
        rows: 1,
        cols: params.selector.bias.len(),
    });
    out.push(TensorDesc {
        name: "classifier_w".into(),
        rows: params.classifier.weight.rows(),
        cols: params.classifier.weight.cols(),
    });
    out.push(TensorDesc {
        name: "classifier_b".into(),
        rows: 1,
        cols: params.classifier.bias.len(),
    });
    out
}

/// Writes a checkpoint; tensors are widened/narrowed through `f64`.
pub fn save_model<F: Real>(
    params: &ModelParams<F>,
    meta: &CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let header = HeaderJson {
        meta: meta.clone(),
        tensors: tensor_descs(params),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::format(format!("checkpoint header encode: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    let mut tensors: Vec<&[F]> = params.extractor.tensors();
    tensors.extend(params.selector.tensors());
    tensors.extend(params.classifier.tensors());
    for t in tensors {
        for &v in t {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_tensor<F: Real>(r: &mut impl Read, len: usize) -> Result<Vec<F>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("checkpoint truncated inside tensor data")
        } else {
            Error::Io(e)
        }
    })?;
    bytes
        .chunks_exact(8)
        .map(|c| {
            let v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
            if !v.is_finite() {
                return Err(Error::validation("non-finite parameter in checkpoint"));
            }
            Ok(F::of(v))
        })
        .collect()
}

fn take<F: Real>(
    r: &mut impl Read,
    descs: &mut std::slice::Iter<'_, TensorDesc>,
    name: &str,
) -> Result<(usize, usize, Vec<F>)> {
    let d = descs
        .next()
        .ok_or_else(|| Error::format(format!("checkpoint missing tensor '{name}'")))?;
    if d.name != name {
        return Err(Error::format(format!(
            "checkpoint tensor order mismatch: expected '{name}', found '{}'",
            d.name
        )));
    }
    let data = read_tensor(r, d.rows * d.cols)?;
    Ok((d.rows, d.cols, data))
}

/// Loads a checkpoint saved by [`save_model`].
pub fn load_model<F: Real>(path: impl AsRef<Path>) -> Result<(ModelParams<F>, CheckpointMeta)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("checkpoint too short for magic"))?;
    if &magic != MAGIC {
        return Err(Error::format(format!(
            "bad checkpoint magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    r.read_exact(&mut u32buf)?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| Error::format("checkpoint truncated inside header"))?;
    let header: HeaderJson = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::format(format!("checkpoint header decode: {e}")))?;

    let mut descs = header.tensors.iter();
    let extractor = match header.meta.arch {
        ArchKind::BandPowerMlp => {
            let (r1, c1, w1) = take::<F>(&mut r, &mut descs, "w1")?;
            let (_, _, b1) = take::<F>(&mut r, &mut descs, "b1")?;
            let (r2, c2, w2) = take::<F>(&mut r, &mut descs, "w2")?;
            let (_, _, b2) = take::<F>(&mut r, &mut descs, "b2")?;
            ExtractorParams::BandPowerMlp(MlpParams {
                w1: Mat::from_vec(r1, c1, w1),
                b1,
                w2: Mat::from_vec(r2, c2, w2),
                b2,
            })
        }
        ArchKind::CompactCnn => {
            let (rt, ct, temporal) = take::<F>(&mut r, &mut descs, "temporal")?;
            let (_, _, b_temporal) = take::<F>(&mut r, &mut descs, "b_temporal")?;
            let (rs, cs, spatial) = take::<F>(&mut r, &mut descs, "spatial")?;
            let (_, _, b_spatial) = take::<F>(&mut r, &mut descs, "b_spatial")?;
            let (rp, cp, pointwise) = take::<F>(&mut r, &mut descs, "pointwise")?;
            let (_, _, b_pointwise) = take::<F>(&mut r, &mut descs, "b_pointwise")?;
            ExtractorParams::CompactCnn(CnnParams {
                temporal: Mat::from_vec(rt, ct, temporal),
                b_temporal,
                spatial: Mat::from_vec(rs, cs, spatial),
                b_spatial,
                pointwise: Mat::from_vec(rp, cp, pointwise),
                b_pointwise,
            })
        }
    };
    let (rw, cw, sw) = take::<F>(&mut r, &mut descs, "selector_w")?;
    let (_, _, sb) = take::<F>(&mut r, &mut descs, "selector_b")?;
    let (rc, cc, cw_data) = take::<F>(&mut r, &mut descs, "classifier_w")?;
    let (_, _, cb) = take::<F>(&mut r, &mut descs, "classifier_b")?;

    let params = ModelParams {
        shape: header.meta.shape,
        extractor,
        selector: Head {
            weight: Mat::from_vec(rw, cw, sw),
            bias: sb,
        },
        classifier: Head {
            weight: Mat::from_vec(rc, cc, cw_data),
            bias: cb,
        },
    };
    Ok((params, header.meta))
}
