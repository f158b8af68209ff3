use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::layer::Layer;
use super::model::Model;
use crate::error::{Error, Result};
use crate::util::{LeReader, LeWriter};

const MAGIC: &[u8; 4] = b"NCK1";
const VERSION: u32 = 1;

struct Record {
    trainable: bool,
    dims: Vec<u64>,
    data: Vec<f64>,
}

/// Writes every parameter array (including masks and batch-norm statistics)
/// plus a readiness flag per batch-norm layer.
pub fn write_checkpoint(model: &mut Model, path: &Path) -> Result<()> {
    let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
    w.magic(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(model.layers.len() as u32)?;
    let mut records: Vec<(String, Record)> = Vec::new();
    model.visit_params(&mut |p| {
        records.push((
            p.name.clone(),
            Record {
                trainable: p.trainable,
                dims: p.shape.iter().map(|&d| d as u64).collect(),
                data: p.data.to_vec(),
            },
        ));
    });
    for (idx, layer) in model.layers.iter().enumerate() {
        if let Layer::Bn(bn) = layer {
            records.push((
                format!("layer{idx:02}.bn_ready"),
                Record {
                    trainable: false,
                    dims: vec![1],
                    data: vec![if bn.finalized { 1.0 } else { 0.0 }],
                },
            ));
        }
    }
    for (name, rec) in &records {
        w.u16(name.len() as u16)?;
        w.bytes(name.as_bytes())?;
        w.u8(rec.trainable as u8)?;
        w.u8(rec.dims.len() as u8)?;
        for &d in &rec.dims {
            w.u64(d)?;
        }
        w.f64_slice(&rec.data)?;
    }
    Ok(())
}

/// Loads a checkpoint into a model of matching architecture. Every model
/// parameter must be present with its exact shape.
pub fn read_checkpoint(model: &mut Model, path: &Path) -> Result<()> {
    let mut r = LeReader::new(BufReader::new(File::open(path)?));
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let layer_count = r.u32()? as usize;
    if layer_count != model.layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint has {} layers, model has {}",
            layer_count,
            model.layers.len()
        )));
    }
    let mut records: HashMap<String, Record> = HashMap::new();
    loop {
        let name_len = match r.maybe_u16()? {
            Some(v) => v,
            None => break,
        };
        let name = String::from_utf8(r.bytes(name_len as usize, "parameter name")?)
            .map_err(|_| Error::Truncated("parameter name is not UTF-8".into()))?;
        let trainable = r.u8()? != 0;
        let rank = r.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u64()?);
        }
        let len: u64 = dims.iter().product();
        let data = r.f64_vec(len as usize, &name)?;
        records.insert(
            name,
            Record {
                trainable,
                dims,
                data,
            },
        );
    }
    let mut missing: Vec<String> = Vec::new();
    let mut shape_err: Option<String> = None;
    model.visit_params(&mut |p| {
        match records.get(&p.name) {
            Some(rec) => {
                let dims: Vec<u64> = p.shape.iter().map(|&d| d as u64).collect();
                if rec.dims != dims || rec.data.len() != p.data.len() {
                    shape_err.get_or_insert(format!(
                        "parameter {}: checkpoint shape {:?} vs model {:?}",
                        p.name, rec.dims, dims
                    ));
                } else {
                    p.data.copy_from_slice(&rec.data);
                }
            }
            None => missing.push(p.name.clone()),
        }
    });
    if let Some(msg) = shape_err {
        return Err(Error::ShapeMismatch(msg));
    }
    if !missing.is_empty() {
        return Err(Error::Truncated(format!(
            "checkpoint is missing parameters: {}",
            missing.join(", ")
        )));
    }
    for (idx, layer) in model.layers.iter_mut().enumerate() {
        if let Layer::Bn(bn) = layer {
            let name = format!("layer{idx:02}.bn_ready");
            bn.finalized = match records.get(&name) {
                Some(rec) => rec.data.first().copied().unwrap_or(0.0) != 0.0,
                None => false,
            };
        }
    }
    Ok(())
}
