//! Versioned binary checkpoint container.
//!
//! Layout: magic `WCCK`, u32 container version, u64 JSON header length,
//! JSON header (schema, caller metadata, tensor descriptors), then each
//! tensor's values as little-endian f64 in descriptor order, row-major.
//! Values are stored at f64 width regardless of the in-memory element type
//! so checkpoints are interchangeable between f32 and f64 models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elem::Elem;
use crate::error::{CoreError, Result};
use crate::nn::Param;

const MAGIC: &[u8; 4] = b"WCCK";
const CONTAINER_VERSION: u32 = 1;
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorDesc {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub buffer: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: u32,
    meta: serde_json::Value,
    tensors: Vec<TensorDesc>,
}

#[derive(Debug)]
pub struct LoadedTensor {
    pub desc: TensorDesc,
    pub data: Vec<f64>,
}

#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub meta: serde_json::Value,
    pub tensors: Vec<LoadedTensor>,
}

impl LoadedCheckpoint {
    pub fn tensor(&self, name: &str) -> Option<&LoadedTensor> {
        self.tensors.iter().find(|t| t.desc.name == name)
    }
}

pub fn save<T: Elem>(path: &Path, meta: &serde_json::Value, tensors: &[&Param<T>]) -> Result<()> {
    let descs: Vec<TensorDesc> = tensors
        .iter()
        .map(|p| TensorDesc {
            name: p.name().to_string(),
            shape: p.value.shape().to_vec(),
            trainable: p.trainable,
            buffer: p.buffer,
        })
        .collect();
    let header = Header {
        schema: SCHEMA_VERSION,
        meta: meta.clone(),
        tensors: descs,
    };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for p in tensors {
        let contig = p.value.as_standard_layout();
        for v in contig.iter() {
            w.write_all(&Elem::to_f64(*v).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<LoadedCheckpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Checkpoint(format!(
            "{}: not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != CONTAINER_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "unsupported container version {version} (supported: {CONTAINER_VERSION})"
        )));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let json_len = u64::from_le_bytes(buf8) as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    if header.schema != SCHEMA_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "unsupported schema version {} (supported: {SCHEMA_VERSION})",
            header.schema
        )));
    }
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for desc in header.tensors {
        let count: usize = desc.shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf8)?;
            data.push(f64::from_le_bytes(buf8));
        }
        tensors.push(LoadedTensor { desc, data });
    }
    Ok(LoadedCheckpoint {
        meta: header.meta,
        tensors,
    })
}

/// Strict restore: every model tensor must exist in the checkpoint with a
/// matching shape, and the checkpoint must not carry extras.
pub fn restore_into<T: Elem>(ck: &LoadedCheckpoint, params: &mut [&mut Param<T>]) -> Result<()> {
    if ck.tensors.len() != params.len() {
        return Err(CoreError::Checkpoint(format!(
            "tensor count mismatch: checkpoint has {}, model has {}",
            ck.tensors.len(),
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let t = ck
            .tensor(p.name())
            .ok_or_else(|| CoreError::Checkpoint(format!("missing tensor {}", p.name())))?;
        fill_param(p, &t.desc.shape, &t.data)?;
    }
    Ok(())
}

pub fn fill_param<T: Elem>(p: &mut Param<T>, shape: &[usize], data: &[f64]) -> Result<()> {
    if p.value.shape() != shape {
        return Err(CoreError::Checkpoint(format!(
            "shape mismatch for {}: checkpoint {:?}, model {:?}",
            p.name(),
            shape,
            p.value.shape()
        )));
    }
    let mut contig = p.value.view_mut();
    for (dst, &src) in contig.iter_mut().zip(data.iter()) {
        *dst = T::cast(src);
    }
    Ok(())
}
