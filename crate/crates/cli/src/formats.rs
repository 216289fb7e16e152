//! On-disk containers: model checkpoints and dataset files.
//!
//! Both formats share the same skeleton:
//!
//! ```text
//! magic bytes (8) | version u32 LE | header_len u32 LE | header (UTF-8) | payload
//! ```
//!
//! The header is plain `key = value` text plus one `array <name> <dims...>`
//! line per payload array; the payload is the declared arrays in order, raw
//! little-endian f64. Round-trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use bipde_core::nn::Model;
use bipde_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::encoder_spec::{build_model, parse_spec, spec_of_model, spec_to_text};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"BPNNCKPT";
pub const DATASET_MAGIC: &[u8; 8] = b"BPDATSET";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("{0}")]
    Header(String),
}

fn corrupt(msg: impl Into<String>) -> FormatError {
    FormatError::Corrupt(msg.into())
}

/// A named list of f64 arrays plus a flat key-value header.
pub struct Container {
    pub header: Config,
    pub arrays: Vec<(String, Tensor)>,
}

impl Container {
    pub fn array(&self, name: &str) -> Option<&Tensor> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }
}

fn write_container(path: &Path, magic: &[u8; 8], c: &Container) -> Result<(), FormatError> {
    let mut header = c.header.to_text();
    for (name, t) in &c.arrays {
        header.push_str("array ");
        header.push_str(name);
        for d in t.shape() {
            header.push(' ');
            header.push_str(&d.to_string());
        }
        header.push('\n');
    }
    let mut out = Vec::with_capacity(16 + header.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for (_, t) in &c.arrays {
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

fn read_container(path: &Path, magic: &[u8; 8]) -> Result<Container, FormatError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(corrupt("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() < 16 + header_len {
        return Err(corrupt("truncated header"));
    }
    let header_text = std::str::from_utf8(&bytes[16..16 + header_len])
        .map_err(|_| corrupt("header is not UTF-8"))?;

    let mut kv_lines = String::new();
    let mut declarations: Vec<(String, Vec<usize>)> = Vec::new();
    for line in header_text.lines() {
        if let Some(rest) = line.strip_prefix("array ") {
            let mut parts = rest.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| corrupt("array line without a name"))?
                .to_string();
            let dims = parts
                .map(|p| p.parse::<usize>().map_err(|_| corrupt("bad array dim")))
                .collect::<Result<Vec<_>, _>>()?;
            declarations.push((name, dims));
        } else {
            kv_lines.push_str(line);
            kv_lines.push('\n');
        }
    }
    let header = Config::parse(&kv_lines).map_err(|e| FormatError::Header(e.msg))?;

    let mut offset = 16 + header_len;
    let mut arrays = Vec::with_capacity(declarations.len());
    for (name, dims) in declarations {
        let n: usize = dims.iter().product();
        let nbytes = n * 8;
        if bytes.len() < offset + nbytes {
            return Err(corrupt(format!("truncated payload for array '{name}'")));
        }
        let values: Vec<f64> = bytes[offset..offset + nbytes]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += nbytes;
        let t = Tensor::new(dims.clone(), values)
            .map_err(|_| corrupt(format!("shape/payload mismatch for '{name}'")))?;
        arrays.push((name, t));
    }
    if offset != bytes.len() {
        return Err(corrupt("trailing bytes after declared payload"));
    }
    Ok(Container { header, arrays })
}

pub fn write_dataset(path: &Path, c: &Container) -> Result<(), FormatError> {
    write_container(path, DATASET_MAGIC, c)
}

pub fn read_dataset(path: &Path) -> Result<Container, FormatError> {
    read_container(path, DATASET_MAGIC)
}

/// Persist a model: the spec string names the topology, parameter arrays
/// follow in binding order. `extra` carries run metadata the model needs at
/// inference time (bottleneck scaling ranges and the like).
pub fn save_checkpoint(path: &Path, model: &Model, extra: &Config) -> Result<(), FormatError> {
    let mut header = extra.clone();
    header.set("layers", spec_to_text(&spec_of_model(model)));
    let arrays = model
        .params()
        .into_iter()
        .enumerate()
        .map(|(i, t)| (format!("p{i}"), t.clone()))
        .collect();
    write_container(
        path,
        CHECKPOINT_MAGIC,
        &Container { header, arrays },
    )
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, Config), FormatError> {
    let c = read_container(path, CHECKPOINT_MAGIC)?;
    let spec_text = c
        .header
        .get("layers")
        .ok_or_else(|| corrupt("checkpoint header missing 'layers'"))?;
    let specs = parse_spec(spec_text).map_err(|e| FormatError::Header(e.msg))?;
    // Weights are overwritten below; the init RNG is irrelevant.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = build_model(&specs, &mut rng);
    let mut params = model.params_mut();
    if params.len() != c.arrays.len() {
        return Err(corrupt(format!(
            "checkpoint declares {} arrays, topology needs {}",
            c.arrays.len(),
            params.len()
        )));
    }
    for (param, (name, stored)) in params.iter_mut().zip(&c.arrays) {
        if param.shape() != stored.shape() {
            return Err(corrupt(format!(
                "array '{name}' has shape {:?}, topology expects {:?}",
                stored.shape(),
                param.shape()
            )));
        }
        **param = stored.clone();
    }
    drop(params);
    Ok((model, c.header))
}
