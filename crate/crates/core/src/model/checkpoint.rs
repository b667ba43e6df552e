//! Binary checkpoint format (little-endian):
//!
//! ```text
//! "HMCK" | u32 version | u32 json_len | json header | u32 record_count
//! record := u32 name_len | name (utf-8) | u32 rank | u32 dims[rank] | f32 data[Π dims]
//! ```
//!
//! The JSON header carries the architecture, feature front end, normaliser
//! and training metadata. Records hold learnable parameters followed by
//! persistent buffers (batch-norm running statistics).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, FeatureConfig, ModelCheckpoint, Network, Normalizer, TrainingMeta};
use crate::error::{Error, Result};
use crate::numerics::Params;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HMCK";

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    features: FeatureConfig,
    normalizer: Normalizer,
    meta: TrainingMeta,
}

pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        architecture: checkpoint.architecture.clone(),
        features: checkpoint.features.clone(),
        normalizer: checkpoint.normalizer.clone(),
        meta: checkpoint.meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;

    let mut records: Vec<u8> = Vec::new();
    let mut count = 0u32;
    let mut write_record = |name: &str, dims: &[usize], data: &[f32]| {
        count += 1;
        records.extend_from_slice(&(name.len() as u32).to_le_bytes());
        records.extend_from_slice(name.as_bytes());
        records.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            records.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            records.extend_from_slice(&v.to_le_bytes());
        }
    };
    checkpoint.network.visit("", &mut write_record);
    checkpoint.network.visit_buffers("", &mut write_record);

    let mut buf = Vec::with_capacity(16 + json.len() + records.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&count.to_le_bytes());
    buf.extend_from_slice(&records);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "{}: checkpoint truncated at byte {}",
                self.path.display(),
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelCheckpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if cur.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format(format!(
            "{}: not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let json_len = cur.u32()? as usize;
    let header: Header = serde_json::from_slice(cur.take(json_len)?)
        .map_err(|e| Error::Format(format!("{}: bad checkpoint header: {e}", path.display())))?;

    let count = cur.u32()?;
    let mut records: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::new();
    for _ in 0..count {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::Format(format!("{}: non-UTF-8 record name", path.display())))?
            .to_string();
        let rank = cur.u32()? as usize;
        let dims = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len: usize = dims.iter().product();
        let data = cur
            .take(len * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if records.insert(name.clone(), (dims, data)).is_some() {
            return Err(Error::Format(format!("{}: duplicate record `{name}`", path.display())));
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{}: trailing bytes after records",
            path.display()
        )));
    }

    let mut network = Network::<f32>::build(&header.architecture, 0)?;
    let mut shapes: HashMap<String, Vec<usize>> = HashMap::new();
    network.visit("", &mut |name, dims, _| {
        shapes.insert(name.to_string(), dims.to_vec());
    });
    network.visit_buffers("", &mut |name, dims, _| {
        shapes.insert(name.to_string(), dims.to_vec());
    });
    let mut problem: Option<String> = None;
    let mut fill = |name: &str, data: &mut [f32]| match records.remove(name) {
        Some((dims, values)) if Some(&dims) == shapes.get(name) && values.len() == data.len() => {
            data.copy_from_slice(&values)
        }
        Some((dims, _)) => {
            problem.get_or_insert(format!(
                "record `{name}` has shape {dims:?}, expected {:?}",
                shapes.get(name)
            ));
        }
        None => {
            problem.get_or_insert(format!("missing record `{name}`"));
        }
    };
    network.visit_mut("", &mut fill);
    network.visit_buffers_mut("", &mut fill);
    if let Some(p) = problem {
        return Err(Error::Format(format!("{}: {p}", path.display())));
    }
    if let Some(extra) = records.keys().next() {
        return Err(Error::Format(format!(
            "{}: unexpected record `{extra}`",
            path.display()
        )));
    }

    Ok(ModelCheckpoint {
        architecture: header.architecture,
        features: header.features,
        normalizer: header.normalizer,
        meta: header.meta,
        network,
    })
}
