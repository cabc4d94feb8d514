//! Model serialization: `SGWT` magic, version, architecture header, then
//! all parameters as little-endian f32 in flat layer order.

use std::io::{Read, Write};
use std::path::Path;

use super::{CnnModel, FLATTEN_DIM};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SGWT";

fn header_dims(model: &CnnModel) -> [u32; 12] {
    [
        model.conv1.in_c as u32,
        model.conv1.out_c as u32,
        model.conv1.k as u32,
        model.conv2.in_c as u32,
        model.conv2.out_c as u32,
        model.conv2.k as u32,
        model.conv3.in_c as u32,
        model.conv3.out_c as u32,
        model.conv3.k as u32,
        FLATTEN_DIM as u32,
        model.dense1.out_dim as u32,
        model.dense2.out_dim as u32,
    ]
}

pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let werr = |e| Error::io(path, e);
    out.write_all(MAGIC).map_err(werr)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(werr)?;
    for dim in header_dims(model) {
        out.write_all(&dim.to_le_bytes()).map_err(werr)?;
    }
    for p in model.params_flat() {
        out.write_all(&(p as f32).to_le_bytes()).map_err(werr)?;
    }
    out.flush().map_err(werr)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CnnModel> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::BadModelFile {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    if bytes.len() < 8 + 12 * 4 {
        return Err(bad("truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(bad(&format!(
            "format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let mut dims = [0u32; 12];
    for (i, d) in dims.iter_mut().enumerate() {
        let off = 8 + i * 4;
        *d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    }
    let reference = CnnModel::zeros();
    if dims != header_dims(&reference) {
        return Err(bad(&format!(
            "architecture header {dims:?} does not match the fixed architecture"
        )));
    }

    let payload = &bytes[8 + 12 * 4..];
    let expected = reference.param_count() * 4;
    if payload.len() != expected {
        return Err(bad(&format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let params: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let mut model = CnnModel::zeros();
    model.set_params_flat(&params)?;
    Ok(model)
}
