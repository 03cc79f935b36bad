//! Binary model file, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "SANDMLP\0"
//! version  u32
//! seed     u64
//! n_dims   u32
//! dims     u32 x n_dims
//! in_min   f64 x dims[0]
//! in_max   f64 x dims[0]
//! out_min  f64 x dims[last]
//! out_max  f64 x dims[last]
//! for each layer l:
//!     weights  f64 x dims[l+1] * dims[l]   (row-major, one row per output)
//!     biases   f64 x dims[l+1]
//! ```
//!
//! Trailing bytes are rejected.

use std::io::{Read, Write};
use std::path::Path;

use super::{Layer, LearnerError, MlpModel, Result, Scaling};

pub const MAGIC: [u8; 8] = *b"SANDMLP\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_model<W: Write>(model: &MlpModel, mut w: W) -> Result<()> {
    let dims = model.dims();
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&model.seed().to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in &dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    let s_in = model.input_scaling();
    let s_out = model.output_scaling();
    for block in [&s_in.min, &s_in.max, &s_out.min, &s_out.max] {
        write_f64s(&mut w, block)?;
    }
    for layer in model.layers() {
        write_f64s(&mut w, &layer.weights)?;
        write_f64s(&mut w, &layer.biases)?;
    }
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < n {
            return Err(LearnerError::Format("truncated".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| LearnerError::Format("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<MlpModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes };
    if c.take(8)? != MAGIC {
        return Err(LearnerError::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(LearnerError::Version(version));
    }
    let seed = c.u64()?;
    let n_dims = c.u32()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(LearnerError::Format(format!("layer count {n_dims}")));
    }
    let dims: Vec<usize> = (0..n_dims).map(|_| c.u32().map(|d| d as usize)).collect::<Result<_>>()?;
    if dims.iter().any(|&d| d == 0) {
        return Err(LearnerError::Format("zero-width layer".into()));
    }
    let (d_in, d_out) = (dims[0], dims[n_dims - 1]);
    let input = Scaling { min: c.f64s(d_in)?, max: c.f64s(d_in)? };
    let output = Scaling { min: c.f64s(d_out)?, max: c.f64s(d_out)? };
    let mut layers = Vec::with_capacity(n_dims - 1);
    for w in dims.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = c.f64s(inputs * outputs)?;
        let biases = c.f64s(outputs)?;
        layers.push(Layer { inputs, outputs, weights, biases });
    }
    if !c.bytes.is_empty() {
        return Err(LearnerError::Format(format!("{} trailing bytes", c.bytes.len())));
    }
    MlpModel::from_parts(layers, input, output, seed)
}

pub fn save(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<MlpModel> {
    read_model(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> MlpModel {
        let mut m = MlpModel::new(&[40, 100, 100, 100, 4], 17);
        m.set_scalings(
            Scaling { min: vec![-1.0; 40], max: vec![300.0; 40] },
            Scaling { min: vec![0.0; 4], max: vec![320.0, 240.0, 320.0, 240.0] },
        )
        .unwrap();
        m
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save(&m, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back, m);
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 3.7).collect();
        assert_eq!(m.predict(&x).unwrap(), back.predict(&x).unwrap());
    }

    #[test]
    fn truncated_and_tampered_files_fail() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        assert!(matches!(read_model(&buf[..buf.len() - 1]), Err(LearnerError::Format(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_model(extra.as_slice()), Err(LearnerError::Format(_))));
        let mut v2 = buf.clone();
        v2[8] = 2;
        assert!(matches!(read_model(v2.as_slice()), Err(LearnerError::Version(2))));
        let mut bad = buf;
        bad[0] = b'X';
        assert!(matches!(read_model(bad.as_slice()), Err(LearnerError::Format(_))));
    }
}
