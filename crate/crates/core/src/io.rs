//! The `.fgrid` container: one line of JSON header, a newline, then the
//! row-major little-endian payload.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldgen::{FieldSample, GridGeometry, SampleSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    #[default]
    F64,
    I32,
    U8,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F64 => 8,
            DType::I32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgridHeader {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    pub pad: f64,
    pub seed: u64,
    pub kernel: Option<SampleSource>,
    pub level: Option<f64>,
    #[serde(default)]
    pub dtype: DType,
}

impl FgridHeader {
    pub fn for_grid(grid: &GridGeometry, seed: u64, kernel: Option<SampleSource>) -> Self {
        Self {
            dim: grid.dim,
            lo: grid.lo.clone(),
            hi: grid.hi.clone(),
            h: grid.h,
            pad: grid.pad,
            seed,
            kernel,
            level: None,
            dtype: DType::F64,
        }
    }

    pub fn grid(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.lo.clone(), self.hi.clone(), self.h, self.pad)
    }
}

/// Payload of a `.fgrid` file.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F64(Vec<f64>),
    I32(Vec<i32>),
    U8(Vec<u8>),
}

impl Payload {
    fn dtype(&self) -> DType {
        match self {
            Payload::F64(_) => DType::F64,
            Payload::I32(_) => DType::I32,
            Payload::U8(_) => DType::U8,
        }
    }

    fn len(&self) -> usize {
        match self {
            Payload::F64(v) => v.len(),
            Payload::I32(v) => v.len(),
            Payload::U8(v) => v.len(),
        }
    }
}

pub fn write_fgrid(w: &mut impl Write, header: &FgridHeader, payload: &Payload) -> Result<()> {
    let mut header = header.clone();
    header.dtype = payload.dtype();
    let n = header.grid()?.len();
    if payload.len() != n {
        return Err(Error::Format(format!(
            "payload has {} entries, grid has {n}",
            payload.len()
        )));
    }
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(n * header.dtype.width());
    match payload {
        Payload::F64(v) => v
            .iter()
            .for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        Payload::I32(v) => v
            .iter()
            .for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        Payload::U8(v) => buf.extend_from_slice(v),
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_fgrid(r: impl Read) -> Result<(FgridHeader, Payload)> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing header terminator".into()));
    }
    let header: FgridHeader = serde_json::from_slice(&line[..line.len() - 1])?;
    let n = header.grid()?.len();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let width = header.dtype.width();
    if bytes.len() != n * width {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            bytes.len(),
            n * width
        )));
    }
    let payload = match header.dtype {
        DType::F64 => Payload::F64(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ),
        DType::I32 => Payload::I32(
            bytes
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        DType::U8 => Payload::U8(bytes),
    };
    Ok((header, payload))
}

/// Writes `sample.values` atomically (temp file then rename).
pub fn save_sample(path: &Path, sample: &FieldSample) -> Result<()> {
    let header = FgridHeader::for_grid(&sample.grid, sample.seed, Some(sample.source.clone()));
    let mut buf = Vec::new();
    write_fgrid(&mut buf, &header, &Payload::F64(sample.values.clone()))?;
    write_atomic(path, &buf)
}

pub fn load_sample(path: &Path) -> Result<FieldSample> {
    let (header, payload) = read_fgrid(fs::File::open(path)?)?;
    let Payload::F64(values) = payload else {
        return Err(Error::Format("sample payload must be f64".into()));
    };
    let mut s = FieldSample::from_values(header.grid()?, values)?;
    s.seed = header.seed;
    if let Some(src) = header.kernel {
        s.source = src;
    }
    Ok(s)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridGeometry {
        GridGeometry::new(vec![0.0, -1.0], vec![1.0, 1.0], 0.5, 1.0).unwrap()
    }

    proptest! {
        #[test]
        fn f64_roundtrip_is_bit_exact(bits in proptest::collection::vec(any::<u64>(), 15)) {
            let values: Vec<f64> = bits.into_iter().map(f64::from_bits).collect();
            let header = FgridHeader::for_grid(&grid(), 42, None);
            let mut buf = Vec::new();
            write_fgrid(&mut buf, &header, &Payload::F64(values.clone())).unwrap();
            let (h2, p2) = read_fgrid(&buf[..]).unwrap();
            prop_assert_eq!(h2, header);
            let Payload::F64(back) = p2 else { panic!() };
            let a: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn header_layout() {
        let header = FgridHeader::for_grid(&grid(), 7, None);
        let mut buf = Vec::new();
        write_fgrid(&mut buf, &header, &Payload::F64(vec![1.5; 15])).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        let json: serde_json::Value = serde_json::from_slice(&buf[..nl]).unwrap();
        for key in ["dim", "lo", "hi", "h", "pad", "seed", "kernel", "level"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert!(json["level"].is_null());
        assert_eq!(buf.len() - nl - 1, 15 * 8);
        assert_eq!(&buf[nl + 1..nl + 9], &1.5f64.to_le_bytes());
    }

    #[test]
    fn labels_and_truncation_errors() {
        let mut header = FgridHeader::for_grid(&grid(), 1, None);
        header.level = Some(0.25);
        let mut buf = Vec::new();
        let labels: Vec<i32> = (0..15).collect();
        write_fgrid(&mut buf, &header, &Payload::I32(labels.clone())).unwrap();
        let (h2, p2) = read_fgrid(&buf[..]).unwrap();
        assert_eq!(h2.level, Some(0.25));
        assert_eq!(p2, Payload::I32(labels));
        buf.pop();
        assert!(read_fgrid(&buf[..]).is_err());
    }
}
