//! In-memory trajectory container and its on-disk format.
//!
//! File layout: magic "SSOP", format version u32 LE, metadata block
//! (u64 entry count, then length-prefixed UTF-8 "key=value" strings),
//! then four arrays (inputs, outputs, grid, coefficients), each a u64
//! rank, u64 extents, and little-endian float64 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"SSOP";
const VERSION: u32 = 1;

/// A batch of input/output trajectories on a shared uniform time grid.
/// `inputs` is `[n, len, in_dim]` row-major, `outputs` `[n, len, out_dim]`,
/// and `coefficients` an optional `[n, k]` block of per-sample statics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    n: usize,
    len: usize,
    in_dim: usize,
    out_dim: usize,
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub grid: Vec<f64>,
    coeff_dim: usize,
    pub coefficients: Option<Vec<f64>>,
    pub metadata: Vec<(String, String)>,
}

impl TrajectoryDataset {
    pub fn new(
        n: usize,
        len: usize,
        in_dim: usize,
        out_dim: usize,
        inputs: Vec<f64>,
        outputs: Vec<f64>,
        grid: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || len == 0 || in_dim == 0 || out_dim == 0 {
            return Err(Error::Domain(format!(
                "dataset extents must be positive, got [{n}, {len}, {in_dim}->{out_dim}]"
            )));
        }
        if inputs.len() != n * len * in_dim {
            return Err(Error::Domain(format!(
                "input buffer holds {} values, expected {}",
                inputs.len(),
                n * len * in_dim
            )));
        }
        if outputs.len() != n * len * out_dim {
            return Err(Error::Domain(format!(
                "output buffer holds {} values, expected {}",
                outputs.len(),
                n * len * out_dim
            )));
        }
        if grid.len() != len {
            return Err(Error::Domain(format!(
                "grid holds {} points, expected {len}",
                grid.len()
            )));
        }
        if len > 1 {
            let dt = grid[1] - grid[0];
            if !(dt > 0.0) {
                return Err(Error::Domain("grid must be strictly increasing".into()));
            }
            for w in grid.windows(2) {
                if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                    return Err(Error::Domain("grid must be uniform".into()));
                }
            }
        }
        for (what, buf) in [("inputs", &inputs), ("outputs", &outputs), ("grid", &grid)] {
            if let Some(bad) = buf.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric { what: match what {
                    "inputs" => "dataset inputs",
                    "outputs" => "dataset outputs",
                    _ => "dataset grid",
                }, index: bad });
            }
        }
        Ok(TrajectoryDataset {
            n,
            len,
            in_dim,
            out_dim,
            inputs,
            outputs,
            grid,
            coeff_dim: 0,
            coefficients: None,
            metadata: Vec::new(),
        })
    }

    pub fn with_coefficients(mut self, k: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || values.len() != self.n * k {
            return Err(Error::Domain(format!(
                "coefficient block holds {} values, expected {} x {k}",
                values.len(),
                self.n
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "dataset coefficients",
                index: bad,
            });
        }
        self.coeff_dim = k;
        self.coefficients = Some(values);
        Ok(self)
    }

    pub fn insert_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        if let Some(slot) = self.metadata.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value;
        } else {
            self.metadata.push((key.to_string(), value));
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn coeff_dim(&self) -> usize {
        self.coeff_dim
    }

    /// Flat `[len, in_dim]` slice of sample `i`.
    pub fn input(&self, i: usize) -> &[f64] {
        let stride = self.len * self.in_dim;
        &self.inputs[i * stride..(i + 1) * stride]
    }

    /// Flat `[len, out_dim]` slice of sample `i`.
    pub fn output(&self, i: usize) -> &[f64] {
        let stride = self.len * self.out_dim;
        &self.outputs[i * stride..(i + 1) * stride]
    }

    pub fn coefficient(&self, i: usize) -> Option<&[f64]> {
        self.coefficients
            .as_ref()
            .map(|c| &c[i * self.coeff_dim..(i + 1) * self.coeff_dim])
    }

    /// A new dataset holding the samples in `range`, metadata preserved.
    pub fn subset(&self, range: Range<usize>) -> Result<TrajectoryDataset> {
        if range.start >= range.end || range.end > self.n {
            return Err(Error::Domain(format!(
                "subset {range:?} is out of bounds for {} samples",
                self.n
            )));
        }
        let in_stride = self.len * self.in_dim;
        let out_stride = self.len * self.out_dim;
        let mut ds = TrajectoryDataset::new(
            range.end - range.start,
            self.len,
            self.in_dim,
            self.out_dim,
            self.inputs[range.start * in_stride..range.end * in_stride].to_vec(),
            self.outputs[range.start * out_stride..range.end * out_stride].to_vec(),
            self.grid.clone(),
        )?;
        if let Some(c) = &self.coefficients {
            ds = ds.with_coefficients(
                self.coeff_dim,
                c[range.start * self.coeff_dim..range.end * self.coeff_dim].to_vec(),
            )?;
        }
        ds.metadata = self.metadata.clone();
        Ok(ds)
    }
}

fn write_array(w: &mut impl Write, extents: &[u64], data: &[f64]) -> Result<()> {
    let total: u64 = extents.iter().product();
    debug_assert_eq!(total as usize, data.len());
    w.write_all(&(extents.len() as u64).to_le_bytes())?;
    for e in extents {
        w.write_all(&e.to_le_bytes())?;
    }
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_dataset(ds: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.metadata.len() as u64).to_le_bytes())?;
    for (k, v) in &ds.metadata {
        let entry = format!("{k}={v}");
        w.write_all(&(entry.len() as u64).to_le_bytes())?;
        w.write_all(entry.as_bytes())?;
    }
    let (n, len) = (ds.n as u64, ds.len as u64);
    write_array(&mut w, &[n, len, ds.in_dim as u64], &ds.inputs)?;
    write_array(&mut w, &[n, len, ds.out_dim as u64], &ds.outputs)?;
    write_array(&mut w, &[len], &ds.grid)?;
    match &ds.coefficients {
        Some(c) => write_array(&mut w, &[n, ds.coeff_dim as u64], c)?,
        None => write_array(&mut w, &[n, 0], &[])?,
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format(format!("file truncated while reading {what}"))
            } else {
                Error::Io(e)
            }
        })
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64_array(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; count * 8];
        self.bytes(&mut raw, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn array(&mut self, expect_rank: usize, what: &str) -> Result<(Vec<u64>, Vec<f64>)> {
        let rank = self.u64(what)? as usize;
        if rank != expect_rank {
            return Err(Error::Format(format!(
                "{what} has rank {rank}, expected {expect_rank}"
            )));
        }
        let mut extents = Vec::with_capacity(rank);
        for _ in 0..rank {
            extents.push(self.u64(what)?);
        }
        let total: u64 = extents.iter().product();
        if total > (1 << 33) {
            return Err(Error::Format(format!(
                "{what} declares {total} values, refusing to allocate"
            )));
        }
        let data = self.f64_array(total as usize, what)?;
        Ok((extents, data))
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    let mut magic = [0u8; 4];
    r.bytes(&mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:02x?}, expected \"SSOP\""
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let n_meta = r.u64("metadata count")?;
    let mut metadata = Vec::new();
    for _ in 0..n_meta {
        let len = r.u64("metadata entry")? as usize;
        if len > (1 << 20) {
            return Err(Error::Format("metadata entry over 1 MiB".into()));
        }
        let mut raw = vec![0u8; len];
        r.bytes(&mut raw, "metadata entry")?;
        let entry = String::from_utf8(raw)
            .map_err(|_| Error::Format("metadata entry is not UTF-8".into()))?;
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("metadata entry \"{entry}\" lacks '='")))?;
        metadata.push((k.to_string(), v.to_string()));
    }
    let (in_ext, inputs) = r.array(3, "inputs")?;
    let (out_ext, outputs) = r.array(3, "outputs")?;
    let (grid_ext, grid) = r.array(1, "grid")?;
    let (coeff_ext, coeffs) = r.array(2, "coefficients")?;
    if in_ext[0] != out_ext[0] || in_ext[1] != out_ext[1] || grid_ext[0] != in_ext[1] {
        return Err(Error::Format(format!(
            "inconsistent extents: inputs {in_ext:?}, outputs {out_ext:?}, grid {grid_ext:?}"
        )));
    }
    if coeff_ext[0] != in_ext[0] && coeff_ext[1] != 0 {
        return Err(Error::Format(format!(
            "coefficient extent {coeff_ext:?} does not match {} samples",
            in_ext[0]
        )));
    }
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing)? {
        0 => {}
        _ => return Err(Error::Format("trailing bytes after coefficient array".into())),
    }
    let mut ds = TrajectoryDataset::new(
        in_ext[0] as usize,
        in_ext[1] as usize,
        in_ext[2] as usize,
        out_ext[2] as usize,
        inputs,
        outputs,
        grid,
    )?;
    if coeff_ext[1] > 0 {
        ds = ds.with_coefficients(coeff_ext[1] as usize, coeffs)?;
    }
    ds.metadata = metadata;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TrajectoryDataset {
        let mut ds = TrajectoryDataset::new(
            2,
            3,
            1,
            2,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            (0..12).map(|i| i as f64 * 0.5).collect(),
            vec![0.1, 0.2, 0.3],
        )
        .unwrap();
        ds.insert_meta("system", "toy");
        ds
    }

    #[test]
    fn accessors_slice_per_sample() {
        let ds = toy();
        assert_eq!(ds.input(1), &[4.0, 5.0, 6.0]);
        assert_eq!(ds.output(0).len(), 6);
        assert_eq!(ds.meta("system"), Some("toy"));
    }

    #[test]
    fn subset_preserves_rows_and_metadata() {
        let ds = toy().with_coefficients(1, vec![7.0, 8.0]).unwrap();
        let sub = ds.subset(1..2).unwrap();
        assert_eq!(sub.n(), 1);
        assert_eq!(sub.input(0), ds.input(1));
        assert_eq!(sub.output(0), ds.output(1));
        assert_eq!(sub.coefficient(0).unwrap(), &[8.0]);
        assert_eq!(sub.meta("system"), Some("toy"));
        assert!(ds.subset(1..4).is_err());
    }

    #[test]
    fn constructor_rejects_mismatched_buffers() {
        assert!(TrajectoryDataset::new(1, 2, 1, 1, vec![0.0], vec![0.0; 2], vec![0.0, 1.0]).is_err());
        assert!(TrajectoryDataset::new(1, 2, 1, 1, vec![0.0; 2], vec![0.0; 2], vec![1.0, 0.5]).is_err());
        assert!(
            TrajectoryDataset::new(1, 2, 1, 1, vec![f64::NAN, 0.0], vec![0.0; 2], vec![0.0, 1.0])
                .is_err()
        );
    }
}
