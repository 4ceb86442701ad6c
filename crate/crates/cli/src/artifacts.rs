use std::io::Read;
use std::path::{Path, PathBuf};

use ssop_autodiff::Tensor;
use ssop_dynsys::{write_dataset, TrajectoryDataset};
use ssop_train::{ModelSpec, Standardizer, TrainedModel};

use crate::error::{CliError, Result};

const CKPT_MAGIC: &[u8; 4] = b"SSCK";
const CKPT_VERSION: u32 = 1;

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes through a sibling temp file and renames, so a crash mid-write
/// never leaves a truncated artifact under the final name.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = tmp_path(path);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_dataset_atomic(ds: &TrajectoryDataset, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = tmp_path(path);
    write_dataset(ds, &tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Refuses to clobber an existing artifact unless forced.
pub fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(CliError::OverwriteRefused(path.to_path_buf()));
    }
    Ok(())
}

pub fn write_loss_curve(path: &Path, losses: &[f64]) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        text.push_str(&format!("{epoch},{loss}\n"));
    }
    atomic_write(path, text.as_bytes())
}

pub fn write_curve(path: &Path, header: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut text = format!("{header}\n");
    for (x, y) in xs.iter().zip(ys) {
        text.push_str(&format!("{x},{y}\n"));
    }
    atomic_write(path, text.as_bytes())
}

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct ByteReader<R: Read> {
    src: R,
}

impl<R: Read> ByteReader<R> {
    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.src.read_exact(&mut b).map_err(|_| bad(format!("truncated at {what}")))?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut b = [0u8; 8];
        for _ in 0..count {
            self.src.read_exact(&mut b).map_err(|_| bad(format!("truncated at {what}")))?;
            out.push(f64::from_le_bytes(b));
        }
        Ok(out)
    }

    fn str(&mut self, what: &str) -> Result<String> {
        let len = self.u64(what)? as usize;
        if len > 1 << 20 {
            return Err(bad(format!("implausible string length {len} at {what}")));
        }
        let mut b = vec![0u8; len];
        self.src.read_exact(&mut b).map_err(|_| bad(format!("truncated at {what}")))?;
        String::from_utf8(b).map_err(|_| bad(format!("non-UTF-8 string at {what}")))
    }
}

fn bad(msg: String) -> CliError {
    CliError::Usage(format!("checkpoint: {msg}"))
}

/// Serializes a trained model: identity, dimensions, normalization, and every
/// parameter tensor by name.
pub fn save_checkpoint(
    path: &Path,
    model: &TrainedModel,
    seed: u64,
    in_dim: usize,
    n_sensors: usize,
) -> Result<()> {
    let mut w = ByteWriter { buf: Vec::new() };
    w.buf.extend_from_slice(CKPT_MAGIC);
    w.buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    w.str(model.spec.name());
    w.u64(seed);
    w.u64(in_dim as u64);
    w.u64(model.out_dim as u64);
    w.u64(n_sensors as u64);
    for norm in [&model.in_norm, &model.out_norm] {
        w.u64(norm.mean().len() as u64);
        w.f64s(norm.mean());
        w.f64s(norm.scale());
    }
    let params = model.module.params();
    w.u64(params.len() as u64);
    for (name, tensor) in params.iter() {
        w.str(name);
        w.u64(tensor.ndim() as u64);
        for &e in tensor.shape() {
            w.u64(e as u64);
        }
        w.f64s(tensor.data());
    }
    atomic_write(path, &w.buf)
}

/// Rebuilds the model described by `spec` and loads the stored weights into
/// it. The stored architecture name must match the spec.
pub fn load_checkpoint(path: &Path, spec: &ModelSpec) -> Result<TrainedModel> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    let mut r = ByteReader { src: std::io::BufReader::new(file) };
    let mut magic = [0u8; 4];
    r.src.read_exact(&mut magic).map_err(|_| bad("truncated magic".into()))?;
    if &magic != CKPT_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut ver = [0u8; 4];
    r.src.read_exact(&mut ver).map_err(|_| bad("truncated version".into()))?;
    let version = u32::from_le_bytes(ver);
    if version != CKPT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let name = r.str("model name")?;
    if name != spec.name() {
        return Err(bad(format!(
            "stores a `{name}` model but the config asks for `{}`",
            spec.name()
        )));
    }
    let seed = r.u64("seed")?;
    let in_dim = r.u64("in_dim")? as usize;
    let out_dim = r.u64("out_dim")? as usize;
    let n_sensors = r.u64("n_sensors")? as usize;
    let mut norms = Vec::with_capacity(2);
    for what in ["input norm", "output norm"] {
        let dim = r.u64(what)? as usize;
        if dim == 0 || dim > 1 << 20 {
            return Err(bad(format!("implausible {what} width {dim}")));
        }
        let mean = r.f64s(dim, what)?;
        let scale = r.f64s(dim, what)?;
        norms.push(Standardizer::from_parts(mean, scale).map_err(|e| bad(e.to_string()))?);
    }
    let out_norm = norms.pop().unwrap();
    let in_norm = norms.pop().unwrap();

    let mut module = spec
        .build(in_dim, out_dim, n_sensors, seed)
        .map_err(|e| bad(format!("cannot rebuild architecture: {e}")))?;
    let count = r.u64("parameter count")? as usize;
    if count != module.params().len() {
        return Err(bad(format!(
            "stores {count} parameters but the architecture has {}",
            module.params().len()
        )));
    }
    for _ in 0..count {
        let pname = r.str("parameter name")?;
        let rank = r.u64("parameter rank")? as usize;
        if rank > 8 {
            return Err(bad(format!("implausible rank {rank} for {pname}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("parameter extent")? as usize);
        }
        let numel: usize = shape.iter().product();
        if numel > 1 << 28 {
            return Err(bad(format!("implausible size {numel} for {pname}")));
        }
        let data = r.f64s(numel, "parameter data")?;
        let id = module
            .params()
            .ids()
            .find(|&id| module.params().name(id) == pname)
            .ok_or_else(|| bad(format!("architecture has no parameter `{pname}`")))?;
        if module.params().tensor(id).shape() != shape.as_slice() {
            return Err(bad(format!(
                "parameter `{pname}` shape {:?} does not match stored {shape:?}",
                module.params().tensor(id).shape()
            )));
        }
        module.params_mut().set_tensor(id, Tensor::from_vec(&shape, data));
    }
    let mut trailing = [0u8; 1];
    if r.src.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after parameters".into()));
    }
    Ok(TrainedModel { spec: spec.clone(), module, in_norm, out_norm, out_dim })
}
