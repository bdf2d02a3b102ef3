//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic "CGNNCKPT" | version u32 | meta_len u32 | meta JSON
//! step u64 | tensor_count u32
//! per tensor: name_len u32 | name | ndim u32 | dims u64… | dtype u8 | data
//! has_adam u8 | [beta1 f64 | beta2 f64 | eps f64 | per tensor: m data | v data]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::optim::AdamState;
use crate::params::ParamStore;
use crate::scalar::{DType, Float};
use crate::tensor::Tensor;
use crate::NnError;

pub const MAGIC: &[u8; 8] = b"CGNNCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug)]
pub struct Checkpoint<T: Float> {
    pub meta: serde_json::Value,
    pub step: u64,
    pub params: ParamStore<T>,
    pub adam: Option<AdamState<T>>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::InvalidCheckpoint(msg.into())
}

fn write_values<T: Float>(w: &mut impl Write, data: &[T]) -> std::io::Result<()> {
    match T::DTYPE {
        DType::F32 => data.iter().try_for_each(|v| w.write_all(&(v.as_f64() as f32).to_le_bytes())),
        DType::F64 => data.iter().try_for_each(|v| w.write_all(&v.as_f64().to_le_bytes())),
    }
}

pub fn save<T: Float>(
    path: &Path,
    meta: &serde_json::Value,
    step: u64,
    params: &ParamStore<T>,
    adam: Option<&AdamState<T>>,
) -> Result<(), NnError> {
    let mut w = BufWriter::new(File::create(path)?);
    let meta = serde_json::to_vec(meta).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    w.write_all(&step.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for d in &t.shape {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        w.write_all(&[T::DTYPE.tag()])?;
        write_values(&mut w, &t.data)?;
    }
    match adam {
        None => w.write_all(&[0])?,
        Some(a) => {
            w.write_all(&[1])?;
            for x in [a.beta1, a.beta2, a.eps] {
                w.write_all(&x.to_le_bytes())?;
            }
            for (m, v) in a.m.iter().zip(&a.v) {
                write_values(&mut w, m)?;
                write_values(&mut w, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, NnError> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| bad(format!("truncated file: {e}")))?;
        Ok(buf)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], NnError> {
        let b = self.bytes(N)?;
        Ok(b.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.array::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn values<T: Float>(&mut self, dtype: DType, n: usize) -> Result<Vec<T>, NnError> {
        let raw = self.bytes(n * dtype.size())?;
        Ok(match dtype {
            DType::F32 => raw
                .chunks_exact(4)
                .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect(),
            DType::F64 => raw
                .chunks_exact(8)
                .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        })
    }
}

/// Reads a checkpoint, converting stored values to `T`.
pub fn load<T: Float>(path: &Path) -> Result<Checkpoint<T>, NnError> {
    let mut r = Reader { inner: BufReader::new(File::open(path)?) };
    if &r.array::<8>()? != MAGIC {
        return Err(bad("wrong magic bytes"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let meta_len = r.u32()? as usize;
    let meta = serde_json::from_slice(&r.bytes(meta_len)?).map_err(|e| bad(format!("metadata: {e}")))?;
    let step = r.u64()?;
    let count = r.u32()? as usize;
    let mut params = ParamStore::new();
    let mut dtypes = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?).map_err(|_| bad("parameter name is not UTF-8"))?;
        let ndim = r.u32()? as usize;
        if ndim > 8 {
            return Err(bad(format!("{name}: {ndim} dimensions")));
        }
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let dtype = DType::from_tag(r.u8()?).ok_or_else(|| bad(format!("{name}: unknown dtype")))?;
        let n = shape.iter().product();
        if params.id(&name).is_some() {
            return Err(bad(format!("duplicate parameter {name}")));
        }
        let data = r.values(dtype, n)?;
        params.add(name, Tensor::new(shape, data));
        dtypes.push(dtype);
    }
    let adam = match r.u8()? {
        0 => None,
        1 => {
            let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
            let mut st = AdamState::with_betas(&params, beta1, beta2, eps);
            st.step = step;
            for (i, dtype) in dtypes.iter().enumerate() {
                let n = st.m[i].len();
                st.m[i] = r.values(*dtype, n)?;
                st.v[i] = r.values(*dtype, n)?;
            }
            Some(st)
        }
        other => return Err(bad(format!("bad optimizer flag {other}"))),
    };
    Ok(Checkpoint { meta, step, params, adam })
}

/// Copies checkpoint values into an existing store with matching names and
/// shapes.
pub fn load_into<T: Float>(ckpt: &Checkpoint<T>, store: &mut ParamStore<T>) -> Result<(), NnError> {
    if ckpt.params.len() != store.len() {
        return Err(bad(format!(
            "checkpoint has {} parameters, model has {}",
            ckpt.params.len(),
            store.len()
        )));
    }
    for (name, t) in ckpt.params.iter() {
        let id = store.id(name).ok_or_else(|| bad(format!("unknown parameter {name}")))?;
        let dst = store.get_mut(id);
        if dst.shape != t.shape {
            return Err(bad(format!("{name}: shape {:?} vs {:?}", t.shape, dst.shape)));
        }
        dst.data.copy_from_slice(&t.data);
    }
    Ok(())
}
