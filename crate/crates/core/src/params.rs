//! Named-tensor parameter container.
//!
//! Binary layout, all integers little-endian `u32`:
//!
//! ```text
//! magic "SPRM" | version (1) | count
//! repeated count times:
//!     name_len | name (UTF-8) | ndim | dims... | f32 data (LE)
//! ```
//!
//! The text manifest has one `name<TAB>d0xd1x...` line per tensor in the
//! same (sorted) order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PARAM_MAGIC: &[u8; 4] = b"SPRM";
const VERSION: u32 = 1;

/// Anything holding named parameter tensors.
pub trait Params {
    fn collect(&self, prefix: &str, out: &mut ParamStore);
    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()>;

    fn num_params(&self) -> usize {
        let mut store = ParamStore::default();
        self.collect("", &mut store);
        store.num_params()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Copies `name` into `dst`, requiring the stored shape to match.
    pub fn load_into(&self, name: &str, dst: &mut Tensor) -> Result<()> {
        let src = self
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing parameter {name}")))?;
        if src.shape() != dst.shape() {
            return Err(Error::dim(format!(
                "parameter {name}: stored {:?}, expected {:?}",
                src.shape(),
                dst.shape()
            )));
        }
        *dst = src.clone();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn num_params(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(PARAM_MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
            for &d in t.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != PARAM_MAGIC {
            return Err(Error::Format("not a parameter container".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let count = r.u32()?;
        let mut store = ParamStore::default();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
                .to_string();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            store.insert(name, Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after parameter container".into()));
        }
        Ok(store)
    }

    pub fn manifest(&self) -> String {
        let mut s = String::new();
        for (name, t) in &self.tensors {
            let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            s.push_str(&format!("{name}\t{}\n", dims.join("x")));
        }
        s
    }

    /// Writes `path` and a sibling `<path>.manifest`.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let manifest = manifest_path(path);
        fs::write(&manifest, self.manifest()).map_err(|e| Error::io(&manifest, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    s.into()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format("truncated parameter container".into()))?;
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Seeded uniform init in `[-1/√fan_in, 1/√fan_in]`.
pub fn uniform_init(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f32).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..=bound))
}

/// Weight `out×in` and bias `out`, both uniform in `[-1/√in, 1/√in]`.
pub fn dense_init(rng: &mut ChaCha8Rng, out: usize, inp: usize) -> (Tensor, Tensor) {
    (uniform_init(rng, &[out, inp], inp), uniform_init(rng, &[out], inp))
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn container_round_trip_and_manifest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::default();
        store.insert("b.weight", uniform_init(&mut rng, &[4, 3], 3));
        store.insert("a.bias", uniform_init(&mut rng, &[4], 3));
        let bytes = store.to_bytes();
        assert_eq!(&bytes[..4], PARAM_MAGIC);
        assert_eq!(ParamStore::from_bytes(&bytes).unwrap(), store);
        assert_eq!(store.manifest(), "a.bias\t4\nb.weight\t4x3\n");
        assert!(ParamStore::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert_eq!(store.num_params(), 16);
    }

    #[test]
    fn init_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = uniform_init(&mut rng, &[64, 16], 16);
        assert!(t.data().iter().all(|v| v.abs() <= 0.25));
    }

    #[test]
    fn load_into_checks_shape() {
        let mut store = ParamStore::default();
        store.insert("w", Tensor::zeros(&[2, 2]));
        let mut dst = Tensor::zeros(&[3]);
        assert!(store.load_into("w", &mut dst).is_err());
        assert!(store.load_into("missing", &mut dst).is_err());
    }
}
