//! Binary model bundle.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "EMGTQBND"
//! version  u32
//! count    u32      number of sections, sorted by name
//! section  u32 name length, UTF-8 name, u8 kind, payload
//!   kind 0 (text)    u64 byte length, UTF-8 bytes
//!   kind 1 (tensor)  u32 rank, rank × u64 dims, f64 values in row-major order
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mlp, MlpConfig, Network, Tcn, TcnConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EMGTQBND";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Text(String),
    Tensor(ArrayD<f64>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bundle {
    sections: BTreeMap<String, Section>,
}

fn bundle_err(msg: impl Into<String>) -> Error {
    Error::Bundle(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| bundle_err("bundle truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| bundle_err("length overflow"))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bundle_err("invalid UTF-8"))
    }
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn put_text(&mut self, name: &str, text: impl Into<String>) {
        self.sections
            .insert(name.to_string(), Section::Text(text.into()));
    }

    pub fn put_tensor(&mut self, name: &str, t: ArrayD<f64>) {
        self.sections.insert(name.to_string(), Section::Tensor(t));
    }

    pub fn put_vec(&mut self, name: &str, v: &[f64]) {
        self.put_tensor(
            name,
            ArrayD::from_shape_vec(IxDyn(&[v.len()]), v.to_vec()).expect("1-d"),
        );
    }

    pub fn text(&self, name: &str) -> Result<&str> {
        match self.sections.get(name) {
            Some(Section::Text(t)) => Ok(t),
            Some(_) => Err(bundle_err(format!("section {name} is not text"))),
            None => Err(bundle_err(format!("missing section {name}"))),
        }
    }

    pub fn tensor(&self, name: &str) -> Result<&ArrayD<f64>> {
        match self.sections.get(name) {
            Some(Section::Tensor(t)) => Ok(t),
            Some(_) => Err(bundle_err(format!("section {name} is not a tensor"))),
            None => Err(bundle_err(format!("missing section {name}"))),
        }
    }

    pub fn vec(&self, name: &str) -> Result<Vec<f64>> {
        let t = self.tensor(name)?;
        if t.ndim() != 1 {
            return Err(bundle_err(format!("section {name} is not a vector")));
        }
        Ok(t.iter().copied().collect())
    }

    pub fn has(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, sec) in &self.sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match sec {
                Section::Text(t) => {
                    out.push(0);
                    out.extend_from_slice(&(t.len() as u64).to_le_bytes());
                    out.extend_from_slice(t.as_bytes());
                }
                Section::Tensor(a) => {
                    out.push(1);
                    out.extend_from_slice(&(a.ndim() as u32).to_le_bytes());
                    for d in a.shape() {
                        out.extend_from_slice(&(*d as u64).to_le_bytes());
                    }
                    for v in a.iter() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bundle_err("not a model bundle"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bundle_err(format!("unsupported bundle version {version}")));
        }
        let count = r.u32()?;
        let mut sections = BTreeMap::new();
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = r.string(n)?;
            let sec = match r.u8()? {
                0 => {
                    let n = r.len()?;
                    Section::Text(r.string(n)?)
                }
                1 => {
                    let rank = r.u32()? as usize;
                    let dims = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
                    let total = dims
                        .iter()
                        .try_fold(1usize, |a, d| a.checked_mul(*d))
                        .ok_or_else(|| bundle_err("tensor size overflow"))?;
                    let bytes = r.take(
                        total
                            .checked_mul(8)
                            .ok_or_else(|| bundle_err("tensor size overflow"))?,
                    )?;
                    let data = bytes
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect();
                    Section::Tensor(
                        ArrayD::from_shape_vec(IxDyn(&dims), data)
                            .map_err(|e| bundle_err(e.to_string()))?,
                    )
                }
                k => return Err(bundle_err(format!("unknown section kind {k}"))),
            };
            if sections.insert(name.clone(), sec).is_some() {
                return Err(bundle_err(format!("duplicate section {name}")));
            }
        }
        if r.pos != buf.len() {
            return Err(bundle_err("trailing bytes after last section"));
        }
        Ok(Self { sections })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.display().to_string()),
            _ => Error::io(path, e),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn put_network(&mut self, prefix: &str, net: &Network) {
        self.put_text(&format!("{prefix}.config"), network_config_text(net));
        for (i, p) in net.params().iter().enumerate() {
            self.put_tensor(&format!("{prefix}.param.{i:03}"), p.value.clone());
        }
        for (i, b) in net.buffers().iter().enumerate() {
            self.put_vec(
                &format!("{prefix}.buffer.{i:03}"),
                b.as_slice().expect("contiguous"),
            );
        }
    }

    pub fn network(&self, prefix: &str) -> Result<Network> {
        let mut net = network_from_config(self.text(&format!("{prefix}.config"))?)?;
        for (i, p) in net.params_mut().into_iter().enumerate() {
            let t = self.tensor(&format!("{prefix}.param.{i:03}"))?;
            if t.shape() != p.value.shape() {
                return Err(bundle_err(format!(
                    "parameter {i} has shape {:?}, expected {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value.assign(t);
        }
        for (i, b) in net.buffers_mut().into_iter().enumerate() {
            let v = self.vec(&format!("{prefix}.buffer.{i:03}"))?;
            if v.len() != b.len() {
                return Err(bundle_err(format!("buffer {i} has length {}", v.len())));
            }
            b.assign(&ndarray::Array1::from(v));
        }
        Ok(net)
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn network_config_text(net: &Network) -> String {
    match net {
        Network::Mlp(m) => {
            let c = &m.config;
            format!(
                "kind=mlp\nn_in={}\nhidden={}\nn_out={}\ndropout={}\nbatch_norm={}\n",
                c.n_in,
                join(&c.hidden),
                c.n_out,
                c.dropout,
                c.batch_norm
            )
        }
        Network::Tcn(t) => {
            let c = &t.config;
            format!(
                "kind=tcn\nsteps={}\nn_in={}\nfilters={}\nkernel={}\ndilations={}\ndense={}\nn_out={}\ndropout={}\nlayer_norm={}\n",
                c.steps,
                c.n_in,
                c.filters,
                c.kernel,
                join(&c.dilations),
                c.dense,
                c.n_out,
                c.dropout,
                c.layer_norm
            )
        }
    }
}

fn network_from_config(text: &str) -> Result<Network> {
    let map: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| {
        map.get(k)
            .copied()
            .ok_or_else(|| bundle_err(format!("network config lacks {k}")))
    };
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| bundle_err(format!("bad value for {k}: {v}")))
    }
    let list = |k: &str| -> Result<Vec<usize>> {
        let v = get(k)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|x| num(k, x)).collect()
    };
    // weights are overwritten right after construction
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    match get("kind")? {
        "mlp" => {
            let config = MlpConfig {
                n_in: num("n_in", get("n_in")?)?,
                hidden: list("hidden")?,
                n_out: num("n_out", get("n_out")?)?,
                dropout: num("dropout", get("dropout")?)?,
                batch_norm: num("batch_norm", get("batch_norm")?)?,
            };
            Ok(Network::Mlp(Mlp::new(config, &mut rng)?))
        }
        "tcn" => {
            let config = TcnConfig {
                steps: num("steps", get("steps")?)?,
                n_in: num("n_in", get("n_in")?)?,
                filters: num("filters", get("filters")?)?,
                kernel: num("kernel", get("kernel")?)?,
                dilations: list("dilations")?,
                dense: num("dense", get("dense")?)?,
                n_out: num("n_out", get("n_out")?)?,
                dropout: num("dropout", get("dropout")?)?,
                layer_norm: num("layer_norm", get("layer_norm")?)?,
            };
            Ok(Network::Tcn(Tcn::new(config, &mut rng)?))
        }
        k => Err(bundle_err(format!("unknown network kind {k}"))),
    }
}
