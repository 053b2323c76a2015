//! Binary checkpoint container.
//!
//! ```text
//! magic      "WMRFT\0"                      6 bytes
//! version    u16
//! sections   u32
//! section*   kind u8 | name_len u16 | name (utf-8)
//!   kind 1 (network):   n_sizes u32 | sizes u32* | activation u8 | output_activation u8
//!                       | n_params u64 | params f64*
//!   kind 2 (optimizer): step_count u64 | lr beta1 beta2 eps weight_decay f64
//!                       | len u64 | m f64* | v f64*
//! ```
//!
//! All integers and floats are little-endian. Activation ids: tanh 0, relu 1;
//! output activation ids: identity 0, softplus_floored 1.

use std::path::Path;

use super::{AdamW, AdamWConfig, Activation, Mlp, NetworkSpec, OutputActivation, ParamVector};
use crate::error::{Error, Result};
use crate::io::{atomic_write, ByteReader};

pub const MAGIC: &[u8; 6] = b"WMRFT\0";
pub const FORMAT_VERSION: u16 = 1;

const KIND_NETWORK: u8 = 1;
const KIND_OPTIMIZER: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Network(Mlp),
    Optimizer(AdamW),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    sections: Vec<(String, Section)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the section called `name`.
    pub fn insert(&mut self, name: &str, section: Section) {
        match self.sections.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = section,
            None => self.sections.push((name.to_owned(), section)),
        }
    }

    pub fn with_network(mut self, name: &str, net: &Mlp) -> Self {
        self.insert(name, Section::Network(net.clone()));
        self
    }

    pub fn with_optimizer(mut self, name: &str, opt: &AdamW) -> Self {
        self.insert(name, Section::Optimizer(opt.clone()));
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.sections.iter().any(|(n, _)| n == name)
    }

    pub fn network(&self, name: &str) -> Result<&Mlp> {
        match self.sections.iter().find(|(n, _)| n == name) {
            Some((_, Section::Network(m))) => Ok(m),
            Some(_) => Err(Error::Format(format!("section '{name}' is not a network"))),
            None => Err(Error::Format(format!("checkpoint has no section '{name}'"))),
        }
    }

    pub fn optimizer(&self, name: &str) -> Result<&AdamW> {
        match self.sections.iter().find(|(n, _)| n == name) {
            Some((_, Section::Optimizer(o))) => Ok(o),
            Some(_) => Err(Error::Format(format!("section '{name}' is not an optimizer"))),
            None => Err(Error::Format(format!("checkpoint has no section '{name}'"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, section) in &self.sections {
            let kind = match section {
                Section::Network(_) => KIND_NETWORK,
                Section::Optimizer(_) => KIND_OPTIMIZER,
            };
            out.push(kind);
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match section {
                Section::Network(net) => {
                    let spec = net.spec();
                    out.extend_from_slice(&(spec.layer_sizes().len() as u32).to_le_bytes());
                    for &s in spec.layer_sizes() {
                        out.extend_from_slice(&(s as u32).to_le_bytes());
                    }
                    out.push(spec.activation().id());
                    out.push(spec.output_activation().id());
                    write_f64s(&mut out, net.params().as_slice());
                }
                Section::Optimizer(opt) => {
                    out.extend_from_slice(&opt.step_count.to_le_bytes());
                    let c = opt.config;
                    for x in [c.lr, c.beta1, c.beta2, c.eps, c.weight_decay] {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                    write_f64s(&mut out, &opt.m);
                    for x in &opt.v {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let n_sections = r.u32()? as usize;
        let mut ckpt = Checkpoint::new();
        for _ in 0..n_sections {
            let kind = r.u8()?;
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("section name is not utf-8".into()))?;
            let section = match kind {
                KIND_NETWORK => {
                    let n_sizes = r.u32()? as usize;
                    let sizes = (0..n_sizes)
                        .map(|_| r.u32().map(|s| s as usize))
                        .collect::<Result<Vec<_>>>()?;
                    let act = Activation::from_id(r.u8()?)?;
                    let out_act = OutputActivation::from_id(r.u8()?)?;
                    let spec = NetworkSpec::new(sizes, act, out_act)?;
                    let n = r.u64()? as usize;
                    let params = ParamVector::from_vec(&spec, r.f64s(n)?)?;
                    Section::Network(Mlp::new(spec, params)?)
                }
                KIND_OPTIMIZER => {
                    let step_count = r.u64()?;
                    let config = AdamWConfig {
                        lr: r.f64()?,
                        beta1: r.f64()?,
                        beta2: r.f64()?,
                        eps: r.f64()?,
                        weight_decay: r.f64()?,
                    };
                    let n = r.u64()? as usize;
                    let m = r.f64s(n)?;
                    let v = r.f64s(n)?;
                    Section::Optimizer(AdamW::from_parts(config, m, v, step_count)?)
                }
                other => return Err(Error::Format(format!("unknown section kind {other}"))),
            };
            ckpt.insert(&name, section);
        }
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after last section".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn write_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for x in values {
        out.extend_from_slice(&x.to_le_bytes());
    }
}
