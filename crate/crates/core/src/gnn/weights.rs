//! Named-tensor container and the `MLORAS-W v1` file format.
//!
//! Layout: the ASCII header line `MLORAS-W v1`, a `config` line, `tensors <count>`,
//! one `<name> <shape> <offset>` line per tensor (shape as `AxB`, offset counted
//! in values from the start of the data block), the line `end`, then every
//! tensor's values as little-endian 64-bit floats in manifest order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &str = "MLORAS-W v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnnConfig {
    pub tagconv_layers: usize,
    pub hidden: usize,
    pub resnet_blocks: usize,
    /// Highest adjacency power in each TAGConv filter.
    pub hops: usize,
    pub edge_hidden: usize,
    pub instance_norm_eps: f64,
    pub layer_norm_eps: f64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            tagconv_layers: 4,
            hidden: 128,
            resnet_blocks: 8,
            hops: 2,
            edge_hidden: 16,
            instance_norm_eps: 1e-5,
            layer_norm_eps: 1e-5,
        }
    }
}

impl GnnConfig {
    /// Width of the stacked edge features: both endpoint embeddings plus the edge weight.
    pub fn edge_input(&self) -> usize {
        2 * self.hidden + 1
    }

    fn to_line(self) -> String {
        format!(
            "config tagconv_layers={} hidden={} resnet_blocks={} hops={} edge_hidden={} instance_norm_eps={:e} layer_norm_eps={:e}",
            self.tagconv_layers,
            self.hidden,
            self.resnet_blocks,
            self.hops,
            self.edge_hidden,
            self.instance_norm_eps,
            self.layer_norm_eps
        )
    }

    fn parse_line(line: &str) -> Result<Self> {
        let mut fields = line.split_whitespace();
        if fields.next() != Some("config") {
            return Err(Error::Weights(format!("expected a config line, found {line:?}")));
        }
        let mut cfg = GnnConfig::default();
        let mut seen = 0;
        for kv in fields {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Weights(format!("malformed config entry {kv:?}")))?;
            let int = || v.parse::<usize>().map_err(|e| Error::Weights(format!("{k}: {e}")));
            let real = || v.parse::<f64>().map_err(|e| Error::Weights(format!("{k}: {e}")));
            match k {
                "tagconv_layers" => cfg.tagconv_layers = int()?,
                "hidden" => cfg.hidden = int()?,
                "resnet_blocks" => cfg.resnet_blocks = int()?,
                "hops" => cfg.hops = int()?,
                "edge_hidden" => cfg.edge_hidden = int()?,
                "instance_norm_eps" => cfg.instance_norm_eps = real()?,
                "layer_norm_eps" => cfg.layer_norm_eps = real()?,
                _ => return Err(Error::Weights(format!("unknown config key {k:?}"))),
            }
            seen += 1;
        }
        if seen != 7 {
            return Err(Error::Weights(format!("config line has {seen} of 7 entries")));
        }
        if cfg.tagconv_layers == 0 || cfg.hidden == 0 || cfg.edge_hidden == 0 {
            return Err(Error::Weights("layer counts and widths must be positive".into()));
        }
        Ok(cfg)
    }

    /// Ordered `(name, shape)` list every weight file for this config must match.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let (h, e) = (self.hidden, self.edge_hidden);
        let mut m: Vec<(String, Vec<usize>)> = vec![
            ("edge_pre.lin0.weight".into(), vec![e, 1]),
            ("edge_pre.lin0.bias".into(), vec![e]),
            ("edge_pre.norm.weight".into(), vec![e]),
            ("edge_pre.norm.bias".into(), vec![e]),
            ("edge_pre.lin1.weight".into(), vec![1, e]),
            ("edge_pre.lin1.bias".into(), vec![1]),
        ];
        for l in 0..self.tagconv_layers {
            let d_in = if l == 0 { 1 } else { h };
            for j in 0..=self.hops {
                m.push((format!("conv{l}.tag.weight{j}"), vec![h, d_in]));
            }
            m.push((format!("conv{l}.tag.bias"), vec![h]));
            m.push((format!("conv{l}.norm.weight"), vec![h]));
            m.push((format!("conv{l}.norm.bias"), vec![h]));
            for b in 0..self.resnet_blocks {
                m.push((format!("conv{l}.res{b}.ln.weight"), vec![h]));
                m.push((format!("conv{l}.res{b}.ln.bias"), vec![h]));
                m.push((format!("conv{l}.res{b}.lin1.weight"), vec![h, h]));
                m.push((format!("conv{l}.res{b}.lin1.bias"), vec![h]));
                m.push((format!("conv{l}.res{b}.lin2.weight"), vec![h, h]));
                m.push((format!("conv{l}.res{b}.lin2.bias"), vec![h]));
            }
        }
        m.extend([
            ("edge_conv.lin0.weight".into(), vec![h, self.edge_input()]),
            ("edge_conv.lin0.bias".into(), vec![h]),
            ("edge_conv.ln0.weight".into(), vec![h]),
            ("edge_conv.ln0.bias".into(), vec![h]),
            ("edge_conv.lin1.weight".into(), vec![h, h]),
            ("edge_conv.lin1.bias".into(), vec![h]),
            ("edge_conv.ln1.weight".into(), vec![h]),
            ("edge_conv.ln1.bias".into(), vec![h]),
            ("edge_conv.lin2.weight".into(), vec![1, h]),
            ("edge_conv.lin2.bias".into(), vec![1]),
        ]);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnWeights {
    config: GnnConfig,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl GnnWeights {
    /// Fills every tensor from `f(name, shape, flat_index)`.
    pub fn from_fn(config: GnnConfig, mut f: impl FnMut(&str, &[usize], usize) -> f64) -> Self {
        let tensors = config
            .manifest()
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                let data = (0..len).map(|k| f(&name, &shape, k)).collect();
                Tensor { name, shape, data }
            })
            .collect();
        Self::assemble(config, tensors)
    }

    pub fn zeros(config: GnnConfig) -> Self {
        Self::from_fn(config, |_, _, _| 0.0)
    }

    /// Validates tensors against the manifest of `config`.
    pub fn from_tensors(config: GnnConfig, tensors: Vec<Tensor>) -> Result<Self> {
        check_manifest(&config, tensors.iter().map(|t| (t.name.as_str(), t.shape.as_slice())))?;
        for t in &tensors {
            if t.data.len() != t.shape.iter().product::<usize>() {
                return Err(Error::Weights(format!("tensor {} has the wrong number of values", t.name)));
            }
            if let Some(k) = t.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("tensor {} entry {k}", t.name)));
            }
        }
        Ok(Self::assemble(config, tensors))
    }

    fn assemble(config: GnnConfig, tensors: Vec<Tensor>) -> Self {
        let index = tensors.iter().enumerate().map(|(k, t)| (t.name.clone(), k)).collect();
        Self {
            config,
            tensors,
            index,
        }
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&k| &self.tensors[k])
            .ok_or_else(|| Error::Weights(format!("missing tensor {name}")))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = String::new();
        writeln!(header, "{WEIGHTS_MAGIC}").unwrap();
        writeln!(header, "{}", self.config.to_line()).unwrap();
        writeln!(header, "tensors {}", self.tensors.len()).unwrap();
        let mut offset = 0usize;
        for t in &self.tensors {
            let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            writeln!(header, "{} {} {}", t.name, shape.join("x"), offset).unwrap();
            offset += t.data.len();
        }
        writeln!(header, "end").unwrap();
        let mut bytes = header.into_bytes();
        bytes.reserve(offset * 8);
        for t in &self.tensors {
            for v in &t.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut next_line = |what: &str| -> Result<String> {
            let rest = &bytes[pos.min(bytes.len())..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Weights(format!("truncated header while reading {what}")))?;
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| Error::Weights(format!("non-ASCII header while reading {what}")))?
                .to_string();
            pos += end + 1;
            Ok(line)
        };
        let magic = next_line("magic")?;
        if magic != WEIGHTS_MAGIC {
            return Err(Error::Weights(format!("unsupported header {magic:?}, expected {WEIGHTS_MAGIC:?}")));
        }
        let config = GnnConfig::parse_line(&next_line("config")?)?;
        let count_line = next_line("tensor count")?;
        let count: usize = count_line
            .strip_prefix("tensors ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::Weights(format!("expected `tensors <count>`, found {count_line:?}")))?;
        let mut entries = Vec::with_capacity(count);
        let mut expected_offset = 0usize;
        for _ in 0..count {
            let line = next_line("manifest")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Weights(format!("malformed manifest line {line:?}")));
            }
            let shape = f[1]
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Weights(format!("bad shape in {line:?}")))?;
            let offset: usize = f[2].parse().map_err(|_| Error::Weights(format!("bad offset in {line:?}")))?;
            if offset != expected_offset {
                return Err(Error::Weights(format!("tensor {} offset {offset}, expected {expected_offset}", f[0])));
            }
            expected_offset += shape.iter().product::<usize>();
            entries.push((f[0].to_string(), shape));
        }
        if next_line("end marker")? != "end" {
            return Err(Error::Weights("missing `end` after the manifest".into()));
        }
        check_manifest(&config, entries.iter().map(|(n, s)| (n.as_str(), s.as_slice())))?;
        let data = &bytes[pos..];
        if data.len() != expected_offset * 8 {
            return Err(Error::Weights(format!(
                "data block holds {} bytes, manifest needs {}",
                data.len(),
                expected_offset * 8
            )));
        }
        let mut values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let tensors = entries
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                Tensor {
                    name,
                    shape,
                    data: values.by_ref().take(len).collect(),
                }
            })
            .collect();
        Self::from_tensors(config, tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn describe<'a>(items: impl Iterator<Item = (&'a str, &'a [usize])>) -> Vec<String> {
    items
        .map(|(n, s)| {
            let dims: Vec<String> = s.iter().map(usize::to_string).collect();
            format!("{n}[{}]", dims.join("x"))
        })
        .collect()
}

fn check_manifest<'a>(
    config: &GnnConfig,
    found: impl Iterator<Item = (&'a str, &'a [usize])>,
) -> Result<()> {
    let expected = config.manifest();
    let expected_desc = describe(expected.iter().map(|(n, s)| (n.as_str(), s.as_slice())));
    let found_desc = describe(found);
    if expected_desc == found_desc {
        return Ok(());
    }
    let first = expected_desc
        .iter()
        .zip(&found_desc)
        .position(|(a, b)| a != b)
        .unwrap_or(expected_desc.len().min(found_desc.len()));
    let show = |v: &[String]| v.get(first).cloned().unwrap_or_else(|| "<nothing>".into());
    Err(Error::ManifestMismatch {
        expected: format!("{} tensors; entry {first} = {}", expected_desc.len(), show(&expected_desc)),
        found: format!("{} tensors; entry {first} = {}", found_desc.len(), show(&found_desc)),
    })
}
