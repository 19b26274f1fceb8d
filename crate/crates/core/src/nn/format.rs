//! Plain-text model files.
//!
//! ```text
//! switchlearn-resnet 1
//! dim 2
//! hidden 20
//! steps 10
//! sharing shared
//! seed 42
//! config_hash 0123abcd
//! activation tanh
//! block 0
//! w1 <hidden*dim reals>
//! b1 <hidden reals>
//! w2 <dim*hidden reals>
//! b2 <dim reals>
//! end
//! ```
//!
//! Reals are written with 17 significant digits so a write/read cycle is
//! bit-exact.

use std::io::{BufRead, Write};

use super::{BlockParams, DeepResNet, NetError, WeightSharing};
use crate::textio;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "switchlearn-resnet";

/// Provenance stored next to the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModelMeta {
    pub seed: u64,
    pub config_hash: String,
}

pub fn write_model<W: Write>(mut w: W, net: &DeepResNet, meta: &ModelMeta) -> std::io::Result<()> {
    let sharing = match net.sharing() {
        WeightSharing::Shared => "shared",
        WeightSharing::Unshared => "unshared",
    };
    let hash = if meta.config_hash.is_empty() { "-" } else { &meta.config_hash };
    writeln!(w, "{MAGIC} {MODEL_FORMAT_VERSION}")?;
    writeln!(w, "dim {}", net.dim())?;
    writeln!(w, "hidden {}", net.hidden())?;
    writeln!(w, "steps {}", net.steps())?;
    writeln!(w, "sharing {sharing}")?;
    writeln!(w, "seed {}", meta.seed)?;
    writeln!(w, "config_hash {hash}")?;
    writeln!(w, "activation tanh")?;
    for (k, b) in net.blocks().iter().enumerate() {
        writeln!(w, "block {k}")?;
        for (name, values) in ["w1", "b1", "w2", "b2"].into_iter().zip(b.slices()) {
            writeln!(w, "{name} {}", textio::join_reals(values, " "))?;
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self, what: &str) -> Result<String, NetError> {
        loop {
            match self.inner.next() {
                None => return Err(NetError::Truncated(format!("expected {what}"))),
                Some(l) => {
                    self.line += 1;
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(l);
                    }
                }
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> NetError {
        NetError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    /// Reads `key value...` and returns the value tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>, NetError> {
        let l = self.next_line(key)?;
        let mut tokens = l.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok(tokens.map(str::to_owned).collect()),
            Some(k) => Err(self.err(format!("expected '{key}', found '{k}'"))),
            None => Err(self.err(format!("expected '{key}'"))),
        }
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, NetError> {
        let v = self.keyed(key)?;
        if v.len() != 1 {
            return Err(self.err(format!("'{key}' takes exactly one value")));
        }
        v[0].parse().map_err(|_| self.err(format!("bad value for '{key}': {}", v[0])))
    }

    fn reals(&mut self, key: &str, count: usize) -> Result<Vec<f64>, NetError> {
        let v = self.keyed(key)?;
        if v.len() != count {
            return Err(self.err(format!("'{key}' has {} values, expected {count}", v.len())));
        }
        v.iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(format!("bad real in '{key}': {s}")))
            })
            .collect()
    }
}

pub fn read_model<R: BufRead>(r: R) -> Result<(DeepResNet, ModelMeta), NetError> {
    let mut lines = Lines { inner: r.lines(), line: 0 };
    let header = lines.next_line("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(lines.err("not a switchlearn model file"));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(MODEL_FORMAT_VERSION) => {}
        Some(v) => return Err(lines.err(format!("unsupported format version {v}"))),
        None => return Err(lines.err("missing format version")),
    }
    let dim: usize = lines.scalar("dim")?;
    let hidden: usize = lines.scalar("hidden")?;
    let steps: usize = lines.scalar("steps")?;
    let sharing = match lines.scalar::<String>("sharing")?.as_str() {
        "shared" => WeightSharing::Shared,
        "unshared" => WeightSharing::Unshared,
        other => return Err(lines.err(format!("unknown sharing '{other}'"))),
    };
    let seed: u64 = lines.scalar("seed")?;
    let hash: String = lines.scalar("config_hash")?;
    let activation: String = lines.scalar("activation")?;
    if activation != "tanh" {
        return Err(lines.err(format!("unsupported activation '{activation}'")));
    }
    if dim == 0 || hidden == 0 || steps == 0 {
        return Err(lines.err("dimensions must be positive"));
    }
    let count = match sharing {
        WeightSharing::Shared => 1,
        WeightSharing::Unshared => steps,
    };
    let mut blocks = Vec::with_capacity(count);
    for k in 0..count {
        let idx: usize = lines.scalar("block")?;
        if idx != k {
            return Err(lines.err(format!("expected block {k}, found {idx}")));
        }
        blocks.push(BlockParams {
            w1: lines.reals("w1", hidden * dim)?,
            b1: lines.reals("b1", hidden)?,
            w2: lines.reals("w2", dim * hidden)?,
            b2: lines.reals("b2", dim)?,
        });
    }
    let end = lines.next_line("end")?;
    if end.trim() != "end" {
        return Err(lines.err(format!("expected 'end', found '{}'", end.trim())));
    }
    let net = DeepResNet::from_blocks(dim, hidden, steps, sharing, blocks)?;
    let config_hash = if hash == "-" { String::new() } else { hash };
    Ok((net, ModelMeta { seed, config_hash }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(net: &DeepResNet) -> DeepResNet {
        let meta = ModelMeta {
            seed: 3,
            config_hash: "abc".into(),
        };
        let mut buf = Vec::new();
        write_model(&mut buf, net, &meta).unwrap();
        let (back, m) = read_model(buf.as_slice()).unwrap();
        assert_eq!(m, meta);
        back
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for sharing in [WeightSharing::Shared, WeightSharing::Unshared] {
            let net = DeepResNet::kaiming(2, 5, 3, sharing, 11);
            let back = roundtrip(&net);
            assert_eq!(back, net);
            let x = [0.3, -1.7];
            assert_eq!(back.forward(&x).unwrap(), net.forward(&x).unwrap());
        }
    }

    #[test]
    fn write_is_deterministic() {
        let net = DeepResNet::kaiming(3, 4, 2, WeightSharing::Shared, 1);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_model(&mut a, &net, &ModelMeta::default()).unwrap();
        write_model(&mut b, &net.clone(), &ModelMeta::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_fails() {
        let net = DeepResNet::kaiming(2, 3, 2, WeightSharing::Unshared, 2);
        let mut buf = Vec::new();
        write_model(&mut buf, &net, &ModelMeta::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().collect();
        for n in [1, 5, 9, 12, cut.len() - 1] {
            let partial = cut[..n].join("\n");
            assert!(read_model(partial.as_bytes()).is_err(), "accepted {n} lines");
        }
    }

    #[test]
    fn malformed_values_fail() {
        let net = DeepResNet::kaiming(2, 3, 1, WeightSharing::Shared, 2);
        let mut buf = Vec::new();
        write_model(&mut buf, &net, &ModelMeta::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let bad = text.replacen("b2 ", "b2 zz ", 1);
        assert!(matches!(read_model(bad.as_bytes()), Err(NetError::Parse { .. })));
        let bad = text.replacen("activation tanh", "activation relu", 1);
        assert!(read_model(bad.as_bytes()).is_err());
        assert!(read_model("hello 1\n".as_bytes()).is_err());
        let short = text.replacen("steps 1", "steps 4", 1).replacen("sharing shared", "sharing unshared", 1);
        assert!(read_model(short.as_bytes()).is_err());
    }
}
