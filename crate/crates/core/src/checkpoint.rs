//! Binary checkpoint format.
//!
//! ```text
//! "DISC"  u32 version  u32 tensor_count
//! per tensor: u16 name_len, name (UTF-8), u8 rank, u32 dims[rank], f32 data[prod(dims)]
//! ```
//!
//! All integers and floats are little-endian. Run metadata travels as ordinary
//! tensors: `meta.seed` and `meta.epoch` hold a u64 as four 16-bit limbs (least
//! significant first), `meta.dropout` the dropout rate. Optimiser state, when
//! present, is `adam.config` (lr, beta1, beta2, eps), `adam.step` (four limbs),
//! then `adam.m.<param>` and `adam.v.<param>` for every parameter.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SpamNet;
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::{Rng, Tensor};

pub const MAGIC: [u8; 4] = *b"DISC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: SpamNet,
    pub adam: Option<AdamState>,
    pub meta: CheckpointMeta,
}

fn u64_limbs(v: u64) -> Tensor {
    let limbs = (0..4).map(|i| ((v >> (16 * i)) & 0xFFFF) as f32).collect();
    Tensor::from_vec(&[4], limbs).expect("static shape")
}

fn limbs_u64(name: &str, t: &Tensor) -> Result<u64> {
    let mut v = 0u64;
    for (i, &limb) in t.data().iter().enumerate() {
        if !(0.0..=65535.0).contains(&limb) || limb.fract() != 0.0 {
            return Err(Error::InconsistentTable(format!(
                "{name} limb {limb} is not a 16-bit integer"
            )));
        }
        v |= (limb as u64) << (16 * i);
    }
    Ok(v)
}

/// Serialises a network, its optional optimiser state and run metadata.
pub fn encode_checkpoint(net: &SpamNet, adam: Option<&AdamState>, meta: CheckpointMeta) -> Vec<u8> {
    let params = net.named_parameters();
    let mut tensors: Vec<(String, Tensor)> = vec![
        ("meta.seed".into(), u64_limbs(meta.seed)),
        ("meta.epoch".into(), u64_limbs(meta.epoch)),
        (
            "meta.dropout".into(),
            Tensor::full(&[1], net.dropout_rate()).expect("static shape"),
        ),
    ];
    tensors.extend(params.iter().map(|(n, t)| (n.clone(), (*t).clone())));
    if let Some(adam) = adam {
        let c = adam.config;
        tensors.push((
            "adam.config".into(),
            Tensor::from_vec(&[4], vec![c.lr, c.beta1, c.beta2, c.eps]).expect("static shape"),
        ));
        tensors.push(("adam.step".into(), u64_limbs(adam.step_count())));
        for ((n, _), m) in params.iter().zip(adam.first_moments()) {
            tensors.push((format!("adam.m.{n}"), m.clone()));
        }
        for ((n, _), v) in params.iter().zip(adam.second_moments()) {
            tensors.push((format!("adam.v.{n}"), v.clone()));
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "needed {n} bytes for {what} at offset {}, {} remain",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Raw `(name, tensor)` table, in file order.
pub fn decode_tensor_table(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = r.u32("tensor count")? as usize;
    let mut table = Vec::new();
    for i in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::InconsistentTable(format!("tensor {i} name is not UTF-8")))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        if rank == 0 {
            return Err(Error::InconsistentTable(format!("{name} has rank 0")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        if shape.contains(&0) {
            return Err(Error::InconsistentTable(format!(
                "{name} has a zero dimension {shape:?}"
            )));
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::InconsistentTable(format!("{name} shape {shape:?} overflows")))?;
        let data = r
            .take(len, &name)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if table.iter().any(|(n, _)| *n == name) {
            return Err(Error::InconsistentTable(format!("duplicate tensor {name}")));
        }
        table.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::InconsistentTable(format!(
            "{} trailing bytes after {count} tensors",
            bytes.len() - r.pos
        )));
    }
    Ok(table)
}

fn take_tensor(
    by_name: &mut HashMap<String, Tensor>,
    name: &str,
    shape: Option<&[usize]>,
) -> Result<Tensor> {
    let t = by_name
        .remove(name)
        .ok_or_else(|| Error::InconsistentTable(format!("missing tensor {name}")))?;
    if let Some(shape) = shape {
        if t.shape() != shape {
            return Err(Error::InconsistentTable(format!(
                "{name} has shape {:?}, expected {shape:?}",
                t.shape()
            )));
        }
    }
    Ok(t)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let table = decode_tensor_table(bytes)?;
    let mut by_name: HashMap<String, Tensor> = table.into_iter().collect();
    let has_adam = by_name.contains_key("adam.config");

    let seed = limbs_u64(
        "meta.seed",
        &take_tensor(&mut by_name, "meta.seed", Some(&[4]))?,
    )?;
    let epoch = limbs_u64(
        "meta.epoch",
        &take_tensor(&mut by_name, "meta.epoch", Some(&[4]))?,
    )?;
    let dropout = take_tensor(&mut by_name, "meta.dropout", Some(&[1]))?.data()[0];
    let mut net = SpamNet::new(&mut Rng::new(0), dropout)
        .map_err(|e| Error::InconsistentTable(format!("meta.dropout: {e}")))?;
    let names: Vec<(String, Vec<usize>)> = net
        .named_parameters()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    for (name, shape) in &names {
        net.set_parameter(name, take_tensor(&mut by_name, name, Some(shape))?)?;
    }

    let adam = if has_adam {
        let c = take_tensor(&mut by_name, "adam.config", Some(&[4]))?;
        let config = AdamConfig {
            lr: c.data()[0],
            beta1: c.data()[1],
            beta2: c.data()[2],
            eps: c.data()[3],
        };
        let step = limbs_u64(
            "adam.step",
            &take_tensor(&mut by_name, "adam.step", Some(&[4]))?,
        )?;
        let mut m = Vec::with_capacity(names.len());
        let mut v = Vec::with_capacity(names.len());
        for (name, shape) in &names {
            m.push(take_tensor(
                &mut by_name,
                &format!("adam.m.{name}"),
                Some(shape),
            )?);
        }
        for (name, shape) in &names {
            v.push(take_tensor(
                &mut by_name,
                &format!("adam.v.{name}"),
                Some(shape),
            )?);
        }
        Some(AdamState::from_parts(config, step, m, v)?)
    } else {
        None
    };

    if let Some(extra) = by_name.keys().min() {
        return Err(Error::InconsistentTable(format!(
            "unexpected tensor {extra}"
        )));
    }
    Ok(Checkpoint {
        net,
        adam,
        meta: CheckpointMeta { seed, epoch },
    })
}

/// Writes via a sibling temporary file so a crash never leaves a half-written checkpoint.
pub fn save_checkpoint(
    net: &SpamNet,
    adam: Option<&AdamState>,
    meta: CheckpointMeta,
    path: &Path,
) -> Result<()> {
    let bytes = encode_checkpoint(net, adam, meta);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_spamnet;

    fn trained_state() -> (SpamNet, AdamState) {
        let mut rng = Rng::new(11);
        let mut net = build_spamnet(&mut rng);
        let mut adam = net.adam(AdamConfig::default());
        let x = Tensor::full(&[2, 3, 56, 56], 0.3).unwrap();
        let y = Tensor::from_vec(&[2, 1], vec![1.0, 0.0]).unwrap();
        crate::model::train_step(&mut net, &x, &y, &mut adam, &mut rng).unwrap();
        (net, adam)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (net, adam) = trained_state();
        let meta = CheckpointMeta {
            seed: 0xDEAD_BEEF_0123_4567,
            epoch: 42,
        };
        let bytes = encode_checkpoint(&net, Some(&adam), meta);
        let ck = decode_checkpoint(&bytes).unwrap();
        assert_eq!(ck.meta, meta);
        for ((na, a), (nb, b)) in net.named_parameters().iter().zip(ck.net.named_parameters()) {
            assert_eq!(*na, nb);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b), "{na}");
        }
        assert_eq!(ck.adam.as_ref(), Some(&adam));
        assert_eq!(encode_checkpoint(&ck.net, ck.adam.as_ref(), ck.meta), bytes);
    }

    #[test]
    fn optimiser_state_is_optional() {
        let (net, _) = trained_state();
        let bytes = encode_checkpoint(&net, None, CheckpointMeta::default());
        let ck = decode_checkpoint(&bytes).unwrap();
        assert!(ck.adam.is_none());
        assert_eq!(ck.net.digest(), net.digest());
    }

    #[test]
    fn header_layout() {
        let net = build_spamnet(&mut Rng::new(0));
        let bytes = encode_checkpoint(&net, None, CheckpointMeta::default());
        assert_eq!(&bytes[..4], b"DISC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        // Three metadata tensors plus twelve parameters.
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 15);
        let name_len = u16::from_le_bytes(bytes[12..14].try_into().unwrap()) as usize;
        assert_eq!(&bytes[14..14 + name_len], b"meta.seed");
    }

    #[test]
    fn distinct_errors() {
        let net = build_spamnet(&mut Rng::new(0));
        let good = encode_checkpoint(&net, None, CheckpointMeta::default());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadMagic(_))));

        let mut bad = good.clone();
        bad[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::UnsupportedVersion {
                found: 2,
                expected: 1
            })
        ));

        assert!(matches!(
            decode_checkpoint(&good[..good.len() - 1]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(
            decode_checkpoint(&good[..2]),
            Err(Error::Truncated(_))
        ));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::InconsistentTable(_))
        ));

        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&14u32.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bad),
            Err(Error::InconsistentTable(_))
        ));
    }

    #[test]
    fn wrong_parameter_shape_is_inconsistent() {
        let mut out = Vec::new();
        out.extend_from_slice(b"DISC");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&1u32.to_le_bytes());
        let name = b"dense_2.bias";
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(1);
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&[0; 8]);
        assert_eq!(decode_tensor_table(&out).unwrap()[0].1.shape(), [2]);
        assert!(matches!(
            decode_checkpoint(&out),
            Err(Error::InconsistentTable(_))
        ));
    }

    #[test]
    fn file_round_trip() {
        let (net, adam) = trained_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let meta = CheckpointMeta { seed: 7, epoch: 1 };
        save_checkpoint(&net, Some(&adam), meta, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        save_checkpoint(&ck.net, ck.adam.as_ref(), ck.meta, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(matches!(
            load_checkpoint(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }
}
