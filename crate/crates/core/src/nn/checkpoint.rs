//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ifc-grl-ckpt/1\n"
//! u32 entry count
//! per entry:
//!   u8  kind (0 = trainable parameter, 1 = buffer)
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank × u64 dimensions
//!   product(dimensions) × f64
//! ```
//!
//! Entries appear in the module's registry order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{Module, NnError, Slot, SlotMut, Tensor};

pub const CHECKPOINT_TAG: &str = "ifc-grl-ckpt/1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub trainable: bool,
    pub value: Tensor,
}

fn io_err(e: io::Error) -> NnError {
    NnError::Checkpoint(e.to_string())
}

pub fn write_checkpoint<W: Write>(module: &dyn Module, mut out: W) -> Result<(), NnError> {
    let mut entries: Vec<(String, bool, Tensor)> = Vec::new();
    module.visit("", &mut |name, slot| match slot {
        Slot::Param(p) => entries.push((name.to_string(), true, p.value.clone())),
        Slot::Buffer(b) => entries.push((name.to_string(), false, b.clone())),
    });

    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_TAG.as_bytes());
    buf.push(b'\n');
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, trainable, value) in &entries {
        buf.push(if *trainable { 0 } else { 1 });
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(value.shape().len() as u32).to_le_bytes());
        for &d in value.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io_err)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NnError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Vec<CheckpointEntry>, NnError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    let mut r = Reader { bytes: &bytes, at: 0 };

    let tag = r.take(CHECKPOINT_TAG.len() + 1)?;
    if &tag[..CHECKPOINT_TAG.len()] != CHECKPOINT_TAG.as_bytes() || tag[CHECKPOINT_TAG.len()] != b'\n' {
        return Err(NnError::Checkpoint(format!("not an {CHECKPOINT_TAG} file")));
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let kind = r.take(1)?[0];
        let trainable = match kind {
            0 => true,
            1 => false,
            k => return Err(NnError::Checkpoint(format!("unknown entry kind {k}"))),
        };
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| NnError::Checkpoint("entry name is not UTF-8".into()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(8).ok_or_else(|| NnError::Checkpoint("entry too large".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        entries.push(CheckpointEntry {
            name,
            trainable,
            value: Tensor::from_vec(&shape, data)?,
        });
    }
    if r.at != bytes.len() {
        return Err(NnError::Checkpoint("trailing bytes after last entry".into()));
    }
    Ok(entries)
}

/// Copies checkpoint entries into `module`; names, kinds, shapes and order
/// must match the module's registry exactly.
pub fn restore(module: &mut dyn Module, entries: &[CheckpointEntry]) -> Result<(), NnError> {
    let mut index = 0;
    let mut result = Ok(());
    module.visit_mut("", &mut |name, slot| {
        if result.is_err() {
            return;
        }
        let Some(entry) = entries.get(index) else {
            result = Err(NnError::Checkpoint(format!("missing entry for {name}")));
            return;
        };
        index += 1;
        let (target, trainable) = match slot {
            SlotMut::Param(p) => (&mut p.value, true),
            SlotMut::Buffer(b) => (b, false),
        };
        if entry.name != name || entry.trainable != trainable || entry.value.shape() != target.shape() {
            result = Err(NnError::Checkpoint(format!(
                "entry {} {:?} does not match {name} {:?}",
                entry.name,
                entry.value.shape(),
                target.shape()
            )));
            return;
        }
        target.data_mut().copy_from_slice(entry.value.data());
    });
    result?;
    if index != entries.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} entries, model registers {index}",
            entries.len()
        )));
    }
    Ok(())
}

pub fn save_checkpoint(module: &dyn Module, path: &Path) -> Result<(), NnError> {
    let mut buf = Vec::new();
    write_checkpoint(module, &mut buf)?;
    fs::write(path, buf).map_err(io_err)
}

pub fn load_checkpoint(module: &mut dyn Module, path: &Path) -> Result<(), NnError> {
    let file = fs::File::open(path).map_err(io_err)?;
    let entries = read_checkpoint(io::BufReader::new(file))?;
    restore(module, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{BatchNorm, Linear, Mode, Stage};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_preserves_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut stage = Stage::new(3, 4, &mut rng);
        let x = Tensor::from_vec(&[3, 3], vec![0.1, -0.2, 0.3, 1.0, 2.0, -3.0, 0.5, 0.5, 0.25]).unwrap();
        stage.forward(&x, Mode::Train).unwrap();

        let mut buf = Vec::new();
        write_checkpoint(&stage, &mut buf).unwrap();
        assert!(buf.starts_with(b"ifc-grl-ckpt/1\n"));
        let entries = read_checkpoint(buf.as_slice()).unwrap();
        let names: Vec<_> = entries.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "linear.weight",
                "linear.bias",
                "norm.gamma",
                "norm.beta",
                "norm.running_mean",
                "norm.running_var"
            ]
        );

        let mut fresh = Stage::new(3, 4, &mut ChaCha8Rng::seed_from_u64(99));
        restore(&mut fresh, &entries).unwrap();
        let mut again = Vec::new();
        write_checkpoint(&fresh, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn mismatches_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut buf = Vec::new();
        write_checkpoint(&Linear::new(3, 4, &mut rng), &mut buf).unwrap();
        let entries = read_checkpoint(buf.as_slice()).unwrap();
        assert!(restore(&mut Linear::new(3, 5, &mut rng), &entries).is_err());
        assert!(restore(&mut BatchNorm::new(4), &entries).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        assert!(read_checkpoint(&b"ifc-grl-ckpt/2\n"[..]).is_err());
    }
}
