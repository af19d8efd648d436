//! Binary checkpoint format shared by training and deployment.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "WISD"
//! version u32      currently 1
//! count   u32      number of tensors
//! per tensor:
//!   name_len u32, name bytes (utf-8)
//!   ndim     u32, dims as u64 each
//!   data     prod(dims) little-endian f32 values
//! ```
//!
//! Tensors round-trip bit-exactly; loaders validate architecture before
//! touching the data.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::neural::{Activation, Layer, Mat, Mlp};

pub const MAGIC: &[u8; 4] = b"WISD";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
            for d in &t.dims {
                w.write_all(&d.to_le_bytes())?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(CheckpointError::Corrupt(format!(
                "bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = read_u32(&mut r, "version")?;
        if version != VERSION {
            return Err(CheckpointError::Corrupt(format!(
                "unsupported version {version}"
            )));
        }
        let count = read_u32(&mut r, "tensor count")?;
        let mut tensors = Vec::with_capacity(count as usize);
        for i in 0..count {
            let name_len = read_u32(&mut r, "name length")? as usize;
            if name_len > 4096 {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor {i}: name length {name_len} out of range"
                )));
            }
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name, "name")?;
            let name = String::from_utf8(name)
                .map_err(|_| CheckpointError::Corrupt(format!("tensor {i}: non-utf8 name")))?;
            let ndim = read_u32(&mut r, "ndim")? as usize;
            if ndim > 8 {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor {name}: {ndim} dimensions out of range"
                )));
            }
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                read_exact(&mut r, &mut b, "dims")?;
                dims.push(u64::from_le_bytes(b));
            }
            let len: u64 = dims.iter().product();
            if len > (1 << 30) {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor {name}: {len} elements out of range"
                )));
            }
            let mut data = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let mut b = [0u8; 4];
                read_exact(&mut r, &mut b, "tensor data")?;
                data.push(f32::from_le_bytes(b));
            }
            tensors.push(Tensor { name, dims, data });
        }
        Ok(Self { tensors })
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let file = std::fs::File::open(path)?;
        Self::read(io::BufReader::new(file))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), CheckpointError> {
    r.read_exact(buf)
        .map_err(|_| CheckpointError::Corrupt(format!("truncated while reading {what}")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

/// Serialize an MLP's layers under `prefix` (weights `prefix.l0.w`, biases
/// `prefix.l0.b`, and so on).
pub fn mlp_to_tensors(prefix: &str, net: &Mlp<f32>) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(net.layers.len() * 2);
    for (l, layer) in net.layers.iter().enumerate() {
        out.push(Tensor {
            name: format!("{prefix}.l{l}.w"),
            dims: vec![layer.w.rows() as u64, layer.w.cols() as u64],
            data: layer.w.data().to_vec(),
        });
        out.push(Tensor {
            name: format!("{prefix}.l{l}.b"),
            dims: vec![layer.b.len() as u64],
            data: layer.b.clone(),
        });
    }
    out
}

/// Rebuild an MLP stored under `prefix`, validating layer chaining.
pub fn mlp_from_tensors(
    prefix: &str,
    ck: &Checkpoint,
    activation: Activation,
) -> Result<Mlp<f32>, CheckpointError> {
    let mut layers = Vec::new();
    for l in 0.. {
        let (Some(w), Some(b)) = (
            ck.get(&format!("{prefix}.l{l}.w")),
            ck.get(&format!("{prefix}.l{l}.b")),
        ) else {
            break;
        };
        if w.dims.len() != 2 || b.dims.len() != 1 || w.dims[0] != b.dims[0] {
            return Err(CheckpointError::ArchitectureMismatch(format!(
                "{prefix} layer {l}: weight dims {:?} and bias dims {:?} are inconsistent",
                w.dims, b.dims
            )));
        }
        let (rows, cols) = (w.dims[0] as usize, w.dims[1] as usize);
        if w.data.len() != rows * cols {
            return Err(CheckpointError::Corrupt(format!(
                "{prefix} layer {l}: expected {} weights, found {}",
                rows * cols,
                w.data.len()
            )));
        }
        if let Some(prev) = layers.last() {
            let prev: &Layer<f32> = prev;
            if prev.w.rows() != cols {
                return Err(CheckpointError::ArchitectureMismatch(format!(
                    "{prefix} layer {l}: input dim {cols} does not chain from previous output {}",
                    prev.w.rows()
                )));
            }
        }
        layers.push(Layer {
            w: Mat::from_vec(rows, cols, w.data.clone()),
            b: b.data.clone(),
        });
    }
    if layers.is_empty() {
        return Err(CheckpointError::ArchitectureMismatch(format!(
            "no tensors under prefix {prefix:?}"
        )));
    }
    Ok(Mlp { layers, activation })
}

/// Validate that a loaded network has the expected input/output dims.
pub fn expect_mlp_dims(
    net: &Mlp<f32>,
    input_dim: usize,
    output_dim: usize,
    what: &str,
) -> Result<(), CheckpointError> {
    if net.input_dim() != input_dim || net.output_dim() != output_dim {
        return Err(CheckpointError::ArchitectureMismatch(format!(
            "{what}: expected {input_dim} -> {output_dim}, checkpoint has {} -> {}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_net(seed: u64) -> Mlp<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::init(&[5, 8, 4], Activation::Relu, 1.0, &mut rng)
    }

    #[test]
    fn round_trip_is_bitwise_identity() {
        let net = sample_net(1);
        let ck = Checkpoint {
            tensors: mlp_to_tensors("actor", &net),
        };
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = Checkpoint::read(buf.as_slice()).unwrap();
        assert_eq!(ck, back);
        let net2 = mlp_from_tensors("actor", &back, Activation::Relu).unwrap();
        for (a, b) in net.layers.iter().zip(&net2.layers) {
            for (x, y) in a.w.data().iter().zip(b.w.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.b.iter().zip(&b.b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let ck = Checkpoint {
            tensors: mlp_to_tensors("actor", &sample_net(2)),
        };
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        for cut in [3, 7, 11, buf.len() / 2, buf.len() - 1] {
            assert!(matches!(
                Checkpoint::read(&buf[..cut]),
                Err(CheckpointError::Corrupt(_))
            ));
        }
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let mut buf = Vec::new();
        Checkpoint::default().write(&mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            Checkpoint::read(buf.as_slice()),
            Err(CheckpointError::Corrupt(_))
        ));
    }

    #[test]
    fn wrong_action_head_is_architecture_mismatch() {
        // An 8-action head (16 outputs) loaded where 3 actions (6 outputs)
        // are expected.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f32>::init(&[41, 16, 16], Activation::Relu, 1.0, &mut rng);
        let ck = Checkpoint {
            tensors: mlp_to_tensors("actor", &net),
        };
        let loaded = mlp_from_tensors("actor", &ck, Activation::Relu).unwrap();
        assert!(matches!(
            expect_mlp_dims(&loaded, 41, 6, "actor"),
            Err(CheckpointError::ArchitectureMismatch(_))
        ));
    }

    #[test]
    fn missing_prefix_is_architecture_mismatch() {
        let ck = Checkpoint::default();
        assert!(matches!(
            mlp_from_tensors("actor", &ck, Activation::Relu),
            Err(CheckpointError::ArchitectureMismatch(_))
        ));
    }
}
