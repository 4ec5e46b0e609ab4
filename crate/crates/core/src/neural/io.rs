//! `MLP1` artifact: a snapshot ensemble (a lone head is a one-member
//! ensemble). All integers and parameters are little-endian; parameters are
//! stored as f64 whatever the in-memory scalar.
//!
//! ```text
//! b"MLP1" | u32 version | u8 combine | u32 min_epoch | u32 interval | u32 members
//! members x { u32 epoch | u32 n_layers | n_layers x { u32 in | u32 out | in*out f64 (row-major) | out f64 } }
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::ensemble::{Combine, Snapshot, SnapshotEnsemble};
use super::mlp::{DenseLayer, MlpHead};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"MLP1";
pub const VERSION: u32 = 1;

fn fmt_err(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated MLP1 artifact".into())
    } else {
        Error::Format(e.to_string())
    }
}

pub fn write_ensemble<T: Scalar, W: Write>(ens: &SnapshotEnsemble<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u8(match ens.combine() {
        Combine::Mean => 0,
        Combine::Vote => 1,
    })?;
    w.write_u32::<LittleEndian>(ens.min_epoch() as u32)?;
    w.write_u32::<LittleEndian>(ens.interval() as u32)?;
    w.write_u32::<LittleEndian>(ens.len() as u32)?;
    for member in ens.members() {
        w.write_u32::<LittleEndian>(member.epoch as u32)?;
        let layers = member.head.layers();
        w.write_u32::<LittleEndian>(layers.len() as u32)?;
        for layer in layers {
            w.write_u32::<LittleEndian>(layer.input_dim() as u32)?;
            w.write_u32::<LittleEndian>(layer.output_dim() as u32)?;
            for &v in layer.weights.iter() {
                w.write_f64::<LittleEndian>(v.as_f64())?;
            }
            for &v in layer.bias.iter() {
                w.write_f64::<LittleEndian>(v.as_f64())?;
            }
        }
    }
    w.flush()
}

/// Reads the body after the magic bytes.
pub(crate) fn read_ensemble_body<T: Scalar, R: Read>(mut r: R) -> Result<SnapshotEnsemble<T>> {
    let version = r.read_u32::<LittleEndian>().map_err(fmt_err)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported MLP1 version {version}")));
    }
    let combine = match r.read_u8().map_err(fmt_err)? {
        0 => Combine::Mean,
        1 => Combine::Vote,
        other => return Err(Error::Format(format!("unknown combine rule {other}"))),
    };
    let min_epoch = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let interval = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let n_members = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let mut members = Vec::with_capacity(n_members);
    for _ in 0..n_members {
        let epoch = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
        let n_layers = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
            let cols = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
            let mut buf = vec![0f64; rows * cols];
            r.read_f64_into::<LittleEndian>(&mut buf).map_err(fmt_err)?;
            let weights = Array2::from_shape_vec((rows, cols), buf.into_iter().map(T::of).collect())
                .map_err(|e| Error::Format(e.to_string()))?;
            let mut bias = vec![0f64; cols];
            r.read_f64_into::<LittleEndian>(&mut bias).map_err(fmt_err)?;
            layers.push(DenseLayer {
                weights,
                bias: Array1::from_iter(bias.into_iter().map(T::of)),
            });
        }
        let head = MlpHead::from_layers(layers).map_err(|e| Error::Format(e.to_string()))?;
        members.push(Snapshot { epoch, head });
    }
    SnapshotEnsemble::new(members, min_epoch, interval, combine)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn read_ensemble<T: Scalar, R: Read>(mut r: R) -> Result<SnapshotEnsemble<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(fmt_err)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected MLP1")));
    }
    read_ensemble_body(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_in_f64() {
        let heads: Vec<_> = (0..3)
            .map(|i| Snapshot {
                epoch: 275 + 5 * i,
                head: MlpHead::<f64>::with_shape(3, &[4, 2], 5, i as u64).unwrap(),
            })
            .collect();
        let ens = SnapshotEnsemble::new(heads, 275, 5, Combine::Vote).unwrap();
        let mut buf = Vec::new();
        write_ensemble(&ens, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"MLP1");
        let back: SnapshotEnsemble<f64> = read_ensemble(buf.as_slice()).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn f32_survives_the_f64_encoding() {
        let ens = SnapshotEnsemble::single(MlpHead::<f32>::with_shape(2, &[3], 5, 1).unwrap(), 12);
        let mut buf = Vec::new();
        write_ensemble(&ens, &mut buf).unwrap();
        let back: SnapshotEnsemble<f32> = read_ensemble(buf.as_slice()).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn truncated_artifact_is_format_error() {
        let ens = SnapshotEnsemble::single(MlpHead::<f64>::with_shape(2, &[3], 5, 1).unwrap(), 1);
        let mut buf = Vec::new();
        write_ensemble(&ens, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            read_ensemble::<f64, _>(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
