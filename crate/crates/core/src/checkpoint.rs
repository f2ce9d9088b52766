//! VacuumState checkpoint files.
//!
//! Layout: one line of JSON (the header, terminated by `\n`) followed by the
//! dim x dim matrix in row-major order, each entry as two little-endian f64
//! values (re, im).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeParams, MomentumLattice};
use crate::vacuum::VacuumState;

pub const FORMAT_TAG: &str = "dirac-vacuum-checkpoint";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub lattice: LatticeParams,
    pub modes: Vec<[i32; 3]>,
    pub mass: f64,
    pub dim: usize,
    pub encoding: String,
    /// Free-form solver metadata (iteration count, residual, config echo).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn write_checkpoint_to<W: Write>(mut w: W, state: &VacuumState, metadata: serde_json::Value) -> Result<()> {
    let lat = state.lattice();
    let header = CheckpointHeader {
        format: FORMAT_TAG.to_owned(),
        version: 1,
        lattice: lat.params(),
        modes: lat.modes().to_vec(),
        mass: state.mass(),
        dim: lat.dim(),
        encoding: "row-major complex128 little-endian".to_owned(),
        metadata,
    };
    let line = serde_json::to_string(&header)?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let q = state.matrix();
    let mut buf = Vec::with_capacity(16 * lat.dim());
    for i in 0..lat.dim() {
        buf.clear();
        for j in 0..lat.dim() {
            let z = q[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint(path: &Path, state: &VacuumState, metadata: serde_json::Value) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint_to(f, state, metadata)
}

pub fn read_checkpoint_from<R: Read>(r: R) -> Result<(VacuumState, CheckpointHeader)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if header.format != FORMAT_TAG {
        return Err(Error::Checkpoint(format!("unexpected format tag {:?}", header.format)));
    }
    let lat = MomentumLattice::from_modes(header.lattice, header.modes.clone())?;
    if lat.dim() != header.dim {
        return Err(Error::Checkpoint("dimension does not match mode list".into()));
    }
    let d = header.dim;
    let mut bytes = vec![0u8; 16 * d * d];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("payload: {e}")))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let q = Mat::from_fn(d, d, |i, j| {
        let o = 16 * (i * d + j);
        c64::new(f(o), f(o + 8))
    });
    let state = VacuumState::new(q, lat, header.mass)?;
    Ok((state, header))
}

pub fn read_checkpoint(path: &Path) -> Result<(VacuumState, CheckpointHeader)> {
    read_checkpoint_from(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn round_trip_preserves_entries() {
        let lat = build_lattice(3.0, 1, 2.2).unwrap();
        let d = lat.dim();
        let q = Mat::from_fn(d, d, |i, j| {
            let x = (i as f64 - j as f64) * 0.01;
            if i == j {
                c64::new(0.25, 0.0)
            } else {
                c64::new(x.cos() * 1e-3, x.sin() * 1e-3)
            }
        });
        let s = VacuumState::new(crate::linalg::hermitize(q.as_ref()), lat, 1.5).unwrap();
        let mut buf = Vec::new();
        write_checkpoint_to(&mut buf, &s, serde_json::json!({"iterations": 7})).unwrap();
        let (back, header) = read_checkpoint_from(buf.as_slice()).unwrap();
        assert_eq!(header.metadata["iterations"], 7);
        assert_eq!(back.mass(), 1.5);
        assert_eq!(back.matrix(), s.matrix());
    }

    #[test]
    fn truncated_payload_rejected() {
        let lat = build_lattice(3.0, 1, 1.0).unwrap();
        let s = VacuumState::zero(lat, 1.0);
        let mut buf = Vec::new();
        write_checkpoint_to(&mut buf, &s, serde_json::Value::Null).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_checkpoint_from(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
