//! Binary field snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `APSDSNAP` |
//! | 4     | format version (`u32`, currently 1) |
//! | 8     | mesh hash (`u64`, see [`Mesh::hash`]) |
//! | 8     | time `t` (`f64`) |
//! | 4     | spinor rank (`u32`) |
//! | 8     | node count (`u64`) |
//! | 16 * rank * nodes | values, `re, im` interleaved, node-major |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::mesh::Mesh;
use crate::C64;

pub const MAGIC: &[u8; 8] = b"APSDSNAP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 4 + 8;
const RANK: usize = 2;

pub fn encode_snapshot(field: &SpinorField) -> Vec<u8> {
    let values = field.values();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&field.mesh().hash().to_le_bytes());
    out.extend_from_slice(&field.t().to_le_bytes());
    out.extend_from_slice(&(RANK as u32).to_le_bytes());
    out.extend_from_slice(&(field.mesh().node_count() as u64).to_le_bytes());
    for v in values.iter() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let end = *at + N;
    let chunk = bytes
        .get(*at..end)
        .ok_or_else(|| Error::Snapshot(format!("truncated header: need {HEADER_LEN} bytes, found {}", bytes.len())))?;
    *at = end;
    Ok(chunk.try_into().expect("slice has length N"))
}

/// Decodes a snapshot written for `mesh`.
pub fn decode_snapshot(bytes: &[u8], mesh: &Arc<Mesh>) -> Result<SpinorField> {
    let mut at = 0;
    if take::<8>(bytes, &mut at)? != *MAGIC {
        return Err(Error::Snapshot("bad magic, not a field snapshot".into()));
    }
    let version = u32::from_le_bytes(take(bytes, &mut at)?);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version} (expected {VERSION})")));
    }
    let hash = u64::from_le_bytes(take(bytes, &mut at)?);
    let t = f64::from_le_bytes(take(bytes, &mut at)?);
    let rank = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let nodes = u64::from_le_bytes(take(bytes, &mut at)?) as usize;
    if hash != mesh.hash() {
        return Err(Error::MeshMismatch { expected: mesh.hash(), found: hash });
    }
    if rank != RANK || nodes != mesh.node_count() {
        return Err(Error::Snapshot(format!(
            "header declares rank {rank} on {nodes} nodes, mesh has rank {RANK} on {} nodes",
            mesh.node_count()
        )));
    }
    let count = rank * nodes;
    let expected = HEADER_LEN + 16 * count;
    if bytes.len() != expected {
        let what = if bytes.len() < expected { "truncated" } else { "trailing bytes in" };
        return Err(Error::Snapshot(format!("{what} snapshot: expected {expected} bytes, found {}", bytes.len())));
    }
    let values = DVector::from_iterator(
        count,
        bytes[HEADER_LEN..].chunks_exact(16).map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        }),
    );
    Ok(SpinorField::from_values(mesh.clone(), t, values))
}

pub fn write_snapshot(field: &SpinorField, mut w: impl Write) -> Result<()> {
    w.write_all(&encode_snapshot(field))?;
    Ok(())
}

pub fn read_snapshot(mut r: impl Read, mesh: &Arc<Mesh>) -> Result<SpinorField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes, mesh)
}

pub fn export_snapshot(field: &SpinorField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_snapshot(field))?;
    Ok(())
}

pub fn import_snapshot(path: impl AsRef<Path>, mesh: &Arc<Mesh>) -> Result<SpinorField> {
    decode_snapshot(&fs::read(path)?, mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FoliatedSpacetime;
    use crate::profile::Profile;
    use crate::spin::Spinor;

    fn field(radial: usize, angular: usize) -> SpinorField {
        let st = FoliatedSpacetime::annulus(1.0, 2.0, Profile::one(), (0.0, 1.0)).unwrap();
        let mesh = Arc::new(Mesh::build(&st, radial, angular).unwrap());
        SpinorField::from_fn(mesh, 0.375, |n, x| {
            let v = (n as f64 + 1.0).ln() * x[0];
            Spinor::new(C64::new(v, -1.0 / 3.0), C64::new(f64::MIN_POSITIVE, v.sin()))
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = field(8, 8);
        let g = decode_snapshot(&encode_snapshot(&f), f.mesh()).unwrap();
        assert_eq!(g.t().to_bits(), f.t().to_bits());
        assert!(g.values().iter().zip(f.values().iter()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn truncation_and_mismatch_are_errors() {
        let f = field(8, 8);
        let bytes = encode_snapshot(&f);
        for cut in [0, 5, HEADER_LEN - 1, HEADER_LEN, bytes.len() - 1] {
            let err = decode_snapshot(&bytes[..cut], f.mesh()).unwrap_err();
            assert!(matches!(err, Error::Snapshot(_)), "cut {cut}: {err}");
        }
        let other = field(16, 8);
        assert!(matches!(decode_snapshot(&bytes, other.mesh()), Err(Error::MeshMismatch { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshot(&bad, f.mesh()), Err(Error::Snapshot(_))));
    }
}
