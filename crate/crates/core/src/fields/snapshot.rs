//! Binary checkpoint layout, all little-endian:
//!
//! ```text
//! u32 k_max | u32 grid_size | u32 mode_count | mode_count x (f64 re, f64 im)
//! ```
//!
//! Coefficients follow the basis mode order. A trajectory file is a plain
//! sequence of records `f64 t | snapshot`.

use std::io::{self, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use super::basis::StokesBasis;
use super::field::VelocityField;
use crate::error::{Error, Result};

pub const HEADER_BYTES: usize = 12;

pub fn write_snapshot<W: Write>(w: &mut W, u: &VelocityField) -> Result<()> {
    let b = u.basis();
    let mut buf = Vec::with_capacity(HEADER_BYTES + 16 * b.len());
    for v in [b.k_max(), b.grid_size(), b.len()] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for c in u.coeffs() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn snapshot_bytes(u: &VelocityField) -> Vec<u8> {
    let mut v = Vec::new();
    write_snapshot(&mut v, u).expect("writing to a Vec cannot fail");
    v
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Reads the header `(k_max, grid_size, mode_count)`.
pub fn read_header<R: Read>(r: &mut R) -> Result<(usize, usize, usize)> {
    let k = read_u32(r)? as usize;
    let g = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    Ok((k, g, n))
}

fn read_payload<R: Read>(r: &mut R, basis: &Arc<StokesBasis>) -> Result<VelocityField> {
    let mut coeffs = Vec::with_capacity(basis.len());
    for _ in 0..basis.len() {
        let re = read_f64(r)?;
        let im = read_f64(r)?;
        coeffs.push(Complex64::new(re, im));
    }
    VelocityField::from_coeffs(basis, coeffs).map_err(|e| Error::Snapshot(e.to_string()))
}

/// Reads a snapshot written on a basis identical to `basis`.
pub fn read_snapshot<R: Read>(r: &mut R, basis: &Arc<StokesBasis>) -> Result<VelocityField> {
    let (k, g, n) = read_header(r)?;
    if k != basis.k_max() || g != basis.grid_size() || n != basis.len() {
        return Err(Error::Snapshot(format!(
            "header (k_max {k}, grid {g}, modes {n}) does not match basis \
             (k_max {}, grid {}, modes {})",
            basis.k_max(),
            basis.grid_size(),
            basis.len()
        )));
    }
    read_payload(r, basis)
}

/// Reads a snapshot, rebuilding the basis from its header.
pub fn read_snapshot_any<R: Read>(r: &mut R) -> Result<VelocityField> {
    let (k, g, n) = read_header(r)?;
    let basis = StokesBasis::new(k, g)?;
    if n != basis.len() {
        return Err(Error::Snapshot(format!(
            "mode count {n} inconsistent with k_max {k} ({} modes)",
            basis.len()
        )));
    }
    read_payload(r, &basis)
}

/// Records every `stride`-th offered state as `f64 t | snapshot`.
pub struct TrajectoryWriter<W: Write> {
    inner: W,
    stride: usize,
    offered: usize,
    written: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(inner: W, stride: usize) -> Self {
        TrajectoryWriter {
            inner,
            stride: stride.max(1),
            offered: 0,
            written: 0,
        }
    }

    pub fn offer(&mut self, t: f64, u: &VelocityField) -> Result<()> {
        if self.offered.is_multiple_of(self.stride) {
            self.inner.write_all(&t.to_le_bytes())?;
            write_snapshot(&mut self.inner, u)?;
            self.written += 1;
        }
        self.offered += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Reads every `(t, field)` record until end of input.
pub fn read_trajectory<R: Read>(
    r: &mut R,
    basis: &Arc<StokesBasis>,
) -> Result<Vec<(f64, VelocityField)>> {
    let mut out = Vec::new();
    loop {
        let mut tb = [0u8; 8];
        match r.read_exact(&mut tb) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        out.push((f64::from_le_bytes(tb), read_snapshot(r, basis)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout() {
        let b = StokesBasis::new(1, 8).unwrap();
        let u = VelocityField::unit_mode(&b, [1, 0]).unwrap();
        let bytes = snapshot_bytes(&u);
        assert_eq!(bytes.len(), HEADER_BYTES + 16 * 8);
        assert_eq!(&bytes[..12], &[1, 0, 0, 0, 8, 0, 0, 0, 8, 0, 0, 0]);
    }

    #[test]
    fn trajectory_stride() {
        let b = StokesBasis::new(2, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fields: Vec<VelocityField> = (0..5)
            .map(|_| VelocityField::random_regular(&b, &mut rng, 1.0))
            .collect();
        let mut w = TrajectoryWriter::new(Vec::new(), 2);
        for (i, f) in fields.iter().enumerate() {
            w.offer(i as f64 * 0.5, f).unwrap();
        }
        assert_eq!(w.written(), 3);
        let bytes = w.into_inner().unwrap();
        let back = read_trajectory(&mut bytes.as_slice(), &b).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[1].0, 1.0);
        assert_eq!(back[2].1, fields[4]);
    }

    #[test]
    fn mismatched_basis_is_rejected() {
        let b = StokesBasis::new(2, 6).unwrap();
        let other = StokesBasis::new(2, 8).unwrap();
        let bytes = snapshot_bytes(&VelocityField::zeros(&b));
        assert!(read_snapshot(&mut bytes.as_slice(), &other).is_err());
        assert_eq!(
            read_snapshot_any(&mut bytes.as_slice()).unwrap(),
            VelocityField::zeros(&b)
        );
    }
}
