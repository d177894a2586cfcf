//! Binary checkpoints of a [`FlowState`].
//!
//! Layout, all little-endian: the magic `BQCHK1`, `u32` version, `u64` n, `f64` t, nu,
//! kappa, mean_u1, mean_u2, then for vorticity and temperature a `u64` count followed by
//! that many `(re, im)` pairs of `f64` in row-major wavevector order.

use std::path::Path;

use crate::dynamics::FlowState;
use crate::error::{Error, Result};
use crate::torus::{Complex64, Grid, SpectralField};

pub const MAGIC: &[u8; 6] = b"BQCHK1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 6 + 4 + 8 + 5 * 8;

pub fn checkpoint_bytes(state: &FlowState) -> Vec<u8> {
    let n = state.grid().n();
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * (8 + 16 * n * n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for x in [state.t, state.nu, state.kappa, state.mean_u[0], state.mean_u[1]] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for f in [&state.omega, &state.theta] {
        out.extend_from_slice(&(f.coeffs().len() as u64).to_le_bytes());
        for c in f.coeffs() {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!(
                "truncated while reading {what} at byte {} of {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("eight bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("eight bytes")))
    }
}

fn block(cur: &mut Cursor<'_>, grid: Grid, what: &str) -> Result<SpectralField> {
    let count = cur.u64(what)?;
    if count != grid.len() as u64 {
        return Err(Error::Checkpoint(format!(
            "{what} block holds {count} coefficients, expected {}",
            grid.len()
        )));
    }
    let raw = cur.take(16 * grid.len(), what)?;
    let coeffs = raw
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("eight bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("eight bytes")),
            )
        })
        .collect();
    SpectralField::new(grid, coeffs)
}

/// Decodes and validates a checkpoint; nothing is returned unless every check passes.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<FlowState> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(6, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a BQCHK1 file".into()));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = cur.u64("resolution")?;
    let n = usize::try_from(n)
        .ok()
        .filter(|&n| n <= 1 << 16)
        .ok_or_else(|| Error::Checkpoint(format!("implausible resolution {n}")))?;
    let grid = Grid::new(n).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let t = cur.f64("time")?;
    let nu = cur.f64("viscosity")?;
    let kappa = cur.f64("conductivity")?;
    let mean_u = [cur.f64("mean velocity")?, cur.f64("mean velocity")?];
    let omega = block(&mut cur, grid, "vorticity")?;
    let theta = block(&mut cur, grid, "temperature")?;
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    FlowState::at_time(omega, theta, t, nu, kappa, mean_u).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn write_checkpoint(state: &FlowState, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(state))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<FlowState> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{initial_state, InitialData, Perturbation};

    fn state() -> FlowState {
        let g = Grid::new(16).unwrap();
        let mut s = initial_state(g, &InitialData::rough(3), Perturbation::default(), 1e-3, 0.02).unwrap();
        s.t = 0.375;
        s.mean_u = [0.25, -0.5];
        s
    }

    #[test]
    fn round_trip_is_exact() {
        let s = state();
        let bytes = checkpoint_bytes(&s);
        assert_eq!(bytes.len(), HEADER_LEN + 2 * (8 + 16 * 256));
        let back = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(checkpoint_bytes(&back), bytes);
    }

    #[test]
    fn truncation_is_rejected_everywhere() {
        let bytes = checkpoint_bytes(&state());
        for cut in [0, 3, 9, 20, HEADER_LEN + 4, bytes.len() - 1] {
            assert!(matches!(checkpoint_from_bytes(&bytes[..cut]), Err(Error::Checkpoint(_))), "cut {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(checkpoint_from_bytes(&long), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn header_problems() {
        let mut bytes = checkpoint_bytes(&state());
        bytes[6..10].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::UnsupportedVersion(2))));
        let mut bytes = checkpoint_bytes(&state());
        bytes[0] = b'X';
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn asymmetric_coefficients_are_rejected() {
        let mut bytes = checkpoint_bytes(&state());
        // imaginary part of vorticity mode (1, 0)
        let at = HEADER_LEN + 8 + 16 + 8;
        bytes[at..at + 8].copy_from_slice(&1.0f64.to_le_bytes());
        let err = checkpoint_from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("Hermitian"), "{err}");
    }
}
