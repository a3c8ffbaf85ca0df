//! Givens-angle representation of steering matrices, following the 802.11
//! compressed-beamforming convention.
//!
//! Decomposition: per-column phases are removed first (`D-tilde`, making the
//! last row real non-negative), then for each column `i` the row phases
//! `phi_{i..N_r-1, i}` are absorbed and real rotations `psi_{i+1..N_r, i}`
//! zero the subdiagonal. Reconstruction right-multiplies the identity by
//! `D_i(phi)` and transposed Givens matrices in the same column order, so
//! `reconstruct(decompose(V))` equals `V` up to one phase per column.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, SteeringMatrix};

/// Givens angle set for one steering matrix. `phi` and `psi` are stored
/// column-major: all angles of column 1 first, then column 2, matching the
/// order the angles are packed on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct GivensAngles {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub n_r: usize,
    pub n_c: usize,
}

/// Number of phi (= psi) angles for an `n_r x n_c` steering matrix:
/// the sum of `n_r - i` over processed columns `i = 1..min(n_c, n_r-1)`.
pub fn angle_count(n_r: usize, n_c: usize) -> usize {
    let m = n_c.min(n_r.saturating_sub(1));
    (0..m).map(|i| n_r - 1 - i).sum()
}

impl GivensAngles {
    pub fn validate(&self) -> Result<()> {
        let expected = angle_count(self.n_r, self.n_c);
        if self.phi.len() != expected || self.psi.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "expected {expected} phi and psi angles for {}x{}, got {} and {}",
                self.n_r,
                self.n_c,
                self.phi.len(),
                self.psi.len()
            )));
        }
        Ok(())
    }

    /// Total feedback bits at the given quantizer resolutions.
    pub fn total_bits(&self, bits_phi: u8, bits_psi: u8) -> usize {
        self.phi.len() * bits_phi as usize + self.psi.len() * bits_psi as usize
    }
}

/// Feedback bits per subcarrier group for an `n_r x n_c` compressed report.
pub fn compressed_bits_per_group(n_r: usize, n_c: usize, bits_phi: u8, bits_psi: u8) -> usize {
    angle_count(n_r, n_c) * (bits_phi as usize + bits_psi as usize)
}

/// Decomposes a steering matrix into Givens angles.
///
/// Near-zero pivots follow the usual convention: the angle is simply 0.
pub fn givens_decompose(v: &SteeringMatrix) -> GivensAngles {
    let n_r = v.n_r();
    let n_c = v.n_c();
    let mut w = v.matrix().clone();

    // Column phase removal: make the last row real non-negative.
    for c in 0..n_c {
        let z = w.get(n_r - 1, c);
        let theta = z.im.atan2(z.re);
        let rot = Complex64::from_polar(1.0, -theta);
        for r in 0..n_r {
            let val = w.get(r, c) * rot;
            w.set(r, c, val);
        }
    }

    let m = n_c.min(n_r - 1);
    let mut phi = Vec::with_capacity(angle_count(n_r, n_c));
    let mut psi = Vec::with_capacity(angle_count(n_r, n_c));

    for i in 0..m {
        // Absorb the phases of column i, rows i..n_r-2.
        for l in i..(n_r - 1) {
            let z = w.get(l, i);
            let angle = z.im.atan2(z.re).rem_euclid(2.0 * PI);
            phi.push(angle);
            let rot = Complex64::from_polar(1.0, -angle);
            for c in i..n_c {
                let val = w.get(l, c) * rot;
                w.set(l, c, val);
            }
        }
        // Zero the subdiagonal of column i with real rotations.
        for l in (i + 1)..n_r {
            let a = w.get(i, i).re;
            let b = w.get(l, i).re;
            let hyp = (a * a + b * b).sqrt();
            let angle = if hyp < 1e-300 { 0.0 } else { b.atan2(a).clamp(0.0, FRAC_PI_2) };
            psi.push(angle);
            let (s, c_rot) = angle.sin_cos();
            for c in i..n_c {
                let top = w.get(i, c);
                let bot = w.get(l, c);
                w.set(i, c, top * c_rot + bot * s);
                w.set(l, c, bot * c_rot - top * s);
            }
        }
    }

    GivensAngles { phi, psi, n_r, n_c }
}

/// Rebuilds the steering matrix from Givens angles.
pub fn givens_reconstruct(a: &GivensAngles) -> Result<SteeringMatrix> {
    a.validate()?;
    let n_r = a.n_r;
    let n_c = a.n_c;
    let m = n_c.min(n_r - 1);
    let mut acc = ComplexMatrix::identity(n_r);

    let mut phi_it = a.phi.iter();
    let mut psi_it = a.psi.iter();
    for i in 0..m {
        for (col, &angle) in (i..(n_r - 1)).zip(&mut phi_it) {
            // Right-multiplication by D_i scales column `col`.
            let rot = Complex64::from_polar(1.0, angle);
            for r in 0..n_r {
                let val = acc.get(r, col) * rot;
                acc.set(r, col, val);
            }
        }
        for (l, &angle) in ((i + 1)..n_r).zip(&mut psi_it) {
            let (s, c_rot) = angle.sin_cos();
            // Right-multiplication by G_{l,i}^T mixes columns i and l.
            for r in 0..n_r {
                let col_i = acc.get(r, i);
                let col_l = acc.get(r, l);
                acc.set(r, i, col_i * c_rot + col_l * s);
                acc.set(r, l, col_l * c_rot - col_i * s);
            }
        }
    }

    let v = ComplexMatrix::from_fn(n_r, n_c, |r, c| acc.get(r, c));
    SteeringMatrix::new(v)
}

/// Mid-rise quantizer grids from the standard:
/// `phi_q = pi/2^(b-1) (k + 1/2)` over `[0, 2pi)` and
/// `psi_q = pi/2^(b+1) (k + 1/2)` over `[0, pi/2]`.
pub fn phi_index(phi: f64, bits: u8) -> u16 {
    let levels = 1u32 << bits;
    let step = PI / (1u64 << (bits - 1)) as f64;
    let k = (phi.rem_euclid(2.0 * PI) / step - 0.5).round() as i64;
    k.rem_euclid(levels as i64) as u16
}

pub fn phi_value(index: u16, bits: u8) -> f64 {
    let step = PI / (1u64 << (bits - 1)) as f64;
    step * (index as f64 + 0.5)
}

pub fn psi_index(psi: f64, bits: u8) -> u16 {
    let levels = (1u32 << bits) as i64;
    let step = PI / (1u64 << (bits + 1)) as f64;
    let k = (psi.clamp(0.0, FRAC_PI_2) / step - 0.5).round() as i64;
    k.clamp(0, levels - 1) as u16
}

pub fn psi_value(index: u16, bits: u8) -> f64 {
    let step = PI / (1u64 << (bits + 1)) as f64;
    step * (index as f64 + 0.5)
}

/// Snaps every angle to its quantizer grid.
pub fn quantize_angles(a: &GivensAngles, bits_phi: u8, bits_psi: u8) -> GivensAngles {
    GivensAngles {
        phi: a.phi.iter().map(|&x| phi_value(phi_index(x, bits_phi), bits_phi)).collect(),
        psi: a.psi.iter().map(|&x| psi_value(psi_index(x, bits_psi), bits_psi)).collect(),
        n_r: a.n_r,
        n_c: a.n_c,
    }
}

/// Quantizer grid indices for every angle, in storage order.
pub fn angle_indices(a: &GivensAngles, bits_phi: u8, bits_psi: u8) -> (Vec<u16>, Vec<u16>) {
    (
        a.phi.iter().map(|&x| phi_index(x, bits_phi)).collect(),
        a.psi.iter().map(|&x| psi_index(x, bits_psi)).collect(),
    )
}

/// Rebuilds angles from quantizer grid indices.
pub fn angles_from_indices(
    phi_idx: &[u16],
    psi_idx: &[u16],
    bits_phi: u8,
    bits_psi: u8,
    n_r: usize,
    n_c: usize,
) -> Result<GivensAngles> {
    let angles = GivensAngles {
        phi: phi_idx.iter().map(|&k| phi_value(k, bits_phi)).collect(),
        psi: psi_idx.iter().map(|&k| psi_value(k, bits_psi)).collect(),
        n_r,
        n_c,
    };
    angles.validate()?;
    Ok(angles)
}

/// Frobenius error between two steering matrices after removing the best
/// per-column phase, i.e. the residual a Givens round-trip cannot cancel.
pub fn column_phase_aligned_error(a: &SteeringMatrix, b: &SteeringMatrix) -> f64 {
    let (n_r, n_c) = (a.n_r(), a.n_c());
    assert_eq!((n_r, n_c), (b.n_r(), b.n_c()), "shape mismatch");
    let mut acc = 0.0;
    for c in 0..n_c {
        let mut dot = Complex64::new(0.0, 0.0);
        for r in 0..n_r {
            dot += a.matrix().get(r, c).conj() * b.matrix().get(r, c);
        }
        let phase = if dot.norm() > 0.0 {
            dot / dot.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for r in 0..n_r {
            acc += (a.matrix().get(r, c) * phase - b.matrix().get(r, c)).norm_sqr();
        }
    }
    acc.sqrt()
}
