//! Complex small-matrix linear algebra: SVD, Gram-Schmidt orthonormalization,
//! inner products and norms. Everything here is sized for per-subcarrier MIMO
//! matrices (a handful of rows and columns), not general linear algebra.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Frobenius tolerance for `‖VᴴV − I‖` below which columns count as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Projected-column norm below which Gram-Schmidt reports rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// First `cols` columns of the `rows`-dimensional identity.
    pub fn identity_columns(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols.min(rows) {
            m.set(j, j, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self { rows, cols, entries }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::InvalidArgument(format!(
                "matmul shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::InvalidArgument("sub shape mismatch".into()));
        }
        Ok(ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j) - other.get(i, j)
        }))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖selfᴴ·self − I‖_F`, the distance of the columns from orthonormality.
    pub fn unitarity_error(&self) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.cols {
            for b in 0..self.cols {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..self.rows {
                    dot += self.get(i, a).conj() * self.get(i, b);
                }
                if a == b {
                    dot -= 1.0;
                }
                acc += dot.norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// A steering matrix: `N_r x N_c` with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix {
    matrix: ComplexMatrix,
}

impl SteeringMatrix {
    /// Wraps a matrix after checking column orthonormality and `N_r >= N_c`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() < matrix.cols() {
            return Err(Error::InvalidArgument(format!(
                "steering matrix must be tall, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let err = matrix.unitarity_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "steering matrix columns not orthonormal (error {err:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    #[inline]
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn n_c(&self) -> usize {
        self.matrix.cols()
    }
}

/// Thin SVD `H = U diag(s) Vᴴ` with `k = min(rows, cols)` columns in U and V.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdResult {
    /// Relative reconstruction error `‖H − U diag(s) Vᴴ‖_F / ‖H‖_F`.
    pub fn reconstruction_error(&self, h: &ComplexMatrix) -> f64 {
        let k = self.s.len();
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for j in 0..k {
                us.set(i, j, us.get(i, j) * self.s[j]);
            }
        }
        let recon = us.matmul(&self.v.hermitian()).expect("shape");
        let denom = h.frobenius_norm();
        if denom == 0.0 {
            return recon.frobenius_norm();
        }
        h.sub(&recon).expect("shape").frobenius_norm() / denom
    }
}

/// Thin SVD of a complex matrix.
///
/// Computed from the eigendecomposition of the small Gram matrix `HᴴH`
/// (cyclic Jacobi), which is exact enough for the matrix sizes in play and
/// keeps the crate free of a general SVD dependency. Singular vectors carry a
/// fixed phase convention: the first nonzero entry of every V column is real
/// and positive, which makes the decomposition deterministic.
pub fn svd(h: &ComplexMatrix) -> Result<SvdResult> {
    if h.rows() < h.cols() {
        // Wide case: decompose the conjugate transpose and swap factors.
        let t = svd(&h.hermitian())?;
        return Ok(SvdResult { u: t.v, s: t.s, v: t.u });
    }

    let gram = h.hermitian().matmul(h)?;
    let (mut eigvals, mut v) = jacobi_hermitian(&gram)?;

    let n = eigvals.len();
    let mut s: Vec<f64> = eigvals.drain(..).map(|l| l.max(0.0).sqrt()).collect();

    // Phase convention on V columns (U is scaled by the same factor below,
    // implicitly, since U is derived from the adjusted V).
    apply_phase_convention(&mut v);

    // U = H V diag(1/s); columns with negligible singular value are completed
    // to an orthonormal set instead of dividing by ~0.
    let hv = h.matmul(&v)?;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let tiny = s_max * 1e-13;
    let mut u = ComplexMatrix::zeros(h.rows(), n);
    let mut deferred = Vec::new();
    for (k, sv) in s.iter_mut().enumerate() {
        if *sv > tiny && *sv > 0.0 {
            for i in 0..h.rows() {
                u.set(i, k, hv.get(i, k) / *sv);
            }
        } else {
            *sv = 0.0;
            deferred.push(k);
        }
    }
    for k in deferred {
        complete_column(&mut u, k)?;
    }

    Ok(SvdResult { u, s, v })
}

/// Rotates each column so its first entry of non-negligible modulus is real
/// and positive.
fn apply_phase_convention(v: &mut ComplexMatrix) {
    for j in 0..v.cols() {
        let mut pivot = None;
        for i in 0..v.rows() {
            if v.get(i, j).norm() > 1e-12 {
                pivot = Some(v.get(i, j));
                break;
            }
        }
        if let Some(p) = pivot {
            let phase = p / p.norm();
            let factor = phase.conj();
            for i in 0..v.rows() {
                let val = v.get(i, j) * factor;
                v.set(i, j, val);
            }
        }
    }
}

/// Fills column `k` of `u` with a unit vector orthogonal to all other columns.
fn complete_column(u: &mut ComplexMatrix, k: usize) -> Result<()> {
    let rows = u.rows();
    for basis in 0..rows {
        let mut cand = vec![Complex64::new(0.0, 0.0); rows];
        cand[basis] = Complex64::new(1.0, 0.0);
        for j in 0..u.cols() {
            if j == k {
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for (i, &c) in cand.iter().enumerate() {
                dot += u.get(i, j).conj() * c;
            }
            for (i, c) in cand.iter_mut().enumerate() {
                *c -= dot * u.get(i, j);
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            for (i, &c) in cand.iter().enumerate() {
                u.set(i, k, c / norm);
            }
            return Ok(());
        }
    }
    Err(Error::Numerical(
        "could not complete orthonormal basis for null singular directions".into(),
    ))
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending and the unitary eigenvector matrix
/// with matching column order.
fn jacobi_hermitian(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("jacobi requires a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm().max(1.0);

    for _sweep in 0..40 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let b = apq.norm();
                if b <= 1e-18 * scale {
                    continue;
                }
                // Phase that makes the (p, q) entry real, then a real Jacobi
                // rotation that zeroes it.
                let phase = apq / b;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                let mut j = ComplexMatrix::identity(n);
                j.set(p, p, Complex64::new(c, 0.0));
                j.set(p, q, Complex64::new(s, 0.0));
                j.set(q, p, -phase.conj() * s);
                j.set(q, q, phase.conj() * c);

                m = j.hermitian().matmul(&m)?.matmul(&j)?;
                v = v.matmul(&j)?;
            }
        }
    }

    let mut vals: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    // Deterministic selection sort, permuting eigenvector columns alongside.
    for i in 0..n {
        let mut max_idx = i;
        for j in (i + 1)..n {
            if vals[j] > vals[max_idx] {
                max_idx = j;
            }
        }
        if max_idx != i {
            vals.swap(i, max_idx);
            for r in 0..n {
                let tmp = v.get(r, i);
                v.set(r, i, v.get(r, max_idx));
                v.set(r, max_idx, tmp);
            }
        }
    }
    Ok((vals, v))
}

/// Orthonormalizes the columns of `m` with modified Gram-Schmidt plus one
/// re-orthogonalization pass. The first output column is the first input
/// column normalized; the column span is preserved.
pub fn gram_schmidt(m: &ComplexMatrix) -> Result<SteeringMatrix> {
    if m.rows() < m.cols() {
        return Err(Error::InvalidArgument(format!(
            "gram_schmidt needs a tall matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let rows = m.rows();
    let cols = m.cols();
    let mut q = m.clone();

    for j in 0..cols {
        // Two projection passes against the already-orthonormal columns.
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = Complex64::new(0.0, 0.0);
                for r in 0..rows {
                    dot += q.get(r, i).conj() * q.get(r, j);
                }
                for r in 0..rows {
                    let v = q.get(r, j) - dot * q.get(r, i);
                    q.set(r, j, v);
                }
            }
        }
        let norm = (0..rows).map(|r| q.get(r, j).norm_sqr()).sum::<f64>().sqrt();
        if norm < RANK_TOL {
            return Err(Error::DegenerateCentroid { column: j, norm });
        }
        for r in 0..rows {
            let v = q.get(r, j) / norm;
            q.set(r, j, v);
        }
    }
    SteeringMatrix::new(q)
}

/// Complex inner product `aᴴb` (conjugating the first argument).
pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "inner product length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Ok(Complex64::new(re, im))
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        })
    }

    #[test]
    fn zero_dimension_is_invalid() {
        assert!(matches!(
            ComplexMatrix::new(0, 2, vec![]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ComplexMatrix::new(2, 0, vec![]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn nonfinite_entries_rejected() {
        let entries = vec![c(1.0, 0.0), c(f64::NAN, 0.0)];
        assert!(ComplexMatrix::new(1, 2, entries).is_err());
    }

    #[test]
    fn svd_identity() {
        let h = ComplexMatrix::identity(2);
        let r = svd(&h).unwrap();
        assert!((r.s[0] - 1.0).abs() < 1e-12);
        assert!((r.s[1] - 1.0).abs() < 1e-12);
        assert!(r.v.unitarity_error() < 1e-12, "V not unitary");
    }

    #[test]
    fn svd_diagonal() {
        let h = ComplexMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                c(if i == 0 { 3.0 } else { 2.0 }, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let r = svd(&h).unwrap();
        assert!((r.s[0] - 3.0).abs() < 1e-12);
        assert!((r.s[1] - 2.0).abs() < 1e-12);
    }

    /// Independent oracle: closed-form eigenvalues of the 2x2 Gram matrix.
    fn gram_2x2_singular_values(h: &ComplexMatrix) -> (f64, f64) {
        assert_eq!(h.cols(), 2);
        let g = h.hermitian().matmul(h).unwrap();
        let a = g.get(0, 0).re;
        let d = g.get(1, 1).re;
        let b = g.get(0, 1);
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        ((mean + disc).max(0.0).sqrt(), (mean - disc).max(0.0).sqrt())
    }

    #[test]
    fn svd_random_4x2_matches_gram_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let h = random_matrix(&mut rng, 4, 2);
            let r = svd(&h).unwrap();
            let (s0, s1) = gram_2x2_singular_values(&h);
            assert!((r.s[0] - s0).abs() < 1e-9, "sigma0 {} vs oracle {}", r.s[0], s0);
            assert!((r.s[1] - s1).abs() < 1e-9, "sigma1 {} vs oracle {}", r.s[1], s1);
            assert!(r.reconstruction_error(&h) < 1e-9);
        }
    }

    #[test]
    fn svd_reconstruction_over_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..1000 {
            let rows = rng.gen_range(1..=8);
            let cols = rng.gen_range(1..=8);
            let h = random_matrix(&mut rng, rows, cols);
            let r = svd(&h).unwrap();
            let err = r.reconstruction_error(&h);
            assert!(err <= 1e-9, "trial {trial} ({rows}x{cols}): error {err:.3e}");
            for w in r.s.windows(2) {
                assert!(w[0] >= w[1], "singular values not descending: {:?}", r.s);
            }
            assert!(r.s.iter().all(|&x| x >= 0.0));
            assert!(r.v.unitarity_error() < 1e-9);
        }
    }

    #[test]
    fn svd_phase_convention_first_nonzero_real_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let h = random_matrix(&mut rng, 6, 3);
            let r = svd(&h).unwrap();
            for j in 0..r.v.cols() {
                let first = (0..r.v.rows())
                    .map(|i| r.v.get(i, j))
                    .find(|z| z.norm() > 1e-12)
                    .unwrap();
                assert!(first.im.abs() < 1e-9, "column {j} pivot has phase: {first}");
                assert!(first.re > 0.0);
            }
        }
    }

    #[test]
    fn svd_rank_one_dominant_direction() {
        // H = u sigma v^H with a single nonzero singular value.
        let u = [c(0.6, 0.0), c(0.0, 0.8)];
        let vrow = [c(0.36, 0.48), c(0.8, 0.0)];
        let h = ComplexMatrix::from_fn(2, 2, |i, j| u[i] * 5.0 * vrow[j].conj());
        let r = svd(&h).unwrap();
        assert!((r.s[0] - 5.0).abs() < 1e-9);
        assert!(r.s[1].abs() < 1e-9);
        // H v1 has norm sigma1.
        let v1 = ComplexMatrix::new(2, 1, r.v.column(0)).unwrap();
        let hv = h.matmul(&v1).unwrap();
        assert!((hv.frobenius_norm() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn gram_schmidt_fixed_point_on_orthonormal_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_matrix(&mut rng, 8, 2);
        let q = gram_schmidt(&h).unwrap();
        let q2 = gram_schmidt(q.matrix()).unwrap();
        let diff = q.matrix().sub(q2.matrix()).unwrap().frobenius_norm();
        assert!(diff <= 1e-12, "not idempotent: {diff:.3e}");
    }

    #[test]
    fn gram_schmidt_hand_case() {
        // Columns [1,1]^T and [1,0]^T.
        let m = ComplexMatrix::new(
            2,
            2,
            vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let q = gram_schmidt(&m).unwrap();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert!((q.matrix().get(0, 0) - c(inv_sqrt2, 0.0)).norm() < 1e-12);
        assert!((q.matrix().get(1, 0) - c(inv_sqrt2, 0.0)).norm() < 1e-12);
        assert!((q.matrix().get(0, 1) - c(inv_sqrt2, 0.0)).norm() < 1e-12);
        assert!((q.matrix().get(1, 1) - c(-inv_sqrt2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gram_schmidt_first_column_is_normalized_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 5, 3);
        let q = gram_schmidt(&m).unwrap();
        let col0 = m.column(0);
        let norm = norm_sqr(&col0).sqrt();
        for (i, &c0) in col0.iter().enumerate() {
            assert!((q.matrix().get(i, 0) - c0 / norm).norm() < 1e-12);
        }
    }

    #[test]
    fn gram_schmidt_rank_deficient_reports_column() {
        let m = ComplexMatrix::new(
            3,
            2,
            vec![
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(1.0, 0.0),
                c(2.0, 0.0),
            ],
        )
        .unwrap();
        match gram_schmidt(&m) {
            Err(Error::DegenerateCentroid { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected degenerate centroid, got {other:?}"),
        }
    }

    #[test]
    fn gram_schmidt_output_orthonormal_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = random_matrix(&mut rng, 8, 2);
            let q = gram_schmidt(&m).unwrap();
            assert!(q.matrix().unitarity_error() <= 1e-9);
        }
    }

    #[test]
    fn inner_product_basics() {
        let unit = vec![c(1.0, 0.0)];
        assert_eq!(inner_product(&unit, &unit).unwrap(), c(1.0, 0.0));

        let a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let b = vec![c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, 0.0));

        // a = [1, j], b = [j, 1]: conj(1)*j + conj(j)*1 = j - j = 0.
        let a = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let b = vec![c(0.0, 1.0), c(1.0, 0.0)];
        let ip = inner_product(&a, &b).unwrap();
        assert!(ip.norm() < 1e-15, "expected 0, got {ip}");
    }

    #[test]
    fn inner_product_length_mismatch() {
        let a = vec![c(1.0, 0.0)];
        let b = vec![c(1.0, 0.0), c(0.0, 0.0)];
        assert!(inner_product(&a, &b).is_err());
    }

    #[test]
    fn inner_product_self_is_norm_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let a: Vec<Complex64> = (0..16)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let ip = inner_product(&a, &a).unwrap();
            assert!(ip.im.abs() <= 1e-12);
            assert!(ip.re >= 0.0);
            assert!((ip.re - norm_sqr(&a)).abs() <= 1e-12);
        }
    }
}
