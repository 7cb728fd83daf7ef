//! Dense Hermitian matrices, a cyclic Jacobi eigensolver and projection
//! onto the positive semidefinite cone.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

/// Relative asymmetry tolerated (and removed) at construction.
const SYMMETRY_TOL: f64 = 1e-10;

impl HermitianMatrix {
    /// Checks Hermitian symmetry, then symmetrizes away rounding noise.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        let norm = data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mut asym: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                asym = asym.max((data[i * dim + j] - data[j * dim + i].conj()).norm());
            }
        }
        if asym > SYMMETRY_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let mut m = HermitianMatrix { dim, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let data = (0..dim * dim).map(|i| f(i / dim, i % dim)).collect();
        HermitianMatrix::new(dim, data)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        HermitianMatrix { dim, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, &v) in values.iter().enumerate() {
            data[i * dim + i] = Complex64::new(v, 0.0);
        }
        HermitianMatrix { dim, data }
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = v;
                self.data[j * n + i] = v.conj();
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &HermitianMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Eigenvalues in descending order with matching eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `j` (entries `vectors[i * dim + j]`) is the eigenvector of
    /// `values[j]`.
    pub vectors: Vec<Complex64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U diag(f(lambda)) U^H`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let u = &self.vectors;
        let lam: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    if lam[k] != 0.0 {
                        s += u[i * n + k] * lam[k] * u[j * n + k].conj();
                    }
                }
                data[i * n + j] = s;
                data[j * n + i] = s.conj();
            }
            data[i * n + i].im = 0.0;
        }
        HermitianMatrix { dim: n, data }
    }
}

/// Cyclic Jacobi eigendecomposition with a threshold sweep.
///
/// Stops once the off-diagonal Frobenius norm falls below
/// `1e-14 * ||A||_F`.
pub fn hermitian_eig(a: &HermitianMatrix) -> Eigen {
    let n = a.dim;
    let mut m = a.data.clone();
    let mut v = HermitianMatrix::identity(n).data;
    let norm = a.frobenius_norm();
    let stop = 1e-14 * norm;

    let off = |m: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    for sweep in 0..100 {
        let off_norm = off(&m);
        if off_norm <= stop {
            break;
        }
        // Early sweeps skip small entries; later sweeps rotate everything.
        let threshold = if sweep < 3 {
            0.2 * off_norm / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                let r = apq.norm();
                if r <= threshold || r == 0.0 {
                    continue;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                let e = apq / r;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = D R with D = diag(.., conj(e) at q, ..) and R the real
                // rotation [[c, s], [-s, c]] in the (p, q) plane.
                let jpp = Complex64::new(c, 0.0);
                let jqp = -s * e.conj();
                let jpq = Complex64::new(s, 0.0);
                let jqq = c * e.conj();
                // M <- M J (columns p and q).
                for i in 0..n {
                    let mp = m[i * n + p];
                    let mq = m[i * n + q];
                    m[i * n + p] = mp * jpp + mq * jqp;
                    m[i * n + q] = mp * jpq + mq * jqq;
                    let vp = v[i * n + p];
                    let vq = v[i * n + q];
                    v[i * n + p] = vp * jpp + vq * jqp;
                    v[i * n + q] = vp * jpq + vq * jqq;
                }
                // M <- J^H M (rows p and q).
                for j in 0..n {
                    let mp = m[p * n + j];
                    let mq = m[q * n + j];
                    m[p * n + j] = jpp.conj() * mp + jqp.conj() * mq;
                    m[q * n + j] = jpq.conj() * mp + jqq.conj() * mq;
                }
                m[p * n + q] = Complex64::new(0.0, 0.0);
                m[q * n + p] = Complex64::new(0.0, 0.0);
                m[p * n + p].im = 0.0;
                m[q * n + q].im = 0.0;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].re.total_cmp(&m[i * n + i].re));
    let values = order.iter().map(|&i| m[i * n + i].re).collect();
    let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
    for (col, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + col] = v[i * n + src];
        }
    }
    Eigen { values, vectors }
}

/// Nearest positive semidefinite matrix in Frobenius norm.
pub fn project_psd(a: &HermitianMatrix) -> HermitianMatrix {
    hermitian_eig(a).reconstruct(|l| l.max(0.0))
}

/// Same projection computed with the `faer` eigensolver.
pub fn project_psd_faer(a: &HermitianMatrix) -> HermitianMatrix {
    let n = a.dim;
    let mat = faer::Mat::<Complex64>::from_fn(n, n, |i, j| a.data[i * n + j]);
    let p = super::admm::psd_part(mat.as_ref());
    let data = (0..n * n).map(|k| p[(k / n, k % n)]).collect();
    let mut out = HermitianMatrix { dim: n, data };
    out.symmetrize();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(dim: usize, seed: u64) -> HermitianMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(next(), 0.0);
            for j in i + 1..dim {
                let v = c(next(), next());
                data[i * dim + j] = v;
                data[j * dim + i] = v.conj();
            }
        }
        HermitianMatrix::new(dim, data).unwrap()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&HermitianMatrix::identity(3));
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenpairs() {
        let e = hermitian_eig(&HermitianMatrix::diagonal(&[-1.0, 2.0]));
        assert_eq!(e.values, vec![2.0, -1.0]);
        assert_eq!(e.vectors[1 * 2 + 0].norm(), 1.0);
        assert_eq!(e.vectors[0 * 2 + 1].norm(), 1.0);
    }

    #[test]
    fn random_reconstruction() {
        for seed in 0..5 {
            let a = pseudo_random(10, seed);
            let e = hermitian_eig(&a);
            let r = e.reconstruct(|l| l);
            assert!(r.distance(&a) <= 1e-10 * a.frobenius_norm());
            let n = 10;
            let mut err = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut s = c(0.0, 0.0);
                    for k in 0..n {
                        s += e.vectors[k * n + i].conj() * e.vectors[k * n + j];
                    }
                    let d = if i == j { 1.0 } else { 0.0 };
                    err += (s - d).norm_sqr();
                }
            }
            assert!(err.sqrt() <= 1e-10 * (n as f64).sqrt());
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let data = vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            HermitianMatrix::new(2, data),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn psd_projection_examples() {
        let p = project_psd(&HermitianMatrix::diagonal(&[1.0, -1.0]));
        assert!(p.distance(&HermitianMatrix::diagonal(&[1.0, 0.0])) < 1e-15);
        let a = pseudo_random(6, 3);
        let b = project_psd(&a);
        let bb = project_psd(&b);
        assert!(bb.distance(&b) <= 1e-12 * b.frobenius_norm().max(1.0));
    }

    #[test]
    fn jacobi_and_faer_projections_agree() {
        for seed in 10..14 {
            let a = pseudo_random(12, seed);
            let p1 = project_psd(&a);
            let p2 = project_psd_faer(&a);
            assert!(p1.distance(&p2) <= 1e-11 * a.frobenius_norm());
        }
    }
}
