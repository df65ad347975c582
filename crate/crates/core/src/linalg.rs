//! Small dense complex linear algebra: cyclic Jacobi for Hermitian matrices
//! and one-sided (Hestenes) Jacobi for singular values.
//!
//! Sizes here are at most a few dozen rows, so plain cyclic sweeps are used.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

const MAX_SWEEPS: usize = 60;

/// Rotation parameters `(c, s, phase)` that annihilate the off-diagonal entry
/// of the Hermitian 2x2 block `[[app, apq], [conj(apq), aqq]]`.
fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> Option<(f64, f64, Complex64)> {
    let g = apq.norm();
    if g == 0.0 {
        return None;
    }
    let phase = apq / g;
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    Some((c, t * c, phase))
}

/// Applies `M <- M J` on columns `p, q`, where
/// `J = [[c, s], [-s conj(phase), c conj(phase)]]`.
fn rotate_columns(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let ph = phase.conj();
    for r in 0..m.nrows() {
        let mp = m[(r, p)];
        let mq = m[(r, q)];
        m[(r, p)] = mp * c - mq * s * ph;
        m[(r, q)] = mp * s + mq * c * ph;
    }
}

/// `M <- J^H M` on rows `p, q`.
fn rotate_rows(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    for col in 0..m.ncols() {
        let mp = m[(p, col)];
        let mq = m[(q, col)];
        m[(p, col)] = mp * c - mq * s * phase;
        m[(q, col)] = mp * s + mq * c * phase;
    }
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Returns eigenvalues sorted descending and the matching unit eigenvectors as
/// columns. Only the Hermitian part of the input is used.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitian_eigen: matrix must be square");
    let mut m = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v = CMatrix::identity(n, n);

    let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                if let Some((c, s, phase)) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, apq) {
                    rotate_columns(&mut m, p, q, c, s, phase);
                    rotate_rows(&mut m, p, q, c, s, phase);
                    m[(p, q)] = Complex64::new(0.0, 0.0);
                    m[(q, p)] = Complex64::new(0.0, 0.0);
                    rotate_columns(&mut v, p, q, c, s, phase);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Singular values of `a`, sorted descending, `min(rows, cols)` of them.
///
/// One-sided Jacobi: columns of `a` (or of `a^H` when that has fewer columns)
/// are orthogonalised pairwise; the singular values are the final column
/// norms.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut m = if a.ncols() <= a.nrows() {
        a.clone()
    } else {
        a.adjoint()
    };
    let k = m.ncols();
    if k == 0 || m.nrows() == 0 {
        return Vec::new();
    }

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha: f64 = m.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = m.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = m
                    .column(p)
                    .iter()
                    .zip(m.column(q).iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                if let Some((c, s, phase)) = jacobi_rotation(alpha, beta, gamma) {
                    rotate_columns(&mut m, p, q, c, s, phase);
                    rotated = true;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..k)
        .map(|j| m.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian positive semidefinite square root via the eigen-decomposition.
/// Negative eigenvalues from rounding are clamped to zero.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let n = a.nrows();
    let d = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(values[r].max(0.0).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &vectors * d * vectors.adjoint()
}

/// Completes the unit vector `u` to an orthonormal basis (columns), with `u`
/// as the first column.
pub fn orthonormal_completion(u: &[Complex64]) -> CMatrix {
    let n = u.len();
    let mut basis: Vec<Vec<Complex64>> = vec![u.to_vec()];
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut cand = vec![Complex64::new(0.0, 0.0); n];
        cand[e] = Complex64::new(1.0, 0.0);
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let proj: Complex64 = b.iter().zip(&cand).map(|(x, y)| x.conj() * y).sum();
                for (c, x) in cand.iter_mut().zip(b) {
                    *c -= proj * x;
                }
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(cand.into_iter().map(|z| z / norm).collect());
        }
    }
    CMatrix::from_fn(n, n, |r, c| basis[c][r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (16, 4), (33, 5)] {
            let b = random(n, n, seed);
            let a = &b * b.adjoint();
            let (vals, vecs) = hermitian_eigen(&a);
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            let d = CMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    Complex64::new(vals[r], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let recon = &vecs * d * vecs.adjoint();
            let err = frobenius_sq(&(recon - &a)).sqrt();
            assert!(err <= 1e-11 * frobenius_sq(&a).sqrt(), "n={n} err={err}");
            let unit = vecs.adjoint() * &vecs - CMatrix::identity(n, n);
            assert!(frobenius_sq(&unit).sqrt() < 1e-12);
        }
    }

    #[test]
    fn singular_values_agree_with_nalgebra_svd() {
        for (r, c, seed) in [(3, 5, 10), (5, 3, 11), (64, 16, 12), (16, 64, 13), (1, 7, 14)] {
            let a = random(r, c, seed);
            let ours = singular_values(&a);
            let theirs = a.clone().svd(false, false).singular_values;
            let mut theirs: Vec<f64> = theirs.iter().copied().collect();
            theirs.sort_by(|x, y| y.total_cmp(x));
            assert_eq!(ours.len(), r.min(c));
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() <= 1e-11 * theirs[0], "{x} vs {y}");
            }
        }
    }

    #[test]
    fn completion_is_unitary() {
        let mut u: Vec<Complex64> = random(4, 1, 99).iter().copied().collect();
        let n = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        u.iter_mut().for_each(|z| *z /= n);
        let q = orthonormal_completion(&u);
        let unit = q.adjoint() * &q - CMatrix::identity(4, 4);
        assert!(frobenius_sq(&unit).sqrt() < 1e-12);
        for (a, b) in q.column(0).iter().zip(&u) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let b = random(6, 6, 21);
        let a = &b * b.adjoint();
        let s = psd_sqrt(&a);
        let err = frobenius_sq(&(&s * &s - &a)).sqrt();
        assert!(err < 1e-10 * frobenius_sq(&a).sqrt());
    }
}
