//! Small dense complex linear algebra used by the estimators.
//!
//! Everything here targets matrices of a few dozen rows at most, so the
//! implementations favor verifiable accuracy over asymptotics: cyclic
//! Jacobi for Hermitian eigendecomposition, Givens-based Hessenberg
//! reduction plus shifted QR for general eigenvalues, and Gaussian
//! elimination with partial pivoting for solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending with matching eigenvector columns.
///
/// The input is assumed Hermitian; only its lower/upper averages drive the
/// rotations because each update keeps the iterate exactly Hermitian.
pub fn hermitian_eigen(a: &DMatrix<C>) -> (Vec<f64>, DMatrix<C>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    if n == 1 {
        return (vec![a[(0, 0)].re], DMatrix::identity(1, 1));
    }

    let mut h = a.clone();
    let mut v = DMatrix::<C>::identity(n, n);
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += h[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = h[(p, q)];
                let r = beta.norm();
                if r <= 1e-300 {
                    continue;
                }
                let alpha = h[(p, p)].re;
                let gamma = h[(q, q)].re;
                let phase = beta / r; // e^{i phi}
                let tau = (alpha - gamma) / (2.0 * r);
                let t = if tau >= 0.0 {
                    tau - (tau * tau + 1.0).sqrt()
                } else {
                    tau + (tau * tau + 1.0).sqrt()
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sigma = t * c;
                // G[p,p] = c, G[p,q] = sigma e^{i phi}, G[q,p] = -sigma
                // e^{-i phi}, G[q,q] = c; H <- G^H H G zeroes H[p,q].
                let s = sigma * phase.conj();

                // Right-multiply columns p, q by G.
                for j in 0..n {
                    let hjp = h[(j, p)];
                    let hjq = h[(j, q)];
                    h[(j, p)] = hjp * c - hjq * s;
                    h[(j, q)] = hjp * s.conj() + hjq * c;
                }
                // Left-multiply rows p, q by G^H.
                for j in 0..n {
                    let hpj = h[(p, j)];
                    let hqj = h[(q, j)];
                    h[(p, j)] = hpj * c - hqj * s.conj();
                    h[(q, j)] = hpj * s + hqj * c;
                }
                // Scrub rounding: the pivot pair is exactly zero and the
                // diagonal stays real.
                h[(p, q)] = C::new(0.0, 0.0);
                h[(q, p)] = C::new(0.0, 0.0);
                h[(p, p)] = C::new(h[(p, p)].re, 0.0);
                h[(q, q)] = C::new(h[(q, q)].re, 0.0);

                for j in 0..n {
                    let vjp = v[(j, p)];
                    let vjq = v[(j, q)];
                    v[(j, p)] = vjp * c - vjq * s;
                    v[(j, q)] = vjp * s.conj() + vjq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        h[(i, i)]
            .re
            .partial_cmp(&h[(j, j)].re)
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| h[(i, i)].re).collect();
    let mut vectors = DMatrix::<C>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    (values, vectors)
}

/// Complex Givens pair (c real, s complex) zeroing `b` against `a`:
/// [c s; -conj(s) c] * [a; b] = [r; 0].
fn givens(a: C, b: C) -> (f64, C) {
    let na = a.norm();
    let nb = b.norm();
    if nb <= 1e-300 {
        return (1.0, C::new(0.0, 0.0));
    }
    if na <= 1e-300 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

/// Eigenvalues of a small dense complex matrix via Hessenberg reduction and
/// shifted QR iteration. Order is unspecified.
pub fn general_eigenvalues(a: &DMatrix<C>) -> Result<Vec<C>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::domain("eigenvalue input must be square"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }

    let mut h = a.clone();

    // Hessenberg reduction by Givens similarity transforms.
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2)..n {
            let (c, s) = givens(h[(j + 1, j)], h[(i, j)]);
            if s.norm() == 0.0 {
                continue;
            }
            rotate_rows(&mut h, j + 1, i, c, s);
            rotate_cols(&mut h, j + 1, i, c, s);
            h[(i, j)] = C::new(0.0, 0.0);
        }
    }

    let eps = 1e-15;
    let mut hi = n - 1;
    let mut iterations = 0usize;
    let max_iterations = 100 * n;

    loop {
        // Deflate converged subdiagonal entries.
        while hi > 0 {
            let sub = h[(hi, hi - 1)].norm();
            let local = h[(hi - 1, hi - 1)].norm() + h[(hi, hi)].norm();
            if sub <= eps * local.max(f64::MIN_POSITIVE) {
                h[(hi, hi - 1)] = C::new(0.0, 0.0);
                hi -= 1;
            } else {
                break;
            }
        }
        if hi == 0 {
            break;
        }

        // Start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let local = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if sub <= eps * local.max(f64::MIN_POSITIVE) {
                h[(lo, lo - 1)] = C::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }

        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::Estimation {
                message: "QR eigenvalue iteration did not converge".to_string(),
                eigenvalue: None,
            });
        }

        // Wilkinson shift: the trailing 2x2 eigenvalue closer to the corner.
        let aa = h[(hi - 1, hi - 1)];
        let bb = h[(hi - 1, hi)];
        let cc = h[(hi, hi - 1)];
        let dd = h[(hi, hi)];
        let tr_half = (aa + dd) * 0.5;
        let disc = ((aa - dd) * (aa - dd) * 0.25 + bb * cc).sqrt();
        let mu1 = tr_half + disc;
        let mu2 = tr_half - disc;
        let shift = if (mu1 - dd).norm() <= (mu2 - dd).norm() {
            mu1
        } else {
            mu2
        };

        // One implicit QR step on the active block via explicit
        // factorization: H - mu I = QR, then H <- RQ + mu I.
        for k in lo..=hi {
            h[(k, k)] -= shift;
        }
        let mut rotations: Vec<(usize, f64, C)> = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            rotate_rows(&mut h, k, k + 1, c, s);
            h[(k + 1, k)] = C::new(0.0, 0.0);
            rotations.push((k, c, s));
        }
        for &(k, c, s) in &rotations {
            rotate_cols(&mut h, k, k + 1, c, s);
        }
        for k in lo..=hi {
            h[(k, k)] += shift;
        }
    }

    Ok((0..n).map(|i| h[(i, i)]).collect())
}

fn rotate_rows(h: &mut DMatrix<C>, r1: usize, r2: usize, c: f64, s: C) {
    let n = h.ncols();
    for j in 0..n {
        let a = h[(r1, j)];
        let b = h[(r2, j)];
        h[(r1, j)] = a * c + b * s;
        h[(r2, j)] = -a * s.conj() + b * c;
    }
}

fn rotate_cols(h: &mut DMatrix<C>, c1: usize, c2: usize, c: f64, s: C) {
    let n = h.nrows();
    for i in 0..n {
        let a = h[(i, c1)];
        let b = h[(i, c2)];
        h[(i, c1)] = a * c + b * s.conj();
        h[(i, c2)] = -a * s + b * c;
    }
}

/// Solve A X = B by Gaussian elimination with partial pivoting. Returns
/// None when a pivot collapses (singular to working precision).
pub fn solve(a: &DMatrix<C>, b: &DMatrix<C>) -> Option<DMatrix<C>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    debug_assert_eq!(n, b.nrows());
    let mut lhs = a.clone();
    let mut rhs = b.clone();
    let scale = lhs.norm().max(f64::MIN_POSITIVE);

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = lhs[(col, col)].norm();
        for row in (col + 1)..n {
            let mag = lhs[(row, col)].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag <= 1e-14 * scale {
            return None;
        }
        if pivot_row != col {
            lhs.swap_rows(col, pivot_row);
            rhs.swap_rows(col, pivot_row);
        }
        let pivot = lhs[(col, col)];
        for row in (col + 1)..n {
            let factor = lhs[(row, col)] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = lhs[(col, j)];
                lhs[(row, j)] -= factor * v;
            }
            for j in 0..rhs.ncols() {
                let v = rhs[(col, j)];
                rhs[(row, j)] -= factor * v;
            }
        }
    }

    let mut x = DMatrix::<C>::zeros(n, rhs.ncols());
    for j in 0..rhs.ncols() {
        for i in (0..n).rev() {
            let mut acc = rhs[(i, j)];
            for k in (i + 1)..n {
                acc -= lhs[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lhs[(i, i)];
        }
    }
    Some(x)
}

/// Convenience wrapper for a single right-hand-side vector.
pub fn solve_vec(a: &DMatrix<C>, b: &DVector<C>) -> Option<DVector<C>> {
    let bm = DMatrix::from_columns(&[b.clone()]);
    solve(a, &bm).map(|x| x.column(0).into_owned())
}

/// Singular values of a (possibly rectangular) matrix through the Gram
/// eigenvalues, descending. Accurate for the dominant part of the spectrum,
/// which is all the callers need.
pub fn singular_values(a: &DMatrix<C>) -> Vec<f64> {
    let gram = if a.nrows() >= a.ncols() {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    let (eigs, _) = hermitian_eigen(&gram);
    let mut sv: Vec<f64> = eigs.iter().rev().map(|&l| l.max(0.0).sqrt()).collect();
    // Guard against tiny negative rounding already clamped; keep sorted.
    sv.sort_by(|x, y| y.partial_cmp(x).expect("singular values are finite"));
    sv
}
