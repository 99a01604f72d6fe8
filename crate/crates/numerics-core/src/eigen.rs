use crate::{DenseMatrix, NumericsError, Result};

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub basis: DenseMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty decomposition")
    }

    /// Coordinates `Vᵀ x`.
    pub fn to_eigenbasis(&self, x: &[f64]) -> Vec<f64> {
        self.basis.t_matvec(x)
    }

    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim();
        let mut scaled = self.basis.clone();
        for r in 0..n {
            for (c, v) in scaled.row_mut(r).iter_mut().enumerate() {
                *v *= self.eigenvalues[c];
            }
        }
        let mut out = scaled.matmul_t(&self.basis).expect("square shapes");
        out.symmetrize_from_upper();
        out
    }
}

fn sweep_cap(n: usize) -> usize {
    100 * n.max(1)
}

/// Full symmetric eigendecomposition: Householder tridiagonalisation followed by
/// implicit-shift QL with accumulated rotations.
pub fn sym_eigendecompose(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    a.check_symmetric()?;
    let n = a.rows();
    if n == 0 {
        return Err(NumericsError::Dimension("empty matrix".into()));
    }
    // work on Vᵀ (row k = column k of V) so the rotation loops stay contiguous
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    let mut vt: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    tql2(&mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let mut basis = DenseMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        for r in 0..n {
            basis[(r, c)] = vt[k][r];
        }
    }
    Ok(SpectralDecomposition { eigenvalues, basis })
}

/// Eigenvalues only, sorted descending.
pub fn eigenvalues_sym(a: &DenseMatrix) -> Result<Vec<f64>> {
    a.check_symmetric()?;
    let n = a.rows();
    if n == 0 {
        return Err(NumericsError::Dimension("empty matrix".into()));
    }
    let (mut d, mut e) = householder_tridiagonal(a);
    tql1(&mut d, &mut e)?;
    d.sort_by(|x, y| y.total_cmp(x));
    Ok(d)
}

/// `(λ_max, λ_min)` of a symmetric matrix.
pub fn spectral_extremes(a: &DenseMatrix) -> Result<(f64, f64)> {
    let ev = eigenvalues_sym(a)?;
    Ok((ev[0], ev[ev.len() - 1]))
}

// Reduction to tridiagonal form returning (diagonal, subdiagonal) with
// e[k] coupling k and k+1. Row-major friendly: only whole rows are touched.
fn householder_tridiagonal(a: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut w = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let x = &w[k * n + lo..(k + 1) * n];
        let scale: f64 = x.iter().map(|t| t.abs()).sum();
        d[k] = w[k * n + k];
        if scale == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let mut sigma = 0.0;
        for (vi, &xi) in v[lo..].iter_mut().zip(x) {
            *vi = xi / scale;
            sigma += *vi * *vi;
        }
        let norm = sigma.sqrt();
        let alpha = if v[lo] > 0.0 { -norm } else { norm };
        e[k] = alpha * scale;
        v[lo] -= alpha;
        let vnorm2 = sigma - 2.0 * alpha * (v[lo] + alpha) + alpha * alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        let vs = &v[lo..];
        let mut pv = 0.0;
        for i in lo..n {
            let row = &w[i * n + lo..(i + 1) * n];
            let s: f64 = row.iter().zip(vs).map(|(a, b)| a * b).sum();
            p[i] = tau * s;
            pv += p[i] * v[i];
        }
        let kk = 0.5 * tau * pv;
        for i in lo..n {
            p[i] -= kk * v[i];
        }
        for i in lo..n {
            let (vi, pi) = (v[i], p[i]);
            let row = &mut w[i * n + lo..(i + 1) * n];
            for ((a, &vj), &pj) in row.iter_mut().zip(&v[lo..]).zip(&p[lo..]) {
                *a -= vi * pj + pi * vj;
            }
        }
    }
    if n >= 2 {
        d[n - 2] = w[(n - 2) * n + n - 2];
        e[n - 2] = w[(n - 1) * n + n - 2];
    }
    d[n - 1] = w[n * n - 1];
    e[n - 1] = 0.0;
    (d, e)
}

// Implicit QL on a tridiagonal matrix, eigenvalues only.
fn tql1(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    ql_iterate(d, e, |_, _, _| {})
}

fn ql_iterate(
    d: &mut [f64],
    e: &mut [f64],
    mut rotate: impl FnMut(usize, f64, f64),
) -> Result<()> {
    let n = d.len();
    let cap = sweep_cap(n);
    let mut total = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= f64::EPSILON * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                total += 1;
                if total > cap {
                    return Err(NumericsError::Convergence { iterations: total });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate(i, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= f64::EPSILON * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

// Accumulating variant; `vt` holds eigenvector k in row k.
fn tql2(vt: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    ql_iterate(d, e, |i, c, s| {
        let (lo, hi) = vt.split_at_mut(i + 1);
        let (ri, ri1) = (&mut lo[i], &mut hi[0]);
        for (a, b) in ri.iter_mut().zip(ri1.iter_mut()) {
            let h = *b;
            *b = s * *a + c * h;
            *a = c * *a - s * h;
        }
    })
}

// Householder reduction with accumulated transform; `v` ends up holding the
// orthogonal matrix, `d` the diagonal and `e[1..]` the subdiagonal.
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{sample_gaussian_matrix, RngStream};

    fn random_sym(n: usize, seed: u64) -> DenseMatrix {
        let g = sample_gaussian_matrix(n, n, &mut RngStream::new(seed)).unwrap();
        let mut a = g.clone();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = 0.5 * (g[(i, j)] + g[(j, i)]);
            }
        }
        a.symmetrize_from_upper();
        a
    }

    fn rel_frob(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn identity_three() {
        let sd = sym_eigendecompose(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(sd.eigenvalues, vec![1.0, 1.0, 1.0]);
        let vtv = sd.basis.gram();
        assert!(rel_frob(&vtv, &DenseMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn diagonal_three_one() {
        let sd = sym_eigendecompose(&DenseMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(sd.eigenvalues, vec![3.0, 1.0]);
        // signed permutation of the identity
        for c in 0..2 {
            let col = sd.basis.column(c);
            let ones = col.iter().filter(|v| (v.abs() - 1.0).abs() < 1e-15).count();
            let zeros = col.iter().filter(|v| v.abs() < 1e-15).count();
            assert_eq!((ones, zeros), (1, 1));
        }
        assert_eq!(sd.basis[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        let mut rng = RngStream::new(11);
        for _ in 0..200 {
            let (p, q, r) = (rng.normal() * 3.0, rng.normal(), rng.normal() * 0.1);
            let a = DenseMatrix::from_rows(&[vec![p, q], vec![q, r]]).unwrap();
            // roots of t² - (p+r)t + (pr - q²)
            let mean = 0.5 * (p + r);
            let disc = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            let sd = sym_eigendecompose(&a).unwrap();
            assert!((sd.eigenvalues[0] - (mean + disc)).abs() <= 1e-10 * (1.0 + disc));
            assert!((sd.eigenvalues[1] - (mean - disc)).abs() <= 1e-10 * (1.0 + disc));
            let ev = eigenvalues_sym(&a).unwrap();
            assert!((ev[0] - sd.eigenvalues[0]).abs() <= 1e-12 * (1.0 + disc));
            assert!((ev[1] - sd.eigenvalues[1]).abs() <= 1e-12 * (1.0 + disc));
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (17, 4), (60, 5)] {
            let a = random_sym(n, seed);
            let sd = sym_eigendecompose(&a).unwrap();
            assert!(rel_frob(&sd.reconstruct(), &a) < 1e-8, "n={n}");
            let vtv = sd.basis.gram();
            assert!(vtv.sub(&DenseMatrix::identity(n)).unwrap().max_abs() < 1e-10);
            assert!(sd.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let scale = sd.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                let vi = sd.basis.column(i);
                let av = a.matvec(&vi);
                for (x, y) in av.iter().zip(&vi) {
                    assert!((x - sd.eigenvalues[i] * y).abs() <= 1e-8 * scale);
                }
            }
        }
    }

    #[test]
    fn both_routes_agree() {
        let a = random_sym(80, 9);
        let full = sym_eigendecompose(&a).unwrap().eigenvalues;
        let only = eigenvalues_sym(&a).unwrap();
        for (x, y) in full.iter().zip(&only) {
            assert!((x - y).abs() < 1e-10);
        }
        let (hi, lo) = spectral_extremes(&a).unwrap();
        assert!((hi - full[0]).abs() < 1e-8 && (lo - full[79]).abs() < 1e-8);
    }

    #[test]
    fn extremes_on_simple_inputs() {
        let mut half = DenseMatrix::identity(4);
        half.scale(0.5);
        assert_eq!(spectral_extremes(&half).unwrap(), (0.5, 0.5));
        let diag = DenseMatrix::from_diag(&[2.8, 1.0, 0.19]);
        assert_eq!(spectral_extremes(&diag).unwrap(), (2.8, 0.19));
        let sd = sym_eigendecompose(&diag).unwrap();
        assert_eq!(sd.eigenvalues, vec![2.8, 1.0, 0.19]);
    }

    #[test]
    fn rejects_asymmetric_and_nonsquare() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-9, 1.0]]).unwrap();
        assert!(matches!(sym_eigendecompose(&a), Err(NumericsError::Dimension(_))));
        assert!(matches!(spectral_extremes(&a), Err(NumericsError::Dimension(_))));
        let b = DenseMatrix::zeros(2, 3);
        assert!(sym_eigendecompose(&b).is_err());
    }

    #[test]
    fn psd_gram_extremes() {
        let x = sample_gaussian_matrix(40, 6, &mut RngStream::new(3)).unwrap();
        let g = x.gram();
        let sd = sym_eigendecompose(&g).unwrap();
        let (hi, lo) = spectral_extremes(&g).unwrap();
        assert!((hi - sd.lambda_max()).abs() < 1e-8 * hi);
        assert!((lo - sd.lambda_min()).abs() < 1e-8 * hi);
        assert!(lo > 0.0);
    }
}
