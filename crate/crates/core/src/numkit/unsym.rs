//! Eigenvalues of general real matrices: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR iteration.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Complex, DMatrix};

use super::ensure_square;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 60;

/// Row-major scratch copy; the QR sweep indexes rows and columns freely.
struct Dense {
    n: usize,
    v: Vec<f64>,
}

impl Dense {
    fn from(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = m[(i, j)];
            }
        }
        Dense { n, v }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.n + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.v[i * self.n + j]
    }
}

fn hessenberg(a: &mut Dense) {
    let n = a.n;
    if n < 3 {
        return;
    }
    let mut w = vec![0.0; n];
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| a.at(i, k).powi(2)).sum::<f64>();
        let norm = libm::sqrt(norm);
        if norm == 0.0 {
            continue;
        }
        let x0 = a.at(k + 1, k);
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i > k { a.at(i, k) } else { 0.0 };
        }
        w[k + 1] -= alpha;
        let wnorm2 = w[k + 1..].iter().map(|v| v * v).sum::<f64>();
        if wnorm2 == 0.0 {
            continue;
        }
        // A ← (I - 2wwᵀ/wᵀw) A (I - 2wwᵀ/wᵀw)
        for j in 0..n {
            let dot = (k + 1..n).map(|i| w[i] * a.at(i, j)).sum::<f64>();
            let f = 2.0 * dot / wnorm2;
            for i in k + 1..n {
                *a.at_mut(i, j) -= f * w[i];
            }
        }
        for i in 0..n {
            let dot = (k + 1..n).map(|j| a.at(i, j) * w[j]).sum::<f64>();
            let f = 2.0 * dot / wnorm2;
            for j in k + 1..n {
                *a.at_mut(i, j) -= f * w[j];
            }
        }
        for i in k + 2..n {
            *a.at_mut(i, k) = 0.0;
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix.
fn hqr(a: &mut Dense) -> Result<Vec<Complex<f64>>> {
    let n = a.n as isize;
    let mut roots = vec![Complex::new(0.0, 0.0); a.n];
    let idx = |i: isize| i as usize;

    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a.at(idx(i), idx(j)).abs();
        }
    }

    let mut nn = n - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = a.at(idx(l - 1), idx(l - 1)).abs() + a.at(idx(l), idx(l)).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a.at(idx(l), idx(l - 1)).abs() <= f64::EPSILON * s {
                    *a.at_mut(idx(l), idx(l - 1)) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a.at(idx(nn), idx(nn));
            if l == nn {
                roots[idx(nn)] = Complex::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a.at(idx(nn - 1), idx(nn - 1));
            let mut w = a.at(idx(nn), idx(nn - 1)) * a.at(idx(nn - 1), idx(nn));
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = libm::sqrt(q.abs());
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    let hi = x + z;
                    let lo = if z != 0.0 { x - w / z } else { hi };
                    roots[idx(nn - 1)] = Complex::new(hi, 0.0);
                    roots[idx(nn)] = Complex::new(lo, 0.0);
                } else {
                    roots[idx(nn)] = Complex::new(x + p, -z);
                    roots[idx(nn - 1)] = Complex::new(x + p, z);
                }
                nn -= 2;
                break;
            }

            if its == MAX_ITERATIONS {
                return Err(Error::NoConvergence("Hessenberg QR iteration"));
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn {
                    *a.at_mut(idx(i), idx(i)) -= x;
                }
                let s = a.at(idx(nn), idx(nn - 1)).abs() + a.at(idx(nn - 1), idx(nn - 2)).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            let (mut p, mut q, mut r, mut z);
            let mut m = nn - 2;
            loop {
                z = a.at(idx(m), idx(m));
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a.at(idx(m + 1), idx(m)) + a.at(idx(m), idx(m + 1));
                q = a.at(idx(m + 1), idx(m + 1)) - z - r - s0;
                r = a.at(idx(m + 2), idx(m + 1));
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a.at(idx(m), idx(m - 1)).abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a.at(idx(m - 1), idx(m - 1)).abs() + z.abs() + a.at(idx(m + 1), idx(m + 1)).abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nn - 1 {
                *a.at_mut(idx(i + 2), idx(i)) = 0.0;
                if i != m {
                    *a.at_mut(idx(i + 2), idx(i - 1)) = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a.at(idx(k), idx(k - 1));
                    q = a.at(idx(k + 1), idx(k - 1));
                    r = if k + 1 != nn { a.at(idx(k + 2), idx(k - 1)) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign(libm::sqrt(p * p + q * q + r * r), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            let v = a.at(idx(k), idx(k - 1));
                            *a.at_mut(idx(k), idx(k - 1)) = -v;
                        }
                    } else {
                        *a.at_mut(idx(k), idx(k - 1)) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a.at(idx(k), idx(j)) + q * a.at(idx(k + 1), idx(j));
                        if k + 1 != nn {
                            pp += r * a.at(idx(k + 2), idx(j));
                            *a.at_mut(idx(k + 2), idx(j)) -= pp * z;
                        }
                        *a.at_mut(idx(k + 1), idx(j)) -= pp * y;
                        *a.at_mut(idx(k), idx(j)) -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a.at(idx(i), idx(k)) + y * a.at(idx(i), idx(k + 1));
                        if k + 1 != nn {
                            pp += z * a.at(idx(i), idx(k + 2));
                            *a.at_mut(idx(i), idx(k + 2)) -= pp * r;
                        }
                        *a.at_mut(idx(i), idx(k + 1)) -= pp * q;
                        *a.at_mut(idx(i), idx(k)) -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(roots)
}

/// All eigenvalues of a real square matrix, sorted by descending real part
/// (ties by descending imaginary part).
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    ensure_square(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("eigenvalues: non-finite entry".into()));
    }
    let mut a = Dense::from(m);
    hessenberg(&mut a);
    let mut roots = hqr(&mut a)?;
    roots.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(core::cmp::Ordering::Equal))
    });
    Ok(roots)
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let roots = eigenvalues(m)?;
    Ok(roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    let roots = eigenvalues(m)?;
    Ok(roots.iter().map(|z| libm::hypot(z.re, z.im)).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_triangular() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 5.0, -1.0, 0.0, -3.0, 4.0, 0.0, 0.0, 0.5]);
        let ev = eigenvalues(&m).unwrap();
        let re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        assert!((re[0] - 2.0).abs() < 1e-12 && (re[1] - 0.5).abs() < 1e-12 && (re[2] + 3.0).abs() < 1e-12);
        assert!(ev.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let ev = eigenvalues(&m).unwrap();
        assert!((ev[0].im - 2.0).abs() < 1e-12 && ev[0].re.abs() < 1e-12);
        assert!((ev[1].im + 2.0).abs() < 1e-12);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[10.0, -35.0, 50.0, -24.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        let ev = eigenvalues(&m).unwrap();
        for (z, want) in ev.iter().zip([4.0, 3.0, 2.0, 1.0]) {
            assert!((z.re - want).abs() < 1e-9, "{z} vs {want}");
        }
    }

    #[test]
    fn agrees_with_schur_on_dense_matrix() {
        let data: Vec<f64> = (0..36).map(|k| libm::sin(k as f64 * 1.7) * 3.0).collect();
        let m = DMatrix::from_row_slice(6, 6, &data);
        let mine = eigenvalues(&m).unwrap();
        let mut theirs: Vec<Complex<f64>> = m.clone().complex_eigenvalues().iter().cloned().collect();
        theirs.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap().then(y.im.partial_cmp(&x.im).unwrap()));
        for (a, b) in mine.iter().zip(theirs.iter()) {
            assert!(libm::hypot(a.re - b.re, a.im - b.im) < 1e-9, "{a} vs {b}");
        }
    }
}
