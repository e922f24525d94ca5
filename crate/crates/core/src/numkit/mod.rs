//! Dense numerics shared by gain synthesis and simulation: the matrix
//! exponential, finite-horizon Gramians and eigenvalues of general real
//! matrices.

mod unsym;

use alloc::format;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use unsym::{eigenvalues, spectral_abscissa, spectral_radius};

/// Coefficients of the [13/13] diagonal Padé approximant of `exp`.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Scaled matrices are brought below this 1-norm before the Padé step.
const SCALED_NORM: f64 = 0.5;

pub(crate) fn ensure_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Matrix exponential by scaling and squaring with an order-13 diagonal Padé
/// approximant.
pub fn matrix_exp(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = ensure_square(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix_exp: non-finite entry".into()));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    if m.iter().all(|&v| v == 0.0) {
        return Ok(eye);
    }

    let norm = norm1(m);
    let squarings = if norm > SCALED_NORM {
        libm::ceil(libm::log2(norm / SCALED_NORM)) as i32
    } else {
        0
    };
    let a = m * libm::exp2(-f64::from(squarings));

    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &eye * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &eye * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::NoConvergence("Padé denominator solve"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

fn gramian_dims(f: &DMatrix<f64>, g: &DMatrix<f64>, horizon: f64) -> Result<usize> {
    let n = ensure_square(f)?;
    if g.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "gramian input matrix rows",
            expected: n,
            found: g.nrows(),
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gramian horizon must be positive, got {horizon}"
        )));
    }
    Ok(n)
}

/// `∫₀^h e^{Ft} G Gᵀ e^{Fᵀt} dt` from one exponential of the block matrix
/// `[[F, GGᵀ], [0, -Fᵀ]]·h`: the upper-right block times the transposed
/// upper-left block is the integral.
pub fn finite_gramian(f: &DMatrix<f64>, g: &DMatrix<f64>, horizon: f64) -> Result<DMatrix<f64>> {
    let n = gramian_dims(f, g, horizon)?;
    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(f);
    block.view_mut((0, n), (n, n)).copy_from(&(g * g.transpose()));
    block.view_mut((n, n), (n, n)).copy_from(&(-f.transpose()));
    let e = matrix_exp(&(block * horizon))?;
    let e11 = e.view((0, 0), (n, n));
    let e12 = e.view((0, n), (n, n));
    let w = e12 * e11.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

/// Composite Simpson approximation of the same integral as
/// [`finite_gramian`]. Test oracle: it steps `e^{F·dt}` from its own Taylor
/// series, so it shares no code with [`matrix_exp`].
pub fn gramian_quadrature_oracle(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    horizon: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let n = gramian_dims(f, g, horizon)?;
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "Simpson rule needs an even step count >= 2, got {steps}"
        )));
    }
    let dt = horizon / steps as f64;
    let step = taylor_exp(&(f * dt));
    let ggt = g * g.transpose();

    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut e = DMatrix::<f64>::identity(n, n);
    for k in 0..=steps {
        let weight = if k == 0 || k == steps {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (&e * &ggt * e.transpose()) * weight;
        e = &step * &e;
    }
    let w = acc * (dt / 3.0);
    Ok((&w + w.transpose()) * 0.5)
}

fn taylor_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..40 {
        term = &term * m / k as f64;
        sum += &term;
        if term.amax() <= f64::EPSILON * sum.amax() * 1e-3 {
            break;
        }
    }
    sum
}
