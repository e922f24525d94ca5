//! Gain design from weighted Gramians, the solvability test against the
//! instability margin, and the exponential-convergence certificate.

use alloc::format;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkit::{finite_gramian, matrix_exp, spectral_abscissa};
use crate::spectral::{jacobi_eigen, lambda_h, spectral_norm};

/// Smallest-to-largest eigenvalue ratio below which a Gramian is singular.
const GRAMIAN_RCOND: f64 = 1e-13;
/// Grid step for the growth-envelope search.
const C1_GRID_STEP: f64 = 1e-3;
/// Horizon of the growth-envelope search, in units of `1/(λ* − λ_max)`.
const C1_HORIZON_FACTOR: f64 = 20.0;
/// Inflation applied to a grid maximum found away from `t = 0`.
const C1_INFLATION: f64 = 1.01;
/// Re-anchor the stepped exponential every this many grid points.
const C1_REANCHOR: usize = 500;

/// Shared plant `(A, B, C)` of leader and followers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: Option<DMatrix<f64>>,
}

impl PlantModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: Option<DMatrix<f64>>) -> Result<Self> {
        let n = crate::numkit::ensure_square(&a)?;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "B rows vs state dimension",
                expected: n,
                found: b.nrows(),
            });
        }
        if let Some(c) = &c {
            if c.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "C columns vs state dimension",
                    expected: n,
                    found: c.ncols(),
                });
            }
        }
        Ok(PlantModel { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output(&self) -> Result<&DMatrix<f64>> {
        self.c
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("plant has no output matrix C".into()))
    }

    /// Rank of `[B, AB, …, A^{n−1}B]`.
    pub fn controllability_rank(&self) -> usize {
        rank(&krylov(&self.a, &self.b))
    }

    /// Rank of `[C; CA; …; CA^{n−1}]`, or `None` without an output matrix.
    pub fn observability_rank(&self) -> Option<usize> {
        let c = self.c.as_ref()?;
        Some(rank(&krylov(&self.a.transpose(), &c.transpose())))
    }

    pub fn require_controllable(&self) -> Result<()> {
        let rank = self.controllability_rank();
        if rank < self.state_dim() {
            return Err(Error::RankDeficient {
                what: "controllability matrix",
                rank,
                required: self.state_dim(),
            });
        }
        Ok(())
    }

    pub fn require_observable(&self) -> Result<()> {
        let rank = self
            .observability_rank()
            .ok_or_else(|| Error::InvalidArgument("plant has no output matrix C".into()))?;
        if rank < self.state_dim() {
            return Err(Error::RankDeficient {
                what: "observability matrix",
                rank,
                required: self.state_dim(),
            });
        }
        Ok(())
    }
}

fn krylov(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::<f64>::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

fn rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let tol = largest * f64::EPSILON * m.nrows().max(m.ncols()) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

fn gramian_with_weight(a: &DMatrix<f64>, b: &DMatrix<f64>, alpha: f64, t_star: f64) -> Result<DMatrix<f64>> {
    let n = crate::numkit::ensure_square(a)?;
    let f = -(a * 0.5 + DMatrix::<f64>::identity(n, n) * (alpha * 0.5));
    finite_gramian(&f, b, t_star)
}

fn check_weights(alpha: f64, t_star: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if !(t_star > 0.0 && t_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("t* must be positive, got {t_star}")));
    }
    Ok(())
}

fn require_definite(w: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = jacobi_eigen(w)?;
    let lo = eig.values.first().copied().unwrap_or(0.0);
    let hi = eig.values.last().copied().unwrap_or(0.0);
    if !(lo > GRAMIAN_RCOND * hi) {
        return Err(Error::GramianSingular { min_eigenvalue: lo });
    }
    Ok((lo, hi))
}

/// `W_c = ∫₀^{t*} e^{−αt} e^{−At/2} B Bᵀ e^{−Aᵀt/2} dt`. Fails when the
/// result is not positive definite, i.e. `(A, B)` is not controllable.
pub fn weighted_ctrl_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, alpha: f64, t_star: f64) -> Result<DMatrix<f64>> {
    check_weights(alpha, t_star)?;
    let w = gramian_with_weight(a, b, alpha, t_star)?;
    require_definite(&w)?;
    Ok(w)
}

/// `W_o = ∫₀^{t*} e^{−αt} e^{−Aᵀt/2} Cᵀ C e^{−At/2} dt`, the controllability
/// Gramian of the dual pair `(Aᵀ, Cᵀ)`.
pub fn weighted_obs_gramian(a: &DMatrix<f64>, c: &DMatrix<f64>, alpha: f64, t_star: f64) -> Result<DMatrix<f64>> {
    weighted_ctrl_gramian(&a.transpose(), &c.transpose(), alpha, t_star)
}

/// Gain-design inputs: Gramian weight `α`, horizon `t*`, scaling `μ`, and
/// the follower count that fixes the `μ ≥ 1/λ_H(N)` floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub alpha: f64,
    pub t_star: f64,
    pub mu: f64,
    pub n_followers: usize,
    /// Replace the worst-case `λ_H(N)` floor by this smaller-`μ` floor, e.g.
    /// the reciprocal of a schedule's smallest nonzero eigenvalue. Gains built
    /// this way are not covered by the certificate.
    pub aggressive_floor: Option<f64>,
}

impl DesignParams {
    /// Parameters with `μ = 1/λ_H(N)`.
    pub fn at_floor(alpha: f64, t_star: f64, n_followers: usize) -> Result<Self> {
        Ok(DesignParams {
            alpha,
            t_star,
            mu: mu_floor(n_followers)?,
            n_followers,
            aggressive_floor: None,
        })
    }

    fn required_mu(&self) -> Result<f64> {
        match self.aggressive_floor {
            Some(f) => Ok(f),
            None => mu_floor(self.n_followers),
        }
    }

    fn check_mu(&self) -> Result<()> {
        let floor = self.required_mu()?;
        // 1/λ_H is computed in floating point; allow the last ulp or so.
        if !(self.mu >= floor * (1.0 - 1e-12)) {
            return Err(Error::MuBelowFloor { mu: self.mu, floor });
        }
        Ok(())
    }
}

/// `1/λ_H(N)`.
pub fn mu_floor(n_followers: usize) -> Result<f64> {
    Ok(1.0 / lambda_h(n_followers)?)
}

/// `K = μ Bᵀ W_c⁻¹`.
pub fn feedback_gain(plant: &PlantModel, params: &DesignParams) -> Result<DMatrix<f64>> {
    params.check_mu()?;
    let w = weighted_ctrl_gramian(&plant.a, &plant.b, params.alpha, params.t_star)?;
    let chol = w.cholesky().ok_or(Error::GramianSingular { min_eigenvalue: 0.0 })?;
    // K = μ Bᵀ W⁻¹  ⇔  Kᵀ = μ W⁻¹ B
    Ok(chol.solve(&plant.b).transpose() * params.mu)
}

/// `L = μ W_o⁻¹ Cᵀ`.
pub fn observer_gain(plant: &PlantModel, params: &DesignParams) -> Result<DMatrix<f64>> {
    params.check_mu()?;
    let c = plant.output()?;
    let w = weighted_obs_gramian(&plant.a, c, params.alpha, params.t_star)?;
    let chol = w.cholesky().ok_or(Error::GramianSingular { min_eigenvalue: 0.0 })?;
    Ok(chol.solve(&c.transpose()) * params.mu)
}

/// Synthesized gains and the Gramians they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign {
    pub params: DesignParams,
    pub w_c: Option<DMatrix<f64>>,
    pub w_o: Option<DMatrix<f64>>,
    pub k: Option<DMatrix<f64>>,
    pub l: Option<DMatrix<f64>>,
}

/// Which gains [`design_gains`] should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainRequest {
    pub feedback: bool,
    pub observer: bool,
}

pub fn design_gains(plant: &PlantModel, params: &DesignParams, request: GainRequest) -> Result<GainDesign> {
    let mut design = GainDesign {
        params: *params,
        w_c: None,
        w_o: None,
        k: None,
        l: None,
    };
    if request.feedback {
        plant.require_controllable()?;
        design.w_c = Some(weighted_ctrl_gramian(&plant.a, &plant.b, params.alpha, params.t_star)?);
        design.k = Some(feedback_gain(plant, params)?);
    }
    if request.observer {
        plant.require_observable()?;
        design.w_o = Some(weighted_obs_gramian(&plant.a, plant.output()?, params.alpha, params.t_star)?);
        design.l = Some(observer_gain(plant, params)?);
    }
    Ok(design)
}

/// `−ln δ / T_c`; infinite when `δ = 0`.
pub fn instability_margin(delta: f64, t_c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::BudgetOutOfRange(delta));
    }
    if !(t_c > 0.0 && t_c.is_finite()) {
        return Err(Error::InvalidArgument(format!("T_c must be positive, got {t_c}")));
    }
    if delta == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-libm::log(delta) / t_c)
}

/// Outcome of comparing `λ_max(A)` with the instability margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solvability {
    pub lambda_max: f64,
    pub margin: f64,
    /// `λ_max(A) < margin`. A `false` verdict means "not certified", not
    /// "impossible": the condition is only sufficient.
    pub solvable: bool,
}

pub fn check_solvable(a: &DMatrix<f64>, delta: f64, t_c: f64) -> Result<Solvability> {
    let margin = instability_margin(delta, t_c)?;
    let lambda_max = spectral_abscissa(a)?;
    Ok(Solvability {
        lambda_max,
        margin,
        solvable: lambda_max < margin,
    })
}

/// Picks `λ*` inside `(λ_max(A), margin)`: the midpoint, or `λ_max + 1` when
/// the margin is infinite. `λ*` must also be positive; when the rule above
/// gives a nonpositive value the half-margin (or 1 for an infinite margin)
/// is used instead, which still lies inside the interval.
pub fn select_lambda_star(lambda_max: f64, margin: f64) -> Result<f64> {
    if !(lambda_max < margin) {
        return Err(Error::InfeasibleRate { lambda_max, margin });
    }
    let candidate = if margin.is_infinite() {
        lambda_max + 1.0
    } else {
        0.5 * (lambda_max + margin)
    };
    if candidate > 0.0 {
        return Ok(candidate);
    }
    Ok(if margin.is_infinite() { 1.0 } else { 0.5 * margin })
}

/// `C₁ ≥ 1` with `‖e^{At}‖ ≤ C₁ e^{λ*t}` for all `t ≥ 0`, from a grid search
/// over `[0, 20/(λ* − λ_max(A))]`. A maximum attained only at `t = 0` gives
/// exactly 1; otherwise the grid maximum is inflated by 1%.
pub fn growth_envelope_c1(a: &DMatrix<f64>, lambda_star: f64) -> Result<f64> {
    let lambda_max = spectral_abscissa(a)?;
    if !(lambda_star > lambda_max) {
        return Err(Error::InfeasibleRate {
            lambda_max,
            margin: lambda_star,
        });
    }
    let horizon = C1_HORIZON_FACTOR / (lambda_star - lambda_max);
    let points = libm::ceil(horizon / C1_GRID_STEP) as usize;
    let step = matrix_exp(&(a * C1_GRID_STEP))?;
    let mut e = DMatrix::<f64>::identity(a.nrows(), a.nrows());
    let mut peak = 0.0_f64;
    for k in 1..=points {
        let t = k as f64 * C1_GRID_STEP;
        e = if k % C1_REANCHOR == 0 { matrix_exp(&(a * t))? } else { &step * &e };
        peak = peak.max(spectral_norm(&e) * libm::exp(-lambda_star * t));
    }
    Ok(if peak <= 1.0 { 1.0 } else { C1_INFLATION * peak })
}

/// Smallest window count with `C₁(δ e^{λ* T_c})^ℓ < 1`:
/// `ℓ = ⌊−ln C₁ / (ln δ + λ* T_c)⌋ + 1`, and `ℓ = 1` when `δ = 0`.
pub fn select_ell(c1: f64, delta: f64, lambda_star: f64, t_c: f64) -> Result<u32> {
    if delta == 0.0 {
        return Ok(1);
    }
    let contraction = libm::log(delta) + lambda_star * t_c;
    if !(contraction < 0.0) || !(c1 >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need ln δ + λ*T_c < 0 and C₁ ≥ 1 (got {contraction}, {c1})"
        )));
    }
    let mut ell = libm::floor(-libm::log(c1) / contraction) as u32 + 1;
    // guard the floor() against rounding right at an integer
    while c1 * libm::pow(delta * libm::exp(lambda_star * t_c), f64::from(ell)) >= 1.0 {
        ell += 1;
    }
    Ok(ell)
}

/// Which closed loop a certificate covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    /// `A − λ B K`, consensus.
    Feedback,
    /// `A − λ L C`, distributed observer.
    Observer,
}

/// Constants of the exponential-convergence certificate.
///
/// Large constants are carried in log form (`ln_c3`, `ln_c2`) because
/// `C₃` overflows `f64` for realistic plants; `c3`/`c2` may be `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub kind: LoopKind,
    pub delta: f64,
    pub t_c: f64,
    pub tau: f64,
    pub alpha: f64,
    pub t_star: f64,
    pub lambda_max: f64,
    pub margin: f64,
    pub lambda_star: f64,
    pub c1: f64,
    /// Extreme eigenvalues of the unweighted Gramian `W(0, t*)`.
    pub gramian_max: f64,
    pub gramian_min: f64,
    pub c0: f64,
    pub ell: u32,
    /// `⌈T_c/τ⌉`, the worst-case phase count per window.
    pub phases_per_window: u32,
    pub ln_c3: f64,
    pub c3: f64,
    pub alpha_threshold: f64,
    /// `C₁(δ e^{λ*T_c})^ℓ`.
    pub projector_term: f64,
    pub rho: f64,
    pub varrho: f64,
    pub ln_c2: f64,
    pub c2: f64,
    pub certified: bool,
}

impl Certificate {
    /// Envelope `(C₂/ρ) e^{−ϱt}` at time `t`, evaluated in log form.
    pub fn envelope(&self, t: f64) -> f64 {
        libm::exp(self.ln_c2 - libm::log(self.rho) - self.varrho * t)
    }

    /// Uniform bound `C₀ + C₁ e^{λ* T_c}` on `‖Ξ_j(t)‖` within a window.
    pub fn transition_bound(&self) -> f64 {
        self.c0 + self.c1 * libm::exp(self.lambda_star * self.t_c)
    }
}

/// `⌈T_c/τ⌉`, ignoring rounding noise just above an integer.
fn phases_per_window(t_c: f64, tau: f64) -> u32 {
    let ratio = t_c / tau;
    let rounded = libm::round(ratio);
    if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded.max(1.0) as u32
    } else {
        libm::ceil(ratio) as u32
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    // ln(e^a + e^b)
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + libm::log1p(libm::exp(lo - hi))
}

/// Assembles `λ*`, `C₁`, `ℓ`, `C₀`, `C₃`, the `α` threshold, `ρ`, `ϱ` and
/// `C₂` for the given design. An `α` at or below the threshold yields a
/// certificate with `ρ ≥ 1` and `certified = false`; it is not an error.
pub fn decay_certificate(
    plant: &PlantModel,
    params: &DesignParams,
    kind: LoopKind,
    delta: f64,
    t_c: f64,
    tau: f64,
    ell_override: Option<u32>,
) -> Result<Certificate> {
    check_weights(params.alpha, params.t_star)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("dwell time must be positive, got {tau}")));
    }
    let verdict = check_solvable(&plant.a, delta, t_c)?;
    let lambda_star = select_lambda_star(verdict.lambda_max, verdict.margin)?;
    let c1 = growth_envelope_c1(&plant.a, lambda_star)?;
    let ell = match ell_override {
        Some(0) => return Err(Error::InvalidArgument("ℓ must be positive".into())),
        Some(l) => l,
        None => select_ell(c1, delta, lambda_star, t_c)?,
    };

    let w0 = match kind {
        LoopKind::Feedback => gramian_with_weight(&plant.a, &plant.b, 0.0, params.t_star)?,
        LoopKind::Observer => gramian_with_weight(&plant.a.transpose(), &plant.output()?.transpose(), 0.0, params.t_star)?,
    };
    let (gramian_min, gramian_max) = require_definite(&w0)?;
    let alpha = params.alpha;
    let t_star = params.t_star;
    let ln_c0 = 0.5 * libm::log(gramian_max / gramian_min) + 0.5 * alpha * t_star;
    let c0 = libm::exp(ln_c0);

    let k = phases_per_window(t_c, tau);
    let ell_f = f64::from(ell);
    let k_f = f64::from(k);
    let ln_c0_plus_c1 = ln_add(ln_c0, libm::log(c1));
    let ln_c3 = ln_c0 + libm::log(k_f * ell_f) - ln_c0_plus_c1 + ell_f * (k_f * ln_c0_plus_c1 + lambda_star * t_c);
    let projector_term = c1 * libm::pow(delta * libm::exp(lambda_star * t_c), ell_f);

    let alpha_threshold = if projector_term < 1.0 {
        (ln_c3 - libm::log(1.0 - projector_term)) / tau - lambda_star
    } else {
        f64::INFINITY
    };
    let rho = projector_term + libm::exp(ln_c3 - (alpha + lambda_star) * tau);
    let varrho = -libm::log(rho) / (t_c * ell_f);
    let ln_c2 = ln_add(ln_c0, libm::log(c1) + lambda_star * t_c) + ell_f * (k_f * ln_c0_plus_c1 + lambda_star * t_c);

    Ok(Certificate {
        kind,
        delta,
        t_c,
        tau,
        alpha,
        t_star,
        lambda_max: verdict.lambda_max,
        margin: verdict.margin,
        lambda_star,
        c1,
        gramian_max,
        gramian_min,
        c0,
        ell,
        phases_per_window: k,
        ln_c3,
        c3: libm::exp(ln_c3),
        alpha_threshold,
        projector_term,
        rho,
        varrho,
        ln_c2,
        c2: libm::exp(ln_c2),
        certified: alpha > alpha_threshold && rho < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    // (1 − e^{−2})/2 and its reciprocal, evaluated in extended precision.
    const SCALAR_GRAMIAN: f64 = 0.432_332_358_381_693_65;
    const SCALAR_GAIN: f64 = 2.313_035_285_499_331_3;

    #[test]
    fn scalar_gramians() {
        let w = weighted_ctrl_gramian(&scalar(0.0), &scalar(1.0), 2.0, 1.0).unwrap();
        assert_relative_eq!(w[(0, 0)], SCALAR_GRAMIAN, max_relative = 1e-13);
        let w = weighted_obs_gramian(&scalar(0.0), &scalar(1.0), 2.0, 1.0).unwrap();
        assert_relative_eq!(w[(0, 0)], SCALAR_GRAMIAN, max_relative = 1e-13);
        let w = weighted_ctrl_gramian(&scalar(0.0), &scalar(1.0), 1e-8, 1.0).unwrap();
        assert_relative_eq!(w[(0, 0)], 1.0, max_relative = 1e-7);
    }

    #[test]
    fn uncontrollable_pair_is_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(weighted_ctrl_gramian(&a, &b, 1.0, 1.0), Err(Error::GramianSingular { .. })));
        let plant = PlantModel::new(a, b, None).unwrap();
        assert_eq!(plant.controllability_rank(), 1);
        assert!(matches!(plant.require_controllable(), Err(Error::RankDeficient { rank: 1, .. })));
    }

    #[test]
    fn scalar_gains() {
        let plant = PlantModel::new(scalar(0.0), scalar(1.0), Some(scalar(1.0))).unwrap();
        let params = DesignParams { alpha: 2.0, t_star: 1.0, mu: 1.0, n_followers: 1, aggressive_floor: None };
        let k = feedback_gain(&plant, &params).unwrap();
        assert_relative_eq!(k[(0, 0)], SCALAR_GAIN, max_relative = 1e-12);
        let l = observer_gain(&plant, &params).unwrap();
        assert_relative_eq!(l[(0, 0)], SCALAR_GAIN, max_relative = 1e-12);

        let doubled = DesignParams { mu: 2.0, ..params };
        assert_eq!(feedback_gain(&plant, &doubled).unwrap(), k * 2.0);
    }

    #[test]
    fn mu_floor_enforced() {
        let plant = PlantModel::new(scalar(0.0), scalar(1.0), None).unwrap();
        let params = DesignParams { alpha: 2.0, t_star: 1.0, mu: 2.0, n_followers: 2, aggressive_floor: None };
        match feedback_gain(&plant, &params) {
            Err(Error::MuBelowFloor { floor, .. }) => assert_relative_eq!(floor, 3.0, max_relative = 1e-14),
            other => panic!("{other:?}"),
        }
        let aggressive = DesignParams { aggressive_floor: Some(1.5), ..params };
        assert!(feedback_gain(&plant, &aggressive).is_ok());
    }

    #[test]
    fn margin_examples() {
        assert_eq!(format!("{:.2}", instability_margin(0.863, 0.1).unwrap()), "1.47");
        assert_relative_eq!(
            instability_margin(core::f64::consts::FRAC_1_SQRT_2, 0.2).unwrap(),
            1.732_867_951_399_863,
            max_relative = 1e-12
        );
        assert_eq!(instability_margin(0.0, 0.1).unwrap(), f64::INFINITY);
        assert!(matches!(instability_margin(1.0, 0.1), Err(Error::BudgetOutOfRange(_))));
    }

    #[test]
    fn solvability_examples() {
        let v = check_solvable(&scalar(2.0), 0.863, 0.1).unwrap();
        assert!(!v.solvable);
        let v = check_solvable(&DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -2.0]), 0.99, 1.0).unwrap();
        assert!(v.solvable);
    }

    #[test]
    fn lambda_star_examples() {
        assert_relative_eq!(select_lambda_star(0.319, 1.47).unwrap(), 0.8945, max_relative = 1e-12);
        assert_relative_eq!(select_lambda_star(0.5, 1.732_867_951_399_863).unwrap(), 1.116_433_975_699_931_5, max_relative = 1e-12);
        assert_relative_eq!(select_lambda_star(0.319, f64::INFINITY).unwrap(), 1.319, max_relative = 1e-15);
        assert!(select_lambda_star(2.0, 1.47).is_err());
        // midpoint would be negative: fall back into (0, margin)
        assert_relative_eq!(select_lambda_star(-3.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn c1_examples() {
        let minus_eye = -DMatrix::<f64>::identity(2, 2);
        assert_eq!(growth_envelope_c1(&minus_eye, 0.1).unwrap(), 1.0);
        assert_eq!(growth_envelope_c1(&DMatrix::zeros(2, 2), 1.0).unwrap(), 1.0);
        let nilpotent = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        // (t/2 + sqrt(1 + t²/4)) e^{−t} decreases from 1 at t = 0
        assert_eq!(growth_envelope_c1(&nilpotent, 1.0).unwrap(), 1.0);
        // at λ* = 0.3 the peak is interior: 1.34798688696 at t ≈ 2.667 (dense scipy grid)
        assert_relative_eq!(growth_envelope_c1(&nilpotent, 0.3).unwrap(), 1.01 * 1.347_986_886_96, max_relative = 1e-9);
        assert!(growth_envelope_c1(&nilpotent, -0.1).is_err());
    }

    #[test]
    fn ell_examples() {
        assert_eq!(select_ell(1.0, 0.5, 1.0, 0.1).unwrap(), 1);
        let delta = core::f64::consts::FRAC_1_SQRT_2;
        let ell = select_ell(1.27, delta, 1.116_44, 0.2).unwrap();
        assert_eq!(ell, 2);
        assert!(1.27 * libm::pow(delta * libm::exp(1.116_44 * 0.2), 2.0) < 1.0);
        assert_eq!(select_ell(5.0, 0.0, 1.0, 0.1).unwrap(), 1);
        assert!(select_ell(1.2, 0.9, 5.0, 0.1).is_err());
    }

    #[test]
    fn phases_per_window_rounding() {
        assert_eq!(phases_per_window(0.2, 0.1), 2);
        assert_eq!(phases_per_window(0.1, 0.05), 2);
        assert_eq!(phases_per_window(0.3, 0.1), 3);
        assert_eq!(phases_per_window(0.25, 0.1), 3);
    }
}
