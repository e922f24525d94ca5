//! Symmetric eigendecomposition of leader-follower matrices, kernel
//! projectors and the instability budget `δ` of a switching schedule.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::netgraph::{leader_follower_matrix, FollowerTopology, SwitchingSchedule};
use crate::numkit::ensure_square;

/// Input symmetry tolerance, relative to `max(1, ‖H‖_max)`.
const SYMMETRY_TOL: f64 = 1e-10;
/// Jacobi stops once off-diagonal Frobenius mass < this × ‖H‖_F.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    ensure_square(m)?;
    let scale = m.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Asymmetric { max_deviation: worst });
    }
    Ok(())
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    check_symmetric(m)?;
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_TOL * a.norm();

    let off = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        libm::sqrt(s)
    };

    let mut sweeps = 0;
    while off(&a) > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence("cyclic Jacobi"));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Largest singular value, from the eigenvalues of `MᵀM`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let eig = jacobi_eigen(&gram).expect("MᵀM is symmetric");
    libm::sqrt(eig.values.last().copied().unwrap_or(0.0).max(0.0))
}

/// Kernel/range split of a leader-follower matrix.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal basis of `ker H` (N × nullity).
    pub kernel_basis: DMatrix<f64>,
    /// Orthonormal eigenvectors for the nonzero eigenvalues (N × (N − nullity)).
    pub range_basis: DMatrix<f64>,
    /// Orthogonal projector onto `ker H`; zero when `H` is nonsingular.
    pub projector: DMatrix<f64>,
    pub nullity: usize,
}

impl SpectralSplit {
    /// The nonzero eigenvalues, ascending, in the column order of
    /// `range_basis`.
    pub fn nonzero_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[self.nullity..]
    }
}

/// Eigendecomposition of a leader-follower matrix split at `λ_H(N)/2`:
/// eigenvalues below that threshold count as zero. Nonzero eigenvalues of
/// such matrices never fall below `λ_H(N)`, so the threshold sits inside a
/// guaranteed gap.
pub fn sym_eig(h: &DMatrix<f64>) -> Result<SpectralSplit> {
    let eig = jacobi_eigen(h)?;
    let n = h.nrows();
    let threshold = if n == 0 { 0.0 } else { lambda_h(n)? / 2.0 };
    let nullity = eig.values.iter().take_while(|&&v| v < threshold).count();
    let kernel_basis = eig.vectors.columns(0, nullity).into_owned();
    let range_basis = eig.vectors.columns(nullity, n - nullity).into_owned();
    let projector = if nullity == 0 {
        DMatrix::zeros(n, n)
    } else {
        &kernel_basis * kernel_basis.transpose()
    };
    Ok(SpectralSplit {
        eigenvalues: eig.values,
        kernel_basis,
        range_basis,
        projector,
        nullity,
    })
}

/// Per-topology spectral splits for a schedule, computed once.
#[derive(Debug, Clone)]
pub struct ScheduleSpectra {
    splits: Vec<SpectralSplit>,
}

impl ScheduleSpectra {
    pub fn new(schedule: &SwitchingSchedule) -> Result<Self> {
        let splits = schedule
            .topologies()
            .iter()
            .map(|t| sym_eig(&leader_follower_matrix(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScheduleSpectra { splits })
    }

    /// Split for topology index `k`.
    pub fn split(&self, k: usize) -> &SpectralSplit {
        &self.splits[k]
    }

    pub fn splits(&self) -> &[SpectralSplit] {
        &self.splits
    }

    /// `P_last ⋯ P_first` over the phases of window `k` (later phases on the
    /// left).
    pub fn window_product(&self, schedule: &SwitchingSchedule, k: usize) -> Result<DMatrix<f64>> {
        let n = schedule.n_followers();
        let range = schedule.window(k)?;
        let mut prod = DMatrix::<f64>::identity(n, n);
        for phase in &schedule.phases()[range] {
            prod = &self.splits[phase.topology].projector * prod;
        }
        Ok(prod)
    }

    /// Product over `count` consecutive windows starting at window `start`,
    /// wrapping around the period.
    pub fn consecutive_product(
        &self,
        schedule: &SwitchingSchedule,
        start: usize,
        count: usize,
    ) -> Result<DMatrix<f64>> {
        let n = schedule.n_followers();
        let w = schedule.n_windows();
        if start >= w {
            return Err(Error::OutOfRange { index: start, len: w });
        }
        let mut prod = DMatrix::<f64>::identity(n, n);
        for k in 0..count {
            prod = self.window_product(schedule, (start + k) % w)? * prod;
        }
        Ok(prod)
    }

    /// Spectral norm of each window's projector product.
    pub fn window_norms(&self, schedule: &SwitchingSchedule) -> Result<Vec<f64>> {
        (0..schedule.n_windows())
            .map(|k| self.window_product(schedule, k).map(|p| spectral_norm(&p)))
            .collect()
    }
}

/// Projector product of window `window_index`.
pub fn window_projector_product(schedule: &SwitchingSchedule, window_index: usize) -> Result<DMatrix<f64>> {
    ScheduleSpectra::new(schedule)?.window_product(schedule, window_index)
}

/// Instability budget: the largest spectral norm among the window projector
/// products of one period. Fails if the schedule does not satisfy the
/// connectivity-window and dwell assumptions.
pub fn delta(schedule: &SwitchingSchedule) -> Result<f64> {
    let report = crate::netgraph::validate_schedule(schedule);
    if !report.is_valid() {
        return Err(Error::AssumptionViolated(format!("{report}")));
    }
    let norms = ScheduleSpectra::new(schedule)?.window_norms(schedule)?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Lower bound `4/(N(N−1))` on the nonzero Laplacian eigenvalues of a
/// connected graph on `N` nodes.
pub fn fiedler_lower_bound(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("fiedler bound needs N >= 2, got {n}")));
    }
    let n = n as f64;
    Ok(4.0 / (n * (n - 1.0)))
}

/// Lower bound `4/(N(N²−N+4))` on the nonzero eigenvalues of any
/// leader-follower matrix with `N` followers.
pub fn lambda_h(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("lambda_H needs N >= 1".into()));
    }
    let n = n as f64;
    Ok(4.0 / (n * (n * n - n + 4.0)))
}

/// A leader-follower matrix whose smallest nonzero eigenvalue falls below the
/// tested floor.
#[derive(Debug, Clone)]
pub struct FloorWitness {
    pub topology: FollowerTopology,
    pub eigenvalue: f64,
    pub floor: f64,
}

#[derive(Debug, Clone)]
pub struct FloorCheck {
    pub instances: usize,
    pub witness: Option<FloorWitness>,
}

impl FloorCheck {
    pub fn holds(&self) -> bool {
        self.witness.is_none()
    }
}

/// Eigenvalues below this are treated as exact zeros by the exhaustive check.
const ENUMERATION_ZERO: f64 = 1e-9;
const ENUMERATION_SLACK: f64 = 1e-12;

/// Enumerates every undirected follower graph and every `{0,1}` leader
/// diagonal for `N = 1..=n_max` and checks the smallest nonzero eigenvalue
/// against `floor_scale · λ_H(N)`. Use `floor_scale = 1` for the real bound.
pub fn verify_lambda_h_floor_scaled(n_max: usize, floor_scale: f64) -> Result<FloorCheck> {
    if n_max > 6 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive enumeration limited to N <= 6, got {n_max}"
        )));
    }
    let mut instances = 0;
    for n in 1..=n_max {
        let floor = floor_scale * lambda_h(n)?;
        let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
        for edge_mask in 0u64..(1u64 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| edge_mask >> b & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            for leader_mask in 0u64..(1u64 << n) {
                let leaders: Vec<usize> = (1..=n).filter(|i| leader_mask >> (i - 1) & 1 == 1).collect();
                let topology = FollowerTopology::from_edges(n, &edges, &leaders)?;
                let eig = jacobi_eigen(&leader_follower_matrix(&topology))?;
                instances += 1;
                if let Some(&smallest) = eig.values.iter().find(|&&v| v > ENUMERATION_ZERO) {
                    if smallest < floor - ENUMERATION_SLACK {
                        return Ok(FloorCheck {
                            instances,
                            witness: Some(FloorWitness {
                                topology,
                                eigenvalue: smallest,
                                floor,
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(FloorCheck { instances, witness: None })
}

/// Exhaustive check of the `λ_H(N)` floor for all `N ≤ n_max`.
pub fn verify_lambda_h_floor(n_max: usize) -> Result<FloorCheck> {
    verify_lambda_h_floor_scaled(n_max, 1.0)
}
