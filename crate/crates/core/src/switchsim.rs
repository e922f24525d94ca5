//! Closed-loop simulation of consensus and the distributed observer.
//!
//! Agent states are stored as `N × n` matrices whose row `i` is the state of
//! follower `i + 1`. The stacked error `x̄ = [x̄₁; …; x̄_N]` is that matrix
//! read row by row.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netgraph::{leader_follower_matrix, FollowerTopology, SwitchingSchedule};
use crate::numkit::{kron, matrix_exp, spectral_radius};
use crate::spectral::{sym_eig, SpectralSplit};
use crate::synthesis::{GainDesign, PlantModel};

/// RK4 substeps are chosen so that `h·ρ` stays below this.
const RK4_STEP_RADIUS: f64 = 0.1;
/// Relative slack when matching times to the sample grid.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Followers `ẋᵢ = Axᵢ + BK Σ aᵢⱼ(xⱼ − xᵢ)`.
    Consensus,
    /// Observers `η̇ᵢ = Aηᵢ + LC Σ aᵢⱼ(ηⱼ − ηᵢ)`, `η₀ = x₀`.
    Observer,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Consensus => "consensus",
            Mode::Observer => "observer",
        }
    }
}

/// Everything a simulation run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: PlantModel,
    pub schedule: SwitchingSchedule,
    pub design: GainDesign,
    pub mode: Mode,
    pub initial_leader: DVector<f64>,
    /// `N × n`: follower states, or observer states in observer mode.
    pub initial_followers: DMatrix<f64>,
    pub horizon: f64,
    pub sample_step: f64,
}

impl Scenario {
    /// Checks dimensions and the sampling grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.plant.state_dim();
        let followers = self.schedule.n_followers();
        if self.initial_leader.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial leader state",
                expected: n,
                found: self.initial_leader.len(),
            });
        }
        if self.initial_followers.nrows() != followers {
            return Err(Error::DimensionMismatch {
                context: "initial follower count",
                expected: followers,
                found: self.initial_followers.nrows(),
            });
        }
        if self.initial_followers.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "initial follower state",
                expected: n,
                found: self.initial_followers.ncols(),
            });
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        let shortest = self
            .schedule
            .phases()
            .iter()
            .map(|p| p.duration)
            .fold(f64::INFINITY, f64::min);
        if !(self.sample_step > 0.0 && self.sample_step <= shortest * (1.0 + GRID_SLACK)) {
            return Err(Error::InvalidArgument(format!(
                "sample step {} must be positive and at most the shortest phase {shortest}",
                self.sample_step
            )));
        }
        Ok(())
    }

    /// `BK` in consensus mode, `LC` in observer mode.
    pub fn coupling(&self) -> Result<DMatrix<f64>> {
        match self.mode {
            Mode::Consensus => {
                let k = self.design.k.as_ref().ok_or(Error::MissingGain("feedback gain K"))?;
                Ok(&self.plant.b * k)
            }
            Mode::Observer => {
                let l = self.design.l.as_ref().ok_or(Error::MissingGain("observer gain L"))?;
                Ok(l * self.plant.output()?)
            }
        }
    }

    /// Sample instants `0, h, 2h, …` up to the horizon.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = libm::floor(self.horizon / self.sample_step + GRID_SLACK) as usize;
        (0..=count).map(|k| k as f64 * self.sample_step).collect()
    }

    /// Initial stacked error in matrix form.
    pub fn initial_error(&self) -> DMatrix<f64> {
        relative_to_leader(&self.initial_followers, &self.initial_leader)
    }
}

fn relative_to_leader(agents: &DMatrix<f64>, leader: &DVector<f64>) -> DMatrix<f64> {
    let mut out = agents.clone();
    for mut row in out.row_iter_mut() {
        row -= leader.transpose();
    }
    out
}

/// Sampled closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub leader_states: Vec<DVector<f64>>,
    /// Per sample, `N × n` follower (or observer) states.
    pub agent_states: Vec<DMatrix<f64>>,
    /// Per sample, `‖x̄(t)‖` (or `‖η̄(t)‖`).
    pub error_norms: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.agent_states.first().map_or(0, |m| m.nrows())
    }

    pub fn state_dim(&self) -> usize {
        self.leader_states.first().map_or(0, |v| v.len())
    }

    /// Stacked error at sample `k` in matrix form.
    pub fn error(&self, k: usize) -> DMatrix<f64> {
        relative_to_leader(&self.agent_states[k], &self.leader_states[k])
    }

    fn push(&mut self, t: f64, leader: DVector<f64>, error: &DMatrix<f64>) {
        let mut agents = error.clone();
        for mut row in agents.row_iter_mut() {
            row += leader.transpose();
        }
        self.times.push(t);
        self.error_norms.push(error.norm());
        self.leader_states.push(leader);
        self.agent_states.push(agents);
    }

    fn with_capacity(mode: Mode, len: usize) -> Self {
        Trajectory {
            mode,
            times: Vec::with_capacity(len),
            leader_states: Vec::with_capacity(len),
            agent_states: Vec::with_capacity(len),
            error_norms: Vec::with_capacity(len),
        }
    }
}

/// Largest `‖x̄_a(t) − x̄_b(t)‖ / (1 + ‖x̄_a(t)‖)` over common samples.
pub fn max_normalized_deviation(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "trajectory sample count",
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut worst = 0.0_f64;
    for k in 0..a.len() {
        let ea = a.error(k);
        let eb = b.error(k);
        worst = worst.max((&ea - &eb).norm() / (1.0 + ea.norm()));
    }
    Ok(worst)
}

/// Closed-form error propagator of one phase,
/// `Ξ(s) = Ψ(s) + Φ(s)` with `Ψ(s) = P ⊗ e^{As}` and
/// `Φ(s) = Γ̄ blockdiag(e^{(A − λ_p G)s}) Γ̄ᵀ`.
#[derive(Debug, Clone)]
pub struct PhaseOperator {
    a: DMatrix<f64>,
    coupling: DMatrix<f64>,
    split: SpectralSplit,
}

impl PhaseOperator {
    pub fn new(a: &DMatrix<f64>, coupling: &DMatrix<f64>, topology: &FollowerTopology) -> Result<Self> {
        let split = sym_eig(&leader_follower_matrix(topology))?;
        Self::from_split(a, coupling, split)
    }

    pub fn from_split(a: &DMatrix<f64>, coupling: &DMatrix<f64>, split: SpectralSplit) -> Result<Self> {
        let n = crate::numkit::ensure_square(a)?;
        if coupling.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                context: "coupling matrix size",
                expected: n,
                found: coupling.nrows().max(coupling.ncols()),
            });
        }
        Ok(PhaseOperator {
            a: a.clone(),
            coupling: coupling.clone(),
            split,
        })
    }

    pub fn split(&self) -> &SpectralSplit {
        &self.split
    }

    fn n_followers(&self) -> usize {
        self.split.projector.nrows()
    }

    /// `A − λ_p G` for each nonzero eigenvalue `λ_p`.
    pub fn modal_generators(&self) -> Vec<DMatrix<f64>> {
        self.split
            .nonzero_eigenvalues()
            .iter()
            .map(|&l| &self.a - &self.coupling * l)
            .collect()
    }

    /// `I ⊗ A − H ⊗ G`.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.n_followers();
        let h = &self.split.range_basis
            * DMatrix::from_diagonal(&DVector::from_column_slice(self.split.nonzero_eigenvalues()))
            * self.split.range_basis.transpose();
        kron(&DMatrix::identity(n, n), &self.a) - kron(&h, &self.coupling)
    }

    pub fn psi(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(kron(&self.split.projector, &matrix_exp(&(&self.a * s))?))
    }

    pub fn phi(&self, s: f64) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        let nn = self.n_followers() * n;
        let mut out = DMatrix::<f64>::zeros(nn, nn);
        for (p, m) in self.modal_generators().iter().enumerate() {
            let gamma = self.split.range_basis.column(p).into_owned();
            out += kron(&(&gamma * gamma.transpose()), &matrix_exp(&(m * s))?);
        }
        Ok(out)
    }

    pub fn xi(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(self.psi(s)? + self.phi(s)?)
    }

    /// `Ξ(s)` applied to an error in `N × n` form, without forming `Ξ`.
    pub fn apply(&self, s: f64, error: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = if self.split.nullity == 0 {
            DMatrix::zeros(error.nrows(), error.ncols())
        } else {
            &self.split.projector * error * matrix_exp(&(&self.a * s))?.transpose()
        };
        for (p, m) in self.modal_generators().iter().enumerate() {
            let gamma = self.split.range_basis.column(p);
            let mode = gamma.transpose() * error;
            let evolved = mode * matrix_exp(&(m * s))?.transpose();
            out += gamma * evolved;
        }
        Ok(out)
    }

    /// Spectral radius of [`PhaseOperator::generator`], from the `n × n`
    /// blocks.
    pub fn generator_radius(&self) -> Result<f64> {
        let mut r = if self.split.nullity > 0 { spectral_radius(&self.a)? } else { 0.0 };
        for m in self.modal_generators() {
            r = r.max(spectral_radius(&m)?);
        }
        Ok(r)
    }
}

fn phase_operators(scenario: &Scenario, coupling: &DMatrix<f64>) -> Result<Vec<PhaseOperator>> {
    scenario
        .schedule
        .topologies()
        .iter()
        .map(|t| PhaseOperator::new(&scenario.plant.a, coupling, t))
        .collect()
}

/// Phase visited at each position of the repeated schedule, with its
/// absolute start time, until the horizon is covered.
fn phase_timeline(schedule: &SwitchingSchedule, horizon: f64) -> Vec<(usize, f64, f64)> {
    let offsets = schedule.phase_offsets();
    let period = schedule.period();
    let mut out = Vec::new();
    let mut cycle = 0usize;
    loop {
        for (j, phase) in schedule.phases().iter().enumerate() {
            let start = cycle as f64 * period + offsets[j];
            if start > horizon * (1.0 + GRID_SLACK) {
                return out;
            }
            out.push((phase.topology, start, phase.duration));
        }
        cycle += 1;
    }
}

/// Samples the closed-form piecewise solution. Inside a phase each sample is
/// reached by a single `Ξ(s)` from the phase start; phase starts are chained
/// by the full-phase `Ξ(τ_j)`. The leader is `e^{At}x₀(0)`.
pub fn propagate_exact(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let coupling = scenario.coupling()?;
    let operators = phase_operators(scenario, &coupling)?;
    let times = scenario.sample_times();
    let mut traj = Trajectory::with_capacity(scenario.mode, times.len());
    let eps = GRID_SLACK * scenario.sample_step;

    let mut error = scenario.initial_error();
    let mut next_sample = 0usize;
    for (topology, start, duration) in phase_timeline(&scenario.schedule, scenario.horizon) {
        let op = &operators[topology];
        let end = start + duration;
        while next_sample < times.len() && times[next_sample] < end - eps {
            let t = times[next_sample];
            let s = (t - start).max(0.0);
            let sampled = if s == 0.0 { error.clone() } else { op.apply(s, &error)? };
            let leader = matrix_exp(&(&scenario.plant.a * t))? * &scenario.initial_leader;
            traj.push(t, leader, &sampled);
            next_sample += 1;
        }
        if next_sample == times.len() {
            break;
        }
        error = op.apply(duration, &error)?;
    }
    Ok(traj)
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rk4Options {
    /// RK4 steps per sample interval. `None` picks the smallest count with
    /// `h·ρ ≤ 0.1`, `ρ` being the largest spectral radius among the
    /// per-topology closed-loop generators; this keeps the method accurate
    /// for stiff high-gain designs while samples stay on the requested grid.
    pub substeps: Option<usize>,
}

/// Classical fourth-order Runge–Kutta on the raw leader and agent equations,
/// with switches applied exactly at phase boundaries. Every phase boundary
/// inside the horizon must fall on the sample grid.
pub fn integrate_rk4(scenario: &Scenario, options: Rk4Options) -> Result<Trajectory> {
    scenario.validate()?;
    let coupling = scenario.coupling()?;
    let h = scenario.sample_step;
    let times = scenario.sample_times();
    let timeline = phase_timeline(&scenario.schedule, scenario.horizon);

    // phase start → sample index
    let mut switch_steps = Vec::with_capacity(timeline.len());
    for &(_, start, _) in &timeline {
        let steps = start / h;
        let rounded = libm::round(steps);
        if (steps - rounded).abs() > 1e-6 * rounded.max(1.0) {
            return Err(Error::MisalignedSwitch { boundary: start, step: h });
        }
        switch_steps.push(rounded as usize);
    }

    let substeps = match options.substeps {
        Some(0) => return Err(Error::InvalidArgument("substeps must be positive".into())),
        Some(m) => m,
        None => {
            let mut radius = 0.0_f64;
            for op in phase_operators(scenario, &coupling)? {
                radius = radius.max(op.generator_radius()?);
            }
            (libm::ceil(h * radius / RK4_STEP_RADIUS) as usize).max(1)
        }
    };
    let dt = h / substeps as f64;

    let topologies = scenario.schedule.topologies();
    let a = &scenario.plant.a;
    let mut leader = scenario.initial_leader.clone();
    let mut agents = scenario.initial_followers.clone();
    let mut traj = Trajectory::with_capacity(scenario.mode, times.len());
    traj.push(0.0, leader.clone(), &relative_to_leader(&agents, &leader));

    let mut phase = 0usize;
    for step in 1..times.len() {
        while phase + 1 < switch_steps.len() && switch_steps[phase + 1] < step {
            phase += 1;
        }
        let topology = &topologies[timeline[phase].0];
        let rhs = |x0: &DVector<f64>, xs: &DMatrix<f64>| agent_rhs(a, &coupling, topology, x0, xs);
        for _ in 0..substeps {
            let (l1, f1) = rhs(&leader, &agents);
            let (l2, f2) = rhs(&(&leader + &l1 * (dt / 2.0)), &(&agents + &f1 * (dt / 2.0)));
            let (l3, f3) = rhs(&(&leader + &l2 * (dt / 2.0)), &(&agents + &f2 * (dt / 2.0)));
            let (l4, f4) = rhs(&(&leader + &l3 * dt), &(&agents + &f3 * dt));
            leader += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (dt / 6.0);
            agents += (f1 + f2 * 2.0 + f3 * 2.0 + f4) * (dt / 6.0);
        }
        traj.push(times[step], leader.clone(), &relative_to_leader(&agents, &leader));
    }
    Ok(traj)
}

/// Right-hand side in `N × n` row form: `ẋᵢ = Axᵢ + G Σⱼ aᵢⱼ(xⱼ − xᵢ)` with
/// `j = 0` the leader.
fn agent_rhs(
    a: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    topology: &FollowerTopology,
    leader: &DVector<f64>,
    agents: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = topology.n_followers();
    let drift = agents * a.transpose();
    let mut disagreement = DMatrix::<f64>::zeros(n, agents.ncols());
    for i in 0..n {
        let xi = agents.row(i);
        let mut acc = disagreement.row_mut(i);
        if topology.hears_leader(i) {
            acc += leader.transpose() - xi;
        }
        for j in 0..n {
            if j != i && topology.linked(i, j) {
                acc += agents.row(j) - xi;
            }
        }
    }
    (a * leader, drift + disagreement * coupling.transpose())
}

/// Distributed observer run: the exact propagator in observer mode. The
/// returned agent states are the estimates `ηᵢ = η̄ᵢ + x₀`.
pub fn simulate_observer(scenario: &Scenario) -> Result<Trajectory> {
    scenario.plant.output()?;
    if scenario.mode != Mode::Observer {
        let mut observer = scenario.clone();
        observer.mode = Mode::Observer;
        return propagate_exact(&observer);
    }
    propagate_exact(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::DesignParams;
    use approx::assert_relative_eq;

    fn design_with(k: Option<f64>, l: Option<f64>) -> GainDesign {
        GainDesign {
            params: DesignParams { alpha: 2.0, t_star: 1.0, mu: 1.0, n_followers: 1, aggressive_floor: None },
            w_c: None,
            w_o: None,
            k: k.map(|v| DMatrix::from_element(1, 1, v)),
            l: l.map(|v| DMatrix::from_element(1, 1, v)),
        }
    }

    fn scalar_scenario(mode: Mode, gain: f64) -> Scenario {
        let topology = FollowerTopology::from_edges(1, &[], &[1]).unwrap();
        Scenario {
            plant: PlantModel::new(
                DMatrix::from_element(1, 1, 0.1),
                DMatrix::from_element(1, 1, 1.0),
                Some(DMatrix::from_element(1, 1, 1.0)),
            )
            .unwrap(),
            schedule: SwitchingSchedule::static_topology(topology, 0.25).unwrap(),
            design: design_with(Some(gain), Some(gain)),
            mode,
            initial_leader: DVector::from_element(1, 0.5),
            initial_followers: DMatrix::from_element(1, 1, 1.5),
            horizon: 1.0,
            sample_step: 1e-3,
        }
    }

    const GAIN: f64 = 2.313_035_285_499_331_3;
    // e^{0.1 − K}
    const SCALAR_FACTOR: f64 = 0.109_368_180_550_652;

    #[test]
    fn scalar_closed_form() {
        let traj = propagate_exact(&scalar_scenario(Mode::Consensus, GAIN)).unwrap();
        assert_eq!(traj.len(), 1001);
        assert_relative_eq!(*traj.error_norms.last().unwrap(), SCALAR_FACTOR, max_relative = 1e-10);
        assert_relative_eq!(traj.leader_states[1000][0], 0.5 * libm::exp(0.1), max_relative = 1e-13);
    }

    #[test]
    fn scalar_rk4_matches_exact() {
        let sc = scalar_scenario(Mode::Consensus, GAIN);
        let exact = propagate_exact(&sc).unwrap();
        let rk = integrate_rk4(&sc, Rk4Options::default()).unwrap();
        let (e, r) = (exact.error_norms[1000], rk.error_norms[1000]);
        assert!((e - r).abs() / e < 1e-6);
        assert!(max_normalized_deviation(&exact, &rk).unwrap() < 1e-9);
    }

    #[test]
    fn observer_dual_of_scalar_case() {
        let cons = propagate_exact(&scalar_scenario(Mode::Consensus, GAIN)).unwrap();
        let obs = simulate_observer(&scalar_scenario(Mode::Observer, GAIN)).unwrap();
        assert_eq!(obs.mode, Mode::Observer);
        for (a, b) in cons.error_norms.iter().zip(&obs.error_norms) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_error_stays_zero() {
        let mut sc = scalar_scenario(Mode::Consensus, GAIN);
        sc.initial_followers = DMatrix::from_element(1, 1, 0.5);
        assert!(propagate_exact(&sc).unwrap().error_norms.iter().all(|&e| e == 0.0));
        assert!(integrate_rk4(&sc, Rk4Options::default()).unwrap().error_norms.iter().all(|&e| e == 0.0));
        sc.mode = Mode::Observer;
        assert!(simulate_observer(&sc).unwrap().error_norms.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn missing_gain_is_reported() {
        let mut sc = scalar_scenario(Mode::Observer, GAIN);
        sc.design = design_with(Some(GAIN), None);
        assert!(matches!(propagate_exact(&sc), Err(Error::MissingGain(_))));
        sc.mode = Mode::Consensus;
        sc.design = design_with(None, Some(GAIN));
        assert!(matches!(integrate_rk4(&sc, Rk4Options::default()), Err(Error::MissingGain(_))));
    }

    #[test]
    fn no_leader_links_means_open_loop_drift() {
        let topology = FollowerTopology::empty(2).unwrap();
        let mut sc = scalar_scenario(Mode::Consensus, GAIN);
        sc.schedule = SwitchingSchedule::static_topology(topology, 0.25).unwrap();
        sc.initial_followers = DMatrix::from_column_slice(2, 1, &[1.5, -0.5]);
        let traj = propagate_exact(&sc).unwrap();
        let e = traj.error(1000);
        assert_relative_eq!(e[(0, 0)], 1.0 * libm::exp(0.1), max_relative = 1e-13);
        assert_relative_eq!(e[(1, 0)], -libm::exp(0.1), max_relative = 1e-13);
    }

    #[test]
    fn misaligned_switch_rejected() {
        let mut sc = scalar_scenario(Mode::Consensus, GAIN);
        sc.sample_step = 0.03;
        assert!(matches!(integrate_rk4(&sc, Rk4Options::default()), Err(Error::MisalignedSwitch { .. })));
    }

    #[test]
    fn sample_step_longer_than_phase_rejected() {
        let mut sc = scalar_scenario(Mode::Consensus, GAIN);
        sc.sample_step = 0.5;
        assert!(propagate_exact(&sc).is_err());
    }

    #[test]
    fn operator_matches_generator_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.2]);
        let g = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 1.5]);
        let topology = FollowerTopology::from_edges(3, &[(1, 2)], &[1]).unwrap();
        let op = PhaseOperator::new(&a, &g, &topology).unwrap();
        assert_eq!(op.split().nullity, 1);
        let direct = matrix_exp(&(op.generator() * 0.7)).unwrap();
        assert!((op.xi(0.7).unwrap() - &direct).amax() < 1e-12);

        let x = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0]);
        let stacked = DVector::from_iterator(6, x.transpose().iter().copied());
        let via_apply = op.apply(0.7, &x).unwrap();
        let via_matrix = direct * stacked;
        for i in 0..3 {
            for c in 0..2 {
                assert!((via_apply[(i, c)] - via_matrix[2 * i + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn timeline_covers_horizon() {
        let topology = FollowerTopology::from_edges(1, &[], &[1]).unwrap();
        let schedule = SwitchingSchedule::static_topology(topology, 0.25).unwrap();
        let tl = phase_timeline(&schedule, 1.0);
        assert_eq!(tl.len(), 5);
        assert_eq!(tl[4].1, 1.0);
    }
}
