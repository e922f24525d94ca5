//! JSON scenario files.

use std::fs;
use std::path::{Path, PathBuf};

use leadcons_core::netgraph::{FollowerTopology, Phase, SwitchingSchedule};
use leadcons_core::switchsim::Mode;
use leadcons_core::synthesis::{mu_floor, DesignParams, PlantModel};
use leadcons_core::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// Dense matrix with explicit dimensions; `data` holds the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>, String> {
        if self.data.len() != self.rows {
            return Err(format!("{what}: declared {} rows, found {}", self.rows, self.data.len()));
        }
        for (i, row) in self.data.iter().enumerate() {
            if row.len() != self.cols {
                return Err(format!("{what}: row {i} has {} entries, declared cols = {}", row.len(), self.cols));
            }
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| self.data[i][j]))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantJson {
    #[serde(rename = "A")]
    pub a: MatrixJson,
    #[serde(rename = "B")]
    pub b: MatrixJson,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyJson {
    pub adjacency: Vec<Vec<f64>>,
    pub leader_links: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseJson {
    pub topology: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleJson {
    pub phases: Vec<PhaseJson>,
    pub window_boundaries: Vec<usize>,
    #[serde(rename = "T_c", alias = "t_c")]
    pub t_c: f64,
    pub dwell_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignMode {
    Consensus,
    Observer,
    Both,
}

impl DesignMode {
    pub fn modes(self) -> &'static [Mode] {
        match self {
            DesignMode::Consensus => &[Mode::Consensus],
            DesignMode::Observer => &[Mode::Observer],
            DesignMode::Both => &[Mode::Consensus, Mode::Observer],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignJson {
    pub alpha: f64,
    pub t_star: f64,
    /// Defaults to `1/λ_H(N)`.
    #[serde(default)]
    pub mu: Option<f64>,
    pub mode: DesignMode,
    /// Use the schedule's smallest nonzero eigenvalue for the `μ` floor.
    #[serde(default)]
    pub aggressive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialJson {
    /// Leader, followers and observers drawn independently and uniformly
    /// from `[0, 1)` per component.
    RandomUnitCube,
    Explicit {
        leader: Vec<f64>,
        followers: Vec<Vec<f64>>,
        /// Observer initial states; the follower states are reused when
        /// absent.
        #[serde(default)]
        observers: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimJson {
    pub horizon: f64,
    pub sample_step: f64,
    pub seed: u64,
    pub initial: InitialJson,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub plant: PlantJson,
    pub topologies: Vec<TopologyJson>,
    pub schedule: ScheduleJson,
    #[serde(default)]
    pub design: Option<DesignJson>,
    #[serde(default)]
    pub sim: Option<SimJson>,
}

/// Initial conditions resolved to matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStates {
    pub leader: DVector<f64>,
    /// `N × n`.
    pub followers: DMatrix<f64>,
    /// `N × n`.
    pub observers: DMatrix<f64>,
}

/// A parsed and structurally checked scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub source: Option<PathBuf>,
    pub plant: PlantModel,
    pub schedule: SwitchingSchedule,
    pub design: Option<DesignJson>,
    pub sim: Option<SimJson>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut scenario = Self::parse(&text).map_err(|e| e.with_path(path))?;
        scenario.source = Some(path.to_path_buf());
        if scenario.name.is_empty() {
            scenario.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into());
        }
        Ok(scenario)
    }

    /// Parses a document; diagnostics name the offending field and position.
    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let inner = e.inner();
            AppError::Parse {
                path: None,
                message: format!(
                    "at `{}` (line {}, column {}): {}",
                    e.path(),
                    inner.line(),
                    inner.column(),
                    strip_position(&inner.to_string())
                ),
            }
        })?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, AppError> {
        let invalid = |message: String| AppError::Invalid { path: None, message };
        let a = file.plant.a.to_matrix("plant.A").map_err(invalid)?;
        let b = file.plant.b.to_matrix("plant.B").map_err(invalid)?;
        let c = file
            .plant
            .c
            .as_ref()
            .map(|c| c.to_matrix("plant.C"))
            .transpose()
            .map_err(invalid)?;
        let plant = PlantModel::new(a, b, c).map_err(|e| invalid(format!("plant: {e}")))?;

        let topologies = file
            .topologies
            .iter()
            .enumerate()
            .map(|(k, t)| {
                FollowerTopology::from_matrix(&t.adjacency, &t.leader_links)
                    .map_err(|e| invalid(format!("topologies[{k}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let phases = file
            .schedule
            .phases
            .iter()
            .map(|p| Phase { topology: p.topology, duration: p.duration })
            .collect();
        let schedule = SwitchingSchedule::new(
            topologies,
            phases,
            file.schedule.window_boundaries.clone(),
            file.schedule.t_c,
            file.schedule.dwell_floor,
        )
        .map_err(|e| invalid(format!("schedule: {e}")))?;

        if let Some(d) = &file.design {
            if let Some(mu) = d.mu {
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(invalid(format!("design.mu must be positive, got {mu}")));
                }
            }
            if d.mode != DesignMode::Consensus && plant.c.is_none() {
                return Err(invalid("design.mode needs an observer but plant.C is missing".into()));
            }
        }
        if let Some(InitialJson::Explicit { leader, followers, observers }) = file.sim.as_ref().map(|s| &s.initial) {
            let n = plant.state_dim();
            let agents = schedule.n_followers();
            if leader.len() != n {
                return Err(invalid(format!("sim.initial.leader has {} entries, expected {n}", leader.len())));
            }
            for (what, rows) in [("followers", Some(followers)), ("observers", observers.as_ref())] {
                let Some(rows) = rows else { continue };
                if rows.len() != agents || rows.iter().any(|r| r.len() != n) {
                    return Err(invalid(format!("sim.initial.{what} must be {agents} rows of {n} values")));
                }
            }
        }

        Ok(Scenario {
            name: file.name.unwrap_or_default(),
            source: None,
            plant,
            schedule,
            design: file.design,
            sim: file.sim,
        })
    }

    pub fn design(&self) -> Result<&DesignJson, AppError> {
        self.design.as_ref().ok_or_else(|| self.missing("design"))
    }

    pub fn sim(&self) -> Result<&SimJson, AppError> {
        self.sim.as_ref().ok_or_else(|| self.missing("sim"))
    }

    fn missing(&self, section: &str) -> AppError {
        AppError::Invalid {
            path: self.source.clone(),
            message: format!("scenario has no `{section}` section"),
        }
    }

    /// Gain-design parameters. `μ` defaults to `1/λ_H(N)`; in aggressive
    /// mode the floor is `1/λ_min` over the schedule's nonzero eigenvalues.
    pub fn design_params(&self, aggressive_floor: Option<f64>) -> Result<DesignParams, AppError> {
        let d = self.design()?;
        let n = self.schedule.n_followers();
        let floor = mu_floor(n)?;
        let aggressive_floor = if d.aggressive { aggressive_floor } else { None };
        let mu = d.mu.unwrap_or(aggressive_floor.unwrap_or(floor));
        Ok(DesignParams {
            alpha: d.alpha,
            t_star: d.t_star,
            mu,
            n_followers: n,
            aggressive_floor,
        })
    }

    /// Initial states, drawing from the seeded generator where requested.
    pub fn initial_states(&self) -> Result<InitialStates, AppError> {
        let sim = self.sim()?;
        let n = self.plant.state_dim();
        let agents = self.schedule.n_followers();
        Ok(match &sim.initial {
            InitialJson::RandomUnitCube => {
                let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
                let leader = DVector::from_fn(n, |_, _| rng.random::<f64>());
                let followers = DMatrix::from_fn(agents, n, |_, _| rng.random::<f64>());
                let observers = DMatrix::from_fn(agents, n, |_, _| rng.random::<f64>());
                InitialStates { leader, followers, observers }
            }
            InitialJson::Explicit { leader, followers, observers } => {
                let rows = |r: &Vec<Vec<f64>>| DMatrix::from_fn(agents, n, |i, j| r[i][j]);
                let followers_m = rows(followers);
                InitialStates {
                    leader: DVector::from_column_slice(leader),
                    observers: observers.as_ref().map(rows).unwrap_or_else(|| followers_m.clone()),
                    followers: followers_m,
                }
            }
        })
    }
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(message: &str) -> &str {
    match message.rfind(" at line ") {
        Some(i) => &message[..i],
        None => message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "plant": {
            "A": {"rows": 1, "cols": 1, "data": [[0.1]]},
            "B": {"rows": 1, "cols": 1, "data": [[1.0]]},
            "C": {"rows": 1, "cols": 1, "data": [[1.0]]}
        },
        "topologies": [
            {"adjacency": [[0, 0], [0, 0]], "leader_links": [1, 0]},
            {"adjacency": [[0, 1], [1, 0]], "leader_links": [0, 0]}
        ],
        "schedule": {
            "phases": [{"topology": 0, "duration": 0.1}, {"topology": 1, "duration": 0.1}],
            "window_boundaries": [0],
            "T_c": 0.2,
            "dwell_floor": 0.1
        },
        "design": {"alpha": 2.0, "t_star": 1.0, "mode": "both"},
        "sim": {"horizon": 1.0, "sample_step": 0.01, "seed": 7, "initial": {"kind": "random_unit_cube"}}
    }"#;

    #[test]
    fn parses_minimal_document() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.schedule.n_followers(), 2);
        assert_eq!(s.schedule.t_c(), 0.2);
        let p = s.design_params(None).unwrap();
        assert!((p.mu - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_initials_are_seeded() {
        let s = Scenario::parse(MINIMAL).unwrap();
        let a = s.initial_states().unwrap();
        let b = s.initial_states().unwrap();
        assert_eq!(a, b);
        assert!(a.followers.iter().all(|v| (0.0..1.0).contains(v)));
        assert_ne!(a.followers, a.observers);
    }

    #[test]
    fn parse_error_names_field_and_line() {
        let broken = MINIMAL.replace("\"T_c\": 0.2", "\"T_c\": \"soon\"");
        let msg = Scenario::parse(&broken).unwrap_err().to_string();
        assert!(msg.contains("schedule.T_c"), "{msg}");
        assert!(msg.contains("line 14"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let broken = MINIMAL.replace(r#""rows": 1, "cols": 1, "data": [[0.1]]"#, r#""rows": 2, "cols": 1, "data": [[0.1]]"#);
        let msg = Scenario::parse(&broken).unwrap_err().to_string();
        assert!(msg.contains("plant.A"), "{msg}");
    }

    #[test]
    fn unknown_topology_reference_is_rejected() {
        let broken = MINIMAL.replace(r#"{"topology": 1, "duration": 0.1}"#, r#"{"topology": 4, "duration": 0.1}"#);
        let msg = Scenario::parse(&broken).unwrap_err().to_string();
        assert!(msg.contains("topology 4"), "{msg}");
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(MatrixJson::from_matrix(&m).to_matrix("m").unwrap(), m);
    }
}
