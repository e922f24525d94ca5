//! Switching communication graphs between one leader (node 0) and `N`
//! followers (nodes `1..=N`).
//!
//! Follower labels in this module's public API and reports are 1-based so
//! that they line up with the node numbering where the leader is node 0.
//! Matrix indices are 0-based as usual.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative slack used when comparing accumulated durations.
const TIME_SLACK: f64 = 1e-9;

/// One snapshot of the communication graph: undirected follower edges plus
/// the set of followers that hear the leader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowerTopology {
    n: usize,
    adjacency: Vec<bool>,
    leader_links: Vec<bool>,
}

impl FollowerTopology {
    /// Builds a topology from a dense `{0,1}` adjacency matrix and leader
    /// indicator vector. Weighted or directed input is rejected.
    pub fn from_matrix(adjacency: &[Vec<f64>], leader_links: &[f64]) -> Result<Self> {
        let n = leader_links.len();
        if n == 0 {
            return Err(Error::InvalidTopology("topology has no followers".into()));
        }
        if adjacency.len() != n {
            return Err(Error::DimensionMismatch {
                context: "adjacency rows vs leader_links",
                expected: n,
                found: adjacency.len(),
            });
        }
        let as_bit = |v: f64, what: &str| -> Result<bool> {
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(Error::InvalidTopology(format!("{what} entry {v} is not 0 or 1")))
            }
        };
        let mut bits = vec![false; n * n];
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "adjacency row length",
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                bits[i * n + j] = as_bit(v, "adjacency")?;
            }
        }
        let leaders = leader_links
            .iter()
            .map(|&v| as_bit(v, "leader_links"))
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(n, bits, leaders)
    }

    /// Builds a topology from 1-based follower labels: `edges` are
    /// undirected follower pairs, `leader_children` the followers linked to
    /// the leader.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], leader_children: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("topology has no followers".into()));
        }
        let check = |label: usize| {
            if label == 0 || label > n {
                Err(Error::InvalidTopology(format!(
                    "follower label {label} outside 1..={n}"
                )))
            } else {
                Ok(label - 1)
            }
        };
        let mut bits = vec![false; n * n];
        for &(a, b) in edges {
            let (i, j) = (check(a)?, check(b)?);
            if i == j {
                return Err(Error::InvalidTopology(format!("self-loop at follower {a}")));
            }
            bits[i * n + j] = true;
            bits[j * n + i] = true;
        }
        let mut leaders = vec![false; n];
        for &c in leader_children {
            leaders[check(c)?] = true;
        }
        Self::from_bits(n, bits, leaders)
    }

    /// Topology with no edges at all.
    pub fn empty(n: usize) -> Result<Self> {
        Self::from_edges(n, &[], &[])
    }

    fn from_bits(n: usize, adjacency: Vec<bool>, leader_links: Vec<bool>) -> Result<Self> {
        for i in 0..n {
            if adjacency[i * n + i] {
                return Err(Error::InvalidTopology(format!(
                    "nonzero diagonal at follower {}",
                    i + 1
                )));
            }
            for j in i + 1..n {
                if adjacency[i * n + j] != adjacency[j * n + i] {
                    return Err(Error::InvalidTopology(format!(
                        "adjacency not symmetric between followers {} and {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(FollowerTopology {
            n,
            adjacency,
            leader_links,
        })
    }

    pub fn n_followers(&self) -> usize {
        self.n
    }

    /// `a_ij` for 0-based follower indices.
    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    /// `a_i0` for a 0-based follower index.
    pub fn hears_leader(&self, i: usize) -> bool {
        self.leader_links[i]
    }

    /// Undirected follower edges as 1-based `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.linked(i, j) {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }

    /// 1-based labels of followers linked to the leader.
    pub fn leader_children(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.leader_links[i]).map(|i| i + 1).collect()
    }

    /// Relabels followers: follower `i` becomes follower `perm[i]` (0-based).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                context: "permutation length",
                expected: n,
                found: perm.len(),
            });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || core::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        let mut adjacency = vec![false; n * n];
        let mut leader_links = vec![false; n];
        for i in 0..n {
            leader_links[perm[i]] = self.leader_links[i];
            for j in 0..n {
                adjacency[perm[i] * n + perm[j]] = self.adjacency[i * n + j];
            }
        }
        Ok(FollowerTopology {
            n,
            adjacency,
            leader_links,
        })
    }
}

/// Graph Laplacian of the follower subgraph: degrees on the diagonal,
/// `-a_ij` off the diagonal.
pub fn laplacian(topology: &FollowerTopology) -> DMatrix<f64> {
    let n = topology.n;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (0..n).filter(|&k| topology.linked(i, k)).count() as f64
        } else if topology.linked(i, j) {
            -1.0
        } else {
            0.0
        }
    })
}

/// Leader-follower matrix `H = L + diag(a_10, …, a_N0)`.
pub fn leader_follower_matrix(topology: &FollowerTopology) -> DMatrix<f64> {
    let mut h = laplacian(topology);
    for i in 0..topology.n {
        if topology.hears_leader(i) {
            h[(i, i)] += 1.0;
        }
    }
    h
}

/// Union graph: entrywise OR of follower edges and leader links.
pub fn union_topology(topologies: &[FollowerTopology]) -> Result<FollowerTopology> {
    let first = topologies
        .first()
        .ok_or_else(|| Error::InvalidArgument("union of zero topologies".into()))?;
    let n = first.n;
    let mut adjacency = vec![false; n * n];
    let mut leader_links = vec![false; n];
    for t in topologies {
        if t.n != n {
            return Err(Error::DimensionMismatch {
                context: "union of topologies",
                expected: n,
                found: t.n,
            });
        }
        for (dst, &src) in adjacency.iter_mut().zip(&t.adjacency) {
            *dst |= src;
        }
        for (dst, &src) in leader_links.iter_mut().zip(&t.leader_links) {
            *dst |= src;
        }
    }
    Ok(FollowerTopology {
        n,
        adjacency,
        leader_links,
    })
}

/// 1-based labels of followers not reachable from the leader by breadth-first
/// search over leader links and (undirected) follower edges.
pub fn unreachable_followers(topology: &FollowerTopology) -> Vec<usize> {
    let n = topology.n;
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| topology.hears_leader(i)).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if topology.linked(i, j) && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).map(|i| i + 1).collect()
}

/// True iff every follower is reachable from the leader.
pub fn leader_reachable(topology: &FollowerTopology) -> bool {
    unreachable_followers(topology).is_empty()
}

/// One dwell interval of the periodic switching signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub topology: usize,
    pub duration: f64,
}

/// Periodic switching signal with explicit connectivity windows.
///
/// The phase list is one period; it repeats forever. `window_boundaries`
/// holds the phase indices at which connectivity windows start; the first is
/// always 0 and the period end closes the last window.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSchedule {
    topologies: Vec<FollowerTopology>,
    phases: Vec<Phase>,
    window_boundaries: Vec<usize>,
    t_c: f64,
    dwell_floor: f64,
}

impl SwitchingSchedule {
    /// Checks structure only (indices, ordering, positivity). Whether the
    /// schedule satisfies the connectivity and dwell assumptions is reported
    /// by [`validate_schedule`].
    pub fn new(
        topologies: Vec<FollowerTopology>,
        phases: Vec<Phase>,
        window_boundaries: Vec<usize>,
        t_c: f64,
        dwell_floor: f64,
    ) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::EmptySchedule);
        }
        let n = topologies
            .first()
            .ok_or_else(|| Error::InvalidSchedule("no topologies".into()))?
            .n;
        if let Some(t) = topologies.iter().find(|t| t.n != n) {
            return Err(Error::DimensionMismatch {
                context: "topology follower count",
                expected: n,
                found: t.n,
            });
        }
        for (k, p) in phases.iter().enumerate() {
            if p.topology >= topologies.len() {
                return Err(Error::InvalidSchedule(format!(
                    "phase {k} references topology {} but only {} exist",
                    p.topology,
                    topologies.len()
                )));
            }
            if !(p.duration > 0.0 && p.duration.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "phase {k} has non-positive duration {}",
                    p.duration
                )));
            }
        }
        if window_boundaries.first() != Some(&0) {
            return Err(Error::InvalidSchedule("window boundaries must start at phase 0".into()));
        }
        if window_boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule("window boundaries must be strictly increasing".into()));
        }
        if window_boundaries.last().is_some_and(|&b| b >= phases.len()) {
            return Err(Error::InvalidSchedule(format!(
                "window boundary beyond the last phase index {}",
                phases.len() - 1
            )));
        }
        if !(t_c > 0.0 && t_c.is_finite()) {
            return Err(Error::InvalidSchedule(format!("T_c must be positive, got {t_c}")));
        }
        if !(dwell_floor > 0.0 && dwell_floor.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "dwell floor must be positive, got {dwell_floor}"
            )));
        }
        Ok(SwitchingSchedule {
            topologies,
            phases,
            window_boundaries,
            t_c,
            dwell_floor,
        })
    }

    /// A schedule that repeats one topology; every phase is its own window.
    pub fn static_topology(topology: FollowerTopology, duration: f64) -> Result<Self> {
        Self::new(
            vec![topology],
            vec![Phase { topology: 0, duration }],
            vec![0],
            duration,
            duration,
        )
    }

    pub fn n_followers(&self) -> usize {
        self.topologies[0].n
    }

    pub fn topologies(&self) -> &[FollowerTopology] {
        &self.topologies
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn window_boundaries(&self) -> &[usize] {
        &self.window_boundaries
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    pub fn dwell_floor(&self) -> f64 {
        self.dwell_floor
    }

    pub fn period(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn n_windows(&self) -> usize {
        self.window_boundaries.len()
    }

    /// Phase index range of connectivity window `k` within one period.
    pub fn window(&self, k: usize) -> Result<Range<usize>> {
        let start = *self.window_boundaries.get(k).ok_or(Error::OutOfRange {
            index: k,
            len: self.window_boundaries.len(),
        })?;
        let end = self
            .window_boundaries
            .get(k + 1)
            .copied()
            .unwrap_or(self.phases.len());
        Ok(start..end)
    }

    /// Start time of each phase within a period (length = phases + 1, the
    /// last entry is the period).
    pub fn phase_offsets(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.phases.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for p in &self.phases {
            t += p.duration;
            out.push(t);
        }
        out
    }

    /// Applies the same follower relabeling to every topology.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let topologies = self
            .topologies
            .iter()
            .map(|t| t.permuted(perm))
            .collect::<Result<Vec<_>>>()?;
        Ok(SwitchingSchedule {
            topologies,
            ..self.clone()
        })
    }
}

/// Verdict for one connectivity window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVerdict {
    pub index: usize,
    pub phases: Range<usize>,
    pub length: f64,
    pub exceeds_t_c: bool,
    /// 1-based labels of followers the window's union graph leaves
    /// unreachable from the leader.
    pub unreachable: Vec<usize>,
}

impl WindowVerdict {
    pub fn passes(&self) -> bool {
        !self.exceeds_t_c && self.unreachable.is_empty()
    }
}

/// Result of checking a schedule against the connectivity-window and
/// dwell-time assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    pub windows: Vec<WindowVerdict>,
    /// Phase indices whose duration is below the dwell floor.
    pub dwell_violations: Vec<usize>,
    pub t_c: f64,
    pub dwell_floor: f64,
}

impl ScheduleReport {
    pub fn is_valid(&self) -> bool {
        self.dwell_violations.is_empty() && self.windows.iter().all(WindowVerdict::passes)
    }
}

impl fmt::Display for ScheduleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.windows {
            write!(
                f,
                "window {} (phases {}..{}): length {:.6}",
                w.index, w.phases.start, w.phases.end, w.length
            )?;
            if w.passes() {
                writeln!(f, " ok")?;
                continue;
            }
            if w.exceeds_t_c {
                write!(f, "; window exceeds T_c ({:.6} > {:.6})", w.length, self.t_c)?;
            }
            if !w.unreachable.is_empty() {
                write!(f, "; union leaves follower")?;
                if w.unreachable.len() > 1 {
                    write!(f, "s")?;
                }
                for (k, label) in w.unreachable.iter().enumerate() {
                    write!(f, "{}{label}", if k == 0 { " " } else { ", " })?;
                }
                write!(f, " unreachable from the leader")?;
            }
            writeln!(f)?;
        }
        if self.dwell_violations.is_empty() {
            writeln!(f, "dwell floor {:.6}: ok", self.dwell_floor)?;
        } else {
            writeln!(
                f,
                "dwell floor {:.6}: violated by phases {:?}",
                self.dwell_floor, self.dwell_violations
            )?;
        }
        write!(f, "schedule {}", if self.is_valid() { "valid" } else { "INVALID" })
    }
}

/// Checks every connectivity window (length within `T_c`, union graph
/// leader-reachable) and the dwell floor.
pub fn validate_schedule(schedule: &SwitchingSchedule) -> ScheduleReport {
    let windows = (0..schedule.n_windows())
        .map(|k| {
            let phases = schedule.window(k).expect("window index in range");
            let length: f64 = schedule.phases[phases.clone()].iter().map(|p| p.duration).sum();
            let members: Vec<FollowerTopology> = schedule.phases[phases.clone()]
                .iter()
                .map(|p| schedule.topologies[p.topology].clone())
                .collect();
            let union = union_topology(&members).expect("schedule topologies share N");
            WindowVerdict {
                index: k,
                phases,
                length,
                exceeds_t_c: length > schedule.t_c * (1.0 + TIME_SLACK),
                unreachable: unreachable_followers(&union),
            }
        })
        .collect();
    let dwell_violations = schedule
        .phases
        .iter()
        .enumerate()
        .filter(|(_, p)| p.duration < schedule.dwell_floor * (1.0 - TIME_SLACK))
        .map(|(k, _)| k)
        .collect();
    ScheduleReport {
        windows,
        dwell_violations,
        t_c: schedule.t_c,
        dwell_floor: schedule.dwell_floor,
    }
}
