//! Configuration-matrix schedules for inter-satellite relaying.
//!
//! A segment's traffic matrix is covered by 0/1 matrices with at most one
//! active link per row and per column. With a budget of `Phi > S` schedules
//! the per-schedule payload is `n0 * A~ / (Phi - S)`, where `A~` is the
//! largest row or column sum. The quotient of the traffic by that payload is
//! a bipartite multigraph of degree at most `Phi - S`, which splits into that
//! many matchings; the remainders fit on at most `S` cyclic diagonals.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scenario;
use crate::waterfill::{StmSet, TrafficMatrix};

/// Largest row or column sum.
pub fn max_line_sum(m: &TrafficMatrix) -> f64 {
    (0..m.size())
        .flat_map(|k| [m.row_sum(k), m.col_sum(k)])
        .fold(0.0, f64::max)
}

/// Bits carried per active link in one schedule, `n0 * A~ / (Phi - S)`.
pub fn varphi(atilde: f64, phi_count: usize, satellites: usize, n0: f64) -> Result<f64> {
    if phi_count <= satellites {
        return Err(Error::invalid(format!(
            "schedule budget {phi_count} must exceed the satellite count {satellites}"
        )));
    }
    Ok(n0 * atilde / (phi_count - satellites) as f64)
}

/// One schedule: a partial permutation with a payload per active link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationMatrix {
    size: usize,
    /// Target of each source row, if active.
    targets: Vec<Option<usize>>,
    coefficient: f64,
}

impl ConfigurationMatrix {
    pub fn new(size: usize, links: &[(usize, usize)], coefficient: f64) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0) {
            return Err(Error::invalid(format!("coefficient must be positive, got {coefficient}")));
        }
        let mut targets = vec![None; size];
        let mut used = vec![false; size];
        for &(i, j) in links {
            if i >= size || j >= size {
                return Err(Error::invalid(format!("link ({i}, {j}) outside {size}x{size}")));
            }
            if targets[i].is_some() || used[j] {
                return Err(Error::invalid(format!("link ({i}, {j}) reuses a row or column")));
            }
            targets[i] = Some(j);
            used[j] = true;
        }
        Ok(Self {
            size,
            targets,
            coefficient,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        u8::from(self.targets[i] == Some(j))
    }

    /// Active `(source, target)` links in row order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|j| (i, j)))
    }

    pub fn link_count(&self) -> usize {
        self.targets.iter().flatten().count()
    }
}

/// Splits `n0 * A` into a multiple of `coefficient` and a remainder:
/// `n0 a_ij = coefficient * q_ij + r_ij` with `0 <= r_ij < coefficient`.
pub fn quotient_remainder(a: &TrafficMatrix, coefficient: f64, n0: f64) -> (Vec<u64>, Vec<f64>) {
    a.as_slice()
        .iter()
        .map(|&x| {
            let target = n0 * x;
            let mut q = (target / coefficient).floor();
            let mut r = target - q * coefficient;
            if r >= coefficient {
                q += 1.0;
                r = target - q * coefficient;
            }
            (q as u64, r.max(0.0))
        })
        .unzip()
}

/// Covers `n0 * A` with at most `phi_count` configuration matrices of equal
/// coefficient. Returns an empty list for an all-zero matrix.
pub fn decompose(a: &TrafficMatrix, phi_count: usize, n0: f64) -> Result<Vec<ConfigurationMatrix>> {
    let s = a.size();
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::invalid(format!("n0 must be positive, got {n0}")));
    }
    let atilde = max_line_sum(a);
    let coefficient = varphi(atilde, phi_count, s, n0)?;
    if atilde == 0.0 {
        return Ok(Vec::new());
    }
    let (q, r) = quotient_remainder(a, coefficient, n0);
    let budget = (phi_count - s) as u64;

    let mut out = Vec::new();
    for links in edge_color(s, q, budget)? {
        out.push(ConfigurationMatrix::new(s, &links, coefficient)?);
    }
    for d in 0..s {
        let links: Vec<_> = (0..s)
            .map(|i| (i, (i + d) % s))
            .filter(|&(i, j)| r[i * s + j] > 0.0)
            .collect();
        if !links.is_empty() {
            out.push(ConfigurationMatrix::new(s, &links, coefficient)?);
        }
    }
    debug_assert!(out.len() <= phi_count);
    Ok(out)
}

/// Splits the bipartite multigraph `q` (row-major multiplicities) into
/// matchings, one per unit of its maximum degree.
///
/// The graph is first padded to a regular one with dummy multiplicities, so
/// every round has a perfect matching and every maximum-degree line is
/// covered. Dummy edges are dropped from the emitted matchings.
fn edge_color(s: usize, mut q: Vec<u64>, budget: u64) -> Result<Vec<Vec<(usize, usize)>>> {
    let row = |q: &[u64], i: usize| -> u64 { q[i * s..(i + 1) * s].iter().sum() };
    let col = |q: &[u64], j: usize| -> u64 { (0..s).map(|i| q[i * s + j]).sum() };
    let degree = (0..s)
        .map(|k| row(&q, k).max(col(&q, k)))
        .max()
        .unwrap_or(0);
    if degree > budget {
        return Err(Error::Infeasible(format!(
            "quotient degree {degree} exceeds the schedule budget {budget}"
        )));
    }

    // northwest-corner fill of the row/column deficits
    let mut row_gap: Vec<u64> = (0..s).map(|i| degree - row(&q, i)).collect();
    let mut col_gap: Vec<u64> = (0..s).map(|j| degree - col(&q, j)).collect();
    let mut pad = vec![0u64; s * s];
    let (mut i, mut j) = (0, 0);
    while i < s && j < s {
        let take = row_gap[i].min(col_gap[j]);
        pad[i * s + j] += take;
        row_gap[i] -= take;
        col_gap[j] -= take;
        if row_gap[i] == 0 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut rounds = Vec::with_capacity(degree as usize);
    for _ in 0..degree {
        let matching = perfect_matching(s, |i, j| q[i * s + j] + pad[i * s + j] > 0).ok_or_else(|| {
            Error::Infeasible("regular multigraph without a perfect matching".into())
        })?;
        let mut links = Vec::new();
        for (i, j) in matching.into_iter().enumerate() {
            let k = i * s + j;
            if q[k] > 0 {
                q[k] -= 1;
                links.push((i, j));
            } else {
                pad[k] -= 1;
            }
        }
        if !links.is_empty() {
            rounds.push(links);
        }
    }
    Ok(rounds)
}

/// Kuhn's augmenting-path matching; returns the column matched to each row.
fn perfect_matching(s: usize, edge: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    fn augment(
        i: usize,
        s: usize,
        edge: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..s {
            if edge(i, j) && !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|o| augment(o, s, edge, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }

    let mut owner = vec![None; s];
    for i in 0..s {
        let mut seen = vec![false; s];
        if !augment(i, s, &edge, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut target = vec![0; s];
    for (j, o) in owner.iter().enumerate() {
        target[o.expect("perfect matching covers every column")] = j;
    }
    Some(target)
}

/// Lasers needed in one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserCount {
    /// Time of one schedule: payload transfer plus overhead (s).
    pub schedule_time: f64,
    pub real: f64,
    pub count: u32,
    /// Whether one schedule fits in the segment, `schedule_time <= alpha tau`.
    pub fits: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn lasers(
    atilde: f64,
    phi_count: usize,
    satellites: usize,
    n0: f64,
    bit_time: f64,
    overhead: f64,
    alpha: f64,
    tau: f64,
) -> Result<LaserCount> {
    if phi_count <= satellites {
        return Err(Error::invalid(format!(
            "schedule budget {phi_count} must exceed the satellite count {satellites}"
        )));
    }
    let span = alpha * tau;
    if !(span > 0.0) {
        return Err(Error::invalid(format!("segment length alpha * tau = {span} must be positive")));
    }
    let schedule_time = n0 * bit_time * atilde / (phi_count - satellites) as f64 + overhead;
    let real = phi_count as f64 / span * schedule_time;
    Ok(LaserCount {
        schedule_time,
        real,
        count: real.ceil() as u32,
        fits: schedule_time <= span,
    })
}

/// Plan for one traffic-carrying segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    /// 1-based segment index.
    pub segment: usize,
    pub tau: f64,
    pub atilde: f64,
    pub phi_count: usize,
    pub varphi: f64,
    pub lasers: LaserCount,
    pub matrices: Vec<ConfigurationMatrix>,
}

/// Time-weighted average of active lasers over the relay budget.
pub fn avg_lasers(segments: &[SegmentPlan], alpha: f64, window_kstar: f64) -> f64 {
    let busy: f64 = segments
        .iter()
        .map(|p| p.phi_count as f64 * p.lasers.schedule_time)
        .sum();
    if busy == 0.0 {
        0.0
    } else {
        busy / (alpha * window_kstar)
    }
}

/// Schedules for all relay segments. Segments without traffic need no
/// schedules and are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub k_star: usize,
    pub n0: f64,
    pub alpha: f64,
    pub relay_budget: f64,
    pub segments: Vec<SegmentPlan>,
    pub m_bar: f64,
}

impl SchedulePlan {
    /// Builds the plan. `phi_counts[v]` is the schedule budget of segment
    /// `v + 1` and is only read for segments that carry traffic.
    /// Configuration matrices are generated only when `with_matrices` is set.
    pub fn build(
        scenario: &Scenario,
        stms: &StmSet,
        phi_counts: &[usize],
        n0: f64,
        alpha: f64,
        with_matrices: bool,
    ) -> Result<Self> {
        let s = scenario.satellites;
        if stms.stms.len() != s || phi_counts.len() != s {
            return Err(Error::invalid("plan inputs must cover every segment"));
        }
        let tau = crate::geometry::segment_lengths(&scenario.windows_s)?;
        let k = stms.k_star;
        let mut segments = Vec::new();
        for v in k - 1..s {
            let atilde = max_line_sum(&stms.stms[v]);
            if atilde == 0.0 {
                continue;
            }
            let phi_count = phi_counts[v];
            let lasers = lasers(
                atilde,
                phi_count,
                s,
                n0,
                scenario.bit_time_s(),
                scenario.schedule_overhead_s(),
                alpha,
                tau[v],
            )?;
            let matrices = if with_matrices {
                decompose(&stms.stms[v], phi_count, n0)?
            } else {
                Vec::new()
            };
            segments.push(SegmentPlan {
                segment: v + 1,
                tau: tau[v],
                atilde,
                phi_count,
                varphi: varphi(atilde, phi_count, s, n0)?,
                lasers,
                matrices,
            });
        }
        let window = scenario.windows_s[k - 1];
        Ok(Self {
            k_star: k,
            n0,
            alpha,
            relay_budget: alpha * window,
            m_bar: avg_lasers(&segments, alpha, window),
            segments,
        })
    }

    /// Line-oriented text dump:
    ///
    /// ```text
    /// schedule-plan v1
    /// k_star <k> n0 <n0> alpha <alpha> relay_budget <s> m_bar <m>
    /// segment <v> tau <s> atilde <bits> phi <count> varphi <bits> schedule_time <s> m_real <x> m <count> fits <bool> matrices <count>
    ///   matrix <index> coeff <bits> links <i>-><j> ...
    /// ```
    ///
    /// Satellite indices in links are 1-based.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SchedulePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "schedule-plan v1")?;
        writeln!(
            f,
            "k_star {} n0 {} alpha {} relay_budget {} m_bar {}",
            self.k_star, self.n0, self.alpha, self.relay_budget, self.m_bar
        )?;
        for seg in &self.segments {
            writeln!(
                f,
                "segment {} tau {} atilde {} phi {} varphi {} schedule_time {} m_real {} m {} fits {} matrices {}",
                seg.segment,
                seg.tau,
                seg.atilde,
                seg.phi_count,
                seg.varphi,
                seg.lasers.schedule_time,
                seg.lasers.real,
                seg.lasers.count,
                seg.lasers.fits,
                seg.matrices.len()
            )?;
            for (idx, m) in seg.matrices.iter().enumerate() {
                let mut links = String::new();
                for (i, j) in m.links() {
                    write!(links, " {}->{}", i + 1, j + 1)?;
                }
                writeln!(f, "  matrix {} coeff {} links{}", idx + 1, m.coefficient(), links)?;
            }
        }
        Ok(())
    }
}
