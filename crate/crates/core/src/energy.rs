//! Energy accounting over one serving period and the delay constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_lengths, tx_powers, Scenario};
use crate::schedule::max_line_sum;
use crate::waterfill::{StmSet, TrafficMatrix};

/// Per-satellite uplink and downlink rates (bits/s): row and column sums
/// of the traffic matrix spread over one orbit.
pub fn arrival_rates(traffic: &TrafficMatrix, period_s: f64) -> (Vec<f64>, Vec<f64>) {
    let s = traffic.size();
    let lambda = (0..s).map(|i| traffic.row_sum(i) / period_s).collect();
    let mu = (0..s).map(|j| traffic.col_sum(j) / period_s).collect();
    (lambda, mu)
}

/// A point in the allocation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVars {
    /// Serving-period multiplier.
    pub n0: f64,
    /// Fraction of each window spent relaying.
    pub alpha: f64,
    /// 1-based relay anchor.
    pub k_star: usize,
    pub ground_time_s: Vec<f64>,
    pub balloon_time_s: Vec<f64>,
    pub satellite_time_s: Vec<f64>,
    /// Schedule budget above the satellite count, `Phi_v - S`, per segment.
    /// Read only for segments that carry traffic.
    pub phi_prime: Vec<f64>,
}

impl DecisionVars {
    fn validate(&self, s: usize) -> Result<()> {
        if self.k_star < 1 || self.k_star > s {
            return Err(Error::invalid(format!("k* = {} outside 1..={s}", self.k_star)));
        }
        if !(self.n0.is_finite() && self.n0 >= 1.0) {
            return Err(Error::invalid(format!("n0 must be at least 1, got {}", self.n0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        for (name, v) in [
            ("ground_time_s", &self.ground_time_s),
            ("balloon_time_s", &self.balloon_time_s),
            ("satellite_time_s", &self.satellite_time_s),
            ("phi_prime", &self.phi_prime),
        ] {
            if v.len() != s {
                return Err(Error::invalid(format!("{name} has {} entries, expected {s}", v.len())));
            }
        }
        let times = self
            .ground_time_s
            .iter()
            .chain(&self.balloon_time_s)
            .chain(&self.satellite_time_s);
        if times.clone().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("transmission times must be positive"));
        }
        Ok(())
    }

    /// Integer schedule budgets `Phi_v = Phi'_v + S`, rounded to nearest.
    pub fn phi_counts(&self) -> Vec<usize> {
        let s = self.phi_prime.len();
        self.phi_prime
            .iter()
            .map(|p| (p.max(0.0).round() as usize) + s)
            .collect()
    }
}

/// Segments carrying traffic: 0-based index and largest line sum.
pub fn active_segments(stms: &StmSet) -> Vec<(usize, f64)> {
    stms.stms
        .iter()
        .enumerate()
        .skip(stms.k_star - 1)
        .map(|(v, m)| (v, max_line_sum(m)))
        .filter(|&(_, a)| a > 0.0)
        .collect()
}

/// Time of one schedule in segment `v`, `n0 * phi * A~_v / Phi'_v + delta`.
pub fn schedule_time(scenario: &Scenario, n0: f64, atilde: f64, phi_prime: f64) -> f64 {
    n0 * scenario.bit_time_s() * atilde / phi_prime + scenario.schedule_overhead_s()
}

/// Time-weighted average of active lasers per satellite.
pub fn average_lasers(scenario: &Scenario, vars: &DecisionVars, stms: &StmSet) -> f64 {
    let s = scenario.satellites as f64;
    let busy: f64 = active_segments(stms)
        .into_iter()
        .map(|(v, a)| {
            let p = vars.phi_prime[v];
            (p + s) * schedule_time(scenario, vars.n0, a, p)
        })
        .sum();
    busy / (vars.alpha * scenario.windows_s[vars.k_star - 1])
}

/// Energy of one serving period split by pipeline step (J).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub caching: f64,
    pub computing: f64,
    pub ground_tx: f64,
    pub balloon_tx: f64,
    pub satellite_tx: f64,
    pub laser_static: f64,
    pub laser_dynamic: f64,
    pub laser_launch: f64,
    pub total: f64,
    /// Bits delivered per serving period.
    pub throughput: f64,
    /// Bits per joule; zero without traffic.
    pub efficiency: f64,
}

fn check_inputs(scenario: &Scenario, traffic: &TrafficMatrix, vars: &DecisionVars, stms: &StmSet) -> Result<()> {
    let s = scenario.satellites;
    if traffic.size() != s || stms.stms.len() != s {
        return Err(Error::invalid(format!("traffic must be {s}x{s}")));
    }
    vars.validate(s)?;
    if stms.k_star != vars.k_star {
        return Err(Error::invalid(format!(
            "traffic split for k* = {} but variables use k* = {}",
            stms.k_star, vars.k_star
        )));
    }
    for (v, _) in active_segments(stms) {
        if !(vars.phi_prime[v] > 0.0) {
            return Err(Error::invalid(format!("segment {} needs Phi' > 0", v + 1)));
        }
    }
    Ok(())
}

/// Exact energy accounting. Constraint violations are not checked here.
pub fn energy_breakdown(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    vars: &DecisionVars,
    stms: &StmSet,
) -> Result<EnergyBreakdown> {
    check_inputs(scenario, traffic, vars, stms)?;
    let s = scenario.satellites;
    let sf = s as f64;
    let period = scenario.period_s;
    let (lambda, mu) = arrival_rates(traffic, period);
    let bits = traffic.total();
    let n0 = vars.n0;

    let caching: f64 = lambda
        .iter()
        .map(|l| scenario.caching_power * l * n0 * period)
        .sum();
    let computing = scenario.computing_power * scenario.compute_load * sf;

    let (mut ground_tx, mut balloon_tx, mut satellite_tx) = (0.0, 0.0, 0.0);
    for i in 0..s {
        let (tg, tb, td) = (
            vars.ground_time_s[i],
            vars.balloon_time_s[i],
            vars.satellite_time_s[i],
        );
        let p = tx_powers(scenario, i, n0, tg, tb, td, lambda[i], mu[i])?;
        ground_tx += p.ground * tg;
        balloon_tx += p.balloon * tb;
        satellite_tx += p.satellite * td;
    }

    let relay = vars.alpha * scenario.windows_s[vars.k_star - 1];
    let (mut weighted, mut launch) = (0.0, 0.0);
    for (v, a) in active_segments(stms) {
        let p = vars.phi_prime[v];
        let phi = p + sf;
        let t = schedule_time(scenario, n0, a, p);
        weighted += phi * t;
        launch += scenario.laser_launch * phi * phi / relay * t * sf * scenario.align_delay_s;
    }
    let laser_static = n0 * bits * scenario.laser_static * sf * weighted
        / (vars.alpha * relay);
    let laser_dynamic = scenario.isl_capacity_bps * scenario.laser_dynamic * sf * weighted;

    let total = caching
        + computing
        + ground_tx
        + balloon_tx
        + satellite_tx
        + laser_static
        + laser_dynamic
        + launch;
    let throughput = n0 * period * lambda.iter().sum::<f64>();
    Ok(EnergyBreakdown {
        caching,
        computing,
        ground_tx,
        balloon_tx,
        satellite_tx,
        laser_static,
        laser_dynamic,
        laser_launch: launch,
        total,
        throughput,
        efficiency: if throughput > 0.0 { throughput / total } else { 0.0 },
    })
}

/// Scale dividing the radio energy in the optimization objective,
/// `10^(c/10) sigma^2`.
pub fn objective_scale(scenario: &Scenario) -> f64 {
    10f64.powf(scenario.link_loss_db / 10.0) * scenario.noise_psd
}

/// Optimization objective with exact exponentials: non-caching energy over
/// `objective_scale * n0`. Caching costs a fixed amount per bit, so
/// `1 / efficiency = (objective_scale * n0 * p2 + caching) / throughput`.
pub fn p2_objective(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    vars: &DecisionVars,
    stms: &StmSet,
) -> Result<f64> {
    let e = energy_breakdown(scenario, traffic, vars, stms)?;
    Ok((e.total - e.caching) / (objective_scale(scenario) * vars.n0))
}

/// Normalized slacks `1 - lhs / rhs`; negative means violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Ground leg and computing fit before the window, per satellite.
    pub ground: Vec<f64>,
    /// Radio legs and relay fit inside the window, per satellite.
    pub window: Vec<f64>,
    /// Average lasers within the limit.
    pub lasers: f64,
    /// One schedule fits its segment, per traffic-carrying segment
    /// (1-based index, slack).
    pub segments: Vec<(usize, f64)>,
    pub n0_lower: f64,
    pub n0_upper: f64,
    /// `min(alpha, 1 - alpha)`.
    pub alpha: f64,
}

impl ConstraintReport {
    /// Smallest slack with a label naming the constraint.
    pub fn most_violated(&self) -> (String, f64) {
        let mut worst = ("n0 >= 1".to_string(), self.n0_lower);
        let mut consider = |name: String, v: f64| {
            if v < worst.1 || v.is_nan() {
                worst = (name, v);
            }
        };
        for (i, &v) in self.ground.iter().enumerate() {
            consider(format!("ground timing of satellite {}", i + 1), v);
        }
        for (i, &v) in self.window.iter().enumerate() {
            consider(format!("window timing of satellite {}", i + 1), v);
        }
        consider("average lasers".into(), self.lasers);
        for &(v, x) in &self.segments {
            consider(format!("schedule fit in segment {v}"), x);
        }
        consider("n0 <= n_max".into(), self.n0_upper);
        consider("0 < alpha < 1".into(), self.alpha);
        worst
    }

    pub fn min_slack(&self) -> f64 {
        self.most_violated().1
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
    }
}

fn slack(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        1.0 - lhs / rhs
    } else {
        f64::NEG_INFINITY
    }
}

/// Evaluates every timing and resource constraint at `vars`.
pub fn check_constraints(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    vars: &DecisionVars,
    stms: &StmSet,
) -> Result<ConstraintReport> {
    let s = scenario.satellites;
    if traffic.size() != s || stms.stms.len() != s {
        return Err(Error::invalid(format!("traffic must be {s}x{s}")));
    }
    if stms.k_star != vars.k_star {
        return Err(Error::invalid("traffic split and variables disagree on k*"));
    }
    let c = scenario.light_speed_km_s;
    let period = scenario.period_s;
    let compute = scenario.compute_load * vars.n0 * traffic.total() / scenario.pool_capacity;
    let anchor = scenario.windows_s[vars.k_star - 1];
    let tau = segment_lengths(&scenario.windows_s)?;

    let ground = (0..s)
        .map(|i| {
            let rhs = period - scenario.heights_km[i] / c - scenario.windows_s[i];
            slack(vars.ground_time_s[i] + compute, rhs)
        })
        .collect();
    let window = (0..s)
        .map(|i| {
            let w = scenario.windows_s[i];
            let rhs = w - 2.0 * scenario.slant_km(i) / c;
            let relay = vars.alpha * if i + 1 >= vars.k_star { w } else { anchor };
            slack(vars.balloon_time_s[i] + vars.satellite_time_s[i] + relay, rhs)
        })
        .collect();
    let segments = active_segments(stms)
        .into_iter()
        .map(|(v, a)| {
            let t = schedule_time(scenario, vars.n0, a, vars.phi_prime[v]);
            (v + 1, slack(t, vars.alpha * tau[v]))
        })
        .collect();
    Ok(ConstraintReport {
        ground,
        window,
        lasers: slack(average_lasers(scenario, vars, stms), scenario.m_max),
        segments,
        n0_lower: slack(1.0, vars.n0),
        n0_upper: slack(vars.n0, scenario.n_max as f64),
        alpha: vars.alpha.min(1.0 - vars.alpha),
    })
}
