//! Allocation search: the truncated geometric program, its refinement in
//! the Taylor order, integer rounding, and the search over `k*`.

mod build;
mod gp;

use serde::{Deserialize, Serialize};

pub use build::{build_gp, build_gp_fixed, Fixings, GpModel, Slot, IDLE_TIME_S};
pub use gp::{
    solve_gp, solve_gp_with, Constraint, GpProblem, GpSolution, Monomial, Posynomial,
    SolverOptions,
};

use crate::energy::{
    active_segments, average_lasers, check_constraints, energy_breakdown, p2_objective,
    ConstraintReport, DecisionVars, EnergyBreakdown,
};
use crate::error::{Error, Result};
use crate::geometry::{segment_lengths, Scenario};
use crate::schedule::SchedulePlan;
use crate::waterfill::{tgwf, StmSet, TrafficMatrix};

/// Largest Taylor order tried before giving up.
pub const T_MAX_CAP: usize = 30;
/// Relative efficiency change that ends the Taylor-order refinement.
pub const EFFICIENCY_RTOL: f64 = 1e-4;
/// Slack tolerance for accepting a rounded point.
pub const FEASIBILITY_TOL: f64 = 1e-8;
const MAX_BUMPS: usize = 200;

/// Comparison variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Full search over all variables and `k*`.
    Joint,
    /// `alpha = 0.5` and `k* = 1`.
    FixedAlpha,
    /// `n0 = 1` and `k* = 1`.
    SingleOrbit,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Joint, Scheme::FixedAlpha, Scheme::SingleOrbit];

    pub fn id(self) -> u8 {
        match self {
            Scheme::Joint => 1,
            Scheme::FixedAlpha => 2,
            Scheme::SingleOrbit => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Scheme::Joint),
            2 => Ok(Scheme::FixedAlpha),
            3 => Ok(Scheme::SingleOrbit),
            _ => Err(Error::invalid(format!("unknown scheme {id}; expected 1, 2 or 3"))),
        }
    }
}

/// Outcome of one `k*` candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStarStep {
    pub k_star: usize,
    pub efficiency: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub scheme: Scheme,
    pub vars: DecisionVars,
    pub stms: StmSet,
    pub energy: EnergyBreakdown,
    /// Exact efficiency (bits/J).
    pub efficiency: f64,
    /// Truncated objective at `vars`.
    pub objective: f64,
    /// Objective with exact exponentials at `vars`.
    pub exact_objective: f64,
    pub m_bar: f64,
    pub t_max: usize,
    pub converged: bool,
    /// Newton steps over every solve behind this result.
    pub iterations: usize,
    pub gap: f64,
    pub stationarity: f64,
    pub max_violation: f64,
    pub constraints: ConstraintReport,
    pub k_star_trace: Vec<KStarStep>,
}

impl SolveResult {
    /// Integer schedule budgets `Phi_v`.
    pub fn phi_counts(&self) -> Vec<usize> {
        self.vars.phi_counts()
    }

    pub fn plan(&self, scenario: &Scenario, with_matrices: bool) -> Result<SchedulePlan> {
        SchedulePlan::build(
            scenario,
            &self.stms,
            &self.phi_counts(),
            self.vars.n0,
            self.vars.alpha,
            with_matrices,
        )
    }
}

/// Full search (scheme 1).
pub fn algorithm2(scenario: &Scenario, traffic: &TrafficMatrix) -> Result<SolveResult> {
    scheme(scenario, traffic, Scheme::Joint)
}

pub fn scheme(scenario: &Scenario, traffic: &TrafficMatrix, variant: Scheme) -> Result<SolveResult> {
    if traffic.size() != scenario.satellites {
        return Err(Error::invalid(format!(
            "traffic is {0}x{0} but the scenario has {1} satellites",
            traffic.size(),
            scenario.satellites
        )));
    }
    let mut fix = Fixings::default();
    match variant {
        Scheme::Joint => return search_k_star(scenario, traffic),
        Scheme::FixedAlpha => fix.alpha = Some(0.5),
        Scheme::SingleOrbit => fix.n0 = Some(1.0),
    }
    let mut r = solve_for_k(scenario, traffic, 1, &fix)?;
    r.scheme = variant;
    r.k_star_trace = vec![KStarStep {
        k_star: 1,
        efficiency: Some(r.efficiency),
        note: None,
    }];
    Ok(r)
}

/// Advances `k*` while the efficiency strictly improves. Candidates that
/// fail before the first feasible one are skipped.
fn search_k_star(scenario: &Scenario, traffic: &TrafficMatrix) -> Result<SolveResult> {
    let mut best: Option<SolveResult> = None;
    let mut trace = Vec::new();
    for k in 1..=scenario.satellites {
        match solve_for_k(scenario, traffic, k, &Fixings::default()) {
            Ok(r) => {
                trace.push(KStarStep {
                    k_star: k,
                    efficiency: Some(r.efficiency),
                    note: None,
                });
                match &best {
                    Some(b) if r.efficiency <= b.efficiency => break,
                    _ => best = Some(r),
                }
            }
            Err(e @ (Error::Infeasible(_) | Error::NotConverged(_))) => {
                trace.push(KStarStep {
                    k_star: k,
                    efficiency: None,
                    note: Some(e.to_string()),
                });
                if best.is_some() {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(mut b) => {
            b.k_star_trace = trace;
            Ok(b)
        }
        None => {
            let why: Vec<String> = trace
                .iter()
                .map(|s| format!("k*={}: {}", s.k_star, s.note.as_deref().unwrap_or("?")))
                .collect();
            Err(Error::Infeasible(why.join("; ")))
        }
    }
}

/// Splits the traffic for `k`, then raises the Taylor order until the
/// rounded solution's exact efficiency settles.
pub fn solve_for_k(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    k: usize,
    fix: &Fixings,
) -> Result<SolveResult> {
    // water-filling is invariant to a common scaling of the widths, so the
    // split does not depend on alpha
    let tau = segment_lengths(&scenario.windows_s)?;
    let stms = tgwf(traffic, k, &tau)?;
    let mut previous: Option<SolveResult> = None;
    let mut warm: Option<Vec<f64>> = None;
    let mut iterations = 0;
    for t_max in 1..=T_MAX_CAP {
        let model = build_gp_fixed(scenario, traffic, &stms, t_max, fix)?;
        let x0 = match &warm {
            Some(x) => model.reseed(x),
            None => model.initial_point(),
        };
        let sol = solve_gp(&model.problem, &x0)?;
        iterations += sol.newton_iterations + sol.phase_one_iterations;
        let mut r = round(scenario, traffic, &stms, t_max, fix, &model.vars(&sol.x))?;
        iterations += r.iterations;
        r.iterations = iterations;
        if let Some(p) = &previous {
            let change = (r.efficiency - p.efficiency).abs();
            if change <= EFFICIENCY_RTOL * r.efficiency.abs() {
                r.converged = true;
                return Ok(r);
            }
        }
        previous = Some(r);
        warm = Some(sol.x);
    }
    Err(Error::NotConverged(format!(
        "k*={k}: efficiency still moving at Taylor order {T_MAX_CAP}"
    )))
}

/// Rounds `Phi'` up and `n0` both ways, re-solving the GP with those held
/// fixed, and keeps the most efficient feasible candidate. A schedule
/// budget is raised while its segment cannot fit one schedule.
fn round(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    stms: &StmSet,
    t_max: usize,
    fix: &Fixings,
    relaxed: &DecisionVars,
) -> Result<SolveResult> {
    let s = scenario.satellites;
    let active = active_segments(stms);
    let tau = segment_lengths(&scenario.windows_s)?;
    let mut base_phi = vec![0.0; s];
    for &(v, _) in &active {
        base_phi[v] = relaxed.phi_prime[v].ceil().max(1.0);
    }
    let n_max = scenario.n_max as f64;
    let mut candidates = match fix.n0 {
        Some(n) => vec![n],
        None => vec![relaxed.n0.floor(), relaxed.n0.ceil()],
    };
    for c in &mut candidates {
        *c = c.clamp(1.0, n_max.max(1.0));
    }
    candidates.dedup();

    let mut best: Option<SolveResult> = None;
    let mut notes = Vec::new();
    let mut iterations = 0;
    for n0 in candidates {
        let mut phi = base_phi.clone();
        for _ in 0..MAX_BUMPS {
            let f = Fixings {
                alpha: fix.alpha,
                n0: Some(n0),
                phi_prime: Some(phi.clone()),
            };
            let attempt = build_gp_fixed(scenario, traffic, stms, t_max, &f).and_then(|model| {
                let mut start = relaxed.clone();
                start.n0 = n0;
                let sol = solve_gp(&model.problem, &model.point(&start))?;
                Ok((model, sol))
            });
            match attempt {
                Ok((model, sol)) => {
                    iterations += sol.newton_iterations + sol.phase_one_iterations;
                    let r = evaluate(scenario, traffic, stms, &model, &sol)?;
                    if r.constraints.is_feasible(FEASIBILITY_TOL) {
                        if best.as_ref().is_none_or(|b| r.efficiency > b.efficiency) {
                            best = Some(r);
                        }
                    } else {
                        notes.push(format!("n0={n0}: {:?}", r.constraints.most_violated()));
                    }
                    break;
                }
                Err(Error::Infeasible(msg)) => {
                    // raise the budgets of segments that cannot fit a schedule
                    // even at the largest relay fraction
                    let alpha_hi = fix.alpha.unwrap_or(1.0);
                    let mut bumped = false;
                    for &(v, a) in &active {
                        let t = n0 * scenario.bit_time_s() * a / phi[v] + scenario.schedule_overhead_s();
                        if t >= alpha_hi * tau[v] {
                            phi[v] += 1.0;
                            bumped = true;
                        }
                    }
                    let probe = DecisionVars {
                        n0,
                        alpha: alpha_hi,
                        phi_prime: phi.clone(),
                        ..relaxed.clone()
                    };
                    if !bumped || average_lasers(scenario, &probe, stms) > scenario.m_max {
                        notes.push(format!("n0={n0}: {msg}"));
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    match best {
        Some(mut b) => {
            b.iterations = iterations;
            Ok(b)
        }
        None => Err(Error::Infeasible(format!(
            "k*={}: no feasible integer point ({})",
            stms.k_star,
            notes.join("; ")
        ))),
    }
}

fn evaluate(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    stms: &StmSet,
    model: &GpModel,
    sol: &GpSolution,
) -> Result<SolveResult> {
    let vars = model.vars(&sol.x);
    let energy = energy_breakdown(scenario, traffic, &vars, stms)?;
    Ok(SolveResult {
        scheme: Scheme::Joint,
        efficiency: energy.efficiency,
        objective: model.energy.eval(&sol.x),
        exact_objective: p2_objective(scenario, traffic, &vars, stms)?,
        m_bar: average_lasers(scenario, &vars, stms),
        t_max: model.t_max,
        converged: false,
        iterations: sol.newton_iterations + sol.phase_one_iterations,
        gap: sol.gap,
        stationarity: sol.stationarity,
        max_violation: sol.max_violation,
        constraints: check_constraints(scenario, traffic, &vars, stms)?,
        k_star_trace: Vec::new(),
        stms: stms.clone(),
        energy,
        vars,
    })
}
