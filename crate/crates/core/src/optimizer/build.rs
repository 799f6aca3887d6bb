//! Transcription of the allocation problem into a geometric program.
//!
//! Each exponential `2^(bits / (B T)) - 1` in the radio energy is replaced by
//! its Taylor polynomial of order `t_max`, which is a posynomial in `n0` and
//! `T`. The objective becomes the epigraph variable `F` with the truncated
//! energy bounded by `F`. All terms carry the scaling `1 / (10^(c/10)
//! sigma^2 n0)`, so the radio terms lose their noise and path-loss factors.

use std::f64::consts::LN_2;

use crate::energy::{active_segments, objective_scale, DecisionVars};
use crate::error::{Error, Result};
use crate::geometry::{segment_lengths, Scenario};
use crate::waterfill::{StmSet, TrafficMatrix};

use super::gp::{GpProblem, Monomial, Posynomial};

/// Transmission time assigned to a link that carries no data (s).
pub const IDLE_TIME_S: f64 = 1e-6;

/// A model quantity: either a GP variable or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Var(usize),
    Fixed(f64),
}

impl Slot {
    fn value(self, x: &[f64]) -> f64 {
        match self {
            Slot::Var(i) => x[i],
            Slot::Fixed(v) => v,
        }
    }
}

/// Quantities held constant in the GP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fixings {
    pub alpha: Option<f64>,
    pub n0: Option<f64>,
    /// `Phi'_v` per segment; entries for idle segments are ignored.
    pub phi_prime: Option<Vec<f64>>,
}

/// A built GP together with the map from its variables to decision
/// variables.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub problem: GpProblem,
    /// Truncated objective without the epigraph variable.
    pub energy: Posynomial,
    pub k_star: usize,
    pub t_max: usize,
    alpha: Slot,
    n0: Slot,
    ground: Vec<Slot>,
    balloon: Vec<Slot>,
    satellite: Vec<Slot>,
    phi: Vec<Option<Slot>>,
    epigraph: usize,
    init: InitData,
}

/// Constants the initializer needs.
#[derive(Debug, Clone)]
struct InitData {
    n_max: f64,
    /// Computing delay per unit of `n0` (s).
    compute: f64,
    /// Room for the ground leg and computing, per satellite (s).
    ground_room: Vec<f64>,
    /// Room for the radio legs and relay inside each window (s).
    window_room: Vec<f64>,
    /// Relay span at `alpha = 1` per satellite (s).
    relay_span: Vec<f64>,
    windows: Vec<f64>,
    /// Active segments: index, `n0`-free payload time `phi * A~`, length.
    segments: Vec<(usize, f64, f64)>,
    overhead: f64,
}

fn mono(coeff: f64, factors: &[(Slot, f64)]) -> Monomial {
    factors.iter().fold(Monomial::new(coeff), |m, &(s, e)| match s {
        Slot::Var(i) => m.with(i, e),
        Slot::Fixed(v) => Monomial {
            coeff: m.coeff * v.powf(e),
            ..m
        },
    })
}

pub fn build_gp(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    stms: &StmSet,
    t_max: usize,
) -> Result<GpModel> {
    build_gp_fixed(scenario, traffic, stms, t_max, &Fixings::default())
}

pub fn build_gp_fixed(
    scenario: &Scenario,
    traffic: &TrafficMatrix,
    stms: &StmSet,
    t_max: usize,
    fix: &Fixings,
) -> Result<GpModel> {
    let s = scenario.satellites;
    if t_max < 1 {
        return Err(Error::invalid("t_max must be at least 1"));
    }
    if traffic.size() != s || stms.stms.len() != s {
        return Err(Error::invalid(format!("traffic must be {s}x{s}")));
    }
    let k = stms.k_star;
    let sf = s as f64;
    let c = scenario.light_speed_km_s;
    let tau = segment_lengths(&scenario.windows_s)?;
    let active = active_segments(stms);
    for &(v, _) in &active {
        if tau[v] <= 0.0 {
            return Err(Error::Infeasible(format!(
                "segment {} carries traffic but has zero length",
                v + 1
            )));
        }
    }

    let mut names = Vec::new();
    let mut var = |name: String| {
        names.push(name);
        Slot::Var(names.len() - 1)
    };
    let alpha = match fix.alpha {
        Some(a) => Slot::Fixed(a),
        None => var("alpha".into()),
    };
    let n0 = match fix.n0 {
        Some(n) => Slot::Fixed(n),
        None if scenario.n_max <= 1 => Slot::Fixed(1.0),
        None => var("n0".into()),
    };
    let mut link = |prefix: &str, i: usize, busy: bool| {
        if busy {
            var(format!("{prefix}{}", i + 1))
        } else {
            Slot::Fixed(IDLE_TIME_S)
        }
    };
    let ground: Vec<Slot> = (0..s).map(|i| link("TG", i, traffic.row_sum(i) > 0.0)).collect();
    let balloon: Vec<Slot> = (0..s).map(|i| link("TB", i, traffic.row_sum(i) > 0.0)).collect();
    let satellite: Vec<Slot> = (0..s).map(|i| link("TD", i, traffic.col_sum(i) > 0.0)).collect();
    let mut phi = vec![None; s];
    for &(v, _) in &active {
        phi[v] = Some(match &fix.phi_prime {
            Some(p) => Slot::Fixed(p[v]),
            None => var(format!("Phi'{}", v + 1)),
        });
    }
    let epigraph = names.len();
    names.push("F".into());

    let scale = objective_scale(scenario);
    let total = traffic.total();
    let bit = scenario.bit_time_s();
    let delta = scenario.schedule_overhead_s();
    let anchor = scenario.windows_s[k - 1];

    let mut energy = Posynomial::new();
    for i in 0..s {
        let up = traffic.row_sum(i);
        let down = traffic.col_sum(i);
        let slant = scenario.slant_km(i);
        let legs = [
            (scenario.bandwidth_ground_hz, scenario.heights_km[i], up, ground[i]),
            (scenario.bandwidth_uplink_hz, slant, up, balloon[i]),
            (scenario.bandwidth_downlink_hz, slant, down, satellite[i]),
        ];
        for (bw, d, bits, time) in legs {
            if bits == 0.0 {
                continue;
            }
            // exponent argument is x1 * n0 / T
            let x1 = LN_2 * bits / bw;
            let mut coeff = bw * d * d / scenario.antenna_gain;
            for t in 1..=t_max {
                coeff *= x1 / t as f64;
                let tf = t as f64;
                energy.push(mono(coeff, &[(n0, tf - 1.0), (time, 1.0 - tf)]));
            }
        }
    }
    energy.push(mono(
        scenario.computing_power * scenario.compute_load * sf / scale,
        &[(n0, -1.0)],
    ));
    let c0 = sf * scenario.laser_static * total / (scale * anchor);
    let c1 = scenario.isl_capacity_bps * scenario.laser_dynamic * sf / scale;
    let c2 = scenario.laser_launch * sf * scenario.align_delay_s / (scale * anchor);
    for &(v, a) in &active {
        let p = phi[v].expect("active segment has a schedule budget");
        let pa = bit * a;
        // static: (Phi' + S)(n0 phi A~ / Phi' + delta) / alpha^2
        energy.push(mono(c0 * pa, &[(n0, 1.0), (alpha, -2.0)]));
        energy.push(mono(c0 * sf * pa, &[(n0, 1.0), (p, -1.0), (alpha, -2.0)]));
        energy.push(mono(c0 * delta, &[(p, 1.0), (alpha, -2.0)]));
        energy.push(mono(c0 * delta * sf, &[(alpha, -2.0)]));
        // dynamic: (Phi' + S)(n0 phi A~ / Phi' + delta) / n0
        energy.push(mono(c1 * pa, &[]));
        energy.push(mono(c1 * sf * pa, &[(p, -1.0)]));
        energy.push(mono(c1 * delta, &[(p, 1.0), (n0, -1.0)]));
        energy.push(mono(c1 * delta * sf, &[(n0, -1.0)]));
        // launch: (Phi' + S)^2 (n0 phi A~ / Phi' + delta) / (alpha n0)
        energy.push(mono(c2 * pa, &[(p, 1.0), (alpha, -1.0)]));
        energy.push(mono(c2 * 2.0 * sf * pa, &[(alpha, -1.0)]));
        energy.push(mono(c2 * sf * sf * pa, &[(p, -1.0), (alpha, -1.0)]));
        energy.push(mono(c2 * delta, &[(p, 2.0), (alpha, -1.0), (n0, -1.0)]));
        energy.push(mono(c2 * 2.0 * sf * delta, &[(p, 1.0), (alpha, -1.0), (n0, -1.0)]));
        energy.push(mono(c2 * sf * sf * delta, &[(alpha, -1.0), (n0, -1.0)]));
    }

    let mut problem = GpProblem::new(names);
    problem.objective.push(Monomial::new(1.0).with(epigraph, 1.0));
    problem.constrain(
        "objective bound",
        energy.clone().scaled(&Monomial::new(1.0).with(epigraph, -1.0)),
    )?;

    let compute = scenario.compute_load * total / scenario.pool_capacity;
    let mut ground_room = Vec::with_capacity(s);
    let mut window_room = Vec::with_capacity(s);
    let mut relay_span = Vec::with_capacity(s);
    for i in 0..s {
        let room = scenario.period_s - scenario.heights_km[i] / c - scenario.windows_s[i];
        if room <= 0.0 {
            return Err(Error::Infeasible(format!(
                "satellite {}: window leaves no time for the ground leg",
                i + 1
            )));
        }
        let mut p = Posynomial::new();
        p.push(mono(1.0 / room, &[(ground[i], 1.0)]));
        p.push(mono(compute / room, &[(n0, 1.0)]));
        problem.constrain(format!("ground timing of satellite {}", i + 1), p)?;
        ground_room.push(room);

        let w = scenario.windows_s[i];
        let room = w - 2.0 * scenario.slant_km(i) / c;
        if room <= 0.0 {
            return Err(Error::Infeasible(format!(
                "satellite {}: window shorter than the propagation delays",
                i + 1
            )));
        }
        let span = if i + 1 >= k { w } else { anchor };
        let mut p = Posynomial::new();
        p.push(mono(1.0 / room, &[(balloon[i], 1.0)]));
        p.push(mono(1.0 / room, &[(satellite[i], 1.0)]));
        p.push(mono(span / room, &[(alpha, 1.0)]));
        problem.constrain(format!("window timing of satellite {}", i + 1), p)?;
        window_room.push(room);
        relay_span.push(span);
    }

    if !active.is_empty() {
        let lim = 1.0 / (anchor * scenario.m_max);
        let mut p = Posynomial::new();
        for &(v, a) in &active {
            let q = phi[v].expect("active segment has a schedule budget");
            let pa = bit * a;
            p.push(mono(lim * pa, &[(n0, 1.0), (alpha, -1.0)]));
            p.push(mono(lim * sf * pa, &[(n0, 1.0), (q, -1.0), (alpha, -1.0)]));
            p.push(mono(lim * delta, &[(q, 1.0), (alpha, -1.0)]));
            p.push(mono(lim * delta * sf, &[(alpha, -1.0)]));
        }
        problem.constrain("average lasers", p)?;
    }
    for &(v, a) in &active {
        let q = phi[v].expect("active segment has a schedule budget");
        let mut p = Posynomial::new();
        p.push(mono(bit * a / tau[v], &[(n0, 1.0), (q, -1.0), (alpha, -1.0)]));
        p.push(mono(delta / tau[v], &[(alpha, -1.0)]));
        problem.constrain(format!("schedule fit in segment {}", v + 1), p)?;
    }

    let n_max = scenario.n_max as f64;
    let mut p = Posynomial::new();
    p.push(mono(1.0 / n_max, &[(n0, 1.0)]));
    problem.constrain("n0 <= n_max", p)?;
    let mut p = Posynomial::new();
    p.push(mono(1.0, &[(n0, -1.0)]));
    problem.constrain("n0 >= 1", p)?;
    let mut p = Posynomial::new();
    p.push(mono(1.0, &[(alpha, 1.0)]));
    problem.constrain("alpha < 1", p)?;

    problem.validate()?;
    let init = InitData {
        n_max,
        compute,
        ground_room,
        window_room,
        relay_span,
        windows: scenario.windows_s.clone(),
        segments: active.iter().map(|&(v, a)| (v, bit * a, tau[v])).collect(),
        overhead: delta,
    };
    Ok(GpModel {
        problem,
        energy,
        k_star: k,
        t_max,
        alpha,
        n0,
        ground,
        balloon,
        satellite,
        phi,
        epigraph,
        init,
    })
}

impl GpModel {
    /// Decision variables at a GP point.
    pub fn vars(&self, x: &[f64]) -> DecisionVars {
        let times = |slots: &[Slot]| slots.iter().map(|s| s.value(x)).collect();
        DecisionVars {
            n0: self.n0.value(x),
            alpha: self.alpha.value(x),
            k_star: self.k_star,
            ground_time_s: times(&self.ground),
            balloon_time_s: times(&self.balloon),
            satellite_time_s: times(&self.satellite),
            phi_prime: self
                .phi
                .iter()
                .map(|p| p.map_or(0.0, |s| s.value(x)))
                .collect(),
        }
    }

    /// GP point for `vars`, with the epigraph set to twice the truncated
    /// objective. Fixed quantities in `vars` are ignored.
    pub fn point(&self, vars: &DecisionVars) -> Vec<f64> {
        let mut x = vec![1.0; self.problem.n_vars()];
        let mut put = |slot: Slot, v: f64| {
            if let Slot::Var(i) = slot {
                x[i] = v;
            }
        };
        put(self.alpha, vars.alpha);
        put(self.n0, vars.n0);
        for i in 0..self.ground.len() {
            put(self.ground[i], vars.ground_time_s[i]);
            put(self.balloon[i], vars.balloon_time_s[i]);
            put(self.satellite[i], vars.satellite_time_s[i]);
        }
        for (slot, &v) in self.phi.iter().zip(&vars.phi_prime) {
            if let Some(s) = slot {
                put(*s, v);
            }
        }
        x[self.epigraph] = 2.0 * self.energy.eval(&x);
        x
    }

    /// Truncated objective at `vars`.
    pub fn truncated_objective(&self, vars: &DecisionVars) -> f64 {
        self.energy.eval(&self.point(vars))
    }

    /// Interior starting point. `alpha` sits midway between the smallest
    /// value that lets one schedule fit every segment and the largest value
    /// the windows allow with short radio legs; `n0` sits midway in its
    /// range; each schedule time sits midway between the overhead and the
    /// segment length; the radio legs take half of their remaining room.
    pub fn initial_point(&self) -> Vec<f64> {
        let d = &self.init;
        let s = d.windows.len();
        let n0 = match self.n0 {
            Slot::Fixed(v) => v,
            Slot::Var(_) => {
                let mut hi = d.n_max;
                if d.compute > 0.0 {
                    for room in &d.ground_room {
                        hi = hi.min(0.98 * room / d.compute);
                    }
                }
                0.5 * (1.0 + hi)
            }
        };
        let alpha = match self.alpha {
            Slot::Fixed(v) => v,
            Slot::Var(_) => {
                let hi = (0..s)
                    .map(|i| (d.window_room[i] - 0.02 * d.windows[i]) / d.relay_span[i])
                    .fold(1.0, f64::min);
                let lo = d
                    .segments
                    .iter()
                    .map(|&(_, _, tau)| d.overhead / tau)
                    .fold(0.0, f64::max);
                if lo < hi {
                    0.5 * (lo + hi)
                } else {
                    0.5 * hi
                }
            }
        };
        let fallback = |room: f64, w: f64| if room > 0.0 { room } else { 1e-3 * w };
        let mut phi_prime = vec![0.0; s];
        for &(v, pa, tau) in &d.segments {
            let room = alpha * tau - d.overhead;
            phi_prime[v] = if room > 0.0 { 2.0 * n0 * pa / room } else { 1.0 };
        }
        let vars = DecisionVars {
            n0,
            alpha,
            k_star: self.k_star,
            ground_time_s: (0..s)
                .map(|i| fallback(0.5 * (d.ground_room[i] - n0 * d.compute), d.windows[i]))
                .collect(),
            balloon_time_s: (0..s)
                .map(|i| fallback(0.25 * (d.window_room[i] - alpha * d.relay_span[i]), d.windows[i]))
                .collect(),
            satellite_time_s: (0..s)
                .map(|i| fallback(0.25 * (d.window_room[i] - alpha * d.relay_span[i]), d.windows[i]))
                .collect(),
            phi_prime,
        };
        self.point(&vars)
    }

    /// Re-targets a point from a model with the same variables, resetting
    /// the epigraph variable.
    pub fn reseed(&self, x: &[f64]) -> Vec<f64> {
        let mut x = x.to_vec();
        x[self.epigraph] = 1.0;
        x[self.epigraph] = 2.0 * self.energy.eval(&x);
        x
    }
}
