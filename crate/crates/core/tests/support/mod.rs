//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use tsnopt::geometry::Scenario;
use tsnopt::optimizer::{GpProblem, Monomial, Posynomial};
use tsnopt::schedule::ConfigurationMatrix;
use tsnopt::waterfill::TrafficMatrix;

pub struct Rng(Xoshiro256PlusPlus);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.unit().max(1e-300);
        let v = self.unit();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    /// Zero-diagonal matrix; each off-diagonal entry is zero with
    /// probability `sparsity`, else uniform on `[0, scale)`.
    pub fn traffic(&mut self, s: usize, scale: f64, sparsity: f64) -> TrafficMatrix {
        let mut data = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..s {
                if i != j && self.unit() >= sparsity {
                    data[i * s + j] = self.uniform(0.0, scale);
                }
            }
        }
        TrafficMatrix::new(s, data).unwrap()
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// ---------------------------------------------------------------- geometry

pub fn period_oracle(altitude: f64, earth: f64, mu: f64) -> f64 {
    2.0 * std::f64::consts::PI * ((altitude + earth).powi(3) / mu).sqrt()
}

/// Window from the central angle subtended between the two horizon points
/// at the given elevation.
pub fn window_oracle(height: f64, elevation_deg: f64, altitude: f64, earth: f64, mu: f64) -> f64 {
    let b = elevation_deg.to_radians();
    let gamma = ((earth + height) * b.cos() / (earth + altitude)).acos() - b;
    gamma / std::f64::consts::PI * period_oracle(altitude, earth, mu)
}

// ------------------------------------------------------------ water-filling

/// Water level by bisection on the filled volume.
pub fn level_by_bisection(widths: &[f64], heights: &[f64], volume: f64) -> f64 {
    let filled = |l: f64| -> f64 {
        widths
            .iter()
            .zip(heights)
            .map(|(w, h)| w * (l - h).max(0.0))
            .sum()
    };
    let mut lo = heights
        .iter()
        .zip(widths)
        .filter(|(_, w)| **w > 0.0)
        .map(|(h, _)| *h)
        .fold(f64::INFINITY, f64::min);
    let total_w: f64 = widths.iter().sum();
    let mut hi = heights.iter().cloned().fold(0.0, f64::max) + volume / total_w + 1.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if filled(mid) < volume {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One round of the straight-line tapped water-filling.
pub struct RoundTrace {
    pub segments: Vec<usize>,
    pub volume: f64,
    pub added: Vec<f64>,
}

/// Straight transcription of the tapped water-filling loop: rounds run from
/// the last segment down to `k`; round `m > k` moves row `m` and column `m`
/// restricted to the first `m` satellites, round `k` moves the leading
/// `k x k` block; each round spreads its volume over segments `m..S` by
/// bisection and slices the entries in proportion to each segment's share.
pub fn tgwf_reference(a: &TrafficMatrix, k: usize, widths: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<RoundTrace>) {
    let s = a.size();
    let mut stms = vec![vec![0.0; s * s]; s];
    let mut heights = vec![0.0; s];
    let mut rounds = Vec::new();
    for m in (k..=s).rev() {
        let mut cells = Vec::new();
        if m > k {
            for j in 0..m {
                cells.push((m - 1, j));
            }
            for i in 0..m - 1 {
                cells.push((i, m - 1));
            }
        } else {
            for i in 0..k {
                for j in 0..k {
                    cells.push((i, j));
                }
            }
        }
        let volume: f64 = cells.iter().map(|&(i, j)| a.get(i, j)).sum();
        let segs: Vec<usize> = (m - 1..s).collect();
        let mut added = vec![0.0; segs.len()];
        if volume > 0.0 {
            let w: Vec<f64> = segs.iter().map(|&v| widths[v]).collect();
            let h: Vec<f64> = segs.iter().map(|&v| heights[v]).collect();
            let level = level_by_bisection(&w, &h, volume);
            for (n, &v) in segs.iter().enumerate() {
                added[n] = (level - heights[v]).max(0.0);
            }
            // renormalize so the shares sum to one exactly
            let placed: f64 = segs.iter().zip(&added).map(|(&v, x)| widths[v] * x).sum();
            for (n, &v) in segs.iter().enumerate() {
                let share = widths[v] * added[n] / placed;
                heights[v] += added[n];
                for &(i, j) in &cells {
                    stms[v][i * s + j] += share * a.get(i, j);
                }
            }
        }
        rounds.push(RoundTrace {
            segments: segs,
            volume,
            added,
        });
    }
    (stms, heights, rounds)
}

// --------------------------------------------------------------- schedules

pub fn max_line(a: &[f64], s: usize) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..s {
        let row: f64 = (0..s).map(|j| a[i * s + j]).sum();
        let col: f64 = (0..s).map(|j| a[j * s + i]).sum();
        best = best.max(row).max(col);
    }
    best
}

/// Checks that `mats` are valid configuration matrices and cover `n0 * a`
/// entrywise with slack below `coeff`. Returns a description of the first
/// problem found.
pub fn coverage_problem(a: &TrafficMatrix, n0: f64, coeff: f64, mats: &[ConfigurationMatrix]) -> Option<String> {
    let s = a.size();
    let mut carried = vec![0.0; s * s];
    for (k, m) in mats.iter().enumerate() {
        let mut rows = vec![0; s];
        let mut cols = vec![0; s];
        for i in 0..s {
            for j in 0..s {
                let e = m.get(i, j);
                if e > 1 {
                    return Some(format!("matrix {k} entry ({i},{j}) = {e}"));
                }
                if e == 1 {
                    rows[i] += 1;
                    cols[j] += 1;
                    carried[i * s + j] += m.coefficient();
                }
            }
        }
        if rows.iter().chain(&cols).any(|&c| c > 1) {
            return Some(format!("matrix {k} has two links on one line"));
        }
        if rel(m.coefficient(), coeff) > 1e-12 {
            return Some(format!("matrix {k} coefficient {} != {coeff}", m.coefficient()));
        }
    }
    for i in 0..s {
        for j in 0..s {
            let need = n0 * a.get(i, j);
            let got = carried[i * s + j];
            let tol = 1e-9 * need.max(coeff);
            if got < need - tol {
                return Some(format!("entry ({i},{j}) carries {got} < {need}"));
            }
            if need > 0.0 && got - need >= coeff + tol {
                return Some(format!("entry ({i},{j}) slack {} >= {coeff}", got - need));
            }
            if need == 0.0 && got > 0.0 {
                return Some(format!("entry ({i},{j}) carries {got} without traffic"));
            }
        }
    }
    None
}

// ------------------------------------------------------------------ energy

/// Energy of one radio hop carrying `bits` in `time` seconds.
pub fn hop_energy(sc: &Scenario, bandwidth: f64, distance: f64, bits: f64, time: f64) -> f64 {
    if bits == 0.0 {
        return 0.0;
    }
    let loss = 10f64.powf(sc.link_loss_db / 10.0);
    let power = (2f64.powf(bits / (bandwidth * time)) - 1.0) * sc.noise_psd * bandwidth * distance * distance * loss
        / sc.antenna_gain;
    power * time
}

// ---------------------------------------------------------------------- GP

pub fn mono(c: f64, e: &[(usize, f64)]) -> Monomial {
    e.iter().fold(Monomial::new(c), |m, &(v, x)| m.with(v, x))
}

pub fn posy(terms: &[Monomial]) -> Posynomial {
    let mut p = Posynomial::new();
    for t in terms {
        p.push(t.clone());
    }
    p
}

/// A GP with a closed-form optimum.
pub struct KnownGp {
    pub name: &'static str,
    pub problem: GpProblem,
    pub x_star: Vec<f64>,
    pub optimum: f64,
    pub start: Vec<f64>,
}

/// Largest box for a given surface: min 1/(xyz) s.t. 2(xy + yz + zx)/A <= 1.
/// The cube with side sqrt(A/6) is optimal.
pub fn box_volume(area: f64) -> KnownGp {
    let mut problem = GpProblem::new(vec!["x".into(), "y".into(), "z".into()]);
    problem.objective.push(mono(1.0, &[(0, -1.0), (1, -1.0), (2, -1.0)]));
    let c = 2.0 / area;
    problem
        .constrain(
            "surface",
            posy(&[mono(c, &[(0, 1.0), (1, 1.0)]), mono(c, &[(1, 1.0), (2, 1.0)]), mono(c, &[(2, 1.0), (0, 1.0)])]),
        )
        .unwrap();
    let side = (area / 6.0).sqrt();
    KnownGp {
        name: "box volume",
        problem,
        x_star: vec![side; 3],
        optimum: side.powi(-3),
        start: vec![0.1 * side, 0.2 * side, 0.05 * side],
    }
}

/// min 1/(xyz) s.t. x/a + y/b + z/c <= 1; optimum at (a, b, c)/3.
pub fn budget_split(a: f64, b: f64, c: f64) -> KnownGp {
    let mut problem = GpProblem::new(vec!["x".into(), "y".into(), "z".into()]);
    problem.objective.push(mono(1.0, &[(0, -1.0), (1, -1.0), (2, -1.0)]));
    problem
        .constrain(
            "budget",
            posy(&[mono(1.0 / a, &[(0, 1.0)]), mono(1.0 / b, &[(1, 1.0)]), mono(1.0 / c, &[(2, 1.0)])]),
        )
        .unwrap();
    KnownGp {
        name: "budget split",
        problem,
        x_star: vec![a / 3.0, b / 3.0, c / 3.0],
        optimum: 27.0 / (a * b * c),
        start: vec![a / 10.0, b / 7.0, c / 5.0],
    }
}

/// min ax + by + cz s.t. k/(xyz) <= 1; each term equals (abck)^(1/3).
pub fn weighted_cost(a: f64, b: f64, c: f64, k: f64) -> KnownGp {
    let mut problem = GpProblem::new(vec!["x".into(), "y".into(), "z".into()]);
    problem.objective.push(mono(a, &[(0, 1.0)]));
    problem.objective.push(mono(b, &[(1, 1.0)]));
    problem.objective.push(mono(c, &[(2, 1.0)]));
    problem
        .constrain("product", posy(&[mono(k, &[(0, -1.0), (1, -1.0), (2, -1.0)])]))
        .unwrap();
    let g = (a * b * c * k).cbrt();
    KnownGp {
        name: "weighted cost",
        problem,
        x_star: vec![g / a, g / b, g / c],
        optimum: 3.0 * g,
        start: vec![10.0 * g / a, 3.0 * g / b, 5.0 * g / c],
    }
}

/// Gradient of `log p(exp(y))` with respect to `y`.
pub fn log_gradient(p: &Posynomial, x: &[f64]) -> Vec<f64> {
    let total = p.eval(x);
    let mut g = vec![0.0; x.len()];
    for t in &p.terms {
        let w = t.eval(x) / total;
        for &(v, e) in &t.exponents {
            g[v] += w * e;
        }
    }
    g
}

/// KKT residual at `x` in log coordinates with one active constraint:
/// the multiplier is fitted by least squares, and the returned pair is the
/// multiplier and the largest stationarity residual.
pub fn kkt_residual(gp: &KnownGp) -> (f64, f64) {
    let g0 = log_gradient(&gp.problem.objective, &gp.x_star);
    let g1 = log_gradient(&gp.problem.constraints[0].lhs, &gp.x_star);
    let lambda = -g0.iter().zip(&g1).map(|(a, b)| a * b).sum::<f64>() / g1.iter().map(|b| b * b).sum::<f64>();
    let res = g0
        .iter()
        .zip(&g1)
        .map(|(a, b)| (a + lambda * b).abs())
        .fold(0.0, f64::max);
    (lambda, res)
}

/// Decomposes `a` and checks the schedule bound, coverage and the
/// quotient line sums.
pub fn check_decomposition(a: &TrafficMatrix, phi: usize, n0: f64) -> Result<(), String> {
    let s = a.size();
    let mats = tsnopt::schedule::decompose(a, phi, n0).map_err(|e| e.to_string())?;
    if mats.len() > phi {
        return Err(format!("{} matrices for budget {phi}", mats.len()));
    }
    let atilde = max_line(a.as_slice(), s);
    if atilde == 0.0 {
        return if mats.is_empty() { Ok(()) } else { Err("matrices for zero traffic".into()) };
    }
    let coeff = n0 * atilde / (phi - s) as f64;
    if let Some(p) = coverage_problem(a, n0, coeff, &mats) {
        return Err(p);
    }
    let (q, r) = tsnopt::schedule::quotient_remainder(a, coeff, n0);
    let qf: Vec<f64> = q.iter().map(|&x| x as f64).collect();
    if max_line(&qf, s) > (phi - s) as f64 {
        return Err(format!("quotient line sum {} above {}", max_line(&qf, s), phi - s));
    }
    if r.iter().any(|&x| !(0.0..coeff).contains(&x)) {
        return Err("remainder outside [0, coefficient)".into());
    }
    Ok(())
}

// ------------------------------------------------------------ perturbation

pub struct PerturbationReport {
    pub samples: usize,
    /// Largest relative decrease of the truncated objective seen at a
    /// feasible sample; negative when every sample is worse.
    pub worst_improvement: f64,
    pub objective: f64,
}

/// Solves the relaxed GP behind the joint result for `traffic`, then draws
/// `samples` random feasible points around its optimum and reports the
/// best relative improvement of the truncated objective among them.
///
/// Each sample perturbs the log variables with a Gaussian whose scale cycles
/// through 1e-5..1e-1. An infeasible draw is pulled towards a strictly
/// interior point until it becomes feasible, which convexity in log
/// coordinates guarantees.
pub fn perturbation_report(sc: &Scenario, traffic: &TrafficMatrix, samples: usize, seed: u64) -> PerturbationReport {
    use tsnopt::optimizer::{build_gp, scheme, solve_gp, solve_gp_with, Scheme, SolverOptions};

    let joint = scheme(sc, traffic, Scheme::Joint).unwrap();
    let model = build_gp(sc, traffic, &joint.stms, joint.t_max).unwrap();
    let sol = solve_gp(&model.problem, &model.initial_point()).unwrap();
    let loose = SolverOptions {
        gap_tol: 1e-1,
        ..SolverOptions::default()
    };
    let center = solve_gp_with(&model.problem, &model.initial_point(), &loose).unwrap();

    let keep: Vec<usize> = model
        .problem
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.name != "objective bound")
        .map(|(i, _)| i)
        .collect();
    let feasible = |x: &[f64]| {
        let v = model.problem.constraint_values(x);
        keep.iter().all(|&i| v[i] <= 1.0)
    };
    let y_star: Vec<f64> = sol.x.iter().map(|v| v.ln()).collect();
    let y_mid: Vec<f64> = center.x.iter().map(|v| v.ln()).collect();
    assert!(feasible(&sol.x));
    assert!(feasible(&center.x));
    let best = model.energy.eval(&sol.x);

    let mut rng = Rng::new(seed);
    let scales = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
    let mut worst = f64::NEG_INFINITY;
    let at = |y: &[f64], towards: f64, y_mid: &[f64]| -> Vec<f64> {
        y.iter().zip(y_mid).map(|(a, b)| (a + towards * (b - a)).exp()).collect()
    };
    for n in 0..samples {
        let sigma = scales[n % scales.len()];
        let y: Vec<f64> = y_star.iter().map(|v| v + sigma * rng.normal()).collect();
        let mut x = at(&y, 0.0, &y_mid);
        if !feasible(&x) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if feasible(&at(&y, mid, &y_mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            x = at(&y, hi, &y_mid);
        }
        assert!(feasible(&x));
        let value = model.energy.eval(&x);
        worst = worst.max((best - value) / best);
    }
    PerturbationReport {
        samples,
        worst_improvement: worst,
        objective: best,
    }
}
