//! Geometric programs in posynomial form and a log-barrier solver.
//!
//! With `y = ln x` a monomial `c * prod x_j^a_j` becomes the affine form
//! `a . y + ln c` and a posynomial becomes a log-sum-exp of affine forms,
//! which is convex. The solver minimizes the log of the objective subject to
//! `ln(constraint) <= 0` with a standard barrier method: damped Newton
//! centering and a geometric increase of the barrier weight. Every log
//! variable is also boxed to `|y_j| <= log_bound`, which keeps the central
//! path bounded when a variable has no influence on the objective.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `coeff * prod x_j^e_j` with sparse exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<(usize, f64)>,
}

impl Monomial {
    pub fn new(coeff: f64) -> Self {
        Self {
            coeff,
            exponents: Vec::new(),
        }
    }

    /// Multiplies by `x_var^exp`.
    pub fn with(mut self, var: usize, exp: f64) -> Self {
        if exp == 0.0 {
            return self;
        }
        match self.exponents.iter_mut().find(|(v, _)| *v == var) {
            Some((_, e)) => *e += exp,
            None => self.exponents.push((var, exp)),
        }
        self.exponents.retain(|&(_, e)| e != 0.0);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .fold(self.coeff, |acc, &(v, e)| acc * x[v].powf(e))
    }

    fn log_eval(&self, y: &[f64]) -> f64 {
        self.exponents
            .iter()
            .fold(self.coeff.ln(), |acc, &(v, e)| acc + e * y[v])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term; zero coefficients are dropped.
    pub fn push(&mut self, m: Monomial) {
        if m.coeff != 0.0 {
            self.terms.push(m);
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|m| m.eval(x)).sum()
    }

    /// Log of the value, evaluated stably from log variables.
    pub fn log_eval(&self, y: &[f64]) -> f64 {
        log_sum_exp(self.terms.iter().map(|m| m.log_eval(y)))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|m| m.exponents.is_empty())
    }

    /// Multiplies every term by `by`.
    pub fn scaled(self, by: &Monomial) -> Self {
        let terms = self
            .terms
            .into_iter()
            .map(|t| {
                let start = Monomial {
                    coeff: t.coeff * by.coeff,
                    exponents: t.exponents,
                };
                by.exponents.iter().fold(start, |m, &(v, e)| m.with(v, e))
            })
            .collect();
        Self { terms }
    }
}

/// `ln sum exp(z)`, written as `max + ln(1 + rest)` so that values near
/// zero keep their relative precision.
fn log_sum_exp(z: impl Iterator<Item = f64> + Clone) -> f64 {
    let (arg, max) = z
        .clone()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (k, v)| if v > a.1 { (k, v) } else { a });
    if max.is_infinite() {
        return max;
    }
    let rest: f64 = z
        .enumerate()
        .filter(|&(k, _)| k != arg)
        .map(|(_, v)| (v - max).exp())
        .sum();
    max + rest.ln_1p()
}

/// `lhs <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub lhs: Posynomial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpProblem {
    pub names: Vec<String>,
    pub objective: Posynomial,
    pub constraints: Vec<Constraint>,
}

impl GpProblem {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            objective: Posynomial::new(),
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    /// Adds `lhs <= 1`. A constant left side is checked at once and dropped.
    pub fn constrain(&mut self, name: impl Into<String>, lhs: Posynomial) -> Result<()> {
        let name = name.into();
        if lhs.is_constant() {
            let v = lhs.eval(&[]);
            if v > 1.0 {
                return Err(Error::Infeasible(format!("{name}: constant {v} exceeds 1")));
            }
            return Ok(());
        }
        self.constraints.push(Constraint { name, lhs });
        Ok(())
    }

    /// Checks that every coefficient is positive and finite and every
    /// variable index is in range.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let all = std::iter::once(("objective", &self.objective))
            .chain(self.constraints.iter().map(|c| (c.name.as_str(), &c.lhs)));
        for (name, p) in all {
            if p.terms.is_empty() {
                return Err(Error::invalid(format!("{name}: posynomial has no terms")));
            }
            for m in &p.terms {
                if !(m.coeff.is_finite() && m.coeff > 0.0) {
                    return Err(Error::invalid(format!("{name}: coefficient {} not positive", m.coeff)));
                }
                if m.exponents.iter().any(|&(v, e)| v >= n || !e.is_finite()) {
                    return Err(Error::invalid(format!("{name}: bad exponent entry")));
                }
            }
        }
        Ok(())
    }

    /// Constraint values at a positive point.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.lhs.eval(x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the duality gap bound on the log objective is below this.
    pub gap_tol: f64,
    pub log_bound: f64,
    /// Barrier weight multiplier per outer step.
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            log_bound: 80.0,
            mu: 10.0,
            max_newton: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Bound on the suboptimality of the log objective.
    pub gap: f64,
    /// Infinity norm of the Lagrangian gradient in log variables.
    pub stationarity: f64,
    /// Largest `max(0, lhs - 1)` over the constraints.
    pub max_violation: f64,
    pub newton_iterations: usize,
    pub phase_one_iterations: usize,
}

/// `ln sum exp(A y + b)`.
#[derive(Debug, Clone)]
struct Lse {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Lse {
    fn from_posynomial(p: &Posynomial, n: usize) -> Self {
        let mut a = DMatrix::zeros(p.terms.len(), n);
        let mut b = DVector::zeros(p.terms.len());
        for (k, m) in p.terms.iter().enumerate() {
            b[k] = m.coeff.ln();
            for &(v, e) in &m.exponents {
                a[(k, v)] += e;
            }
        }
        Self { a, b }
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        let z = &self.a * y + &self.b;
        log_sum_exp(z.iter().copied())
    }

    fn derivatives(&self, y: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let z = &self.a * y + &self.b;
        let arg = z.imax();
        let max = z[arg];
        let mut p = z.map(|v| (v - max).exp());
        p[arg] = 0.0;
        let rest = p.sum();
        p[arg] = 1.0;
        p /= 1.0 + rest;
        let value = max + rest.ln_1p();
        let grad = self.a.transpose() * &p;
        let mut weighted = self.a.clone();
        for (mut row, w) in weighted.row_iter_mut().zip(p.iter()) {
            row *= *w;
        }
        let hess = self.a.transpose() * weighted - &grad * grad.transpose();
        (value, grad, hess)
    }
}

/// `t * f0(y) - sum ln(-f_i(y)) - sum ln(upper_j - y_j) - sum ln(y_j - lower_j)`.
///
/// Coordinates are relative to a movable origin so that the affine offsets
/// stay small near the current iterate; see [`Barrier::recenter`].
struct Barrier {
    objective: Lse,
    constraints: Vec<Lse>,
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Barrier {
    fn new(objective: Lse, constraints: Vec<Lse>, bounds: DVector<f64>) -> Self {
        Self {
            objective,
            constraints,
            lower: -&bounds,
            upper: bounds,
        }
    }

    fn count(&self) -> usize {
        self.constraints.len() + 2 * self.upper.len()
    }

    /// Moves the origin to `y`. Near the central path an active constraint
    /// sits within `1 / t` of zero, and evaluating it as a small difference
    /// of large log terms would swamp that margin.
    fn recenter(&mut self, y: &DVector<f64>) {
        for c in std::iter::once(&mut self.objective).chain(self.constraints.iter_mut()) {
            c.b += &c.a * y;
        }
        self.lower -= y;
        self.upper -= y;
    }

    fn inside(&self, y: &DVector<f64>) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| lo < v && v < hi)
            && self.constraints.iter().all(|c| c.value(y) < 0.0)
    }

    fn value(&self, y: &DVector<f64>, t: f64) -> f64 {
        if !self.inside(y) {
            return f64::INFINITY;
        }
        let mut v = t * self.objective.value(y);
        for c in &self.constraints {
            v -= (-c.value(y)).ln();
        }
        for (yj, (lo, hi)) in y.iter().zip(self.lower.iter().zip(self.upper.iter())) {
            v -= (hi - yj).ln() + (yj - lo).ln();
        }
        v
    }

    fn gradient_hessian(&self, y: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let (_, g0, h0) = self.objective.derivatives(y);
        let mut g = g0 * t;
        let mut h = h0 * t;
        for c in &self.constraints {
            let (f, gi, hi) = c.derivatives(y);
            let inv = -1.0 / f;
            g += &gi * inv;
            h += hi * inv + &gi * gi.transpose() * (inv * inv);
        }
        for (j, (yj, (lo, hi))) in y.iter().zip(self.lower.iter().zip(self.upper.iter())).enumerate() {
            let (up, down) = (hi - yj, yj - lo);
            g[j] += 1.0 / up - 1.0 / down;
            h[(j, j)] += 1.0 / (up * up) + 1.0 / (down * down);
        }
        (g, h)
    }
}

/// Solves `H d = -g` after symmetric diagonal scaling, adding a ridge when
/// the scaled matrix is not numerically positive definite.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let scale = DVector::from_iterator(n, (0..n).map(|j| 1.0 / h[(j, j)].abs().max(1e-300).sqrt()));
    let mut hs = h.clone();
    for i in 0..n {
        for j in 0..n {
            hs[(i, j)] *= scale[i] * scale[j];
        }
    }
    let gs = g.component_mul(&scale);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = hs.clone();
        for j in 0..n {
            m[(j, j)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&(-&gs));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.component_mul(&scale));
            }
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
    }
    None
}

const CENTERING_STEPS: usize = 100;

/// Damped Newton minimization of the barrier at weight `t`. Stops early
/// once a step no longer changes the barrier value at working precision.
/// Returns the number of iterations used.
fn center(bar: &Barrier, y: &mut DVector<f64>, t: f64, budget: usize) -> usize {
    let mut used = 0;
    let mut last = f64::INFINITY;
    while used < budget {
        let (g, h) = bar.gradient_hessian(y, t);
        let Some(d) = newton_direction(&g, &h) else {
            break;
        };
        let decrement = -g.dot(&d) / 2.0;
        let slope = -2.0 * decrement;
        used += 1;
        if decrement <= 1e-20 {
            break;
        }
        // near the center a full step is taken when it stays interior and
        // does not raise the barrier beyond its rounding noise, since value
        // comparisons are too coarse there for a sufficient-decrease test;
        // the loop ends once the decrement stops shrinking
        let current = bar.value(y, t);
        if decrement < 0.1 {
            if decrement > 0.25 * last {
                break;
            }
            last = decrement;
            let trial = &*y + &d;
            if bar.value(&trial, t) <= current + 1e-12 * current.abs().max(1.0) {
                *y = trial;
                continue;
            }
        }
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-16 {
            let trial = &*y + &d * step;
            if bar.value(&trial, t) <= current + 0.01 * step * slope {
                *y = trial;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    used
}

struct PathOutcome {
    y: DVector<f64>,
    t: f64,
    iterations: usize,
    stationarity: f64,
}

/// Follows the central path from a strictly interior `y`. `stop` may end
/// the run early after any centering step.
fn follow_path(
    bar: &mut Barrier,
    y: DVector<f64>,
    opts: &SolverOptions,
    stop: impl Fn(&DVector<f64>) -> bool,
) -> Result<PathOutcome> {
    let m = bar.count() as f64;
    let mut t = 1.0;
    let mut iterations = 0;
    bar.recenter(&y);
    let mut origin = y;
    loop {
        let mut step = DVector::zeros(origin.len());
        iterations += center(bar, &mut step, t, (opts.max_newton - iterations).min(CENTERING_STEPS));
        bar.recenter(&step);
        origin += step;
        if stop(&origin) || m / t <= opts.gap_tol {
            let zero = DVector::zeros(origin.len());
            let (g, _) = bar.gradient_hessian(&zero, t);
            return Ok(PathOutcome {
                y: origin,
                t,
                iterations,
                stationarity: g.amax() / t,
            });
        }
        if iterations >= opts.max_newton {
            return Err(Error::NotConverged(format!(
                "barrier stalled after {iterations} Newton steps at gap {:.3e}",
                m / t
            )));
        }
        t *= opts.mu;
    }
}

pub fn solve_gp(problem: &GpProblem, x0: &[f64]) -> Result<GpSolution> {
    solve_gp_with(problem, x0, &SolverOptions::default())
}

/// Minimizes the objective from the positive start `x0`, running a phase-I
/// search first when `x0` violates a constraint.
pub fn solve_gp_with(problem: &GpProblem, x0: &[f64], opts: &SolverOptions) -> Result<GpSolution> {
    problem.validate()?;
    let n = problem.n_vars();
    if x0.len() != n || x0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("start point must be positive with one entry per variable"));
    }
    let mut y = DVector::from_iterator(n, x0.iter().map(|v| v.ln()));
    if y.amax() >= opts.log_bound {
        return Err(Error::invalid("start point outside the solver's log box"));
    }
    let constraints: Vec<Lse> = problem
        .constraints
        .iter()
        .map(|c| Lse::from_posynomial(&c.lhs, n))
        .collect();
    let mut phase_one_iterations = 0;

    let worst = constraints.iter().map(|c| c.value(&y)).fold(f64::NEG_INFINITY, f64::max);
    if worst >= 0.0 {
        let (y1, used) = phase_one(problem, &constraints, &y, worst, opts)?;
        y = y1;
        phase_one_iterations = used;
    }

    let mut bar = Barrier::new(
        Lse::from_posynomial(&problem.objective, n),
        constraints,
        DVector::from_element(n, opts.log_bound),
    );
    let out = follow_path(&mut bar, y, opts, |_| false)?;
    let x: Vec<f64> = out.y.iter().map(|v| v.exp()).collect();
    let max_violation = problem
        .constraint_values(&x)
        .into_iter()
        .fold(0.0, |acc, v| f64::max(acc, v - 1.0));
    Ok(GpSolution {
        objective: problem.objective.eval(&x),
        gap: bar.count() as f64 / out.t,
        stationarity: out.stationarity,
        max_violation,
        newton_iterations: out.iterations,
        phase_one_iterations,
        x,
    })
}

/// Minimizes `s` subject to `f_i(y) <= s` until `s < 0`.
fn phase_one(
    problem: &GpProblem,
    constraints: &[Lse],
    y: &DVector<f64>,
    worst: f64,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, usize)> {
    let n = y.len();
    let lift = |c: &Lse| {
        Lse {
            a: c.a.clone().insert_column(n, -1.0),
            b: c.b.clone(),
        }
    };
    let mut obj_a = DMatrix::zeros(1, n + 1);
    obj_a[(0, n)] = 1.0;
    let s0 = worst + 1.0;
    let mut bounds = DVector::from_element(n + 1, opts.log_bound);
    bounds[n] = opts.log_bound.max(2.0 * s0.abs() + 1.0);
    let mut bar = Barrier::new(
        Lse {
            a: obj_a,
            b: DVector::zeros(1),
        },
        constraints.iter().map(lift).collect(),
        bounds,
    );
    let start = y.clone().insert_row(n, s0);
    let out = follow_path(&mut bar, start, opts, |z| z[n] < 0.0)?;
    if out.y[n] >= 0.0 {
        let yy = out.y.rows(0, n).into_owned();
        let (idx, val) = constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.value(&yy)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        return Err(Error::Infeasible(format!(
            "no strictly feasible point; `{}` stays at {:.6e} (limit 1)",
            problem.constraints[idx].name,
            val.exp()
        )));
    }
    Ok((out.y.rows(0, n).into_owned(), out.iterations))
}
