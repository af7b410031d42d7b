//! Brute-force and certificate checks that do not go through the solver's
//! closed-form derivatives. Utilities are recomputed from the flow model and
//! all gradients are central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AirtimeGame, Baseline, UserTerms};
use crate::model::{build_dissemination_plan, flows_unchecked, Allocation, DisseminationPlan, FlowSummary, Scenario};

/// Constraints with slack at or below this are active.
pub const ACTIVITY_THRESHOLD: f64 = 1e-7;
const FEASIBILITY_SLACK: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
/// Relative gain below which a Pareto improvement is round-off.
pub const PARETO_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Seconds per grid step.
    pub resolution: f64,
    pub max_dims: usize,
}

impl GridSpec {
    pub fn new(resolution: f64) -> Result<GridSpec> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidOption(format!("grid resolution must be > 0, got {resolution}")));
        }
        Ok(GridSpec { resolution, max_dims: 4 })
    }
}

/// A candidate head's allocation problem, evaluated from first principles.
#[derive(Debug, Clone)]
pub struct OracleProblem<'a> {
    pub scenario: &'a Scenario,
    pub plan: DisseminationPlan,
    pub vars: Vec<usize>,
    pub upper: Vec<f64>,
    pub budget: f64,
}

impl<'a> OracleProblem<'a> {
    pub fn new(scenario: &'a Scenario, head: usize) -> Result<OracleProblem<'a>> {
        scenario.validate()?;
        let plan = build_dissemination_plan(scenario, head, None)?;
        let vars = plan.active_items();
        let upper = vars.iter().map(|&m| plan.routes[m].size * plan.routes[m].time_weight).collect();
        Ok(OracleProblem { scenario, plan, vars, upper, budget: scenario.airtime_horizon })
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn flows(&self, x: &[f64]) -> Vec<FlowSummary> {
        let alloc = Allocation::from_active(self.plan.routes.len(), &self.vars, x);
        flows_unchecked(&self.plan, alloc.as_slice())
    }

    /// `None` when an energy-sensitive user is at or past its budget.
    pub fn utilities(&self, x: &[f64]) -> Option<Vec<f64>> {
        let s = self.scenario;
        self.flows(x)
            .iter()
            .zip(&s.users)
            .enumerate()
            .map(|(i, (f, p))| {
                let cost = if p.sensitivity == 0.0 {
                    0.0
                } else if f.energy >= p.energy_budget {
                    return None;
                } else {
                    p.sensitivity * (1.0 / (p.energy_budget - f.energy) - 1.0 / p.energy_budget)
                };
                let reward = if i == self.plan.head { s.unit_reward * f.forwarded } else { 0.0 };
                Some((1.0 + f.disseminated + f.received_of_interest).ln() - cost + reward)
            })
            .collect()
    }

    /// `Σ α_i log u_i`, `-∞` outside the domain.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let Some(u) = self.utilities(x) else { return f64::NEG_INFINITY };
        let mut total = 0.0;
        for (&ui, &a) in u.iter().zip(&self.scenario.bargaining_power) {
            if a > 0.0 {
                if !(ui > 0.0) {
                    return f64::NEG_INFINITY;
                }
                total += a * ui.ln();
            }
        }
        total
    }

    /// Slack of each constraint `c(x) <= b`: lower bounds, upper bounds,
    /// shared airtime, then one energy budget per user.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.to_vec();
        out.extend(self.upper.iter().zip(x).map(|(u, x)| u - x));
        out.push(self.budget - x.iter().sum::<f64>());
        out.extend(self.flows(x).iter().zip(&self.scenario.users).map(|(f, p)| p.energy_budget - f.energy));
        out
    }

    pub fn is_feasible(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.dim()
            && self.slacks(x).iter().all(|&s| s >= -slack)
            && self.utilities(x).is_some_and(|u| u.iter().all(|&v| v >= 0.0))
    }

    fn central_difference(&self, x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[k] += FD_STEP;
                lo[k] -= FD_STEP;
                (f(&hi) - f(&lo)) / (2.0 * FD_STEP)
            })
            .collect()
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.central_difference(x, |y| self.objective(y))
    }

    /// Gradients of the constraint functions, in `slacks` order.
    fn constraint_gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut out = Vec::new();
        for k in 0..n {
            let mut g = vec![0.0; n];
            g[k] = -1.0;
            out.push(g);
        }
        for k in 0..n {
            let mut g = vec![0.0; n];
            g[k] = 1.0;
            out.push(g);
        }
        out.push(vec![1.0; n]);
        for i in 0..self.scenario.user_count() {
            out.push(self.central_difference(x, |y| self.flows(y)[i].energy));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub plain_product: f64,
    pub feasible_points: usize,
}

fn axis(upper: f64, budget: f64, step: f64) -> Vec<f64> {
    let top = upper.min(budget).max(0.0);
    let mut v: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|&t| t <= top).collect();
    if v.last().is_none_or(|&l| l < top) {
        v.push(top);
    }
    v
}

/// Exhaustive search over the feasible grid points of one head's problem.
pub fn grid_search(scenario: &Scenario, head: usize, grid: &GridSpec) -> Result<GridResult> {
    let p = OracleProblem::new(scenario, head)?;
    let n = p.dim();
    if n > grid.max_dims {
        return Err(Error::DimensionTooLarge { dims: n, max: grid.max_dims });
    }
    let axes: Vec<Vec<f64>> = p.upper.iter().map(|&u| axis(u, p.budget, grid.resolution)).collect();
    let first = axes.first().cloned().unwrap_or_else(|| vec![f64::NAN]);

    let partial: Vec<(Vec<f64>, f64, usize)> = first
        .par_iter()
        .map(|&x0| {
            let mut best = (vec![], f64::NAN, 0usize);
            let mut x = Vec::with_capacity(n);
            if n > 0 {
                x.push(x0);
            }
            enumerate(&p, &axes, &mut x, &mut best);
            best
        })
        .collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut count = 0;
    for (x, f, c) in partial {
        count += c;
        if c == 0 {
            continue;
        }
        match &best {
            Some((_, bf)) if !(f > *bf) => {}
            _ => best = Some((x, f)),
        }
    }
    let (x, objective) = best.ok_or_else(|| Error::InfeasibleAllocation("no feasible grid point".into()))?;
    let plain_product = p.utilities(&x).map_or(0.0, |u| u.iter().product());
    Ok(GridResult { x, objective, plain_product, feasible_points: count })
}

fn enumerate(p: &OracleProblem, axes: &[Vec<f64>], x: &mut Vec<f64>, best: &mut (Vec<f64>, f64, usize)) {
    let used: f64 = x.iter().sum();
    if used > p.budget + FEASIBILITY_SLACK {
        return;
    }
    if x.len() == axes.len() {
        if !p.is_feasible(x, FEASIBILITY_SLACK) {
            return;
        }
        let f = p.objective(x);
        if best.2 == 0 || f > best.1 {
            best.0 = x.clone();
            best.1 = f;
        }
        best.2 += 1;
        return;
    }
    for &v in &axes[x.len()] {
        if used + v > p.budget + FEASIBILITY_SLACK {
            break;
        }
        x.push(v);
        enumerate(p, axes, x, best);
        x.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub complementarity: f64,
    /// Multipliers of the active constraints, in `slacks` order.
    pub multipliers: Vec<f64>,
    pub active: Vec<usize>,
}

impl KktReport {
    pub fn residual(&self) -> f64 {
        self.stationarity + self.complementarity
    }
}

/// Stationarity of the Lagrangian with non-negative least-squares multipliers
/// on the active constraints, plus the complementarity norm.
pub fn kkt_residual(scenario: &Scenario, head: usize, x: &[f64]) -> Result<KktReport> {
    let p = OracleProblem::new(scenario, head)?;
    kkt_report(&p, x)
}

pub fn kkt_report(p: &OracleProblem, x: &[f64]) -> Result<KktReport> {
    if x.len() != p.dim() {
        return Err(Error::AllocationMismatch(format!("{} values for {} variables", x.len(), p.dim())));
    }
    if !p.is_feasible(x, FEASIBILITY_SLACK) {
        return Err(Error::InfeasibleAllocation(format!("{x:?}")));
    }
    let grad = p.objective_gradient(x);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::InfeasibleAllocation("objective undefined near the point".into()));
    }
    let slacks = p.slacks(x);
    let cgrads = p.constraint_gradients(x);
    let active: Vec<usize> = (0..slacks.len()).filter(|&j| slacks[j] <= ACTIVITY_THRESHOLD).collect();
    let columns: Vec<Vec<f64>> = active.iter().map(|&j| cgrads[j].clone()).collect();
    let lambda = nnls(&columns, &grad);
    let mut r = grad.clone();
    for (col, &l) in columns.iter().zip(&lambda) {
        for (ri, ci) in r.iter_mut().zip(col) {
            *ri -= l * ci;
        }
    }
    let stationarity = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let complementarity =
        active.iter().zip(&lambda).map(|(&j, &l)| (l * slacks[j].max(0.0)).powi(2)).sum::<f64>().sqrt();
    Ok(KktReport { stationarity, complementarity, multipliers: lambda, active })
}

/// Lawson–Hanson: `min ‖Σ λ_j a_j − b‖₂` subject to `λ >= 0`.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let m = columns.len();
    let mut lambda = vec![0.0; m];
    if m == 0 {
        return lambda;
    }
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let residual = |l: &[f64]| {
        let mut r = b.to_vec();
        for (col, &lj) in columns.iter().zip(l) {
            for (ri, ci) in r.iter_mut().zip(col) {
                *ri -= lj * ci;
            }
        }
        r
    };
    let solve_on = |set: &[usize]| -> Vec<f64> {
        let a = nalgebra::DMatrix::from_fn(b.len(), set.len(), |r, c| columns[set[c]][r]);
        let rhs = nalgebra::DVector::from_column_slice(b);
        a.svd(true, true).solve(&rhs, 1e-13).map(|v| v.as_slice().to_vec()).unwrap_or_else(|_| vec![0.0; set.len()])
    };
    let mut passive: Vec<usize> = Vec::new();
    for _ in 0..(3 * m + 10) {
        let r = residual(&lambda);
        let w: Vec<f64> = columns.iter().map(|c| dot(c, &r)).collect();
        let candidate =
            (0..m).filter(|j| !passive.contains(j)).max_by(|&i, &j| w[i].total_cmp(&w[j])).filter(|&j| w[j] > 1e-14);
        let Some(j) = candidate else { break };
        passive.push(j);
        loop {
            let z = solve_on(&passive);
            if z.iter().all(|&v| v > 0.0) {
                for (&k, &v) in passive.iter().zip(&z) {
                    lambda[k] = v;
                }
                break;
            }
            let mut step = 1.0f64;
            for (&k, &v) in passive.iter().zip(&z) {
                if v <= 0.0 {
                    step = step.min(lambda[k] / (lambda[k] - v));
                }
            }
            for (&k, &v) in passive.iter().zip(&z) {
                lambda[k] += step * (v - lambda[k]);
            }
            passive.retain(|&k| lambda[k] > 1e-15);
            for k in 0..m {
                if !passive.contains(&k) {
                    lambda[k] = 0.0;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    lambda
}

/// Draws a feasible allocation: half from the whole box, half near `center`.
fn sample_feasible(p: &OracleProblem, center: &[f64], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    for _ in 0..200 {
        let x: Vec<f64> = if rng.random_bool(0.5) {
            let mut w: Vec<f64> = p.upper.iter().map(|&u| rng.random::<f64>() * u).collect();
            let total: f64 = w.iter().sum();
            let cap = p.budget * if rng.random_bool(0.5) { 1.0 } else { rng.random::<f64>() };
            if total > cap {
                w.iter_mut().for_each(|v| *v *= cap / total);
            }
            w
        } else {
            let radius = 10f64.powf(rng.random_range(-4.0..-0.5));
            let mut w: Vec<f64> = center
                .iter()
                .zip(&p.upper)
                .map(|(&c, &u)| (c + radius * rng.random_range(-1.0..1.0)).clamp(0.0, u))
                .collect();
            let total: f64 = w.iter().sum();
            if total > p.budget {
                w.iter_mut().for_each(|v| *v *= p.budget / total);
            }
            w
        };
        if p.is_feasible(&x, 0.0) {
            return Some(x);
        }
    }
    None
}

/// Max over sampled feasible `x'` of `Σ α_i (u_i' − u_i*) / u_i*`.
pub fn fairness_probe(
    scenario: &Scenario,
    head: usize,
    solution: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    let p = OracleProblem::new(scenario, head)?;
    let star = p.utilities(solution).ok_or_else(|| Error::InfeasibleAllocation(format!("{solution:?}")))?;
    if let Some(user) = star.iter().position(|&u| !(u > 0.0)) {
        return Err(Error::ZeroUtility { user });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..sample_count {
        let Some(x) = sample_feasible(&p, solution, &mut rng) else { continue };
        let u = p.utilities(&x).expect("feasible sample");
        let agg: f64 =
            u.iter().zip(&star).zip(&scenario.bargaining_power).map(|((ui, si), a)| a * (ui - si) / si).sum();
        worst = worst.max(agg);
    }
    Ok(worst)
}

/// Number of sampled feasible allocations that improve every user by more
/// than `PARETO_MARGIN`.
pub fn pareto_probe(
    scenario: &Scenario,
    head: usize,
    solution: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<usize> {
    let p = OracleProblem::new(scenario, head)?;
    let star = p.utilities(solution).ok_or_else(|| Error::InfeasibleAllocation(format!("{solution:?}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0;
    for _ in 0..sample_count {
        let Some(x) = sample_feasible(&p, solution, &mut rng) else { continue };
        let u = p.utilities(&x).expect("feasible sample");
        if u.iter().zip(&star).all(|(a, b)| a - b > PARETO_MARGIN * b.abs().max(1.0)) {
            count += 1;
        }
    }
    Ok(count)
}

/// Upper estimate of `max ‖∇F‖₁` over the feasible part of the box of half
/// width `radius` around `center`: sampled corners and interior points,
/// with a 50% margin.
pub fn lipschitz_bound(scenario: &Scenario, head: usize, center: &[f64], radius: f64, seed: u64) -> Result<f64> {
    let p = OracleProblem::new(scenario, head)?;
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = (0..(1usize << n))
        .map(|mask| (0..n).map(|k| if mask >> k & 1 == 1 { center[k] + radius } else { center[k] - radius }).collect())
        .collect();
    for _ in 0..256 {
        points.push(center.iter().map(|&c| c + radius * rng.random_range(-1.0..1.0)).collect());
    }
    points.push(center.to_vec());
    let mut best = 0.0f64;
    for x in points {
        let x: Vec<f64> = x.iter().zip(&p.upper).map(|(&v, &u)| v.clamp(0.0, u)).collect();
        if !p.is_feasible(&x, FEASIBILITY_SLACK) || !p.objective(&x).is_finite() {
            continue;
        }
        let g: f64 = p.objective_gradient(&x).iter().map(|v| v.abs()).sum();
        if g.is_finite() {
            best = best.max(g);
        }
    }
    Ok(1.5 * best)
}

/// Flows of the one-item-per-user, all-interested game written directly in
/// per-user form. `x[i]` is the airtime of user `i`'s item.
pub fn homogeneous_flows(scenario: &Scenario, head: usize, x: &[f64]) -> Vec<FlowSummary> {
    let n = scenario.user_count();
    let c = &scenario.link_capacity;
    let weight = |i: usize| {
        let fan_out: f64 = (0..n).filter(|&j| j != head && j != i).map(|j| 1.0 / c[head][j]).sum();
        if i == head {
            fan_out
        } else {
            1.0 / c[i][head] + fan_out
        }
    };
    let theta: Vec<f64> = (0..n).map(|i| x[i] / weight(i)).collect();
    let others = |i: usize| (0..n).filter(move |&j| j != i).map(|j| theta[j]).sum::<f64>();
    let mut flows = vec![FlowSummary::default(); n];
    for i in 0..n {
        let f = &mut flows[i];
        f.disseminated = (n - 1) as f64 * theta[i];
        f.received_of_interest = others(i);
        if i == head {
            f.forwarded = (n - 2) as f64 * others(i);
            f.sent = f.disseminated + f.forwarded;
            f.received = others(i);
        } else {
            f.sent = theta[i];
            f.received = f.received_of_interest;
        }
        f.energy = scenario.unit_energy_send * f.sent + scenario.unit_energy_recv * f.received;
    }
    flows
}

/// The homogeneous game with its coefficients read off [`homogeneous_flows`],
/// plus per-user airtime bounds.
pub fn homogeneous_game(scenario: &Scenario, head: usize) -> Result<(AirtimeGame, Vec<f64>)> {
    scenario.validate()?;
    let n = scenario.user_count();
    if head >= n {
        return Err(Error::HeadOutOfRange { head, users: n });
    }
    let homogeneous = scenario.items.len() == n
        && (0..n).all(|i| {
            let mut own = scenario.items_of(i);
            matches!((own.next(), own.next()), (Some(m), None) if scenario.items[m].interested.len() == n - 1)
        });
    if !homogeneous {
        return Err(Error::InvalidScenario(vec!["not a one-item-per-user, all-interested scenario".into()]));
    }
    let unit: Vec<Vec<FlowSummary>> = (0..n)
        .map(|k| {
            let mut x = vec![0.0; n];
            x[k] = 1.0;
            homogeneous_flows(scenario, head, &x)
        })
        .collect();
    let users = (0..n)
        .map(|i| UserTerms {
            baseline: Baseline::default(),
            value_coef: (0..n).map(|k| unit[k][i].disseminated + unit[k][i].received_of_interest).collect(),
            energy_coef: (0..n).map(|k| unit[k][i].energy).collect(),
            reward_coef: (0..n)
                .map(|k| if i == head { scenario.unit_reward * unit[k][i].forwarded } else { 0.0 })
                .collect(),
            budget: scenario.users[i].energy_budget,
            sensitivity: scenario.users[i].sensitivity,
            power: scenario.bargaining_power[i],
        })
        .collect();
    let upper = (0..n)
        .map(|i| {
            let m = scenario.items_of(i).next().expect("checked above");
            // x / W = θ, so the bound is size · W, with W = x / θ at x = 1
            scenario.items[m].size / unit[i][i].disseminated * (n - 1) as f64
        })
        .collect();
    Ok((AirtimeGame { dim: n, users }, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserProfile;
    use crate::solver::{solve_subproblem, SolverOptions};

    fn pair(delta: f64, gamma: f64, budget: f64, t: f64) -> Scenario {
        Scenario::homogeneous(
            vec![UserProfile { energy_budget: budget, sensitivity: delta }; 2],
            &[10.0, 10.0],
            Scenario::uniform_capacity(2, 4.0),
            t,
            gamma,
            vec![0.5, 0.5],
            2.85,
            2.85,
        )
    }

    #[test]
    fn grid_spec_rejects_nonpositive_resolution() {
        assert!(GridSpec::new(0.0).is_err());
        assert!(GridSpec::new(-1.0).is_err());
    }

    #[test]
    fn grid_on_zero_horizon_returns_origin() {
        let g = grid_search(&pair(1.0, 0.0, 500.0, 0.0), 0, &GridSpec::new(0.1).unwrap()).unwrap();
        assert_eq!(g.x, vec![0.0, 0.0]);
        assert_eq!(g.plain_product, 0.0);
        assert_eq!(g.objective, f64::NEG_INFINITY);
    }

    #[test]
    fn grid_matches_solver_on_symmetric_pair() {
        let s = pair(0.0, 0.0, 1e9, 2.0);
        let g = grid_search(&s, 0, &GridSpec::new(0.001).unwrap()).unwrap();
        let sol = solve_subproblem(&s, 0, &SolverOptions::default()).unwrap();
        let p = OracleProblem::new(&s, 0).unwrap();
        let f = p.objective(&sol.allocation.as_slice()[..2]);
        assert!((g.objective - f).abs() < 1e-6, "{} vs {}", g.objective, f);
    }

    #[test]
    fn grid_leaves_airtime_unused_when_energy_binds() {
        let s = pair(1.0, 0.0, 20.0, 20.0);
        let g = grid_search(&s, 0, &GridSpec::new(0.05).unwrap()).unwrap();
        assert!(g.x.iter().sum::<f64>() < 20.0 - 1.0);
    }

    #[test]
    fn grid_rejects_too_many_variables() {
        let s = Scenario::homogeneous(
            vec![UserProfile { energy_budget: 500.0, sensitivity: 1.0 }; 5],
            &[1.0; 5],
            Scenario::uniform_capacity(5, 4.0),
            1.0,
            0.0,
            vec![0.2; 5],
            1.0,
            1.0,
        );
        assert_eq!(grid_search(&s, 0, &GridSpec::new(0.5).unwrap()), Err(Error::DimensionTooLarge { dims: 5, max: 4 }));
    }

    #[test]
    fn nnls_recovers_nonnegative_combination() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let l = nnls(&cols, &[2.0, -1.0]);
        assert!(l.iter().all(|&v| v >= 0.0));
        // best non-negative fit to (2, -1) uses only the first column
        assert!((l[0] - 2.0).abs() < 1e-12 && l[1] == 0.0 && l[2] == 0.0, "{l:?}");
    }

    #[test]
    fn kkt_residual_is_large_at_origin() {
        let s = pair(1.0, 0.01, 500.0, 2.0);
        assert!(matches!(kkt_residual(&s, 0, &[0.0, 0.0]), Err(Error::InfeasibleAllocation(_))));
        let r = kkt_residual(&s, 0, &[1e-3, 1e-3]).unwrap();
        assert!(r.residual() > 1.0);
    }

    #[test]
    fn kkt_residual_small_at_optimum() {
        let s = pair(1.0, 0.01, 500.0, 2.0);
        let sol = solve_subproblem(&s, 0, &SolverOptions::default()).unwrap();
        let r = kkt_residual(&s, 0, sol.allocation.as_slice()).unwrap();
        assert!(r.residual() < 1e-6, "{r:?}");
    }

    #[test]
    fn fairness_probe_cases() {
        let s = pair(1.0, 0.01, 500.0, 2.0);
        let sol = solve_subproblem(&s, 0, &SolverOptions::default()).unwrap();
        let x = sol.allocation.as_slice();
        assert!(fairness_probe(&s, 0, x, 1000, 7).unwrap() <= 1e-6);
        assert_eq!(fairness_probe(&s, 0, x, 0, 7).unwrap(), f64::NEG_INFINITY);
        assert!(fairness_probe(&s, 0, &[0.5, 0.1], 1000, 7).unwrap() > 0.0);
        assert!(matches!(fairness_probe(&s, 0, &[0.0, 0.0], 10, 7), Err(Error::ZeroUtility { .. })));
        assert_eq!(pareto_probe(&s, 0, x, 1000, 7).unwrap(), 0);
        assert!(pareto_probe(&s, 0, &[0.5, 0.1], 1000, 7).unwrap() > 0);
    }

    #[test]
    fn homogeneous_flows_match_general_plan() {
        let mut s = pair(1.0, 0.01, 500.0, 2.0);
        s = Scenario::homogeneous(
            s.users.iter().cloned().chain([s.users[0].clone(), s.users[0].clone()]).collect(),
            &[10.0, 8.0, 6.0, 4.0],
            vec![
                vec![0.0, 3.0, 4.0, 2.0],
                vec![3.0, 0.0, 2.0, 1.0],
                vec![4.0, 2.0, 0.0, 3.0],
                vec![2.0, 1.0, 3.0, 0.0],
            ],
            20.0,
            0.01,
            vec![0.25; 4],
            2.85,
            2.5,
        );
        for head in 0..4 {
            let p = OracleProblem::new(&s, head).unwrap();
            let x = [0.7, 1.3, 2.9, 0.4];
            let direct = homogeneous_flows(&s, head, &x);
            let general = p.flows(&x);
            for (a, b) in direct.iter().zip(&general) {
                for (u, v) in [
                    (a.disseminated, b.disseminated),
                    (a.received_of_interest, b.received_of_interest),
                    (a.forwarded, b.forwarded),
                    (a.sent, b.sent),
                    (a.received, b.received),
                    (a.energy, b.energy),
                ] {
                    assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
                }
            }
        }
    }
}
