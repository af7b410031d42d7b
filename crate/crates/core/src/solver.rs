//! Per-head concave sub-problems, the master argmax over heads, and a
//! message-passing simulation of the distributed selection protocol.

use std::sync::mpsc;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AirtimeGame, Baseline};
use crate::model::{build_dissemination_plan, flows_unchecked, Allocation, DisseminationPlan, FlowSummary, Scenario};
use crate::utility::{nash_products, NashProducts};

/// Candidate products within this relative distance of the best are tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Upper bounds below this are treated as zero and the variable is dropped.
const MIN_UPPER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target for the KKT residual of the returned point.
    pub tolerance: f64,
    /// Newton iterations allowed per centering step.
    pub max_newton_iterations: usize,
    /// Initial barrier weight `t`.
    pub barrier_initial: f64,
    /// Factor `μ > 1` applied to `t` between centering steps.
    pub barrier_growth: f64,
    /// Utilities are kept at or above this floor.
    pub utility_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-8,
            max_newton_iterations: 200,
            barrier_initial: 1.0,
            barrier_growth: 10.0,
            utility_floor: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidOption(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if !(self.barrier_growth > 1.0) {
            return Err(Error::InvalidOption(format!("barrier growth must be > 1, got {}", self.barrier_growth)));
        }
        if !(self.barrier_initial > 0.0) {
            return Err(Error::InvalidOption("initial barrier weight must be > 0".into()));
        }
        if !(self.utility_floor >= 0.0) {
            return Err(Error::InvalidOption("utility floor must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Converged, but the KKT residual stayed above the tolerance.
    Inaccurate,
    /// No allocation gives every user at least the utility floor.
    Infeasible,
    /// No airtime to allocate.
    BudgetBoundary,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::BudgetBoundary => "budget_boundary",
        }
    }

    pub fn admits_agreement(&self) -> bool {
        !matches!(self, SolveStatus::Infeasible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Lower(usize),
    Upper(usize),
    Airtime,
    Energy(usize),
}

/// `a·x <= b`
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub kind: ConstraintKind,
    pub a: Vec<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.b - self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()
    }
}

/// Bounds, shared airtime and energy budgets of a game, all linear in `x`.
pub fn linear_constraints(game: &AirtimeGame, upper: &[f64], budget: f64) -> Vec<LinearConstraint> {
    let n = game.dim;
    let unit = |k: usize, s: f64| {
        let mut a = vec![0.0; n];
        a[k] = s;
        a
    };
    let mut cons = Vec::with_capacity(2 * n + 1 + game.users.len());
    for (k, &ub) in upper.iter().enumerate() {
        cons.push(LinearConstraint { kind: ConstraintKind::Lower(k), a: unit(k, -1.0), b: 0.0 });
        cons.push(LinearConstraint { kind: ConstraintKind::Upper(k), a: unit(k, 1.0), b: ub });
    }
    cons.push(LinearConstraint { kind: ConstraintKind::Airtime, a: vec![1.0; n], b: budget });
    for (i, u) in game.users.iter().enumerate() {
        if u.energy_coef.iter().any(|&c| c != 0.0) {
            cons.push(LinearConstraint {
                kind: ConstraintKind::Energy(i),
                a: u.energy_coef.clone(),
                b: u.budget - u.baseline.energy,
            });
        }
    }
    cons
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub x: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

struct Barrier<'a> {
    game: &'a AirtimeGame,
    cons: Vec<LinearConstraint>,
    /// Users whose utility moves with `x` and must stay above the floor.
    floored: Vec<usize>,
    floor: f64,
}

struct Polished {
    x: Vec<f64>,
    lambda: Vec<f64>,
}

impl<'a> Barrier<'a> {
    fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.cons.iter().all(|c| c.slack(x) > 0.0)
            && self.floored.iter().all(|&i| self.game.users[i].utility(x) - self.floor > 0.0)
            && self.game.objective(x).is_finite()
    }

    fn value(&self, x: &[f64], t: f64) -> f64 {
        if !self.strictly_feasible(x) {
            return f64::NEG_INFINITY;
        }
        let mut v = t * self.game.objective(x);
        for c in &self.cons {
            v += c.slack(x).ln();
        }
        for &i in &self.floored {
            v += (self.game.users[i].utility(x) - self.floor).ln();
        }
        v
    }

    fn derivatives(&self, x: &[f64], t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let mut g = self.game.objective_gradient(x) * t;
        let mut h = self.game.objective_hessian(x) * t;
        for c in &self.cons {
            let s = c.slack(x);
            let a = DVector::from_column_slice(&c.a);
            g -= &a / s;
            h -= &a * a.transpose() / (s * s);
        }
        for &i in &self.floored {
            let u = &self.game.users[i];
            let s = u.utility(x) - self.floor;
            let du = u.gradient(x);
            g += &du / s;
            h += u.hessian(x) / s;
            h -= &du * du.transpose() / (s * s);
        }
        (g, h)
    }

    /// Damped Newton on the barrier function for fixed `t`.
    fn center(&self, x: &mut Vec<f64>, t: f64, max_iter: usize) -> usize {
        let mut iters = 0;
        while iters < max_iter {
            iters += 1;
            let (g, h) = self.derivatives(x, t);
            let neg_h = -h;
            let step = match neg_h.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    let shift = 1e-12 * neg_h.diagonal().amax().max(1.0);
                    match (neg_h + DMatrix::identity(x.len(), x.len()) * shift).cholesky() {
                        Some(ch) => ch.solve(&g),
                        None => break,
                    }
                }
            };
            let decrement = g.dot(&step);
            if !(decrement > 1e-10) {
                break;
            }
            let base = self.value(x, t);
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-16 {
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, di)| xi + s * di).collect();
                let v = self.value(&cand, t);
                if v.is_finite() && v > base && v >= base + 0.25 * s * decrement {
                    *x = cand;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        iters
    }

    /// Multipliers implied by the barrier at a centered point.
    fn barrier_multipliers(&self, x: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let lin = self.cons.iter().map(|c| 1.0 / (t * c.slack(x))).collect();
        let floor = self.floored.iter().map(|&i| 1.0 / (t * (self.game.users[i].utility(x) - self.floor))).collect();
        (lin, floor)
    }

    /// Max of stationarity, complementarity and primal violation.
    fn residual(&self, x: &[f64], lambda: &[f64], floor_mult: &[f64]) -> f64 {
        let mut r = self.game.objective_gradient(x);
        for (c, &l) in self.cons.iter().zip(lambda) {
            r -= DVector::from_column_slice(&c.a) * l;
        }
        for (&i, &m) in self.floored.iter().zip(floor_mult) {
            r += self.game.users[i].gradient(x) * m;
        }
        let mut worst = r.amax();
        for (c, &l) in self.cons.iter().zip(lambda) {
            let s = c.slack(x);
            worst = worst.max((l * s).abs()).max(-s);
        }
        for (&i, &m) in self.floored.iter().zip(floor_mult) {
            let s = self.game.users[i].utility(x) - self.floor;
            worst = worst.max((m * s).abs()).max(-s);
        }
        worst
    }

    /// Newton on the objective restricted to `a_j·x = b_j` for `active`.
    fn equality_newton(&self, x0: &[f64], active: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = x0.len();
        let p = active.len();
        let a = DMatrix::from_fn(p, n, |r, c| self.cons[active[r]].a[c]);
        let b = DVector::from_iterator(p, active.iter().map(|&j| self.cons[j].b));
        let mut x = DVector::from_column_slice(x0);
        if p > 0 {
            let fix = a.clone().pseudo_inverse(1e-13).ok()? * (&b - &a * &x);
            x += fix;
        }
        for _ in 0..100 {
            let xs = x.as_slice();
            let f0 = self.game.objective(xs);
            if !f0.is_finite() {
                return None;
            }
            let g = self.game.objective_gradient(xs);
            let h = self.game.objective_hessian(xs);
            let mut kkt = DMatrix::zeros(n + p, n + p);
            kkt.view_mut((0, 0), (n, n)).copy_from(&(-h));
            kkt.view_mut((0, n), (n, p)).copy_from(&a.transpose());
            kkt.view_mut((n, 0), (p, n)).copy_from(&a);
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&g);
            rhs.rows_mut(n, p).copy_from(&(&b - &a * &x));
            let sol = kkt.svd(true, true).solve(&rhs, 1e-14).ok()?;
            let dx = sol.rows(0, n).into_owned();
            let decrement = g.dot(&dx);
            if dx.amax() < 1e-15 || decrement.abs() < 1e-24 {
                break;
            }
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-12 {
                let cand = &x + &dx * s;
                let f = self.game.objective(cand.as_slice());
                if f.is_finite() && f >= f0 + 1e-4 * s * decrement - 4.0 * f64::EPSILON * f0.abs() {
                    x = cand;
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let g = self.game.objective_gradient(x.as_slice());
        let nu = if p > 0 { a.transpose().svd(true, true).solve(&g, 1e-14).ok()? } else { DVector::zeros(0) };
        Some((x.as_slice().to_vec(), nu.as_slice().to_vec()))
    }

    /// Active-set refinement of a barrier solution. Only linear constraints
    /// may be active.
    fn polish(&self, xb: &[f64], t: f64) -> Option<Polished> {
        for &i in &self.floored {
            let s = self.game.users[i].utility(xb) - self.floor;
            if 1.0 / (t * s) > s {
                return None;
            }
        }
        let mut active: Vec<usize> = (0..self.cons.len())
            .filter(|&j| {
                let s = self.cons[j].slack(xb);
                1.0 / (t * s) > s
            })
            .collect();
        for _ in 0..(2 * self.cons.len() + 2) {
            if active.len() > xb.len() {
                // more active constraints than variables: keep the tightest ones
                active.sort_by(|&i, &j| self.cons[i].slack(xb).total_cmp(&self.cons[j].slack(xb)));
                active.truncate(xb.len());
                active.sort_unstable();
            }
            let (x, nu) = self.equality_newton(xb, &active)?;
            let worst_mult = nu.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1));
            if let Some((pos, &m)) = worst_mult {
                if m < -1e-12 {
                    active.remove(pos);
                    continue;
                }
            }
            let violated = (0..self.cons.len())
                .filter(|j| !active.contains(j))
                .map(|j| (j, self.cons[j].slack(&x)))
                .filter(|&(_, s)| s < -1e-13)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = violated {
                active.push(j);
                active.sort_unstable();
                continue;
            }
            if !self.floored.iter().all(|&i| self.game.users[i].utility(&x) >= self.floor) {
                return None;
            }
            let mut x = x;
            let mut lambda = vec![0.0; self.cons.len()];
            for (&j, &m) in active.iter().zip(&nu) {
                lambda[j] = m.max(0.0);
                match self.cons[j].kind {
                    ConstraintKind::Lower(k) => x[k] = 0.0,
                    ConstraintKind::Upper(k) => x[k] = self.cons[j].b,
                    _ => {}
                }
            }
            return Some(Polished { x, lambda });
        }
        None
    }

    /// Feasible interior start: a shrinking multiple of an equal split.
    fn phase_one(&self, upper: &[f64], budget: f64) -> Option<Vec<f64>> {
        let n = upper.len();
        let total = budget.min(upper.iter().sum());
        let base: Vec<f64> = upper.iter().map(|&ub| (total / n as f64).min(ub)).collect();
        let mut s = 0.5;
        while s >= 1e-12 {
            let x: Vec<f64> = base.iter().map(|b| b * s).collect();
            if self.strictly_feasible(&x) {
                return Some(x);
            }
            s *= 0.5;
        }
        None
    }
}

/// Maximizes `Σ α_i log u_i(x)` subject to `0 <= x <= upper`, `Σ x <= budget`,
/// the energy budgets, and `u_i >= utility_floor`.
pub fn solve_game(game: &AirtimeGame, upper: &[f64], budget: f64, options: &SolverOptions) -> GameSolution {
    let n = game.dim;
    assert_eq!(upper.len(), n, "one upper bound per variable");
    let floor = options.utility_floor;
    let mut floored = Vec::new();
    for (i, u) in game.users.iter().enumerate() {
        if u.is_constant() {
            if u.utility(&vec![0.0; n]) < floor {
                return GameSolution {
                    x: vec![0.0; n],
                    status: SolveStatus::Infeasible,
                    iterations: 0,
                    kkt_residual: f64::INFINITY,
                };
            }
        } else {
            floored.push(i);
        }
    }
    if budget <= 0.0 {
        return GameSolution { x: vec![0.0; n], status: SolveStatus::BudgetBoundary, iterations: 0, kkt_residual: 0.0 };
    }

    // variables with no room are pinned at zero
    let free: Vec<usize> = (0..n).filter(|&k| upper[k] > MIN_UPPER).collect();
    if free.len() < n {
        let reduced = restrict(game, &free);
        let ub: Vec<f64> = free.iter().map(|&k| upper[k]).collect();
        let sol = solve_game(&reduced, &ub, budget, options);
        let mut x = vec![0.0; n];
        for (&k, &v) in free.iter().zip(&sol.x) {
            x[k] = v;
        }
        return GameSolution { x, ..sol };
    }
    if n == 0 {
        return GameSolution { x: vec![], status: SolveStatus::Optimal, iterations: 0, kkt_residual: 0.0 };
    }

    let barrier = Barrier { game, cons: linear_constraints(game, upper, budget), floored, floor };
    let Some(mut x) = barrier.phase_one(upper, budget) else {
        debug!("no strictly feasible start");
        return GameSolution {
            x: vec![0.0; n],
            status: SolveStatus::Infeasible,
            iterations: 0,
            kkt_residual: f64::INFINITY,
        };
    };

    let m = (barrier.cons.len() + barrier.floored.len()) as f64;
    let gap = (options.tolerance * 0.1).max(1e-11);
    let mut t = options.barrier_initial;
    let mut iterations = 0;
    loop {
        iterations += barrier.center(&mut x, t, options.max_newton_iterations);
        if m / t < gap {
            break;
        }
        t *= options.barrier_growth;
    }

    let (lin, fl) = barrier.barrier_multipliers(&x, t);
    let mut best_x = x.clone();
    let mut best_res = barrier.residual(&x, &lin, &fl);
    if let Some(p) = barrier.polish(&x, t) {
        let res = barrier.residual(&p.x, &p.lambda, &vec![0.0; barrier.floored.len()]);
        let improves = game.objective(&p.x) >= game.objective(&x) - 1e-12 * (1.0 + game.objective(&x).abs());
        if improves && res <= best_res.max(options.tolerance) {
            best_x = p.x;
            best_res = res;
        }
    }
    let status = if best_res <= options.tolerance {
        SolveStatus::Optimal
    } else {
        warn!("KKT residual {best_res:.3e} above tolerance {:.1e}", options.tolerance);
        SolveStatus::Inaccurate
    };
    GameSolution { x: best_x, status, iterations, kkt_residual: best_res }
}

/// The same game over a subset of its variables.
fn restrict(game: &AirtimeGame, keep: &[usize]) -> AirtimeGame {
    let pick = |v: &Vec<f64>| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
    AirtimeGame {
        dim: keep.len(),
        users: game
            .users
            .iter()
            .map(|u| crate::game::UserTerms {
                value_coef: pick(&u.value_coef),
                energy_coef: pick(&u.energy_coef),
                reward_coef: pick(&u.reward_coef),
                ..u.clone()
            })
            .collect(),
    }
}

/// State a round starts from; the default is a fresh contact.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundContext<'a> {
    /// Per item: the head already holds it.
    pub stored: Option<&'a [bool]>,
    /// Per item MB still to deliver; defaults to the item sizes.
    pub remaining: Option<&'a [f64]>,
    /// Airtime for this round; defaults to the scenario horizon.
    pub budget: Option<f64>,
    pub baselines: Option<&'a [Baseline]>,
}

/// One candidate head's allocation problem.
#[derive(Debug, Clone)]
pub struct SubProblem {
    pub head: usize,
    pub plan: DisseminationPlan,
    /// Item index of each allocation variable.
    pub vars: Vec<usize>,
    pub upper: Vec<f64>,
    pub budget: f64,
    pub game: AirtimeGame,
}

impl SubProblem {
    pub fn new(scenario: &Scenario, head: usize) -> Result<SubProblem> {
        SubProblem::with_context(scenario, head, &RoundContext::default())
    }

    pub fn with_context(scenario: &Scenario, head: usize, ctx: &RoundContext) -> Result<SubProblem> {
        let plan = build_dissemination_plan(scenario, head, ctx.stored)?;
        let vars = plan.active_items();
        let upper = vars
            .iter()
            .map(|&m| {
                let r = &plan.routes[m];
                let left = ctx.remaining.map_or(r.size, |rem| rem[m].clamp(0.0, r.size));
                left * r.time_weight
            })
            .collect();
        let game = AirtimeGame::from_plan(scenario, &plan, &vars, ctx.baselines);
        Ok(SubProblem { head, plan, vars, upper, budget: ctx.budget.unwrap_or(scenario.airtime_horizon), game })
    }

    pub fn allocation(&self, x: &[f64]) -> Allocation {
        Allocation::from_active(self.plan.routes.len(), &self.vars, x)
    }

    pub fn solve(&self, options: &SolverOptions) -> SubSolution {
        let gs = solve_game(&self.game, &self.upper, self.budget, options);
        let x = if gs.status == SolveStatus::Infeasible { vec![0.0; self.vars.len()] } else { gs.x };
        let allocation = self.allocation(&x);
        let flows = flows_unchecked(&self.plan, allocation.as_slice());
        let utilities = self.game.utilities(&x);
        let products = match gs.status {
            SolveStatus::Infeasible => NashProducts { weighted: 0.0, plain: 0.0, log_objective: f64::NEG_INFINITY },
            _ => nash_products(&utilities, &self.game.powers()).unwrap_or(NashProducts {
                weighted: 0.0,
                plain: 0.0,
                log_objective: f64::NEG_INFINITY,
            }),
        };
        SubSolution {
            head: self.head,
            allocation,
            utilities,
            flows,
            products,
            iterations: gs.iterations,
            kkt_residual: gs.kkt_residual,
            status: gs.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubSolution {
    pub head: usize,
    pub allocation: Allocation,
    pub utilities: Vec<f64>,
    /// Flows generated by this round's allocation alone.
    pub flows: Vec<FlowSummary>,
    pub products: NashProducts,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub status: SolveStatus,
}

impl SubSolution {
    /// MB delivered in total, `Σ d_i`.
    pub fn total_disseminated(&self) -> f64 {
        self.flows.iter().map(|f| f.disseminated).sum()
    }
}

pub fn solve_subproblem(scenario: &Scenario, head: usize, options: &SolverOptions) -> Result<SubSolution> {
    scenario.validate()?;
    options.validate()?;
    Ok(SubProblem::new(scenario, head)?.solve(options))
}

/// Solves every candidate head, in parallel, ordered by head index.
pub fn solve_all_heads(scenario: &Scenario, options: &SolverOptions) -> Result<Vec<SubSolution>> {
    scenario.validate()?;
    options.validate()?;
    (0..scenario.user_count()).into_par_iter().map(|h| SubProblem::new(scenario, h).map(|p| p.solve(options))).collect()
}

/// Per-candidate `p*` as broadcast by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub from: usize,
    /// `None` when the sender's sub-problem is infeasible.
    pub weighted_product: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution {
    pub head: usize,
    pub allocation: Allocation,
    pub utilities: Vec<f64>,
    pub flows: Vec<FlowSummary>,
    pub products: NashProducts,
    /// One entry per candidate head, by index.
    pub candidates: Vec<SubSolution>,
    /// Broadcasts exchanged by the distributed protocol; empty when centralized.
    pub messages: Vec<Broadcast>,
}

impl JointSolution {
    pub fn selected(&self) -> &SubSolution {
        &self.candidates[self.head]
    }

    /// One-hot head indicator.
    pub fn head_indicator(&self) -> Vec<u8> {
        (0..self.candidates.len()).map(|i| u8::from(i == self.head)).collect()
    }
}

/// How to choose among tied candidates.
#[derive(Debug, Clone, PartialEq)]
pub enum TieBreak {
    LowestIndex,
    /// Largest value wins, then lowest index.
    GreatestScore(Vec<f64>),
}

/// Candidates whose weighted product ties with the best, in index order.
pub fn tied_best(products: &[Option<f64>]) -> Vec<usize> {
    let best = products.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return vec![];
    }
    products
        .iter()
        .enumerate()
        .filter_map(|(h, p)| p.filter(|&p| p >= best - TIE_TOLERANCE * best.abs()).map(|_| h))
        .collect()
}

fn break_tie(tied: &[usize], tie: &TieBreak) -> usize {
    match tie {
        TieBreak::LowestIndex => tied[0],
        TieBreak::GreatestScore(score) => {
            let top = tied.iter().map(|&h| score[h]).fold(f64::NEG_INFINITY, f64::max);
            *tied.iter().find(|&&h| score[h] >= top).unwrap_or(&tied[0])
        }
    }
}

/// Master problem: the head with the largest weighted product, lowest index on ties.
pub fn select_head(subsolutions: Vec<SubSolution>) -> Result<JointSolution> {
    select_head_with(subsolutions, &TieBreak::LowestIndex)
}

pub fn select_head_with(subsolutions: Vec<SubSolution>, tie: &TieBreak) -> Result<JointSolution> {
    let products: Vec<Option<f64>> =
        subsolutions.iter().map(|s| s.status.admits_agreement().then_some(s.products.weighted)).collect();
    let tied = tied_best(&products);
    if tied.is_empty() {
        return Err(Error::NoAgreement);
    }
    let head = break_tie(&tied, tie);
    let chosen = &subsolutions[head];
    Ok(JointSolution {
        head,
        allocation: chosen.allocation.clone(),
        utilities: chosen.utilities.clone(),
        flows: chosen.flows.clone(),
        products: chosen.products,
        candidates: subsolutions,
        messages: vec![],
    })
}

/// Centralized joint head selection and airtime allocation.
pub fn solve_joint(scenario: &Scenario, options: &SolverOptions) -> Result<JointSolution> {
    select_head(solve_all_heads(scenario, options)?)
}

/// Simulates the distributed protocol: every agent solves its own
/// sub-problem as head, broadcasts `p*` to the others, and decides locally
/// whether it is the lowest-index maximizer.
pub fn run_algorithm1(scenario: &Scenario, options: &SolverOptions) -> Result<JointSolution> {
    scenario.validate()?;
    options.validate()?;
    let n = scenario.user_count();
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| mpsc::channel::<Broadcast>()).unzip();

    let outcomes: Vec<Result<(SubSolution, bool, Vec<Broadcast>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = receivers
            .into_iter()
            .enumerate()
            .map(|(me, inbox)| {
                let peers = senders.clone();
                scope.spawn(move || {
                    let sol = SubProblem::new(scenario, me)?.solve(options);
                    let msg = Broadcast {
                        from: me,
                        weighted_product: sol.status.admits_agreement().then_some(sol.products.weighted),
                    };
                    for (k, peer) in peers.iter().enumerate() {
                        if k != me {
                            peer.send(msg.clone()).expect("peer inbox open");
                        }
                    }
                    drop(peers);
                    let mut seen = vec![None; n];
                    seen[me] = msg.weighted_product;
                    let mut received = Vec::with_capacity(n - 1);
                    for m in inbox.iter().take(n - 1) {
                        seen[m.from] = m.weighted_product;
                        received.push(m);
                    }
                    let tied = tied_best(&seen);
                    let is_head = tied.first() == Some(&me);
                    received.push(msg);
                    Ok((sol, is_head, received))
                })
            })
            .collect();
        drop(senders);
        handles.into_iter().map(|h| h.join().expect("agent thread panicked")).collect()
    });

    let mut candidates = Vec::with_capacity(n);
    let mut heads = Vec::new();
    let mut messages = Vec::new();
    for (i, out) in outcomes.into_iter().enumerate() {
        let (sol, is_head, received) = out?;
        if is_head {
            heads.push(i);
        }
        // each agent's own broadcast, once
        if let Some(own) = received.into_iter().find(|m| m.from == i) {
            messages.push(own);
        }
        candidates.push(sol);
    }
    let head = match heads.as_slice() {
        [] => return Err(Error::NoAgreement),
        [h] => *h,
        _ => unreachable!("agents disagree on the head: {heads:?}"),
    };
    let chosen = &candidates[head];
    Ok(JointSolution {
        head,
        allocation: chosen.allocation.clone(),
        utilities: chosen.utilities.clone(),
        flows: chosen.flows.clone(),
        products: chosen.products,
        candidates,
        messages,
    })
}
