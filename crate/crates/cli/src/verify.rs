//! Oracle checks of one scenario's solver output.

use anyhow::Result;
use nbs_airtime::oracle::{
    fairness_probe, grid_search, kkt_residual, lipschitz_bound, pareto_probe, GridSpec, OracleProblem,
};
use nbs_airtime::solver::solve_all_heads;
use nbs_airtime::{run_algorithm1, solve_joint, Scenario, SolveStatus, SolverOptions, SubProblem};
use serde::Serialize;

pub const KKT_LIMIT: f64 = 1e-6;
pub const FAIRNESS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub samples: usize,
    pub resolution: f64,
    /// Grid search is skipped above this many grid points.
    pub max_grid_points: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { samples: 1000, resolution: 0.05, max_grid_points: 5e6, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCheck {
    pub resolution: f64,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateCheck {
    /// 1-based.
    pub head: usize,
    pub status: String,
    pub kkt_residual: Option<f64>,
    pub fairness: Option<f64>,
    pub pareto_violations: Option<usize>,
    pub grid: Option<GridCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub candidates: Vec<CandidateCheck>,
    /// 1-based heads from the centralized and distributed runs.
    pub centralized_head: Option<usize>,
    pub distributed_head: Option<usize>,
    pub passed: bool,
}

pub fn verify_scenario(scenario: &Scenario, solver: &SolverOptions, opts: &VerifyOptions) -> Result<VerifyReport> {
    let subs = solve_all_heads(scenario, solver)?;
    let mut candidates = Vec::with_capacity(subs.len());
    for sol in &subs {
        let head = sol.head;
        let mut check = CandidateCheck {
            head: head + 1,
            status: sol.status.as_str().into(),
            kkt_residual: None,
            fairness: None,
            pareto_violations: None,
            grid: None,
            passed: true,
        };
        let checkable = matches!(sol.status, SolveStatus::Optimal | SolveStatus::Inaccurate)
            && sol.utilities.iter().all(|&u| u > 0.0);
        if checkable {
            let x: Vec<f64> = SubProblem::new(scenario, head)?.vars.iter().map(|&m| sol.allocation.get(m)).collect();
            let kkt = kkt_residual(scenario, head, &x)?.residual();
            let fair = fairness_probe(scenario, head, &x, opts.samples, opts.seed)?;
            let pareto = pareto_probe(scenario, head, &x, opts.samples, opts.seed)?;
            check.passed = kkt <= KKT_LIMIT && fair <= FAIRNESS_LIMIT && pareto == 0;
            check.kkt_residual = Some(kkt);
            check.fairness = Some(fair);
            check.pareto_violations = Some(pareto);

            let p = OracleProblem::new(scenario, head)?;
            let points: f64 = p.upper.iter().map(|u| (u / opts.resolution).floor() + 1.0).product();
            if p.dim() <= GridSpec::new(opts.resolution)?.max_dims && points <= opts.max_grid_points {
                let g = grid_search(scenario, head, &GridSpec::new(opts.resolution)?)?;
                let bound = lipschitz_bound(scenario, head, &x, opts.resolution, opts.seed)? * opts.resolution;
                let gap = (p.objective(&x) - g.objective).abs();
                check.passed &= gap <= bound;
                check.grid = Some(GridCheck { resolution: opts.resolution, gap, bound });
            }
        }
        candidates.push(check);
    }
    let centralized_head = solve_joint(scenario, solver).ok().map(|j| j.head + 1);
    let distributed_head = run_algorithm1(scenario, solver).ok().map(|j| j.head + 1);
    let passed = candidates.iter().all(|c| c.passed) && centralized_head == distributed_head;
    Ok(VerifyReport { candidates, centralized_head, distributed_head, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_scenario_verifies() {
        let s = nbs_airtime::presets::table2([0.0, 1.0, 1.0, 1.0]);
        let opts = VerifyOptions { samples: 200, max_grid_points: 0.0, ..VerifyOptions::default() };
        let r = verify_scenario(&s, &SolverOptions::default(), &opts).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.centralized_head, Some(1));
        assert!(r.candidates.iter().all(|c| c.grid.is_none()));
    }
}
