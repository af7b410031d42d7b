//! The bargaining objective as a smooth function of the allocation vector.
//!
//! Every flow quantity is linear in airtime, so each user's utility is
//! `log(1 + V + a·x) - g(B + c·x) + R + r·x` with constant offsets `V, B, R`
//! (zero in a single contact, cumulative totals in the slotted scheme).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{DisseminationPlan, Scenario};

/// Totals a user carries into a new allocation round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// MB disseminated plus MB of interest received.
    pub valued: f64,
    pub energy: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTerms {
    pub baseline: Baseline,
    /// d(d+b)/dx
    pub value_coef: Vec<f64>,
    /// de/dx
    pub energy_coef: Vec<f64>,
    /// d(reward)/dx, non-zero only for the head.
    pub reward_coef: Vec<f64>,
    pub budget: f64,
    pub sensitivity: f64,
    pub power: f64,
}

impl UserTerms {
    fn dot(a: &[f64], x: &[f64]) -> f64 {
        a.iter().zip(x).map(|(a, x)| a * x).sum()
    }

    pub fn valued(&self, x: &[f64]) -> f64 {
        self.baseline.valued + Self::dot(&self.value_coef, x)
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.baseline.energy + Self::dot(&self.energy_coef, x)
    }

    /// `-∞` once an energy-sensitive user reaches its budget.
    pub fn utility(&self, x: &[f64]) -> f64 {
        let v = self.valued(x);
        let e = self.energy(x);
        if v <= -1.0 || (self.sensitivity > 0.0 && e >= self.budget) {
            return f64::NEG_INFINITY;
        }
        let g = if self.sensitivity > 0.0 { self.sensitivity * e / (self.budget * (self.budget - e)) } else { 0.0 };
        v.ln_1p() - g + self.baseline.reward + Self::dot(&self.reward_coef, x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let dv = 1.0 / (1.0 + self.valued(x));
        let slack = self.budget - self.energy(x);
        let dg = if self.sensitivity > 0.0 { self.sensitivity / (slack * slack) } else { 0.0 };
        DVector::from_iterator(
            x.len(),
            (0..x.len()).map(|k| self.value_coef[k] * dv - self.energy_coef[k] * dg + self.reward_coef[k]),
        )
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let dv = 1.0 / (1.0 + self.valued(x));
        let slack = self.budget - self.energy(x);
        let d2g = if self.sensitivity > 0.0 { 2.0 * self.sensitivity / (slack * slack * slack) } else { 0.0 };
        let a = DVector::from_column_slice(&self.value_coef);
        let c = DVector::from_column_slice(&self.energy_coef);
        let mut h = DMatrix::zeros(n, n);
        h -= &a * a.transpose() * (dv * dv);
        h -= &c * c.transpose() * d2g;
        h
    }

    /// Utility does not depend on the allocation.
    pub fn is_constant(&self) -> bool {
        self.value_coef.iter().chain(&self.energy_coef).chain(&self.reward_coef).all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirtimeGame {
    pub dim: usize,
    pub users: Vec<UserTerms>,
}

impl AirtimeGame {
    /// Game over the airtime of `vars` (item indices) for the plan's head.
    pub fn from_plan(
        scenario: &Scenario,
        plan: &DisseminationPlan,
        vars: &[usize],
        baselines: Option<&[Baseline]>,
    ) -> AirtimeGame {
        let n = scenario.user_count();
        let dim = vars.len();
        let head = plan.head;
        let (es, er) = (scenario.unit_energy_send, scenario.unit_energy_recv);
        let mut users: Vec<UserTerms> = (0..n)
            .map(|i| UserTerms {
                baseline: baselines.map(|b| b[i]).unwrap_or_default(),
                value_coef: vec![0.0; dim],
                energy_coef: vec![0.0; dim],
                reward_coef: vec![0.0; dim],
                budget: scenario.users[i].energy_budget,
                sensitivity: scenario.users[i].sensitivity,
                power: scenario.bargaining_power[i],
            })
            .collect();
        for (k, &m) in vars.iter().enumerate() {
            let r = &plan.routes[m];
            let w = r.time_weight;
            let nt = r.transmissions as f64;
            let beta = r.beta();
            users[r.owner].value_coef[k] += nt / w;
            for &i in &r.interested {
                if i != head || r.head_needs_copy {
                    users[i].value_coef[k] += 1.0 / w;
                    if i != head {
                        users[i].energy_coef[k] += er / w;
                    }
                }
            }
            if r.owner == head {
                users[head].energy_coef[k] += es * nt / w;
            } else {
                users[r.owner].energy_coef[k] += es * beta / w;
                users[head].energy_coef[k] += es * (nt - beta) / w + er * beta / w;
                users[head].reward_coef[k] += scenario.unit_reward * (nt - beta) / w;
            }
        }
        AirtimeGame { dim, users }
    }

    pub fn utilities(&self, x: &[f64]) -> Vec<f64> {
        self.users.iter().map(|u| u.utility(x)).collect()
    }

    pub fn energies(&self, x: &[f64]) -> Vec<f64> {
        self.users.iter().map(|u| u.energy(x)).collect()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.power).collect()
    }

    /// `Σ α_i log u_i`; users with zero power are skipped.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for u in self.users.iter().filter(|u| u.power > 0.0) {
            let val = u.utility(x);
            if !(val > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += u.power * val.ln();
        }
        total
    }

    pub fn objective_gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for u in self.users.iter().filter(|u| u.power > 0.0) {
            g += u.gradient(x) * (u.power / u.utility(x));
        }
        g
    }

    pub fn objective_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for u in self.users.iter().filter(|u| u.power > 0.0) {
            let val = u.utility(x);
            let g = u.gradient(x);
            h += u.hessian(x) * (u.power / val);
            h -= &g * g.transpose() * (u.power / (val * val));
        }
        h
    }
}
