//! User utility and the Nash-product objectives built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FlowSummary, UserProfile};

/// `log(1 + amount)`, natural log.
pub fn valuation(amount: f64) -> Result<f64> {
    if amount < 0.0 {
        return Err(Error::NegativeAmount(amount));
    }
    Ok(amount.ln_1p())
}

/// `δ (1/(E - e) - 1/E)`; unbounded as `e` approaches the budget.
pub fn energy_cost(energy: f64, budget: f64, sensitivity: f64) -> Result<f64> {
    if energy < 0.0 {
        return Err(Error::NegativeAmount(energy));
    }
    if energy >= budget {
        return Err(Error::BudgetExhausted { energy, budget });
    }
    // same value as δ(1/(E-e) - 1/E), without the cancellation near e = 0
    Ok(sensitivity * energy / (budget * (budget - energy)))
}

/// Valuation of traffic, minus energy cost, plus the forwarding reward when
/// the user is the head.
pub fn utility(flow: &FlowSummary, is_head: bool, unit_reward: f64, profile: &UserProfile) -> Result<f64> {
    let v = valuation(flow.disseminated + flow.received_of_interest)?;
    let g = energy_cost(flow.energy, profile.energy_budget, profile.sensitivity)?;
    let reward = if is_head { unit_reward * flow.forwarded } else { 0.0 };
    Ok(v - g + reward)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NashProducts {
    /// `Π u_i^{α_i}`
    pub weighted: f64,
    /// `Π u_i`
    pub plain: f64,
    /// `Σ α_i log u_i`; `-∞` when some utility is zero.
    pub log_objective: f64,
}

pub fn nash_products(utilities: &[f64], powers: &[f64]) -> Result<NashProducts> {
    if utilities.len() != powers.len() {
        return Err(Error::InvalidOption(format!(
            "{} utilities for {} bargaining powers",
            utilities.len(),
            powers.len()
        )));
    }
    if let Some((user, &value)) = utilities.iter().enumerate().find(|(_, &u)| !(u >= 0.0)) {
        return Err(Error::InfeasibleUtility { user, value });
    }
    let plain = utilities.iter().product();
    let log_objective =
        utilities.iter().zip(powers).map(|(&u, &a)| if a == 0.0 { 0.0 } else { a * u.ln() }).sum::<f64>();
    let weighted =
        if utilities.iter().zip(powers).any(|(&u, &a)| u == 0.0 && a > 0.0) { 0.0 } else { log_objective.exp() };
    Ok(NashProducts { weighted, plain, log_objective })
}
