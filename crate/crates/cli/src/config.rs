//! Scenario files: a TOML tree whose keys carry their units.
//!
//! Users and items are numbered from 1 in files and from 0 in the library.
//!
//! ```toml
//! [contact]
//! airtime_horizon_seconds = 20.0
//! unit_reward_per_mb = 0.01
//!
//! [links]
//! uniform_capacity_mbps = 4.0
//!
//! [[users]]
//! energy_budget_joules = 300.0
//! energy_sensitivity = 0.0
//!
//! [[items]]
//! owner = 1
//! size_mb = 10.0
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use nbs_airtime::{DataItem, Scenario, UserProfile};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const DEFAULT_HORIZON_SECONDS: f64 = 20.0;
pub const DEFAULT_UNIT_REWARD: f64 = 0.01;
pub const DEFAULT_JOULES_PER_MB: f64 = 2.85;
/// Allowed drift of `Σα` from 1 before a file is rejected.
pub const POWER_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub contact: ContactSection,
    pub links: LinkSection,
    pub users: Vec<UserEntry>,
    pub items: Vec<ItemEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    #[serde(default = "default_horizon")]
    pub airtime_horizon_seconds: f64,
    #[serde(default = "default_reward")]
    pub unit_reward_per_mb: f64,
    #[serde(default = "default_energy")]
    pub send_energy_joules_per_mb: f64,
    #[serde(default = "default_energy")]
    pub receive_energy_joules_per_mb: f64,
}

impl Default for ContactSection {
    fn default() -> Self {
        ContactSection {
            airtime_horizon_seconds: DEFAULT_HORIZON_SECONDS,
            unit_reward_per_mb: DEFAULT_UNIT_REWARD,
            send_energy_joules_per_mb: DEFAULT_JOULES_PER_MB,
            receive_energy_joules_per_mb: DEFAULT_JOULES_PER_MB,
        }
    }
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON_SECONDS
}
fn default_reward() -> f64 {
    DEFAULT_UNIT_REWARD
}
fn default_energy() -> f64 {
    DEFAULT_JOULES_PER_MB
}

/// Exactly one of the two keys must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_capacity_mbps: Option<f64>,
    /// Full matrix; diagonal entries are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_mbps: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub energy_budget_joules: f64,
    pub energy_sensitivity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bargaining_power: Option<Fraction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemEntry {
    pub owner: usize,
    pub size_mb: f64,
    /// Defaults to every user except the owner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interested: Option<Vec<usize>>,
}

/// A number, or a string such as `"10/13"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fraction {
    Number(f64),
    Text(String),
}

impl Fraction {
    pub fn value(&self) -> Option<f64> {
        match self {
            Fraction::Number(v) => Some(*v),
            Fraction::Text(t) => match t.split_once('/') {
                Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
                None => t.trim().parse().ok(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Budget,
    UnitReward,
    BargainingPower,
    DataLoad,
    PreferenceCase,
    SlotSize,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::Budget => "budget",
            SweepVariable::UnitReward => "unit_reward",
            SweepVariable::BargainingPower => "bargaining_power",
            SweepVariable::DataLoad => "data_load",
            SweepVariable::PreferenceCase => "preference_case",
            SweepVariable::SlotSize => "slot_size",
        }
    }

    fn needs_user(&self) -> bool {
        matches!(self, SweepVariable::Budget | SweepVariable::BargainingPower | SweepVariable::DataLoad)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub sweep: SweepVariable,
    pub values: Vec<f64>,
    /// Swept user for `budget`, `bargaining_power` and `data_load`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<usize>,
    /// Interest variants addressed by `preference_case` values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<PreferenceCase>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub first_seed: u64,
    /// Rayleigh SNR for `slot_size` sweeps; a constant channel when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> u64 {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceCase {
    #[serde(default)]
    pub remove: Vec<InterestRemoval>,
}

/// Drops `users` from the interested set of `item`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterestRemoval {
    pub item: usize,
    pub users: Vec<usize>,
}

/// A validated scenario plus its optional experiment block.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub experiment: Option<ExperimentSection>,
}

impl LoadedScenario {
    /// The scenario at one sweep value. `slot_size` leaves it unchanged.
    pub fn at(&self, value: f64) -> Result<Scenario, ConfigError> {
        let Some(exp) = &self.experiment else { return Ok(self.scenario.clone()) };
        let mut s = self.scenario.clone();
        let user = exp.user.map(|u| u - 1);
        match exp.sweep {
            SweepVariable::Budget => s.users[user.expect("validated")].energy_budget = value,
            SweepVariable::UnitReward => s.unit_reward = value,
            SweepVariable::BargainingPower => {
                s.bargaining_power = reweighted(&s.bargaining_power, user.expect("validated"), value)
            }
            SweepVariable::DataLoad => {
                let u = user.expect("validated");
                s.items.iter_mut().filter(|it| it.owner == u).for_each(|it| it.size = value);
            }
            SweepVariable::PreferenceCase => {
                let case = case_index(value, exp.cases.len())
                    .ok_or_else(|| ConfigError::invalid(vec![format!("preference case {value} is not defined")]))?;
                for r in &exp.cases[case].remove {
                    for u in &r.users {
                        s.items[r.item - 1].interested.remove(&(u - 1));
                    }
                }
            }
            SweepVariable::SlotSize => {}
        }
        s.validate().map_err(|e| ConfigError::invalid(vec![format!("at {} = {value}: {e}", exp.sweep)]))?;
        Ok(s)
    }
}

fn case_index(value: f64, cases: usize) -> Option<usize> {
    (value.fract() == 0.0 && value >= 1.0 && value <= cases as f64).then(|| value as usize - 1)
}

/// `user` gets `power`; the others keep their relative shares of the rest.
pub fn reweighted(powers: &[f64], user: usize, power: f64) -> Vec<f64> {
    let others: f64 = powers.iter().enumerate().filter(|&(k, _)| k != user).map(|(_, a)| a).sum();
    let n = powers.len();
    let mut out: Vec<f64> = powers
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            if k == user {
                power
            } else if others > 0.0 {
                (1.0 - power) * a / others
            } else {
                (1.0 - power) / (n - 1) as f64
            }
        })
        .collect();
    let last = if user == n - 1 { n - 2 } else { n - 1 };
    let rest: f64 = out.iter().enumerate().filter(|&(k, _)| k != last).map(|(_, a)| a).sum();
    out[last] = (1.0 - rest).max(0.0);
    out
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text).map_err(|e| e.with_path(path))
}

pub fn parse_scenario(text: &str) -> Result<LoadedScenario, ConfigError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: None, message: e.to_string() })?;
    file.resolve()
}

impl ScenarioFile {
    /// Checks the tree and builds the library scenario, reporting every
    /// problem found.
    pub fn resolve(&self) -> Result<LoadedScenario, ConfigError> {
        let mut errs = Vec::new();
        let n = self.users.len();
        if n < 2 {
            errs.push(format!("users: need at least 2, got {n}"));
        }
        let c = &self.contact;
        if !(c.airtime_horizon_seconds >= 0.0 && c.airtime_horizon_seconds.is_finite()) {
            errs.push(format!("contact.airtime_horizon_seconds must be >= 0, got {}", c.airtime_horizon_seconds));
        }
        if !(c.unit_reward_per_mb >= 0.0 && c.unit_reward_per_mb.is_finite()) {
            errs.push(format!("contact.unit_reward_per_mb must be >= 0, got {}", c.unit_reward_per_mb));
        }
        for (key, v) in [
            ("send_energy_joules_per_mb", c.send_energy_joules_per_mb),
            ("receive_energy_joules_per_mb", c.receive_energy_joules_per_mb),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(format!("contact.{key} must be >= 0, got {v}"));
            }
        }

        for (k, u) in self.users.iter().enumerate() {
            if !(u.energy_budget_joules > 0.0 && u.energy_budget_joules.is_finite()) {
                errs.push(format!("user {}: energy_budget_joules must be > 0, got {}", k + 1, u.energy_budget_joules));
            }
            if !(0.0..=1.0).contains(&u.energy_sensitivity) {
                errs.push(format!(
                    "user {}: energy_sensitivity must lie in [0, 1], got {}",
                    k + 1,
                    u.energy_sensitivity
                ));
            }
        }
        let powers = self.powers(&mut errs);

        let valid_user = |u: usize| (1..=n).contains(&u);
        let mut items = Vec::with_capacity(self.items.len());
        for (m, it) in self.items.iter().enumerate() {
            let label = format!("item {}", m + 1);
            if !valid_user(it.owner) {
                errs.push(format!("{label}: owner {} is not a user (1..={n})", it.owner));
            }
            if !(it.size_mb > 0.0 && it.size_mb.is_finite()) {
                errs.push(format!("{label}: size_mb must be > 0, got {}", it.size_mb));
            }
            let interested: BTreeSet<usize> = match &it.interested {
                Some(list) => {
                    for &u in list {
                        if !valid_user(u) {
                            errs.push(format!("{label}: interested references unknown user {u}"));
                        } else if u == it.owner {
                            errs.push(format!("{label}: interested contains its owner {u}"));
                        }
                    }
                    list.iter().filter(|&&u| valid_user(u)).map(|u| u - 1).collect()
                }
                None => (0..n).filter(|&j| j + 1 != it.owner).collect(),
            };
            items.push(DataItem { owner: it.owner.wrapping_sub(1), size: it.size_mb, interested });
        }

        let link_capacity = self.capacities(&mut errs);
        if let Some(exp) = &self.experiment {
            check_experiment(exp, n, self.items.len(), &mut errs);
        }
        if !errs.is_empty() {
            return Err(ConfigError::invalid(errs));
        }

        let scenario = Scenario {
            users: self
                .users
                .iter()
                .map(|u| UserProfile { energy_budget: u.energy_budget_joules, sensitivity: u.energy_sensitivity })
                .collect(),
            items,
            link_capacity,
            airtime_horizon: c.airtime_horizon_seconds,
            unit_reward: c.unit_reward_per_mb,
            bargaining_power: powers,
            unit_energy_send: c.send_energy_joules_per_mb,
            unit_energy_recv: c.receive_energy_joules_per_mb,
        };
        scenario.validate().map_err(|e| ConfigError::invalid(vec![e.to_string()]))?;
        let loaded = LoadedScenario { scenario, experiment: self.experiment.clone() };
        if let Some(exp) = &loaded.experiment {
            let problems: Vec<String> =
                exp.values.iter().filter_map(|&v| loaded.at(v).err()).flat_map(|e| e.problems()).collect();
            if !problems.is_empty() {
                return Err(ConfigError::invalid(problems));
            }
        }
        Ok(loaded)
    }

    fn powers(&self, errs: &mut Vec<String>) -> Vec<f64> {
        let n = self.users.len();
        let given: Vec<Option<f64>> =
            self.users.iter().map(|u| u.bargaining_power.as_ref().map(|f| f.value().unwrap_or(f64::NAN))).collect();
        if given.iter().all(Option::is_none) {
            let mut equal = vec![1.0 / n.max(1) as f64; n];
            if n > 0 {
                equal[n - 1] = 1.0 - (n - 1) as f64 / n as f64;
            }
            return equal;
        }
        let mut powers = Vec::with_capacity(n);
        for (k, g) in given.iter().enumerate() {
            match g {
                None => errs.push(format!("user {}: bargaining_power missing while other users set it", k + 1)),
                Some(a) if !(*a >= 0.0) => errs.push(format!("user {}: bargaining_power must be a number >= 0", k + 1)),
                Some(a) => powers.push(*a),
            }
        }
        if powers.len() != n {
            return vec![0.0; n];
        }
        let total: f64 = powers.iter().sum();
        if (total - 1.0).abs() > POWER_SUM_TOLERANCE {
            errs.push(format!("users.bargaining_power must sum to 1, sums to {total}"));
        } else if (total - 1.0).abs() > 1e-12 {
            powers.iter_mut().for_each(|a| *a /= total);
            let head: f64 = powers[..n - 1].iter().sum();
            powers[n - 1] = 1.0 - head;
        }
        powers
    }

    fn capacities(&self, errs: &mut Vec<String>) -> Vec<Vec<f64>> {
        let n = self.users.len();
        match (&self.links.uniform_capacity_mbps, &self.links.capacity_mbps) {
            (Some(rate), None) => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    errs.push(format!("links.uniform_capacity_mbps must be > 0, got {rate}"));
                }
                Scenario::uniform_capacity(n, *rate)
            }
            (None, Some(matrix)) => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    errs.push(format!("links.capacity_mbps must be a {n}x{n} matrix"));
                    return Scenario::uniform_capacity(n, 1.0);
                }
                let mut out = matrix.clone();
                for (k, row) in out.iter_mut().enumerate() {
                    for (j, c) in row.iter_mut().enumerate() {
                        if k == j {
                            *c = 0.0;
                        } else if !(*c > 0.0 && c.is_finite()) {
                            errs.push(format!("links.capacity_mbps[{}][{}] must be > 0, got {c}", k + 1, j + 1));
                        }
                    }
                }
                out
            }
            (Some(_), Some(_)) => {
                errs.push("links: give either uniform_capacity_mbps or capacity_mbps, not both".into());
                Scenario::uniform_capacity(n, 1.0)
            }
            (None, None) => {
                errs.push("links: uniform_capacity_mbps or capacity_mbps is required".into());
                Scenario::uniform_capacity(n, 1.0)
            }
        }
    }

    /// Canonical file for a scenario: every key explicit, full capacity
    /// matrix, explicit interest lists.
    pub fn from_scenario(scenario: &Scenario, experiment: Option<ExperimentSection>) -> ScenarioFile {
        ScenarioFile {
            contact: ContactSection {
                airtime_horizon_seconds: scenario.airtime_horizon,
                unit_reward_per_mb: scenario.unit_reward,
                send_energy_joules_per_mb: scenario.unit_energy_send,
                receive_energy_joules_per_mb: scenario.unit_energy_recv,
            },
            links: LinkSection { uniform_capacity_mbps: None, capacity_mbps: Some(scenario.link_capacity.clone()) },
            users: scenario
                .users
                .iter()
                .zip(&scenario.bargaining_power)
                .map(|(u, &a)| UserEntry {
                    energy_budget_joules: u.energy_budget,
                    energy_sensitivity: u.sensitivity,
                    bargaining_power: Some(Fraction::Number(a)),
                })
                .collect(),
            items: scenario
                .items
                .iter()
                .map(|it| ItemEntry {
                    owner: it.owner + 1,
                    size_mb: it.size,
                    interested: Some(it.interested.iter().map(|u| u + 1).collect()),
                })
                .collect(),
            experiment,
        }
    }
}

fn check_experiment(exp: &ExperimentSection, users: usize, items: usize, errs: &mut Vec<String>) {
    if exp.values.is_empty() {
        errs.push("experiment.values must not be empty".into());
    }
    if let Some(v) = exp.values.iter().find(|v| !v.is_finite()) {
        errs.push(format!("experiment.values contains {v}"));
    }
    match exp.user {
        Some(u) if !(1..=users).contains(&u) => errs.push(format!("experiment.user {u} is not a user (1..={users})")),
        None if exp.sweep.needs_user() => errs.push(format!("experiment.user is required for a {} sweep", exp.sweep)),
        _ => {}
    }
    if exp.sweep == SweepVariable::PreferenceCase {
        if exp.cases.is_empty() {
            errs.push("experiment.cases is required for a preference_case sweep".into());
        }
        for v in &exp.values {
            if case_index(*v, exp.cases.len()).is_none() {
                errs.push(format!("experiment.values: preference case {v} is not in 1..={}", exp.cases.len()));
            }
        }
    }
    for (k, case) in exp.cases.iter().enumerate() {
        for r in &case.remove {
            if !(1..=items).contains(&r.item) {
                errs.push(format!("experiment case {}: item {} does not exist", k + 1, r.item));
            }
            if let Some(u) = r.users.iter().find(|&&u| !(1..=users).contains(&u)) {
                errs.push(format!("experiment case {}: user {u} does not exist", k + 1));
            }
        }
    }
    if exp.sweep == SweepVariable::SlotSize {
        if let Some(v) = exp.values.iter().find(|&&v| !(v > 0.0)) {
            errs.push(format!("experiment.values: slot size must be > 0, got {v}"));
        }
        if exp.seeds == 0 {
            errs.push("experiment.seeds must be >= 1".into());
        }
    }
    if let Some(snr) = exp.snr {
        if !(snr > 0.0 && snr.is_finite()) {
            errs.push(format!("experiment.snr must be > 0, got {snr}"));
        }
    }
}

/// Canonical TOML text of a scenario.
pub fn emit_scenario(scenario: &Scenario, experiment: Option<ExperimentSection>) -> String {
    toml::to_string(&ScenarioFile::from_scenario(scenario, experiment)).expect("scenario files always serialize")
}
