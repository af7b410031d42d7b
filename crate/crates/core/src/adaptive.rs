//! Slot-wise re-selection of the head and airtime under time-varying link
//! capacities, and the baseline that decides once at contact start.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Baseline;
use crate::model::{build_dissemination_plan, flows_unchecked, Allocation, FlowSummary, Scenario};
use crate::solver::{select_head_with, RoundContext, SolverOptions, SubProblem, SubSolution, TieBreak};
use crate::utility::{nash_products, NashProducts};

/// A head counts as holding an item once it lacks less than this many MB.
const STORED_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    /// The scenario's own capacities in every slot.
    Constant,
    /// i.i.d. Rayleigh-fading capacity per link and slot at SNR `snr`.
    Rayleigh { snr: f64 },
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelModel::Rayleigh { snr } if !(snr > 0.0) => {
                Err(Error::InvalidOption(format!("SNR must be > 0, got {snr}")))
            }
            _ => Ok(()),
        }
    }
}

/// Inverse-CDF draw from `p(c) = ln2/ρ · 2^c · exp(-(2^c - 1)/ρ)`, in MB/s.
pub fn sample_capacity<R: Rng + ?Sized>(snr: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (1.0 - snr * (-u).ln_1p()).log2()
}

/// `E[c]` under the same density.
pub fn rayleigh_mean_capacity(snr: f64) -> f64 {
    // E[c] = ∫ P(C > c) dc = ∫ exp(-(2^c - 1)/ρ) dc, by Simpson's rule
    let tail = |c: f64| (-(c.exp2() - 1.0) / snr).exp();
    let upper = (1.0 + 60.0 * snr).log2();
    let n = 20_000;
    let h = upper / n as f64;
    let mut sum = tail(0.0) + tail(upper);
    for k in 1..n {
        sum += tail(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// One capacity matrix per slot; links are symmetric.
pub fn sample_capacities(scenario: &Scenario, channel: &ChannelModel, slots: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let n = scenario.user_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..slots)
        .map(|_| match *channel {
            ChannelModel::Constant => scenario.link_capacity.clone(),
            ChannelModel::Rayleigh { snr } => {
                let mut c = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v = sample_capacity(snr, &mut rng);
                        c[i][j] = v;
                        c[j][i] = v;
                    }
                }
                c
            }
        })
        .collect()
}

/// Lengths of the slots covering the horizon; the last one may be short.
pub fn slot_lengths(horizon: f64, slot_size: f64) -> Vec<f64> {
    if horizon <= 0.0 {
        return vec![];
    }
    let count = (horizon / slot_size - 1e-9).ceil().max(1.0) as usize;
    (0..count).map(|t| slot_size.min(horizon - t as f64 * slot_size)).collect()
}

/// Totals carried across slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotState {
    pub flows: Vec<FlowSummary>,
    pub rewards: Vec<f64>,
    /// MB of each item not yet delivered.
    pub remaining: Vec<f64>,
    /// MB of each item held by each user, `[item][user]`.
    pub held: Vec<Vec<f64>>,
}

impl SlotState {
    pub fn new(scenario: &Scenario) -> SlotState {
        let n = scenario.user_count();
        SlotState {
            flows: vec![FlowSummary::default(); n],
            rewards: vec![0.0; n],
            remaining: scenario.items.iter().map(|it| it.size).collect(),
            held: scenario
                .items
                .iter()
                .map(|it| (0..n).map(|u| if u == it.owner { it.size } else { 0.0 }).collect())
                .collect(),
        }
    }

    /// Per item: whether `head` already holds all of it.
    pub fn stored_flags(&self, scenario: &Scenario, head: usize) -> Vec<bool> {
        scenario.items.iter().enumerate().map(|(m, it)| self.held[m][head] >= it.size - STORED_EPS).collect()
    }

    pub fn baselines(&self) -> Vec<Baseline> {
        self.flows
            .iter()
            .zip(&self.rewards)
            .map(|(f, &rw)| Baseline { valued: f.disseminated + f.received_of_interest, energy: f.energy, reward: rw })
            .collect()
    }

    pub fn remaining_energy(&self, scenario: &Scenario) -> Vec<f64> {
        self.flows.iter().zip(&scenario.users).map(|(f, u)| u.energy_budget - f.energy).collect()
    }

    /// Utilities of the cumulative state.
    pub fn utilities(&self, scenario: &Scenario) -> Vec<f64> {
        self.flows
            .iter()
            .zip(&scenario.users)
            .zip(&self.rewards)
            .map(|((f, p), rw)| {
                let cost = if p.sensitivity == 0.0 {
                    0.0
                } else if f.energy >= p.energy_budget {
                    return f64::NEG_INFINITY;
                } else {
                    p.sensitivity * f.energy / (p.energy_budget * (p.energy_budget - f.energy))
                };
                (f.disseminated + f.received_of_interest).ln_1p() - cost + rw
            })
            .collect()
    }

    /// Accrues `airtime[m]` seconds of each item under `head` and link capacities `caps`.
    fn apply(
        &mut self,
        scenario: &Scenario,
        head: usize,
        caps: &[Vec<f64>],
        airtime: &[f64],
    ) -> Result<Vec<FlowSummary>> {
        let mut s = scenario.clone();
        s.link_capacity = caps.to_vec();
        let stored = self.stored_flags(scenario, head);
        let plan = build_dissemination_plan(&s, head, Some(&stored))?;
        let flows = flows_unchecked(&plan, airtime);
        for (m, route) in plan.routes.iter().enumerate() {
            if airtime[m] <= 0.0 || !route.is_active() {
                continue;
            }
            let theta = airtime[m] / route.time_weight;
            self.remaining[m] = (self.remaining[m] - theta).max(0.0);
            let size = scenario.items[m].size;
            for &r in &route.interested {
                if r != head {
                    self.held[m][r] = (self.held[m][r] + theta).min(size);
                }
            }
            if route.head_needs_copy {
                self.held[m][head] = (self.held[m][head] + theta).min(size);
            }
        }
        for (acc, f) in self.flows.iter_mut().zip(&flows) {
            acc.add(f);
        }
        self.rewards[head] += scenario.unit_reward * flows[head].forwarded;
        Ok(flows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub length: f64,
    pub capacities: Vec<Vec<f64>>,
    /// `None` when no head admits an agreement in this slot.
    pub head: Option<usize>,
    pub allocation: Vec<f64>,
    /// Cumulative utilities at the end of the slot.
    pub utilities: Vec<f64>,
    pub flows: Vec<FlowSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineResult {
    pub slot_size: f64,
    pub slots: Vec<SlotRecord>,
    pub totals: Vec<FlowSummary>,
    pub rewards: Vec<f64>,
    pub utilities: Vec<f64>,
    pub products: NashProducts,
}

impl TimelineResult {
    /// Slots each user served as head.
    pub fn head_counts(&self, users: usize) -> Vec<usize> {
        let mut c = vec![0; users];
        for h in self.slots.iter().filter_map(|s| s.head) {
            c[h] += 1;
        }
        c
    }

    /// Total amount of data disseminated, `Σ d_i`.
    pub fn total_disseminated(&self) -> f64 {
        self.totals.iter().map(|f| f.disseminated).sum()
    }

    pub fn total_airtime(&self) -> f64 {
        self.slots.iter().map(|s| s.allocation.iter().sum::<f64>()).sum()
    }

    pub fn energy_spread(&self) -> f64 {
        population_std(&self.totals.iter().map(|f| f.energy).collect::<Vec<_>>())
    }
}

pub fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn final_products(utilities: &[f64], powers: &[f64]) -> NashProducts {
    nash_products(utilities, powers).unwrap_or(NashProducts {
        weighted: 0.0,
        plain: 0.0,
        log_objective: f64::NEG_INFINITY,
    })
}

fn check_inputs(scenario: &Scenario, slot_size: f64, channel: &ChannelModel, options: &SolverOptions) -> Result<()> {
    scenario.validate()?;
    options.validate()?;
    channel.validate()?;
    if !(slot_size > 0.0) {
        return Err(Error::InvalidOption(format!("slot size must be > 0, got {slot_size}")));
    }
    Ok(())
}

/// One round of joint selection for the current state: every candidate head
/// in parallel, ties to the user with most energy left, then lowest index.
fn select_round(
    scenario: &Scenario,
    state: &SlotState,
    budget: f64,
    options: &SolverOptions,
) -> Result<Option<SubSolution>> {
    let baselines = state.baselines();
    let candidates: Vec<SubSolution> = (0..scenario.user_count())
        .into_par_iter()
        .map(|h| {
            let stored = state.stored_flags(scenario, h);
            let ctx = RoundContext {
                stored: Some(&stored),
                remaining: Some(&state.remaining),
                budget: Some(budget),
                baselines: Some(&baselines),
            };
            SubProblem::with_context(scenario, h, &ctx).map(|p| p.solve(options))
        })
        .collect::<Result<_>>()?;
    let tie = TieBreak::GreatestScore(state.remaining_energy(scenario));
    match select_head_with(candidates, &tie) {
        Ok(joint) => {
            let head = joint.head;
            Ok(Some(joint.candidates.into_iter().nth(head).expect("selected head has a candidate")))
        }
        Err(Error::NoAgreement) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Re-selects head and airtime at the start of every slot using cumulative
/// utilities and that slot's sampled capacities.
pub fn run_adaptive(
    scenario: &Scenario,
    slot_size: f64,
    channel: &ChannelModel,
    seed: u64,
    options: &SolverOptions,
) -> Result<TimelineResult> {
    check_inputs(scenario, slot_size, channel, options)?;
    let lengths = slot_lengths(scenario.airtime_horizon, slot_size);
    let caps = sample_capacities(scenario, channel, lengths.len(), seed);
    let mut state = SlotState::new(scenario);
    let mut slots = Vec::with_capacity(lengths.len());
    for (t, (&len, c)) in lengths.iter().zip(caps).enumerate() {
        let mut s = scenario.clone();
        s.link_capacity = c.clone();
        let chosen = select_round(&s, &state, len, options)?;
        let (head, allocation, flows) = match chosen {
            Some(sol) => {
                let flows = state.apply(scenario, sol.head, &c, sol.allocation.as_slice())?;
                debug!("slot {t}: head {} airtime {:.4}", sol.head, sol.allocation.total());
                (Some(sol.head), sol.allocation.as_slice().to_vec(), flows)
            }
            None => {
                info!("slot {t}: no agreement, skipped");
                (None, vec![0.0; scenario.items.len()], vec![FlowSummary::default(); scenario.user_count()])
            }
        };
        slots.push(SlotRecord {
            length: len,
            capacities: c,
            head,
            allocation,
            utilities: state.utilities(scenario),
            flows,
        });
    }
    let utilities = state.utilities(scenario);
    Ok(TimelineResult {
        slot_size,
        slots,
        products: final_products(&utilities, &scenario.bargaining_power),
        totals: state.flows,
        rewards: state.rewards,
        utilities,
    })
}

/// Decides head and airtime once from the first slot's capacities over the
/// whole horizon, then spends each item's airtime evenly across slots while
/// capacities keep changing.
pub fn run_non_adaptive(
    scenario: &Scenario,
    slot_size: f64,
    channel: &ChannelModel,
    seed: u64,
    options: &SolverOptions,
) -> Result<TimelineResult> {
    check_inputs(scenario, slot_size, channel, options)?;
    let horizon = scenario.airtime_horizon;
    let lengths = slot_lengths(horizon, slot_size);
    let caps = sample_capacities(scenario, channel, lengths.len(), seed);
    let mut state = SlotState::new(scenario);
    let decision = match caps.first() {
        Some(c0) => {
            let mut s = scenario.clone();
            s.link_capacity = c0.clone();
            select_round(&s, &state, horizon, options)?
        }
        None => None,
    };

    let mut slots = Vec::with_capacity(lengths.len());
    for (&len, c) in lengths.iter().zip(caps) {
        let Some(sol) = &decision else {
            slots.push(SlotRecord {
                length: len,
                capacities: c,
                head: None,
                allocation: vec![0.0; scenario.items.len()],
                utilities: state.utilities(scenario),
                flows: vec![FlowSummary::default(); scenario.user_count()],
            });
            continue;
        };
        let head = sol.head;
        let mut s = scenario.clone();
        s.link_capacity = c.clone();
        let stored = state.stored_flags(scenario, head);
        let plan = build_dissemination_plan(&s, head, Some(&stored))?;
        let mut airtime: Vec<f64> = plan
            .routes
            .iter()
            .enumerate()
            .map(|(m, r)| {
                if !r.is_active() {
                    return 0.0;
                }
                let share = sol.allocation.get(m) * len / horizon;
                (share / r.time_weight).min(state.remaining[m]) * r.time_weight
            })
            .collect();
        // shrink the slot so nobody overruns its energy budget
        let flows = flows_unchecked(&plan, &airtime);
        let mut scale = 1.0f64;
        for ((acc, f), p) in state.flows.iter().zip(&flows).zip(&scenario.users) {
            let room = p.energy_budget * (1.0 - 1e-9) - acc.energy;
            if f.energy > room {
                scale = scale.min((room / f.energy).max(0.0));
            }
        }
        if scale < 1.0 {
            airtime = Allocation::from_vec(airtime).scaled(scale).as_slice().to_vec();
        }
        let flows = state.apply(scenario, head, &c, &airtime)?;
        slots.push(SlotRecord {
            length: len,
            capacities: c,
            head: Some(head),
            allocation: airtime,
            utilities: state.utilities(scenario),
            flows,
        });
    }
    let utilities = state.utilities(scenario);
    Ok(TimelineResult {
        slot_size,
        slots,
        products: final_products(&utilities, &scenario.bargaining_power),
        totals: state.flows,
        rewards: state.rewards,
        utilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserProfile;
    use crate::solver::solve_joint;

    fn ideal() -> Scenario {
        Scenario::homogeneous(
            vec![UserProfile { energy_budget: 500.0, sensitivity: 1.0 }; 4],
            &[10.0; 4],
            Scenario::uniform_capacity(4, 4.0),
            20.0,
            0.01,
            vec![0.25; 4],
            2.85,
            2.85,
        )
    }

    #[test]
    fn capacity_sampler_is_reproducible_and_nonnegative() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = sample_capacity(10.0, &mut a);
            assert_eq!(x, sample_capacity(10.0, &mut b));
            assert!(x >= 0.0);
        }
    }

    #[test]
    fn slot_lengths_cover_horizon() {
        assert_eq!(slot_lengths(20.0, 1.0).len(), 20);
        assert_eq!(slot_lengths(20.0, 20.0), vec![20.0]);
        let l = slot_lengths(20.0, 3.0);
        assert_eq!(l.len(), 7);
        assert!((l.iter().sum::<f64>() - 20.0).abs() < 1e-12);
        assert!((l[6] - 2.0).abs() < 1e-12);
        assert!(slot_lengths(0.0, 1.0).is_empty());
    }

    #[test]
    fn single_slot_equals_static_solution() {
        let s = ideal();
        let opts = SolverOptions::default();
        let tl = run_adaptive(&s, 20.0, &ChannelModel::Constant, 0, &opts).unwrap();
        let joint = solve_joint(&s, &opts).unwrap();
        assert_eq!(tl.slots.len(), 1);
        assert_eq!(tl.slots[0].head, Some(joint.head));
        for (a, b) in tl.utilities.iter().zip(&joint.utilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_channel_non_adaptive_matches_single_slot() {
        let s = ideal();
        let opts = SolverOptions::default();
        let a = run_adaptive(&s, 20.0, &ChannelModel::Constant, 0, &opts).unwrap();
        let n = run_non_adaptive(&s, 2.0, &ChannelModel::Constant, 0, &opts).unwrap();
        for (x, y) in a.utilities.iter().zip(&n.utilities) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn exhausted_data_stops_allocation() {
        let mut s = ideal();
        for it in &mut s.items {
            it.size = 0.5;
        }
        let tl = run_adaptive(&s, 1.0, &ChannelModel::Constant, 0, &SolverOptions::default()).unwrap();
        assert!(tl.slots.last().unwrap().allocation.iter().all(|&x| x == 0.0));
        assert!(tl.total_airtime() < 20.0);
    }

    #[test]
    fn slot_flows_accumulate_to_totals() {
        let s = ideal();
        let tl = run_adaptive(&s, 4.0, &ChannelModel::Rayleigh { snr: 30.0 }, 9, &SolverOptions::default()).unwrap();
        assert_eq!(tl.slots.len(), 5);
        for i in 0..4 {
            let mut acc = FlowSummary::default();
            for slot in &tl.slots {
                let f = &slot.flows[i];
                assert!(f.disseminated >= 0.0 && f.received_of_interest >= 0.0 && f.energy >= 0.0);
                acc.add(f);
            }
            assert!((acc.energy - tl.totals[i].energy).abs() < 1e-9);
            assert!((acc.disseminated - tl.totals[i].disseminated).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let s = ideal();
        let o = SolverOptions::default();
        assert!(run_adaptive(&s, 0.0, &ChannelModel::Constant, 0, &o).is_err());
        assert!(run_adaptive(&s, 1.0, &ChannelModel::Rayleigh { snr: 0.0 }, 0, &o).is_err());
    }
}
