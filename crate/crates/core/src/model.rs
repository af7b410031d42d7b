//! Bargaining-game instances and the dissemination geometry of a star group.
//!
//! A group of users shares one radio channel for a limited airtime. One user is
//! the head; every other user (a peripheral) talks only to the head. Each data
//! item is disseminated over a set of links whose transmissions progress at the
//! same rate, so `x` seconds of airtime move `x / W` MB across every link of
//! the dissemination, where `W = Σ 1/c` over its links.
//!
//! User indices are zero-based throughout the library.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing allocations against their bounds.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Energy that may be spent during the contact, Joules.
    pub energy_budget: f64,
    /// Sensitivity to battery consumption, in `[0, 1]`.
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataItem {
    pub owner: usize,
    /// Size in MB.
    pub size: f64,
    /// Users that want this item. Never contains the owner.
    pub interested: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub users: Vec<UserProfile>,
    pub items: Vec<DataItem>,
    /// `link_capacity[k][j]` is the rate of link `k -> j` in MB/s. The diagonal is unused.
    pub link_capacity: Vec<Vec<f64>>,
    /// Airtime available to the whole group, seconds.
    pub airtime_horizon: f64,
    /// Reward per MB forwarded by the head.
    pub unit_reward: f64,
    /// Bargaining power per user; non-negative, sums to one.
    pub bargaining_power: Vec<f64>,
    /// Joule per MB sent.
    pub unit_energy_send: f64,
    /// Joule per MB received.
    pub unit_energy_recv: f64,
}

impl Scenario {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// One item per user, every other user interested in it. This is the
    /// homogeneous-preference game.
    #[allow(clippy::too_many_arguments)]
    pub fn homogeneous(
        users: Vec<UserProfile>,
        sizes: &[f64],
        link_capacity: Vec<Vec<f64>>,
        airtime_horizon: f64,
        unit_reward: f64,
        bargaining_power: Vec<f64>,
        unit_energy_send: f64,
        unit_energy_recv: f64,
    ) -> Scenario {
        let n = users.len();
        let items = sizes
            .iter()
            .enumerate()
            .map(|(owner, &size)| DataItem { owner, size, interested: (0..n).filter(|&j| j != owner).collect() })
            .collect();
        Scenario {
            users,
            items,
            link_capacity,
            airtime_horizon,
            unit_reward,
            bargaining_power,
            unit_energy_send,
            unit_energy_recv,
        }
    }

    /// N×N matrix with the same rate on every link.
    pub fn uniform_capacity(n: usize, rate: f64) -> Vec<Vec<f64>> {
        (0..n).map(|k| (0..n).map(|j| if k == j { 0.0 } else { rate }).collect()).collect()
    }

    pub fn items_of(&self, user: usize) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().enumerate().filter(move |(_, it)| it.owner == user).map(|(m, _)| m)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let n = self.users.len();
        if n < 2 {
            errs.push(format!("need at least 2 users, got {n}"));
        }
        for (i, u) in self.users.iter().enumerate() {
            if !(u.energy_budget > 0.0 && u.energy_budget.is_finite()) {
                errs.push(format!("users[{i}].energy_budget must be > 0, got {}", u.energy_budget));
            }
            if !(0.0..=1.0).contains(&u.sensitivity) {
                errs.push(format!("users[{i}].sensitivity must lie in [0,1], got {}", u.sensitivity));
            }
        }
        for (m, it) in self.items.iter().enumerate() {
            if it.owner >= n {
                errs.push(format!("items[{m}].owner {} is not a user", it.owner));
            }
            if !(it.size > 0.0 && it.size.is_finite()) {
                errs.push(format!("items[{m}].size must be > 0, got {}", it.size));
            }
            if it.interested.contains(&it.owner) {
                errs.push(format!("items[{m}].interested contains its owner {}", it.owner));
            }
            if let Some(bad) = it.interested.iter().find(|&&j| j >= n) {
                errs.push(format!("items[{m}].interested references unknown user {bad}"));
            }
        }
        if self.link_capacity.len() != n || self.link_capacity.iter().any(|row| row.len() != n) {
            errs.push(format!("link_capacity must be {n}x{n}"));
        } else {
            for k in 0..n {
                for j in 0..n {
                    let c = self.link_capacity[k][j];
                    if k != j && !(c > 0.0 && c.is_finite()) {
                        errs.push(format!("link_capacity[{k}][{j}] must be > 0, got {c}"));
                    }
                }
            }
        }
        if !(self.airtime_horizon >= 0.0 && self.airtime_horizon.is_finite()) {
            errs.push(format!("airtime_horizon must be >= 0, got {}", self.airtime_horizon));
        }
        if !(self.unit_reward >= 0.0 && self.unit_reward.is_finite()) {
            errs.push(format!("unit_reward must be >= 0, got {}", self.unit_reward));
        }
        if self.unit_energy_send < 0.0 || self.unit_energy_recv < 0.0 {
            errs.push("unit energies must be >= 0".to_string());
        }
        if self.bargaining_power.len() != n {
            errs.push(format!("bargaining_power has {} entries for {n} users", self.bargaining_power.len()));
        } else {
            if self.bargaining_power.iter().any(|&a| !(a >= 0.0)) {
                errs.push("bargaining_power entries must be >= 0".to_string());
            }
            let total: f64 = self.bargaining_power.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                errs.push(format!("bargaining_power must sum to 1, sums to {total}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(errs))
        }
    }
}

/// How one item travels through the star for a given head.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemRoute {
    pub item: usize,
    pub owner: usize,
    pub size: f64,
    /// Ordered `(from, to)` pairs.
    pub links: Vec<(usize, usize)>,
    /// Transmissions per dissemination: `β + |interested \ {head}|`.
    pub transmissions: usize,
    /// β: the owner must first send the item to the head.
    pub head_needs_copy: bool,
    /// Seconds per MB moved across every link: `Σ 1/c` over the links.
    pub time_weight: f64,
    pub interested: Vec<usize>,
}

impl ItemRoute {
    pub fn beta(&self) -> f64 {
        if self.head_needs_copy {
            1.0
        } else {
            0.0
        }
    }

    /// Included in the allocation vector.
    pub fn is_active(&self) -> bool {
        self.transmissions > 0
    }

    /// Longest airtime worth spending on this item.
    pub fn max_airtime(&self) -> f64 {
        self.size * self.time_weight
    }

    /// Interested users that actually receive the item over this dissemination.
    pub fn deliveries(&self, head: usize) -> usize {
        self.interested.iter().filter(|&&r| r != head || self.head_needs_copy).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisseminationPlan {
    pub head: usize,
    pub user_count: usize,
    /// One route per scenario item, in scenario order.
    pub routes: Vec<ItemRoute>,
    pub unit_energy_send: f64,
    pub unit_energy_recv: f64,
}

impl DisseminationPlan {
    /// Items that carry an allocation variable.
    pub fn active_items(&self) -> Vec<usize> {
        self.routes.iter().filter(|r| r.is_active()).map(|r| r.item).collect()
    }

    pub fn route(&self, item: usize) -> Option<&ItemRoute> {
        self.routes.get(item)
    }
}

/// Builds the per-item link sets for `head`.
///
/// `stored` says, per item, whether the head already holds it. `None` means
/// the head holds only its own items.
pub fn build_dissemination_plan(
    scenario: &Scenario,
    head: usize,
    stored: Option<&[bool]>,
) -> Result<DisseminationPlan> {
    let n = scenario.user_count();
    if head >= n {
        return Err(Error::HeadOutOfRange { head, users: n });
    }
    if let Some(s) = stored {
        if s.len() != scenario.items.len() {
            return Err(Error::InvalidScenario(vec![format!(
                "stored flags cover {} items, scenario has {}",
                s.len(),
                scenario.items.len()
            )]));
        }
    }
    let routes = scenario
        .items
        .iter()
        .enumerate()
        .map(|(m, it)| {
            let own = it.owner == head;
            let head_needs_copy = !own && !stored.is_some_and(|s| s[m]);
            let mut links = Vec::new();
            if head_needs_copy {
                links.push((it.owner, head));
            }
            links.extend(it.interested.iter().filter(|&&r| r != head).map(|&r| (head, r)));
            // A head-held item nobody else wants needs no transmission at all.
            let has_recipient = it.interested.iter().any(|&r| r != head);
            if !has_recipient && !(head_needs_copy && it.interested.contains(&head)) {
                links.clear();
            }
            let transmissions = links.len();
            let time_weight = links.iter().map(|&(k, j)| 1.0 / scenario.link_capacity[k][j]).sum();
            ItemRoute {
                item: m,
                owner: it.owner,
                size: it.size,
                links,
                transmissions,
                head_needs_copy: head_needs_copy && transmissions > 0,
                time_weight,
                interested: it.interested.iter().copied().collect(),
            }
        })
        .collect();
    Ok(DisseminationPlan {
        head,
        user_count: n,
        routes,
        unit_energy_send: scenario.unit_energy_send,
        unit_energy_recv: scenario.unit_energy_recv,
    })
}

/// MB carried by each link of the item's dissemination for `airtime` seconds.
pub fn transmitted_amount(plan: &DisseminationPlan, item: usize, airtime: f64) -> Result<f64> {
    let route = plan.route(item).ok_or_else(|| Error::AllocationMismatch(format!("no item {item} in plan")))?;
    if airtime < 0.0 {
        return Err(Error::NegativeAmount(airtime));
    }
    if !route.is_active() || route.time_weight <= 0.0 {
        return Err(Error::UndefinedDissemination { item });
    }
    Ok(airtime / route.time_weight)
}

/// Average dissemination rate: interested-user MB delivered per second of
/// the item's airtime. Zero when the dissemination reaches nobody.
pub fn adr(plan: &DisseminationPlan, item: usize) -> f64 {
    match plan.route(item) {
        Some(r) if r.is_active() => r.deliveries(plan.head) as f64 / r.time_weight,
        _ => 0.0,
    }
}

/// Airtime per scenario item, seconds. Inactive items stay at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    airtime: Vec<f64>,
}

impl Allocation {
    pub fn zeros(items: usize) -> Self {
        Allocation { airtime: vec![0.0; items] }
    }

    pub fn from_vec(airtime: Vec<f64>) -> Self {
        Allocation { airtime }
    }

    /// Scatters a vector over `items` into a full per-item allocation.
    pub fn from_active(items: usize, active: &[usize], values: &[f64]) -> Self {
        let mut airtime = vec![0.0; items];
        for (&m, &v) in active.iter().zip(values) {
            airtime[m] = v;
        }
        Allocation { airtime }
    }

    pub fn get(&self, item: usize) -> f64 {
        self.airtime[item]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.airtime
    }

    pub fn len(&self) -> usize {
        self.airtime.len()
    }

    pub fn is_empty(&self) -> bool {
        self.airtime.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.airtime.iter().sum()
    }

    /// Airtime spent on each user's own items.
    pub fn per_owner(&self, plan: &DisseminationPlan) -> Vec<f64> {
        let mut out = vec![0.0; plan.user_count];
        for r in &plan.routes {
            out[r.owner] += self.airtime[r.item];
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Allocation {
        Allocation { airtime: self.airtime.iter().map(|x| x * factor).collect() }
    }
}

/// Per-user traffic and energy for one allocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    /// MB of own data delivered (d).
    pub disseminated: f64,
    /// MB of wanted data received (b).
    pub received_of_interest: f64,
    /// MB forwarded for others; non-zero only for the head (f).
    pub forwarded: f64,
    /// MB transmitted (s).
    pub sent: f64,
    /// MB received, wanted or not (r).
    pub received: f64,
    /// Joules (e).
    pub energy: f64,
}

impl FlowSummary {
    pub fn add(&mut self, other: &FlowSummary) {
        self.disseminated += other.disseminated;
        self.received_of_interest += other.received_of_interest;
        self.forwarded += other.forwarded;
        self.sent += other.sent;
        self.received += other.received;
        self.energy += other.energy;
    }

    pub fn scaled(&self, k: f64) -> FlowSummary {
        FlowSummary {
            disseminated: self.disseminated * k,
            received_of_interest: self.received_of_interest * k,
            forwarded: self.forwarded * k,
            sent: self.sent * k,
            received: self.received * k,
            energy: self.energy * k,
        }
    }
}

/// Per-user flows for `allocation` under `plan`.
pub fn aggregate_flows(plan: &DisseminationPlan, allocation: &Allocation) -> Result<Vec<FlowSummary>> {
    if allocation.len() != plan.routes.len() {
        return Err(Error::AllocationMismatch(format!(
            "allocation has {} entries, plan has {} items",
            allocation.len(),
            plan.routes.len()
        )));
    }
    for r in &plan.routes {
        let x = allocation.get(r.item);
        if !(x >= 0.0) {
            return Err(Error::AllocationMismatch(format!("item {} has airtime {x}", r.item)));
        }
        if !r.is_active() && x > 0.0 {
            return Err(Error::AllocationMismatch(format!("item {} has no dissemination but airtime {x}", r.item)));
        }
        if r.is_active() && x > r.max_airtime() * (1.0 + BOUND_SLACK) + BOUND_SLACK {
            return Err(Error::AllocationMismatch(format!(
                "item {} airtime {x} exceeds its need {}",
                r.item,
                r.max_airtime()
            )));
        }
    }
    Ok(flows_unchecked(plan, allocation.as_slice()))
}

/// Flow formulas without bound checks; linear in `airtime`.
pub(crate) fn flows_unchecked(plan: &DisseminationPlan, airtime: &[f64]) -> Vec<FlowSummary> {
    let head = plan.head;
    let mut flows = vec![FlowSummary::default(); plan.user_count];
    for r in plan.routes.iter().filter(|r| r.is_active()) {
        let theta = airtime[r.item] / r.time_weight;
        let n = r.transmissions as f64;
        let beta = r.beta();
        flows[r.owner].disseminated += n * theta;
        for &i in &r.interested {
            if i != head || r.head_needs_copy {
                flows[i].received_of_interest += theta;
            }
        }
        if r.owner == head {
            flows[head].sent += n * theta;
        } else {
            flows[head].forwarded += (n - beta) * theta;
            flows[head].sent += (n - beta) * theta;
            flows[head].received += beta * theta;
            flows[r.owner].sent += beta * theta;
        }
    }
    for (i, f) in flows.iter_mut().enumerate() {
        if i != head {
            f.received = f.received_of_interest;
        }
        f.energy = plan.unit_energy_send * f.sent + plan.unit_energy_recv * f.received;
    }
    flows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn square(n: usize, c: f64, e: f64) -> Scenario {
        Scenario::homogeneous(
            vec![UserProfile { energy_budget: 500.0, sensitivity: 1.0 }; n],
            &vec![10.0; n],
            Scenario::uniform_capacity(n, c),
            20.0,
            0.01,
            vec![1.0 / n as f64; n],
            e,
            e,
        )
    }

    #[test]
    fn peripheral_item_routes_through_head() {
        let s = square(4, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        let r = &plan.routes[1];
        assert_eq!(r.links, vec![(1, 0), (0, 2), (0, 3)]);
        assert_eq!(r.transmissions, 3);
        assert!(r.head_needs_copy);
        assert_relative_eq!(r.time_weight, 0.75);
    }

    #[test]
    fn head_item_is_broadcast_directly() {
        let s = square(4, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        let r = &plan.routes[0];
        assert_eq!(r.links, vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(r.transmissions, 3);
        assert!(!r.head_needs_copy);
        assert_relative_eq!(r.time_weight, 0.75);
    }

    #[test]
    fn item_wanted_only_by_head() {
        let mut s = square(4, 4.0, 2.85);
        s.link_capacity[1][0] = 2.5;
        s.items[1].interested = [0].into_iter().collect();
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        let r = &plan.routes[1];
        assert_eq!(r.links, vec![(1, 0)]);
        assert_eq!(r.transmissions, 1);
        assert_relative_eq!(r.time_weight, 1.0 / 2.5);
    }

    #[test]
    fn unwanted_items_are_inactive() {
        let mut s = square(3, 4.0, 2.85);
        s.items[1].interested.clear();
        s.items[0].interested.clear();
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        assert!(!plan.routes[0].is_active());
        assert!(!plan.routes[1].is_active());
        assert_eq!(plan.active_items(), vec![2]);
        assert_eq!(adr(&plan, 1), 0.0);
        assert!(matches!(transmitted_amount(&plan, 1, 1.0), Err(Error::UndefinedDissemination { item: 1 })));
    }

    #[test]
    fn stored_item_skips_uplink() {
        let s = square(4, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, Some(&[false, true, false, false])).unwrap();
        let r = &plan.routes[1];
        assert_eq!(r.links, vec![(0, 2), (0, 3)]);
        assert_eq!(r.transmissions, 2);
        assert!(!r.head_needs_copy);
    }

    #[test]
    fn head_out_of_range() {
        let s = square(3, 4.0, 2.85);
        assert_eq!(build_dissemination_plan(&s, 3, None), Err(Error::HeadOutOfRange { head: 3, users: 3 }));
    }

    #[test]
    fn transmitted_amount_examples() {
        let s = square(4, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        assert_relative_eq!(transmitted_amount(&plan, 1, 3.0).unwrap(), 4.0);
        assert_eq!(transmitted_amount(&plan, 1, 0.0).unwrap(), 0.0);
        assert!(transmitted_amount(&plan, 1, -1.0).is_err());

        let mut two = square(2, 4.0, 2.85);
        two.items[1].interested = [0].into_iter().collect();
        let plan = build_dissemination_plan(&two, 0, None).unwrap();
        assert_relative_eq!(transmitted_amount(&plan, 1, 2.5).unwrap(), 10.0);
    }

    #[test]
    fn adr_examples() {
        let mut s = square(4, 4.0, 2.85);
        assert_relative_eq!(adr(&build_dissemination_plan(&s, 0, None).unwrap(), 0), 4.0);
        s.link_capacity[0][1] = 4.0;
        s.link_capacity[0][2] = 3.0;
        s.link_capacity[0][3] = 2.0;
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        assert_relative_eq!(adr(&plan, 0), 36.0 / 13.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_allocation_gives_zero_flows() {
        let s = square(4, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 2, None).unwrap();
        let flows = aggregate_flows(&plan, &Allocation::zeros(4)).unwrap();
        assert!(flows.iter().all(|f| *f == FlowSummary::default()));
    }

    #[test]
    fn two_user_flows() {
        let s = square(2, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        let flows = aggregate_flows(&plan, &Allocation::from_vec(vec![1.0, 1.0])).unwrap();
        for f in &flows {
            assert_relative_eq!(f.disseminated, 4.0);
            assert_relative_eq!(f.received_of_interest, 4.0);
            assert_relative_eq!(f.sent, 4.0);
            assert_relative_eq!(f.received, 4.0);
            assert_relative_eq!(f.energy, 22.8, epsilon = 1e-12);
        }
        assert_eq!(flows[0].forwarded, 0.0);
    }

    #[test]
    fn four_user_flows() {
        let s = square(4, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        let flows = aggregate_flows(&plan, &Allocation::from_vec(vec![1.0; 4])).unwrap();
        for f in &flows {
            assert_relative_eq!(f.disseminated, 4.0, epsilon = 1e-12);
            assert_relative_eq!(f.received_of_interest, 4.0, epsilon = 1e-12);
        }
        let h = flows[0];
        assert_relative_eq!(h.forwarded, 8.0, epsilon = 1e-12);
        assert_relative_eq!(h.sent, 12.0, epsilon = 1e-12);
        assert_relative_eq!(h.received, 4.0, epsilon = 1e-12);
        assert_relative_eq!(h.energy, 45.6, epsilon = 1e-12);
        for f in &flows[1..] {
            assert_relative_eq!(f.sent, 4.0 / 3.0, epsilon = 1e-12);
            assert_relative_eq!(f.received, f.received_of_interest);
        }
    }

    #[test]
    fn allocation_mismatch_is_rejected() {
        let s = square(3, 4.0, 2.85);
        let plan = build_dissemination_plan(&s, 0, None).unwrap();
        assert!(aggregate_flows(&plan, &Allocation::zeros(2)).is_err());
        assert!(aggregate_flows(&plan, &Allocation::from_vec(vec![-1.0, 0.0, 0.0])).is_err());
        // need is 10 MB * (1/4 + 1/4) = 5 s
        assert!(aggregate_flows(&plan, &Allocation::from_vec(vec![0.0, 5.5, 0.0])).is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut s = square(3, 4.0, 2.85);
        s.bargaining_power = vec![0.5, 0.5, 0.5];
        s.items[0].interested.insert(0);
        s.users[1].sensitivity = 2.0;
        match s.validate() {
            Err(Error::InvalidScenario(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
