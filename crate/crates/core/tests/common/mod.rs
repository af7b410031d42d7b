#![allow(dead_code)]

use std::collections::BTreeSet;

use nbs_airtime::{DataItem, Scenario, UserProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random instance: 2–4 users, at most 5 items, symmetric links.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4usize);
    let users = (0..n)
        .map(|_| UserProfile {
            energy_budget: rng.random_range(40.0..600.0),
            sensitivity: if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.0..1.0) },
        })
        .collect();
    let mut owners: Vec<usize> = (0..n).collect();
    while owners.len() < 5 && rng.random_bool(0.3) {
        owners.push(rng.random_range(0..n));
    }
    let items = owners
        .iter()
        .map(|&owner| DataItem {
            owner,
            size: rng.random_range(1.0..12.0),
            interested: (0..n).filter(|&j| j != owner && rng.random_bool(0.75)).collect::<BTreeSet<_>>(),
        })
        .collect();
    let mut caps = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = rng.random_range(1.0..6.0);
            caps[i][j] = c;
            caps[j][i] = c;
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut powers: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = powers[..n - 1].iter().sum();
    powers[n - 1] = 1.0 - head;
    Scenario {
        users,
        items,
        link_capacity: caps,
        airtime_horizon: rng.random_range(1.0..20.0),
        unit_reward: rng.random_range(0.0..0.02),
        bargaining_power: powers,
        unit_energy_send: rng.random_range(1.0..3.0),
        unit_energy_recv: rng.random_range(1.0..3.0),
    }
}

/// Random one-item-per-user, all-interested instance.
pub fn random_homogeneous(seed: u64) -> Scenario {
    let mut s = random_scenario(seed);
    let n = s.user_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    s.items = (0..n)
        .map(|owner| DataItem {
            owner,
            size: rng.random_range(1.0..12.0),
            interested: (0..n).filter(|&j| j != owner).collect(),
        })
        .collect();
    s
}

/// Interior point of the airtime box and budget, scaled towards the origin
/// until every utility is positive and every budget has room.
pub fn interior_point(
    game: &nbs_airtime::AirtimeGame,
    upper: &[f64],
    budget: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<f64>> {
    let mut x: Vec<f64> = upper.iter().map(|&u| u * rng.random_range(0.05..0.95)).collect();
    let total: f64 = x.iter().sum();
    if total > 0.9 * budget {
        x.iter_mut().for_each(|v| *v *= 0.9 * budget / total);
    }
    for _ in 0..40 {
        let ok = game.users.iter().all(|u| {
            let val = u.utility(&x);
            (u.is_constant() || val > 1e-3) && u.energy(&x) < 0.999 * u.budget
        });
        if ok && game.objective(&x).is_finite() {
            return Some(x);
        }
        x.iter_mut().for_each(|v| *v *= 0.7);
    }
    None
}

/// Like [`random_scenario`] but with one item per user, so no two
/// allocation variables share a route.
pub fn random_single_item(seed: u64) -> Scenario {
    let mut s = random_scenario(seed);
    let n = s.user_count();
    s.items.truncate(n);
    s
}
