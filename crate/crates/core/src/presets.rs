//! Ready-made scenarios for the evaluation studies: four users, 10 MB items,
//! 4 MB/s links, a 20 s contact and 2.85 J/MB for both directions unless a
//! study varies one of them.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{DataItem, Scenario, UserProfile};

pub const USERS: usize = 4;
pub const ITEM_MB: f64 = 10.0;
pub const LINK_MBPS: f64 = 4.0;
pub const HORIZON_S: f64 = 20.0;
pub const UNIT_REWARD: f64 = 0.01;
pub const JOULES_PER_MB: f64 = 2.85;
/// Per-user budget of the data-load study, J.
pub const DATA_LOAD_BUDGET_J: f64 = 160.0;
/// SNR used for the fading comparison; mean capacity ≈ 4.26 MB/s.
pub const RAYLEIGH_SNR: f64 = 30.0;

/// Symmetric link capacities of the preference study, MB/s.
pub const PREFERENCE_CAPACITY: [[f64; 4]; 4] =
    [[0.0, 3.0, 4.0, 2.0], [3.0, 0.0, 2.0, 1.0], [4.0, 2.0, 0.0, 3.0], [2.0, 1.0, 3.0, 0.0]];

/// One item per user, everyone else interested.
pub fn homogeneous_setup(
    budgets: [f64; 4],
    sensitivity: [f64; 4],
    sizes: [f64; 4],
    gamma: f64,
    powers: [f64; 4],
) -> Scenario {
    Scenario::homogeneous(
        budgets
            .iter()
            .zip(sensitivity)
            .map(|(&energy_budget, sensitivity)| UserProfile { energy_budget, sensitivity })
            .collect(),
        &sizes,
        Scenario::uniform_capacity(USERS, LINK_MBPS),
        HORIZON_S,
        gamma,
        powers.to_vec(),
        JOULES_PER_MB,
        JOULES_PER_MB,
    )
}

/// Budgets `[E1, 500, 400, 400]` J.
pub fn budget_study(user1_budget: f64, sensitivity: [f64; 4]) -> Scenario {
    homogeneous_setup([user1_budget, 500.0, 400.0, 400.0], sensitivity, [ITEM_MB; 4], UNIT_REWARD, [0.25; 4])
}

/// User 1 has 300 J.
pub fn table2(sensitivity: [f64; 4]) -> Scenario {
    budget_study(300.0, sensitivity)
}

pub fn reward_study(gamma: f64) -> Scenario {
    homogeneous_setup([500.0; 4], [1.0; 4], [ITEM_MB; 4], gamma, [0.25; 4])
}

/// User 1 gets `power`, the rest share the remainder equally.
pub fn bargaining_study(power: f64, gamma: f64) -> Scenario {
    let rest = (1.0 - power) / 3.0;
    homogeneous_setup([500.0; 4], [1.0; 4], [ITEM_MB; 4], gamma, [power, rest, rest, rest])
}

pub fn data_load_study(user1_load: f64, powers: [f64; 4]) -> Scenario {
    homogeneous_setup([DATA_LOAD_BUDGET_J; 4], [1.0; 4], [user1_load, ITEM_MB, ITEM_MB, ITEM_MB], UNIT_REWARD, powers)
}

/// Everyone identical; used for the slot-size study.
pub fn ideal_symmetric() -> Scenario {
    homogeneous_setup([500.0; 4], [1.0; 4], [ITEM_MB; 4], UNIT_REWARD, [0.25; 4])
}

/// Items `A1, A2, A3, A(4,1), A(4,2)` over [`PREFERENCE_CAPACITY`].
///
/// Case 1 is full interest; case 2 drops user 1's interest in `A(4,1)`,
/// case 3 drops user 2's, case 4 drops both.
pub fn preference_case(case: u8) -> Result<Scenario> {
    let not_interested: &[usize] = match case {
        1 => &[],
        2 => &[0],
        3 => &[1],
        4 => &[0, 1],
        _ => return Err(Error::InvalidOption(format!("preference case must be 1..=4, got {case}"))),
    };
    let all_but = |owner: usize| (0..USERS).filter(|&u| u != owner).collect::<BTreeSet<_>>();
    let mut items: Vec<DataItem> =
        [0, 1, 2, 3, 3].iter().map(|&owner| DataItem { owner, size: ITEM_MB, interested: all_but(owner) }).collect();
    for u in not_interested {
        items[3].interested.remove(u);
    }
    Ok(Scenario {
        users: vec![UserProfile { energy_budget: 500.0, sensitivity: 1.0 }; USERS],
        items,
        link_capacity: PREFERENCE_CAPACITY.iter().map(|r| r.to_vec()).collect(),
        airtime_horizon: HORIZON_S,
        unit_reward: UNIT_REWARD,
        bargaining_power: vec![0.25; USERS],
        unit_energy_send: JOULES_PER_MB,
        unit_energy_recv: JOULES_PER_MB,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{adr, build_dissemination_plan};

    #[test]
    fn presets_validate() {
        assert!(table2([0.0, 1.0, 1.0, 1.0]).validate().is_ok());
        assert!(reward_study(0.02).validate().is_ok());
        assert!(bargaining_study(0.7, 0.0).validate().is_ok());
        assert!(data_load_study(2.0, [10.0 / 13.0, 1.0 / 13.0, 1.0 / 13.0, 1.0 / 13.0]).validate().is_ok());
        for c in 1..=4 {
            assert!(preference_case(c).unwrap().validate().is_ok());
        }
        assert!(preference_case(5).is_err());
    }

    #[test]
    fn preference_adr_values() {
        // (case, selected head, ADR of A(4,1))
        let expect = [(1, 0, 2.7692), (2, 0, 1.8461), (3, 2, 3.4285), (4, 2, 3.0)];
        for (case, head, value) in expect {
            let s = preference_case(case).unwrap();
            let plan = build_dissemination_plan(&s, head, None).unwrap();
            assert!((adr(&plan, 3) - value).abs() < 1e-4, "case {case}: {}", adr(&plan, 3));
            for m in [0, 1, 2, 4] {
                assert!((adr(&plan, m) - 2.7692).abs() < 1e-4);
            }
        }
    }
}
