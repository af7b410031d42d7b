use std::collections::BTreeSet;

use nbs_airtime::{DataItem, Scenario, UserProfile};
use nbs_airtime_cli::config::{ExperimentSection, InterestRemoval, PreferenceCase};
use nbs_airtime_cli::{emit_scenario, parse_scenario, SweepVariable};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = Scenario> {
    (2usize..=5).prop_flat_map(|n| {
        let users = prop::collection::vec((0.1f64..1e4, 0.0f64..=1.0), n);
        let items = prop::collection::vec((0..n, 0.01f64..100.0, prop::collection::vec(any::<bool>(), n)), 0..7);
        let caps = prop::collection::vec(0.01f64..50.0, n * n);
        let weights = prop::collection::vec(0.01f64..1.0, n);
        (users, items, caps, weights, 0.0f64..100.0, 0.0f64..0.1, 0.0f64..5.0, 0.0f64..5.0).prop_map(
            move |(users, items, caps, weights, horizon, reward, send, recv)| {
                let total: f64 = weights.iter().sum();
                let mut powers: Vec<f64> = weights.iter().map(|w| w / total).collect();
                let head: f64 = powers[..n - 1].iter().sum();
                powers[n - 1] = 1.0 - head;
                Scenario {
                    users: users
                        .into_iter()
                        .map(|(energy_budget, sensitivity)| UserProfile { energy_budget, sensitivity })
                        .collect(),
                    items: items
                        .into_iter()
                        .map(|(owner, size, mask)| DataItem {
                            owner,
                            size,
                            interested: (0..n).filter(|&j| j != owner && mask[j]).collect::<BTreeSet<_>>(),
                        })
                        .collect(),
                    link_capacity: (0..n)
                        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { caps[i * n + j] }).collect())
                        .collect(),
                    airtime_horizon: horizon,
                    unit_reward: reward,
                    bargaining_power: powers,
                    unit_energy_send: send,
                    unit_energy_recv: recv,
                }
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn load_of_emit_is_identity(s in scenario()) {
        prop_assume!(s.validate().is_ok());
        let text = emit_scenario(&s, None);
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(&back.scenario, &s);
        prop_assert_eq!(back.experiment, None);
        prop_assert_eq!(emit_scenario(&back.scenario, None), text);
    }
}

#[test]
fn experiment_block_round_trips() {
    let s = nbs_airtime::presets::preference_case(1).unwrap();
    let exp = ExperimentSection {
        sweep: SweepVariable::PreferenceCase,
        values: vec![1.0, 2.0],
        user: None,
        cases: vec![
            PreferenceCase::default(),
            PreferenceCase { remove: vec![InterestRemoval { item: 4, users: vec![1] }] },
        ],
        seeds: 1,
        first_seed: 0,
        snr: None,
        output_dir: Some("out".into()),
    };
    let text = emit_scenario(&s, Some(exp.clone()));
    let back = parse_scenario(&text).unwrap();
    assert_eq!(back.scenario, s);
    assert_eq!(back.experiment, Some(exp));
}
