use proptest::prelude::*;
use stakesim_core::scenario::{run_scenario, ScenarioConfig, SimEvent, Simulation};

fn config(json: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(json).unwrap()
}

fn offline_run(n: u64, fraction: f64, seed: u64) -> (u64, Vec<bool>) {
    let cfg = config(&format!(
        r#"{{"epochs": 6, "seed": {seed}, "validators": {{"count": {n}}}, "users": {{"count": 0}},
            "price_path": {{"constant": {{"value": 1000}}}},
            "attacks": [{{"kind": "offline_fraction", "start_epoch": 1, "magnitude": {fraction}}}]}}"#
    ));
    let (series, log) = run_scenario(&cfg).unwrap();
    let victims = log
        .iter()
        .find_map(|r| match &r.event {
            SimEvent::AttackTriggered { victims, .. } => Some(victims.len() as u64),
            _ => None,
        })
        .unwrap_or(0);
    (victims, series.rows.iter().map(|r| r.finalized).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn finality_stalls_exactly_above_one_third(n in 6u64..48, fraction in 0.05f64..0.6, seed in 0u64..1000) {
        let (offline, finalized) = offline_run(n, fraction, seed);
        prop_assert_eq!(offline, (fraction * n as f64).ceil() as u64);
        let stalls = 3 * offline > n;
        for (epoch, f) in finalized.iter().enumerate().skip(2) {
            prop_assert_eq!(*f, !stalls, "epoch {} with {}/{} offline", epoch, offline, n);
        }
    }
}

#[test]
fn one_third_exactly_keeps_finality() {
    let (offline, finalized) = offline_run(30, 1.0 / 3.0, 1);
    assert_eq!(offline, 10);
    assert!(finalized[1..].iter().all(|f| *f));
}

#[test]
fn seeds_reproduce_and_differ() {
    let make = |seed: u64| {
        config(&format!(
            r#"{{"epochs": 12, "seed": {seed}, "validators": {{"count": 24, "join_candidates_per_epoch": 2}},
                "users": {{"count": 40}}, "price_path": {{"geometric": {{"start": 1500, "rate_per_epoch": -0.01}}}},
                "competitors": [{{"gas_price": {{"constant": {{"value": 5}}}}, "token_rate_usd": {{"constant": {{"value": 300}}}}}}],
                "price_impact_lambda": 0.3}}"#
        ))
    };
    let (a, la) = run_scenario(&make(11)).unwrap();
    let (b, lb) = run_scenario(&make(11)).unwrap();
    let (c, _) = run_scenario(&make(12)).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&la).unwrap(), serde_json::to_string(&lb).unwrap());
    assert_ne!(a, c);
}

#[test]
fn stepping_matches_batch_run() {
    let cfg = config(
        r#"{"epochs": 8, "seed": 4, "validators": {"count": 16}, "users": {"count": 10},
            "price_path": {"constant": {"value": 2500}},
            "attacks": [{"kind": "discouragement_haircut", "start_epoch": 2, "magnitude": 0.5, "duration": 3}]}"#,
    );
    let (batch, _) = run_scenario(&cfg).unwrap();
    let mut sim = Simulation::new(cfg).unwrap();
    let mut rows = Vec::new();
    while !sim.is_finished() {
        rows.push(sim.step_epoch().unwrap().clone());
    }
    assert_eq!(rows, batch.rows);
}
