use escrowsim::scenario::{
    oracle_settle, random_script, run_script, GeneratorLimits, OracleOutcome, ScenarioScript,
    SettlementReport,
};

fn compare(script: &ScenarioScript, seed: Option<u64>) -> Result<(), String> {
    let report: SettlementReport = run_script(script, seed).map_err(|e| e.to_string())?;
    let oracle: OracleOutcome = oracle_settle(script, seed).map_err(|e| e.to_string())?;
    let rejected: Vec<usize> = report.event_errors.iter().map(|e| e.index).collect();
    if rejected != oracle.rejected_events {
        return Err(format!(
            "rejected events differ: engine {:?} oracle {:?}\n{:#?}",
            report.event_errors, oracle.rejected_events, report.event_errors
        ));
    }
    if report.settlements != oracle.settlements {
        return Err(format!(
            "settlements differ:\nengine {:#?}\noracle {:#?}",
            report.settlements, oracle.settlements
        ));
    }
    if report.final_balances != oracle.final_balances || report.fee_sink != oracle.fee_sink {
        return Err(format!(
            "balances differ:\nengine {:?} sink {}\noracle {:?} sink {}",
            report.final_balances, report.fee_sink, oracle.final_balances, oracle.fee_sink
        ));
    }
    if (report.final_block.height, report.final_block.timestamp)
        != (oracle.final_height, oracle.final_timestamp)
    {
        return Err(format!(
            "final block differs: engine {:?} oracle ({}, {})",
            report.final_block, oracle.final_height, oracle.final_timestamp
        ));
    }
    if !report.conservation_ok {
        return Err("conservation violated".into());
    }
    Ok(())
}

#[test]
fn engine_matches_oracle_on_random_scripts() {
    let limits = GeneratorLimits::default();
    let mut settled = 0;
    for seed in 0..1_000u64 {
        let script = random_script(seed, limits);
        assert!(script.events.len() <= limits.max_events);
        if let Err(msg) = compare(&script, None) {
            panic!("seed {seed}: {msg}\nscript: {}", script.to_json());
        }
        settled += run_script(&script, None).unwrap().settlements.len();
    }
    // the generator must actually exercise settlement paths
    assert!(settled > 500, "only {settled} settlements");
}

#[test]
fn engine_matches_oracle_with_seed_override() {
    for seed in 0..100u64 {
        let script = random_script(10_000 + seed, GeneratorLimits::default());
        if let Err(msg) = compare(&script, Some(seed)) {
            panic!("seed {seed}: {msg}");
        }
    }
}
