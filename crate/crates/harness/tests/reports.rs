use std::collections::BTreeMap;

use predrep_harness::agents::AgentRegistry;
use predrep_harness::config::{check_schema, ExperimentConfig};
use predrep_harness::experiments::Experiment;
use predrep_harness::report::{Check, ExperimentReport};
use predrep_harness::{ExperimentRegistry, Result};
use serde_json::{json, Value};

fn small(name: &str) -> ExperimentConfig {
    let mut cfg = ExperimentRegistry::standard().get(name).unwrap().default_config();
    let shrink: Value = match name {
        "sr" => json!({ "random_mdps": 5 }),
        "sf" => json!({ "instances": 5 }),
        "explore" => json!({ "rounds": 2, "samples_per_round": 100, "walk_steps": 1000, "landmark_max_steps": 1000 }),
        "navigation" => json!({ "train_episodes": 40, "barrier_configs": 2, "trials": 3 }),
        _ => json!({}),
    };
    if let (Some(p), Some(s)) = (cfg.params.as_object_mut(), shrink.as_object()) {
        p.extend(s.clone());
    }
    cfg.seeds = match name {
        "revaluation" => (0..4).collect(),
        "navigation" | "explore" => vec![3, 1],
        _ => vec![7],
    };
    cfg
}

fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    ExperimentRegistry::standard().run(cfg, &AgentRegistry::standard()).unwrap()
}

#[test]
fn every_experiment_is_bit_reproducible() {
    for name in ExperimentRegistry::standard().names() {
        let cfg = small(name);
        let (mut a, b) = (run(&cfg), run(&cfg));
        a.stamp();
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap(), "{name}");
    }
}

#[test]
fn records_come_back_in_seed_order() {
    let r = run(&small("navigation"));
    assert_eq!(r.records.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![1, 3]);
}

#[test]
fn echoed_config_revalidates() {
    let registry = ExperimentRegistry::standard();
    for name in registry.names() {
        let report = run(&small(name));
        let text = report.config.to_json().unwrap();
        check_schema(&serde_json::from_str(&text).unwrap()).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, report.config, "{name}");
        back.validate().unwrap();
        registry.get(name).unwrap().validate(&back).unwrap();
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    let registry = ExperimentRegistry::standard();
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        registry.get(&cfg.experiment).unwrap().validate(&cfg).unwrap();
        seen.push(cfg.experiment);
    }
    for name in registry.names() {
        assert!(seen.iter().any(|s| s == name), "no shipped config for {name}");
    }
}

#[test]
fn default_configs_match_the_schema() {
    let registry = ExperimentRegistry::standard();
    for name in registry.names() {
        let cfg = registry.get(name).unwrap().default_config();
        check_schema(&serde_json::to_value(&cfg).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn revaluation_aggregate_recomputes_from_records() {
    let r = run(&small("revaluation"));
    let mut counts: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for rec in &r.records {
        for o in rec.metrics.as_array().unwrap() {
            let key = (o["condition"].as_str().unwrap().to_string(), o["agent"].as_str().unwrap().to_string());
            let e = counts.entry(key).or_default();
            e.0 += 1;
            e.1 += usize::from(o["choice"] == 2);
        }
    }
    assert_eq!(counts.len(), 9);
    for ((cond, agent), (n, twos)) in counts {
        let a = &r.aggregate[&cond][&agent];
        assert_eq!(a["n"], n);
        assert_eq!(a["frac_s2"].as_f64().unwrap(), twos as f64 / n as f64, "{cond} {agent}");
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn navigation_aggregate_recomputes_from_records() {
    let r = run(&small("navigation"));
    let mut first: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut auc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rec in &r.records {
        for run in rec.metrics.as_array().unwrap() {
            let agent = run["agent"].as_str().unwrap().to_string();
            let steps: Vec<f64> = run["steps"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            first.entry(agent.clone()).or_default().push(steps[0]);
            auc.entry(agent).or_default().push(steps.iter().sum());
        }
    }
    assert_eq!(first.len(), 3);
    for (agent, f) in first {
        let a = &r.aggregate[&agent];
        assert_eq!(a["runs"], f.len());
        assert_eq!(a["median_first_trial_steps"].as_f64().unwrap(), median(f));
        assert_eq!(a["median_auc"].as_f64().unwrap(), median(auc[&agent].clone()));
    }
}

#[test]
fn identity_aggregate_is_the_max_over_records() {
    let mut cfg = small("sr");
    cfg.seeds = vec![1, 2, 3];
    let r = run(&cfg);
    for key in ["max_residual", "max_row_sum_error", "max_value_error"] {
        let m = r.records.iter().map(|s| s.metrics[key].as_f64().unwrap()).fold(0.0, f64::max);
        assert_eq!(r.aggregate[key].as_f64().unwrap(), m, "{key}");
    }
}

struct Constant;

impl Experiment for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn summary(&self) -> &'static str {
        "reports its seeds"
    }

    fn default_config(&self) -> ExperimentConfig {
        ExperimentConfig::new("constant", vec![0])
    }

    fn validate(&self, _: &ExperimentConfig) -> Result<()> {
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig, _: &AgentRegistry) -> Result<ExperimentReport> {
        let mut r = ExperimentReport::new(cfg);
        r.aggregate = json!({ "n": cfg.seeds.len() });
        r.checks.push(Check::new("ok", true, ""));
        Ok(r)
    }
}

#[test]
fn registries_accept_new_strategies() {
    let mut registry = ExperimentRegistry::empty();
    assert!(registry.get("constant").is_err());
    registry.register(Box::new(Constant));
    let r = registry.run(&ExperimentConfig::new("constant", vec![4, 5]), &AgentRegistry::empty()).unwrap();
    assert_eq!(r.aggregate["n"], 2);
    assert!(registry.run(&ExperimentConfig::new("constant", vec![]), &AgentRegistry::empty()).is_err());
    assert_eq!(ExperimentRegistry::standard().names().len(), 8);
}
