//! SR-derived place fields, grid-like eigenvectors and track skew.

use predrep::explore::eigen_decompose_sr;
use predrep::grid::{GridRewards, GridWorld};
use predrep::neuro::{grid_fields, peak_angle_shift, place_field, ring_field_skew, ring_fourier_alignment, ring_sr, Geometry};
use predrep::sr::sr_closed_form;
use predrep::{worlds, Policy};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::AgentRegistry;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::report::{num, Check, ExperimentReport, SeedRecord, Table};

use super::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuroParams {
    pub size: usize,
    /// Width of the narrow end of the trapezoid.
    pub narrow: usize,
    pub gamma: f64,
    pub components: usize,
    /// Fields written out per geometry.
    pub fields_written: usize,
    pub ring_cells: usize,
    pub ring_forward: f64,
    pub ring_gamma: f64,
}

impl Default for NeuroParams {
    fn default() -> Self {
        Self { size: 16, narrow: 6, gamma: 0.95, components: 10, fields_written: 4, ring_cells: 15, ring_forward: 0.9, ring_gamma: 0.9 }
    }
}

fn uniform_sr(g: &GridWorld, gamma: f64) -> Result<nalgebra::DMatrix<f64>> {
    let m = g.to_mdp(&GridRewards { gamma, goal_reward: 0.0, step_reward: 0.0 })?;
    Ok(sr_closed_form(&m, &Policy::uniform(m.n_states(), 4))?.m)
}

pub struct NeuroMaps;

impl Experiment for NeuroMaps {
    fn name(&self) -> &'static str {
        "neuro"
    }

    fn summary(&self) -> &'static str {
        "place fields, eigenvector grid fields and track skew"
    }

    fn default_config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new("neuro", vec![0]);
        c.params = serde_json::to_value(NeuroParams::default()).unwrap_or(Value::Null);
        c
    }

    fn validate(&self, cfg: &ExperimentConfig) -> Result<()> {
        if !cfg.agents.is_empty() {
            return Err(HarnessError::config("neuro takes no agents"));
        }
        let p: NeuroParams = cfg.params()?;
        if p.size < 4 || p.narrow == 0 || p.narrow > p.size {
            return Err(HarnessError::config("need size >= 4 and 0 < narrow <= size"));
        }
        if p.components == 0 || p.ring_cells < 3 {
            return Err(HarnessError::config("components must be positive and ring_cells at least 3"));
        }
        if !(0.0..1.0).contains(&p.gamma) || !(0.0..1.0).contains(&p.ring_gamma) || !(0.0..=1.0).contains(&p.ring_forward) {
            return Err(HarnessError::config("discounts must lie in [0,1) and ring_forward in [0,1]"));
        }
        Ok(())
    }

    fn run(&self, cfg: &ExperimentConfig, _: &AgentRegistry) -> Result<ExperimentReport> {
        let p: NeuroParams = cfg.params()?;
        let mut report = ExperimentReport::new(cfg);
        let square = GridWorld::open(p.size, p.size);
        let trapezoid = worlds::trapezoid(p.size, p.size, p.narrow)?;
        let mut fields = Vec::new();
        for (name, g) in [("square", &square), ("trapezoid", &trapezoid)] {
            let sr = uniform_sr(g, p.gamma)?;
            let geom = Geometry::from_grid(g);
            let fs = grid_fields(&sr, &geom, p.components, false)?;
            for (i, f) in fs.iter().take(p.fields_written).enumerate() {
                report.tables.push(Table::grid(&format!("{name}_eigen{i}"), &f.rows()).comment("gamma", p.gamma));
            }
            let centre = g.state_at(p.size / 2, p.size / 2).unwrap_or(0);
            report.tables.push(Table::grid(&format!("{name}_place_field"), &place_field(&sr, &geom, centre)?.rows()).comment("cell", centre));
            fields.push(fs);
        }
        let shift = peak_angle_shift(&fields[0], &fields[1], 60, 0.1);

        let directed = ring_sr(p.ring_cells, p.ring_forward, p.ring_gamma)?;
        let mut skew = Table::new("ring_skew", &["cell", "skew"]).comment("forward", p.ring_forward);
        let mut max_skew = f64::NEG_INFINITY;
        for cell in 0..p.ring_cells {
            let s = ring_field_skew(&directed, cell, 1.0)?;
            max_skew = max_skew.max(s.value);
            skew.push(vec![cell.into(), num(s.value)]);
        }
        let symmetric = ring_sr(p.ring_cells, 0.5, p.ring_gamma)?;
        let pairs = eigen_decompose_sr(&symmetric, p.ring_cells)?;
        let alignment = ring_fourier_alignment(&pairs.vectors);
        let min_alignment = alignment.iter().cloned().fold(f64::INFINITY, f64::min);

        if p.ring_forward > 0.5 {
            report.checks.push(Check::new("track_skew_negative", max_skew < 0.0, format!("max skew {max_skew:.4}")));
        }
        report.checks.push(Check::new("ring_eigenvectors_sinusoidal", min_alignment >= 0.99, format!("min cosine {min_alignment:.4}")));
        report.checks.push(Check::new("trapezoid_rotates_peaks", shift > 0.0, format!("{shift:.1} degrees")));
        let summary = json!({ "peak_angle_shift_deg": shift, "max_ring_skew": max_skew, "min_fourier_cosine": min_alignment });
        for &seed in &cfg.seeds {
            report.records.push(SeedRecord { seed, metrics: summary.clone() });
        }
        report.aggregate = summary;
        report.tables.push(skew);
        Ok(report)
    }
}
