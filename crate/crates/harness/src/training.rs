//! Training driver: oracle-referenced validation sets, timing and the
//! JSON-lines update log.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use jssp_core::instance::{generate_training, GeneratorConfig, InstanceError};
use jssp_core::metrics::{MetricError, ReferenceMakespan};
use jssp_core::oracle::{optimal_makespan, OracleResult};
use jssp_core::ppo::{PpoConfig, PpoError, Trainer, ValidationSet};
use jssp_core::JsspInstance;

use crate::checkpoint::{Checkpoint, CheckpointMeta};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("writing the training log: {0}")]
    Log(#[from] std::io::Error),
}

pub fn reference_of(result: OracleResult) -> Result<ReferenceMakespan, MetricError> {
    match result {
        OracleResult::Exact { value } => Ok(ReferenceMakespan::Exact { optimum: value }),
        OracleResult::Bounds { lb, ub } => ReferenceMakespan::bounds(lb, ub),
    }
}

/// Oracle references for `instances`; bounds where the budget runs out.
pub fn solve_references(instances: &[Arc<JsspInstance>], budget: u64) -> Result<Vec<ReferenceMakespan>, MetricError> {
    instances.iter().map(|i| reference_of(optimal_makespan(i, budget))).collect()
}

/// `count` instances from `generator`, instance `i` drawn with seed
/// `seed + i` and named `val{i}`.
pub fn draw_instances(
    generator: &GeneratorConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Arc<JsspInstance>>, InstanceError> {
    (0..count)
        .map(|i| {
            let inst = generate_training(&generator.with_seed(seed.wrapping_add(i as u64)))?;
            Ok(Arc::new(inst.with_name(format!("val{i}"))))
        })
        .collect()
}

pub fn validation_set(instances: Vec<Arc<JsspInstance>>, references: &[ReferenceMakespan]) -> ValidationSet {
    ValidationSet { references: references.iter().map(|r| Some(r.value())).collect(), instances }
}

/// Runs the trainer to completion, writing one JSON line per update to
/// `log`. With `timing` off every `wall_ms` is zero, so equal seeds give
/// byte-identical logs.
pub fn train_logged(
    config: PpoConfig,
    seed: u64,
    validation: Option<&ValidationSet>,
    timing: bool,
    log: &mut dyn Write,
) -> Result<Trainer, TrainError> {
    let mut trainer = Trainer::new(config, seed)?;
    while !trainer.is_done() {
        let started = Instant::now();
        let mut record = trainer.step(validation)?;
        if timing {
            record.wall_ms = started.elapsed().as_millis() as u64;
        }
        serde_json::to_writer(&mut *log, &record).map_err(std::io::Error::from)?;
        writeln!(log)?;
        log.flush()?;
    }
    Ok(trainer)
}

/// Checkpoint of the best validated parameters.
pub fn checkpoint_of(trainer: &Trainer, seed: u64) -> Checkpoint {
    Checkpoint {
        seed,
        meta: CheckpointMeta { model: trainer.config.model, training: Some(trainer.config) },
        params: trainer.best_params().clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use jssp_core::agent::ModelConfig;
    use jssp_core::instance::Interval;

    fn tiny() -> PpoConfig {
        PpoConfig {
            model: ModelConfig { hidden: 8, ..ModelConfig::default() },
            generator: GeneratorConfig {
                machine_range: Interval::new(2, 3),
                job_range: Interval::new(2, 3),
                ..GeneratorConfig::default()
            },
            episodes_per_update: 2,
            max_updates: 2,
            ..PpoConfig::default()
        }
    }

    #[test]
    fn zero_updates_keep_the_initialization() {
        let cfg = PpoConfig { max_updates: 0, ..tiny() };
        let mut log = Vec::new();
        let t = train_logged(cfg, 3, None, true, &mut log).unwrap();
        assert!(log.is_empty());
        assert_eq!(t.params, Trainer::new(cfg, 3).unwrap().params);
    }

    #[test]
    fn log_has_one_line_per_update() {
        let insts = draw_instances(&tiny().generator, 3, 50).unwrap();
        let refs = solve_references(&insts, 100_000).unwrap();
        let set = validation_set(insts, &refs);
        let mut log = Vec::new();
        train_logged(tiny(), 1, Some(&set), false, &mut log).unwrap();
        let lines: Vec<serde_json::Value> =
            String::from_utf8(log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        for (i, l) in lines.iter().enumerate() {
            assert_eq!(l["update"], i + 1);
            assert_eq!(l["wall_ms"], 0);
            assert!(l["val_error"].is_number());
            assert!(l["mean_return"].is_number() && l["mean_makespan"].is_number());
        }
    }
}
