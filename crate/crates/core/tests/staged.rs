mod common;

use common::at;
use sbn_core::evaluator::{rolling_evaluate, train_on_window, EvalConfig};
use sbn_core::io::{generate_synthetic, SynthConfig};
use sbn_core::{Execution, ModelConfig, StageKind, TrainConfig, TrainMode};

#[test]
fn staged_unfrozen_matches_joint_within_fifteen_percent() {
    let year = 8760;
    let series = generate_synthetic(&SynthConfig::benchmark(at(2016, 1, 1, 0), 2 * year, 2));
    let config = ModelConfig::from_boosters(&StageKind::ALL).unwrap();
    // Staged training runs one phase per stage, so joint training gets the same
    // total number of epochs.
    let phase_epochs = 10;
    let score = |mode, epochs| {
        let train = TrainConfig {
            epochs,
            mode,
            seed: 4,
            ..TrainConfig::default()
        };
        let model = train_on_window(&series, &config, &train, year, year, Execution::default()).unwrap();
        rolling_evaluate(&model, &series, &EvalConfig::new(24, year, 2 * year)).unwrap().final_nrmse()
    };
    let joint = score(TrainMode::JointWeighted, phase_epochs * (config.stages.len() + 1));
    let staged = score(TrainMode::StagedUnfrozen, phase_epochs);
    let gap = (staged - joint).abs() / joint;
    assert!(gap <= 0.15, "joint {joint:.4}, staged_unfrozen {staged:.4}, gap {gap:.3}");
}
