//! Full experiment on a synthetic world: grid, validation, baselines, report files.
//!
//! `cargo run --release --example synthetic_experiment [out_dir]`

use refassess::classifiers::ClassifierSpec;
use refassess::harness::{generate_synthetic_world, run_experiment_on, write_report, RunConfig, SplitConfig};
use refassess::model::LlmSplit;

fn main() -> refassess::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_experiment_out".into());
    let world = generate_synthetic_world(16, 600, 3, 0.1, 2)?;
    let config = RunConfig {
        n_ref: 30,
        split: SplitConfig {
            llms: LlmSplit::Counts { train: 10, val: 3 },
            ..SplitConfig::default()
        },
        classifiers: vec![ClassifierSpec::logreg_l2(1e-3), ClassifierSpec::logreg_l1(1e-3), ClassifierSpec::gbdt(3, 30)],
        seed: 2,
        ..RunConfig::default()
    };
    let report = run_experiment_on(&world.matrix, &world.store, &config)?;
    println!("{} combinations; winner {}", report.combinations.len(), report.winner);
    for a in report.assessors() {
        println!("{:16} mean test AUC {:.3}  ({})", a.name, a.mean_test_auc.unwrap_or(f64::NAN), a.choice);
    }
    for path in write_report(&report, std::path::Path::new(&out))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
