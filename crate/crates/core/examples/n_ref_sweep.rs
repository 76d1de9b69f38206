//! Mean test AUC against reference-set size.

use refassess::assessors::FeatureMode;
use refassess::classifiers::ClassifierSpec;
use refassess::harness::{generate_synthetic_world, sweep_n_ref, RunConfig, SelectorChoice};

fn main() -> refassess::Result<()> {
    let world = generate_synthetic_world(20, 800, 3, 0.1, 4)?;
    let config = RunConfig {
        selectors: vec![SelectorChoice::random()],
        feature_modes: vec![FeatureMode::Embeddings, FeatureMode::SimilarityWithInteraction],
        classifiers: vec![ClassifierSpec::logreg_l2(1e-3)],
        seed: 4,
        ..RunConfig::default()
    };
    let table = sweep_n_ref(&world.matrix, &world.store, &config, &[5, 10, 25, 50, 100])?;
    print!("{}", table.to_csv()?);
    std::fs::write("n_ref_sweep.svg", table.to_svg()).expect("writable cwd");
    println!("chart written to n_ref_sweep.svg");
    Ok(())
}
