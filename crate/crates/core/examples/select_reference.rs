//! Every reference-set selector on one synthetic world.

use refassess::harness::generate_synthetic_world;
use refassess::irt::{fit_irt, IrtConfig};
use refassess::selectors::{select, FeatureSource, SelectionInputs, SelectionMethod, SelectorSpec};

fn main() -> refassess::Result<()> {
    let world = generate_synthetic_world(16, 400, 3, 0.1, 1)?;
    let irt = fit_irt(&world.matrix, &IrtConfig { k: 3, ..IrtConfig::default() })?;
    let inputs = SelectionInputs {
        train_matrix: &world.matrix,
        store: &world.store,
        irt: Some(&irt),
    };
    // best-of-20 needs a score; prefer references whose mean success rate is closest to 0.5
    let score = |r: &refassess::model::ReferenceSet| -> refassess::Result<f64> {
        let mut hits = 0.0;
        for id in &r.instance_ids {
            let i = world.matrix.instance_position(id).expect("known id");
            hits += (0..world.matrix.n_llms()).map(|j| world.matrix.get(j, i) as f64).sum::<f64>();
        }
        let rate = hits / (r.len() * world.matrix.n_llms()) as f64;
        Ok(-(rate - 0.5).abs())
    };
    for method in [SelectionMethod::Clustering, SelectionMethod::FactorAnalysis] {
        for source in [FeatureSource::IntrinsicFeatures, FeatureSource::SuccessColumns, FeatureSource::IrtDemands] {
            let r = select(&SelectorSpec::new(source, method, 10, 7), inputs, None)?;
            println!("{:36} {:?}", r.selector, r.instance_ids.iter().map(|i| i.as_str()).collect::<Vec<_>>());
        }
    }
    for spec in [SelectorSpec::random(10, 7), SelectorSpec::new(FeatureSource::IntrinsicFeatures, SelectionMethod::RandomBestOf20, 10, 7)] {
        let r = select(&spec, inputs, Some(&score))?;
        println!("{:36} {:?}", r.selector, r.instance_ids.iter().map(|i| i.as_str()).collect::<Vec<_>>());
    }
    Ok(())
}
