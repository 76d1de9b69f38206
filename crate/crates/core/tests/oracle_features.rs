//! Noiseless world, features equal to the true (a_i, b_i): the generic
//! assessor should rank test instances almost as well as the true probabilities.

use refassess::assessors::{train_generic_assessor, FeatureMode, Standardizer};
use refassess::classifiers::ClassifierSpec;
use refassess::harness::generate_synthetic_world;
use refassess::numerics::auc;
use refassess::selectors::{select_random, SelectorSpec};

#[test]
fn oracle_features_reach_bayes_auc() {
    let world = generate_synthetic_world(28, 2000, 1, 0.0, 3).unwrap();
    let ids = world.matrix.instance_ids().to_vec();
    let (train_ids, test_ids) = ids.split_at(1500);
    let llms = world.matrix.llm_ids().to_vec();
    let train = world.matrix.select(&llms[..20], train_ids).unwrap();
    let reference = select_random(&SelectorSpec::random(400, 1), train_ids).unwrap();
    let standardizer = Standardizer::fit(&world.store, train_ids).unwrap();
    let assessor = train_generic_assessor(
        &train,
        &world.store,
        &standardizer,
        &reference,
        FeatureMode::Embeddings,
        &ClassifierSpec::gbdt(4, 200),
    )
    .unwrap();
    let cols: Vec<usize> = test_ids.iter().map(|i| world.matrix.instance_position(i).unwrap()).collect();
    let mut gaps = Vec::new();
    for llm in &llms[20..] {
        let g = world.matrix.outcomes(llm, &reference.instance_ids).unwrap();
        let scores = assessor.scores(&g, &world.store, test_ids).unwrap();
        let got = auc(&scores, &world.matrix.outcomes(llm, test_ids).unwrap()).unwrap();
        let bayes = world.bayes_auc(world.matrix.llm_position(llm).unwrap(), &cols).unwrap();
        gaps.push(bayes - got);
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(mean_gap <= 0.03, "mean gap to Bayes {mean_gap:.4}, per LLM {gaps:.3?}");
}
