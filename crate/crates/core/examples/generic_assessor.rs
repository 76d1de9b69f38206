//! Train a generic assessor on past LLMs and apply it to an unseen one.
//!
//! The new LLM is only run on the reference instances; the assessor then
//! predicts its success on every other instance.

use refassess::assessors::{train_generic_assessor, FeatureMode, Standardizer};
use refassess::classifiers::ClassifierSpec;
use refassess::harness::generate_synthetic_world;
use refassess::numerics::auc;
use refassess::selectors::{select_random, SelectorSpec};

fn main() -> refassess::Result<()> {
    let world = generate_synthetic_world(21, 1200, 2, 0.1, 5)?;
    let all_llms = world.matrix.llm_ids().to_vec();
    let ids = world.matrix.instance_ids().to_vec();
    let (train_ids, test_ids) = ids.split_at(900);
    let (past, new) = all_llms.split_at(20);
    let train = world.matrix.select(past, train_ids)?;

    let reference = select_random(&SelectorSpec::random(50, 1), train_ids)?;
    let standardizer = Standardizer::fit(&world.store, train_ids)?;
    for mode in FeatureMode::ALL {
        let assessor = train_generic_assessor(&train, &world.store, &standardizer, &reference, mode, &ClassifierSpec::logreg_l2(1e-3))?;
        let g = world.matrix.outcomes(&new[0], &reference.instance_ids)?;
        let scores = assessor.scores(&g, &world.store, test_ids)?;
        let labels = world.matrix.outcomes(&new[0], test_ids)?;
        println!("{:28} new-LLM test AUC {:.3}", mode.as_str(), auc(&scores, &labels)?);
    }

    let assessor = train_generic_assessor(&train, &world.store, &standardizer, &reference, FeatureMode::Embeddings, &ClassifierSpec::logreg_l2(1e-3))?;
    let g = world.matrix.outcomes(&new[0], &reference.instance_ids)?;
    let p = assessor.predict_new_llm(&g, world.store.vector(&test_ids[0]).expect("known id"))?;
    println!("P(success of {} on {}) = {p:.3}", new[0], test_ids[0]);
    Ok(())
}
