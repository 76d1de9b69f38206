//! Replace embeddings with 1-gram frequency features.
//!
//! The vocabulary is fitted on training prompts only; each entry is the token's
//! count in the prompt divided by its count in the training corpus.

use refassess::ingest::{one_gram_features, OneGramVocabulary};
use refassess::model::instance_ids;

fn main() -> refassess::Result<()> {
    let train = ["What is 2 + 2?", "What is the capital of France?", "Name the capital of Peru."];
    let all = [train[0], train[1], train[2], "What is 7 + 5?"];
    let vocab = OneGramVocabulary::fit(&train, 6)?;
    println!("vocabulary: {:?}", vocab.tokens());
    for p in &all {
        println!("{:40} -> {:?}", p, vocab.transform(p));
    }
    let store = one_gram_features(&train, instance_ids(&["a", "b", "c", "d"]), vec!["mixed".into(); 4], &all, 6)?;
    println!("store: {} instances, dim {}", store.len(), store.dim());
    Ok(())
}
