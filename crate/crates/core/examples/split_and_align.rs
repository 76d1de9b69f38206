//! Parse a success CSV and an embeddings JSONL, align them, and split.
//!
//! Run with `cargo run --example split_and_align`.

use refassess::ingest::{parse_embeddings_jsonl, parse_success_csv};
use refassess::model::{align, make_split, LlmSplit, SplitMode};

fn main() -> refassess::Result<()> {
    let csv = "llm_id,q1,q2,q3,q4,q5,q6\n\
               model-a,1,0,1,1,0,1\n\
               model-b,0,0,1,1,0,0\n\
               model-c,1,1,1,0,0,1\n\
               model-d,1,0,0,1,1,1\n";
    let mut jsonl = String::new();
    for (i, ds) in ["arith", "arith", "arith", "trivia", "trivia", "trivia", "unused"].iter().enumerate() {
        jsonl.push_str(&format!(
            "{{\"instance_id\": \"q{}\", \"embedding\": [{}, {}], \"dataset\": \"{ds}\"}}\n",
            i + 1,
            i as f64 * 0.1,
            1.0 - i as f64 * 0.1
        ));
    }
    let matrix = parse_success_csv(csv, "inline.csv")?;
    let store = parse_embeddings_jsonl(&jsonl, "inline.jsonl")?;
    // q7 has an embedding but no results, so it is dropped
    let (matrix, store) = align(&matrix, &store)?;
    println!("aligned: {} LLMs x {} instances, embedding dim {}", matrix.n_llms(), matrix.n_instances(), store.dim());

    let plan = make_split(
        store.instance_ids(),
        store.dataset_labels(),
        matrix.llm_ids(),
        &SplitMode::OodByDataset {
            test_datasets: vec!["trivia".into()],
            train_frac: 0.67,
        },
        &LlmSplit::Counts { train: 2, val: 1 },
        42,
    )?;
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(())
}
