//! Pick a combination by mean win rate over validation LLMs.

use refassess::harness::win_rate_select;

fn main() -> refassess::Result<()> {
    let combos: Vec<String> = ["a|embeddings|l2", "b|similarity|l2", "c|similarity|gbdt"].map(String::from).to_vec();
    // rows: combinations; columns: validation LLMs; None marks an undefined AUC
    let table = vec![
        vec![Some(0.81), Some(0.62), Some(0.70), Some(0.90)],
        vec![Some(0.79), Some(0.66), Some(0.70), None],
        vec![Some(0.75), Some(0.64), Some(0.71), Some(0.88)],
    ];
    let sel = win_rate_select(&combos, &table)?;
    for (c, w) in combos.iter().zip(&sel.mean_win_rates) {
        println!("{c:20} mean win rate {w:.3}");
    }
    println!("dropped LLM columns: {:?}", sel.dropped_llms);
    println!("winner: {}", combos[sel.winner]);
    Ok(())
}
