//! Fit a multidimensional IRT model and use its item demands as features.

use refassess::harness::generate_synthetic_world;
use refassess::irt::{fit_irt, IrtConfig};

fn main() -> refassess::Result<()> {
    let world = generate_synthetic_world(30, 500, 1, 0.1, 3)?;
    let fit = fit_irt(&world.matrix, &IrtConfig { k: 1, ..IrtConfig::default() })?;
    let est: Vec<f64> = fit.capabilities.column(0).iter().copied().collect();
    let truth: Vec<f64> = world.truth.capabilities.column(0).iter().copied().collect();
    let n = est.len() as f64;
    let (me, mt) = (est.iter().sum::<f64>() / n, truth.iter().sum::<f64>() / n);
    let cov: f64 = est.iter().zip(&truth).map(|(a, b)| (a - me) * (b - mt)).sum();
    let norm = (est.iter().map(|a| (a - me).powi(2)).sum::<f64>() * truth.iter().map(|b| (b - mt).powi(2)).sum::<f64>()).sqrt();
    println!("iterations: {}", fit.log_likelihood_trace.len());
    println!("corr(estimated, true capability) = {:.3} (sign is not identified)", cov / norm);

    let demands = fit.item_demands()?;
    println!("item-demand store: {} instances x {} dims; first: {:?}", demands.len(), demands.dim(), demands.row(0));
    Ok(())
}
