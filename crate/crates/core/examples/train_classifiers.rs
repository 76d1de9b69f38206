//! The three classifier families on a small two-feature problem.

use nalgebra::DMatrix;
use rand::Rng as _;
use refassess::classifiers::{ClassifierSpec, TrainedClassifier};
use refassess::numerics::auc;
use refassess::util::{seeded_rng, std_normal};

fn main() -> refassess::Result<()> {
    let mut rng = seeded_rng(9);
    let make = |rng: &mut refassess::util::Rng, m: usize| {
        let x = DMatrix::from_fn(m, 2, |_, _| std_normal(rng));
        // success when the features share a sign: a pattern no linear model captures
        let y: Vec<u8> = (0..m)
            .map(|r| {
                let clean = x[(r, 0)] * x[(r, 1)] > 0.0;
                u8::from(clean ^ (rng.random::<f64>() < 0.05))
            })
            .collect();
        (x, y)
    };
    let (x, y) = make(&mut rng, 800);
    let (xt, yt) = make(&mut rng, 400);
    for spec in [ClassifierSpec::logreg_l2(1e-3), ClassifierSpec::logreg_l1(1e-3), ClassifierSpec::gbdt(2, 100)] {
        let model = TrainedClassifier::train(&spec, &x, &y)?;
        let test_auc = auc(&model.predict(&xt)?, &yt)?;
        println!("{:50} test AUC {test_auc:.3}", spec.id());
    }
    Ok(())
}
