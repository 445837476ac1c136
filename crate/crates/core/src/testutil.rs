use alloc::vec::Vec;

use crate::problem::{FiniteSumProblem, LossKind};
use crate::rng::RunRng;

pub fn random_vec(rng: &mut RunRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.standard_normal()).collect()
}

/// Gaussian design with labels from a planted point (logistic: signs).
pub fn random_problem(loss: LossKind, n: usize, d: usize, seed: u64) -> FiniteSumProblem {
    let mut rng = RunRng::new(seed, 77);
    let design = random_vec(&mut rng, n * d, 1.0 / libm::sqrt(d as f64));
    let truth = random_vec(&mut rng, d, 1.0);
    let labels = design
        .chunks_exact(d)
        .map(|row| {
            let t: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
            match loss {
                LossKind::SquaredResidual => t + 0.1 * rng.standard_normal(),
                LossKind::Logistic => {
                    if rng.uniform01() < 0.1 { -t.signum() } else { t.signum() }
                }
            }
        })
        .map(|b| if b == 0.0 { 1.0 } else { b })
        .collect();
    FiniteSumProblem::new(design, n, d, labels, loss).unwrap()
}
