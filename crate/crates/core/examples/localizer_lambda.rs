//! The three localizers and the variance-minimising λ, including the coupled
//! two-asset system.

use mfmalliavin::localization::{estimate_lambda, solve_lambda_multi, LocalizerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> mfmalliavin::Result<()> {
    for kind in [LocalizerKind::None, LocalizerKind::Laplace, LocalizerKind::OneSided] {
        let loc = kind.with_lambda(2.0);
        let row: Vec<String> = [-1.0, -0.1, 0.0, 0.1, 1.0]
            .iter()
            .map(|&x| {
                let (psi, cdf) = loc.eval(x);
                format!("({psi:.3},{cdf:.3})")
            })
            .collect();
        println!("{:>9}: {}", kind.name(), row.join(" "));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 4_000;
    let f_sq: Vec<f64> = (0..n).map(|_| 1.0 + rng.random::<f64>()).collect();
    let pi: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (1.0 + j as f64) * z
                })
                .collect()
        })
        .collect();
    println!("single-asset lambda: {:.5}", estimate_lambda(&f_sq, &pi[0])?);
    let multi = solve_lambda_multi(&f_sq, &pi)?;
    println!(
        "coupled lambda: {:?} after {} iteration(s), residual {:.2e}, converged {}",
        multi.lambdas, multi.iterations, multi.residual, multi.converged
    );
    Ok(())
}
