//! Densities, score functions and the constant 𝔄 of the two shipped Lévy measures.

use mfmalliavin::levy::LevyMeasureSpec;
use mfmalliavin::quadrature::ZQuadrature;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mfmalliavin::Result<()> {
    let measures = [
        LevyMeasureSpec::UniformSymmetric {
            half_width: 0.5,
            rate: 10.0,
        },
        LevyMeasureSpec::Kou {
            rate: 10.0,
            p: 0.6,
            eta1: 10.0,
            eta2: 5.0,
        },
    ];
    for mu in &measures {
        mu.validate()?;
        let quad = ZQuadrature::for_measure(mu);
        let intensity = quad.integrate(|_| 1.0);
        println!("{mu:?}");
        println!(
            "  total intensity {:.6} (quadrature {intensity:.6})",
            mu.total_intensity()
        );
        println!("  A = {:.6}", mu.mass_a()?);
        for z in [-0.3, -0.1, 0.1, 0.3] {
            println!(
                "  z={z:+.1}  density {:.4}  d log k {:?}",
                mu.density(z),
                mu.grad_log(z)
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let marks: Vec<f64> = (0..20_000).map(|_| mu.sample_mark(&mut rng)).collect();
        let mean = marks.iter().sum::<f64>() / marks.len() as f64;
        let exact = quad.integrate(|z| z) / intensity;
        println!("  mark mean {mean:+.5} (exact {exact:+.5})");
    }
    Ok(())
}
