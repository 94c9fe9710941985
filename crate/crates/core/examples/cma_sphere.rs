//! Minimises a shifted 10-dimensional sphere with CMA-ES.

use mobility_pricing::cma::CmaEs;

fn main() -> mobility_pricing::Result<()> {
    let target: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 5.0).collect();
    let distance = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let mut es = CmaEs::new(&[0.0; 10], 0.5, 12, 7)?;
    for g in 0..150 {
        let cands = es.ask();
        let fitness: Vec<f64> = cands.iter().map(|c| -distance(c).powi(2)).collect();
        es.tell(&cands, &fitness)?;
        if g % 10 == 0 || distance(es.mean()) < 1e-3 {
            println!(
                "generation {g:>3}  sigma {:.2e}  distance {:.2e}",
                es.sigma(),
                distance(es.mean())
            );
        }
        if distance(es.mean()) < 1e-3 {
            break;
        }
    }
    Ok(())
}
