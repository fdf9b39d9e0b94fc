//! Central finite-difference gradient verification.
//!
//! Analytic gradients from the tape and the `(f(x+eps) - f(x-eps)) / 2eps`
//! quotient are two independent routes to the same derivative; agreement on
//! random instances is the correctness oracle for every differentiable
//! operation and loss in this crate.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Symmetric relative error, floored so near-zero pairs compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compare an analytic gradient against central differences, coordinate by
/// coordinate. Returns the worst relative error over all entries.
pub fn check_grad<F>(x: &Array2<f64>, analytic: &Array2<f64>, mut f: F, eps: f64) -> f64
where
    F: FnMut(&Array2<f64>) -> f64,
{
    assert_eq!(x.dim(), analytic.dim());
    let mut worst: f64 = 0.0;
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.dim().1, idx % x.dim().1);
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + eps;
        let hi = f(&xp);
        xp[[r, c]] = orig - eps;
        let lo = f(&xp);
        xp[[r, c]] = orig;
        let fd = (hi - lo) / (2.0 * eps);
        worst = worst.max(rel_err(analytic[[r, c]], fd));
    }
    worst
}

/// Like [`check_grad`] but only on a random sample of coordinates; used for
/// parameter sets too large to sweep exhaustively.
pub fn check_grad_sampled<F>(
    x: &Array2<f64>,
    analytic: &Array2<f64>,
    mut f: F,
    eps: f64,
    samples: usize,
    seed: u64,
) -> f64
where
    F: FnMut(&Array2<f64>) -> f64,
{
    assert_eq!(x.dim(), analytic.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<usize> = (0..x.len()).collect();
    coords.shuffle(&mut rng);
    coords.truncate(samples.min(x.len()));
    let mut worst: f64 = 0.0;
    let mut xp = x.clone();
    for idx in coords {
        let (r, c) = (idx / x.dim().1, idx % x.dim().1);
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + eps;
        let hi = f(&xp);
        xp[[r, c]] = orig - eps;
        let lo = f(&xp);
        xp[[r, c]] = orig;
        let fd = (hi - lo) / (2.0 * eps);
        worst = worst.max(rel_err(analytic[[r, c]], fd));
    }
    worst
}
