//! Central-difference verification of the backward pass. Runs the reduced
//! architecture in `f64` and compares every analytic parameter gradient
//! against `(L(w + eps) - L(w - eps)) / (2 eps)`.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{ArchSpec, Network};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub params_checked: usize,
    /// Coordinates whose eps-wide secant straddled a ReLU or pooling kink
    /// and were re-estimated with a smaller step.
    pub refined: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn set_param(net: &mut Network<f64>, slice: usize, idx: usize, value: f64) {
    net.param_slices_mut()[slice][idx] = value;
}

/// Builds the reduced two-convolution network, computes analytic gradients
/// of the BCE loss for one random input, and sweeps every parameter with
/// central differences (`eps = 1e-3`). With `with_dropout`, masks are
/// sampled once and frozen for every finite-difference evaluation.
pub fn grad_check(tolerance: f64, seed: u64, with_dropout: bool) -> Result<GradCheckReport> {
    let arch = if with_dropout {
        ArchSpec::reduced()
    } else {
        ArchSpec::reduced().without_dropout()
    };
    let mut net: Network<f64> = Network::init(&arch, seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4744_4348_4b31);
    let (c, h, w) = net.input_shape();
    let input = Array3::from_shape_fn((c, h, w), |_| rng.random_range(0.0..2.0));
    let target = 1.0;

    let cache = net.forward_train(&input, &mut rng)?;
    let masks = cache.masks();
    let analytic = net.backward(&cache, target)?;
    let analytic_flat: Vec<Vec<f64>> = Network::grad_slices(&analytic)
        .into_iter()
        .map(|s| s.to_vec())
        .collect();

    let eps = 1e-3;
    let mut max_rel_error = 0.0f64;
    let mut params_checked = 0usize;
    let mut refined = 0usize;
    let n_slices = net.param_slices().len();
    for si in 0..n_slices {
        let len = net.param_slices()[si].len();
        for ei in 0..len {
            let ana = analytic_flat[si][ei];
            let mut step = eps;
            let mut rel = f64::INFINITY;
            // ReLU and max-pool make the loss piecewise smooth; a secant
            // that straddles a kink is not a derivative estimate. Shrink
            // the step until the interval is on one piece (two refinements
            // cover every kink seen at these scales).
            for attempt in 0..3 {
                let orig = net.param_slices()[si][ei];
                set_param(&mut net, si, ei, orig + step);
                let lp = Network::bce_loss(net.forward_frozen(&input, &masks)?, target);
                set_param(&mut net, si, ei, orig - step);
                let lm = Network::bce_loss(net.forward_frozen(&input, &masks)?, target);
                set_param(&mut net, si, ei, orig);

                let numeric = (lp - lm) / (2.0 * step);
                rel = (numeric - ana).abs() / (numeric.abs() + ana.abs()).max(1e-8);
                if rel < tolerance {
                    break;
                }
                if attempt == 0 {
                    refined += 1;
                }
                step /= 10.0;
            }
            if rel > max_rel_error {
                max_rel_error = rel;
            }
            params_checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        params_checked,
        refined,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}
