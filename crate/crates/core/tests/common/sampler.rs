use nalgebra::{DMatrix, DVector};
use priest::sampler::{compute_weights, select_lowest, update_distribution, SamplerState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> SamplerState {
    let mean = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    SamplerState::new(mean, &l * l.transpose())
}

/// Largest gap between `update_distribution` and a scalar-loop evaluation
/// of the weighted mean and covariance updates.
pub fn update_gap(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m_e) = (12, 20);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let state = random_state(&mut rng, n);
        let elites: Vec<Vec<f64>> = (0..m_e)
            .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let costs: Vec<f64> = (0..m_e).map(|_| rng.random_range(0.0..5.0)).collect();
        let gamma = rng.random_range(0.2..3.0);
        let sigma = rng.random_range(0.0..1.0);
        let w = compute_weights(&costs, gamma);
        let refs: Vec<&[f64]> = elites.iter().map(|e| e.as_slice()).collect();
        let next = update_distribution(&state, &refs, &w, sigma);

        let delta = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut cw = vec![0.0; m_e];
        let mut total = 0.0;
        for m in 0..m_e {
            cw[m] = (-(costs[m] - delta) / gamma).exp();
            total += cw[m];
        }
        let mut mu = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for m in 0..m_e {
                s += cw[m] * elites[m][i];
            }
            mu[i] = (1.0 - sigma) * state.mean[i] + sigma * s / total;
            worst = worst.max((next.mean[i] - mu[i]).abs());
        }
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for m in 0..m_e {
                    s += cw[m] * (elites[m][i] - mu[i]) * (elites[m][j] - mu[j]);
                }
                let want = (1.0 - sigma) * state.cov[(i, j)] + sigma * s / total;
                worst = worst.max((next.cov[(i, j)] - want).abs());
            }
        }
    }
    worst
}

/// Largest change made by a `sigma = 0` update.
pub fn sigma_zero_gap(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = random_state(&mut rng, 6);
    let e = vec![1.0; 6];
    let next = update_distribution(&state, &[&e], &[1.0], 0.0);
    let dm = (&next.mean - &state.mean).amax();
    let dc = (&next.cov - &state.cov).amax();
    dm.max(dc)
}

/// Distance of a `sigma = 1` update at vanishing temperature from the
/// best elite with zero covariance.
pub fn collapse_gap(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8;
    let state = random_state(&mut rng, n);
    let elites: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let costs: Vec<f64> = (0..20).map(|m| 1.0 + 0.01 * ((m * 7) % 20) as f64).collect();
    let best = select_lowest(&costs, 1).unwrap()[0];
    let w = compute_weights(&costs, 1e-9);
    let refs: Vec<&[f64]> = elites.iter().map(|e| e.as_slice()).collect();
    let next = update_distribution(&state, &refs, &w, 1.0);
    let dm = (0..n)
        .map(|i| (next.mean[i] - elites[best][i]).abs())
        .fold(0.0, f64::max);
    dm.max(next.cov.amax())
}
