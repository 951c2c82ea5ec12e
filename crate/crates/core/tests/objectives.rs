use netindep_core::objectives::{
    ridge_optimum, MedianObjective, Objective, QuadraticObjective, RidgeObjective, RidgeParams,
    ZTildeMode, RIDGE_SIGMA_BOX,
};
use netindep_core::rng;
use netindep_core::scalar::{dist_sq, norm_sq};
use rand::Rng;

const SAMPLES: usize = 100_000;

/// Per-coordinate sample mean and standard error of `draw`.
fn mean_and_se(d: usize, samples: usize, mut draw: impl FnMut(&mut [f64])) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut g = vec![0.0; d];
    for _ in 0..samples {
        draw(&mut g);
        for j in 0..d {
            sum[j] += g[j];
            sum_sq[j] += g[j] * g[j];
        }
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let se = sum_sq
        .iter()
        .zip(&mean)
        .map(|(s2, m)| ((s2 / n - m * m) * n / (n - 1.0)).sqrt() / n.sqrt())
        .collect();
    (mean, se)
}

fn assert_unbiased(obj: &dyn Objective<f64>, z: &[f64], seed: u64) {
    let d = obj.dim();
    let mut exact = vec![0.0; d];
    for i in [0, obj.nodes() - 1] {
        obj.exact_grad(i, z, &mut exact);
        let mut r = rng::stream(seed, i as u64);
        let (mean, se) = mean_and_se(d, SAMPLES, |g| obj.sample_grad(i, z, &mut r, g));
        for j in 0..d {
            assert!(
                (mean[j] - exact[j]).abs() < 4.0 * se[j] + 1e-12,
                "node {i} coord {j}: mean {} vs exact {} (se {})",
                mean[j],
                exact[j],
                se[j]
            );
        }
    }
}

fn ridge(n: usize, d: usize, rho: f64, mode: ZTildeMode, seed: u64) -> RidgeObjective<f64> {
    RidgeObjective::new(RidgeParams::generate(n, d, rho, (0.0, 10.0), 1.0, mode, seed).unwrap())
        .unwrap()
}

#[test]
fn ridge_samples_unbiased() {
    let obj = ridge(5, 4, 0.1, ZTildeMode::Random, 1);
    assert_unbiased(&obj, &[0.0; 4], 10);
    assert_unbiased(&obj, &[3.0, -7.5, 12.0, 0.5], 11);
}

#[test]
fn quadratic_samples_unbiased() {
    let obj = QuadraticObjective::<f64>::random(5, 4, 2, 1.0, 3.0, 2.0).unwrap();
    assert_unbiased(&obj, &[1.0, -2.0, 0.0, 4.0, 0.3], 12);
}

#[test]
fn median_samples_are_exact_subgradients() {
    let obj = MedianObjective::<f64>::evenly_spaced(5, -1.0, 1.0).unwrap();
    let mut r = rng::stream(0, 0);
    let (mut g, mut s) = ([0.0], [0.0]);
    for z in [-2.0, -0.5, 0.0, 0.7] {
        for i in 0..5 {
            obj.exact_grad(i, &[z], &mut g);
            obj.sample_grad(i, &[z], &mut r, &mut s);
            assert_eq!(g, s);
        }
    }
}

/// Empirical `E ||g - grad f||^2` at `z` for node `i`, with its standard error.
fn empirical_noise(
    obj: &dyn Objective<f64>,
    i: usize,
    z: &[f64],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let d = obj.dim();
    let (mut exact, mut g) = (vec![0.0; d], vec![0.0; d]);
    obj.exact_grad(i, z, &mut exact);
    let mut r = rng::stream(seed, i as u64);
    let (mean, se) = mean_and_se(1, samples, |out| {
        obj.sample_grad(i, z, &mut r, &mut g);
        out[0] = dist_sq(&g, &exact);
    });
    (mean[0], se[0])
}

#[test]
fn ridge_noise_moment_matches_monte_carlo() {
    let obj = ridge(3, 6, 0.1, ZTildeMode::Random, 4);
    for z in [[0.0; 6], [5.0, -3.0, 1.0, 0.0, 2.0, -8.0]] {
        for i in 0..3 {
            let (emp, _) = empirical_noise(&obj, i, &z, SAMPLES, 5);
            let exact = obj.noise_second_moment(i, &z);
            assert!((emp / exact - 1.0).abs() < 0.03, "{emp} vs {exact}");
        }
    }
}

#[test]
fn ridge_noise_bounded_on_box() {
    let obj = ridge(4, 3, 0.1, ZTildeMode::Random, 6);
    let sigma_sq = obj.constants().sigma_sq;
    let mut r = rng::stream(7, 0);
    let b = RIDGE_SIGMA_BOX;
    let mut points: Vec<[f64; 3]> = (0..20)
        .map(|_| [0; 3].map(|_| r.random_range(-b..=b)))
        .collect();
    // corners farthest from the nonnegative true parameters
    points.push([-b; 3]);
    points.push([b, -b, b]);
    for z in &points {
        for i in 0..4 {
            // the far corner attains the bound, so allow sampling error
            let (emp, se) = empirical_noise(&obj, i, z, 20_000, 8);
            assert!(
                emp < sigma_sq + 4.0 * se,
                "node {i} at {z:?}: {emp} vs {sigma_sq}"
            );
            assert!(obj.noise_second_moment(i, z) <= sigma_sq * (1.0 + 1e-12));
        }
    }
}

#[test]
fn quadratic_noise_moment_is_sigma_squared() {
    let obj = QuadraticObjective::<f64>::random(8, 2, 3, 1.0, 2.0, 1.5).unwrap();
    let (emp, _) = empirical_noise(&obj, 1, &[0.5; 8], SAMPLES, 9);
    assert!((emp / 2.25 - 1.0).abs() < 0.02, "{emp}");
}

#[test]
fn gradient_step_contracts_toward_optimum() {
    let obj = QuadraticObjective::<f64>::random(6, 5, 13, 0.5, 4.0, 0.0).unwrap();
    let c = obj.constants();
    let zstar = obj.optimum().unwrap().to_vec();
    let mut r = rng::stream(14, 0);
    let mut grad = vec![0.0; 6];
    for frac in [0.1, 0.5, 0.9] {
        let alpha = frac / c.lipschitz;
        for _ in 0..200 {
            let z: Vec<f64> = (0..6).map(|_| r.random_range(-20.0..20.0)).collect();
            obj.full_grad(&z, &mut grad);
            let stepped: Vec<f64> = z.iter().zip(&grad).map(|(x, g)| x - alpha * g).collect();
            let lhs = dist_sq(&stepped, &zstar).sqrt();
            let rhs = (1.0 - alpha * c.mu) * dist_sq(&z, &zstar).sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-12), "alpha={alpha}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn ridge_optimum_matches_gradient_descent() {
    for (mode, rho) in [
        (ZTildeMode::Random, 0.1),
        (ZTildeMode::Even, 0.1),
        (ZTildeMode::Random, 2.0),
    ] {
        let obj = ridge(7, 5, rho, mode, 21);
        let closed = ridge_optimum(obj.params()).unwrap();
        let step = 0.5 / obj.modulus();
        let mut z = vec![0.0; 5];
        let mut g = vec![0.0; 5];
        for _ in 0..10_000 {
            obj.full_grad(&z, &mut g);
            if norm_sq(&g) < 1e-30 {
                break;
            }
            z.iter_mut().zip(&g).for_each(|(x, gi)| *x -= step * gi);
        }
        for (a, b) in closed.iter().zip(&z) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // closed form of the isotropic system
        let shrink = (1.0 / 3.0) / (1.0 / 3.0 + rho);
        for (j, c) in closed.iter().enumerate() {
            let mean = (0..7).map(|i| obj.params().z_tilde[(i, j)]).sum::<f64>() / 7.0;
            assert!((c - shrink * mean).abs() < 1e-12);
        }
    }
}
