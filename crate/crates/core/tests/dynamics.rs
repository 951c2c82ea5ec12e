use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};

use netindep_core::algorithms::{
    dsgd_step, run, sgd_step, simulate, Algorithm, CentralState, IterateBlock, RunSpec, StateView,
    StepSchedule,
};
use netindep_core::graph;
use netindep_core::linalg::DenseMatrix;
use netindep_core::metrics::{
    consensus_error, node_error_max, optimization_error, MetricGrid, NodeErrorMode,
};
use netindep_core::mixing::MixingMatrix;
use netindep_core::objectives::{
    Constants, Objective, QuadraticObjective, RidgeObjective, RidgeParams, ZTildeMode,
};
use netindep_core::rng::{self, NodeRng};
use netindep_core::scalar::dist_sq;
use proptest::prelude::*;

/// Forwards to an inner objective and counts oracle calls.
struct Counting<O> {
    inner: O,
    exact: AtomicUsize,
    sampled: AtomicUsize,
}

impl<O> Counting<O> {
    fn new(inner: O) -> Self {
        Self {
            inner,
            exact: AtomicUsize::new(0),
            sampled: AtomicUsize::new(0),
        }
    }
}

impl<O: Objective<f64>> Objective<f64> for Counting<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn nodes(&self) -> usize {
        self.inner.nodes()
    }
    fn exact_grad(&self, i: usize, z: &[f64], out: &mut [f64]) {
        self.exact.fetch_add(1, Ordering::Relaxed);
        self.inner.exact_grad(i, z, out);
    }
    fn sample_grad(&self, i: usize, z: &[f64], rng: &mut NodeRng, out: &mut [f64]) {
        self.sampled.fetch_add(1, Ordering::Relaxed);
        self.inner.sample_grad(i, z, rng, out);
    }
    fn optimum(&self) -> Option<&[f64]> {
        self.inner.optimum()
    }
    fn constants(&self) -> Constants<f64> {
        self.inner.constants()
    }
}

fn quadratic(n: usize, d: usize, seed: u64) -> QuadraticObjective<f64> {
    QuadraticObjective::random(d, n, seed, 1.0, 2.0, 1.0).unwrap()
}

#[test]
fn dsgd_and_sgd_use_equal_gradient_budgets() {
    let n = 12;
    let w = MixingMatrix::metropolis(&graph::ring(n).unwrap()).unwrap();
    let sched = StepSchedule::Inv {
        c: 1.0,
        offset: 0.0,
    };
    let init = DenseMatrix::zeros(n, 3);
    for (algorithm, iters) in [
        (Algorithm::Dsgd, 37),
        (Algorithm::Sgd, 37),
        (Algorithm::Dsgd, 1),
    ] {
        let obj = Counting::new(quadratic(n, 3, 1));
        let steps = simulate(
            algorithm,
            &sched,
            iters,
            0,
            &w,
            Some(&obj),
            &init,
            |_, _| ControlFlow::Continue(()),
        )
        .unwrap();
        assert_eq!(steps, iters);
        assert_eq!(obj.sampled.load(Ordering::Relaxed), n * iters as usize);
        assert_eq!(obj.exact.load(Ordering::Relaxed), 0);
    }
}

#[test]
fn single_node_dsgd_is_bitwise_sgd() {
    let obj = quadratic(1, 4, 3);
    let w = MixingMatrix::identity(1).unwrap();
    let sched = StepSchedule::MuInv { mu: 1.0 };
    let mut block =
        IterateBlock::new(DenseMatrix::from_vec(1, 4, vec![3.0, -1.0, 0.5, 8.0]).unwrap());
    let mut central = CentralState::new(block.z.row(0).to_vec());
    let mut ra = rng::node_streams(42, 1);
    let mut rb = rng::node_streams(42, 1);
    for _ in 0..500 {
        block = dsgd_step(&block, &w, &obj, &sched, &mut ra).unwrap();
        central = sgd_step(&central, &obj, &sched, &mut rb).unwrap();
        let a: Vec<u64> = block.z.row(0).iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = central.z.iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b, "diverged at k = {}", block.k);
    }
}

#[test]
fn network_average_follows_mean_gradient() {
    let n = 9;
    let w = MixingMatrix::metropolis(&graph::grid(3, 3).unwrap()).unwrap();
    let params = RidgeParams::generate(n, 4, 0.1, (0.0, 10.0), 1.0, ZTildeMode::Random, 2).unwrap();
    let obj = RidgeObjective::new(params).unwrap();
    let sched = StepSchedule::Inv {
        c: 5.0,
        offset: 0.0,
    };
    let mut state = IterateBlock::zeros(n, 4);
    let mut rngs = rng::node_streams(8, n);
    let mut g = vec![0.0; 4];
    for _ in 0..300 {
        // replay each node's draw on a copy of its stream
        let mut mean_g = vec![0.0; 4];
        for (i, r) in rngs.iter().enumerate() {
            obj.sample_grad(i, state.z.row(i), &mut r.clone(), &mut g);
            mean_g
                .iter_mut()
                .zip(&g)
                .for_each(|(m, x)| *m += x / n as f64);
        }
        let alpha = sched.at(state.k + 1);
        let expected: Vec<f64> = state
            .z
            .column_mean()
            .iter()
            .zip(&mean_g)
            .map(|(z, gm)| z - alpha * gm)
            .collect();
        state = dsgd_step(&state, &w, &obj, &sched, &mut rngs).unwrap();
        let scale = state
            .z
            .as_slice()
            .iter()
            .fold(1.0f64, |m, x| m.max(x.abs()));
        for (a, b) in state.z.column_mean().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12 * scale, "k={}: {a} vs {b}", state.k);
        }
    }
}

fn spec(algorithm: Algorithm, seed: u64, iterations: u64) -> RunSpec<f64> {
    RunSpec {
        algorithm,
        schedule: StepSchedule::Inv {
            c: 1.0,
            offset: 0.0,
        },
        iterations,
        seed,
        grid: MetricGrid::Every(10),
        node_error: NodeErrorMode::RunningAverage,
        label: String::new(),
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let n = 8;
    let w = MixingMatrix::lazy_metropolis(&graph::star(n).unwrap()).unwrap();
    let obj = quadratic(n, 2, 5);
    let init = DenseMatrix::zeros(n, 2);
    for algorithm in [Algorithm::Dsgd, Algorithm::Sgd] {
        let a = run(&spec(algorithm, 7, 200), &w, Some(&obj), &init).unwrap();
        let b = run(&spec(algorithm, 7, 200), &w, Some(&obj), &init).unwrap();
        let c = run(&spec(algorithm, 8, 200), &w, Some(&obj), &init).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.records, c.records);
    }
}

#[test]
fn single_precision_path() {
    let n = 6;
    let w = MixingMatrix::<f32>::metropolis(&graph::ring(n).unwrap()).unwrap();
    let obj = QuadraticObjective::<f32>::random(3, n, 4, 1.0, 2.0, 0.1).unwrap();
    let spec = RunSpec {
        algorithm: Algorithm::Dsgd,
        schedule: StepSchedule::Inv {
            c: 1.0,
            offset: 1.0,
        },
        iterations: 2000,
        seed: 1,
        grid: MetricGrid::Every(100),
        node_error: NodeErrorMode::Iterate,
        label: String::new(),
    };
    let trace = run(&spec, &w, Some(&obj), &DenseMatrix::zeros(n, 3)).unwrap();
    let first = trace.records.first().unwrap().u.unwrap();
    let last = trace.records.last().unwrap().u.unwrap();
    assert!(last < 1e-2 * first, "{first} -> {last}");
    assert!(last.is_finite());
}

#[test]
fn consensus_needs_no_objective() {
    let n = 10;
    let w = MixingMatrix::lazy_metropolis(&graph::ring(n).unwrap()).unwrap();
    let init = DenseMatrix::from_fn(n, 2, |i, j| (i * 3 + j) as f64);
    let trace = run(&spec(Algorithm::Consensus, 0, 3000), &w, None, &init).unwrap();
    assert!(trace.records.iter().all(|r| r.u.is_none()));
    let vs: Vec<f64> = trace.records.iter().map(|r| r.v.unwrap()).collect();
    assert!(vs.windows(2).all(|p| p[1] <= p[0]));
    assert!(*vs.last().unwrap() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn node_error_bounded_by_average_and_dispersion(seed in any::<u64>(), n in 3usize..15) {
        let w = MixingMatrix::metropolis(&graph::ring(n).unwrap()).unwrap();
        let obj = quadratic(n, 3, seed);
        let zstar = obj.optimum().unwrap().to_vec();
        let init = DenseMatrix::zeros(n, 3);
        let mut checked = 0;
        simulate(Algorithm::Dsgd, &StepSchedule::Inv { c: 1.0, offset: 0.0 }, 60, seed, &w, Some(&obj), &init, |k, view| {
            if let (StateView::Block(z), true) = (view, k % 7 == 0) {
                let bound = 2.0 * optimization_error(z, &zstar) + 2.0 * consensus_error(z);
                for i in 0..n {
                    assert!(dist_sq(z.row(i), &zstar) <= bound * (1.0 + 1e-12));
                }
                assert!(node_error_max(z, &zstar) <= bound * (1.0 + 1e-12));
                checked += 1;
            }
            ControlFlow::Continue(())
        }).unwrap();
        prop_assert!(checked > 0);
    }
}
