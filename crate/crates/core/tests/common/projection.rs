use nalgebra::{DMatrix, DVector};
use priest::basis::{BasisKind, BasisSet, BoundaryConstraints, StartState, Trajectory};
use priest::polar::{Limits, Obstacle, PolarConstraintSystem};
use priest::projection::{ProjectionConfig, ProjectionWorkspace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Setup {
    pub basis: BasisSet,
    pub bc: BoundaryConstraints,
    pub obstacles: Vec<Obstacle>,
    pub limits: Limits,
}

pub fn random_setup(rng: &mut ChaCha8Rng) -> Setup {
    let n_p = rng.random_range(12..30);
    let degree = rng.random_range(5..11);
    let tf = rng.random_range(3.0..12.0);
    let basis = BasisSet::with_kind(BasisKind::Chebyshev, n_p, degree, 0.0, tf).unwrap();
    let start = StartState {
        pos: [0, 1, 2].map(|_| rng.random_range(-2.0..2.0)),
        vel: [0, 1, 2].map(|_| rng.random_range(-1.0..1.0)),
        acc: [0, 1, 2].map(|_| rng.random_range(-0.5..0.5)),
    };
    let goal = [0, 1, 2].map(|_| rng.random_range(-8.0..8.0));
    let bc = BoundaryConstraints::new(&basis, &start, goal).unwrap();
    let n_o = rng.random_range(0..5);
    let obstacles = (0..n_o)
        .map(|_| {
            let c = [0, 1, 2].map(|_| rng.random_range(-5.0..5.0));
            Obstacle::fixed(c, rng.random_range(0.3..1.5), rng.random_range(0.3..1.5), n_p).unwrap()
        })
        .collect();
    let limits = Limits {
        v_max: rng.random_range(1.0..4.0),
        a_max: rng.random_range(1.0..4.0),
        s_min: [-10.0; 3],
        s_max: [10.0; 3],
    };
    Setup {
        basis,
        bc,
        obstacles,
        limits,
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..s)).collect()
}

/// Largest coefficient gap between the workspace QP step and a dense KKT
/// solve of the same problem, over `instances` random problems.
pub fn kkt_gap(seed: u64, instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let s = random_setup(&mut rng);
        let rho = rng.random_range(0.1..3.0);
        let cfg = ProjectionConfig {
            rho,
            ..Default::default()
        };
        let ws = ProjectionWorkspace::new(&s.basis, s.obstacles.len(), &s.limits, &s.bc, &cfg).unwrap();
        let nv = s.basis.n_v();
        let xi = random_vec(&mut rng, nv, 3.0);
        let lambda = random_vec(&mut rng, nv, 1.0);
        let e = random_vec(&mut rng, ws.e_len(), 5.0);
        let (x, _) = ws.qp_step(&xi, &e, &lambda).unwrap();

        let f = PolarConstraintSystem::new(&s.basis, &s.obstacles, &s.limits).unwrap().f;
        let neq = s.bc.rows();
        let mut kkt = DMatrix::zeros(nv + neq, nv + neq);
        let h = DMatrix::identity(nv, nv) + f.transpose() * &f * rho;
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&h);
        kkt.view_mut((nv, 0), (neq, nv)).copy_from(&s.bc.a);
        kkt.view_mut((0, nv), (nv, neq)).copy_from(&s.bc.a.transpose());
        let fte = f.transpose() * DVector::from_vec(e);
        let mut rhs = DVector::zeros(nv + neq);
        for i in 0..nv {
            rhs[i] = xi[i] + lambda[i] + rho * fte[i];
        }
        rhs.rows_mut(nv, neq).copy_from(&s.bc.b_eq);
        let sol = kkt.full_piv_lu().solve(&rhs).unwrap();
        let gap = (0..nv).map(|i| (sol[i] - x[i]).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    worst
}

/// Largest coefficient gap between `project_batch` and per-sample
/// `project_one` over `n_b` random samples. Infinite when a residual or a
/// residual trace differs in any bit.
pub fn batch_gap(seed: u64, n_b: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = random_setup(&mut rng);
    let cfg = ProjectionConfig::default();
    let ws = ProjectionWorkspace::new(&s.basis, s.obstacles.len(), &s.limits, &s.bc, &cfg).unwrap();
    let samples: Vec<Trajectory> = (0..n_b)
        .map(|_| Trajectory::new(random_vec(&mut rng, s.basis.n_v(), 3.0), &s.basis).unwrap())
        .collect();
    let batch = ws.project_batch(&samples, &s.obstacles, &s.limits, &cfg).unwrap();
    let mut worst = 0.0f64;
    for (i, smp) in samples.iter().enumerate() {
        let one = ws.project_one(smp.coeffs(), &s.obstacles, &s.limits, cfg.max_iters);
        if batch.residuals[i].to_bits() != one.residual.to_bits() || batch.traces[i] != one.trace {
            return f64::INFINITY;
        }
        for (&a, &b) in batch.projected[i].coeffs().iter().zip(&one.xi_bar) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
