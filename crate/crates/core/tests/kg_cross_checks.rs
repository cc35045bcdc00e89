use kgrad::acquisition::{
    kg_discrete, kg_hybrid, kg_mc, kg_oneshot_with_grad, oneshot_starts, Discretization, KgContext, ZSet,
};
use kgrad::gp::{Dataset, KernelConfig, PosteriorGp};
use kgrad::optimizer::{maximize_joint_from, BoxDomain, JointPoint, OptimizerConfig};
use kgrad::testbed::latin_hypercube;
use kgrad::{qmc, Error};
use rand::Rng;
use rand_distr::StandardNormal;

fn random_1d_gp(seed: u64) -> PosteriorGp<f64> {
    let mut r = qmc::rng(seed);
    let n = r.random_range(2..8);
    let xs = latin_hypercube::<f64>(n, 1, seed).unwrap();
    let ys = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let noise = if r.random::<bool>() { 0.0 } else { 0.01 };
    let k = KernelConfig::isotropic_se(1, 1.0, r.random_range(0.08..0.3), noise).unwrap();
    PosteriorGp::fit_with_output_mean(Dataset::new(xs, ys).unwrap(), k).unwrap()
}

/// A random candidate, moved to the highest-variance probe if it sits on data.
fn away_from_data(gp: &PosteriorGp<f64>, seed: u64) -> Vec<f64> {
    let mut r = qmc::rng(seed ^ 0xabc);
    let x = vec![r.random::<f64>()];
    if gp.variance(&x).unwrap() > 1e-4 {
        return x;
    }
    (0..=1000)
        .map(|i| vec![i as f64 / 1000.0])
        .max_by(|a, b| gp.variance(a).unwrap().total_cmp(&gp.variance(b).unwrap()))
        .unwrap()
}

#[test]
fn hybrid_beats_same_size_latin_hypercube() {
    let opt = OptimizerConfig::inner();
    let mut wins = 0;
    for seed in 0..100 {
        let gp = random_1d_gp(seed);
        let ctx = KgContext::new(&gp, &opt).unwrap();
        let x_new = away_from_data(&gp, seed);
        let (h, _) = kg_hybrid(&ctx, &x_new, 5, &opt).unwrap();
        let lhc = Discretization::new(latin_hypercube(5, 1, seed + 1000).unwrap(), true).unwrap();
        let d = kg_discrete(&ctx, &x_new, &lhc).unwrap();
        // values below 1e-12 are ties (both sets see a flat envelope)
        wins += usize::from(h >= d - 1e-12);
    }
    assert!(wins >= 90, "hybrid won {wins} of 100");
}

fn joint_oneshot(ctx: &KgContext<'_, f64>, zs: &ZSet<f64>, incumbent_share: usize) -> (JointPoint<f64>, f64) {
    let n = zs.len();
    let f = |flat: &[f64], g: &mut [f64]| {
        let jp = JointPoint::split(flat, 1);
        let disc = Discretization {
            points: jp.points,
            include_incumbent: false,
        };
        match kg_oneshot_with_grad(ctx, &jp.x_new, &disc, zs) {
            Ok(k) => {
                g[0] = k.d_x_new[0];
                for (gi, d) in g[1..].iter_mut().zip(&k.d_points) {
                    *gi = d[0];
                }
                k.value
            }
            Err(Error::DegenerateAnchor { .. }) => 0.0,
            Err(_) => f64::NAN,
        }
    };
    let cfg = OptimizerConfig::acquisition().with_max_iters(400).with_seed(3);
    let starts = oneshot_starts(ctx, n, n - incumbent_share.min(n), cfg.restarts, 3);
    let m = maximize_joint_from(f, &BoxDomain::unit(1), n, &cfg, starts).unwrap();
    (m.point, m.value)
}

#[test]
fn oneshot_after_joint_ascent_matches_mc() {
    let inner = OptimizerConfig::inner().with_restarts(20);
    for seed in 0..10 {
        let gp = random_1d_gp(seed);
        let ctx = KgContext::new(&gp, &inner).unwrap();
        let zs = ZSet::monte_carlo(4, seed).unwrap();
        let (point, value) = joint_oneshot(&ctx, &zs, 4);
        let mc = kg_mc(&ctx, &point.x_new, &zs, &inner).unwrap();
        assert!(
            (value - mc.value).abs() <= 1e-3,
            "seed {seed}: one-shot {value} vs mc {} at {:?}",
            mc.value,
            point.x_new
        );
    }
}

#[test]
fn oneshot_hybrid_after_joint_ascent_is_near_hybrid() {
    let inner = OptimizerConfig::inner();
    for seed in 0..10 {
        let gp = random_1d_gp(seed);
        let ctx = KgContext::new(&gp, &inner).unwrap();
        let spec = kgrad::AcquisitionSpec::new(kgrad::Variant::OneShotHybrid(5));
        let p = kgrad::acquisition::next_point(&ctx, &spec, seed).unwrap();
        let (h, _) = kg_hybrid(&ctx, &p.x, 5, &inner).unwrap();
        assert!((p.value - h).abs() <= 1e-2, "seed {seed}: osh {} vs hybrid {h}", p.value);
    }
}

#[test]
fn dense_grid_dominates_sparse_discretizations() {
    let opt = OptimizerConfig::inner();
    let grid: Vec<Vec<f64>> = (0..2001).map(|i| vec![i as f64 / 2000.0]).collect();
    for seed in 0..20 {
        let gp = random_1d_gp(seed);
        let ctx = KgContext::new(&gp, &opt).unwrap();
        let x_new = away_from_data(&gp, seed);
        let dense = kg_discrete(&ctx, &x_new, &Discretization::new(grid.clone(), true).unwrap()).unwrap();
        for d in [1, 3, 10, 50] {
            let sparse = Discretization::space_filling(d, 1, seed * 7 + d as u64, true).unwrap();
            let v = kg_discrete(&ctx, &x_new, &sparse).unwrap();
            assert!(v <= dense + 1e-6, "seed {seed} d {d}: {v} > {dense}");
        }
    }
}
