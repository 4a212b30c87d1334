mod common;

use common::{ipalm, max_abs_diff, palm, snmf_instance, tipalm, DenseSnmf};
use stibpalm::estimators::EstimatorConfig;
use stibpalm::solvers::{preset, Preset, Schedules, Solver, SolverConfig};
use stibpalm::{BlockPoint, BregmanKernel, Problem};

const ITERS: usize = 100;

fn fixed_scales(p: &DenseSnmf, z0: &BlockPoint, factor: f64) -> (f64, f64) {
    let (x, y) = p.split(z0);
    (factor * p.lip_x(&y), factor * p.lip_y(&x))
}

fn library_run(problem: &dyn Problem, mut cfg: SolverConfig, z0: &BlockPoint, tx: f64, ty: f64) -> Vec<BlockPoint> {
    cfg.adaptive_theta = false;
    cfg.kernel_x = BregmanKernel::quadratic(tx).unwrap();
    cfg.kernel_y = BregmanKernel::quadratic(ty).unwrap();
    cfg.max_epochs = 1e9;
    let mut s = Solver::new(problem, cfg, z0.clone()).unwrap();
    (0..ITERS)
        .map(|_| {
            s.step().unwrap();
            s.current().clone()
        })
        .collect()
}

fn worst(a: &[BlockPoint], b: &[BlockPoint]) -> f64 {
    assert!(a.iter().all(BlockPoint::is_finite));
    a.iter().zip(b).map(|(p, q)| max_abs_diff(p, q)).fold(0.0, f64::max)
}

#[test]
fn palm_preset_matches_dense_palm() {
    let problem = snmf_instance(20, 15, 5, 11);
    let dense = DenseSnmf::of(&problem);
    let z0 = problem.initial_point(1);
    let (tx, ty) = fixed_scales(&dense, &z0, 2.0);
    let ours = library_run(&problem, preset(Preset::Palm, &SolverConfig::default()), &z0, tx, ty);
    let theirs = palm(&dense, &z0, tx, ty, ITERS);
    assert!(worst(&ours, &theirs) <= 1e-12, "{}", worst(&ours, &theirs));
    assert!(dense.value(&dense.split(&ours[ITERS - 1]).0, &dense.split(&ours[ITERS - 1]).1) < problem.objective(&z0).value);
}

#[test]
fn stochastic_preset_with_full_gradient_and_no_inertia_is_palm() {
    let problem = snmf_instance(20, 15, 5, 12);
    let dense = DenseSnmf::of(&problem);
    let z0 = problem.initial_point(2);
    let (tx, ty) = fixed_scales(&dense, &z0, 2.0);
    let mut cfg = preset(Preset::StiBPalm, &SolverConfig::default());
    cfg.estimator = EstimatorConfig::full();
    cfg.schedules = Schedules::zero();
    let ours = library_run(&problem, cfg, &z0, tx, ty);
    let theirs = palm(&dense, &z0, tx, ty, ITERS);
    assert!(worst(&ours, &theirs) <= 1e-12, "{}", worst(&ours, &theirs));
}

#[test]
fn ipalm_preset_matches_dense_ipalm() {
    let problem = snmf_instance(20, 15, 5, 13);
    let dense = DenseSnmf::of(&problem);
    let z0 = problem.initial_point(3);
    let (tx, ty) = fixed_scales(&dense, &z0, 3.0);
    let ours = library_run(&problem, preset(Preset::IPalm, &SolverConfig::default()), &z0, tx, ty);
    let theirs = ipalm(&dense, &z0, tx, ty, ITERS);
    assert!(worst(&ours, &theirs) <= 1e-12, "{}", worst(&ours, &theirs));
}

#[test]
fn tipalm_preset_matches_dense_tipalm() {
    let problem = snmf_instance(20, 15, 5, 14);
    let dense = DenseSnmf::of(&problem);
    let z0 = problem.initial_point(4);
    let (tx, ty) = fixed_scales(&dense, &z0, 3.0);
    let ours = library_run(&problem, preset(Preset::TiPalm, &SolverConfig::default()), &z0, tx, ty);
    let theirs = tipalm(&dense, &z0, tx, ty, ITERS);
    assert!(worst(&ours, &theirs) <= 1e-12, "{}", worst(&ours, &theirs));
}
