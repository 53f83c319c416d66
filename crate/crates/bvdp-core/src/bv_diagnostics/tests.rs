use super::*;
use crate::energetics::test_support::small_model;
use crate::energetics::Loads;
use crate::reparam::{arclength, rescale, ReparamSettings};
use crate::viscous_solver::{simulate, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use alloc::vec;
use std::sync::OnceLock;

struct Run {
    model: Model,
    rpt: ReparamTrajectory,
}

fn run(loads: Loads, t_end: f64, n_samples: usize) -> Run {
    let model = small_model(loads);
    let traj = simulate(&model, model.initial_state(), 0.0, t_end, 1e-2, &SolverSettings::default()).unwrap();
    assert!(traj.is_complete());
    let arc = arclength(&traj);
    let rpt = rescale(&model, &traj, &arc, &ReparamSettings { n_samples, ..Default::default() }).unwrap();
    Run { model, rpt }
}

fn loaded() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run(Loads::horizontal_stretch(1.0), 1.0, 128))
}

fn frozen() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| run(Loads::default(), 0.5, 33))
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

#[test]
fn contact_potential_branches() {
    let s = DiagnosticSettings::default();
    let stable = Slopes { r_u: 0.0, d_z: 0.0, d_p: 0.0 };
    let m = m0_from_parts(0.0, 0.0, 0.0, stable, 1.0, 1e-9, &s);
    assert_eq!(m.value, 0.0);
    assert!(!m.jump);

    let unstable = Slopes { r_u: 0.0, d_z: 0.3, d_p: 0.4 };
    assert_eq!(m0_from_parts(0.1, 0.2, 1.0, unstable, 0.5, 1e-9, &s).value, f64::INFINITY);

    let jump = m0_from_parts(0.1, 0.2, 2.0, unstable, 0.0, 1e-9, &s);
    assert!(jump.jump);
    assert!((jump.value - (0.1 + 0.2 + 2.0 * 0.5)).abs() < 1e-15);

    let off_equilibrium = Slopes { r_u: 1.0, ..stable };
    assert_eq!(m0_from_parts(0.0, 0.0, 0.0, off_equilibrium, 1.0, 1e-9, &s).value, f64::INFINITY);
}

#[test]
fn jump_branch_is_the_minimal_viscous_splitting() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let d: f64 = rng.gen_range(1e-3..10.0);
        let ds: f64 = rng.gen_range(1e-3..10.0);
        // λ plays the role of ε/t'
        let oracle = golden_min(|x| 0.5 * x.exp() * d * d + 0.5 * ds * ds / x.exp(), -30.0, 30.0);
        let m = m0_from_parts(0.0, 0.0, d, Slopes { r_u: 0.0, d_z: ds, d_p: 0.0 }, 0.0, 1e-9, &DiagnosticSettings::default());
        assert!((m.value - oracle).abs() <= 1e-12 * oracle, "{} {}", m.value, oracle);
    }
}

#[test]
fn eval_m0_on_a_stable_state() {
    let r = frozen();
    let q = &r.rpt.states[3];
    let zero_z = vec![0.0; q.z.len()];
    let zero_p = vec![SymTensor2::default(); q.p.len()];
    let m = eval_m0(&r.model, r.rpt.t[3], q, 1.0, &zero_z, &zero_p, 1e-9, &DiagnosticSettings::default()).unwrap();
    assert_eq!(m.value, 0.0);
}

#[test]
fn profile_classification() {
    let flat = classify_profile(&[0.0; 10], &[1.0; 10], 1e-9, 1e-6);
    assert!(flat.components.is_empty());
    assert!(flat.regime.iter().all(|r| *r == Regime::Stable));

    let dstar = [0.0, 0.0, 0.2, 0.5, 0.9, 0.4, 0.0, 0.0];
    let tprime = [1.0, 1.0, 0.3, 0.0, 0.0, 0.0, 0.2, 1.0];
    let tag = classify_profile(&dstar, &tprime, 1e-9, 1e-6);
    assert_eq!(tag.components.len(), 1);
    let c = &tag.components[0];
    assert_eq!((c.first, c.last), (2, 5));
    assert!(c.frozen);
    assert_eq!(tag.endpoint_condition(0, 7), EndpointCondition::BothStable);
    assert_eq!(tag.endpoint_condition(3, 5), EndpointCondition::InsideUnstable);
    assert_eq!(tag.endpoint_condition(1, 3), EndpointCondition::Mixed);

    let moving = classify_profile(&dstar, &[1.0; 8], 1e-9, 1e-6);
    assert!(!moving.components[0].frozen);
}

#[test]
fn coincident_endpoints_give_zero_variations() {
    let r = loaded();
    let c = Constants::for_run(&r.model.material, &r.rpt).unwrap();
    let j = r.rpt.len() / 2;
    let a = Snapshot::from_sample(&r.model, &r.rpt, j);
    let rep = variations(&r.model, &a, &a, &c).unwrap();
    for v in [rep.hv, rep.rv, rep.arv, rep.we, rep.dz_l1, rep.dp_l2] {
        assert_eq!(v, 0.0);
    }
    assert_eq!(cornerstone_check(&rep, EndpointCondition::BothStable), Cornerstone::Slack(0.0));
    assert_eq!(cornerstone_check(&rep, EndpointCondition::Mixed), Cornerstone::NotApplicable);
}

#[test]
fn augmented_variation_is_nonnegative_on_random_pairs() {
    let r = loaded();
    let c = Constants::for_run(&r.model.material, &r.rpt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let i = rng.gen_range(0..r.rpt.len() - 1);
        let j = rng.gen_range(i + 1..r.rpt.len());
        let a = Snapshot::from_sample(&r.model, &r.rpt, i);
        let b = Snapshot::from_sample(&r.model, &r.rpt, j);
        let rep = variations(&r.model, &a, &b, &c).unwrap();
        assert!(rep.arv >= -1e-8, "ARV {} on [{i}, {j}]", rep.arv);
    }
}

#[test]
fn two_point_estimate_holds_on_admissible_pairs() {
    let r = loaded();
    let s = DiagnosticSettings { n_partition: 24, ..Default::default() };
    let report = diagnose(&r.model, &r.rpt, &s).unwrap();
    let sum = &report.cornerstone_summary;
    assert!(sum.applicable > 0);
    assert!(sum.passed, "{sum:?}");
}

#[test]
fn corrupted_stress_is_detected() {
    let r = loaded();
    let c = Constants::for_run(&r.model.material, &r.rpt).unwrap();
    let a = Snapshot::from_sample(&r.model, &r.rpt, 10);
    let mut b = Snapshot::from_sample(&r.model, &r.rpt, 60);
    let clean = variations(&r.model, &a, &b, &c).unwrap().slack();
    for k in 0..b.sigma.len() {
        b.sigma[k] += 50.0 * (b.ew[k] - a.ew[k]);
    }
    let bad = variations(&r.model, &a, &b, &c).unwrap().slack();
    assert!(clean >= 0.0 && bad < 0.0, "{clean} {bad}");
}

#[test]
fn work_sums_approach_the_work_integral() {
    let r = loaded();
    let exact = work_integral(&r.rpt);
    let coarse = work_riemann_sum(&r.model, &r.rpt, &uniform_partition(r.rpt.len(), 5));
    let fine = work_riemann_sum(&r.model, &r.rpt, &uniform_partition(r.rpt.len(), r.rpt.len()));
    assert!((fine - exact).abs() <= 1e-2 * exact.abs(), "{fine} {exact}");
    assert!((fine - exact).abs() <= (coarse - exact).abs());
}

#[test]
fn partitions() {
    assert_eq!(uniform_partition(9, 3), vec![0, 4, 8]);
    assert_eq!(uniform_partition(5, 50), vec![0, 1, 2, 3, 4]);
    let tag = classify_profile(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0], &[0.0; 9], 1e-9, 1e-6);
    assert_eq!(refine_partition(&tag, &[0, 4, 8]), vec![0, 2, 4, 5, 8]);
    assert_eq!(refine_partition(&tag, &[0, 8]), vec![0, 2, 5, 8]);
}

#[test]
fn static_run_ledger_is_zero() {
    let r = frozen();
    let s = DiagnosticSettings::default();
    let report = diagnose(&r.model, &r.rpt, &s).unwrap();
    let l = &report.lower_inequality;
    assert_eq!(l.counts, [l.entries.len(), 0, 0]);
    for v in [l.work, l.h_terms, l.r_total, l.contact_integral, l.remainder, l.stable_defect, l.coupling] {
        assert_eq!(v, 0.0);
    }
    assert_eq!(l.slack, 0.0);
    assert!(report.regimes.components.is_empty());
    assert!(report.passed());
}

#[test]
fn loaded_run_ledger() {
    let r = loaded();
    let report = diagnose(&r.model, &r.rpt, &DiagnosticSettings::default()).unwrap();
    let l = &report.lower_inequality;
    std::println!("{:?}", report.regimes.components);
    std::println!(
        "counts {:?} slack {:e} chain {:e} rem {:e} bound {:e} eta_term {:e} beta {:e} contact {:e} defect {:e} coupling {:e}",
        l.counts, l.slack, l.chain_slack, l.remainder, l.constants.delta * l.constants.k_m, l.eta_term, l.beta_term,
        l.contact_integral, l.stable_defect, l.coupling
    );
    std::println!("{:?}", report.cornerstone_summary);
    std::println!("work {:?} exact {}", report.work_sums, report.work_integral);
    assert!(l.remainder_bounded);
    assert!(report.mediesci.iter().all(|m| m.holds));
}
