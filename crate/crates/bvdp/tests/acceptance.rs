//! Acceptance suite: runs the reference scenario and prints one pass/fail
//! line per criterion. Exits non-zero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use bvdp::config::RunConfig;
use bvdp::runner::{run_single, run_sweep, Problem, RunOutcome};
use bvdp_core::bv_diagnostics::{first_violation, iteration_bound, mediesci_partition};
use bvdp_core::energetics::{Model, State};
use bvdp_core::material_laws::MaterialParams;
use bvdp_core::reparam::{arclength, max_abs, normalization_residual, rescale, ReparamSettings};
use bvdp_core::tensor_mesh::{deviatoric, SymTensor2};
use bvdp_core::viscous_solver::{simulate, update_p, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn reference_config() -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
    RunConfig::load(&path).expect("reference config")
}

fn solve(problem: &Problem, cfg: &RunConfig, tau: f64) -> (Model, Trajectory) {
    let model = problem.model(cfg, cfg.material.eps).unwrap();
    let traj = simulate(&model, model.initial_state(), 0.0, cfg.time.t_end, tau, &cfg.solver).unwrap();
    assert!(traj.is_complete(), "tau = {tau}: {:?}", traj.failure);
    (model, traj)
}

/// Reference trajectories at other time steps.
struct TauRuns {
    tau_4e3: (Model, Trajectory),
    tau_2e3: (Model, Trajectory),
    tau_5e4: (Model, Trajectory),
}

fn viscous_edb(reference: &RunOutcome, elapsed: f64, runs: &TauRuns) -> Verdict {
    let r1 = reference.trajectory.max_edb_residual();
    let coarse = [runs.tau_4e3.1.max_edb_residual(), runs.tau_2e3.1.max_edb_residual()];
    let ratios = [coarse[0] / coarse[1], coarse[1] / r1];
    let pass = r1 <= 2e-2 && ratios.iter().all(|r| (1.6..=2.6).contains(r)) && elapsed <= 120.0;
    Verdict {
        id: 1,
        name: "viscous energy-dissipation balance",
        pass,
        detail: format!(
            "residual {r1:.3e} at tau 1e-3; residuals {:.3e}, {:.3e} at tau 4e-3, 2e-3; halving ratios {:.3}, {:.3}; {elapsed:.1} s single-threaded",
            coarse[0], coarse[1], ratios[0], ratios[1]
        ),
    }
}

fn unidirectionality(reference: &RunOutcome) -> Verdict {
    let traj = &reference.trajectory;
    let mut increases = 0usize;
    for w in traj.states.windows(2) {
        increases += w[1].z.iter().zip(&w[0].z).filter(|(a, b)| a > b).count();
    }
    let m0 = reference.manifest.summary.m0_observed;
    Verdict {
        id: 2,
        name: "unidirectionality and positivity",
        pass: increases == 0 && m0 > 0.0,
        detail: format!("{increases} nodal increases over {} steps; m0_observed = {m0:.6} (logged in ledger.json)", traj.steps.len()),
    }
}

// Proximal gradient on π ↦ ½V ℂ(E − p_prev − π):(…) + (ε/2τ)|π|² + σ_y|π| over deviatoric π.
fn return_map_oracle(mat: &MaterialParams, zbar: f64, total: SymTensor2, p_prev: SymTensor2, tau: f64) -> SymTensor2 {
    let eta = mat.eps / tau;
    let sy = mat.yield_radius(zbar);
    let step = 0.5 / (2.0 * mat.mu * mat.v(zbar) + eta);
    let mut pi = SymTensor2::ZERO;
    for _ in 0..400 {
        let grad = -(mat.elastic_apply(zbar, total - p_prev - pi).deviatoric()) + eta * pi;
        let y = pi - step * grad;
        let n = y.norm();
        pi = if n <= step * sy { SymTensor2::ZERO } else { ((n - step * sy) / n) * y };
    }
    p_prev + pi
}

fn return_map(reference: &RunOutcome) -> Verdict {
    let (model, traj) = (&reference.model, &reference.trajectory);
    let mat = &model.material;
    let mut worst = 0.0f64;
    for (k, step) in traj.steps.iter().enumerate() {
        let (q0, q1) = (&traj.states[k], &traj.states[k + 1]);
        let sig = model.stresses(&q1.z, &model.strains(step.t, q1));
        for e in 0..model.mesh.n_elements() {
            let sd = sig[e].deviatoric();
            let sy = mat.yield_radius(model.mesh.element_mean(&q1.z, e));
            let dp = q1.p[e] - q0.p[e];
            let r = if dp.norm() > 0.0 {
                (sd - (sy / dp.norm()) * dp - (mat.eps / step.tau) * dp).norm()
            } else {
                (sd.norm() - sy).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut oracle_gap, mut plastic) = (0.0f64, 0usize);
    for _ in 0..100 {
        let k = rng.gen_range(0..traj.steps.len());
        let e = rng.gen_range(0..model.mesh.n_elements());
        let (q0, q1, step) = (&traj.states[k], &traj.states[k + 1], &traj.steps[k]);
        let total = model.strains(step.t, q1)[e] + q1.p[e];
        let p = return_map_oracle(mat, model.mesh.element_mean(&q1.z, e), total, q0.p[e], step.tau);
        oracle_gap = oracle_gap.max((p - q1.p[e]).norm());
        plastic += (q1.p[e] != q0.p[e]) as usize;
    }
    Verdict {
        id: 3,
        name: "return-map inclusion",
        pass: worst <= 1e-10 && oracle_gap <= 1e-8,
        detail: format!(
            "max inclusion residual {worst:.3e} over all elements and steps; proximal-gradient gap {oracle_gap:.3e} on 100 random elements ({plastic} plastic)"
        ),
    }
}

fn random_state(model: &Model, rng: &mut ChaCha8Rng) -> State {
    let mut q = model.initial_state();
    for (i, u) in q.u.iter_mut().enumerate() {
        if model.layout.u_free[i].is_some() {
            *u = rng.gen_range(-0.6..0.6);
        }
    }
    q.z.iter_mut().for_each(|z| *z = rng.gen_range(0.3..1.0));
    for p in q.p.iter_mut() {
        *p = deviatoric(SymTensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    q
}

// Projected ascent for sup { ⟨−D_zE, η⟩ − R(η) : ‖η‖ ≤ 1 } in the lumped inner product.
fn d_z_ascent(model: &Model, g: &[f64]) -> f64 {
    let (mass, kappa) = (&model.l2.lumped, model.material.kappa);
    let mut eta = vec![0.0; g.len()];
    for _ in 0..2000 {
        let mut y: Vec<f64> =
            eta.iter().zip(g).zip(mass).map(|((e, g), m)| (e + 0.5 * (-g / m + kappa)).min(0.0)).collect();
        let n = y.iter().zip(mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
        if n > 1.0 {
            y.iter_mut().for_each(|v| *v /= n);
        }
        eta = y;
    }
    eta.iter().zip(g).zip(mass).map(|((e, g), m)| -g * e - kappa * m * e.abs()).sum()
}

// Proximal ascent for sup { ⟨σ_D, η⟩ − H(z, η) : ‖η‖ ≤ 1 }.
fn d_p_ascent(model: &Model, z: &[f64], sig: &[SymTensor2]) -> f64 {
    let mesh = &model.mesh;
    let radius: Vec<f64> = (0..mesh.n_elements()).map(|k| model.material.yield_radius(mesh.element_mean(z, k))).collect();
    let sd: Vec<SymTensor2> = sig.iter().map(|s| s.deviatoric()).collect();
    let mut eta = vec![SymTensor2::ZERO; sig.len()];
    for _ in 0..2000 {
        let mut y: Vec<SymTensor2> = eta
            .iter()
            .zip(&sd)
            .zip(&radius)
            .map(|((e, s), r)| {
                let v = *e + 0.5 * *s;
                let n = v.norm();
                if n <= 0.5 * r {
                    SymTensor2::ZERO
                } else {
                    ((n - 0.5 * r) / n) * v
                }
            })
            .collect();
        let n = model.l2.tensor_norm_sq(&y).sqrt();
        if n > 1.0 {
            y.iter_mut().for_each(|v| *v = (1.0 / n) * *v);
        }
        eta = y;
    }
    (0..eta.len()).map(|k| mesh.area(k) * (sd[k].ddot(&eta[k]) - radius[k] * eta[k].norm())).sum()
}

fn slope_duality(reference: &RunOutcome) -> Verdict {
    let model = &reference.model;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_z, mut worst_p, mut active) = (0.0f64, 0.0f64, (0usize, 0usize));
    let rel = |a: f64, b: f64| if a == 0.0 && b.abs() <= 1e-12 { 0.0 } else { (a - b).abs() / a.max(1e-300) };
    for _ in 0..100 {
        let q = random_state(model, &mut rng);
        let t = rng.gen_range(0.0..1.0);
        let g = model.grad_z(t, &q);
        let sig = model.stresses(&q.z, &model.strains(t, &q));
        let (dz, dp) = (model.slope_distance_z_from(&g), model.slope_distance_p_from(&q.z, &sig));
        worst_z = worst_z.max(rel(dz, d_z_ascent(model, &g)));
        worst_p = worst_p.max(rel(dp, d_p_ascent(model, &q.z, &sig)));
        active.0 += (dz > 0.0) as usize;
        active.1 += (dp > 0.0) as usize;
    }
    Verdict {
        id: 4,
        name: "slope-duality equivalence",
        pass: worst_z <= 1e-4 && worst_p <= 1e-4,
        detail: format!(
            "max relative gap d_z {worst_z:.3e}, d_p {worst_p:.3e} on 100 random states ({} with d_z > 0, {} with d_p > 0)",
            active.0, active.1
        ),
    }
}

fn normalization(reference: &RunOutcome, runs: &TauRuns, cfg: &RunConfig) -> Verdict {
    let max_res = |model: &Model, traj: &Trajectory, n: usize| {
        let rpt = rescale(model, traj, &arclength(traj), &ReparamSettings { n_samples: n, ..cfg.reparam.clone() }).unwrap();
        max_abs(&normalization_residual(&rpt))
    };
    let at_reference = max_abs(&normalization_residual(reference.reparam.as_ref().unwrap()));
    let (m, t) = (&reference.model, &reference.trajectory);
    // τ halved together with the sample spacing
    let joint = [
        max_res(&runs.tau_4e3.0, &runs.tau_4e3.1, 128),
        max_res(&runs.tau_2e3.0, &runs.tau_2e3.1, 256),
        at_reference,
        max_res(&runs.tau_5e4.0, &runs.tau_5e4.1, 1024),
    ];
    let samples_only: Vec<f64> = [1024, 2048, 4096].iter().map(|&n| max_res(m, t, n)).collect();
    let pass = at_reference <= 1e-2 && joint.windows(2).all(|w| w[1] < w[0]);
    Verdict {
        id: 5,
        name: "normalization identity",
        pass,
        detail: format!(
            "max residual {at_reference:.3e} at tau 1e-3 with 512 samples; (tau, n) = (4e-3, 128) .. (5e-4, 1024): {}; \
             samples only at tau 1e-3, n = 1024/2048/4096: {} (limited by tau)",
            fmt_list(&joint),
            fmt_list(&samples_only)
        ),
    }
}

fn reparameterized_edb(reference: &RunOutcome) -> Verdict {
    let s = &reference.manifest.summary;
    let res = s.max_reparam_edb_residual.unwrap();
    let gap = s.change_of_variables_gap.unwrap();
    Verdict {
        id: 6,
        name: "reparameterized energy-dissipation balance",
        pass: res <= 2e-2 && gap <= 5e-3,
        detail: format!("max residual {res:.3e}; integral of M_eps vs time-discrete dissipation differs by {gap:.3e} (relative)"),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn mediesci(reference: &RunOutcome) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut random_ok = 0;
    let mut bound_ok = true;
    for k in 0..50 {
        let n = rng.gen_range(2..600);
        let psi: Vec<f64> = if k % 2 == 0 {
            let knots = rng.gen_range(2..15);
            let vals: Vec<f64> = (0..knots).map(|_| rng.gen_range(0.01..5.0)).collect();
            (0..n)
                .map(|i| {
                    let x = i as f64 / (n - 1) as f64 * (knots - 1) as f64;
                    let j = (x.floor() as usize).min(knots - 2);
                    let th = x - j as f64;
                    (1.0 - th) * vals[j] + th * vals[j + 1]
                })
                .collect()
        } else {
            (0..n).map(|_| rng.gen_range(1e-3..3.0)).collect()
        };
        let eta = rng.gen_range(1e-3..0.5);
        let part = mediesci_partition(&psi, eta).unwrap();
        random_ok += first_violation(&psi, &part.nodes, eta).is_none() as usize;
        bound_ok &= part.iterations as f64 <= iteration_bound(&psi, eta);
    }
    let report = reference.diagnostics.as_ref().unwrap();
    let rpt = reference.reparam.as_ref().unwrap();
    let mut run_ok = 0;
    for c in &report.mediesci {
        let psi: Vec<f64> = (c.first..=c.last).map(|j| rpt.dstar(j)).collect();
        let nodes: Vec<usize> = c.nodes.iter().map(|n| n - c.first).collect();
        let holds = first_violation(&psi, &nodes, c.eta).is_none() && nodes.first() == Some(&0) && nodes.last() == Some(&(psi.len() - 1));
        run_ok += holds as usize;
        bound_ok &= c.iterations as f64 <= iteration_bound(&psi, c.eta);
    }
    let comps = report.mediesci.len();
    let sizes: Vec<String> = report.mediesci.iter().map(|c| format!("{}..={} ({} nodes, {} iterations, bound {:.0})", c.first, c.last, c.nodes.len(), c.iterations, c.iteration_bound)).collect();
    Verdict {
        id: 7,
        name: "mediesci partition",
        pass: random_ok == 50 && comps > 0 && run_ok == comps && bound_ok,
        detail: format!("{random_ok}/50 random profiles; {run_ok}/{comps} unstable components of the reference run: {}", sizes.join("; ")),
    }
}

fn cornerstone(reference: &RunOutcome) -> Verdict {
    let report = reference.diagnostics.as_ref().unwrap();
    let c = &report.cornerstone_summary;
    let pass = report.partition.len() == 64 && c.min_slack >= -1e-8 * report.energy_scale && c.min_arv >= -1e-8;
    Verdict {
        id: 8,
        name: "cornerstone inequality",
        pass,
        detail: format!(
            "{} admissible of {} pairs on a {}-node partition; min slack {:.3e} (tolerance {:.3e}); min ARV {:.3e}",
            c.applicable,
            c.pairs,
            report.partition.len(),
            c.min_slack,
            1e-8 * report.energy_scale,
            c.min_arv
        ),
    }
}

fn sweep(cfg: &RunConfig, out: &Path) -> Verdict {
    let mut cfg = cfg.clone();
    cfg.output.dir = out.to_path_buf();
    cfg.sweep.workers = cfg.sweep.workers.max(cfg.sweep.eps.len());
    let outcome = run_sweep(&cfg).unwrap();
    let r = outcome.report.as_ref().expect("all members completed");
    let strict = (0..r.s.len()).filter(|&i| r.differences.windows(2).all(|w| w[1][i] < w[0][i])).count();
    let pass = r.eps == [4e-2, 2e-2, 1e-2, 5e-3] && r.s.len() == 16 && r.decreasing >= 12 && r.arclength_ratio <= 2.0;
    Verdict {
        id: 9,
        name: "eps-sweep Cauchy trend",
        pass,
        detail: format!(
            "differences decrease at {}/16 shared points ({strict} strictly, the rest identical to round-off); S_eps = {}; max/min {:.4}",
            r.decreasing,
            fmt_list(&r.arclength),
            r.arclength_ratio
        ),
    }
}

fn single_element() -> Verdict {
    // ε p' = (|σ_D| − σ_y)₊ n with σ_D = 2μV(z)(E_D − p) and E_D(t) = a t n̂.
    let mat = MaterialParams::default();
    let zbar = 0.8;
    let k = 2.0 * mat.mu * mat.v(zbar);
    let sy = mat.yield_radius(zbar);
    let t_end = 1.0;
    let t_y = 0.25;
    let a = sy / (k * t_y);
    let n_hat = (1.0 / 2f64.sqrt()) * SymTensor2::new(1.0, -1.0, 0.0);
    // a volumetric part that must not affect p
    let strain = |t: f64| (a * t) * n_hat + SymTensor2::new(0.3 * t, 0.3 * t, 0.0);
    let exact = |t: f64| {
        if t <= t_y {
            0.0
        } else {
            a * (t - t_y) - a * mat.eps / k * (1.0 - (-k * (t - t_y) / mat.eps).exp())
        }
    };
    let steps = 4_000_000usize;
    let tau = t_end / steps as f64;
    let mut p = SymTensor2::ZERO;
    let mut worst = 0.0f64;
    for i in 1..=steps {
        let t = i as f64 * tau;
        p = update_p(&mat, zbar, strain(t), p, tau).p;
        worst = worst.max((p.norm() - exact(t)).abs());
    }
    let direction = (p - p.norm() * n_hat).norm();
    Verdict {
        id: 10,
        name: "single-element viscous radial return",
        pass: worst <= 1e-6 && direction <= 1e-12,
        detail: format!("max ||p| - |p_exact|| = {worst:.3e} with tau = {tau:.1e} (eps = {}); |p(T)| = {:.6}; off-direction {direction:.1e}", mat.eps, p.norm()),
    }
}

fn main() {
    let cfg = reference_config();
    let scratch = tempfile::tempdir().unwrap();
    let mut verdicts = Vec::new();
    let mut report = |v: Verdict| {
        println!("criterion {:>2} {} {}: {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
        verdicts.push(v.pass);
    };

    let mut single = cfg.clone();
    single.sweep.workers = 1;
    single.output.dir = scratch.path().join("reference");
    let started = Instant::now();
    let reference = run_single(&single).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(reference.reparam.is_some(), "reference run failed: {:?}", reference.manifest.failure);
    let problem = Problem { mesh: reference.model.mesh.clone(), a_m: reference.model.a_m.clone() };

    let runs = TauRuns {
        tau_4e3: solve(&problem, &cfg, 4e-3),
        tau_2e3: solve(&problem, &cfg, 2e-3),
        tau_5e4: solve(&problem, &cfg, 5e-4),
    };

    report(viscous_edb(&reference, elapsed, &runs));
    report(unidirectionality(&reference));
    report(return_map(&reference));
    report(slope_duality(&reference));
    report(normalization(&reference, &runs, &cfg));
    report(reparameterized_edb(&reference));
    report(mediesci(&reference));
    report(cornerstone(&reference));
    report(sweep(&cfg, &scratch.path().join("sweep")));
    report(single_element());

    let failed = verdicts.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
