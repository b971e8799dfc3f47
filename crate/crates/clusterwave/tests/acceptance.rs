//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use clusterwave::config::{parse_config, ClusterConfig, Point, Regime, ShapeKind};
use clusterwave::experiments::{centroid, cluster_diameter, evaluation_points, fit_slope, oracle_refinement_change, run_sweep, Abscissa, SweepOptions, SweepOutput};
use clusterwave::foldylax::{assemble, max_norm, row_sum_norm, scattered_field, solve_born, solve_direct, FoldyLaxSystem};
use clusterwave::config::derive_contrasts;
use clusterwave::spectral::{
    assemble_newtonian, eigensystem, eigensystem_at, minnaert_from_theta, minnaert_resonance, plasmonic_resonances, realize_incident, scattering_coefficient, surface_theta,
    surface_theta_checked, ClosedSurface, NewtonianDiscretization, SpectralData,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cube_shape() -> serde_json::Value {
    json!({"kind": "cube3d", "diameter": 1.0, "offset": [0.2, 0.0, 0.0]})
}

fn square_shape() -> serde_json::Value {
    json!({"kind": "square2d", "diameter": 1.0, "offset": [0.15, 0.0]})
}

fn config(v: serde_json::Value) -> ClusterConfig {
    parse_config(&v.to_string()).expect("valid acceptance config")
}

fn triangle_3d() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.5, 0.75f64.sqrt(), 0.0]]
}

fn triangle_2d() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![0.75f64.sqrt(), 0.5]]
}

fn criterion_1() -> Outcome {
    let sphere = ClosedSurface::Sphere { radius: 1.0 };
    let est = match surface_theta_checked(&sphere, 24) {
        Ok(e) => e,
        Err(e) => return outcome(false, e.to_string()),
    };
    // Independent reduction: for |x| = 1 the inner integral depends only on x.y.
    let (nodes, weights) = clusterwave::quadrature::gauss_legendre(64);
    let reduced: f64 = nodes.iter().zip(&weights).map(|(c, w)| w * (2.0 - 2.0 * c).sqrt()).sum::<f64>() / 4.0;
    let delta = 0.03;
    let scaled = surface_theta(&sphere.scaled(delta), 24);
    let scale_gap = (scaled - delta * delta * est.theta).abs() / scaled;
    let pass = (est.theta - 2.0 / 3.0).abs() < 1e-3 && (reduced - 2.0 / 3.0).abs() < 1e-3 && scale_gap < 1e-12;
    outcome(pass, format!("Theta_B = {:.6} (reduction {:.6}), scaling gap {:.1e}", est.theta, reduced, scale_gap))
}

fn max_rel_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs()).fold(0.0, f64::max)
}

fn criterion_2() -> Outcome {
    let delta = 0.04;
    let cube = clusterwave::config::ReferenceShape::new(ShapeKind::Cube3d, 1.0).with_offset(&[0.2, 0.0, 0.0]);
    let disc = assemble_newtonian(&cube, 8).unwrap();
    let reference = eigensystem(&disc, 10).unwrap();
    let direct = NewtonianDiscretization::on_grid(cube.clone(), 8, disc.grid.scaled(delta, &[0.3, -0.1, 0.2]));
    let physical = eigensystem(&direct, 10).unwrap();
    let expected: Vec<f64> = reference.eigenvalues.iter().map(|l| delta * delta * l).collect();
    let gap3 = max_rel_gap(&physical.eigenvalues, &expected);

    let mut gap2: f64 = 0.0;
    let mut eig2: f64 = 0.0;
    for shape in [
        clusterwave::config::ReferenceShape::new(ShapeKind::Square2d, 1.0).with_offset(&[0.15, 0.0]),
        clusterwave::config::ReferenceShape::new(ShapeKind::Disc2d, 1.0),
    ] {
        let disc = assemble_newtonian(&shape, 16).unwrap();
        let identity = disc.scaled(delta);
        let assembled = NewtonianDiscretization::on_grid(shape.clone(), 16, disc.grid.scaled(delta, &[0.0; 3]));
        let n = disc.n_cells();
        let scale = (0..n).map(|i| assembled.matrix[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                gap2 = gap2.max((identity.matrix[(i, j)] - assembled.matrix[(i, j)]).abs() / scale);
            }
        }
        let from_identity = eigensystem_at(&disc, delta, 5).unwrap();
        let direct = eigensystem(&assembled, 5).unwrap();
        let phys: Vec<f64> = (0..5).map(|n| from_identity.physical_eigenvalue(n)).collect();
        eig2 = eig2.max(max_rel_gap(&phys, &direct.eigenvalues));
    }
    let pass = gap3 < 1e-3 && gap2 < 1e-8 && eig2 < 1e-8;
    outcome(pass, format!("3D eigenvalue gap {gap3:.1e}, 2D operator identity gap {gap2:.1e} (eigenvalues {eig2:.1e})"))
}

fn third_regime_single(delta: f64, h: f64) -> ClusterConfig {
    config(json!({
        "dim": 3, "shape": cube_shape(), "delta": delta, "centers": [[0.0, 0.0, 0.0]],
        "regime": {"kind": "third", "c_b": 1.0}, "incident": {"theta": [0.0, 0.0, 1.0], "h": h}
    }))
}

fn criterion_3() -> Outcome {
    let deltas = [0.08, 0.06, 0.045, 0.034];
    let base = third_regime_single(0.08, 0.5);
    let disc = assemble_newtonian(&base.shape, 8).unwrap();
    let reference = eigensystem(&disc, disc.n_cells()).unwrap();
    let mut c_pts = Vec::new();
    let mut w_pts = Vec::new();
    for &delta in &deltas {
        let cfg = third_regime_single(delta, 0.5);
        let spec = reference.at_delta(delta);
        let contrasts = derive_contrasts(&cfg).unwrap();
        let inc = realize_incident(&cfg, &spec, &contrasts).unwrap();
        let s = scattering_coefficient(&spec, contrasts.tau[0], contrasts.a0, inc.k).unwrap();
        c_pts.push((delta, s.coefficient.abs()));
        w_pts.push((delta, s.w_norm));
    }
    let c = fit_slope(&c_pts, Abscissa::LogDelta).unwrap();
    let w = fit_slope(&w_pts, Abscissa::LogDelta).unwrap();
    let pass = (c.slope - 0.5).abs() <= 0.1 && (w.slope + 1.0).abs() <= 0.15;
    outcome(pass, format!("|C| slope {:.3} (target 0.5 +- 0.1), |w| slope {:.3} (target -1.0 +- 0.15)", c.slope, w.slope))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let mut at_floor = 0;
    for _ in 0..20 {
        let m = rng.gen_range(2..=8);
        let target = rng.gen_range(0.1..=0.9);
        let raw = Mat::from_fn(m, m, |i, j| {
            if i == j {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        });
        let scale = target / row_sum_norm(&raw);
        let bk = Mat::from_fn(m, m, |i, j| raw[(i, j)] * scale);
        let u: Vec<Complex64> = (0..m).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let sys = FoldyLaxSystem::from_parts(3, 1.0, vec![[0.0; 3]; m], vec![Complex64::new(1.0, 0.0); m], bk, u).unwrap();
        let direct = solve_direct(&sys).unwrap();
        let born = solve_born(&sys, 20);
        for n in 0..=20 {
            let gap = max_norm(&born.partial_sums[n].iter().zip(&direct.q).map(|(a, b)| a - b).collect::<Vec<_>>());
            // Unit roundoff of the two computed vectors sets a floor below which
            // the geometric bound cannot be resolved in double precision.
            let floor = 16.0 * f64::EPSILON * (m as f64) * max_norm(&direct.q);
            let bound = born.bound(n).unwrap();
            worst = worst.max(gap / (bound + floor));
            if bound < floor {
                at_floor += 1;
            }
            if gap > bound + floor {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} bound violations in 420 checks, worst gap/bound {worst:.3} ({at_floor} checks at the rounding floor)"))
}

fn sweep_config_3d(h: f64, t: f64, m: usize, deltas: &[f64], radius: f64, oracle: bool, orders: &[usize]) -> ClusterConfig {
    config(json!({
        "dim": 3, "shape": cube_shape(), "delta": deltas[0], "centers": [[0.0, 0.0, 0.0]],
        "regime": {"kind": "third", "c_b": 1.0}, "incident": {"theta": [0.0, 0.0, 1.0], "h": h},
        "resolution": 8,
        "sweep": {"deltas": deltas, "h": h, "t": t, "d0": 0.5, "pattern": triangle_3d()[..m].to_vec(),
                  "orders": orders, "oracle": oracle, "eval_radius": radius}
    }))
}

/// Five cluster diameters at the largest delta, never below one particle-free unit.
fn eval_radius_3d(h: f64, t: f64, m: usize, delta: f64) -> f64 {
    let probe = sweep_config_3d(h, t, m, &[delta, delta / 2.0, delta / 4.0, delta / 8.0], 1.0, false, &[1]);
    let sw = probe.sweep.clone().unwrap();
    let pattern: Vec<Point> = sw.pattern.iter().map(|p| [p[0], p[1], p[2]]).collect();
    let cfg = probe.for_sweep_point(&pattern, delta, clusterwave::config::Spacing { t, d0: 0.5 }, h).unwrap();
    5.0 * cluster_diameter(&cfg).max(0.2)
}

fn fit_line(out: &SweepOutput, quantity: &str, order: Option<usize>) -> (f64, f64) {
    let f = out.find_fit(quantity, order).expect("fit present");
    (f.fit.map_or(f64::NAN, |x| x.slope), f.target.unwrap_or(f64::NAN))
}

fn criterion_5() -> Outcome {
    let deltas = [0.1, 0.065, 0.042, 0.027];
    let mut pass = true;
    let mut parts = Vec::new();
    for (h, t) in [(0.5, 0.0), (0.6, 0.2)] {
        // Self-convergence of the oracle at the largest cluster before any fit.
        let radius = eval_radius_3d(h, t, 3, deltas[0]);
        let probe = sweep_config_3d(h, t, 3, &deltas, radius, true, &[1]);
        let sw = probe.sweep.clone().unwrap();
        let pattern: Vec<Point> = sw.pattern.iter().map(|p| [p[0], p[1], p[2]]).collect();
        let cfg = probe.for_sweep_point(&pattern, deltas[3], clusterwave::config::Spacing { t, d0: 0.5 }, h).unwrap();
        let disc = assemble_newtonian(&cfg.shape, 8).unwrap();
        let spec = eigensystem(&disc, disc.n_cells()).unwrap().at_delta(deltas[3]);
        let inc = realize_incident(&cfg, &spec, &derive_contrasts(&cfg).unwrap()).unwrap();
        let points = evaluation_points(3, &centroid(&cfg.center_points()), radius, 8);
        let change = oracle_refinement_change(&cfg, inc.k, 8, 12, &points).unwrap();
        pass &= change <= 0.02;
        parts.push(format!("(h,t)=({h},{t}) refinement {:.2}%", 100.0 * change));

        for m in 1..=3 {
            let radius = eval_radius_3d(h, t, m, deltas[0]);
            let cfg = sweep_config_3d(h, t, m, &deltas, radius, true, &[1]);
            let out = run_sweep(&cfg, &SweepOptions::default()).unwrap();
            let (slope, target) = fit_line(&out, "error", None);
            let ok = (slope - target).abs() <= 0.3;
            pass &= ok;
            parts.push(format!("M={m} slope {slope:.2}/{target:.2}"));
        }
    }
    outcome(pass, parts.join(", "))
}

fn criterion_6() -> Outcome {
    let (h, t) = (0.6, 0.2);
    let deltas = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002];
    let radius = eval_radius_3d(h, t, 2, deltas[0]);
    let cfg = sweep_config_3d(h, t, 2, &deltas, radius, false, &[1, 2]);
    let out = run_sweep(&cfg, &SweepOptions::default()).unwrap();
    let (s1, t1) = fit_line(&out, "increment", Some(1));
    let (s2, t2) = fit_line(&out, "increment", Some(2));
    let pass = (s1 - t1).abs() <= 0.3 && (s2 - t2).abs() <= 0.3 && s2 > s1;
    outcome(pass, format!("N=1 slope {s1:.3} (target {t1:.2}), N=2 slope {s2:.3} (target {t2:.2}), increasing {}", s2 > s1))
}

fn sweep_config_2d(h: f64, t: f64, ms: &[f64], oracle: bool, orders: &[usize]) -> ClusterConfig {
    let deltas: Vec<f64> = ms.iter().map(|m| (-m).exp()).collect();
    config(json!({
        "dim": 2, "shape": square_shape(), "delta": deltas[0], "centers": [[0.0, 0.0]],
        "regime": {"kind": "third", "c_b": 1.0}, "incident": {"theta": [1.0, 0.0], "h": h},
        "resolution": 16,
        "sweep": {"deltas": deltas, "h": h, "t": t, "d0": 1.0, "pattern": triangle_2d()[..2].to_vec(),
                  "orders": orders, "oracle": oracle, "eval_radius": 5.0}
    }))
}

fn criterion_7() -> Outcome {
    let cfg = sweep_config_2d(1.0, 0.0, &[3.0, 4.0, 5.0, 6.0], true, &[1]);
    let out = run_sweep(&cfg, &SweepOptions::default()).unwrap();
    let (err, err_target) = fit_line(&out, "error", None);

    let cfg = sweep_config_2d(0.5, 0.0, &[8.0, 16.0, 32.0, 64.0, 128.0], false, &[1, 2]);
    let out = run_sweep(&cfg, &SweepOptions::default()).unwrap();
    let (s1, t1) = fit_line(&out, "increment", Some(1));
    let (s2, t2) = fit_line(&out, "increment", Some(2));
    let pass = (err - err_target).abs() <= 0.3 && (s1 - t1).abs() <= 0.3 && (s2 - t2).abs() <= 0.3;
    outcome(
        pass,
        format!("error slope {err:.3} (target {err_target:.1}); log-axis increments N=1 {s1:.3} (target {t1:.2}), N=2 {s2:.3} (target {t2:.2})"),
    )
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn spectrum_for(cfg: &ClusterConfig) -> SpectralData {
    let disc = assemble_newtonian(&cfg.shape, 6).unwrap();
    eigensystem_at(&disc, cfg.delta, disc.n_cells()).unwrap()
}

fn solve_cfg(cfg: &ClusterConfig, spec: &SpectralData) -> (FoldyLaxSystem, Vec<Complex64>) {
    let inc = realize_incident(cfg, spec, &derive_contrasts(cfg).unwrap()).unwrap();
    let sys = assemble(cfg, spec, inc.k).unwrap();
    let q = solve_direct(&sys).unwrap().q;
    (sys, q)
}

fn criterion_8() -> Outcome {
    let tol = 1e-12;
    let mut worst: f64 = 0.0;
    let x: Point = [2.0, 1.5, -1.0];

    // M = 1: no coupling, Q = U, field is the single monopole.
    let cfg = third_regime_single(0.05, 0.5);
    let spec = spectrum_for(&cfg);
    let (sys, q) = solve_cfg(&cfg, &spec);
    let single_ok = sys.bk[(0, 0)] == Complex64::new(0.0, 0.0) && q == sys.u;
    let monopole = clusterwave::kernels::green3d(sys.k, &x, &sys.centers[0], false).unwrap().value * sys.cstar[0] * sys.u[0];
    worst = worst.max(rel(scattered_field(&sys, &q, &x).unwrap(), monopole));

    // Permutation equivariance.
    let mut centers = vec![vec![0.0, 0.0, 0.0], vec![0.7, 0.1, 0.0], vec![0.2, 0.6, 0.3]];
    let mk = |c: &Vec<Vec<f64>>, f: &[f64]| {
        config(json!({
            "dim": 3, "shape": cube_shape(), "delta": 0.05, "centers": c,
            "regime": {"kind": "third", "c_b": 1.0, "tau_factors": f}, "incident": {"theta": [0.6, 0.0, 0.8], "h": 0.5}
        }))
    };
    let factors = [1.0, 1.1, 0.9];
    let cfg = mk(&centers, &factors);
    let (sys, q) = solve_cfg(&cfg, &spec);
    let perm = [2, 0, 1];
    let pc: Vec<Vec<f64>> = perm.iter().map(|&p| centers[p].clone()).collect();
    let pf: Vec<f64> = perm.iter().map(|&p| factors[p]).collect();
    // The detuned wavenumber follows the first particle's contrast; keep it fixed.
    let psys = assemble(&mk(&pc, &pf), &spec, sys.k).unwrap();
    let pq = solve_direct(&psys).unwrap().q;
    for (i, &p) in perm.iter().enumerate() {
        worst = worst.max(rel(pq[i], q[p]));
    }
    worst = worst.max(rel(scattered_field(&psys, &pq, &x).unwrap(), scattered_field(&sys, &q, &x).unwrap()));

    // Mirror pair with the incident direction orthogonal to the separation.
    centers = vec![vec![-0.3, 0.0, 0.0], vec![0.3, 0.0, 0.0]];
    let cfg_orth = config(json!({
        "dim": 3, "shape": cube_shape(), "delta": 0.05, "centers": centers,
        "regime": {"kind": "third", "c_b": 1.0}, "incident": {"theta": [0.0, 0.0, 1.0], "h": 0.5}
    }));
    let (_, q) = solve_cfg(&cfg_orth, &spec);
    worst = worst.max(rel(q[0], q[1]));

    // Zero contrast: no scattered field.
    let mut cfg = mk(&vec![vec![0.0, 0.0, 0.0], vec![0.7, 0.1, 0.0]], &[1.0, 1.0]);
    let inc = realize_incident(&cfg, &spec, &derive_contrasts(&cfg).unwrap()).unwrap();
    cfg.regime = Regime::Third { c_b: 1.0, a1: None, tau_factors: Some(vec![0.0, 0.0]) };
    let sys = assemble(&cfg, &spec, inc.k).unwrap();
    let q = solve_direct(&sys).unwrap().q;
    let zero = scattered_field(&sys, &q, &x).unwrap().norm();

    let pass = single_ok && worst <= tol && zero == 0.0;
    outcome(pass, format!("M=1 exact {single_ok}, worst relative gap {worst:.1e}, zero-contrast field {zero:.1e}"))
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    // Hand fixtures: (eps0, k_p, sigma, k^2).
    for (eps0, k_p, sigma, k2) in [(2.0, 1.0, 0.0, 0.75), (2.0, 3.0, 0.25, 5.625), (1.5, 2.0, -0.25, 10.0 / 3.0)] {
        let r = plasmonic_resonances(eps0, k_p, &[sigma]).unwrap();
        worst = worst.max((r.resonances[0].k.powi(2) - k2).abs() / k2);
    }
    // Minnaert with the sphere constant of criterion 1.
    let sphere = ClosedSurface::Sphere { radius: 1.0 };
    let (delta, a0, a1) = (0.1, 1.0, 2.0);
    let m = minnaert_resonance(&sphere, delta, a0, a1, 24).unwrap();
    let hand = (8.0 * PI * a0 / (a1 * delta * delta * m.theta_reference)).sqrt();
    worst = worst.max((m.k.powi(2) - hand).abs() / hand);
    // Exact sphere constant: k_M^2 = sqrt(12 pi a0 / (a1 delta^2)).
    let exact = minnaert_from_theta(delta * delta * 2.0 / 3.0, a0, a1);
    let hand = (12.0 * PI * a0 / (a1 * delta * delta)).sqrt();
    worst = worst.max((exact.powi(2) - hand).abs() / hand);
    outcome(worst <= 1e-12, format!("worst relative deviation {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("sphere surface constant", criterion_1),
        ("Newtonian scaling", criterion_2),
        ("scattering-coefficient scalings", criterion_3),
        ("Born/direct consistency", criterion_4),
        ("3D Foldy-Lax remainder vs oracle", criterion_5),
        ("3D Born increments", criterion_6),
        ("2D Foldy-Lax error and increments", criterion_7),
        ("symmetry and degeneracy", criterion_8),
        ("plasmonic and Minnaert formulas", criterion_9),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != i + 1) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} [{name}] {} ({:.1}s)", i + 1, result.detail, start.elapsed().as_secs_f64());
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
