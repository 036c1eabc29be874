//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line with
//! its measured values and runtime; the process fails if any criterion does.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use moving_frames::expr::{d_s, d_s_n, euler_operator, evaluate, parse, partial, Expr, Family, Func, InvariantJet, JetVar};
use moving_frames::geometry::{
    adjoint_se2, adjoint_se3, b_form_se2, b_form_se3, d_form_se3, invariantize_se2, moving_frame_se2,
    moving_frame_se3, normalize_jet_se3, syzygy_residual_se2, CurveJet, Pose2, Pose3, Se2, Se3,
};
use moving_frames::ode::OdeOptions;
use moving_frames::se2::{derive_el_se2, run_se2, solve_se2, ReconstructOptions};
use moving_frames::se3::{derive_el_se3, elimination_residual, elimination_residual_scaled, run_se3, solve_se3};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn uniform(n: usize) -> ReconstructOptions {
    ReconstructOptions {
        uniform: Some(n),
        ..Default::default()
    }
}

fn lift(p: &[Vector2<f64>]) -> Vec<Vector3<f64>> {
    p.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect()
}

fn planar_frame(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::from_columns(&[Vector3::new(c, s, 0.0), Vector3::new(-s, c, 0.0), Vector3::z()])
}

fn kirchhoff_jet() -> InvariantJet {
    InvariantJet::new(vec![0.24, 0.016], vec![-0.07, -0.04, 0.001], 0.0)
}

fn kirchhoff_pose() -> Pose3 {
    Pose3::from_tangent_normal(Vector3::new(0.1, 0.2, -0.3), Vector3::new(1.0, 0.5, 0.2), Vector3::new(0.0, 1.0, 0.3))
        .unwrap()
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn symbolic_elastica() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_mfsolve"))
        .args(["derive", "--group", "se2", "--lagrangian", "kappa^2"])
        .output()
        .map_err(err)?;
    ensure(out.status.success(), format!("exit status {}", out.status))?;
    let text = String::from_utf8(out.stdout).map_err(err)?;
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("EL: "))
        .ok_or("no EL line")?;
    let half = (parse(line).map_err(err)? / Expr::int(2)).simplify();
    let expected = parse("kappa_ss + kappa^3/2").map_err(err)?.simplify();
    ensure(half == expected, format!("EL/2 = {half}, expected {expected}"))?;
    Ok(format!("EL: {line}"))
}

fn elastica_first_integral() -> Outcome {
    let d = derive_el_se2(&parse("kappa^2").unwrap()).map_err(err)?;
    ensure(d.first_integral == parse("4*kappa_s^2 + kappa^4").unwrap(), format!("first integral {}", d.first_integral))?;
    let traj = solve_se2(&d, &InvariantJet::planar(vec![1.0, 0.0]), (0.0, 20.0), &OdeOptions::default()).map_err(err)?;
    ensure(traj.completed(), "span not completed".into())?;
    let drift = traj.drift.get("first_integral").ok_or("no drift entry")?.max_rel;
    ensure(drift <= 1e-8, format!("relative drift {drift:e} > 1e-8"))?;
    Ok(format!("relative drift {drift:.2e}"))
}

fn conservation_laws() -> Outcome {
    let opts = OdeOptions::default();
    let d2 = derive_el_se2(&parse("kappa^2").unwrap()).map_err(err)?;
    let r2 = run_se2(&d2, &InvariantJet::planar(vec![1.0, 0.0]), &Pose2::new(0.3, -0.2, 0.7), (0.0, 20.0), &opts, &uniform(2001))
        .map_err(err)?;
    let mut parts = vec![("se2 kappa^2", r2.curve.law_drift.entries.len(), 3, r2.curve.law_drift.max_abs())];
    for l in ["kappa^2", "kappa^2 + tau^2"] {
        let d3 = derive_el_se3(&parse(l).unwrap());
        let r3 = run_se3(&d3, &kirchhoff_jet(), &kirchhoff_pose(), (0.0, 20.0), &opts, &uniform(2001)).map_err(err)?;
        let name = if l == "kappa^2" { "se3 kappa^2" } else { "se3 kappa^2+tau^2" };
        parts.push((name, r3.curve.law_drift.entries.len(), 6, r3.curve.law_drift.max_abs()));
    }
    for (name, n, want, drift) in &parts {
        ensure(n == want, format!("{name}: {n} components, expected {want}"))?;
        ensure(*drift <= 1e-6, format!("{name}: drift {drift:e} > 1e-6"))?;
    }
    Ok(parts.iter().map(|(n, _, _, d)| format!("{n} {d:.2e}")).collect::<Vec<_>>().join(", "))
}

fn line_recovery() -> Outcome {
    let opts = OdeOptions::default();
    let d2 = derive_el_se2(&parse("1").unwrap()).map_err(err)?;
    let r2 = run_se2(&d2, &InvariantJet::planar(vec![0.0]), &Pose2::new(1.0, -2.0, 2.4), (0.0, 10.0), &opts, &uniform(501))
        .map_err(err)?;
    let dev2 = support::line_deviation(&lift(&r2.curve.position));
    let d3 = derive_el_se3(&parse("1").unwrap());
    let pose = Pose3::from_tangent_normal(Vector3::new(1.0, 2.0, 3.0), Vector3::new(1.0, -1.0, 0.5), Vector3::z()).unwrap();
    let r3 = run_se3(&d3, &InvariantJet::new(vec![0.0], vec![0.0], 0.0), &pose, (0.0, 10.0), &opts, &uniform(501))
        .map_err(err)?;
    let dev3 = support::line_deviation(&r3.curve.position);
    ensure(dev2 <= 1e-9 && dev3 <= 1e-9, format!("deviation se2 {dev2:e}, se3 {dev3:e}"))?;
    Ok(format!("max deviation se2 {dev2:.2e}, se3 {dev3:.2e}"))
}

fn planar_elastica_in_space() -> Outcome {
    let d = derive_el_se3(&parse("kappa^2").unwrap());
    let pose = Pose3::new(Vector3::new(1.0, -2.0, 0.5), Matrix3::identity());
    let run = run_se3(&d, &InvariantJet::new(vec![0.1, 0.0], vec![0.0], 0.0), &pose, (0.0, 20.0), &OdeOptions::default(), &uniform(2001))
        .map_err(err)?;
    let cc = run.canonical.as_ref().ok_or("no canonical constants")?;
    let tau = run.curve.tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let theta = support::drift(&run.curve.theta);
    let p = &run.curve.canonical;
    let m = p.iter().fold(Matrix2::zeros(), |m, q| m + Matrix2::new(q.x * q.x, q.x * q.y, q.x * q.y, q.y * q.y));
    let eig = m.symmetric_eigen();
    let n = eig.eigenvectors.column(eig.eigenvalues.imin());
    let plane = p.iter().map(|q| (n[0] * q.x + n[1] * q.y).abs()).fold(0.0, f64::max);
    let msg = format!(
        "|tau| {tau:.2e}, theta drift {theta:.2e}, c1'Dc2 {:.2e}, plane distance {plane:.2e}",
        cc.c1_d_c2.abs()
    );
    ensure(tau <= 1e-8 && theta <= 1e-6 && cc.c1_d_c2.abs() <= 1e-10 && plane <= 1e-6, msg.clone())?;
    Ok(msg)
}

fn frenet_oracle() -> Outcome {
    let opts = OdeOptions::default();
    let d = derive_el_se2(&parse("kappa^2").unwrap()).map_err(err)?;
    let pose = Pose2::new(0.3, -0.2, 0.7);
    let run = run_se2(&d, &InvariantJet::planar(vec![1.0, 0.0]), &pose, (0.0, 20.0), &opts, &uniform(2001)).map_err(err)?;
    let oracle = support::frenet_rk4(
        &|y| (vec![y[1], -0.5 * y[0].powi(3)], y[0], 0.0),
        &[1.0, 0.0],
        Vector3::new(0.3, -0.2, 0.0),
        planar_frame(pose.theta),
        20.0,
        2000,
    );
    let a = support::aligned_rms(&lift(&run.curve.position), &oracle);

    let d = derive_el_se2(&parse("kappa^2 + kappa_s^2/2").unwrap()).map_err(err)?;
    let ics = [0.5, 0.0, -0.25, 0.0];
    let pose = Pose2::new(-1.0, 0.5, -0.3);
    let run = run_se2(&d, &InvariantJet::planar(ics.to_vec()), &pose, (0.0, 3.0), &opts, &uniform(601)).map_err(err)?;
    let curv = |y: &[f64]| {
        let (k, k1, k2, k3) = (y[0], y[1], y[2], y[3]);
        (vec![k1, k2, k3, 2.0 * k2 + k.powi(3) - k * k * k2 + 0.5 * k * k1 * k1], k, 0.0)
    };
    let oracle = support::frenet_rk4(&curv, &ics, Vector3::new(-1.0, 0.5, 0.0), planar_frame(pose.theta), 3.0, 600);
    let b = support::aligned_rms(&lift(&run.curve.position), &oracle);

    let d = derive_el_se3(&parse("kappa^2 + tau^2").unwrap());
    let pose = kirchhoff_pose();
    let run = run_se3(&d, &kirchhoff_jet(), &pose, (0.0, 20.0), &opts, &uniform(2001)).map_err(err)?;
    let ev = run.trajectory.evaluator();
    let kt = |s: f64| {
        let j = ev.jet_at(s, 0).unwrap();
        (j.kappa[0], j.tau[0])
    };
    let oracle = support::frenet_driven(&kt, pose.x, pose.frame, 20.0, 2000);
    let c = support::aligned_rms(&run.curve.position, &oracle);

    let msg = format!("RMS kappa^2 {a:.2e}, kappa^2+kappa_s^2/2 {b:.2e}, kappa^2+tau^2 {c:.2e}");
    ensure(a < 1e-5 && b < 1e-5 && c < 1e-5, msg.clone())?;
    Ok(msg)
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.75) {
            Expr::kappa(rng.gen_range(0..=2))
        } else {
            Expr::rational(rng.gen_range(-3..=3), rng.gen_range(1..=3))
        };
    }
    let op = rng.gen_range(0..6);
    let a = random_expr(rng, depth - 1);
    match op {
        0 => a + random_expr(rng, depth - 1),
        1 => a * random_expr(rng, depth - 1),
        2 => a.pow(rng.gen_range(1..=3)),
        3 => Expr::func(Func::Sin, a),
        4 => Expr::func(Func::Exp, a),
        _ => a / (Expr::kappa(0).pow(2) + Expr::int(1)),
    }
}

/// Termwise numeric `Σ (−1)^m D_s^m ∂e/∂κ_m`, with the largest term as scale.
fn euler_numeric(e: &Expr, jet: &InvariantJet) -> (f64, f64) {
    let top = e.max_orders().kappa.unwrap_or(0);
    let (mut sum, mut scale) = (0.0, 0.0f64);
    for m in 0..=top {
        let v = evaluate(&d_s_n(&partial(e, JetVar::kappa(m)), m as usize), jet).unwrap();
        sum += if m % 2 == 0 { v } else { -v };
        scale = scale.max(v.abs());
    }
    (sum, scale)
}

fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn property_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut worst_euler = 0.0f64;
    for _ in 0..200 {
        let df = d_s(&random_expr(&mut rng, 4));
        ensure(euler_operator(&df, Family::Kappa).is_zero(), format!("E(D_s f) != 0 for {df}"))?;
        for _ in 0..10 {
            let jet = InvariantJet::new(
                (0..10).map(|_| rng.gen_range(0.5..1.5)).collect(),
                vec![0.0; 10],
                0.0,
            );
            let (v, scale) = euler_numeric(&df, &jet);
            worst_euler = worst_euler.max(v.abs() / scale.max(1.0));
        }
    }
    ensure(worst_euler <= 1e-12, format!("Euler residual {worst_euler:e}"))?;

    let mut worst_frame = 0.0f64;
    let mut worst_adj = 0.0f64;
    for _ in 0..100 {
        let th: f64 = rng.gen_range(-PI..PI);
        let mut r = || rng.gen_range(-2.0..2.0);
        let j2 = CurveJet::planar([r(), r()], [th.cos(), th.sin()], [r(), r()], [r(), r()]);
        let g2 = Se2::new(rng.gen_range(-PI..PI), Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)));
        let lhs = moving_frame_se2(&g2.act_jet(&j2)).map_err(err)?.element();
        let rhs = g2.compose(&moving_frame_se2(&j2).map_err(err)?.element());
        worst_frame = worst_frame.max((lhs.theta - rhs.theta).sin().abs()).max((lhs.t - rhs.t).norm());
        let (a, b) = (invariantize_se2(&j2).map_err(err)?, invariantize_se2(&g2.act_jet(&j2)).map_err(err)?);
        worst_frame = worst_frame.max((a.0 - b.0).abs()).max((a.1 - b.1).abs());
        let ad = adjoint_se2(&j2).map_err(err)?;
        worst_adj = worst_adj.max(max_abs(&(ad.transpose() * b_form_se2() * ad - b_form_se2())));

        let v = |rng: &mut ChaCha8Rng| Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let t = v(&mut rng).normalize();
        let raw = v(&mut rng);
        let xss = (raw - t * t.dot(&raw)) / raw.norm();
        let j3 = CurveJet::spatial(v(&mut rng) * 3.0, t, xss, v(&mut rng) * 2.0);
        let axis = v(&mut rng);
        let g3 = Se3::from_axis_angle(axis, rng.gen_range(-PI..PI), v(&mut rng) * 5.0);
        let lhs = moving_frame_se3(&g3.act_jet(&j3)).map_err(err)?.element();
        let rhs = g3.compose(&moving_frame_se3(&j3).map_err(err)?.element());
        worst_frame = worst_frame.max(max_abs(&(lhs.rot - rhs.rot))).max((lhs.t - rhs.t).norm());
        let (n, ng) = (normalize_jet_se3(&j3).map_err(err)?, normalize_jet_se3(&g3.act_jet(&j3)).map_err(err)?);
        for (a, b) in [(n.xs, ng.xs), (n.xss, ng.xss), (n.xsss, ng.xsss)] {
            worst_frame = worst_frame.max((a - b).norm());
        }
        let ad = adjoint_se3(&j3).map_err(err)?;
        let (bf, df) = (b_form_se3(), d_form_se3());
        worst_adj = worst_adj.max(max_abs(&(ad.transpose() * bf * ad - bf)));
        worst_adj = worst_adj.max(max_abs(&(ad.transpose() * df * ad - df)) / ad.norm().powi(2).max(1.0));
    }
    ensure(worst_frame <= 1e-10, format!("equivariance/invariance {worst_frame:e}"))?;
    ensure(worst_adj <= 1e-12, format!("conjugation {worst_adj:e}"))?;

    let family = |s: f64, t: f64| [s + t * s.sin(), t * s.cos()];
    let rs: Vec<_> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| syzygy_residual_se2(&family, 0.7, 0.3, h))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut ratios = vec![];
    for (a, b) in [(&rs[0], &rs[1]), (&rs[1], &rs[2])] {
        ratios.push(a.r1.abs() / b.r1.abs());
        ratios.push(a.r2.abs() / b.r2.abs());
    }
    ensure(ratios.iter().all(|r| (3.0..5.0).contains(r)), format!("syzygy ratios {ratios:?}"))?;

    let d = derive_el_se3(&parse("kappa^2 + tau^2").unwrap());
    let traj = solve_se3(&d, &kirchhoff_jet(), (0.0, 20.0), &OdeOptions::default()).map_err(err)?;
    let on = elimination_residual(&d, &traj).map_err(err)?;
    let off = elimination_residual_scaled(&d, &traj, 1.01).map_err(err)?;
    ensure(on <= 1e-6 && off >= 10.0 * on, format!("elimination on {on:e}, off {off:e}"))?;

    Ok(format!(
        "Euler {worst_euler:.1e}, frames {worst_frame:.1e}, conjugation {worst_adj:.1e}, syzygy ratios {:.2}..{:.2}, elimination {on:.1e} vs {off:.1e}",
        ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        ratios.iter().cloned().fold(0.0, f64::max),
    ))
}

fn reduction() -> Outcome {
    let opts = OdeOptions::default();
    let d3 = derive_el_se3(&parse("kappa^2").unwrap());
    let d2 = derive_el_se2(&parse("kappa^2").unwrap()).map_err(err)?;
    let a = solve_se3(&d3, &InvariantJet::new(vec![0.1, 0.0], vec![0.0], 0.0), (0.0, 20.0), &opts).map_err(err)?;
    let b = solve_se2(&d2, &InvariantJet::planar(vec![0.1, 0.0]), (0.0, 20.0), &opts).map_err(err)?;
    let mut sup = 0.0f64;
    for i in 0..=4000 {
        let s = i as f64 * 0.005;
        sup = sup.max((a.traj.eval(s).map_err(err)?[0] - b.traj.eval(s).map_err(err)?[0]).abs());
    }
    ensure(sup <= 1e-9, format!("sup |dkappa| {sup:e}"))?;
    Ok(format!("sup |dkappa| {sup:.2e}"))
}

fn main() {
    // libtest flags (e.g. `--nocapture`, filters) are accepted and ignored.
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("1 symbolic elastica", Duration::from_secs(1), symbolic_elastica),
        ("2 elastica first integral", Duration::from_secs(5), elastica_first_integral),
        ("3 conservation laws", Duration::from_secs(10), conservation_laws),
        ("4 line recovery", Duration::from_secs(2), line_recovery),
        ("5 planar elastica in space", Duration::from_secs(10), planar_elastica_in_space),
        ("6 reconstruction vs Frenet", Duration::from_secs(20), frenet_oracle),
        ("7 property suite", Duration::from_secs(30), property_suite),
        ("8 SE(3) to SE(2) reduction", Duration::from_secs(5), reduction),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let t = Instant::now();
        let outcome = f();
        let dt = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if dt <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({:.3} s, budget {} s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            dt.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
