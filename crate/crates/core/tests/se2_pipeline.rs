mod support;

use moving_frames::expr::{d_s, parse, Expr, InvariantJet};
use moving_frames::geometry::Pose2;
use moving_frames::ode::OdeOptions;
use moving_frames::se2::{
    conservation_vector_se2, constants_from_initial_se2, derive_el_se2, first_integral_se2, run_se2, solve_se2,
    ReconstructOptions, Se2Derivation,
};
use moving_frames::SolverError;
use nalgebra::{Matrix3, Vector3};

fn derive(l: &str) -> Se2Derivation {
    derive_el_se2(&parse(l).unwrap()).unwrap()
}

fn lift(p: &[nalgebra::Vector2<f64>]) -> Vec<Vector3<f64>> {
    p.iter().map(|p| Vector3::new(p.x, p.y, 0.0)).collect()
}

fn planar_frame(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::from_columns(&[Vector3::new(c, s, 0.0), Vector3::new(-s, c, 0.0), Vector3::z()])
}

fn uniform(n: usize) -> ReconstructOptions {
    ReconstructOptions {
        uniform: Some(n),
        ..Default::default()
    }
}

#[test]
fn euler_lagrange_examples() {
    assert_eq!(derive("kappa^2").e_y, parse("2*kappa_ss + kappa^3").unwrap());
    assert_eq!(derive("1").e_y, parse("-kappa").unwrap());
    assert!(derive("kappa").e_y.is_zero());
    assert!(matches!(derive_el_se2(&parse("tau^2").unwrap()), Err(SolverError::TauNotAllowed)));
}

#[test]
fn upsilon_matches_displayed_form() {
    for l in ["1", "kappa^2", "kappa^2 + kappa_s^2/2", "kappa^3*kappa_s^2"] {
        let d = derive(l);
        let ek = d.e_kappa.clone();
        let expected = [
            -d.lambda.clone() - Expr::kappa(0) * ek.clone(),
            -d_s(&ek),
            ek,
        ];
        for (u, e) in d.upsilon.iter().zip(expected) {
            assert_eq!(u.to_string(), e.simplify().to_string(), "{l}");
        }
    }
}

#[test]
fn conservation_vector_and_first_integral_examples() {
    let line = derive("1");
    let any = InvariantJet::planar(vec![0.7, -0.3, 1.1]);
    assert_eq!(conservation_vector_se2(&line, &any).unwrap(), [1.0, 0.0, 0.0]);
    assert_eq!(first_integral_se2(&line, &any).unwrap(), 1.0);

    let el = derive("kappa^2");
    let u = conservation_vector_se2(&el, &InvariantJet::planar(vec![1.0, 0.0])).unwrap();
    assert_eq!(u, [-1.0, 0.0, 2.0]);
    let u = conservation_vector_se2(&el, &InvariantJet::planar(vec![0.0, 0.0])).unwrap();
    assert!(u.iter().all(|v| *v == 0.0));
    assert_eq!(el.first_integral, parse("kappa^4 + 4*kappa_s^2").unwrap());
}

#[test]
fn elastica_first_integral_is_conserved() {
    let d = derive("kappa^2");
    let traj = solve_se2(&d, &InvariantJet::planar(vec![1.0, 0.0]), (0.0, 20.0), &OdeOptions::default()).unwrap();
    assert!(traj.completed());
    let e = traj.drift.get("first_integral").unwrap();
    assert!((e.initial - 1.0).abs() < 1e-15);
    assert!(e.max_rel <= 1e-8, "{e:?}");
    // κ oscillates.
    let k: Vec<f64> = traj.traj.states.iter().map(|y| y[0]).collect();
    assert!(k.iter().any(|v| *v < 0.0) && k.iter().any(|v| *v > 0.9));
}

#[test]
fn zero_curvature_is_a_fixed_point() {
    let d = derive("kappa^2");
    let traj = solve_se2(&d, &InvariantJet::planar(vec![0.0, 0.0]), (0.0, 20.0), &OdeOptions::default()).unwrap();
    assert!(traj.traj.states.iter().all(|y| y.iter().all(|v| *v == 0.0)));
}

#[test]
fn tightened_tolerance_self_oracle() {
    let d = derive("kappa^2");
    let jet = InvariantJet::planar(vec![1.0, 0.0]);
    let a = solve_se2(&d, &jet, (0.0, 20.0), &OdeOptions::default()).unwrap();
    let b = solve_se2(&d, &jet, (0.0, 20.0), &OdeOptions::with_tolerances(1e-12, 1e-14)).unwrap();
    let sup = (0..=2000)
        .map(|i| {
            let s = i as f64 * 0.01;
            (a.traj.eval(s).unwrap()[0] - b.traj.eval(s).unwrap()[0]).abs()
        })
        .fold(0.0, f64::max);
    assert!(sup <= 1e-7, "{sup:e}");
}

#[test]
fn constants_follow_the_initial_pose() {
    let d = derive("kappa^2");
    let jet = InvariantJet::planar(vec![0.8, 0.3, -0.4]);
    let u = conservation_vector_se2(&d, &jet).unwrap();
    let c0 = constants_from_initial_se2(&d, &jet, &Pose2::canonical().jet(&jet)).unwrap();
    assert_eq!(c0.c, u.to_vec());

    let (phi, x, y): (f64, f64, f64) = (0.9, 1.5, -0.7);
    let (sn, cs) = phi.sin_cos();
    let rotated = constants_from_initial_se2(&d, &jet, &Pose2::new(0.0, 0.0, phi).jet(&jet)).unwrap();
    assert!((rotated.c[0] - (cs * u[0] - sn * u[1])).abs() < 1e-14);
    assert!((rotated.c[1] - (sn * u[0] + cs * u[1])).abs() < 1e-14);
    assert!((rotated.c[2] - u[2]).abs() < 1e-14);

    let moved = constants_from_initial_se2(&d, &jet, &Pose2::new(x, y, phi).jet(&jet)).unwrap();
    assert!((moved.c[0] - rotated.c[0]).abs() < 1e-14 && (moved.c[1] - rotated.c[1]).abs() < 1e-14);
    let moment = (x * sn - y * cs) * u[0] + (x * cs + y * sn) * u[1] + u[2];
    assert!((moved.c[2] - moment).abs() < 1e-13);

    let translated = constants_from_initial_se2(&d, &jet, &Pose2::new(x, y, 0.0).jet(&jet)).unwrap();
    assert_eq!(&translated.c[..2], &c0.c[..2]);

    let mut bad = Pose2::canonical().jet(&jet);
    bad.xs *= 2.0;
    assert!(matches!(constants_from_initial_se2(&d, &jet, &bad), Err(SolverError::Geometry(_))));
}

#[test]
fn line_through_the_initial_pose() {
    let d = derive("1");
    let pose = Pose2::new(1.0, -2.0, 2.4);
    let run = run_se2(&d, &InvariantJet::planar(vec![0.0]), &pose, (0.0, 10.0), &OdeOptions::default(), &uniform(501)).unwrap();
    let pts = lift(&run.curve.position);
    assert!(support::line_deviation(&pts) <= 1e-9);
    assert!((run.curve.position[0] - pose.x).norm() < 1e-12);
    let end = pose.x + nalgebra::Vector2::new(pose.theta.cos(), pose.theta.sin()) * 10.0;
    assert!((run.curve.position.last().unwrap() - end).norm() < 1e-9);
}

#[test]
fn elastica_reconstruction_matches_frenet() {
    let d = derive("kappa^2");
    let pose = Pose2::new(0.3, -0.2, 0.7);
    let run = run_se2(&d, &InvariantJet::planar(vec![1.0, 0.0]), &pose, (0.0, 20.0), &OdeOptions::default(), &uniform(2001)).unwrap();
    assert!(!run.curve.frenet_fallback);
    let oracle = support::frenet_rk4(
        &|y| (vec![y[1], -0.5 * y[0].powi(3)], y[0], 0.0),
        &[1.0, 0.0],
        Vector3::new(0.3, -0.2, 0.0),
        planar_frame(pose.theta),
        20.0,
        2000,
    );
    let rms = support::aligned_rms(&lift(&run.curve.position), &oracle);
    assert!(rms < 1e-5, "{rms:e}");
    assert!(run.curve.law_drift.max_abs() <= 1e-6, "{:?}", run.curve.law_drift);
    assert!(run.curve.law_residuals["second"] <= 1e-6, "{:?}", run.curve.law_residuals);
    assert!(run.curve.speed_defect <= 1e-6);
    assert!(run.first_integral_gap <= 1e-8);
    let pf = run.curve.closed_form.unwrap();
    assert!((pf.min_offset - pf.expected_offset).abs() < 1e-6 && (pf.max_offset - pf.expected_offset).abs() < 1e-6);
}

/// `L = κ² + ½κ_s²` gives `κ'''' = 2κ'' + κ³ − κ²κ'' + ½κκ'²`.
#[test]
fn fourth_order_lagrangian_matches_frenet() {
    let d = derive("kappa^2 + kappa_s^2/2");
    let ics = [0.5, 0.0, -0.25, 0.0];
    let pose = Pose2::new(-1.0, 0.5, -0.3);
    let run = run_se2(&d, &InvariantJet::planar(ics.to_vec()), &pose, (0.0, 3.0), &OdeOptions::default(), &uniform(601)).unwrap();
    let curv = |y: &[f64]| {
        let (k, k1, k2, k3) = (y[0], y[1], y[2], y[3]);
        let k4 = 2.0 * k2 + k.powi(3) - k * k * k2 + 0.5 * k * k1 * k1;
        (vec![k1, k2, k3, k4], k, 0.0)
    };
    let oracle = support::frenet_rk4(&curv, &ics, Vector3::new(-1.0, 0.5, 0.0), planar_frame(pose.theta), 3.0, 600);
    let rms = support::aligned_rms(&lift(&run.curve.position), &oracle);
    assert!(rms < 1e-5, "{rms:e}");
    assert!(run.curve.law_drift.max_abs() <= 1e-6, "{:?}", run.curve.law_drift);
}

#[test]
fn reconstruction_is_equivariant() {
    let d = derive("kappa^2");
    let jet = InvariantJet::planar(vec![1.0, 0.0]);
    let opts = OdeOptions::default();
    let a = run_se2(&d, &jet, &Pose2::canonical(), (0.0, 20.0), &opts, &uniform(1001)).unwrap();
    let b = run_se2(&d, &jet, &Pose2::new(2.0, 3.0, 1.1), (0.0, 20.0), &opts, &uniform(1001)).unwrap();
    let rms = support::aligned_rms(&lift(&a.curve.position), &lift(&b.curve.position));
    assert!(rms <= 1e-9, "{rms:e}");
}
