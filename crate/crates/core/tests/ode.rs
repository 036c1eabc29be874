use moving_frames::ode::{
    drift_monitor, integrate_fixed, integrate_ivp, newton_2d, newton_scalar, quadrature, NewtonError,
    NewtonOptions, OdeError, OdeOptions, Termination, Trajectory,
};

fn growth(_: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
    dy[0] = y[0];
    Ok(())
}

fn harmonic(_: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
    dy[0] = y[1];
    dy[1] = -y[0];
    Ok(())
}

fn oscillator(opts: &OdeOptions, s1: f64) -> Trajectory {
    integrate_ivp(harmonic, &[1.0, 0.0], (0.0, s1), opts).unwrap()
}

#[test]
fn exponential_growth() {
    let opts = OdeOptions::default();
    let t = integrate_ivp(growth, &[1.0], (0.0, 1.0), &opts).unwrap();
    assert_eq!(t.termination, Termination::Completed);
    let y1 = t.states.last().unwrap()[0];
    let e = std::f64::consts::E;
    assert!((y1 - e).abs() <= 10.0 * opts.rel_tol * e, "{y1}");
    assert_eq!(*t.s.last().unwrap(), 1.0);
}

#[test]
fn harmonic_energy_is_conserved() {
    let t = oscillator(&OdeOptions::default(), 20.0);
    let energy = |_: f64, y: &[f64]| y[0] * y[0] + y[1] * y[1];
    let r = drift_monitor(&t, &[("energy", &energy)]);
    assert!(r.get("energy").unwrap().max_abs <= 1e-9, "{r:?}");
}

#[test]
fn embedded_pair_orders() {
    // Fixed steps on y' = y over [0, 1]: log-log slope of the error.
    let exact = std::f64::consts::E;
    let errs: Vec<(f64, f64)> = [8usize, 16, 32]
        .iter()
        .map(|&n| {
            let (y5, y4) = integrate_fixed(growth, &[1.0], (0.0, 1.0), n).unwrap();
            ((y5[0] - exact).abs(), (y4[0] - exact).abs())
        })
        .collect();
    for w in errs.windows(2) {
        let p5 = (w[0].0 / w[1].0).log2();
        let p4 = (w[0].1 / w[1].1).log2();
        assert!((p5 - 5.0).abs() < 0.3, "order 5 slope {p5}");
        assert!((p4 - 4.0).abs() < 0.3, "order 4 slope {p4}");
    }
}

#[test]
fn tighter_tolerances_give_smaller_errors() {
    let mut prev = f64::INFINITY;
    for tol in [1e-5, 1e-7, 1e-9, 1e-11] {
        let t = oscillator(&OdeOptions::with_tolerances(tol, tol * 1e-2), 10.0);
        let y = t.states.last().unwrap();
        let err = (y[0] - 10f64.cos()).abs().max((y[1] + 10f64.sin()).abs());
        assert!(err < prev, "tol {tol}: {err:e} not below {prev:e}");
        // Error per unit tolerance stays bounded (proportional control).
        assert!(err < 1e3 * tol, "tol {tol}: {err:e}");
        prev = err;
    }
}

#[test]
fn dense_output_matches_knots_and_solution() {
    let opts = OdeOptions::default();
    let t = oscillator(&opts, 20.0);
    for (k, s) in t.s.iter().enumerate() {
        let y = t.eval(*s).unwrap();
        for (a, b) in y.iter().zip(&t.states[k]) {
            assert!((a - b).abs() <= 1e-12);
        }
        // Approaching the knot from the left segment.
        if k > 0 {
            let yl = t.eval(s - 1e-12 * (s - t.s[k - 1])).unwrap();
            for (a, b) in yl.iter().zip(&t.states[k]) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
    for w in t.s.windows(2) {
        let m = 0.5 * (w[0] + w[1]);
        let y = t.eval(m).unwrap();
        assert!((y[0] - m.cos()).abs() < 1e-8, "dense error at {m}");
    }
    assert!(matches!(t.eval(20.5), Err(OdeError::OutOfSpan { .. })));
}

#[test]
fn quadrature_examples() {
    let t = oscillator(&OdeOptions::default(), 6.0);
    for s in [0.0, 0.3, 2.0, 6.0] {
        assert!((quadrature(&t, &|_| 1.0, s).unwrap() - s).abs() < 1e-12);
        assert!((quadrature(&t, &f64::cos, s).unwrap() - s.sin()).abs() < 1e-9);
    }
    assert!(matches!(quadrature(&t, &f64::cos, 7.0), Err(OdeError::OutOfSpan { .. })));

    // Integrating the dense channel and differencing returns the channel.
    let chan = |s: f64| t.eval(s).unwrap()[0];
    let s = 2.5;
    let err = |h: f64| {
        let d = (quadrature(&t, &chan, s + h).unwrap() - quadrature(&t, &chan, s - h).unwrap()) / (2.0 * h);
        (d - chan(s)).abs()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!((3.5..4.5).contains(&(e1 / e2)), "{e1:e} {e2:e}");
}

#[test]
fn newton_examples() {
    let opts = NewtonOptions::default();
    let r = newton_scalar(&mut |x| x * x - 4.0, Some(&mut |x| 2.0 * x), 3.0, &opts).unwrap();
    assert!((r.root - 2.0).abs() < 1e-12);

    let r = newton_scalar(&mut |x| 3.0 * x - 1.5, Some(&mut |_| 3.0), 10.0, &opts).unwrap();
    assert!(r.iterations <= 1 && (r.root - 0.5).abs() < 1e-15);

    // Pure Newton diverges on atan from x = 3; the safeguard must not.
    let r = newton_scalar(&mut f64::atan, None, 3.0, &opts).unwrap();
    assert!(r.root.abs() < 1e-10);

    assert!(matches!(
        newton_scalar(&mut |x| x * x + 1.0, None, 0.5, &opts),
        Err(NewtonError::NoConvergence { .. }) | Err(NewtonError::SingularJacobian { .. })
    ));

    let r = newton_2d(
        &mut |v| [v[0] + v[1] - 3.0, v[0] - v[1] - 1.0],
        Some(&mut |_| [[1.0, 1.0], [1.0, -1.0]]),
        [0.0, 0.0],
        &opts,
    )
    .unwrap();
    assert!(r.iterations <= 1 && (r.root[0] - 2.0).abs() < 1e-14 && (r.root[1] - 1.0).abs() < 1e-14);

    let r = newton_2d(&mut |v| [v[0] * v[0] + v[1] * v[1] - 1.0, v[0] - v[1]], None, [1.0, 0.2], &opts).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((r.root[0] - h).abs() < 1e-10 && (r.root[1] - h).abs() < 1e-10);
}

#[test]
fn drift_examples() {
    let opts = OdeOptions::default();
    let t = oscillator(&opts, 20.0);
    let constant = |_: f64, _: &[f64]| 4.0;
    let r = drift_monitor(&t, &[("constant", &constant)]);
    assert_eq!(r.get("constant").unwrap().max_abs, 0.0);
    assert_eq!(r.get("constant").unwrap().max_rel, 0.0);

    let energy = |_: f64, y: &[f64]| y[0] * y[0] + y[1] * y[1];
    let loose = drift_monitor(&oscillator(&OdeOptions::with_tolerances(1e-6, 1e-8), 20.0), &[("e", &energy)]);
    let tight = drift_monitor(&t, &[("e", &energy)]);
    assert!(tight.max_abs() < loose.max_abs(), "{tight:?} vs {loose:?}");
}

#[test]
fn rejects_bad_input() {
    let opts = OdeOptions::default();
    assert!(matches!(
        integrate_ivp(growth, &[1.0], (1.0, 0.0), &opts),
        Err(OdeError::InvalidSpan { .. })
    ));
    assert!(matches!(
        integrate_ivp(growth, &[1.0], (0.0, 1.0), &OdeOptions::with_tolerances(0.0, 1e-9)),
        Err(OdeError::InvalidTolerance)
    ));
    let blowup = |_: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[0] * y[0];
        Ok(())
    };
    let r = integrate_ivp(blowup, &[1.0], (0.0, 2.0), &opts);
    assert!(matches!(r, Err(OdeError::StepUnderflow { .. }) | Err(OdeError::MaxStepsExceeded { .. })));
}
