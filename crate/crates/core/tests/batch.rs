use moving_frames::batch::{evaluate_many, map, parallel_available, sweep_se2, sweep_se3, Mode};
use moving_frames::expr::{parse, Compiled, InvariantJet};
use moving_frames::ode::OdeOptions;
use moving_frames::se2::derive_el_se2;
use moving_frames::se3::derive_el_se3;

#[test]
fn default_mode_follows_feature() {
    assert_eq!(Mode::default() == Mode::Parallel, parallel_available());
}

#[test]
fn map_preserves_order() {
    let xs: Vec<u64> = (0..10_000).collect();
    let a = map(&xs, Mode::Sequential, |x| x * x);
    let b = map(&xs, Mode::Parallel, |x| x * x);
    assert_eq!(a, b);
}

#[test]
fn evaluation_is_mode_independent() {
    let d = derive_el_se3(&parse("kappa^2 + tau^2").unwrap());
    let e = Compiled::new(&d.e_z);
    let jets: Vec<InvariantJet> = (0..2000)
        .map(|i| {
            let t = i as f64 * 0.001;
            InvariantJet::new(vec![0.5 + t, 0.1, -t, 0.2], vec![t, 0.3, 0.1, -0.2, 0.05], 0.0)
        })
        .collect();
    let a: Vec<f64> = evaluate_many(&e, &jets, Mode::Sequential).into_iter().map(Result::unwrap).collect();
    let b: Vec<f64> = evaluate_many(&e, &jets, Mode::Parallel).into_iter().map(Result::unwrap).collect();
    assert_eq!(a, b);
}

#[test]
fn sweeps_are_mode_independent() {
    let opts = OdeOptions::default();
    let d2 = derive_el_se2(&parse("kappa^2").unwrap()).unwrap();
    let jets2: Vec<InvariantJet> = (0..8).map(|i| InvariantJet::planar(vec![0.5 + 0.1 * i as f64, 0.0])).collect();
    let a = sweep_se2(&d2, &jets2, (0.0, 10.0), &opts, Mode::Sequential);
    let b = sweep_se2(&d2, &jets2, (0.0, 10.0), &opts, Mode::Parallel);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
    }

    let d3 = derive_el_se3(&parse("kappa^2 + tau^2").unwrap());
    let jets3: Vec<InvariantJet> = (0..4)
        .map(|i| InvariantJet::new(vec![0.24 + 0.01 * i as f64, 0.016], vec![-0.07, -0.04, 0.001], 0.0))
        .collect();
    let a = sweep_se3(&d3, &jets3, (0.0, 10.0), &opts, Mode::Sequential);
    let b = sweep_se3(&d3, &jets3, (0.0, 10.0), &opts, Mode::Parallel);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
    }
}
