#![no_main]

use arbitrary::Arbitrary;
use libfuzzer_sys::fuzz_target;
use qwscatter::dispersion::{bands, classify, momentum_roots, BandKind};
use qwscatter::CoinParams;

#[derive(Debug, Arbitrary)]
struct Input {
    p: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    theta: f64,
}

fuzz_target!(|i: Input| {
    let Ok(params) = CoinParams::new(i.p, i.alpha, i.beta, i.gamma) else { return };
    if !i.theta.is_finite() {
        return;
    }
    let bs = bands(&params);
    let point = classify(i.theta, &bs);
    assert!((0.0..std::f64::consts::TAU).contains(&point.theta));
    match (point.kind, momentum_roots(i.theta, &params)) {
        (BandKind::Gap, Ok(r)) => assert!(r.is_empty()),
        (BandKind::Threshold, r) => assert!(r.is_err()),
        (BandKind::Band1 | BandKind::Band2, Ok(r)) => assert_eq!(r.len(), 2),
        (k, r) => panic!("{k:?} gave {r:?}"),
    }
});
