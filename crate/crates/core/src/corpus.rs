//! The standard test corpus of five coin fields.

use crate::config::{CoinSpec, DefectSpec, FieldConfig, TailSpec};
use crate::walk::{make_coin, CoinField, CoinParams};

/// Names in corpus order.
pub const NAMES: [&str; 5] = ["one-defect", "bound-defect", "decaying", "barrier", "matrix-defects"];

fn coin(p: f64, alpha: f64, beta: f64, gamma: f64) -> CoinSpec {
    CoinSpec { p, alpha, beta, gamma }
}

fn hadamard() -> CoinSpec {
    CoinParams::hadamard().into()
}

fn base(free: CoinSpec) -> FieldConfig {
    FieldConfig { free, defects: Vec::new(), delta: None, eps0: None, m: None, tail: None }
}

/// Hadamard background with a real `p = 0.6` coin at the origin.
pub fn one_defect() -> FieldConfig {
    let mut c = base(hadamard());
    c.defects.push(DefectSpec { x: 0, coin: Some(coin(0.6, 0.0, 0.0, 0.0)), matrix: None });
    c
}

/// Hadamard background with a strong `p = 0.1` defect carrying a determinant
/// phase `γ = π/2`; it binds one state in each gap.
pub fn bound_defect() -> FieldConfig {
    let mut c = base(hadamard());
    c.defects.push(DefectSpec {
        x: 0,
        coin: Some(coin(0.1, 0.0, 0.0, std::f64::consts::FRAC_PI_2)),
        matrix: None,
    });
    c
}

/// `C₀ exp(i·0.5e^{−|x|/2}σ_y)` on a generic background, truncated at 1e−12.
pub fn decaying() -> FieldConfig {
    let mut c = base(coin(0.8, 0.3, 0.7, 0.5));
    c.eps0 = Some(0.5);
    c.m = Some(0.5);
    c.tail = Some(TailSpec { axis: [0.0, 1.0, 0.0], tol: 1e-12 });
    c
}

/// Five adjacent random-looking coins on a Hadamard background.
pub fn barrier() -> FieldConfig {
    let mut c = base(hadamard());
    let coins = [
        coin(0.83, 0.41, -1.27, 0.66),
        coin(0.37, -2.05, 0.93, 1.48),
        coin(0.92, 1.12, 2.61, -0.35),
        coin(0.55, -0.74, -0.18, 2.87),
        coin(0.68, 2.93, 1.36, -1.91),
    ];
    for (k, s) in coins.into_iter().enumerate() {
        c.defects.push(DefectSpec { x: k as i64 - 2, coin: Some(s), matrix: None });
    }
    c
}

/// Explicit-matrix defects on a background with nonzero determinant phase.
pub fn matrix_defects() -> FieldConfig {
    let free = coin(0.6, 0.2, -0.4, 1.0);
    let c0 = make_coin(&free.params().expect("valid corpus coin"));
    let mut c = base(free);
    for (x, eps, axis) in [(-1, 0.8, [1.0, 0.0, 0.0]), (1, -0.5, [0.3, -0.8, 0.5]), (4, 1.2, [0.0, 0.0, 1.0])] {
        let m = c0.rotated(eps, axis).matrix().0;
        let entries = [m[0][0], m[0][1], m[1][0], m[1][1]].map(|z| [z.re, z.im]);
        c.defects.push(DefectSpec { x, coin: None, matrix: Some(entries) });
    }
    c
}

pub fn configs() -> Vec<(&'static str, FieldConfig)> {
    NAMES.iter().copied().zip([one_defect(), bound_defect(), decaying(), barrier(), matrix_defects()]).collect()
}

/// All corpus fields, validated.
pub fn fields() -> Vec<(&'static str, CoinField)> {
    configs()
        .into_iter()
        .map(|(n, c)| (n, c.build().expect("corpus fields are valid")))
        .collect()
}

pub fn field(name: &str) -> Option<CoinField> {
    fields().into_iter().find(|(n, _)| *n == name).map(|(_, f)| f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_fields_build() {
        let f = fields();
        assert_eq!(f.len(), 5);
        assert_eq!(f[2].1.window(), (-53, 53));
        assert_eq!(f[3].1.deviations().len(), 5);
    }

    #[test]
    fn configs_roundtrip_through_json() {
        for (_, c) in configs() {
            let back = FieldConfig::from_json(&c.to_json()).unwrap();
            assert_eq!(back.build().unwrap(), c.build().unwrap());
        }
    }
}
