//! Band structure of the free walk `U₀`: the symbol `Û₀(ξ)`, quasi-energy
//! bands and thresholds, on-shell momenta with their group velocities and
//! eigenvectors, and the spectral transform `F₀(θ)` with its adjoint.
//!
//! Fourier convention: `f̂(ξ) = (2π)^{−1/2} Σₓ e^{−ixξ} f(x)`. With it the
//! symbol is `Û₀(ξ) = [[a e^{iξ}, b e^{iξ}], [c e^{−iξ}, d e^{−iξ}]]`.
//!
//! A plane wave `e^{ixξ} a_j(ξ)` evolves as `e^{itθ_j(ξ)}`, so a packet built
//! around it travels with velocity `−dθ/dξ`. `MomentumRoot::group_velocity`
//! stores `dθ/dξ`; [`MomentumRoot::transport_velocity`] gives the direction
//! of motion, which is what labels the right- and left-moving channels.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::linalg::{self, cis, Mat2, Vec2, C64, ZERO};
use crate::quad::CompositeGauss;
use crate::walk::{make_coin, Coin, CoinParams, StateVector};

/// Distance (radians) below which an angle counts as a threshold.
pub const THRESHOLD_TOL: f64 = 1e-6;

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Û₀(ξ)`.
pub fn symbol(xi: f64, params: &CoinParams) -> Coin {
    let c = make_coin(params);
    let z = cis(xi);
    let zi = z.conj();
    Coin { a: c.a * z, b: c.b * z, c: c.c * zi, d: c.d * zi }
}

/// `det(Û₀(ξ) − e^{iz})` in closed form, for complex `z`.
pub fn dispersion_det(xi: f64, z: C64, params: &CoinParams) -> C64 {
    let CoinParams { p, alpha, gamma, .. } = *params;
    let half = gamma / 2.0;
    let phase = (C64::new(0.0, 1.0) * (z + half)).exp();
    let inner = -(xi + alpha - half).cos() + (z - half).cos() / p;
    phase * inner * (2.0 * p)
}

#[inline]
fn shifted_momentum(xi: f64, params: &CoinParams) -> f64 {
    xi + params.alpha - params.gamma / 2.0
}

/// `θ(ξ) = γ/2 + arccos(p cos(ξ + α − γ/2))`, the phase of `λ₁(ξ)`.
pub fn quasi_energy(xi: f64, params: &CoinParams) -> f64 {
    let c = (params.p * shifted_momentum(xi, params).cos()).clamp(-1.0, 1.0);
    angle::reduce(params.gamma / 2.0 + c.acos())
}

/// Closed arc `[start, end]` traversed counter-clockwise; both ends in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub start: f64,
    pub end: f64,
}

impl Band {
    pub fn contains(&self, theta: f64) -> bool {
        angle::in_arc(theta, self.start, self.end)
    }

    pub fn width(&self) -> f64 {
        let w = angle::reduce(self.end - self.start);
        if w == 0.0 && self.end != self.start {
            TAU
        } else {
            w
        }
    }

    /// Midpoint of the arc, reduced.
    pub fn midpoint(&self) -> f64 {
        angle::reduce(self.start + 0.5 * self.width())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub band1: Band,
    pub band2: Band,
    /// The four band endpoints: band1 start, band1 end, band2 start, band2 end.
    pub thresholds: [f64; 4],
    pub params: CoinParams,
}

impl BandStructure {
    /// The two spectral gaps as arcs (band1 end → band2 start, band2 end → band1 start).
    pub fn gaps(&self) -> [Band; 2] {
        [
            Band { start: self.band1.end, end: self.band2.start },
            Band { start: self.band2.end, end: self.band1.start },
        ]
    }

    pub fn has_gaps(&self) -> bool {
        self.params.p < 1.0
    }

    pub fn band(&self, branch: u8) -> Band {
        if branch == 1 {
            self.band1
        } else {
            self.band2
        }
    }
}

pub fn bands(params: &CoinParams) -> BandStructure {
    let e = params.p.clamp(-1.0, 1.0).acos();
    let h = params.gamma / 2.0;
    let raw = [h + e, h + PI - e, h + PI + e, h - e];
    let t = raw.map(angle::reduce);
    BandStructure {
        band1: Band { start: t[0], end: t[1] },
        band2: Band { start: t[2], end: t[3] },
        thresholds: t,
        params: *params,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandKind {
    Band1,
    Band2,
    Gap,
    Threshold,
}

impl BandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandKind::Band1 => "band1",
            BandKind::Band2 => "band2",
            BandKind::Gap => "gap",
            BandKind::Threshold => "threshold",
        }
    }

    pub fn branch(&self) -> Option<u8> {
        match self {
            BandKind::Band1 => Some(1),
            BandKind::Band2 => Some(2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub theta: f64,
    pub kind: BandKind,
    pub margin: f64,
}

pub fn classify(theta: f64, bands: &BandStructure) -> BandPoint {
    classify_with_tol(theta, bands, THRESHOLD_TOL)
}

pub fn classify_with_tol(theta: f64, bands: &BandStructure, tol: f64) -> BandPoint {
    let theta = angle::reduce(theta);
    let margin = bands
        .thresholds
        .iter()
        .map(|&t| angle::circular_distance(theta, t))
        .fold(f64::INFINITY, f64::min);
    let kind = if margin <= tol {
        BandKind::Threshold
    } else if bands.band1.contains(theta) {
        BandKind::Band1
    } else if bands.band2.contains(theta) {
        BandKind::Band2
    } else {
        BandKind::Gap
    };
    BandPoint { theta, kind, margin }
}

/// Smooth rephasing `a_j(ξ) ↦ e^{i(offset + slope·sin ξ)} a_j(ξ)` applied on
/// top of the canonical gauge. The default is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gauge {
    pub offset: f64,
    pub slope: f64,
}

impl Gauge {
    pub const CANONICAL: Gauge = Gauge { offset: 0.0, slope: 0.0 };

    pub fn phase(&self, xi: f64) -> C64 {
        if self.offset == 0.0 && self.slope == 0.0 {
            linalg::ONE
        } else {
            cis(self.offset + self.slope * xi.sin())
        }
    }
}

/// Unit vector with the largest-magnitude entry made real and nonnegative.
fn canonical(v: Vec2) -> Vec2 {
    let n = linalg::norm(&v);
    let k = if v[1].norm() > v[0].norm() { 1 } else { 0 };
    let m = v[k].norm();
    let phase = if m > 0.0 { v[k].conj() / m } else { linalg::ONE };
    let mut out = linalg::scale(&v, phase / n);
    out[k] = C64::new(m / n, 0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    /// `[λ₁, λ₂] = [e^{iθ(ξ)}, e^{i(γ−θ(ξ))}]`.
    pub lambda: [C64; 2],
    pub vectors: [Vec2; 2],
}

impl Eigenpair {
    /// `P_j = a_j a_j*`.
    pub fn projection(&self, j: usize) -> Mat2 {
        let a = self.vectors[j];
        Mat2::new(a[0] * a[0].conj(), a[0] * a[1].conj(), a[1] * a[0].conj(), a[1] * a[1].conj())
    }
}

pub fn eigenpair(xi: f64, params: &CoinParams) -> Result<Eigenpair> {
    eigenpair_gauged(xi, params, Gauge::CANONICAL)
}

pub fn eigenpair_gauged(xi: f64, params: &CoinParams, gauge: Gauge) -> Result<Eigenpair> {
    let theta = quasi_energy(xi, params);
    let lambda = [cis(theta), cis(params.gamma - theta)];
    if (lambda[0] - lambda[1]).norm() < 1e-8 {
        return Err(Error::Degenerate { xi });
    }
    let u = symbol(xi, params).matrix();
    let g = gauge.phase(xi);
    let vectors = lambda.map(|l| linalg::scale(&canonical(u.eigenvector(l)), g));
    Ok(Eigenpair { lambda, vectors })
}

/// One on-shell momentum at a band-interior quasi-energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumRoot {
    pub xi: f64,
    pub branch: u8,
    /// `dθ/dξ` along the branch.
    pub group_velocity: f64,
    /// `dξ/dθ = 1/|dθ/dξ|`.
    pub jacobian: f64,
    pub eigenvector: Vec2,
}

impl MomentumRoot {
    /// Velocity of a packet built on this root, `−dθ/dξ`.
    pub fn transport_velocity(&self) -> f64 {
        -self.group_velocity
    }

    pub fn is_right_moving(&self) -> bool {
        self.transport_velocity() > 0.0
    }

    /// `e^{ixξ} a_j(ξ)`.
    #[inline]
    pub fn plane_wave(&self, x: i64) -> Vec2 {
        linalg::scale(&self.eigenvector, cis(x as f64 * self.xi))
    }
}

/// Both roots on branch `branch` at `theta`, without band or threshold checks.
/// The arccos argument is clamped, so this stays finite arbitrarily close to a
/// threshold (where the Jacobian blows up).
pub fn roots_unchecked(theta: f64, branch: u8, params: &CoinParams, gauge: Gauge) -> Result<[MomentumRoot; 2]> {
    let p = params.p;
    let half = params.gamma / 2.0;
    let c = ((theta - half).cos() / p).clamp(-1.0, 1.0);
    let phi = c.acos();
    let s = (theta - half).sin().abs();
    let sign = if branch == 1 { 1.0 } else { -1.0 };
    let make = |phi: f64| -> Result<MomentumRoot> {
        let xi = angle::wrap_pi(phi - params.alpha + half);
        let pe = eigenpair_gauged(xi, params, gauge)?;
        let v = sign * p * phi.sin() / s;
        Ok(MomentumRoot {
            xi,
            branch,
            group_velocity: v,
            jacobian: 1.0 / v.abs(),
            eigenvector: pe.vectors[(branch - 1) as usize],
        })
    };
    Ok([make(phi)?, make(-phi)?])
}

/// On-shell momenta at `theta`. Empty in a gap; two roots of one branch
/// inside a band, ordered as `(+arccos, −arccos)`.
pub fn momentum_roots(theta: f64, params: &CoinParams) -> Result<Vec<MomentumRoot>> {
    momentum_roots_gauged(theta, params, Gauge::CANONICAL)
}

pub fn momentum_roots_gauged(theta: f64, params: &CoinParams, gauge: Gauge) -> Result<Vec<MomentumRoot>> {
    let bp = classify(theta, &bands(params));
    match bp.kind {
        BandKind::Gap => Ok(Vec::new()),
        BandKind::Threshold => Err(Error::Threshold { theta: bp.theta, margin: bp.margin }),
        BandKind::Band1 | BandKind::Band2 => {
            Ok(roots_unchecked(bp.theta, bp.kind.branch().unwrap(), params, gauge)?.to_vec())
        }
    }
}

/// The two roots at a band-interior `theta` as `[right-moving, left-moving]`.
pub fn channel_roots(theta: f64, params: &CoinParams, gauge: Gauge) -> Result<[MomentumRoot; 2]> {
    let roots = momentum_roots_gauged(theta, params, gauge)?;
    if roots.len() != 2 {
        return Err(Error::NotInBand { theta: angle::reduce(theta) });
    }
    Ok(if roots[0].is_right_moving() { [roots[0], roots[1]] } else { [roots[1], roots[0]] })
}

/// An element of the on-shell space `h(θ)`: one amplitude per momentum root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAmplitude {
    pub theta: f64,
    pub roots: Vec<MomentumRoot>,
    pub amplitudes: Vec<C64>,
    pub gauge: Gauge,
}

impl SpectralAmplitude {
    pub fn new(theta: f64, roots: Vec<MomentumRoot>, amplitudes: Vec<C64>, gauge: Gauge) -> Self {
        assert_eq!(roots.len(), amplitudes.len());
        SpectralAmplitude { theta, roots, amplitudes, gauge }
    }

    /// `Σ_k |φ_k|² dξ/dθ`.
    pub fn norm_sqr(&self) -> f64 {
        self.roots.iter().zip(&self.amplitudes).map(|(r, a)| a.norm_sqr() * r.jacobian).sum()
    }

    /// `(φ, ψ)_{h(θ)}` for amplitudes over the same roots.
    pub fn inner(&self, other: &SpectralAmplitude) -> C64 {
        self.roots
            .iter()
            .zip(self.amplitudes.iter().zip(&other.amplitudes))
            .map(|(r, (a, b))| a * b.conj() * r.jacobian)
            .sum()
    }
}

/// `(2π)^{−1/2} Σₓ e^{−ixξ} f(x)`.
pub fn fourier(f: &StateVector, xi: f64) -> Vec2 {
    let mut acc = [ZERO, ZERO];
    for (x, v) in f.sites() {
        let e = cis(-(x as f64) * xi);
        acc[0] += v[0] * e;
        acc[1] += v[1] * e;
    }
    linalg::scale(&acc, C64::new(INV_SQRT_2PI, 0.0))
}

fn transform_on_roots(f: &StateVector, theta: f64, roots: Vec<MomentumRoot>, gauge: Gauge) -> SpectralAmplitude {
    let amplitudes = roots.iter().map(|r| linalg::inner(&fourier(f, r.xi), &r.eigenvector)).collect();
    SpectralAmplitude::new(theta, roots, amplitudes, gauge)
}

/// `F₀(θ)f`: amplitude `(f̂(ξ), a_j(ξ))` at each on-shell momentum.
pub fn f0_transform(f: &StateVector, theta: f64, params: &CoinParams) -> Result<SpectralAmplitude> {
    f0_transform_gauged(f, theta, params, Gauge::CANONICAL)
}

pub fn f0_transform_gauged(f: &StateVector, theta: f64, params: &CoinParams, gauge: Gauge) -> Result<SpectralAmplitude> {
    let roots = momentum_roots_gauged(theta, params, gauge)?;
    Ok(transform_on_roots(f, angle::reduce(theta), roots, gauge))
}

/// `(F₀(θ)*φ)(x) = (2π)^{−1/2} Σ_k (dξ/dθ) e^{ixξ_k} φ_k a_k` on `[lo, hi]`.
pub fn f0_adjoint(phi: &SpectralAmplitude, lo: i64, hi: i64) -> StateVector {
    StateVector::from_fn(lo, hi, |x| f0_adjoint_at(phi, x))
}

#[inline]
pub fn f0_adjoint_at(phi: &SpectralAmplitude, x: i64) -> Vec2 {
    let mut acc = [ZERO, ZERO];
    for (r, a) in phi.roots.iter().zip(&phi.amplitudes) {
        let w = r.plane_wave(x);
        let s = *a * (r.jacobian * INV_SQRT_2PI);
        acc[0] += w[0] * s;
        acc[1] += w[1] * s;
    }
    acc
}

/// `∫ ‖F₀(θ)f‖²_{h(θ)} dθ` over both bands with the substitution
/// `θ = mid + halfwidth·sin u` and a composite Gauss rule of `panels × order`
/// nodes per band.
pub fn spectral_norm_integral(f: &StateVector, params: &CoinParams, panels: usize, order: usize) -> Result<f64> {
    let bs = bands(params);
    let rule = CompositeGauss::new(panels, order);
    let mut total = 0.0;
    for branch in [1u8, 2] {
        let band = bs.band(branch);
        let half = 0.5 * band.width();
        let mid = band.start + half;
        let mut sum = 0.0;
        for (u, w) in rule.mapped(-PI / 2.0, PI / 2.0) {
            let theta = mid + half * u.sin();
            let roots = roots_unchecked(theta, branch, params, Gauge::CANONICAL)?;
            let amp = transform_on_roots(f, theta, roots.to_vec(), Gauge::CANONICAL);
            sum += w * amp.norm_sqr() * half * u.cos();
        }
        total += sum;
    }
    Ok(total)
}

/// CSV table `theta, kind, xi_1, xi_2, v_1, v_2, jacobian` over a θ grid.
/// Gap and threshold rows leave the root columns empty.
pub fn root_sweep_csv(params: &CoinParams, thetas: &[f64]) -> String {
    let bs = bands(params);
    let mut out = String::from("theta,kind,xi_1,xi_2,v_1,v_2,jacobian\n");
    for &theta in thetas {
        let bp = classify(theta, &bs);
        let _ = write!(out, "{},{}", crate::fmt_f64(theta), bp.kind.as_str());
        match momentum_roots(theta, params) {
            Ok(r) if r.len() == 2 => {
                let _ = writeln!(
                    out,
                    ",{},{},{},{},{}",
                    crate::fmt_f64(r[0].xi),
                    crate::fmt_f64(r[1].xi),
                    crate::fmt_f64(r[0].group_velocity),
                    crate::fmt_f64(r[1].group_velocity),
                    crate::fmt_f64(r[0].jacobian)
                );
            }
            _ => out.push_str(",,,,,\n"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn had() -> CoinParams {
        CoinParams::hadamard()
    }

    #[test]
    fn symbol_at_zero_and_quarter() {
        let s = FRAC_1_SQRT_2;
        let u = symbol(0.0, &had()).matrix();
        assert!((u - Mat2::new(C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0))).max_abs() < 1e-15);
        let u = symbol(FRAC_PI_2, &had()).matrix();
        let expect = Mat2::new(C64::new(0.0, s), C64::new(0.0, s), C64::new(0.0, s), C64::new(0.0, -s));
        assert!((u - expect).max_abs() < 1e-15);
        assert!(u.unitarity_defect() < 1e-15);
    }

    #[test]
    fn det_formula_examples() {
        assert!(dispersion_det(FRAC_PI_2, C64::new(FRAC_PI_2, 0.0), &had()).norm() < 1e-15);
        let p1 = CoinParams::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(dispersion_det(0.7, C64::new(0.7, 0.0), &p1).norm() < 1e-15);
    }

    #[test]
    fn quasi_energy_examples() {
        let p1 = CoinParams::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert!((quasi_energy(0.3, &p1) - 0.3).abs() < 1e-15);
        assert!((quasi_energy(FRAC_PI_2, &had()) - FRAC_PI_2).abs() < 1e-15);
        assert!((quasi_energy(0.0, &had()) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn hadamard_bands_and_shift() {
        let b = bands(&had());
        assert_eq!(b.thresholds, [FRAC_PI_4, 3.0 * FRAC_PI_4, 5.0 * FRAC_PI_4, 7.0 * FRAC_PI_4]);
        let g = bands(&CoinParams::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_PI_2).unwrap());
        for k in 0..4 {
            assert!(angle::circular_distance(g.thresholds[k], b.thresholds[k] + FRAC_PI_4) < 1e-14);
        }
    }

    #[test]
    fn classification_examples() {
        let b = bands(&had());
        let bp = classify(FRAC_PI_2, &b);
        assert_eq!(bp.kind, BandKind::Band1);
        assert!((bp.margin - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(classify(0.0, &b).kind, BandKind::Gap);
        assert_eq!(classify(FRAC_PI_4, &b).kind, BandKind::Threshold);
        assert_eq!(classify(3.0 * FRAC_PI_2, &b).kind, BandKind::Band2);
    }

    #[test]
    fn hadamard_roots_at_quarter_turn() {
        let r = momentum_roots(FRAC_PI_2, &had()).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].xi - FRAC_PI_2).abs() < 1e-15 && (r[0].group_velocity - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((r[1].xi + FRAC_PI_2).abs() < 1e-15 && (r[1].group_velocity + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(momentum_roots(0.1, &had()).unwrap().is_empty());
        assert!(matches!(momentum_roots(FRAC_PI_4, &had()), Err(Error::Threshold { .. })));
    }

    #[test]
    fn roots_match_dense_scan_of_determinant() {
        // locate sign changes of Re(e^{-i(z+γ/2)} p(ξ,z)) on a fine grid
        let params = had();
        let theta = FRAC_PI_2;
        let n = 1_000_000;
        let g = |xi: f64| (dispersion_det(xi, C64::new(theta, 0.0), &params) * cis(-theta)).re;
        let mut found = Vec::new();
        let mut prev = g(-PI);
        for k in 1..=n {
            let xi = -PI + TAU * k as f64 / n as f64;
            let cur = g(xi);
            if prev.signum() != cur.signum() {
                found.push(xi);
            }
            prev = cur;
        }
        assert_eq!(found.len(), 2);
        let roots = momentum_roots(theta, &params).unwrap();
        for r in &roots {
            assert!(found.iter().any(|f| (f - r.xi).abs() < 1e-5));
        }
    }

    #[test]
    fn hadamard_eigenvector_at_quarter_turn() {
        let e = eigenpair(FRAC_PI_2, &had()).unwrap();
        assert!((e.lambda[0] - C64::new(0.0, 1.0)).norm() < 1e-15);
        let raw = [1.0, 2f64.sqrt() - 1.0];
        let n = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
        assert!((e.vectors[0][0] - C64::new(raw[0] / n, 0.0)).norm() < 1e-15);
        assert!((e.vectors[0][1] - C64::new(raw[1] / n, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decoupled_eigenvectors_are_standard_basis() {
        let p1 = CoinParams::new(1.0, 0.4, 0.0, 0.2).unwrap();
        let e = eigenpair(0.9, &p1).unwrap();
        let u = symbol(0.9, &p1).matrix();
        for j in 0..2 {
            let v = e.vectors[j];
            assert!(v[0].im == 0.0 && v[1].im == 0.0);
            assert!((v[0].re * v[1].re).abs() < 1e-15);
            assert!(linalg::norm(&linalg::sub(&u.apply(&v), &linalg::scale(&v, e.lambda[j]))) < 1e-14);
        }
    }

    #[test]
    fn degenerate_momentum_is_rejected() {
        let p1 = CoinParams::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(eigenpair(0.0, &p1), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn transform_of_eigenvector_delta() {
        let params = CoinParams::new(0.8, 0.3, 0.7, 0.5).unwrap();
        let b = bands(&params);
        let theta = b.band1.midpoint() + 0.1;
        let roots = momentum_roots(theta, &params).unwrap();
        let f = StateVector::delta_at(0, roots[0].eigenvector);
        let amp = f0_transform(&f, theta, &params).unwrap();
        assert!((amp.amplitudes[0] - C64::new(INV_SQRT_2PI, 0.0)).norm() < 1e-14);
        // other-branch eigenvector at the same ξ is orthogonal
        let pair = eigenpair(roots[0].xi, &params).unwrap();
        assert!(linalg::inner(&pair.vectors[1], &pair.vectors[0]).norm() < 1e-14);
        let zero = f0_transform(&StateVector::on_range(-3, 3), theta, &params).unwrap();
        assert!(zero.amplitudes.iter().all(|a| *a == ZERO));
    }

    #[test]
    fn adjoint_single_root_is_scaled_plane_wave() {
        let params = had();
        let theta = 1.3;
        let roots = momentum_roots(theta, &params).unwrap();
        let phi = SpectralAmplitude::new(theta, roots.clone(), vec![linalg::ONE, ZERO], Gauge::CANONICAL);
        let u = f0_adjoint(&phi, -5, 5);
        for (x, v) in u.sites() {
            let w = linalg::scale(&roots[0].plane_wave(x), C64::new(INV_SQRT_2PI * roots[0].jacobian, 0.0));
            assert!(linalg::norm(&linalg::sub(v, &w)) < 1e-15);
        }
    }

    #[test]
    fn sweep_csv_has_header_and_rows() {
        let csv = root_sweep_csv(&had(), &[0.1, FRAC_PI_2]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "theta,kind,xi_1,xi_2,v_1,v_2,jacobian");
        assert!(lines[1].contains(",gap,"));
        assert!(lines[2].contains(",band1,"));
    }
}
