//! Free resolvent `R₀(z) = (U₀ − e^{iz})^{−1}` and its boundary values
//! `R₀(θ ± i0)` as an explicit lattice kernel.
//!
//! Writing `ζ = e^{iξ}` and `w = e^{iz}`,
//!
//! ```text
//! R̂₀(ξ, z) = M(ζ) / Q(ζ),   Q(ζ) = −w a ζ² + (ad − bc + w²) ζ − w d,
//! M(ζ) = [[d − wζ, −bζ²], [−c, aζ² − wζ]],
//! ```
//!
//! so the kernel `G₀(x) = (2π)^{−1} ∫ e^{ixξ} R̂₀ dξ` is a contour integral of
//! `ζ^{x−1} M(ζ)/Q(ζ)` around the unit circle. The two roots of `Q` satisfy
//! `ζ₁ζ₂ = d/a`, a unimodular number, so exactly one lies inside the circle
//! whenever `w` is off it:
//!
//! ```text
//! G₀(x) =  ζ_in^{x−1} M(ζ_in) / Q'(ζ_in)                  (x ≥ 1)
//! G₀(x) = −ζ_out^{x−1} M(ζ_out) / Q'(ζ_out) + δ_{x0} L    (x ≤ 0)
//! L = [[0, b/(wa)], [0, −1/w]]
//! ```
//!
//! On a band the roots sit on the circle. Approaching from `θ − i0`
//! (`|w| > 1`) pushes the root with `dθ/dξ < 0`, the right-moving one,
//! inside; from `θ + i0` the left-moving one goes inside.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dispersion::{self, bands, classify, BandKind, Gauge};
use crate::error::{Error, Result};
use crate::linalg::{self, cis, Mat2, Vec2, C64, ONE, ZERO};
use crate::quad;
use crate::walk::{make_coin, CoinParams, StateVector};

/// Which boundary value of the resolvent: `θ + i0` or `θ − i0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    /// Point `w = e^{iz}` at regularisation `ε` along `z = θ − i log(1 ∓ ε)`.
    pub fn regularised(self, theta: f64, eps: f64) -> C64 {
        let r = match self {
            Side::Plus => 1.0 - eps,
            Side::Minus => 1.0 + eps,
        };
        cis(theta) * r
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

/// `R̂₀(ξ, z)` for complex `z`.
pub fn resolvent_symbol(xi: f64, z: C64, params: &CoinParams) -> Result<Mat2> {
    let pdet = dispersion::dispersion_det(xi, z, params);
    if pdet.norm() < 1e-14 {
        return Err(Error::OnShell { xi, modulus: pdet.norm() });
    }
    let w = (C64::new(0.0, 1.0) * z).exp();
    let u = dispersion::symbol(xi, params);
    let adj = Mat2::new(u.d - w, -u.b, -u.c, u.a - w);
    Ok(adj.scaled(pdet.inv()))
}

/// Pole data for one root `ζ_k` of `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pole {
    log_zeta: C64,
    residue: Mat2,
}

impl Pole {
    fn new(zeta: C64, log_zeta: C64, w: C64, a: C64, b: C64, c: C64, d: C64) -> Self {
        let delta = a * d - b * c;
        let dq = -(w * a * zeta * 2.0) + delta + w * w;
        let z2 = zeta * zeta;
        let m = Mat2::new(d - w * zeta, -b * z2, -c, a * z2 - w * zeta);
        Pole { log_zeta, residue: m.scaled(dq.inv()) }
    }

    #[inline]
    fn at(&self, x: i64) -> Mat2 {
        let n = (x - 1) as f64;
        let pow = C64::from_polar((self.log_zeta.re * n).exp(), self.log_zeta.im * n);
        self.residue.scaled(pow)
    }
}

/// Lattice kernel `G₀(x; θ ± i0)` with a per-instance cache.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    theta: f64,
    side: Side,
    params: CoinParams,
    inside: Pole,
    outside: Pole,
    local: Mat2,
    cache: HashMap<i64, Mat2>,
}

impl GreenKernel {
    pub fn new(theta: f64, side: Side, params: &CoinParams) -> Result<Self> {
        let theta = angle::reduce(theta);
        let bp = classify(theta, &bands(params));
        let c0 = make_coin(params);
        let (a, b, c, d) = (c0.a, c0.b, c0.c, c0.d);
        let w = cis(theta);
        let (inside, outside) = match bp.kind {
            BandKind::Threshold => return Err(Error::Threshold { theta, margin: bp.margin }),
            BandKind::Band1 | BandKind::Band2 => {
                let [right, left] = dispersion::channel_roots(theta, params, Gauge::CANONICAL)?;
                let (zin, zout) = match side {
                    Side::Minus => (right.xi, left.xi),
                    Side::Plus => (left.xi, right.xi),
                };
                (
                    Pole::new(cis(zin), C64::new(0.0, zin), w, a, b, c, d),
                    Pole::new(cis(zout), C64::new(0.0, zout), w, a, b, c, d),
                )
            }
            BandKind::Gap => {
                let [z1, z2] = quadratic_roots(w, a, b, c, d);
                let (zin, zout) = if z1.norm() < z2.norm() { (z1, z2) } else { (z2, z1) };
                (Pole::new(zin, zin.ln(), w, a, b, c, d), Pole::new(zout, zout.ln(), w, a, b, c, d))
            }
        };
        let local = Mat2::new(ZERO, b / (w * a), ZERO, -w.inv());
        Ok(GreenKernel { theta, side, params: *params, inside, outside, local, cache: HashMap::new() })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn params(&self) -> &CoinParams {
        &self.params
    }

    /// `ζ` of the root used for `x ≥ 1` and for `x ≤ 0`.
    pub fn roots(&self) -> [C64; 2] {
        [self.inside.log_zeta.exp(), self.outside.log_zeta.exp()]
    }

    /// `G₀(x)` without touching the cache.
    pub fn eval(&self, x: i64) -> Mat2 {
        if x >= 1 {
            self.inside.at(x)
        } else {
            let g = -self.outside.at(x);
            if x == 0 {
                g + self.local
            } else {
                g
            }
        }
    }

    /// `G₀(x)`, memoised.
    pub fn get(&mut self, x: i64) -> Mat2 {
        if let Some(m) = self.cache.get(&x) {
            return *m;
        }
        let m = self.eval(x);
        self.cache.insert(x, m);
        m
    }

    /// `Σ_y G₀(x − y) f(y)`.
    pub fn apply_at(&self, f: &StateVector, x: i64) -> Vec2 {
        let mut acc = [ZERO, ZERO];
        for (y, v) in f.sites() {
            let g = self.eval(x - y).apply(v);
            acc[0] += g[0];
            acc[1] += g[1];
        }
        acc
    }
}

/// Roots of `Q(ζ) = −w a ζ² + (Δ + w²) ζ − w d` in cancellation-free form.
fn quadratic_roots(w: C64, a: C64, b: C64, c: C64, d: C64) -> [C64; 2] {
    let qa = -(w * a);
    let qb = a * d - b * c + w * w;
    let qc = -(w * d);
    let disc = (qb * qb - qa * qc * 4.0).sqrt();
    let s = if (qb + disc).norm() >= (qb - disc).norm() { qb + disc } else { qb - disc };
    let z1 = -s / (qa * 2.0);
    let z2 = qc / (qa * z1);
    [z1, z2]
}

/// `R₀(θ ± i0) f` on `[lo, hi]`.
pub fn free_resolvent_apply(
    f: &StateVector,
    theta: f64,
    side: Side,
    params: &CoinParams,
    lo: i64,
    hi: i64,
) -> Result<StateVector> {
    let g = GreenKernel::new(theta, side, params)?;
    Ok(StateVector::from_fn(lo, hi, |x| g.apply_at(f, x)))
}

/// `(2π)^{−1} ∫ e^{ixξ} (Û₀(ξ) − w)^{−1} dξ` by the `n`-point trapezoid rule.
pub fn green_trapezoid(x: i64, w: C64, params: &CoinParams, n: usize) -> Mat2 {
    let c0 = make_coin(params);
    let mut acc = Mat2::zero();
    for k in 0..n {
        let xi = -PI + TAU * k as f64 / n as f64;
        let z = cis(xi);
        let zi = z.conj();
        let m = Mat2::new(c0.a * z - w, c0.b * z, c0.c * zi, c0.d * zi - w);
        let inv = m.inverse().expect("regularised symbol is invertible");
        acc = acc + inv.scaled(cis(x as f64 * xi));
    }
    acc.scaled(C64::new(1.0 / n as f64, 0.0))
}

/// Regularisation levels for the limiting-absorption oracle.
pub const ORACLE_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Limiting-absorption value of `G₀(x; θ ± i0)` from trapezoid quadrature at
/// each `ε` in [`ORACLE_EPS`] followed by polynomial extrapolation to `ε = 0`.
pub fn green_oracle(x: i64, theta: f64, side: Side, params: &CoinParams) -> Mat2 {
    green_oracle_with(x, theta, side, params, &ORACLE_EPS)
}

/// [`green_oracle`] over a caller-chosen `ε` ladder. The extrapolation
/// remainder scales like `Π ε_k · (|x| dξ/dθ)^n`, so long distances and slow
/// branches need smaller `ε`.
pub fn green_oracle_with(x: i64, theta: f64, side: Side, params: &CoinParams, eps: &[f64]) -> Mat2 {
    let vals: Vec<Mat2> = eps
        .iter()
        .map(|&e| {
            let n = (64.0 / e).log2().ceil().exp2() as usize;
            green_trapezoid(x, side.regularised(theta, e), params, n.max(1024))
        })
        .collect();
    let mut out = Mat2::zero();
    for i in 0..2 {
        for j in 0..2 {
            let v: Vec<C64> = vals.iter().map(|m| m.0[i][j]).collect();
            out.0[i][j] = quad::extrapolate_to_zero(eps, &v);
        }
    }
    out
}

/// Coefficients `(α, β)` with `v = α e^{ixξ₁}a₁ + β e^{ixξ₂}a₂`.
pub fn plane_wave_coefficients(v: &Vec2, x: i64, roots: &[dispersion::MomentumRoot; 2]) -> [C64; 2] {
    let basis = Mat2::from_cols(roots[0].plane_wave(x), roots[1].plane_wave(x));
    let inv = basis.inverse().expect("distinct roots give independent plane waves");
    let c = inv.apply(v);
    [c[0], c[1]]
}

/// `F̃_{±,ε}(s) = ∫_{−π}^{π} e^{−isη} / (e^{iη} − 1 ± ε) dη` by adaptive quadrature.
pub fn appendix_f_eps(s: f64, eps: f64, sign: Side) -> C64 {
    let pm = match sign {
        Side::Plus => eps,
        Side::Minus => -eps,
    };
    let f = |eta: f64| cis(-s * eta) / (cis(eta) - 1.0 + pm);
    let breaks = peak_breaks(0.0, eps, -PI, PI);
    quad::adaptive_pieces(f, &breaks, 1e-11, 20_000).value
}

/// Breakpoints clustering geometrically around a peak of width `eps` at `centre`.
fn peak_breaks(centre: f64, eps: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if centre > lo && centre < hi {
        pts.push(centre);
        let mut h = eps;
        while h < (hi - lo) {
            for p in [centre - h, centre + h] {
                if p > lo && p < hi {
                    pts.push(p);
                }
            }
            h *= 4.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn heaviside(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `K(a) = ∫₀¹ u^a/(1+u) du` for `a ≥ 0`.
fn k_integral(a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    quad::adaptive(|u| C64::new(u.powf(a) / (1.0 + u), 0.0), 0.0, 1.0, 1e-14, 2000).value.re
}

/// `I₊(s) = H(−s−1) sin(πs)/π ∫₀^∞ e^{sτ}/(e^{−τ}+1) dτ`.
pub fn appendix_i_plus(s: f64) -> f64 {
    if s + 1.0 >= 0.0 {
        return 0.0;
    }
    // u = e^{−τ} turns the integral into K(−s−1)
    (PI * s).sin() / PI * k_integral(-s - 1.0)
}

/// `I₋(s) = H(s+1) sin(πs)/π ∫_{−∞}^0 e^{sτ}/(e^{−τ}+1) dτ`.
pub fn appendix_i_minus(s: f64) -> f64 {
    if s + 1.0 <= 0.0 {
        return 0.0;
    }
    // u = e^{τ} gives K(s) = 1/(s+1) − K(s+1); the pole cancels against sin(πs)
    let t = s + 1.0;
    let sinc = if t.abs() < 1e-8 { 1.0 - (PI * t).powi(2) / 6.0 } else { (PI * t).sin() / (PI * t) };
    -sinc - (PI * s).sin() / PI * k_integral(t)
}

/// `lim_{ε↓0} F̃_{±,ε}(s) = 2π(±H(∓(s+1)) + I₊(s) − I₋(s))`.
pub fn appendix_f_limit(s: f64, sign: Side) -> C64 {
    let h = match sign {
        Side::Plus => heaviside(-(s + 1.0)),
        Side::Minus => -heaviside(s + 1.0),
    };
    C64::new(TAU * (h + appendix_i_plus(s) - appendix_i_minus(s)), 0.0)
}

/// `S_{±,ε}(ω) = ∫_{θ₁}^{θ₂} dθ / (e^{i(ω−θ)} − 1 ± ε)`.
pub fn stone_integral(omega: f64, theta1: f64, theta2: f64, eps: f64, sign: Side) -> C64 {
    let pm = match sign {
        Side::Plus => eps,
        Side::Minus => -eps,
    };
    let f = |t: f64| (cis(omega - t) - 1.0 + pm).inv();
    let mut breaks = peak_breaks(omega, eps, theta1, theta2);
    for k in [-1.0, 1.0] {
        // periodic images of the peak
        let img = omega + k * TAU;
        if img > theta1 && img < theta2 {
            breaks.extend(peak_breaks(img, eps, theta1, theta2));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    quad::adaptive_pieces(f, &breaks, 1e-11, 20_000).value
}

/// `S_{+,ε}(ω) − S_{−,ε}(ω)`.
pub fn stone_gap(omega: f64, theta1: f64, theta2: f64, eps: f64) -> C64 {
    stone_integral(omega, theta1, theta2, eps, Side::Plus) - stone_integral(omega, theta1, theta2, eps, Side::Minus)
}

/// Applies `U₀ − e^{iθ}` to the kernel column `x ↦ G₀(x−y)e` and returns the
/// largest deviation from `δ_y e` over `x ∈ [lo, hi]`.
pub fn defining_relation_residual(kernel: &GreenKernel, lo: i64, hi: i64) -> f64 {
    let c0 = make_coin(kernel.params());
    let w = cis(kernel.theta());
    let mut worst: f64 = 0.0;
    for col in 0..2 {
        let g = |x: i64| kernel.eval(x).col(col);
        for x in lo..=hi {
            let r = g(x + 1);
            let l = g(x - 1);
            let here = g(x);
            let mut out = [c0.a * r[0] + c0.b * r[1] - w * here[0], c0.c * l[0] + c0.d * l[1] - w * here[1]];
            if x == 0 {
                out[col] -= ONE;
            }
            worst = worst.max(linalg::norm(&out));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn had() -> CoinParams {
        CoinParams::hadamard()
    }

    #[test]
    fn resolvent_symbol_inverts() {
        let params = CoinParams::new(0.8, 0.3, 0.7, 0.5).unwrap();
        let z = C64::new(1.1, -0.2);
        let r = resolvent_symbol(0.4, z, &params).unwrap();
        let u = dispersion::symbol(0.4, &params).matrix() - Mat2::scalar((C64::new(0.0, 1.0) * z).exp());
        assert!((u * r - Mat2::identity()).max_abs() < 1e-13);
    }

    #[test]
    fn resolvent_symbol_on_shell_fails() {
        let r = resolvent_symbol(FRAC_PI_2, C64::new(FRAC_PI_2, 0.0), &had());
        assert!(matches!(r, Err(Error::OnShell { .. })));
    }

    #[test]
    fn resolvent_symbol_matches_direct_inverse() {
        let z = C64::new(FRAC_PI_2, -(1.0f64 - 0.1).ln());
        let r = resolvent_symbol(0.0, z, &had()).unwrap();
        let w = (C64::new(0.0, 1.0) * z).exp();
        assert!((w - C64::new(0.0, 0.9)).norm() < 1e-15);
        let direct = (dispersion::symbol(0.0, &had()).matrix() - Mat2::scalar(w)).inverse().unwrap();
        assert!((r - direct).max_abs() < 1e-14);
    }

    #[test]
    fn kernel_satisfies_defining_relation() {
        for (theta, side) in [(FRAC_PI_2, Side::Minus), (1.2, Side::Plus), (0.1, Side::Minus), (3.6, Side::Minus)] {
            let g = GreenKernel::new(theta, side, &had()).unwrap();
            assert!(defining_relation_residual(&g, -100, 100) < 1e-12, "theta {theta}");
        }
    }

    #[test]
    fn gap_kernel_decays_exponentially() {
        let g = GreenKernel::new(0.1, Side::Minus, &had()).unwrap();
        let [zin, zout] = g.roots();
        assert!(zin.norm() < 1.0 && zout.norm() > 1.0);
        // least squares fit of log‖G(x)‖ against |x| on x ∈ [1, 40]
        let pts: Vec<(f64, f64)> = (1..=40).map(|x| (x as f64, g.eval(x).max_abs().ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let resid = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).abs()).fold(0.0, f64::max);
        assert!(slope < 0.0 && resid < 1e-6, "slope {slope} resid {resid}");
    }

    #[test]
    fn outgoing_side_selects_right_mover_on_the_right() {
        let params = had();
        let roots = dispersion::channel_roots(FRAC_PI_2, &params, Gauge::CANONICAL).unwrap();
        let g = GreenKernel::new(FRAC_PI_2, Side::Minus, &params).unwrap();
        for col in 0..2 {
            let right = plane_wave_coefficients(&g.eval(200).col(col), 200, &roots);
            assert!(right[1].norm() <= 1e-10 * right[0].norm());
            let left = plane_wave_coefficients(&g.eval(-200).col(col), -200, &roots);
            assert!(left[0].norm() <= 1e-10 * left[1].norm());
        }
    }

    #[test]
    fn residues_match_limiting_absorption_quadrature() {
        let params = CoinParams::new(0.8, 0.3, 0.7, 0.5).unwrap();
        let b = bands(&params);
        for (theta, side, x) in [
            (b.band1.midpoint(), Side::Minus, 2),
            (b.band2.midpoint() + 0.2, Side::Plus, -3),
            (b.band1.midpoint() - 0.3, Side::Plus, 0),
        ] {
            let g = GreenKernel::new(theta, side, &params).unwrap().eval(x);
            let o = green_oracle(x, theta, side, &params);
            assert!((g - o).max_abs() < 5e-8, "theta {theta} x {x}: {}", (g - o).max_abs());
        }
    }

    #[test]
    fn appendix_integer_values() {
        assert!((appendix_f_limit(-2.0, Side::Plus) - C64::new(TAU, 0.0)).norm() < 1e-12);
        assert!(appendix_f_limit(3.0, Side::Plus).norm() < 1e-12);
        let v = appendix_f_eps(-2.0, 1e-3, Side::Plus);
        assert!((v - C64::new(TAU, 0.0)).norm() < 1e-2);
        assert!(appendix_f_eps(2.0, 1e-3, Side::Plus).norm() < 1e-2);
    }

    #[test]
    fn i_plus_obeys_its_bound() {
        for s in [-1.3, -2.7, -5.5, -10.25] {
            let bound = ((PI * (s + 1.0)).sin() / (PI * (s + 1.0))).abs();
            assert!(appendix_i_plus(s).abs() <= bound + 1e-14);
        }
    }

    #[test]
    fn stone_gap_dichotomy() {
        let (t1, t2) = (1.0, 2.5);
        let inside = stone_gap(1.75, t1, t2, 1e-4);
        assert!((inside - C64::new(TAU, 0.0)).norm() < 1e-2);
        assert!(stone_gap(3.0, t1, t2, 1e-4).norm() < 1e-2);
    }
}
