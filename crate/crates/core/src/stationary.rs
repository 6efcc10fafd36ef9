//! Stationary scattering for the perturbed walk.
//!
//! Solutions of `(U − e^{iθ})u = 0` are propagated site by site with the
//! transfer matrix
//!
//! ```text
//! T(x) = [[(w − b(x+1)c(x)/w)/a(x+1), −b(x+1)d(x)/(w a(x+1))],
//!         [c(x)/w,                     d(x)/w                ]],   w = e^{iθ},
//! ```
//!
//! which maps `u(x)` to `u(x+1)` and has `det T(x) = d(x)/a(x+1)`.
//!
//! Outside the window `[x_min, x_max]` every solution is a combination of the
//! right-moving plane wave `e_R(x) = e^{ixξ_R} a(ξ_R)` and the left-moving one
//! `e_L`. Amplitudes are always recorded in that order.
//!
//! The resolvent `R(θ − i0)` of the perturbed walk is realised by the
//! Lippmann–Schwinger equation `u = R₀f − R₀Vu` with `V = U − U₀`, which
//! closes on the finite support of the coin deviations.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dispersion::{self, bands, classify, BandKind, Gauge, MomentumRoot, SpectralAmplitude};
use crate::error::{Error, Result};
use crate::green::{plane_wave_coefficients, GreenKernel, Side};
use crate::linalg::{self, cis, Mat2, Vec2, C64, ZERO};
use crate::walk::{Coin, CoinField, StateVector};

/// Condition number above which transfer products are reported as ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

fn transfer_from_coins(w: C64, here: &Coin, next: &Coin) -> Mat2 {
    let wi = w.inv();
    let ai = next.a.inv();
    Mat2::new(
        (w - next.b * here.c * wi) * ai,
        -(next.b * here.d * wi * ai),
        here.c * wi,
        here.d * wi,
    )
}

/// `T(x, θ)`: maps `u(x)` to `u(x+1)` along solutions of `(U − e^{iθ})u = 0`.
pub fn transfer_matrix(theta: f64, x: i64, field: &CoinField) -> Result<Mat2> {
    let next = field.coin(x + 1);
    if next.a.norm() < field.delta() {
        return Err(Error::AmplitudeBound { site: x + 1, modulus: next.a.norm(), delta: field.delta() });
    }
    Ok(transfer_from_coins(cis(theta), &field.coin(x), &next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferProduct {
    /// `T(x_max)···T(x_min − 1)`, mapping `u(x_min − 1)` to `u(x_max + 1)`.
    pub matrix: Mat2,
    pub condition: f64,
    pub ill_conditioned: bool,
}

pub fn transfer_product(theta: f64, field: &CoinField) -> Result<TransferProduct> {
    let bp = classify(theta, &bands(field.params()));
    if bp.kind == BandKind::Threshold {
        return Err(Error::Threshold { theta: bp.theta, margin: bp.margin });
    }
    let (lo, hi) = field.window();
    let mut m = Mat2::identity();
    for x in (lo - 1)..=hi {
        m = transfer_matrix(theta, x, field)? * m;
    }
    let condition = m.condition_number();
    let ill_conditioned = !(condition <= ILL_CONDITIONED);
    if ill_conditioned {
        warn!("transfer product at theta = {theta} has condition number {condition:.3e}");
    }
    Ok(TransferProduct { matrix: m, condition, ill_conditioned })
}

/// Side from which the unit incoming wave arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Incidence {
    Left,
    Right,
}

/// A bounded solution of `(U − e^{iθ})u = 0` together with its plane-wave
/// content on both sides of the window.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenfunction {
    pub theta: f64,
    /// Values on the window widened by a few free sites on each side.
    pub values: StateVector,
    /// `[right-moving, left-moving]` roots.
    pub roots: [MomentumRoot; 2],
    /// Amplitudes of `(e_R, e_L)` for `x < x_min`.
    pub left: [C64; 2],
    /// Amplitudes of `(e_R, e_L)` for `x > x_max`.
    pub right: [C64; 2],
    pub residual: f64,
    /// Largest mismatch between stored values and the recorded plane waves
    /// on the free sites of `values`.
    pub match_error: f64,
    window: (i64, i64),
}

impl GeneralizedEigenfunction {
    /// Incoming amplitudes `(e_R at −∞, e_L at +∞)`.
    pub fn incoming(&self) -> [C64; 2] {
        [self.left[0], self.right[1]]
    }

    /// Outgoing amplitudes `(e_R at +∞, e_L at −∞)`.
    pub fn outgoing(&self) -> [C64; 2] {
        [self.right[0], self.left[1]]
    }

    /// Value at any site; plane waves outside the stored range.
    pub fn value_at(&self, x: i64) -> Vec2 {
        if x >= self.values.start && x <= self.values.end() {
            return self.values.get(x);
        }
        let amps = if x < self.window.0 { self.left } else { self.right };
        let r = self.roots[0].plane_wave(x);
        let l = self.roots[1].plane_wave(x);
        [amps[0] * r[0] + amps[1] * l[0], amps[0] * r[1] + amps[1] * l[1]]
    }

    pub fn sample(&self, lo: i64, hi: i64) -> StateVector {
        StateVector::from_fn(lo, hi, |x| self.value_at(x))
    }
}

const PAD: i64 = 8;

fn require_band(theta: f64, field: &CoinField) -> Result<f64> {
    let bp = classify(theta, &bands(field.params()));
    match bp.kind {
        BandKind::Threshold => Err(Error::Threshold { theta: bp.theta, margin: bp.margin }),
        BandKind::Gap => Err(Error::NotInBand { theta: bp.theta }),
        _ => Ok(bp.theta),
    }
}

/// Channel transfer matrix `M = B(x_max+1)^{−1} P B(x_min−1)`, mapping the
/// left plane-wave amplitudes to the right ones.
///
/// Accumulated one site at a time in the plane-wave frame, where a free
/// transfer step is the identity: `M = Π_x (I + D(x+1)^{−1} B₀^{−1}(T(x) − T₀) B₀ D(x))`
/// with `B(x) = B₀ D(x)`.
fn channel_matrix(theta: f64, field: &CoinField, roots: &[MomentumRoot; 2]) -> Result<Mat2> {
    let (lo, hi) = field.window();
    let bp = classify(theta, &bands(field.params()));
    if bp.kind == BandKind::Threshold {
        return Err(Error::Threshold { theta: bp.theta, margin: bp.margin });
    }
    let b0 = Mat2::from_cols(roots[0].eigenvector, roots[1].eigenvector);
    let b0_inv = b0.inverse().ok_or(Error::Degenerate { xi: roots[0].xi })?;
    let w = cis(theta);
    let c0 = field.free_coin();
    let t0 = transfer_from_coins(w, &c0, &c0);
    let phase = |x: i64| [cis(x as f64 * roots[0].xi), cis(x as f64 * roots[1].xi)];
    let mut m = Mat2::identity();
    for x in (lo - 1)..=hi {
        let dt = transfer_matrix(theta, x, field)? - t0;
        let mut k = b0_inv * dt * b0;
        let (din, dout) = (phase(x), phase(x + 1));
        for i in 0..2 {
            for j in 0..2 {
                k.0[i][j] *= din[j] / dout[i];
            }
        }
        m = (Mat2::identity() + k) * m;
    }
    Ok(m)
}

/// Scattering solution with a unit incoming wave from one side and no
/// incoming wave from the other.
pub fn scattering_solution(theta: f64, incident: Incidence, field: &CoinField) -> Result<GeneralizedEigenfunction> {
    scattering_solution_gauged(theta, incident, field, Gauge::CANONICAL)
}

pub fn scattering_solution_gauged(
    theta: f64,
    incident: Incidence,
    field: &CoinField,
    gauge: Gauge,
) -> Result<GeneralizedEigenfunction> {
    let theta = require_band(theta, field)?;
    let roots = dispersion::channel_roots(theta, field.params(), gauge)?;
    let m = channel_matrix(theta, field, &roots)?;
    let (m11, m12, m21, m22) = (m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]);
    let (left, right) = match incident {
        Incidence::Left => {
            let r = -m21 / m22;
            let t = m.det() / m22;
            ([linalg::ONE, r], [t, ZERO])
        }
        Incidence::Right => {
            let t = m22.inv();
            ([ZERO, t], [m12 * t, linalg::ONE])
        }
    };
    let _ = m11;
    Ok(build_solution(theta, field, roots, left, right))
}

/// Propagates the left plane-wave data through the window and records values.
fn build_solution(
    theta: f64,
    field: &CoinField,
    roots: [MomentumRoot; 2],
    left: [C64; 2],
    right: [C64; 2],
) -> GeneralizedEigenfunction {
    let (lo, hi) = field.window();
    let start = lo - 1 - PAD;
    let end = hi + 1 + PAD;
    let wave = |amps: [C64; 2], x: i64| -> Vec2 {
        let r = roots[0].plane_wave(x);
        let l = roots[1].plane_wave(x);
        [amps[0] * r[0] + amps[1] * l[0], amps[0] * r[1] + amps[1] * l[1]]
    };
    let mut values = StateVector::on_range(start, end);
    let w = cis(theta);
    for x in start..lo {
        values.values[(x - start) as usize] = wave(left, x);
    }
    let mut u = wave(left, lo - 1);
    for x in (lo - 1)..=hi {
        let t = transfer_from_coins(w, &field.coin(x), &field.coin(x + 1));
        u = t.apply(&u);
        values.values[(x + 1 - start) as usize] = u;
    }
    let mut match_error: f64 = 0.0;
    for x in (hi + 2)..=end {
        values.values[(x - start) as usize] = wave(right, x);
    }
    for x in (start..lo).chain((hi + 1)..=end) {
        let amps = if x < lo { left } else { right };
        let d = linalg::sub(&values.get(x), &wave(amps, x));
        match_error = match_error.max(linalg::norm(&d));
    }
    let res = residual(&values, theta, field);
    GeneralizedEigenfunction { theta, values, roots, left, right, residual: res, match_error, window: (lo, hi) }
}

/// `sup_x |((U − e^{iθ})u)(x)|` over the interior of the window of `u`.
pub fn residual(u: &StateVector, theta: f64, field: &CoinField) -> f64 {
    residual_with_source(u, None, theta, field)
}

/// `sup_x |((U − e^{iθ})u − f)(x)|` over the interior of the window of `u`.
pub fn residual_with_source(u: &StateVector, f: Option<&StateVector>, theta: f64, field: &CoinField) -> f64 {
    let w = cis(theta);
    let mut worst: f64 = 0.0;
    if u.len() < 3 {
        return 0.0;
    }
    for x in (u.start + 1)..u.end() {
        let r = field.coin(x + 1);
        let l = field.coin(x - 1);
        let (ur, ul, uh) = (u.get(x + 1), u.get(x - 1), u.get(x));
        let mut v = [r.a * ur[0] + r.b * ur[1] - w * uh[0], l.c * ul[0] + l.d * ul[1] - w * uh[1]];
        if let Some(f) = f {
            v = linalg::sub(&v, &f.get(x));
        }
        worst = worst.max(v[0].norm().max(v[1].norm()));
    }
    worst
}

/// `max_{R ∈ radii} (1/R) Σ_{|x|<R} |u(x)|²`.
pub fn bstar_norm(u: &StateVector, radii: &[usize]) -> f64 {
    let mut best: f64 = 0.0;
    for &r in radii {
        let r = r as i64;
        let s: f64 = ((1 - r)..r).map(|x| linalg::norm2(&u.get(x))).sum();
        best = best.max(s / r as f64);
    }
    best
}

/// `(Vu)(y)` on `[x_min − 1, x_max + 1]`; empty for a free field.
pub fn apply_v(field: &CoinField, u: &StateVector) -> StateVector {
    if field.deviations().is_empty() {
        return StateVector::zeros(0, 0);
    }
    let (lo, hi) = field.window();
    StateVector::from_fn(lo - 1, hi + 1, |y| {
        let dr = field.deviation(y + 1);
        let dl = field.deviation(y - 1);
        let ur = u.get(y + 1);
        let ul = u.get(y - 1);
        [dr.0[0][0] * ur[0] + dr.0[0][1] * ur[1], dl.0[1][0] * ul[0] + dl.0[1][1] * ul[1]]
    })
}

/// `(V*u)(x) = (C(x) − C₀)* (u₀(x−1), u₁(x+1))` on `[x_min, x_max]`.
pub fn apply_v_adjoint(field: &CoinField, u: &StateVector) -> StateVector {
    if field.deviations().is_empty() {
        return StateVector::zeros(0, 0);
    }
    let (lo, hi) = field.window();
    StateVector::from_fn(lo, hi, |x| {
        let d = field.deviation(x).adjoint();
        d.apply(&[u.get(x - 1)[0], u.get(x + 1)[1]])
    })
}

fn to_col(v: &[Vec2]) -> Mat<c64> {
    Mat::from_fn(2 * v.len(), 1, |i, _| v[i / 2][i % 2])
}

/// Factorised Lippmann–Schwinger system `(I + G_{W,W'} V) u_W = (R₀ f)_W` for
/// one quasi-energy, reusable across right-hand sides.
pub struct LsSolver {
    theta: f64,
    kernel: GreenKernel,
    field: CoinField,
    system: Option<(Mat<c64>, faer::linalg::solvers::ColPivQr<c64>)>,
}

impl LsSolver {
    /// Tolerance on the relative residual of the finite system.
    pub const RESIDUAL_TOL: f64 = 1e-8;

    pub fn new(theta: f64, field: &CoinField) -> Result<Self> {
        let kernel = GreenKernel::new(theta, Side::Minus, field.params())?;
        let theta = kernel.theta();
        let system = if field.deviations().is_empty() {
            None
        } else {
            let (lo, hi) = field.window();
            let n = (hi - lo + 1) as usize;
            let offsets: Vec<Mat2> = (-(n as i64) - 1..=(n as i64) + 1).map(|k| kernel.eval(k)).collect();
            let g = |k: i64| offsets[(k + n as i64 + 1) as usize];
            let devs: Vec<Mat2> = (lo..=hi).map(|z| field.deviation(z)).collect();
            let a = Mat::<c64>::from_fn(2 * n, 2 * n, |i, j| {
                let (xi, ci) = (i / 2, i % 2);
                let (zj, cj) = (j / 2, j % 2);
                let x = lo + xi as i64;
                let z = lo + zj as i64;
                let d = &devs[zj];
                let v = g(x - z + 1).0[ci][0] * d.0[0][cj] + g(x - z - 1).0[ci][1] * d.0[1][cj];
                if i == j {
                    v + 1.0
                } else {
                    v
                }
            });
            let qr = a.col_piv_qr();
            Some((a, qr))
        };
        Ok(LsSolver { theta, kernel, field: field.clone(), system })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `I + G_{W,W'} V`, absent for a free field.
    pub fn system_matrix(&self) -> Option<&Mat<c64>> {
        self.system.as_ref().map(|s| &s.0)
    }

    /// `u_W` for the window of the deviations.
    fn solve_window(&self, f: &StateVector) -> Result<StateVector> {
        let Some((a, qr)) = &self.system else {
            return Ok(StateVector::zeros(0, 0));
        };
        let (lo, hi) = self.field.window();
        let rhs: Vec<Vec2> = (lo..=hi).map(|x| self.kernel.apply_at(f, x)).collect();
        let b = to_col(&rhs);
        let mut sol = qr.solve(&b);
        // one step of iterative refinement
        let r = &b - a * &sol;
        sol += qr.solve(&r);
        let r = &b - a * &sol;
        let bnorm = b.norm_l2();
        let rel = if bnorm > 0.0 { r.norm_l2() / bnorm } else { r.norm_l2() };
        if !(rel <= Self::RESIDUAL_TOL) {
            return Err(Error::NearResonance { residual: rel });
        }
        let values = (0..(hi - lo + 1) as usize).map(|k| [sol[(2 * k, 0)], sol[(2 * k + 1, 0)]]).collect();
        Ok(StateVector { start: lo, values })
    }

    /// `R(θ − i0) f` on `[lo, hi]`.
    pub fn solve(&self, f: &StateVector, lo: i64, hi: i64) -> Result<StateVector> {
        let uw = self.solve_window(f)?;
        let vu = apply_v(&self.field, &uw);
        Ok(StateVector::from_fn(lo, hi, |x| {
            let r0f = self.kernel.apply_at(f, x);
            let corr = self.kernel.apply_at(&vu, x);
            linalg::sub(&r0f, &corr)
        }))
    }

    /// `R(θ − i0) f` on the deviation window only.
    pub fn solve_on_window(&self, f: &StateVector) -> Result<StateVector> {
        self.solve_window(f)
    }
}

/// `u = R(θ − i0) f` on `[lo, hi]`.
pub fn ls_solve(theta: f64, f: &StateVector, field: &CoinField, lo: i64, hi: i64) -> Result<StateVector> {
    LsSolver::new(theta, field)?.solve(f, lo, hi)
}

/// `F₊(θ)*φ = F₀*φ + e^{iθ} U R(θ − i0) V* F₀*φ` with its plane-wave content.
///
/// `φ` must carry amplitudes on the channel roots in `[right, left]` order.
pub fn f_plus_adjoint(phi: &SpectralAmplitude, field: &CoinField) -> Result<GeneralizedEigenfunction> {
    let theta = require_band(phi.theta, field)?;
    let roots: [MomentumRoot; 2] = [phi.roots[0], phi.roots[1]];
    let (wlo, whi) = field.window();
    let (lo, hi) = (wlo - 1 - PAD, whi + 1 + PAD);
    let free = dispersion::f0_adjoint(phi, lo - 1, hi + 1);
    let mut u = free.restricted(lo, hi);
    if !field.deviations().is_empty() {
        let solver = LsSolver::new(theta, field)?;
        let g = apply_v_adjoint(field, &free);
        let h = solver.solve(&g, lo - 1, hi + 1)?;
        let w = cis(theta);
        for x in lo..=hi {
            let r = field.coin(x + 1);
            let l = field.coin(x - 1);
            let (hr, hl) = (h.get(x + 1), h.get(x - 1));
            let uh = [r.a * hr[0] + r.b * hr[1], l.c * hl[0] + l.d * hl[1]];
            let v = u.get_mut(x).expect("inside range");
            v[0] += w * uh[0];
            v[1] += w * uh[1];
        }
    }
    let left = plane_wave_coefficients(&u.get(wlo - 1), wlo - 1, &roots);
    let right = plane_wave_coefficients(&u.get(whi + 1), whi + 1, &roots);
    let wave = |amps: [C64; 2], x: i64| -> Vec2 {
        let r = roots[0].plane_wave(x);
        let l = roots[1].plane_wave(x);
        [amps[0] * r[0] + amps[1] * l[0], amps[0] * r[1] + amps[1] * l[1]]
    };
    let mut match_error: f64 = 0.0;
    for x in (lo..wlo).chain((whi + 1)..=hi) {
        let amps = if x < wlo { left } else { right };
        match_error = match_error.max(linalg::norm(&linalg::sub(&u.get(x), &wave(amps, x))));
    }
    let res = residual(&u, theta, field);
    Ok(GeneralizedEigenfunction { theta, values: u, roots, left, right, residual: res, match_error, window: (wlo, whi) })
}

/// A gap eigenvector of `U`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundState {
    pub theta_ev: f64,
    #[serde(skip)]
    pub eigenvector: Option<StateVector>,
    /// `−ln|ζ_in|`, the exponential decay rate of both tails.
    pub decay_rate: f64,
    /// Largest deviation of `ln|u(x)|` from the fitted tail lines.
    pub decay_fit_residual: f64,
    pub norm: f64,
    /// `‖(U − e^{iθ})u‖ / ‖u‖`.
    pub residual: f64,
    /// Distance to the matched dense ring eigenphase, when validated.
    pub dense_match: Option<f64>,
    /// Fraction of the dense eigenvector mass within the localisation region.
    pub localization: Option<f64>,
}

/// Knobs for the gap scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundStateOptions {
    pub resolution: usize,
    /// Ring size (sites) for the dense cross-check; `0` skips it.
    pub ring_sites: usize,
    /// Distance kept from thresholds during the scan.
    pub edge_margin: f64,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions { resolution: 2000, ring_sites: 2000, edge_margin: 1e-6 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundStateReport {
    pub states: Vec<BoundState>,
    /// Gap eigenphases found by the dense ring check.
    pub dense_eigenphases: Vec<f64>,
    /// Dense gap eigenphases with no transfer-matching counterpart.
    pub unmatched_dense: Vec<f64>,
    pub used_dense_fallback: bool,
    pub warnings: Vec<String>,
}

/// Site where matching happens: the strongest deviation, or the window centre.
fn matching_site(field: &CoinField) -> i64 {
    let (lo, hi) = field.window();
    field
        .deviations()
        .keys()
        .copied()
        .max_by(|x, y| field.deviation(*x).max_abs().total_cmp(&field.deviation(*y).max_abs()))
        .unwrap_or((lo + hi) / 2)
}

/// Eigen-directions of the free transfer matrix `[(ζ, v); 2]`.
fn free_modes(theta: f64, field: &CoinField) -> [(C64, Vec2); 2] {
    let c0 = field.free_coin();
    let t0 = transfer_from_coins(cis(theta), &c0, &c0);
    t0.eigenvalues().map(|z| {
        let v = t0.eigenvector(z);
        let n = linalg::norm(&v);
        (z, linalg::scale(&v, C64::new(1.0 / n, 0.0)))
    })
}

struct Shot {
    /// Normalised left solution at each site of `[x_min − 1, x_m]`.
    left: Vec<Vec2>,
    left_log: Vec<f64>,
    /// Normalised right solution at each site of `[x_m, x_max + 1]`.
    right: Vec<Vec2>,
    right_log: Vec<f64>,
    mu: C64,
}

/// Propagates `v_left` from `x_min − 1` forward and `v_right` from `x_max + 1`
/// backward to the matching site, renormalising at every step.
fn shoot(theta: f64, field: &CoinField, v_left: Vec2, v_right: Vec2) -> Shot {
    let (lo, hi) = field.window();
    let xm = matching_site(field).clamp(lo - 1, hi + 1);
    let w = cis(theta);
    let mut left = vec![v_left];
    let mut left_log = vec![0.0];
    let mut u = v_left;
    let mut acc = 0.0;
    for x in (lo - 1)..xm {
        u = transfer_from_coins(w, &field.coin(x), &field.coin(x + 1)).apply(&u);
        let n = linalg::norm(&u);
        u = linalg::scale(&u, C64::new(1.0 / n, 0.0));
        acc += n.ln();
        left.push(u);
        left_log.push(acc);
    }
    let mut right = vec![v_right];
    let mut right_log = vec![0.0];
    let mut u = v_right;
    let mut acc = 0.0;
    for x in ((xm)..=hi).rev() {
        let t = transfer_from_coins(w, &field.coin(x), &field.coin(x + 1));
        u = t.inverse().expect("invertible transfer").apply(&u);
        let n = linalg::norm(&u);
        u = linalg::scale(&u, C64::new(1.0 / n, 0.0));
        acc += n.ln();
        right.push(u);
        right_log.push(acc);
    }
    right.reverse();
    right_log.reverse();
    let mu = linalg::wedge(left.last().unwrap(), &right[0]);
    Shot { left, left_log, right, right_log, mu }
}

/// Matching function at `theta`. In a gap it pairs the solution decaying at
/// −∞ with the one decaying at +∞; in a band it pairs the two outgoing
/// solutions. A zero in a gap is an eigenvalue of `U`.
pub fn matching_function(theta: f64, field: &CoinField) -> Result<C64> {
    let bp = classify(theta, &bands(field.params()));
    match bp.kind {
        BandKind::Threshold => Err(Error::Threshold { theta: bp.theta, margin: bp.margin }),
        BandKind::Gap => {
            let [(za, va), (zb, vb)] = free_modes(bp.theta, field);
            let (vout, vin) = if za.norm() > zb.norm() { (va, vb) } else { (vb, va) };
            Ok(shoot(bp.theta, field, vout, vin).mu)
        }
        _ => {
            let [r, l] = dispersion::channel_roots(bp.theta, field.params(), Gauge::CANONICAL)?;
            let (lo, hi) = field.window();
            let vl = l.plane_wave(lo - 1);
            let vr = r.plane_wave(hi + 1);
            Ok(shoot(bp.theta, field, vl, vr).mu)
        }
    }
}

/// Smallest `|μ(θ)|` over `samples` points of each band interior, staying
/// `margin` away from the thresholds.
pub fn band_matching_minimum(field: &CoinField, samples: usize, margin: f64) -> Result<f64> {
    let bs = bands(field.params());
    let mut best = f64::INFINITY;
    for band in [bs.band1, bs.band2] {
        let width = band.width() - 2.0 * margin;
        if width <= 0.0 {
            continue;
        }
        for k in 0..samples {
            let theta = band.start + margin + width * (k as f64 + 0.5) / samples as f64;
            best = best.min(matching_function(theta, field)?.norm());
        }
    }
    Ok(best)
}

fn refine_root(field: &CoinField, t0: f64, t1: f64, lo: f64, hi: f64) -> Option<f64> {
    let mu = |t: f64| matching_function(t, field).ok();
    let (mut a, mut b) = (t0, t1);
    let (mut fa, mut fb) = (mu(a)?, mu(b)?);
    for _ in 0..200 {
        let denom = fb - fa;
        if denom.norm() == 0.0 {
            break;
        }
        let step = (fb * (b - a) / denom).re;
        let c = (b - step).clamp(lo, hi);
        a = b;
        fa = fb;
        b = c;
        fb = mu(b)?;
        if (b - a).abs() < 1e-14 || fb.norm() < 1e-15 {
            break;
        }
    }
    Some(b)
}

fn linear_fit_residual(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, 0.0);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let resid = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).abs()).fold(0.0, f64::max);
    (slope, resid)
}

/// Assembles the eigenvector at a matching-function root, with exact
/// exponential tails out to where they fall below `1e−17` of the peak.
fn assemble_bound_state(theta: f64, field: &CoinField) -> Option<BoundState> {
    let [(za, va), (zb, vb)] = free_modes(theta, field);
    let ((zout, vout), (zin, vin)) = if za.norm() > zb.norm() { ((za, va), (zb, vb)) } else { ((zb, vb), (za, va)) };
    let shot = shoot(theta, field, vout, vin);
    let (lo, hi) = field.window();
    let xm = matching_site(field).clamp(lo - 1, hi + 1);
    let kappa = -zin.norm().ln();
    if !(kappa > 0.0) {
        return None;
    }
    // scale both halves relative to the matching site
    let lm = *shot.left_log.last().unwrap();
    let rm = shot.right_log[0];
    let ul = *shot.left.last().unwrap();
    let ur = shot.right[0];
    let c = linalg::inner(&ul, &ur) / linalg::norm2(&ur);
    let mut core: Vec<(i64, Vec2)> = Vec::new();
    for (k, v) in shot.left.iter().enumerate() {
        let s = (shot.left_log[k] - lm).exp();
        core.push((lo - 1 + k as i64, linalg::scale(v, C64::new(s, 0.0))));
    }
    for (k, v) in shot.right.iter().enumerate().skip(1) {
        let s = (shot.right_log[k] - rm).exp();
        core.push((xm + k as i64, linalg::scale(v, c * s)));
    }
    let peak = core.iter().map(|(_, v)| linalg::norm(v)).fold(0.0, f64::max);
    let first = core.first().unwrap().1;
    let last = core.last().unwrap().1;
    let tail_len = |edge: f64| -> i64 {
        if edge <= 0.0 {
            return 0;
        }
        (((edge / (1e-17 * peak)).ln() / kappa).ceil() as i64).clamp(1, 200_000)
    };
    let nl = tail_len(linalg::norm(&first));
    let nr = tail_len(linalg::norm(&last));
    let start = lo - 1 - nl;
    let end = hi + 1 + nr;
    let mut psi = StateVector::on_range(start, end);
    for (x, v) in &core {
        *psi.get_mut(*x).unwrap() = *v;
    }
    let lzout = zout.ln();
    let lzin = zin.ln();
    for x in start..(lo - 1) {
        let n = (x - (lo - 1)) as f64;
        *psi.get_mut(x).unwrap() = linalg::scale(&first, (lzout * n).exp());
    }
    for x in (hi + 2)..=end {
        let n = (x - (hi + 1)) as f64;
        *psi.get_mut(x).unwrap() = linalg::scale(&last, (lzin * n).exp());
    }
    let norm = psi.norm();
    psi.scale(C64::new(1.0 / norm, 0.0));
    let res = residual(&psi, theta, field);
    let fit = |range: std::ops::RangeInclusive<i64>| -> f64 {
        let pts: Vec<(f64, f64)> = range
            .filter_map(|x| {
                let m = linalg::norm(&psi.get(x));
                (m > 1e-250).then(|| (x as f64, m.ln()))
            })
            .collect();
        linear_fit_residual(&pts).1
    };
    let left_fit = fit(start.max(lo - 1 - 60)..=(lo - 1));
    let right_fit = fit((hi + 1)..=end.min(hi + 1 + 60));
    Some(BoundState {
        theta_ev: angle::reduce(theta),
        eigenvector: Some(psi),
        decay_rate: kappa,
        decay_fit_residual: left_fit.max(right_fit),
        norm: 1.0,
        residual: res,
        dense_match: None,
        localization: None,
    })
}

/// Scans both gaps for eigenvalues of `U` and cross-checks them on a dense ring.
pub fn bound_state_search(field: &CoinField, resolution: usize) -> Result<BoundStateReport> {
    bound_state_search_with(field, &BoundStateOptions { resolution, ..Default::default() })
}

pub fn bound_state_search_with(field: &CoinField, opts: &BoundStateOptions) -> Result<BoundStateReport> {
    let bs = bands(field.params());
    let mut report = BoundStateReport::default();
    if !bs.has_gaps() || field.deviations().is_empty() {
        return Ok(report);
    }
    let mut candidates: Vec<f64> = Vec::new();
    let mut failed = false;
    for gap in bs.gaps() {
        let width = gap.width() - 2.0 * opts.edge_margin;
        if width <= 0.0 {
            continue;
        }
        let n = opts.resolution.max(8);
        let h = width / (n - 1) as f64;
        let lo = gap.start + opts.edge_margin;
        let hi = lo + width;
        let grid: Vec<f64> = (0..n).map(|k| lo + h * k as f64).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&t| matching_function(t, field).map(|m| m.norm()).unwrap_or(f64::NAN))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            failed = true;
            continue;
        }
        for k in 1..n - 1 {
            if vals[k] < vals[k - 1] && vals[k] <= vals[k + 1] {
                let Some(root) = refine_root(field, grid[k], grid[k] + 0.1 * h, lo, hi) else {
                    continue;
                };
                let Ok(mu) = matching_function(root, field) else { continue };
                if mu.norm() < 1e-10 && !candidates.iter().any(|c| angle::circular_distance(*c, root) < 1e-9) {
                    candidates.push(angle::reduce(root));
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    for theta in candidates {
        match assemble_bound_state(theta, field) {
            Some(s) if s.residual.is_finite() => report.states.push(s),
            _ => failed = true,
        }
    }
    if failed {
        let msg = "transfer matching was numerically unreliable; using dense ring diagonalisation".to_string();
        warn!("{msg}");
        report.warnings.push(msg);
        report.used_dense_fallback = true;
    }
    if opts.ring_sites > 0 || failed {
        let sites = opts.ring_sites.max(if failed { 2000 } else { 0 });
        let dense = dense_gap_eigenstates(field, sites)?;
        report.dense_eigenphases = dense.iter().map(|d| d.theta).collect();
        let mut used = vec![false; dense.len()];
        for s in &mut report.states {
            let best = dense
                .iter()
                .enumerate()
                .map(|(k, d)| (k, angle::circular_distance(d.theta, s.theta_ev)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((k, dist)) = best {
                s.dense_match = Some(dist);
                s.localization = Some(dense[k].localization);
                if dist <= 1e-6 {
                    used[k] = true;
                }
            }
        }
        report.unmatched_dense =
            dense.iter().zip(&used).filter(|(_, u)| !**u).map(|(d, _)| d.theta).collect();
        if failed {
            for d in dense {
                report.states.push(BoundState {
                    theta_ev: d.theta,
                    eigenvector: None,
                    decay_rate: f64::NAN,
                    decay_fit_residual: f64::NAN,
                    norm: 1.0,
                    residual: f64::NAN,
                    dense_match: Some(0.0),
                    localization: Some(d.localization),
                });
            }
        }
    }
    Ok(report)
}

/// Eigenpair of `U` on a ring found by dense diagonalisation.
#[derive(Debug, Clone)]
pub struct DenseEigenstate {
    pub theta: f64,
    /// Fraction of mass within 40 sites of the deviation window.
    pub localization: f64,
}

/// Dense matrix of `U` on a ring of `sites` sites starting at `start`.
pub fn dense_ring_matrix(field: &CoinField, start: i64, sites: usize) -> Mat<c64> {
    let n = sites;
    let mut u = Mat::<c64>::zeros(2 * n, 2 * n);
    for k in 0..n {
        let r = (k + 1) % n;
        let l = (k + n - 1) % n;
        let cr = field.coin(start + r as i64);
        let cl = field.coin(start + l as i64);
        u[(2 * k, 2 * r)] += cr.a;
        u[(2 * k, 2 * r + 1)] += cr.b;
        u[(2 * k + 1, 2 * l)] += cl.c;
        u[(2 * k + 1, 2 * l + 1)] += cl.d;
    }
    u
}

/// All eigenphases of `U` on a ring that fall in a spectral gap.
///
/// Uses one Hermitian eigendecomposition of `H = (e^{−iφ}U + e^{iφ}U*)/2`
/// with `φ = γ/2`, whose eigenvalues are `cos(θ − φ)`: the gap around `φ`
/// maps above `p` and the gap around `φ + π` below `−p`. Each cluster of `H`
/// eigenvalues is resolved by diagonalising `U` on the cluster subspace.
pub fn dense_gap_eigenstates(field: &CoinField, sites: usize) -> Result<Vec<DenseEigenstate>> {
    let (lo, hi) = field.window();
    let centre = (lo + hi) / 2;
    let start = centre - sites as i64 / 2;
    let u = dense_ring_matrix(field, start, sites);
    let phi = field.params().gamma / 2.0;
    let e = cis(-phi);
    let h = Mat::<c64>::from_fn(2 * sites, 2 * sites, |i, j| (e * u[(i, j)] + (e * u[(j, i)]).conj()) * 0.5);
    let evd = h
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Window(format!("dense eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vecs = evd.U();
    let p = field.params().p;
    // ring discretisation puts band states at most a few 1e−6 beyond the band edge
    let cut = p + 1e-9;
    let idx: Vec<usize> = (0..2 * sites).filter(|&k| s[k].re.abs() > cut).collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < idx.len() {
        let mut group = vec![idx[k]];
        while k + 1 < idx.len() && (s[idx[k + 1]].re - s[idx[k]].re).abs() < 1e-6 {
            k += 1;
            group.push(idx[k]);
        }
        k += 1;
        let m = group.len();
        let basis = Mat::<c64>::from_fn(2 * sites, m, |i, j| vecs[(i, group[j])]);
        let small = basis.adjoint() * &u * &basis;
        let phases: Vec<(C64, Vec<c64>)> = if m == 1 {
            vec![(small[(0, 0)], vec![c64::new(1.0, 0.0)])]
        } else {
            let ev = small.eigen().map_err(|e| Error::Window(format!("dense eigensolver failed: {e:?}")))?;
            (0..m)
                .map(|j| (ev.S().column_vector()[j], (0..m).map(|i| ev.U()[(i, j)]).collect()))
                .collect()
        };
        for (lambda, coeffs) in phases {
            let vec = &basis * Mat::<c64>::from_fn(m, 1, |i, _| coeffs[i]);
            let total: f64 = (0..2 * sites).map(|i| vec[(i, 0)].norm_sqr()).sum();
            let inside: f64 = (0..sites)
                .filter(|&q| {
                    let x = start + q as i64;
                    x >= lo - 40 && x <= hi + 40
                })
                .map(|q| vec[(2 * q, 0)].norm_sqr() + vec[(2 * q + 1, 0)].norm_sqr())
                .sum();
            out.push(DenseEigenstate { theta: angle::reduce(lambda.arg()), localization: inside / total });
        }
    }
    out.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(out)
}

/// Bound-state report as JSON: `theta_ev`, `decay_rate`, window norm and checks.
pub fn bound_states_json(report: &BoundStateReport) -> String {
    serde_json::to_string_pretty(report).expect("serialisable report")
}

/// Eigenfunction dump `x, Re u0, Im u0, Re u1, Im u1`.
pub fn eigenfunction_csv(u: &StateVector) -> String {
    let mut out = String::from("x,re_u0,im_u0,re_u1,im_u1\n");
    for (x, v) in u.sites() {
        out.push_str(&format!(
            "{x},{},{},{},{}\n",
            crate::fmt_f64(v[0].re),
            crate::fmt_f64(v[0].im),
            crate::fmt_f64(v[1].re),
            crate::fmt_f64(v[1].im)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{make_coin, CoinParams};
    use std::collections::BTreeMap;
    use std::f64::consts::FRAC_PI_2;

    fn one_defect(p: f64) -> CoinField {
        phase_defect(p, 0.0)
    }

    fn phase_defect(p: f64, gamma: f64) -> CoinField {
        let mut dev = BTreeMap::new();
        dev.insert(0, make_coin(&CoinParams::new(p, 0.0, 0.0, gamma).unwrap()));
        CoinField::new(CoinParams::hadamard(), dev, 1e-3).unwrap()
    }

    #[test]
    fn free_transfer_eigenvalues_are_on_shell_momenta() {
        let field = CoinField::free(CoinParams::hadamard());
        let t = transfer_matrix(FRAC_PI_2, 3, &field).unwrap();
        let ev = t.eigenvalues();
        let mut args: Vec<f64> = ev.iter().map(|z| z.arg()).collect();
        args.sort_by(f64::total_cmp);
        assert!((args[0] + FRAC_PI_2).abs() < 1e-12 && (args[1] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn transfer_determinant() {
        let field = one_defect(0.3);
        for x in -2..2 {
            let t = transfer_matrix(0.7, x, &field).unwrap();
            let expect = field.coin(x).d / field.coin(x + 1).a;
            assert!((t.det() - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn tiny_a_is_rejected() {
        let mut dev = BTreeMap::new();
        dev.insert(1, make_coin(&CoinParams::new(1e-7, 0.0, 0.0, 0.0).unwrap()));
        let loose = CoinField::new(CoinParams::hadamard(), dev.clone(), 1e-8).unwrap();
        assert!(transfer_matrix(0.5, 0, &loose).is_ok());
        let strict = CoinField::new(CoinParams::hadamard(), dev, 1e-6);
        assert!(matches!(strict, Err(Error::AmplitudeBound { site: 1, .. })));
    }

    #[test]
    fn free_field_scatters_trivially() {
        let field = CoinField::free(CoinParams::hadamard());
        let s = scattering_solution(FRAC_PI_2, Incidence::Left, &field).unwrap();
        assert!((s.right[0] - linalg::ONE).norm() < 1e-14 && s.left[1].norm() < 1e-14);
    }

    #[test]
    fn one_defect_conserves_flux() {
        let field = one_defect(0.6);
        let s = scattering_solution(FRAC_PI_2, Incidence::Left, &field).unwrap();
        let (t, r) = (s.right[0], s.left[1]);
        assert!((t.norm_sqr() + r.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(s.residual < 1e-12 && s.match_error < 1e-12);
    }

    #[test]
    fn ls_solve_satisfies_equation() {
        let field = one_defect(0.6);
        let f = StateVector::from_fn(-2, 3, |x| [C64::new(x as f64, 1.0), C64::new(0.5, -0.3 * x as f64)]);
        let u = ls_solve(1.1, &f, &field, -200, 200).unwrap();
        assert!(residual_with_source(&u, Some(&f), 1.1, &field) < 1e-10);
    }

    #[test]
    fn ls_solve_without_deviations_is_free_resolvent() {
        let field = CoinField::free(CoinParams::hadamard());
        let f = StateVector::delta_at(0, [linalg::ONE, ZERO]);
        let u = ls_solve(1.1, &f, &field, -20, 20).unwrap();
        let v = crate::green::free_resolvent_apply(&f, 1.1, Side::Minus, field.params(), -20, 20).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn real_defect_does_not_bind() {
        let field = one_defect(0.1);
        let opts = BoundStateOptions { resolution: 400, ring_sites: 200, edge_margin: 1e-6 };
        let rep = bound_state_search_with(&field, &opts).unwrap();
        assert!(rep.states.is_empty() && rep.dense_eigenphases.is_empty());
    }

    #[test]
    fn phase_defect_binds_two_states() {
        let field = phase_defect(0.3, 3.0);
        let opts = BoundStateOptions { resolution: 400, ring_sites: 200, edge_margin: 1e-6 };
        let rep = bound_state_search_with(&field, &opts).unwrap();
        assert_eq!(rep.states.len(), 2);
        for s in &rep.states {
            assert!(s.residual < 1e-10, "{}", s.residual);
            assert!(s.decay_fit_residual < 1e-4);
            assert!(s.dense_match.unwrap() < 1e-6, "{:?}", s.dense_match);
        }
        assert!(rep.unmatched_dense.is_empty(), "{:?}", rep.unmatched_dense);
    }

    #[test]
    fn empty_field_has_no_bound_states() {
        let field = CoinField::free(CoinParams::hadamard());
        assert!(bound_state_search(&field, 100).unwrap().states.is_empty());
    }
}
