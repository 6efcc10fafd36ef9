//! Coins, position-dependent coin fields, lattice states and the walk
//! operator `U = SC`.
//!
//! The shift moves the first internal component one site to the left and the
//! second one site to the right, so that
//!
//! ```text
//! (Uψ)(x) = ( a(x+1)ψ₀(x+1) + b(x+1)ψ₁(x+1),
//!             c(x−1)ψ₀(x−1) + d(x−1)ψ₁(x−1) )
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};
use crate::linalg::{cis, Mat2, Vec2, C64, ZERO};

/// Unitarity tolerance applied to every stored coin.
pub const UNITARY_TOL: f64 = 1e-12;
/// Smallest admissible value of `p`.
pub const P_MIN: f64 = 1e-8;

/// The `(p, q, α, β, γ)` parameterisation of a unitary coin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CoinParams {
    /// Builds parameters with `q = √(1 − p²)`.
    pub fn new(p: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !p.is_finite() || p > 1.0 + UNITARY_TOL || p < P_MIN {
            return Err(Error::InvalidParams(format!("p = {p} must lie in [{P_MIN:e}, 1]")));
        }
        let p = p.min(1.0);
        Self::with_q(p, (1.0 - p * p).max(0.0).sqrt(), alpha, beta, gamma)
    }

    pub fn with_q(p: f64, q: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("p", p), ("q", q), ("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if p < P_MIN || p > 1.0 {
            return Err(Error::InvalidParams(format!("p = {p} must lie in [{P_MIN:e}, 1]")));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidParams(format!("q = {q} must lie in [0, 1)")));
        }
        if (p * p + q * q - 1.0).abs() > UNITARY_TOL {
            return Err(Error::InvalidParams(format!("p² + q² = {} differs from 1", p * p + q * q)));
        }
        Ok(CoinParams {
            p,
            q,
            alpha: angle::reduce(alpha),
            beta: angle::reduce(beta),
            gamma: angle::reduce(gamma),
        })
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CoinParams { p: s, q: s, alpha: 0.0, beta: 0.0, gamma: 0.0 }
    }
}

/// A 2×2 unitary coin `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coin {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Coin {
    /// Wraps a matrix, rejecting it when `‖C*C − I‖_max > 1e−12`.
    pub fn from_matrix(m: Mat2) -> Result<Self> {
        let defect = m.unitarity_defect();
        if !(defect <= UNITARY_TOL) {
            return Err(Error::NotUnitary { site: None, defect });
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    pub fn from_matrix_unchecked(m: Mat2) -> Self {
        Coin { a: m.0[0][0], b: m.0[0][1], c: m.0[1][0], d: m.0[1][1] }
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.a, self.b, self.c, self.d)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.matrix().unitarity_defect()
    }

    pub fn det(&self) -> C64 {
        self.matrix().det()
    }

    pub fn identity() -> Self {
        Self::from_matrix_unchecked(Mat2::identity())
    }

    /// `C · exp(iεK)` with `K = n·σ` for a unit vector `n`; stays unitary
    /// and differs from `C` by at most `|ε|` in operator norm.
    pub fn rotated(&self, eps: f64, n: [f64; 3]) -> Self {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let [nx, ny, nz] = n.map(|v| v / len);
        let (s, c) = eps.sin_cos();
        let i = C64::new(0.0, 1.0);
        let k = Mat2::new(
            C64::new(nz, 0.0),
            C64::new(nx, -ny),
            C64::new(nx, ny),
            C64::new(-nz, 0.0),
        );
        let e = Mat2::scalar(C64::new(c, 0.0)) + k.scaled(i * s);
        Self::from_matrix_unchecked(self.matrix() * e)
    }
}

/// The parameterised coin `C₀`.
pub fn make_coin(params: &CoinParams) -> Coin {
    let CoinParams { p, q, alpha, beta, gamma } = *params;
    let half = gamma / 2.0;
    let g = cis(half);
    Coin {
        a: g * cis(alpha - half) * p,
        b: g * cis(beta - half) * q,
        c: -g * cis(-(beta - half)) * q,
        d: g * cis(-(alpha - half)) * p,
    }
}

/// Decay metadata for a field whose deviations were truncated from an
/// exponentially decaying profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailInfo {
    pub eps0: f64,
    pub m: f64,
    /// Largest `M·e^{−ε₀|x|}` among the sites dropped by truncation.
    pub truncation_error: f64,
    /// Tail tolerance the truncation was asked to meet; `0` when nothing was truncated.
    #[serde(default)]
    pub tol: f64,
}

/// Position-dependent coin field equal to `C₀` outside a finite window.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinField {
    free: CoinParams,
    free_coin: Coin,
    window: (i64, i64),
    deviations: BTreeMap<i64, Coin>,
    delta: f64,
    tail: TailInfo,
}

impl CoinField {
    pub const DEFAULT_DELTA: f64 = 1e-6;

    pub fn free(params: CoinParams) -> Self {
        CoinField {
            free: params,
            free_coin: make_coin(&params),
            window: (0, 0),
            deviations: BTreeMap::new(),
            delta: Self::DEFAULT_DELTA.min(params.p),
            tail: TailInfo { eps0: 1.0, m: 0.0, truncation_error: 0.0, tol: 0.0 },
        }
    }

    /// Builds and validates a field. The window is the smallest interval
    /// containing every deviation, or `[0, 0]` when there are none.
    pub fn new(params: CoinParams, deviations: BTreeMap<i64, Coin>, delta: f64) -> Result<Self> {
        let mut field = Self::free(params);
        field.delta = delta;
        field.deviations = deviations;
        if let (Some((&lo, _)), Some((&hi, _))) =
            (field.deviations.first_key_value(), field.deviations.last_key_value())
        {
            field.window = (lo, hi);
        }
        field.validate()?;
        Ok(field)
    }

    /// Field with deviations `C₀·exp(i h(x) K(x))`, `h(x) = M e^{−ε₀|x|}`,
    /// truncated once `h` drops below `tail_tol`. `axis(x)` supplies the
    /// direction of `K(x)`.
    pub fn decaying(
        params: CoinParams,
        eps0: f64,
        m: f64,
        tail_tol: f64,
        delta: f64,
        axis: impl Fn(i64) -> [f64; 3],
    ) -> Result<Self> {
        if !(eps0 > 0.0) || !(m >= 0.0) || !(tail_tol > 0.0) {
            return Err(Error::InvalidParams("decay needs eps0 > 0, M ≥ 0, tol > 0".into()));
        }
        let radius = if m <= tail_tol { -1 } else { ((m / tail_tol).ln() / eps0).floor() as i64 };
        let c0 = make_coin(&params);
        let mut deviations = BTreeMap::new();
        for x in -radius..=radius {
            let h = m * (-eps0 * x.abs() as f64).exp();
            deviations.insert(x, c0.rotated(h, axis(x)));
        }
        let mut field = Self::new(params, deviations, delta)?;
        field.tail = TailInfo {
            eps0,
            m,
            truncation_error: m * (-eps0 * (radius + 1) as f64).exp(),
            tol: tail_tol,
        };
        Ok(field)
    }

    pub fn with_tail_info(mut self, tail: TailInfo) -> Self {
        self.tail = tail;
        self
    }

    pub fn with_tail(mut self, eps0: f64, m: f64) -> Self {
        self.tail.eps0 = eps0;
        self.tail.m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParams(format!("delta = {} must be positive", self.delta)));
        }
        if self.free.p < self.delta {
            return Err(Error::InvalidParams(format!(
                "free coin has |a| = p = {} below delta = {}",
                self.free.p, self.delta
            )));
        }
        for (&x, coin) in &self.deviations {
            let defect = coin.unitarity_defect();
            if !(defect <= UNITARY_TOL) {
                return Err(Error::NotUnitary { site: Some(x), defect });
            }
            if coin.a.norm() < self.delta {
                return Err(Error::AmplitudeBound { site: x, modulus: coin.a.norm(), delta: self.delta });
            }
            if x < self.window.0 || x > self.window.1 {
                return Err(Error::Window(format!("deviation at {x} outside window {:?}", self.window)));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn coin(&self, x: i64) -> Coin {
        if x < self.window.0 || x > self.window.1 {
            return self.free_coin;
        }
        self.deviations.get(&x).copied().unwrap_or(self.free_coin)
    }

    pub fn params(&self) -> &CoinParams {
        &self.free
    }

    pub fn free_coin(&self) -> Coin {
        self.free_coin
    }

    pub fn window(&self) -> (i64, i64) {
        self.window
    }

    pub fn deviations(&self) -> &BTreeMap<i64, Coin> {
        &self.deviations
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tail(&self) -> TailInfo {
        self.tail
    }

    /// True when no stored coin differs from `C₀`.
    pub fn is_free(&self) -> bool {
        self.deviations.values().all(|c| (c.matrix() - self.free_coin.matrix()).max_abs() == 0.0)
    }

    /// The same free background with all deviations removed.
    pub fn background(&self) -> CoinField {
        let mut f = Self::free(self.free);
        f.delta = self.delta;
        f
    }

    /// `C(x) − C₀`.
    pub fn deviation(&self, x: i64) -> Mat2 {
        self.coin(x).matrix() - self.free_coin.matrix()
    }
}

/// Finitely supported lattice state `ψ: [start, start+len) → ℂ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub start: i64,
    pub values: Vec<Vec2>,
}

impl StateVector {
    pub fn zeros(start: i64, len: usize) -> Self {
        StateVector { start, values: vec![[ZERO, ZERO]; len] }
    }

    /// State on `[lo, hi]`.
    pub fn on_range(lo: i64, hi: i64) -> Self {
        Self::zeros(lo, (hi - lo + 1).max(0) as usize)
    }

    pub fn from_fn(lo: i64, hi: i64, mut f: impl FnMut(i64) -> Vec2) -> Self {
        StateVector { start: lo, values: (lo..=hi).map(&mut f).collect() }
    }

    pub fn delta_at(x: i64, v: Vec2) -> Self {
        StateVector { start: x, values: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last site of the support window.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, &Vec2)> {
        self.values.iter().enumerate().map(move |(k, v)| (self.start + k as i64, v))
    }

    /// Value at `x`, zero outside the window.
    #[inline]
    pub fn get(&self, x: i64) -> Vec2 {
        let k = x - self.start;
        if k < 0 || k >= self.values.len() as i64 {
            [ZERO, ZERO]
        } else {
            self.values[k as usize]
        }
    }

    pub fn get_mut(&mut self, x: i64) -> Option<&mut Vec2> {
        let k = x - self.start;
        if k < 0 {
            return None;
        }
        self.values.get_mut(k as usize)
    }

    /// ‖ψ‖² accumulated in site order.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(crate::linalg::norm2).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self, other⟩, linear in the first argument.
    pub fn inner(&self, other: &StateVector) -> C64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        (lo..=hi).map(|x| crate::linalg::inner(&self.get(x), &other.get(x))).sum()
    }

    /// Copy of the state on `[lo, hi]`, zero padded.
    pub fn restricted(&self, lo: i64, hi: i64) -> StateVector {
        StateVector::from_fn(lo, hi, |x| self.get(x))
    }

    /// Max-norm distance to another state over the union of supports.
    pub fn max_diff(&self, other: &StateVector) -> f64 {
        let lo = self.start.min(other.start);
        let hi = self.end().max(other.end());
        (lo..=hi)
            .map(|x| {
                let (u, v) = (self.get(x), other.get(x));
                (u[0] - v[0]).norm().max((u[1] - v[1]).norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.values {
            v[0] *= s;
            v[1] *= s;
        }
    }
}

/// How the edges of a finite state window are treated by the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Periodic closure of the window; exactly unitary.
    #[default]
    Ring,
    /// Grow the window by one site per side; exact action on ℓ²(ℤ).
    Extend,
    /// Keep the window and discard amplitude that leaves it.
    HardWall,
}

/// `Uψ` under the given boundary policy.
pub fn apply_walk(field: &CoinField, psi: &StateVector, boundary: Boundary) -> StateVector {
    match boundary {
        Boundary::Ring => {
            let op = RingOperator::new(field, psi.start, psi.len());
            let mut out = StateVector::zeros(psi.start, psi.len());
            op.step(&psi.values, &mut out.values);
            out
        }
        Boundary::Extend | Boundary::HardWall => {
            let (lo, hi) = if boundary == Boundary::Extend {
                (psi.start - 1, psi.end() + 1)
            } else {
                (psi.start, psi.end())
            };
            StateVector::from_fn(lo, hi, |x| {
                let r = field.coin(x + 1);
                let l = field.coin(x - 1);
                let u = psi.get(x + 1);
                let v = psi.get(x - 1);
                [r.a * u[0] + r.b * u[1], l.c * v[0] + l.d * v[1]]
            })
        }
    }
}

/// `U*u` under the given boundary policy.
pub fn apply_walk_adjoint(field: &CoinField, u: &StateVector, boundary: Boundary) -> StateVector {
    match boundary {
        Boundary::Ring => {
            let op = RingOperator::new(field, u.start, u.len());
            let mut out = StateVector::zeros(u.start, u.len());
            op.step_adjoint(&u.values, &mut out.values);
            out
        }
        Boundary::Extend | Boundary::HardWall => {
            let (lo, hi) = if boundary == Boundary::Extend {
                (u.start - 1, u.end() + 1)
            } else {
                (u.start, u.end())
            };
            StateVector::from_fn(lo, hi, |x| {
                let c = field.coin(x);
                let s = [u.get(x - 1)[0], u.get(x + 1)[1]];
                c.matrix().adjoint().apply(&s)
            })
        }
    }
}

/// The walk restricted to a ring of `n` sites starting at `start`, with the
/// coins tabulated once. Used for long time evolutions.
#[derive(Debug, Clone)]
pub struct RingOperator {
    start: i64,
    coins: Vec<Coin>,
}

impl RingOperator {
    pub fn new(field: &CoinField, start: i64, n: usize) -> Self {
        let coins = (0..n as i64).map(|k| field.coin(start + k)).collect();
        RingOperator { start, coins }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.coins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coins.is_empty()
    }

    /// `dst = U src`.
    pub fn step(&self, src: &[Vec2], dst: &mut [Vec2]) {
        let n = self.coins.len();
        assert!(src.len() == n && dst.len() == n);
        if n == 0 {
            return;
        }
        for k in 0..n {
            let r = if k + 1 == n { 0 } else { k + 1 };
            let l = if k == 0 { n - 1 } else { k - 1 };
            let (cr, cl) = (&self.coins[r], &self.coins[l]);
            dst[k] = [
                cr.a * src[r][0] + cr.b * src[r][1],
                cl.c * src[l][0] + cl.d * src[l][1],
            ];
        }
    }

    /// `dst = U* src`.
    pub fn step_adjoint(&self, src: &[Vec2], dst: &mut [Vec2]) {
        let n = self.coins.len();
        assert!(src.len() == n && dst.len() == n);
        if n == 0 {
            return;
        }
        for k in 0..n {
            let r = if k + 1 == n { 0 } else { k + 1 };
            let l = if k == 0 { n - 1 } else { k - 1 };
            let c = &self.coins[k];
            let (s0, s1) = (src[l][0], src[r][1]);
            dst[k] = [
                c.a.conj() * s0 + c.c.conj() * s1,
                c.b.conj() * s0 + c.d.conj() * s1,
            ];
        }
    }
}
