//! Wave packets, time evolution on a ring, and numerical wave operators.
//!
//! `W₊` is probed through `Ω₊(t) = U^{−t}U₀^{t}` and `W₋` through
//! `Ω₋(t) = U^{t}U₀^{−t}`, both with `t > 0`. The Cauchy defect between two
//! times is `‖Ω(t)ψ − Ω(t')ψ‖`.

use serde::{Deserialize, Serialize};

use crate::dispersion::{self, eigenpair};
use crate::error::{Error, Result};
use crate::linalg::{self, cis, Vec2, C64, ZERO};
use crate::smatrix;
use crate::stationary::{self, BoundStateOptions};
use crate::walk::{CoinField, CoinParams, RingOperator, StateVector};

/// Smallest packet width accepted.
pub const MIN_SIGMA: f64 = 5.0;
pub const DEFAULT_SIGMA: f64 = 30.0;
pub const DEFAULT_RING: usize = 8192;
/// Launch distance from the deviation window, in units of `sigma`.
pub const LAUNCH_SIGMAS: f64 = 6.0;
/// Largest probability allowed between the two lobes.
pub const MAX_OVERLAP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub x0: i64,
    pub sigma: f64,
    pub xi0: f64,
    pub branch: u8,
}

impl PacketSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= MIN_SIGMA) || !self.sigma.is_finite() {
            return Err(Error::InvalidParams(format!("packet width {} below {MIN_SIGMA}", self.sigma)));
        }
        if self.branch != 1 && self.branch != 2 {
            return Err(Error::InvalidParams(format!("branch must be 1 or 2, got {}", self.branch)));
        }
        if !self.xi0.is_finite() {
            return Err(Error::InvalidParams("carrier momentum is not finite".into()));
        }
        Ok(())
    }

    /// Half-width of the stored support, where the envelope drops below 1e−17.
    pub fn half_support(&self) -> i64 {
        (13.0 * self.sigma).ceil() as i64
    }
}

/// Carrier data of a packet: quasi-energy, transport velocity and the branch eigenvector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carrier {
    pub theta: f64,
    pub velocity: f64,
    pub eigenvector: Vec2,
}

pub fn carrier(spec: &PacketSpec, params: &CoinParams) -> Result<Carrier> {
    let pair = eigenpair(spec.xi0, params)?;
    let k = (spec.branch - 1) as usize;
    let theta = crate::angle::reduce(pair.lambda[k].arg());
    let p = params.p;
    let phi = spec.xi0 + params.alpha - params.gamma / 2.0;
    let s = (1.0 - (p * phi.cos()).powi(2)).max(0.0).sqrt();
    let slope = if s > 0.0 { p * phi.sin() / s } else { 0.0 };
    let dtheta = if spec.branch == 1 { slope } else { -slope };
    Ok(Carrier { theta, velocity: -dtheta, eigenvector: pair.vectors[k] })
}

/// `ψ(x) = N e^{−(x−x0)²/(4σ²)} e^{ixξ₀} a_branch(ξ₀)`, normalised.
pub fn gaussian_packet(spec: &PacketSpec, params: &CoinParams) -> Result<StateVector> {
    spec.validate()?;
    let v = carrier(spec, params)?.eigenvector;
    let h = spec.half_support();
    let mut psi = StateVector::from_fn(spec.x0 - h, spec.x0 + h, |x| {
        let d = (x - spec.x0) as f64;
        let env = (-(d * d) / (4.0 * spec.sigma * spec.sigma)).exp();
        linalg::scale(&v, cis(x as f64 * spec.xi0) * env)
    });
    let n = psi.norm();
    psi.scale(C64::new(1.0 / n, 0.0));
    Ok(psi)
}

/// Sites `[start, start + sites)` with periodic closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    pub start: i64,
    pub sites: usize,
}

impl Ring {
    /// Ring of `sites` sites centred on the deviation window.
    pub fn centred(field: &CoinField, sites: usize) -> Ring {
        let (lo, hi) = field.window();
        Ring { start: (lo + hi) / 2 - sites as i64 / 2, sites }
    }

    pub fn end(&self) -> i64 {
        self.start + self.sites as i64 - 1
    }

    fn embed(&self, psi: &StateVector) -> Result<Vec<Vec2>> {
        let mut out = vec![[ZERO, ZERO]; self.sites];
        for (x, v) in psi.sites() {
            if v[0] == ZERO && v[1] == ZERO {
                continue;
            }
            if x < self.start || x > self.end() {
                return Err(Error::Window(format!("state at site {x} lies outside the ring")));
            }
            out[(x - self.start) as usize] = *v;
        }
        Ok(out)
    }

    fn state(&self, v: Vec<Vec2>) -> StateVector {
        StateVector { start: self.start, values: v }
    }
}

fn support(psi: &StateVector) -> Option<(i64, i64)> {
    let mut it = psi.sites().filter(|(_, v)| v[0] != ZERO || v[1] != ZERO).map(|(x, _)| x);
    let first = it.next()?;
    let last = it.last().unwrap_or(first);
    Some((first, last))
}

fn check_room(ring: &Ring, psi: &StateVector, t: i64) -> Result<()> {
    let len = support(psi).map(|(a, b)| b - a + 1).unwrap_or(0);
    let need = 2 * (t.unsigned_abs() as i64 + len);
    if (ring.sites as i64) < need {
        return Err(Error::Window(format!(
            "ring of {} sites is too small for {} steps of a state spanning {len} sites (need {need})",
            ring.sites,
            t.abs()
        )));
    }
    Ok(())
}

/// Propagator for `U` and `U₀` on one ring.
pub struct Evolver {
    ring: Ring,
    full: RingOperator,
    free: RingOperator,
    scratch: Vec<Vec2>,
    unperturbed: bool,
}

impl Evolver {
    pub fn new(field: &CoinField, ring: Ring) -> Self {
        Evolver {
            ring,
            full: RingOperator::new(field, ring.start, ring.sites),
            free: RingOperator::new(&field.background(), ring.start, ring.sites),
            scratch: vec![[ZERO, ZERO]; ring.sites],
            unperturbed: field.deviations().is_empty(),
        }
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    /// `v ← U^t v` (`free` selects `U₀`); negative `t` uses the adjoint.
    pub fn advance(&mut self, v: &mut Vec<Vec2>, t: i64, free: bool) {
        let op = if free { &self.free } else { &self.full };
        for _ in 0..t.unsigned_abs() {
            if t > 0 {
                op.step(v, &mut self.scratch);
            } else {
                op.step_adjoint(v, &mut self.scratch);
            }
            std::mem::swap(v, &mut self.scratch);
        }
    }
}

fn vec_norm(v: &[Vec2]) -> f64 {
    v.iter().map(linalg::norm2).sum::<f64>().sqrt()
}

fn vec_dist(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| linalg::norm2(&linalg::sub(x, y))).sum::<f64>().sqrt()
}

/// `U^t ψ` on `ring` (`U₀^t ψ` for a free field); `t < 0` evolves backwards.
pub fn evolve(field: &CoinField, psi: &StateVector, t: i64, ring: Ring) -> Result<StateVector> {
    check_room(&ring, psi, t)?;
    let mut v = ring.embed(psi)?;
    Evolver::new(field, ring).advance(&mut v, t, false);
    Ok(ring.state(v))
}

/// `Σ x|ψ(x)|² / ‖ψ‖²`.
pub fn center_of_mass(psi: &StateVector) -> f64 {
    let mut m = 0.0;
    let mut w = 0.0;
    for (x, v) in psi.sites() {
        let p = linalg::norm2(v);
        m += x as f64 * p;
        w += p;
    }
    m / w
}

/// Which wave operator a probe realises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveSign {
    /// `Ω₊(t) = U^{−t}U₀^{t}`.
    Plus,
    /// `Ω₋(t) = U^{t}U₀^{−t}`.
    Minus,
}

/// `Ω(t)ψ` for a single `t`.
pub fn omega(ev: &mut Evolver, psi: &[Vec2], t: i64, sign: WaveSign) -> Vec<Vec2> {
    let mut v = psi.to_vec();
    if ev.unperturbed {
        return v;
    }
    let s = match sign {
        WaveSign::Plus => 1,
        WaveSign::Minus => -1,
    };
    ev.advance(&mut v, s * t, true);
    ev.advance(&mut v, -s * t, false);
    v
}

/// `Ω₊(t)ψ` as the telescoped series `ψ + Σ_{s<t} U^{−(s+1)}(U₀ − U)U₀^s ψ`,
/// summed by Horner's rule from the innermost term outwards.
pub fn omega_plus_series(ev: &mut Evolver, field: &CoinField, psi: &[Vec2], t: i64) -> Vec<Vec2> {
    let ring = ev.ring();
    let (lo, hi) = field.window();
    let w_lo = lo - 1;
    let w_hi = hi + 1;
    let in_ring = |x: i64| x >= ring.start && x <= ring.end();
    // (U₀ − U)U₀^s ψ = −V U₀^s ψ lives on [x_min − 1, x_max + 1]
    let mut terms: Vec<Vec<(usize, Vec2)>> = Vec::with_capacity(t.max(0) as usize);
    let mut cur = psi.to_vec();
    for _ in 0..t.max(0) {
        let mut g = Vec::new();
        if !field.deviations().is_empty() {
            for y in w_lo..=w_hi {
                if !in_ring(y) || !in_ring(y - 1) || !in_ring(y + 1) {
                    continue;
                }
                let dr = field.deviation(y + 1);
                let dl = field.deviation(y - 1);
                let ur = cur[(y + 1 - ring.start) as usize];
                let ul = cur[(y - 1 - ring.start) as usize];
                let v = [
                    -(dr.0[0][0] * ur[0] + dr.0[0][1] * ur[1]),
                    -(dl.0[1][0] * ul[0] + dl.0[1][1] * ul[1]),
                ];
                g.push(((y - ring.start) as usize, v));
            }
        }
        terms.push(g);
        ev.advance(&mut cur, 1, true);
    }
    let mut acc = vec![[ZERO, ZERO]; ring.sites];
    for g in terms.iter().rev() {
        for (k, v) in g {
            acc[*k] = linalg::add(&acc[*k], v);
        }
        ev.advance(&mut acc, -1, false);
    }
    acc.iter().zip(psi).map(|(a, p)| linalg::add(a, p)).collect()
}

/// Result of a wave-operator or scattering probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub theta0: f64,
    pub sigma: f64,
    #[serde(rename = "T_measured")]
    pub t_measured: Option<f64>,
    #[serde(rename = "R_measured")]
    pub r_measured: Option<f64>,
    #[serde(rename = "T_predicted")]
    pub t_predicted: Option<f64>,
    #[serde(rename = "R_predicted")]
    pub r_predicted: Option<f64>,
    pub discrepancy: Option<f64>,
    /// Probability left between the two lobes.
    pub overlap: Option<f64>,
    /// Times at which `Ω(t)ψ` was evaluated.
    pub times: Vec<i64>,
    /// `‖Ω(t_k)ψ − Ω(t_{k−1})ψ‖` for `k ≥ 1`.
    pub cauchy_defects: Vec<f64>,
    /// Largest `‖Ω₊(t)ψ − series(t)ψ‖` over `times`.
    pub series_deviation: Option<f64>,
    /// Largest `|⟨ψ, u_b⟩|` over located bound states.
    pub bound_state_overlap: f64,
    /// Largest `|‖U^tψ‖ − 1|` seen during the run.
    pub norm_drift: f64,
}

impl ProbeResult {
    fn empty(theta0: f64, sigma: f64) -> Self {
        ProbeResult {
            theta0,
            sigma,
            t_measured: None,
            r_measured: None,
            t_predicted: None,
            r_predicted: None,
            discrepancy: None,
            overlap: None,
            times: Vec::new(),
            cauchy_defects: Vec::new(),
            series_deviation: None,
            bound_state_overlap: 0.0,
            norm_drift: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable probe")
    }
}

/// Places a packet `LAUNCH_SIGMAS·σ` from the window on the side it must
/// start from to move toward the scatterer.
pub fn launch(field: &CoinField, sigma: f64, xi0: f64, branch: u8) -> Result<PacketSpec> {
    launch_at(field, sigma, xi0, branch, LAUNCH_SIGMAS)
}

/// [`launch`] at a distance of `sigmas·σ`. The packet overlaps anything
/// localised at the window by about `e^{−sigmas²/4}`.
pub fn launch_at(field: &CoinField, sigma: f64, xi0: f64, branch: u8, sigmas: f64) -> Result<PacketSpec> {
    let probe = PacketSpec { x0: 0, sigma, xi0, branch };
    probe.validate()?;
    let c = carrier(&probe, field.params())?;
    if c.velocity.abs() < 1e-3 {
        return Err(Error::InvalidParams(format!("carrier at xi0 = {xi0} barely moves")));
    }
    let (lo, hi) = field.window();
    let d = (sigmas * sigma).ceil() as i64;
    let x0 = if c.velocity > 0.0 { lo - d } else { hi + d };
    Ok(PacketSpec { x0, ..probe })
}

fn bound_overlap(field: &CoinField, psi: &StateVector) -> Result<f64> {
    if field.deviations().is_empty() || !dispersion::bands(field.params()).has_gaps() {
        return Ok(0.0);
    }
    let opts = BoundStateOptions { resolution: 400, ring_sites: 0, edge_margin: 1e-6 };
    let rep = stationary::bound_state_search_with(field, &opts)?;
    Ok(rep
        .states
        .iter()
        .filter_map(|s| s.eigenvector.as_ref())
        .map(|u| psi.inner(u).norm())
        .fold(0.0, f64::max))
}

/// Cauchy defects of `Ω(t)ψ` over `times` (increasing), plus the series check for `Ω₊`.
pub fn wave_operator_probe(
    field: &CoinField,
    spec: &PacketSpec,
    times: &[i64],
    sign: WaveSign,
    ring_sites: usize,
) -> Result<ProbeResult> {
    let psi = gaussian_packet(spec, field.params())?;
    let c = carrier(spec, field.params())?;
    let ring = Ring::centred(field, ring_sites);
    let tmax = times.iter().copied().max().unwrap_or(0);
    check_room(&ring, &psi, tmax)?;
    let v0 = ring.embed(&psi)?;
    let mut ev = Evolver::new(field, ring);
    let mut out = ProbeResult::empty(c.theta, spec.sigma);
    out.bound_state_overlap = bound_overlap(field, &psi)?;
    let mut prev: Option<Vec<Vec2>> = None;
    let mut series_dev: f64 = 0.0;
    for &t in times {
        let w = omega(&mut ev, &v0, t, sign);
        out.norm_drift = out.norm_drift.max((vec_norm(&w) - 1.0).abs());
        if sign == WaveSign::Plus {
            let s = omega_plus_series(&mut ev, field, &v0, t);
            series_dev = series_dev.max(vec_dist(&s, &w));
        }
        if let Some(p) = &prev {
            out.cauchy_defects.push(vec_dist(&w, p));
        }
        out.times.push(t);
        prev = Some(w);
    }
    if sign == WaveSign::Plus {
        out.series_deviation = Some(series_dev);
    }
    Ok(out)
}

/// Runs the incident packet for `2T` steps and compares the transmitted and
/// reflected probabilities with `|t(θ₀)|²`, `|r(θ₀)|²`. `T` defaults to
/// `1.1·(launch distance)/|v|`.
///
/// Probabilities are measured against a free reference run: the transmitted
/// probability is the far-side mass divided by the far-side mass of `U₀^{2T}ψ`,
/// and the reflected one is the excess near-side mass over the free run, on
/// the same scale.
pub fn scattering_probe(field: &CoinField, spec: &PacketSpec, t: Option<i64>, ring_sites: usize) -> Result<ProbeResult> {
    let psi = gaussian_packet(spec, field.params())?;
    let c = carrier(spec, field.params())?;
    let (lo, hi) = field.window();
    let dist = if spec.x0 < lo { lo - spec.x0 } else { spec.x0 - hi } as f64;
    let t = t.unwrap_or_else(|| (1.1 * dist / c.velocity.abs()).ceil() as i64);
    let ring = Ring::centred(field, ring_sites);
    check_room(&ring, &psi, 2 * t)?;
    let mut v = ring.embed(&psi)?;
    let mut v0 = v.clone();
    let mut ev = Evolver::new(field, ring);
    let mut out = ProbeResult::empty(c.theta, spec.sigma);
    out.bound_state_overlap = bound_overlap(field, &psi)?;
    let chunk = 100;
    let mut done = 0;
    while done < 2 * t {
        let k = chunk.min(2 * t - done);
        ev.advance(&mut v, k, false);
        ev.advance(&mut v0, k, true);
        done += k;
        out.norm_drift = out.norm_drift.max((vec_norm(&v) - 1.0).abs());
    }
    let margin = (3.0 * spec.sigma).ceil() as i64;
    let centre = (lo + hi) as f64 / 2.0;
    let from_left = spec.x0 < lo;
    // (far side, near side) probabilities of the perturbed and free runs
    let mut split = [[0.0; 2]; 2];
    let mut middle = 0.0;
    for (k, (val, free)) in v.iter().zip(&v0).enumerate() {
        let x = ring.start + k as i64;
        let far = ((x as f64) > centre) == from_left;
        let side = if far { 0 } else { 1 };
        split[0][side] += linalg::norm2(val);
        split[1][side] += linalg::norm2(free);
        if x >= lo - margin && x <= hi + margin {
            middle += linalg::norm2(val);
        }
    }
    // the part of the packet that never meets the scatterer is removed with the free run
    let incoming = split[1][0];
    let tm = split[0][0] / incoming;
    let rm = (split[0][1] - split[1][1]) / incoming;
    out.t_measured = Some(tm);
    out.r_measured = Some(rm);
    out.overlap = Some(middle);
    if middle > MAX_OVERLAP {
        return Err(Error::InconclusiveProbe { overlap: middle });
    }
    let s = smatrix::smatrix_tm(c.theta, field)?;
    let (tp, rp) = if from_left {
        (s.t_lr.norm_sqr(), s.r_lr.norm_sqr())
    } else {
        (s.t_rl.norm_sqr(), s.r_rl.norm_sqr())
    };
    out.t_predicted = Some(tp);
    out.r_predicted = Some(rp);
    out.discrepancy = Some((tm - tp).abs());
    out.times = vec![t];
    Ok(out)
}

/// Fitted centre-of-mass velocity over `steps` steps of free evolution.
pub fn ballistic_velocity(field: &CoinField, spec: &PacketSpec, steps: i64, ring_sites: usize) -> Result<f64> {
    let psi = gaussian_packet(spec, field.params())?;
    let ring = Ring { start: spec.x0 - ring_sites as i64 / 2, sites: ring_sites };
    check_room(&ring, &psi, steps)?;
    let mut v = ring.embed(&psi)?;
    let mut ev = Evolver::new(field, ring);
    let every = (steps / 40).max(1);
    let mut pts = Vec::new();
    let mut t = 0;
    while t <= steps {
        pts.push((t as f64, center_of_mass(&ring.state(v.clone()))));
        let k = every.min(steps - t);
        if k == 0 {
            break;
        }
        ev.advance(&mut v, k, false);
        t += k;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Per-step density dump `t,x,density` for sites above `floor`.
pub fn density_csv(field: &CoinField, psi: &StateVector, steps: i64, ring: Ring, floor: f64) -> Result<String> {
    check_room(&ring, psi, steps)?;
    let mut v = ring.embed(psi)?;
    let mut ev = Evolver::new(field, ring);
    let mut out = String::from("t,x,density\n");
    for t in 0..=steps {
        for (k, val) in v.iter().enumerate() {
            let p = linalg::norm2(val);
            if p > floor {
                out.push_str(&format!("{t},{},{}\n", ring.start + k as i64, crate::fmt_f64(p)));
            }
        }
        if t < steps {
            ev.advance(&mut v, 1, false);
        }
    }
    Ok(out)
}
