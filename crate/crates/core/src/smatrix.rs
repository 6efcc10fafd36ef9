//! The on-shell scattering matrix `Ŝ(θ)`.
//!
//! Channels are ordered `(right-moving root, left-moving root)`. Both roots
//! share one Jacobian `dξ/dθ`, so the `√(dξ/dθ)` weighting that makes the
//! on-shell norm Euclidean cancels out of the matrix and raw amplitudes can be
//! used directly.
//!
//! `φ^out = Ŝ φ^in` with `φ^in = (R at −∞, L at +∞)` and
//! `φ^out = (R at +∞, L at −∞)`, hence
//!
//! ```text
//! Ŝ = [[t_lr, r_rl],
//!      [r_lr, t_rl]]
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{self, fourier, Gauge, MomentumRoot, SpectralAmplitude};
use crate::error::{Error, Result};
use crate::linalg::{self, cis, Mat2, C64, ONE, ZERO};
use crate::stationary::{self, apply_v, apply_v_adjoint, Incidence, LsSolver};
use crate::walk::CoinField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringMatrix2 {
    pub theta: f64,
    pub matrix: Mat2,
    pub t_lr: C64,
    pub r_lr: C64,
    pub t_rl: C64,
    pub r_rl: C64,
    pub unitarity_defect: f64,
}

impl ScatteringMatrix2 {
    pub fn from_matrix(theta: f64, matrix: Mat2) -> Self {
        let m = matrix.0;
        ScatteringMatrix2 {
            theta,
            matrix,
            t_lr: m[0][0],
            r_lr: m[1][0],
            t_rl: m[1][1],
            r_rl: m[0][1],
            unitarity_defect: matrix.unitarity_defect(),
        }
    }

    /// `|t|²` for incidence from the left.
    pub fn transmission(&self) -> f64 {
        self.t_lr.norm_sqr()
    }

    pub fn reflection(&self) -> f64 {
        self.r_lr.norm_sqr()
    }

    /// Largest entrywise difference to `other`.
    pub fn max_diff(&self, other: &ScatteringMatrix2) -> f64 {
        (self.matrix - other.matrix).max_abs()
    }
}

/// `Ŝ(θ)` from the two transfer-matrix scattering solutions.
pub fn smatrix_tm(theta: f64, field: &CoinField) -> Result<ScatteringMatrix2> {
    smatrix_tm_gauged(theta, field, Gauge::CANONICAL)
}

pub fn smatrix_tm_gauged(theta: f64, field: &CoinField, gauge: Gauge) -> Result<ScatteringMatrix2> {
    let left = stationary::scattering_solution_gauged(theta, Incidence::Left, field, gauge)?;
    let right = stationary::scattering_solution_gauged(theta, Incidence::Right, field, gauge)?;
    let cols = [left.outgoing(), right.outgoing()];
    let m = Mat2::new(cols[0][0], cols[1][0], cols[0][1], cols[1][1]);
    Ok(ScatteringMatrix2::from_matrix(left.theta, m))
}

/// `Ŝ(θ) = 1 − 2πe^{iθ}A(θ)` with `A = F₀(V* − V R(θ−i0) V*)F₀*`.
pub fn smatrix_ls(theta: f64, field: &CoinField) -> Result<ScatteringMatrix2> {
    smatrix_ls_gauged(theta, field, Gauge::CANONICAL)
}

pub fn smatrix_ls_gauged(theta: f64, field: &CoinField, gauge: Gauge) -> Result<ScatteringMatrix2> {
    let roots = dispersion::channel_roots(theta, field.params(), gauge)?;
    let theta = roots_theta(theta, field)?;
    if field.deviations().is_empty() {
        return Ok(ScatteringMatrix2::from_matrix(theta, Mat2::identity()));
    }
    let solver = LsSolver::new(theta, field)?;
    let (lo, hi) = field.window();
    let mut a = [[ZERO; 2]; 2];
    for l in 0..2 {
        let mut amps = vec![ZERO; 2];
        amps[l] = ONE;
        let psi = SpectralAmplitude::new(theta, roots.to_vec(), amps, gauge);
        let free = dispersion::f0_adjoint(&psi, lo - 1, hi + 1);
        let g = apply_v_adjoint(field, &free);
        let h = solver.solve_on_window(&g)?;
        let vh = apply_v(field, &h);
        let q = crate::walk::StateVector::from_fn(lo - 1, hi + 1, |x| linalg::sub(&g.get(x), &vh.get(x)));
        for (k, root) in roots.iter().enumerate() {
            a[k][l] = linalg::inner(&fourier(&q, root.xi), &root.eigenvector);
        }
    }
    let c = cis(theta) * (2.0 * std::f64::consts::PI);
    let m = Mat2::new(ONE - c * a[0][0], -c * a[0][1], -c * a[1][0], ONE - c * a[1][1]);
    Ok(ScatteringMatrix2::from_matrix(theta, m))
}

fn roots_theta(theta: f64, field: &CoinField) -> Result<f64> {
    let bp = dispersion::classify(theta, &dispersion::bands(field.params()));
    match bp.kind {
        dispersion::BandKind::Threshold => Err(Error::Threshold { theta: bp.theta, margin: bp.margin }),
        dispersion::BandKind::Gap => Err(Error::NotInBand { theta: bp.theta }),
        _ => Ok(bp.theta),
    }
}

/// `φ^out = Ŝ(θ) φ^in`; `phi_in` must be given on the channel roots.
pub fn in_out(phi_in: &SpectralAmplitude, field: &CoinField) -> Result<SpectralAmplitude> {
    let s = smatrix_ls_gauged(phi_in.theta, field, phi_in.gauge)?;
    let [a, b] = s.matrix.apply(&[phi_in.amplitudes[0], phi_in.amplitudes[1]]);
    Ok(SpectralAmplitude::new(s.theta, phi_in.roots.clone(), vec![a, b], phi_in.gauge))
}

/// `φ` on the channel roots `[right, left]` at `theta`.
pub fn channel_amplitude(theta: f64, amplitudes: [C64; 2], field: &CoinField) -> Result<SpectralAmplitude> {
    let roots: [MomentumRoot; 2] = dispersion::channel_roots(theta, field.params(), Gauge::CANONICAL)?;
    Ok(SpectralAmplitude::new(roots_theta(theta, field)?, roots.to_vec(), amplitudes.to_vec(), Gauge::CANONICAL))
}

/// One row of a band sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub t: Option<C64>,
    pub r: Option<C64>,
    #[serde(rename = "T")]
    pub big_t: Option<f64>,
    #[serde(rename = "R")]
    pub big_r: Option<f64>,
    pub unitarity_defect: Option<f64>,
    /// Unitarity defect of the resolvent route.
    pub unitarity_defect_ls: Option<f64>,
    pub method_diff: Option<f64>,
    /// `|t|²` has a local extremum here.
    pub resonance: bool,
    pub error: Option<String>,
}

fn sweep_point(theta: f64, field: &CoinField) -> SweepRow {
    let mut row = SweepRow {
        theta,
        t: None,
        r: None,
        big_t: None,
        big_r: None,
        unitarity_defect: None,
        unitarity_defect_ls: None,
        method_diff: None,
        resonance: false,
        error: None,
    };
    match smatrix_tm(theta, field) {
        Ok(s) => {
            row.t = Some(s.t_lr);
            row.r = Some(s.r_lr);
            row.big_t = Some(s.transmission());
            row.big_r = Some(s.reflection());
            row.unitarity_defect = Some(s.unitarity_defect);
            match smatrix_ls(theta, field) {
                Ok(l) => {
                    row.method_diff = Some(s.max_diff(&l));
                    row.unitarity_defect_ls = Some(l.unitarity_defect);
                }
                Err(e) => row.error = Some(format!("{}: {e}", e.code())),
            }
        }
        Err(e) => row.error = Some(format!("{}: {e}", e.code())),
    }
    row
}

/// Both routes at every grid angle, in grid order. Failing points keep their
/// row with `error` set.
pub fn sweep(thetas: &[f64], field: &CoinField) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = thetas.par_iter().map(|&t| sweep_point(t, field)).collect();
    for k in 1..rows.len().saturating_sub(1) {
        if let (Some(a), Some(b), Some(c)) = (rows[k - 1].big_t, rows[k].big_t, rows[k + 1].big_t) {
            let scale = 1e-12;
            rows[k].resonance = (b > a + scale && b > c + scale) || (b < a - scale && b < c - scale);
        }
    }
    rows
}

/// `steps` angles per band, uniformly spaced, keeping `margin` from thresholds.
pub fn band_grid(field: &CoinField, steps: usize, margin: f64) -> Vec<f64> {
    let bs = dispersion::bands(field.params());
    let mut out = Vec::with_capacity(2 * steps);
    for band in [bs.band1, bs.band2] {
        let w = band.width() - 2.0 * margin;
        if w <= 0.0 || steps == 0 {
            continue;
        }
        for k in 0..steps {
            let f = if steps == 1 { 0.5 } else { k as f64 / (steps - 1) as f64 };
            out.push(crate::angle::reduce(band.start + margin + w * f));
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(crate::fmt_f64).unwrap_or_else(|| "NaN".into())
}

/// CSV with `theta,t_re,t_im,r_re,r_im,T,R,unitarity_defect,method_diff`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("theta,t_re,t_im,r_re,r_im,T,R,unitarity_defect,method_diff,resonance,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            crate::fmt_f64(r.theta),
            opt(r.t.map(|c| c.re)),
            opt(r.t.map(|c| c.im)),
            opt(r.r.map(|c| c.re)),
            opt(r.r.map(|c| c.im)),
            opt(r.big_t),
            opt(r.big_r),
            opt(r.unitarity_defect),
            opt(r.method_diff),
            r.resonance as u8,
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    theta: String,
    t_re: String,
    t_im: String,
    r_re: String,
    r_im: String,
    #[serde(rename = "T")]
    big_t: String,
    #[serde(rename = "R")]
    big_r: String,
    unitarity_defect: String,
    method_diff: String,
    resonance: bool,
    error: Option<&'a str>,
}

/// JSON array mirroring the CSV columns, numbers rendered with 17 digits.
pub fn sweep_json(rows: &[SweepRow]) -> String {
    let rows: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            theta: crate::fmt_f64(r.theta),
            t_re: opt(r.t.map(|c| c.re)),
            t_im: opt(r.t.map(|c| c.im)),
            r_re: opt(r.r.map(|c| c.re)),
            r_im: opt(r.r.map(|c| c.im)),
            big_t: opt(r.big_t),
            big_r: opt(r.big_r),
            unitarity_defect: opt(r.unitarity_defect),
            method_diff: opt(r.method_diff),
            resonance: r.resonance,
            error: r.error.as_deref(),
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("serialisable rows")
}
