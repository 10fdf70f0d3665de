//! The covariant linear stochastic object
//! `(∂_t − D_B^jD_{B,j} + 1)φ = ζ_{≤N}`, `φ(0) = 0`, and the norm `‖B‖_cshe`.

use num_complex::Complex64 as C64;

use super::solve::{Connection, CovOp};
use super::curvature_spec;
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::spectral::{divergence_spec, ScalarField, TorusGrid};

#[derive(Clone, Copy, Debug)]
pub struct CsheOpts {
    /// noise cutoff (`P_{≤L}` or `χ_{≤N}`); `None` keeps every resolved mode
    pub cutoff: Option<f64>,
    pub massive: bool,
    pub dealias: bool,
    /// keep every `record_every`-th step (and the last)
    pub record_every: usize,
}

impl Default for CsheOpts {
    fn default() -> Self {
        CsheOpts { cutoff: None, massive: true, dealias: true, record_every: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct CsheTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
}

/// Exponential Euler with the stochastic convolution of the diagonal part
/// sampled exactly per mode; `noise(k)` is the increment on `[t_k, t_{k+1}]`.
pub(crate) fn cshe_evolve(
    conn: &Connection,
    grid: &TorusGrid,
    h: f64,
    steps: usize,
    opts: &CsheOpts,
    noise: &dyn Fn(usize) -> Result<Vec<C64>>,
) -> Result<CsheTrajectory> {
    let mass = if opts.massive { 1.0 } else { 0.0 };
    let mut psi = grid.zeros();
    let mut out = CsheTrajectory { times: vec![0.0], fields: vec![ScalarField::zeros(grid)] };
    let every = opts.record_every.max(1);
    let mut cached: Option<([f64; 2], Vec<[f64; 3]>)> = None;
    for k in 0..steps {
        let t = k as f64 * h;
        let spec = conn.spectra_at(grid, t)?;
        let abar = [spec[0][0].re, spec[1][0].re];
        if cached.as_ref().map(|c| c.0 != abar).unwrap_or(true) {
            let c = (0..grid.len())
                .map(|idx| {
                    let n = grid.mode(idx);
                    let kk = [n[0] as f64 + abar[0], n[1] as f64 + abar[1]];
                    let lam = kk[0] * kk[0] + kk[1] * kk[1] + mass;
                    let z = -h * lam;
                    let phi1 = if z.abs() < 1e-10 { 1.0 + 0.5 * z } else { z.exp_m1() / z };
                    // variance factor (1 − e^{−2hλ})/(2hλ)
                    let var = if z.abs() < 1e-10 { 1.0 + z } else { -(2.0 * z).exp_m1() / (-2.0 * z) };
                    [z.exp(), h * phi1, var.sqrt()]
                })
                .collect();
            cached = Some((abar, c));
        }
        let cf = &cached.as_ref().unwrap().1;
        let nl = CovOp::new(grid, &spec, abar, opts.dealias).apply(&psi, abar);
        let dw = noise(k)?;
        for idx in 0..grid.len() {
            let c = &cf[idx];
            psi[idx] = psi[idx] * c[0] + nl[idx] * c[1] + dw[idx] * c[2];
        }
        grid.zero_nyquist(&mut psi);
        if !psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Numerical { step: k + 1, t: t + h, reason: "non-finite coefficients".into() });
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            out.times.push(t + h);
            out.fields.push(ScalarField::new(grid, grid.inverse(&psi)));
        }
    }
    Ok(out)
}

/// Solve on `[0, t_end]` on the noise path's time grid.
pub fn cshe_object(
    conn: &Connection,
    grid: &TorusGrid,
    path: &NoisePath,
    t_end: f64,
    opts: &CsheOpts,
) -> Result<CsheTrajectory> {
    let h = path.dt();
    let steps = (t_end / h).round() as usize;
    if steps == 0 || steps > path.steps() || (steps as f64 * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Invalid(format!(
            "noise path (dt={h}, {} steps) does not match horizon {t_end}",
            path.steps()
        )));
    }
    let noise = |k: usize| path.zeta_spec(grid, k, opts.cutoff, [0, 0], [0, 0]);
    cshe_evolve(conn, grid, h, steps, opts, &noise)
}

/// The five summands of `‖B‖_{T,cshe}` from `samples ≥ 2` equispaced times:
/// `L^∞L^∞(B)`, `L²L^∞(∇B)`, `L^∞L^∞(∂_jB^j)`, `L¹L^∞(∂_tB)`, `L¹L^∞(∂_jF^{kj})`.
pub fn cshe_norm_parts(conn: &Connection, grid: &TorusGrid, t_end: f64, samples: usize) -> Result<[f64; 5]> {
    if samples < 2 {
        return Err(Error::Invalid("cshe norm needs at least two time samples".into()));
    }
    let dt = t_end / (samples - 1) as f64;
    let sup = |v: &[C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut parts = [0.0f64; 5];
    let mut prev: Option<Vec<Vec<C64>>> = None;
    for i in 0..samples {
        let t = i as f64 * dt;
        let s = conn.spectra_at(grid, t)?;
        let w = if i == 0 || i + 1 == samples { 0.5 * dt } else { dt };
        let vals: Vec<Vec<C64>> = s.iter().map(|c| grid.inverse(c)).collect();
        let bmax = (0..grid.len()).map(|p| (vals[0][p].norm_sqr() + vals[1][p].norm_sqr()).sqrt()).fold(0.0, f64::max);
        parts[0] = parts[0].max(bmax);
        let grads: Vec<Vec<C64>> = (0..2).flat_map(|k| (0..2).map(move |j| (k, j))).map(|(k, j)| grid.inverse(&grid.deriv(&s[k], j))).collect();
        let gmax = (0..grid.len()).map(|p| grads.iter().map(|g| g[p].norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
        parts[1] += w * gmax * gmax;
        parts[2] = parts[2].max(sup(&grid.inverse(&divergence_spec(grid, &s))));
        if let Some(p) = &prev {
            let m = (0..grid.len())
                .map(|q| ((vals[0][q] - p[0][q]).norm_sqr() + (vals[1][q] - p[1][q]).norm_sqr()).sqrt())
                .fold(0.0, f64::max);
            parts[3] += m;
        }
        // (∂_jF^{kj})_k = (∂₂F¹², −∂₁F¹²)
        let f = curvature_spec(grid, &s);
        let v0 = grid.inverse(&grid.deriv(&f, 1));
        let v1 = grid.inverse(&grid.deriv(&f, 0));
        let fmax = (0..grid.len()).map(|q| (v0[q].norm_sqr() + v1[q].norm_sqr()).sqrt()).fold(0.0, f64::max);
        parts[4] += w * fmax;
        prev = Some(vals);
    }
    parts[1] = parts[1].sqrt();
    Ok(parts)
}

pub fn cshe_norm(conn: &Connection, grid: &TorusGrid, t_end: f64, samples: usize) -> Result<f64> {
    Ok(cshe_norm_parts(conn, grid, t_end, samples)?.iter().sum())
}
