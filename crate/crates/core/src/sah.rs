//! The smoothed stochastic Abelian-Higgs system
//!
//! `∂_tA = ΔA − P_⊥Im(φ̄D_Aφ) + C_g A + P_⊥ξ_{≤N}`,
//! `∂_tφ = D^jD_jφ + 2σ²_{≤N}φ − :|φ|^{q−1}φ: + ζ_{≤N}`,
//!
//! its gauge-modified variant, `Z²` gauge transformations and the
//! gauge-covariance experiment.
//!
//! States may be stored in a *frame* `c ∈ Z²`: the grid holds `ψ = e^{−ic·x}φ`.
//! Gauge transformations then act by relabelling the frame, which is exact.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::covheat::energy;
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::resonance::C_G;
use crate::spectral::io::csv_row;
use crate::spectral::{
    besov_norm_shifted, besov_norm_vec, default_radius, gauge_invariant_norm_connection,
    gauge_invariant_norm_scalar, leray_spec, ConnectionField, ScalarField, TorusGrid,
};
use crate::wick::{sigma_squared, wick_coefficients, SigmaMethod};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct SahConfig {
    pub m: usize,
    pub big_n: f64,
    pub dt: f64,
    pub t_end: f64,
    /// odd power of the Wick nonlinearity
    pub q: u32,
    pub cg: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub dealias: bool,
    /// abort when `‖φ‖_∞` exceeds this
    pub ceiling: f64,
    /// steps between checkpoints
    pub checkpoint_every: usize,
    /// regularity of the `C^{−κ}` proxy norms
    pub kappa: f64,
    pub noise: bool,
    pub nonlinear: bool,
}

impl SahConfig {
    pub fn new(m: usize, big_n: f64, dt: f64, t_end: f64, q: u32, seed: u64) -> Result<Self> {
        if !(big_n >= 1.0) {
            return Err(Error::Invalid(format!("cutoff N={big_n} must be >= 1")));
        }
        let cfg = SahConfig {
            m,
            big_n,
            dt,
            t_end,
            q,
            cg: C_G,
            sigma2: sigma_squared(big_n, SigmaMethod::Parseval)?,
            seed,
            dealias: true,
            ceiling: 1e6,
            checkpoint_every: ((0.05 / dt).round() as usize).max(1),
            kappa: 0.1,
            noise: true,
            nonlinear: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same run at another cutoff, with `σ²` recomputed.
    pub fn with_cutoff(&self, big_n: f64) -> Result<Self> {
        let mut c = self.clone();
        c.big_n = big_n;
        c.sigma2 = sigma_squared(big_n, SigmaMethod::Parseval)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.m < 4 || self.m % 2 != 0 {
            bad.push(format!("M={} must be even and >= 4", self.m));
        }
        if !(self.big_n >= 1.0) || self.big_n > (self.m / 2) as f64 {
            bad.push(format!("N={} must lie in [1, M/2]", self.big_n));
        }
        if self.q % 2 == 0 {
            bad.push(format!("q={} must be odd", self.q));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            bad.push(format!("dt={} and T={} must be positive", self.dt, self.t_end));
        } else if ((self.t_end / self.dt).round() * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            bad.push(format!("T={} is not a multiple of dt={}", self.t_end, self.dt));
        }
        if !(self.ceiling > 0.0) || self.checkpoint_every == 0 || !(self.kappa >= 0.0) || !self.sigma2.is_finite() {
            bad.push("ceiling, checkpoint interval, kappa and sigma2 must be positive and finite".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Which system is stepped and in which frame.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Modification {
    /// the stored unknown is `e^{−i frame·x}φ`
    pub frame: [i64; 2],
    /// the `ζ` coefficient at physical mode `m` is `ρ_{≤N}(m + zeta_sym) ΔW(m + zeta_idx)`
    pub zeta_sym: [i64; 2],
    pub zeta_idx: [i64; 2],
    /// extra forcing `C_g · cg_shift` in the `A`-equation
    pub cg_shift: [f64; 2],
    /// `ζ` multiplied by `e^{i zeta_phase}`
    pub zeta_phase: f64,
}

impl Modification {
    pub fn standard() -> Self {
        Self::default()
    }

    /// The modified system: `C_g(Ã + n₀)` and the noise with symbol `ρ_{≤N}(· − n₀)`,
    /// stepped in frame `n₀`.
    pub fn modified(n0: [i64; 2]) -> Self {
        Modification {
            frame: n0,
            zeta_sym: [-n0[0], -n0[1]],
            zeta_idx: [0, 0],
            cg_shift: [n0[0] as f64, n0[1] as f64],
            zeta_phase: 0.0,
        }
    }

    /// Standard system driven by `(e^{−in₀·x}ζ)_{≤N}`.
    pub fn transformed_noise(n0: [i64; 2]) -> Self {
        Modification { zeta_idx: n0, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SahState {
    pub t: f64,
    pub a: ConnectionField,
    /// grid values of `e^{−i frame·x}φ`
    pub phi: ScalarField,
    pub frame: [i64; 2],
}

impl SahState {
    pub fn new(a: ConnectionField, phi: ScalarField) -> Self {
        SahState { t: 0.0, a, phi, frame: [0, 0] }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::new(ConnectionField::zeros(grid), ScalarField::zeros(grid))
    }

    /// `φ` itself on the grid.
    pub fn physical_phi(&self) -> ScalarField {
        let g = &self.phi.grid;
        let w = g.plane_wave([self.frame[0] as f64, self.frame[1] as f64]);
        ScalarField::new(g, self.phi.values.iter().zip(w.iter()).map(|(a, b)| a * b).collect())
    }

    /// Re-express in frame `c`; also returns the largest coefficient that
    /// left the resolved band.
    pub fn to_frame(&self, c: [i64; 2]) -> (SahState, f64) {
        let g = &self.phi.grid;
        let (psi, lost) = shift_frame(g, &self.phi.forward().coef, self.frame, c);
        let st = SahState { t: self.t, a: self.a.clone(), phi: ScalarField::new(g, g.inverse(&psi)), frame: c };
        (st, lost)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.phi.is_finite()
    }

    /// `max |div A| / max(‖A‖_∞, 1e-300)`.
    pub fn coulomb_defect(&self) -> f64 {
        let d = self.a.divergence().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        d / self.a.max_abs().max(1e-300)
    }
}

/// Coefficients of a frame-`from` unknown rewritten in frame `to`.
fn shift_frame(g: &TorusGrid, psi: &[C64], from: [i64; 2], to: [i64; 2]) -> (Vec<C64>, f64) {
    let mut out = g.zeros();
    let mut lost: f64 = 0.0;
    for (idx, z) in psi.iter().enumerate() {
        if g.is_nyquist(idx) {
            continue;
        }
        let n = g.mode(idx);
        let j = [n[0] + from[0] - to[0], n[1] + from[1] - to[1]];
        match g.index_of(j).filter(|&k| !g.is_nyquist(k)) {
            Some(k) => out[k] = *z,
            None => lost = lost.max(z.norm()),
        }
    }
    (out, lost)
}

/// `(A + n₀, e^{−in₀·x}φ)`, done by relabelling the frame.
pub fn gauge_transform(state: &SahState, n0: [i64; 2]) -> SahState {
    SahState {
        t: state.t,
        a: state.a.shifted([n0[0] as f64, n0[1] as f64]),
        phi: state.phi.clone(),
        frame: [state.frame[0] - n0[0], state.frame[1] - n0[1]],
    }
}

struct Spec {
    t: f64,
    a: [Vec<C64>; 2],
    psi: Vec<C64>,
    frame: [i64; 2],
}

impl Spec {
    fn from_state(s: &SahState) -> Spec {
        let g = &s.phi.grid;
        let mut a = s.a.spectra();
        leray_spec(g, &mut a);
        Spec { t: s.t, a, psi: s.phi.forward().coef, frame: s.frame }
    }

    fn to_state(&self, g: &TorusGrid) -> SahState {
        let mut a = ConnectionField::from_spectra(g, &self.a);
        a.coulomb = true;
        SahState { t: self.t, a, phi: ScalarField::new(g, g.inverse(&self.psi)), frame: self.frame }
    }
}

/// `[e^{−hλ}, hφ₁(−hλ), √((1 − e^{−2hλ})/(2hλ))]`
fn factors(lam: f64, h: f64) -> [f64; 3] {
    let z = -h * lam;
    if z.abs() < 1e-10 {
        return [z.exp(), h * (1.0 + 0.5 * z), (1.0 + z).sqrt()];
    }
    [z.exp(), h * z.exp_m1() / z, (-(2.0 * z).exp_m1() / (-2.0 * z)).sqrt()]
}

struct Stepper<'a> {
    grid: TorusGrid,
    cfg: &'a SahConfig,
    md: Modification,
    wick: Vec<f64>,
    a_fac: Vec<[f64; 3]>,
}

impl<'a> Stepper<'a> {
    fn new(grid: &TorusGrid, cfg: &'a SahConfig, md: Modification) -> Result<Self> {
        let a_fac = (0..grid.len())
            .map(|idx| {
                let n = grid.mode(idx);
                factors((n[0] * n[0] + n[1] * n[1]) as f64, cfg.dt)
            })
            .collect();
        Ok(Stepper { grid: grid.clone(), cfg, md, wick: wick_coefficients(cfg.q, cfg.sigma2)?, a_fac })
    }

    /// One exponential-Euler step over `[t_k, t_{k+1}]`.
    fn step(&self, st: &mut Spec, path: &NoisePath, k: usize) -> Result<()> {
        let g = &self.grid;
        let cfg = self.cfg;
        let (h, d) = (cfg.dt, cfg.dealias);
        let abar = [st.a[0][0].re, st.a[1][0].re];
        let ks = [st.frame[0] as f64 + abar[0], st.frame[1] as f64 + abar[1]];
        let u = g.to_work(&st.psi, d);
        let sup = u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if !(sup <= cfg.ceiling) {
            return Err(Error::Numerical {
                step: k,
                t: st.t,
                reason: format!("sup |phi| = {sup:e} exceeds ceiling {:e}", cfg.ceiling),
            });
        }
        // (iKψ)ˇ with K = n + c + Ā, and a = A − Ā
        let gw: [Vec<C64>; 2] = [0, 1].map(|j| {
            let mut s = st.psi.clone();
            for (idx, z) in s.iter_mut().enumerate() {
                *z *= I * (g.mode(idx)[j] as f64 + ks[j]);
            }
            g.to_work(&s, d)
        });
        let aw: [Vec<f64>; 2] = [0, 1].map(|j| {
            let mut s = st.a[j].clone();
            s[0] = C64::new(0.0, 0.0);
            g.to_work(&s, d).iter().map(|z| z.re).collect()
        });
        let npts = u.len();
        let mut nphi = vec![C64::new(0.0, 0.0); npts];
        let mut na = [vec![C64::new(0.0, 0.0); npts], vec![C64::new(0.0, 0.0); npts]];
        for i in 0..npts {
            let (a0, a1, ui) = (aw[0][i], aw[1][i], u[i]);
            let mut v = 2.0 * I * (gw[0][i] * a0 + gw[1][i] * a1) - ui * (a0 * a0 + a1 * a1);
            if cfg.nonlinear {
                let r = ui.norm_sqr();
                let (mut poly, mut pw) = (0.0, 1.0);
                for c in &self.wick {
                    poly += c * pw;
                    pw *= r;
                }
                v += ui * (2.0 * cfg.sigma2 - poly);
                for j in 0..2 {
                    let dj = gw[j][i] + I * aw[j][i] * ui;
                    na[j][i] = C64::new((ui.conj() * dj).im, 0.0);
                }
            }
            nphi[i] = v;
        }
        let nphi = g.from_work(nphi, d);
        let mut na = na.map(|w| g.from_work(w, d));
        leray_spec(g, &mut na);
        for j in 0..2 {
            for (o, a) in na[j].iter_mut().zip(st.a[j].iter()) {
                *o = a * cfg.cg - *o;
            }
            na[j][0] += cfg.cg * self.md.cg_shift[j];
        }
        let (dz, dx) = if cfg.noise {
            let f = st.frame;
            let sym = [f[0] + self.md.zeta_sym[0], f[1] + self.md.zeta_sym[1]];
            let idx = [f[0] + self.md.zeta_idx[0], f[1] + self.md.zeta_idx[1]];
            let mut dz = path.zeta_spec(g, k, Some(cfg.big_n), sym, idx)?;
            if self.md.zeta_phase != 0.0 {
                let p = C64::from_polar(1.0, self.md.zeta_phase);
                dz.iter_mut().for_each(|z| *z *= p);
            }
            (Some(dz), Some(path.xi_spec(g, k, Some(cfg.big_n), true)?))
        } else {
            (None, None)
        };
        for idx in 0..g.len() {
            let n = g.mode(idx);
            let kk = [n[0] as f64 + ks[0], n[1] as f64 + ks[1]];
            let f = factors(kk[0] * kk[0] + kk[1] * kk[1], h);
            let mut p = st.psi[idx] * f[0] + nphi[idx] * f[1];
            if let Some(dz) = &dz {
                p += dz[idx] * f[2];
            }
            st.psi[idx] = p;
            let fa = self.a_fac[idx];
            for j in 0..2 {
                let mut v = st.a[j][idx] * fa[0] + na[j][idx] * fa[1];
                if let Some(dx) = &dx {
                    v += dx[j][idx] * fa[2];
                }
                st.a[j][idx] = v;
            }
        }
        g.zero_nyquist(&mut st.psi);
        leray_spec(g, &mut st.a);
        // keep A real
        for j in 0..2 {
            st.a[j][0].im = 0.0;
        }
        st.t += h;
        let finite = |v: &[C64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !(finite(&st.psi) && finite(&st.a[0]) && finite(&st.a[1])) {
            return Err(Error::Numerical { step: k + 1, t: st.t, reason: "non-finite coefficients".into() });
        }
        Ok(())
    }
}

fn check_run(state: &SahState, path: &NoisePath, cfg: &SahConfig, md: &Modification, steps: usize) -> Result<TorusGrid> {
    cfg.validate()?;
    let g = state.phi.grid.clone();
    if g.m() != cfg.m || state.a.grid.m() != cfg.m {
        return Err(Error::GridMismatch(g.m(), cfg.m));
    }
    if state.frame != md.frame {
        return Err(Error::Invalid(format!("state frame {:?} differs from run frame {:?}", state.frame, md.frame)));
    }
    if cfg.noise {
        if (path.dt() - cfg.dt).abs() > 1e-12 * cfg.dt {
            return Err(Error::Invalid(format!("noise path dt={} differs from dt={}", path.dt(), cfg.dt)));
        }
        if path.steps() < steps {
            return Err(Error::Invalid(format!("noise path has {} steps, run needs {steps}", path.steps())));
        }
    }
    Ok(g)
}

/// One step of the (possibly modified) system from `state` at step index `k`.
pub fn sah_step(state: &SahState, path: &NoisePath, k: usize, cfg: &SahConfig, md: &Modification) -> Result<SahState> {
    let g = check_run(state, path, cfg, md, k + 1)?;
    let mut sp = Spec::from_state(state);
    Stepper::new(&g, cfg, *md)?.step(&mut sp, path, k)?;
    Ok(sp.to_state(&g))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub energy: f64,
    pub besov_a: f64,
    pub besov_phi: f64,
    pub gaugeinv_a: f64,
    pub gaugeinv_phi: f64,
}

#[derive(Clone, Debug)]
pub struct SahTrajectory {
    pub checkpoints: Vec<SahState>,
    pub series: Vec<SeriesRow>,
}

pub fn series_row(state: &SahState, cfg: &SahConfig) -> Result<SeriesRow> {
    let g = &state.phi.grid;
    let c = [state.frame[0] as f64, state.frame[1] as f64];
    let a = state.a.spectra();
    let psi = state.phi.forward().coef;
    let al = -cfg.kappa;
    Ok(SeriesRow {
        t: state.t,
        energy: energy(&state.a.shifted(c), &state.phi, cfg.q, cfg.dealias)?,
        besov_a: besov_norm_vec(g, &[&a[0], &a[1]], al, f64::INFINITY),
        besov_phi: besov_norm_shifted(g, &psi, al, f64::INFINITY, [-state.frame[0], -state.frame[1]]),
        gaugeinv_a: gauge_invariant_norm_connection(g, &a, al, f64::INFINITY, default_radius(state.a.mean())),
        gaugeinv_phi: gauge_invariant_norm_scalar(g, &psi, al, f64::INFINITY, 2),
    })
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut s = String::from("t,energy,besov_A,besov_phi,gaugeinv_A,gaugeinv_phi\n");
    for r in rows {
        s.push_str(&csv_row(&[r.t, r.energy, r.besov_a, r.besov_phi, r.gaugeinv_a, r.gaugeinv_phi]));
    }
    s
}

/// Full trajectory. `record_series = false` skips the (costly) norm series.
pub fn sah_solve_with(
    init: &SahState,
    path: &NoisePath,
    cfg: &SahConfig,
    md: &Modification,
    record_series: bool,
) -> Result<SahTrajectory> {
    let steps = cfg.steps();
    let g = check_run(init, path, cfg, md, steps)?;
    let scale = init.a.max_abs().max(1e-300);
    let div = init.a.divergence().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if div > 1e-9 * scale {
        return Err(Error::Invalid(format!("initial connection is not in Coulomb gauge (max |div A| = {div:e})")));
    }
    let stepper = Stepper::new(&g, cfg, *md)?;
    let mut sp = Spec::from_state(init);
    g.zero_nyquist(&mut sp.psi);
    let mut out = SahTrajectory { checkpoints: vec![sp.to_state(&g)], series: vec![] };
    if record_series {
        out.series.push(series_row(&out.checkpoints[0], cfg)?);
    }
    for k in 0..steps {
        stepper.step(&mut sp, path, k)?;
        if (k + 1) % cfg.checkpoint_every == 0 || k + 1 == steps {
            let s = sp.to_state(&g);
            if record_series {
                out.series.push(series_row(&s, cfg)?);
            }
            out.checkpoints.push(s);
        }
    }
    Ok(out)
}

pub fn sah_solve(init: &SahState, path: &NoisePath, cfg: &SahConfig, md: &Modification) -> Result<SahTrajectory> {
    sah_solve_with(init, path, cfg, md, true)
}

/// `max(‖A₁ − A₂‖, ‖φ₁ − φ₂‖)` in the `C^{−κ}` proxy norm, comparing `φ` on
/// the physical modes both states resolve.
pub fn state_distance(s1: &SahState, s2: &SahState, kappa: f64) -> f64 {
    let [a, p] = state_distance_parts(s1, s2, kappa);
    a.max(p)
}

/// The connection and scalar parts of [`state_distance`].
pub fn state_distance_parts(s1: &SahState, s2: &SahState, kappa: f64) -> [f64; 2] {
    let g = &s1.phi.grid;
    let (a1, a2) = (s1.a.spectra(), s2.a.spectra());
    let da: [Vec<C64>; 2] = [0, 1].map(|j| a1[j].iter().zip(a2[j].iter()).map(|(x, y)| x - y).collect());
    let p1 = s1.phi.forward().coef;
    // modes of s1 that s2 cannot represent are dropped by the shift
    let (p2, _) = shift_frame(g, &s2.phi.forward().coef, s2.frame, s1.frame);
    let dp: Vec<C64> = p1
        .iter()
        .zip(p2.iter())
        .enumerate()
        .map(|(idx, (x, y))| {
            let n = g.mode(idx);
            let j = [n[0] + s1.frame[0] - s2.frame[0], n[1] + s1.frame[1] - s2.frame[1]];
            if g.index_of(j).is_some_and(|k| !g.is_nyquist(k)) {
                x - y
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let ea = besov_norm_vec(g, &[&da[0], &da[1]], -kappa, f64::INFINITY);
    let ep = besov_norm_shifted(g, &dp, -kappa, f64::INFINITY, [-s1.frame[0], -s1.frame[1]]);
    [ea, ep]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeRow {
    pub big_n: f64,
    pub cg: f64,
    /// (a): transformed modified run vs the direct run with transformed data and noise
    pub identity: f64,
    /// (b): transformed standard run vs transformed modified run
    pub covariance: f64,
    /// connection and scalar parts of `covariance`
    pub covariance_a: f64,
    pub covariance_phi: f64,
}

/// For each `N`: (i) the standard run, (ii) the modified run, and the direct
/// run from `(A₀, φ₀)^{n₀}` driven by `(ζ^{n₀})_{≤N}`; discrepancies are
/// suprema over checkpoints of [`state_distance`]. All runs share `path`.
pub fn gauge_covariance_experiment(
    init: &SahState,
    path: &NoisePath,
    n0: [i64; 2],
    ns: &[f64],
    cfg: &SahConfig,
) -> Result<Vec<GaugeRow>> {
    if init.frame != [0, 0] {
        return Err(Error::Invalid("gauge experiment expects initial data in frame 0".into()));
    }
    let (init_ii, lost_ii) = init.to_frame(n0);
    let (init_direct, lost_direct) = gauge_transform(init, n0).to_frame([0, 0]);
    let tol = 1e-12 * init.phi.max_abs().max(1.0);
    if lost_ii > tol || lost_direct > tol {
        return Err(Error::Invalid(format!("initial phi is not band-limited enough for the shift {n0:?}")));
    }
    ns.par_iter()
        .map(|&n| {
            let c = cfg.with_cutoff(n)?;
            let run_i = sah_solve_with(init, path, &c, &Modification::standard(), false)?;
            let run_ii = sah_solve_with(&init_ii, path, &c, &Modification::modified(n0), false)?;
            let direct = sah_solve_with(&init_direct, path, &c, &Modification::transformed_noise(n0), false)?;
            let mut row = GaugeRow { big_n: n, cg: c.cg, identity: 0.0, covariance: 0.0, covariance_a: 0.0, covariance_phi: 0.0 };
            for ((si, sii), sd) in run_i.checkpoints.iter().zip(run_ii.checkpoints.iter()).zip(direct.checkpoints.iter()) {
                let tii = gauge_transform(sii, n0);
                row.identity = row.identity.max(state_distance(&tii, sd, c.kappa));
                let [da, dp] = state_distance_parts(&tii, &gauge_transform(si, n0), c.kappa);
                row.covariance_a = row.covariance_a.max(da);
                row.covariance_phi = row.covariance_phi.max(dp);
                row.covariance = row.covariance_a.max(row.covariance_phi);
            }
            Ok(row)
        })
        .collect()
}

pub fn gauge_csv(rows: &[GaugeRow]) -> String {
    let mut s = String::from("N,cg,identity,covariance,covariance_A,covariance_phi\n");
    for r in rows {
        s.push_str(&csv_row(&[r.big_n, r.cg, r.identity, r.covariance, r.covariance_a, r.covariance_phi]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(m: usize, n: f64, dt: f64, t: f64) -> SahConfig {
        let mut c = SahConfig::new(m, n, dt, t, 3, 1).unwrap();
        c.checkpoint_every = 5;
        c
    }

    fn smooth_init(g: &TorusGrid, seed: u64) -> SahState {
        SahState::new(
            ConnectionField::random_coulomb(g, 3.0, 0.5, seed),
            ScalarField::random_smooth(g, 3.0, 0.5, seed + 1),
        )
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let mut c = SahConfig::new(16, 4.0, 0.01, 0.1, 3, 0).unwrap();
        c.q = 4;
        c.big_n = 20.0;
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("q=4") && e.contains("N=20"), "{e}");
        assert!(SahConfig::new(16, 4.0, 0.03, 0.1, 3, 0).is_err());
    }

    #[test]
    fn zero_noise_zero_data_stays_zero() {
        let g = TorusGrid::new(16).unwrap();
        let mut c = small_cfg(16, 4.0, 0.01, 0.1);
        c.noise = false;
        let path = NoisePath::sample_path(0.01, 10, 0).unwrap();
        let tr = sah_solve(&SahState::zeros(&g), &path, &c, &Modification::standard()).unwrap();
        assert!(tr.checkpoints.iter().all(|s| s.a.max_abs() == 0.0 && s.phi.max_abs() == 0.0));
    }

    #[test]
    fn constant_phi_one_step_matches_ode() {
        let g = TorusGrid::new(16).unwrap();
        let mut c = small_cfg(16, 4.0, 1e-3, 1e-3);
        c.noise = false;
        let s2 = c.sigma2;
        let x = 0.1;
        let init = SahState::new(ConnectionField::zeros(&g), ScalarField::new(&g, vec![C64::new(x, 0.0); g.len()]));
        let path = NoisePath::sample_path(1e-3, 1, 0).unwrap();
        let s = sah_step(&init, &path, 0, &c, &Modification::standard()).unwrap();
        let want = x + c.dt * (2.0 * s2 * x - (x * x * x - 2.0 * s2 * x));
        assert!((s.phi.values[5].re - want).abs() < 1e-6 * c.dt, "{} {want}", s.phi.values[5].re);
        assert!(s.a.max_abs() < 1e-15);
    }

    #[test]
    fn coulomb_gauge_preserved_and_replay_is_bitwise() {
        let g = TorusGrid::new(16).unwrap();
        let c = small_cfg(16, 4.0, 1e-3, 0.02);
        let path = NoisePath::sample_path(1e-3, 20, 5).unwrap();
        let init = smooth_init(&g, 2);
        let a = sah_solve(&init, &path, &c, &Modification::standard()).unwrap();
        let b = sah_solve(&init, &path, &c, &Modification::standard()).unwrap();
        for (x, y) in a.checkpoints.iter().zip(b.checkpoints.iter()) {
            assert!(x.coulomb_defect() < 1e-9);
            assert_eq!(x.phi.values, y.phi.values);
            assert_eq!(x.a.comps, y.a.comps);
        }
        assert_eq!(a.series, b.series);
        assert_eq!(a.series.len(), 5);
        assert!(series_csv(&a.series).starts_with("t,energy,besov_A,besov_phi,gaugeinv_A,gaugeinv_phi\n"));
    }

    #[test]
    fn linear_connection_follows_heat_flow() {
        let g = TorusGrid::new(16).unwrap();
        let mut c = small_cfg(16, 4.0, 1e-2, 0.1);
        c.noise = false;
        c.nonlinear = false;
        c.cg = 0.0;
        let init = smooth_init(&g, 4);
        let path = NoisePath::sample_path(1e-2, 10, 0).unwrap();
        let tr = sah_solve(&init, &path, &c, &Modification::standard()).unwrap();
        let last = tr.checkpoints.last().unwrap();
        let mut s = init.a.spectra();
        for j in 0..2 {
            crate::spectral::heat_spec(&g, &mut s[j], 0.1, false);
        }
        assert!(last.a.max_abs_diff(&ConnectionField::from_spectra(&g, &s)) < 1e-13);
    }

    #[test]
    fn gauge_transform_examples() {
        let g = TorusGrid::new(16).unwrap();
        let one = SahState::new(ConnectionField::zeros(&g), ScalarField::new(&g, vec![C64::new(1.0, 0.0); g.len()]));
        let t = gauge_transform(&one, [1, 0]);
        let want = g.plane_wave([-1.0, 0.0]);
        let (t0, lost) = t.to_frame([0, 0]);
        assert!(lost == 0.0);
        assert!(t0.phi.values.iter().zip(want.iter()).all(|(a, b)| (a - b).norm() < 1e-14));
        assert!(t.physical_phi().values.iter().zip(want.iter()).all(|(a, b)| (a - b).norm() < 1e-14));
        assert!(t.a.comps[0].iter().all(|&x| x == 1.0));
        // group law
        let s = smooth_init(&g, 9);
        let ab = gauge_transform(&gauge_transform(&s, [1, 0]), [0, -2]);
        let c = gauge_transform(&s, [1, -2]);
        assert_eq!(ab.frame, c.frame);
        assert!(ab.a.max_abs_diff(&c.a) < 1e-15);
        // energy invariance
        let q = 3;
        let e0 = series_row(&s, &small_cfg(16, 4.0, 0.01, 0.1)).unwrap().energy;
        let e1 = series_row(&c, &small_cfg(16, 4.0, 0.01, 0.1)).unwrap().energy;
        assert!((e0 - e1).abs() < 1e-9 * e0, "{e0} {e1} q={q}");
    }

    #[test]
    fn unit_phase_is_a_symmetry() {
        let g = TorusGrid::new(16).unwrap();
        let c = small_cfg(16, 4.0, 1e-3, 0.01);
        let path = NoisePath::sample_path(1e-3, 10, 8).unwrap();
        let init = smooth_init(&g, 3);
        let th = 0.7;
        let p = C64::from_polar(1.0, th);
        let rot = SahState::new(init.a.clone(), ScalarField::new(&g, init.phi.values.iter().map(|z| z * p).collect()));
        let md = Modification { zeta_phase: th, ..Modification::standard() };
        let a = sah_solve_with(&init, &path, &c, &Modification::standard(), false).unwrap();
        let b = sah_solve_with(&rot, &path, &c, &md, false).unwrap();
        let (x, y) = (a.checkpoints.last().unwrap(), b.checkpoints.last().unwrap());
        assert!(x.a.max_abs_diff(&y.a) < 1e-12);
        assert!(x.phi.values.iter().zip(y.phi.values.iter()).all(|(u, v)| (u * p - v).norm() < 1e-12));
    }

    #[test]
    fn energy_decreases_without_noise() {
        let g = TorusGrid::new(16).unwrap();
        let mut c = small_cfg(16, 4.0, 1e-3, 0.05);
        c.noise = false;
        c.cg = 0.0;
        c.sigma2 = 0.0;
        c.checkpoint_every = 1;
        let path = NoisePath::sample_path(1e-3, 1, 0).unwrap();
        let tr = sah_solve(&smooth_init(&g, 11), &path, &c, &Modification::standard()).unwrap();
        for w in tr.series.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-2 * c.dt * w[0].energy, "{:?}", w);
        }
    }

    #[test]
    fn gauge_experiment_trivial_shift_and_identity() {
        let g = TorusGrid::new(16).unwrap();
        let c = small_cfg(16, 4.0, 1e-3, 0.01);
        let path = NoisePath::sample_path(1e-3, 10, 2).unwrap();
        let init = smooth_init(&g, 6);
        let rows = gauge_covariance_experiment(&init, &path, [0, 0], &[4.0], &c).unwrap();
        assert!(rows[0].identity < 1e-13 && rows[0].covariance < 1e-13, "{rows:?}");
        let rows = gauge_covariance_experiment(&init, &path, [1, 0], &[2.0, 4.0], &c).unwrap();
        assert!(rows.iter().all(|r| r.identity < 5.0 * c.dt), "{rows:?}");
        assert!(rows.iter().all(|r| r.covariance > 0.0));
    }
}
