//! Parameter ledger, admissible time scales, the solution Ansatz and decay reports.

use num_complex::Complex64 as C64;

use crate::covheat::{cshe_evolve, Connection, CsheOpts};
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::sah::{SahConfig, SahTrajectory};
use crate::spectral::io::csv_row;
use crate::spectral::{
    default_radius, gauge_invariant_norm_connection, heat_spec, lp_norm, rho_le, ConnectionField, ScalarField,
    TorusGrid,
};

/// Exponents of the decay argument. The parameters themselves underflow
/// `f64` for any reasonable `ν`, so they are stored as base-10 logarithms.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterLedger {
    pub nu: f64,
    pub log10_eta: f64,
    /// `η₁, η₂, η₃`
    pub log10_eta_j: [f64; 3],
    pub log10_kappa: f64,
    /// `κ₁ … κ₄`
    pub log10_kappa_j: [f64; 4],
    pub log10_r: f64,
    /// grid `L^r` norms use `min(r, r_cap)`
    pub r_cap: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c3: f64,
}

impl ParameterLedger {
    pub fn new(nu: f64, c3: f64, r_cap: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) || !(c3 > 0.0) || !(r_cap >= 1.0) {
            return Err(Error::Invalid(format!("ledger needs 0 < nu < 1, c3 > 0, r_cap >= 1 (nu={nu}, c3={c3}, r_cap={r_cap})")));
        }
        let ln = nu.log10();
        let eta = 100.0 * ln;
        let e1 = 10.0 * eta;
        let e2 = 10.0 * e1;
        let e3 = 10.0 * e2;
        let k1 = 2.0 + eta + e3;
        let kappa = 10.0 * ln + k1;
        let k2 = k1 - 10.0 * ln;
        let k3 = k2 - 10.0 * ln;
        let k4 = k3 - 10.0 * ln;
        Ok(ParameterLedger {
            nu,
            log10_eta: eta,
            log10_eta_j: [e1, e2, e3],
            log10_kappa: kappa,
            log10_kappa_j: [k1, k2, k3, k4],
            log10_r: -10.0 * kappa,
            r_cap,
            alpha: 0.75,
            beta: 2.5,
            gamma: 2.0 / 7.0,
            c3,
        })
    }

    /// `1/r < κ < κ₁ < … < κ₄ < η₃ < η₂ < η₁ < η`, compared in logarithms.
    pub fn ordering_holds(&self) -> bool {
        let mut chain = vec![-self.log10_r, self.log10_kappa];
        chain.extend(self.log10_kappa_j);
        chain.extend(self.log10_eta_j.iter().rev());
        chain.push(self.log10_eta);
        chain.windows(2).all(|w| w[0] < w[1])
    }

    pub fn r_used(&self) -> f64 {
        if self.log10_r > self.r_cap.log10() {
            self.r_cap
        } else {
            10f64.powf(self.log10_r)
        }
    }

    /// `L^{κ_j}` evaluated literally (`j ∈ 1..=4`).
    pub fn l_pow_kappa(&self, l: f64, j: usize) -> f64 {
        let k = 10f64.powf(self.log10_kappa_j[j - 1]);
        (k * l.ln()).exp()
    }

    /// `(name, log10 value)` pairs for manifests.
    pub fn table(&self) -> Vec<(String, f64)> {
        let mut t = vec![("eta".to_string(), self.log10_eta)];
        for (j, v) in self.log10_eta_j.iter().enumerate() {
            t.push((format!("eta_{}", j + 1), *v));
        }
        t.push(("kappa".into(), self.log10_kappa));
        for (j, v) in self.log10_kappa_j.iter().enumerate() {
            t.push((format!("kappa_{}", j + 1), *v));
        }
        t.push(("r".into(), self.log10_r));
        t
    }
}

impl Default for ParameterLedger {
    fn default() -> Self {
        ParameterLedger::new(0.1, 1.0, 8.0).expect("default ledger is valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibleTau {
    pub lo: f64,
    pub hi: f64,
    pub chosen: f64,
    /// `max(‖A⁺₀‖^α, ‖φ⁺₀‖^β, L^{κ₃})`
    pub m: f64,
}

pub fn admissible_tau(norm_a: f64, norm_phi: f64, l: f64, ledger: &ParameterLedger) -> Result<AdmissibleTau> {
    if !(norm_a >= 0.0) || !(norm_phi >= 0.0) || !(l >= 1.0) {
        return Err(Error::Invalid(format!("admissible tau needs norms >= 0 and L >= 1 (got {norm_a}, {norm_phi}, {l})")));
    }
    let m = norm_a.powf(ledger.alpha).max(norm_phi.powf(ledger.beta)).max(ledger.l_pow_kappa(l, 3));
    let c = ledger.c3;
    Ok(AdmissibleTau { lo: 0.25 * c / m, hi: 4.0 * c / m, chosen: c / m, m })
}

/// One time slice of the Ansatz `A = ↿ + B + S + Z`, `φ = φ_{B,lo} + φ_hi + ψ`.
#[derive(Clone, Debug)]
pub struct AnsatzSlice {
    pub t: f64,
    pub lin: ConnectionField,
    pub b: ConnectionField,
    pub s: ConnectionField,
    pub z: ConnectionField,
    pub phi_b_lo: ScalarField,
    pub phi_lin: ScalarField,
    pub phi_hi: ScalarField,
    pub psi: ScalarField,
}

fn ou_factor(lam: f64, h: f64) -> [f64; 2] {
    let z = -h * lam;
    let var = if z.abs() < 1e-10 { 1.0 + z } else { -(2.0 * z).exp_m1() / (-2.0 * z) };
    [z.exp(), var.sqrt()]
}

/// Checkpoint indices of `traj` covering `[t0, t0 + len]`, and the step index of `t0`.
fn window(traj: &SahTrajectory, cfg: &SahConfig, t0: f64, len: f64) -> Result<(Vec<usize>, usize)> {
    let first = traj
        .checkpoints
        .iter()
        .position(|s| (s.t - t0).abs() < 1e-9 * t0.max(1.0))
        .ok_or_else(|| Error::Invalid(format!("window start t0={t0} is not a checkpoint time")))?;
    if traj.checkpoints.iter().any(|s| s.frame != [0, 0]) {
        return Err(Error::Invalid("Ansatz split expects frame-0 trajectories".into()));
    }
    let end = t0 + len;
    if !(len > 0.0) || end > traj.checkpoints.last().map(|s| s.t).unwrap_or(0.0) + 1e-9 {
        return Err(Error::Invalid(format!("window [{t0}, {end}] is outside the trajectory")));
    }
    let idx: Vec<usize> = (first..traj.checkpoints.len()).filter(|&i| traj.checkpoints[i].t <= end + 1e-9).collect();
    Ok((idx, (t0 / cfg.dt).round() as usize))
}

/// Flat massive OU objects `↿` (from `P_⊥ξ_{≤N}`) and `ζ`-driven scalars with
/// the extra symbols in `weights`, sampled at the given times after `k0`.
fn flat_objects(
    grid: &TorusGrid,
    path: &NoisePath,
    cfg: &SahConfig,
    k0: usize,
    times: &[f64],
    t0: f64,
    weights: &[&dyn Fn([i64; 2]) -> f64],
) -> Result<(Vec<[Vec<C64>; 2]>, Vec<Vec<Vec<C64>>>)> {
    let h = cfg.dt;
    let fac: Vec<[f64; 2]> = (0..grid.len())
        .map(|i| {
            let n = grid.mode(i);
            ou_factor((n[0] * n[0] + n[1] * n[1]) as f64 + 1.0, h)
        })
        .collect();
    let w: Vec<Vec<f64>> = weights.iter().map(|f| (0..grid.len()).map(|i| f(grid.mode(i))).collect()).collect();
    let mut lin = [grid.zeros(), grid.zeros()];
    let mut sc: Vec<Vec<C64>> = vec![grid.zeros(); weights.len()];
    let mut out_lin = Vec::new();
    let mut out_sc: Vec<Vec<Vec<C64>>> = Vec::new();
    let mut k = 0usize;
    for &t in times {
        let target = ((t - t0) / h).round() as usize;
        while k < target {
            if cfg.noise {
                let dx = path.xi_spec(grid, k0 + k, Some(cfg.big_n), true)?;
                let dz = path.zeta_spec(grid, k0 + k, Some(cfg.big_n), [0, 0], [0, 0])?;
                for i in 0..grid.len() {
                    let f = fac[i];
                    for j in 0..2 {
                        lin[j][i] = lin[j][i] * f[0] + dx[j][i] * f[1];
                    }
                    for (s, ww) in sc.iter_mut().zip(w.iter()) {
                        s[i] = s[i] * f[0] + dz[i] * (ww[i] * f[1]);
                    }
                }
            }
            k += 1;
        }
        out_lin.push(lin.clone());
        out_sc.push(sc.clone());
    }
    Ok((out_lin, out_sc))
}

/// Split the trajectory on `[t0, t0 + len]` at every checkpoint. `A(t₀)` is
/// divided as `A⁺₀ = P_{≤L}A(t₀)`, `A⁻₀ = A(t₀) − A⁺₀`.
pub fn ansatz_split(
    traj: &SahTrajectory,
    path: &NoisePath,
    cfg: &SahConfig,
    l: f64,
    t0: f64,
    len: f64,
) -> Result<Vec<AnsatzSlice>> {
    let (idx, k0) = window(traj, cfg, t0, len)?;
    let g = traj.checkpoints[idx[0]].phi.grid.clone();
    if !(l >= 1.0) || l > (g.m() / 2) as f64 {
        return Err(Error::Invalid(format!("low-frequency threshold L={l} must lie in [1, M/2]")));
    }
    if k0 % cfg.checkpoint_every.max(1) != 0 {
        return Err(Error::Invalid("window must start on the regular checkpoint grid".into()));
    }
    let times: Vec<f64> = idx.iter().map(|&i| traj.checkpoints[i].t).collect();
    let a0 = traj.checkpoints[idx[0]].a.spectra();
    let lo = |n: [i64; 2]| rho_le(n, l);
    let mut plus = a0.clone();
    for c in plus.iter_mut() {
        g.multiply(c, lo);
    }
    let minus: [Vec<C64>; 2] = [0, 1].map(|j| a0[j].iter().zip(plus[j].iter()).map(|(x, y)| x - y).collect());
    let one = |_: [i64; 2]| 1.0;
    let hi = |n: [i64; 2]| 1.0 - rho_le(n, l);
    let (lins, scs) = flat_objects(&g, path, cfg, k0, &times, t0, &[&one, &hi])?;

    // φ_{B,lo}: covariant massive object driven by P_{≤L}ζ_{≤N}, recorded on the checkpoint grid
    let steps = ((times[times.len() - 1] - t0) / cfg.dt).round() as usize;
    let conn = Connection::HeatFlow { data: ConnectionField::from_spectra(&g, &plus), t0: 0.0 };
    let opts = CsheOpts { cutoff: None, massive: true, dealias: cfg.dealias, record_every: cfg.checkpoint_every };
    let noise = |k: usize| -> Result<Vec<C64>> {
        if !cfg.noise {
            return Ok(g.zeros());
        }
        let mut z = path.zeta_spec(&g, k0 + k, Some(cfg.big_n), [0, 0], [0, 0])?;
        g.multiply(&mut z, lo);
        Ok(z)
    };
    let cov = if steps > 0 { Some(cshe_evolve(&conn, &g, cfg.dt, steps, &opts, &noise)?) } else { None };

    let mut out = Vec::with_capacity(idx.len());
    for (slot, &ci) in idx.iter().enumerate() {
        let st = &traj.checkpoints[ci];
        let t = st.t;
        let dt = t - t0;
        let flow = |data: &[Vec<C64>; 2]| {
            let mut s = data.clone();
            for c in s.iter_mut() {
                heat_spec(&g, c, dt, false);
            }
            ConnectionField::from_spectra(&g, &s)
        };
        let b = flow(&plus);
        let s = flow(&minus);
        let lin = ConnectionField::from_spectra(&g, &lins[slot]);
        let mut z = ConnectionField::zeros(&g);
        for j in 0..2 {
            for i in 0..g.len() {
                z.comps[j][i] = st.a.comps[j][i] - lin.comps[j][i] - b.comps[j][i] - s.comps[j][i];
            }
        }
        let phi_b_lo = match &cov {
            Some(tr) => {
                let pos = tr
                    .times
                    .iter()
                    .position(|&x| (x - dt).abs() < 1e-9 * dt.max(1.0))
                    .ok_or_else(|| Error::Invalid(format!("no covariant object sample at t={t}")))?;
                tr.fields[pos].clone()
            }
            None => ScalarField::zeros(&g),
        };
        let phi_lin = ScalarField::new(&g, g.inverse(&scs[slot][0]));
        let phi_hi = ScalarField::new(&g, g.inverse(&scs[slot][1]));
        let psi = ScalarField::new(
            &g,
            (0..g.len()).map(|i| st.phi.values[i] - phi_b_lo.values[i] - phi_hi.values[i]).collect(),
        );
        out.push(AnsatzSlice { t, lin, b, s, z, phi_b_lo, phi_lin, phi_hi, psi });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRow {
    pub t: f64,
    /// `(gauge-invariant norm of A − ↿)^γ`
    pub gaugeinv_a_gamma: f64,
    /// `‖φ − φ_lin‖_{L^r}`, `r` capped
    pub psi_lr: f64,
    pub max_col: f64,
    pub window_id: usize,
    pub raw_a: f64,
    pub raw_phi: f64,
    /// `max_col` grew since the previous checkpoint of the same window
    pub grows: bool,
}

/// Decay diagnostics over consecutive windows `(t0, len)`.
pub fn decay_report(
    traj: &SahTrajectory,
    path: &NoisePath,
    cfg: &SahConfig,
    ledger: &ParameterLedger,
    windows: &[(f64, f64)],
) -> Result<Vec<DecayRow>> {
    let r = ledger.r_used();
    let al = -cfg.kappa;
    let mut rows = Vec::new();
    for (w, &(t0, len)) in windows.iter().enumerate() {
        let (idx, k0) = window(traj, cfg, t0, len)?;
        let g = traj.checkpoints[idx[0]].phi.grid.clone();
        let times: Vec<f64> = idx.iter().map(|&i| traj.checkpoints[i].t).collect();
        let one = |_: [i64; 2]| 1.0;
        let (lins, scs) = flat_objects(&g, path, cfg, k0, &times, t0, &[&one])?;
        let mut prev: Option<f64> = None;
        for (slot, &ci) in idx.iter().enumerate() {
            let st = &traj.checkpoints[ci];
            let a = st.a.spectra();
            let diff: [Vec<C64>; 2] = [0, 1].map(|j| a[j].iter().zip(lins[slot][j].iter()).map(|(x, y)| x - y).collect());
            let mean = [diff[0][0].re, diff[1][0].re];
            let ga = gauge_invariant_norm_connection(&g, &diff, al, f64::INFINITY, default_radius(mean));
            let lin_phi = g.inverse(&scs[slot][0]);
            let rest: Vec<C64> = st.phi.values.iter().zip(lin_phi.iter()).map(|(x, y)| x - y).collect();
            let psi_lr = lp_norm(&g, &rest, r);
            let gag = ga.powf(ledger.gamma);
            let max_col = gag.max(psi_lr);
            let raw_a = gauge_invariant_norm_connection(&g, &a, al, f64::INFINITY, default_radius(st.a.mean()));
            let raw_phi = crate::spectral::gauge_invariant_norm_scalar(&g, &st.phi.forward().coef, al, f64::INFINITY, 1);
            rows.push(DecayRow {
                t: st.t,
                gaugeinv_a_gamma: gag,
                psi_lr,
                max_col,
                window_id: w,
                raw_a,
                raw_phi,
                grows: prev.is_some_and(|p| max_col > p),
            });
            prev = Some(max_col);
        }
    }
    Ok(rows)
}

pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from("t,gaugeinvA_gamma,psi_Lr,max_col,window_id\n");
    for r in rows {
        let mut line = csv_row(&[r.t, r.gaugeinv_a_gamma, r.psi_lr, r.max_col]);
        line.pop();
        s.push_str(&format!("{line},{}\n", r.window_id));
    }
    s
}
