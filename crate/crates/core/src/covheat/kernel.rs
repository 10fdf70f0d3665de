//! The covariant heat kernel `p_B(w; z)`, `w = (s, y)`, `z = (t, x)`.
//!
//! Three routes: a PDE solve from a mollified delta, the closed form for a
//! constant connection (winding sum), and a Feynman–Kac–Itô Monte Carlo over
//! torus Brownian bridges of rate 2.
//!
//! The PDE route resolves the kernel at the grid scale: the initial delta is
//! `P_{≤M/4}δ_y`, with the cutoff centred on `−B̄` (the mean of the
//! connection at time `s`) so that constant connections are reproduced up to
//! the `M/4` band tail only.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::solve::{evolve_spec, Connection, HeatSolveOpts};
use super::{cov_deriv_spec, curvature_spec};
use crate::error::{Error, Result};
use crate::spectral::{divergence_spec, rho, ConnectionField, ScalarField, TorusGrid};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelQuery {
    pub s: f64,
    pub y: [f64; 2],
    pub t: f64,
    pub x: [f64; 2],
}

impl KernelQuery {
    pub fn new(s: f64, y: [f64; 2], t: f64, x: [f64; 2]) -> Result<Self> {
        if !(s < t) {
            return Err(Error::Invalid(format!("kernel query needs s < t, got s={s}, t={t}")));
        }
        Ok(KernelQuery { s, y, t, x })
    }

    pub fn tau(&self) -> f64 {
        self.t - self.s
    }
}

/// Coefficients of `P_{≤M/4}δ_y` with the cutoff centred on `−abar`.
pub(crate) fn mollified_delta(grid: &TorusGrid, y: [f64; 2], abar: [f64; 2]) -> Vec<C64> {
    let big_n = grid.m() as f64 / 4.0;
    let mut c = grid.zeros();
    for (idx, v) in c.iter_mut().enumerate() {
        if grid.is_nyquist(idx) {
            continue;
        }
        let n = grid.mode(idx);
        let k = [n[0] as f64 + abar[0], n[1] as f64 + abar[1]];
        let w = rho((k[0] * k[0] + k[1] * k[1]).sqrt() / big_n);
        if w > 0.0 {
            *v = C64::from_polar(w / (4.0 * PI * PI), -(n[0] as f64 * y[0] + n[1] as f64 * y[1]));
        }
    }
    c
}

/// Evaluate a trigonometric polynomial at an arbitrary point.
pub(crate) fn eval_trig(grid: &TorusGrid, coef: &[C64], x: [f64; 2]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (idx, c) in coef.iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let n = grid.mode(idx);
        s += c * C64::from_polar(1.0, n[0] as f64 * x[0] + n[1] as f64 * x[1]);
    }
    s
}

/// `x ↦ p_B((s, y); (t, x))` on the grid at each of `times` (absolute, `> s`).
pub fn kernel_pde_field(
    conn: &Connection,
    grid: &TorusGrid,
    s: f64,
    y: [f64; 2],
    times: &[f64],
    opts: &HeatSolveOpts,
) -> Result<Vec<ScalarField>> {
    let coefs = kernel_pde_coefs(conn, grid, s, y, times, opts)?;
    Ok(coefs.into_iter().map(|c| ScalarField::new(grid, grid.inverse(&c))).collect())
}

fn kernel_pde_coefs(
    conn: &Connection,
    grid: &TorusGrid,
    s: f64,
    y: [f64; 2],
    times: &[f64],
    opts: &HeatSolveOpts,
) -> Result<Vec<Vec<C64>>> {
    let t_end = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if times.is_empty() || times.iter().any(|&t| !(t > s)) {
        return Err(Error::Invalid(format!("kernel times must exceed s={s}")));
    }
    let abar = conn.mean_at(grid, s)?;
    let delta = mollified_delta(grid, y, abar);
    let steps = ((t_end - s) / opts.dt - 1e-9).ceil().max(1.0) as usize;
    let h = (t_end - s) / steps as f64;
    let want: Vec<usize> = times.iter().map(|t| ((t - s) / h).round() as usize).collect();
    let mut out: Vec<Option<Vec<C64>>> = vec![None; times.len()];
    evolve_spec(grid, conn, delta, s, t_end, [0.0, 0.0], opts, None, |k, _, psi| {
        for (slot, &w) in out.iter_mut().zip(want.iter()) {
            if w == k {
                *slot = Some(psi.to_vec());
            }
        }
    })?;
    Ok(out.into_iter().map(|o| o.expect("every record time is a step")).collect())
}

/// Point value `p_B(w; z)` from the PDE route.
pub fn kernel_pde(conn: &Connection, grid: &TorusGrid, q: &KernelQuery, opts: &HeatSolveOpts) -> Result<C64> {
    let c = kernel_pde_coefs(conn, grid, q.s, q.y, &[q.t], opts)?;
    Ok(eval_trig(grid, &c[0], q.x))
}

fn wrap(d: f64) -> f64 {
    (d + PI).rem_euclid(2.0 * PI) - PI
}

/// Winding vectors `d + 2πk` and Gaussian weights `p^euc_τ(d + 2πk)` above `1e-16` relative.
fn windings(tau: f64, d: [f64; 2]) -> Vec<([f64; 2], f64)> {
    let d = [wrap(d[0]), wrap(d[1])];
    let kmax = ((37.0 * 4.0 * tau).sqrt() / (2.0 * PI)).ceil() as i64 + 1;
    let mut out = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            let v = [d[0] + 2.0 * PI * k1 as f64, d[1] + 2.0 * PI * k2 as f64];
            let e = (v[0] * v[0] + v[1] * v[1]) / (4.0 * tau);
            if e < 37.0 {
                out.push((v, (-e).exp() / (4.0 * PI * tau)));
            }
        }
    }
    out
}

/// `Σ_k p^euc_{t−s}(y − x + 2πk) e^{i(y − x + 2πk)·b}`.
pub fn kernel_constant(b: [f64; 2], q: &KernelQuery) -> Result<C64> {
    let tau = q.tau();
    let d = [q.y[0] - q.x[0], q.y[1] - q.x[1]];
    Ok(windings(tau, d)
        .into_iter()
        .map(|(v, w)| C64::from_polar(w, v[0] * b[0] + v[1] * b[1]))
        .sum())
}

/// A real one-form stored as an exact trigonometric polynomial.
#[derive(Clone, Debug)]
pub struct TrigConnection {
    mean: [f64; 2],
    kmax: i64,
    /// upper half-lattice modes `n`, coefficients of `A¹`, `A²`, `∂_jA^j`
    modes: Vec<([i64; 2], [C64; 3])>,
}

impl TrigConnection {
    pub fn constant(b: [f64; 2]) -> Self {
        TrigConnection { mean: b, kmax: 0, modes: Vec::new() }
    }

    /// Keep every coefficient above `tol`.
    pub fn from_field(a: &ConnectionField, tol: f64) -> Self {
        let g = &a.grid;
        let s = a.spectra();
        let div = divergence_spec(g, &s);
        let mut modes = Vec::new();
        let mut kmax = 0;
        for idx in 0..g.len() {
            if g.is_nyquist(idx) {
                continue;
            }
            let n = g.mode(idx);
            if !(n[1] > 0 || (n[1] == 0 && n[0] > 0)) {
                continue;
            }
            let c = [s[0][idx], s[1][idx], div[idx]];
            if c.iter().any(|z| z.norm() > tol) {
                kmax = kmax.max(n[0].abs()).max(n[1].abs());
                modes.push((n, c));
            }
        }
        TrigConnection { mean: [s[0][0].re, s[1][0].re], kmax, modes }
    }

    /// `(A¹(x), A²(x), ∂_jA^j(x))`.
    pub fn eval(&self, x: [f64; 2]) -> [f64; 3] {
        let mut out = [self.mean[0], self.mean[1], 0.0];
        if self.modes.is_empty() {
            return out;
        }
        let k = self.kmax as usize;
        let mut p1 = vec![C64::new(0.0, 0.0); 2 * k + 1];
        let mut p2 = vec![C64::new(1.0, 0.0); k + 1];
        let e1 = C64::from_polar(1.0, x[0]);
        let e2 = C64::from_polar(1.0, x[1]);
        p1[k] = C64::new(1.0, 0.0);
        for j in 1..=k {
            p1[k + j] = p1[k + j - 1] * e1;
            p1[k - j] = p1[k + j].conj();
            p2[j] = p2[j - 1] * e2;
        }
        for (n, c) in &self.modes {
            let e = p1[(n[0] + self.kmax) as usize] * p2[n[1] as usize];
            for (o, cc) in out.iter_mut().zip(c.iter()) {
                *o += 2.0 * (cc.re * e.re - cc.im * e.im);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FkiOpts {
    pub paths: usize,
    pub substeps: usize,
    pub seed: u64,
    /// midpoint rule without the divergence term
    pub stratonovich: bool,
}

impl Default for FkiOpts {
    fn default() -> Self {
        FkiOpts { paths: 100_000, substeps: 256, seed: 0, stratonovich: false }
    }
}

/// Monte Carlo estimate and standard error of `p_B(w; z)`.
pub fn kernel_fki(conn: &TrigConnection, q: &KernelQuery, opts: &FkiOpts) -> Result<(C64, f64)> {
    if opts.paths == 0 || opts.substeps == 0 {
        return Err(Error::Invalid("FKI needs at least one path and one substep".into()));
    }
    let tau = q.tau();
    // bridge from y to x + 2πk (unwrapped), class chosen ∝ p^euc_τ
    let classes = windings(tau, [q.x[0] - q.y[0], q.x[1] - q.y[1]]);
    let p0: f64 = classes.iter().map(|c| c.1).sum();
    let mut cdf = Vec::with_capacity(classes.len());
    let mut acc = 0.0;
    for c in &classes {
        acc += c.1 / p0;
        cdf.push(acc);
    }
    const BLOCK: usize = 1024;
    let blocks = opts.paths.div_ceil(BLOCK);
    let m = opts.substeps;
    let h = tau / m as f64;
    let sums: Vec<(C64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(opts.paths - b * BLOCK);
            let mut s = C64::new(0.0, 0.0);
            let mut s2 = 0.0;
            for _ in 0..count {
                let u: f64 = rng.random();
                let ci = cdf.partition_point(|&c| c < u).min(classes.len() - 1);
                let v = classes[ci].0;
                let end = [q.y[0] + v[0], q.y[1] + v[1]];
                let mut w = q.y;
                let mut theta = 0.0;
                for j in 0..m {
                    let rem = tau - j as f64 * h;
                    let next = if j + 1 == m {
                        end
                    } else {
                        let sd = (2.0 * h * (rem - h) / rem).sqrt();
                        let z1: f64 = rng.sample(StandardNormal);
                        let z2: f64 = rng.sample(StandardNormal);
                        [
                            w[0] + (end[0] - w[0]) * h / rem + sd * z1,
                            w[1] + (end[1] - w[1]) * h / rem + sd * z2,
                        ]
                    };
                    let dw = [next[0] - w[0], next[1] - w[1]];
                    if opts.stratonovich {
                        let a = conn.eval([0.5 * (w[0] + next[0]), 0.5 * (w[1] + next[1])]);
                        theta += a[0] * dw[0] + a[1] * dw[1];
                    } else {
                        let a = conn.eval(w);
                        theta += a[0] * dw[0] + a[1] * dw[1] + a[2] * h;
                    }
                    w = next;
                }
                let z = C64::from_polar(1.0, -theta);
                s += z;
                s2 += z.norm_sqr();
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = (C64::new(0.0, 0.0), 0.0);
    for (a, b) in sums {
        s += a;
        s2 += b;
    }
    let n = opts.paths as f64;
    let mean = s / n;
    let var = (s2 / n - mean.norm_sqr()).max(0.0);
    Ok((mean * p0, p0 * (var / n).sqrt()))
}

/// Forward kernel trajectory from a source, every step from `s` to `s + tau`.
fn trajectory(grid: &TorusGrid, conn: &Connection, y: [f64; 2], tau: f64, opts: &HeatSolveOpts) -> Result<Vec<Vec<C64>>> {
    let abar = conn.mean_at(grid, 0.0)?;
    let d = mollified_delta(grid, y, abar);
    let mut traj = vec![d.clone()];
    evolve_spec(grid, conn, d, 0.0, tau, [0.0, 0.0], opts, None, |_, _, psi| traj.push(psi.to_vec()))?;
    Ok(traj)
}

fn require_static(conn: &Connection) -> Result<()> {
    if !conn.is_static() {
        return Err(Error::Invalid("this check needs a time-independent connection".into()));
    }
    Ok(())
}

/// Relative residual of `(∂_s + D^jD_j) conj p_B((s, ·); z) = 0`, with the
/// kernel obtained by one forward solve per grid source and `∂_s` by a
/// centred difference of width `2 ds`.
pub fn time_reversal_residual(
    conn: &Connection,
    grid: &TorusGrid,
    tau: f64,
    x: [f64; 2],
    ds: f64,
    opts: &HeatSolveOpts,
) -> Result<f64> {
    require_static(conn)?;
    let xi = (0..grid.len())
        .min_by(|&a, &b| {
            let pa = grid.point(a);
            let pb = grid.point(b);
            let da = wrap(pa[0] - x[0]).hypot(wrap(pa[1] - x[1]));
            let db = wrap(pb[0] - x[0]).hypot(wrap(pb[1] - x[1]));
            da.total_cmp(&db)
        })
        .unwrap();
    let x = grid.point(xi);
    // G_j(y) = conj p((−(τ + j ds), y); (0, x)) for j = −1, 0, 1
    let taus = [tau - ds, tau, tau + ds];
    let fields: Vec<Vec<[C64; 3]>> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<[C64; 3]>> {
            let y = grid.point(i);
            let abar = conn.mean_at(grid, 0.0)?;
            let d = mollified_delta(grid, y, abar);
            let mut vals = [C64::new(0.0, 0.0); 3];
            let mut psi = d;
            let mut last = 0.0;
            for (j, &tt) in taus.iter().enumerate() {
                psi = evolve_spec(grid, conn, psi, last, tt, [0.0, 0.0], opts, None, |_, _, _| {})?;
                last = tt;
                vals[j] = eval_trig(grid, &psi, x).conj();
            }
            Ok(vec![vals])
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |j: usize| -> Vec<C64> { grid.forward(&fields.iter().map(|v| v[0][j]).collect::<Vec<_>>()) };
    let (gm, g0, gp) = (col(0), col(1), col(2));
    let a = conn.spectra_at(grid, 0.0)?;
    let lap = super::cov_laplacian_spec(grid, &a, &g0, opts.dealias);
    // source time s = −τ, so ∂_s = −∂_τ
    let r: Vec<C64> = (0..grid.len()).map(|i| -(gp[i] - gm[i]) / (2.0 * ds) + lap[i]).collect();
    let rv = grid.inverse(&r);
    let lv = grid.inverse(&lap);
    let num = rv.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let den = lv.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(num / den)
}

/// Trapezoid rule over the time slices `0..=n` of `∫_{space} conj(b_{n−k}) X f_k`.
fn spacetime_pairing(grid: &TorusGrid, back: &[Vec<C64>], fwd: &[Vec<C64>], mid: impl Fn(usize) -> Vec<C64>, h: f64) -> C64 {
    let n = fwd.len() - 1;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=n {
        let b = grid.inverse(&back[n - k]);
        let x = grid.inverse(&mid(k));
        let s: C64 = b.iter().zip(x.iter()).map(|(u, v)| u.conj() * v).sum::<C64>() * grid.cell();
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += s * (w * h);
    }
    acc
}

/// For a static Coulomb connection, the relative residual of
/// `D^k_{B(x)} p = −D^k_{−B(y)} p + 2i∫ p(v;z) F^{kj} D_j p(w;v) dv + i∫ p(v;z) (∂_jF^{kj}) p(w;v) dv`,
/// returned as `max_k |lhs − rhs| / max_k |lhs|`.
pub fn expansion_residual(
    conn: &Connection,
    grid: &TorusGrid,
    y: [f64; 2],
    x: [f64; 2],
    tau: f64,
    opts: &HeatSolveOpts,
) -> Result<f64> {
    require_static(conn)?;
    let a = conn.spectra_at(grid, 0.0)?;
    let fwd = trajectory(grid, conn, y, tau, opts)?;
    let back = trajectory(grid, conn, x, tau, opts)?;
    let h = tau / (fwd.len() - 1) as f64;
    let n = fwd.len() - 1;
    let f12 = curvature_spec(grid, &a);
    // F^{kj}: F^{01} = F12, F^{10} = −F12; ∂_jF^{kj}
    let fkj = |k: usize, j: usize| -> Vec<C64> {
        match (k, j) {
            (0, 1) => f12.clone(),
            (1, 0) => f12.iter().map(|z| -z).collect(),
            _ => grid.zeros(),
        }
    };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..2 {
        let lhs = eval_trig(grid, &cov_deriv_spec(grid, &a, &fwd[n], k, opts.dealias), x);
        let t1 = -eval_trig(grid, &cov_deriv_spec(grid, &a, &back[n], k, opts.dealias), y).conj();
        let j = 1 - k;
        let fk = fkj(k, j);
        let t2 = spacetime_pairing(
            grid,
            &back,
            &fwd,
            |i| grid.product(&fk, &cov_deriv_spec(grid, &a, &fwd[i], j, opts.dealias), opts.dealias),
            h,
        ) * (2.0 * I);
        let hk: Vec<C64> = {
            let d0 = grid.deriv(&fkj(k, 0), 0);
            let d1 = grid.deriv(&fkj(k, 1), 1);
            d0.iter().zip(d1.iter()).map(|(p, q)| p + q).collect()
        };
        let t3 = spacetime_pairing(grid, &back, &fwd, |i| grid.product(&hk, &fwd[i], opts.dealias), h) * I;
        worst = worst.max((lhs - t1 - t2 - t3).norm());
        scale = scale.max(lhs.norm());
    }
    Ok(worst / scale)
}

/// Relative gap between a centred difference in `u` of `p_{uB}(w; z)` at
/// `u = 1` and the double-integral formula
/// `2i∫ p(v;z) B^j D_{B,j} p(w;v) dv + i∫ p(v;z) (∂_jB^j) p(w;v) dv`.
pub fn perturbation_residual(
    b: &ConnectionField,
    y: [f64; 2],
    x: [f64; 2],
    tau: f64,
    du: f64,
    opts: &HeatSolveOpts,
) -> Result<f64> {
    let grid = &b.grid;
    let scaled = |u: f64| {
        let mut c = b.clone();
        c.comps.iter_mut().for_each(|v| v.iter_mut().for_each(|z| *z *= u));
        Connection::Static(c)
    };
    let q = KernelQuery::new(0.0, y, tau, x)?;
    let pp = kernel_pde(&scaled(1.0 + du), grid, &q, opts)?;
    let pm = kernel_pde(&scaled(1.0 - du), grid, &q, opts)?;
    let fd = (pp - pm) / (2.0 * du);
    let conn = scaled(1.0);
    let a = b.spectra();
    let fwd = trajectory(grid, &conn, y, tau, opts)?;
    let back = trajectory(grid, &conn, x, tau, opts)?;
    let h = tau / (fwd.len() - 1) as f64;
    let div = divergence_spec(grid, &a);
    let t1 = spacetime_pairing(
        grid,
        &back,
        &fwd,
        |i| {
            let mut s = grid.product(&a[0], &cov_deriv_spec(grid, &a, &fwd[i], 0, opts.dealias), opts.dealias);
            let s1 = grid.product(&a[1], &cov_deriv_spec(grid, &a, &fwd[i], 1, opts.dealias), opts.dealias);
            s.iter_mut().zip(s1.iter()).for_each(|(p, q)| *p += q);
            s
        },
        h,
    ) * (2.0 * I);
    let t2 = spacetime_pairing(grid, &back, &fwd, |i| grid.product(&div, &fwd[i], opts.dealias), h) * I;
    Ok((fd - t1 - t2).norm() / fd.norm().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covheat::Scheme;

    #[test]
    fn constant_kernel_poisson_and_diamagnetic() {
        let q = KernelQuery::new(0.0, [1.0, 2.0], 0.3, [1.0, 2.0]).unwrap();
        let four: f64 = (-40..=40)
            .flat_map(|a: i64| (-40..=40).map(move |b: i64| (a * a + b * b) as f64))
            .map(|k2| (-0.3 * k2).exp())
            .sum::<f64>()
            / (4.0 * PI * PI);
        let p = kernel_constant([0.0, 0.0], &q).unwrap();
        assert!((p.re - four).abs() < 1e-12 && p.im.abs() < 1e-15);
        let q2 = KernelQuery::new(0.0, [0.3, 5.0], 0.7, [2.0, 1.0]).unwrap();
        let p0 = kernel_constant([0.0, 0.0], &q2).unwrap().re;
        for b in [[0.5, 0.1], [2.0, -3.0], [1.0, 1.0]] {
            assert!(kernel_constant(b, &q2).unwrap().norm() <= p0 + 1e-15);
        }
        assert!(KernelQuery::new(1.0, [0.0; 2], 1.0, [0.0; 2]).is_err());
    }

    #[test]
    fn integer_constant_connection_is_a_phase() {
        // p_{n0} = e^{-i n0·(x−y)} p
        let q = KernelQuery::new(0.0, [0.3, 1.1], 0.2, [2.0, 4.0]).unwrap();
        let n0 = [2.0, -1.0];
        let pb = kernel_constant(n0, &q).unwrap();
        let p = kernel_constant([0.0, 0.0], &q).unwrap();
        let ph = C64::from_polar(1.0, -(n0[0] * (q.x[0] - q.y[0]) + n0[1] * (q.x[1] - q.y[1])));
        assert!((pb - ph * p).norm() < 1e-13);
    }

    #[test]
    fn pde_matches_constant_formula() {
        let g = TorusGrid::new(32).unwrap();
        let b = [1.3, -0.4];
        let opts = HeatSolveOpts { dt: 0.01, scheme: Scheme::Etdrk4, massive: false, dealias: true };
        let q = KernelQuery::new(0.0, g.point(37), 0.2, g.point(300)).unwrap();
        let a = kernel_pde(&Connection::Constant(b), &g, &q, &opts).unwrap();
        let e = kernel_constant(b, &q).unwrap();
        assert!((a - e).norm() < 1e-3, "{a} {e}");
    }

    #[test]
    fn fki_flat_is_exact_and_constant_agrees() {
        // endpoints nearly antipodal: two winding classes carry weight
        let q = KernelQuery::new(0.0, [0.5, 0.5], 0.25, [0.5 + PI - 0.1, 0.2]).unwrap();
        let o = FkiOpts { paths: 2000, substeps: 16, seed: 3, stratonovich: false };
        let (p, se) = kernel_fki(&TrigConnection::constant([0.0, 0.0]), &q, &o).unwrap();
        let e = kernel_constant([0.0, 0.0], &q).unwrap();
        assert!((p - e).norm() < 1e-13 && se < 1e-13);
        let b = [1.2, 0.7];
        let o = FkiOpts { paths: 20_000, ..o };
        let (p, se) = kernel_fki(&TrigConnection::constant(b), &q, &o).unwrap();
        let e = kernel_constant(b, &q).unwrap();
        assert!(se > 0.0 && (p - e).norm() < 4.0 * se * std::f64::consts::SQRT_2, "{p} {e} {se}");
        assert!(kernel_fki(&TrigConnection::constant(b), &q, &FkiOpts { paths: 0, ..o }).is_err());
    }

    #[test]
    fn trig_connection_evaluates_exactly() {
        let g = TorusGrid::new(16).unwrap();
        let a = ConnectionField::random_smooth(&g, 3.0, 1.0, 2).shifted([0.5, -0.2]);
        let t = TrigConnection::from_field(&a, 0.0);
        let d = a.divergence();
        for idx in [0, 17, 100, 255] {
            let v = t.eval(g.point(idx));
            assert!((v[0] - a.comps[0][idx]).abs() < 1e-12);
            assert!((v[1] - a.comps[1][idx]).abs() < 1e-12);
            assert!((v[2] - d[idx]).abs() < 1e-11);
        }
    }

    #[test]
    fn backwards_equation_residual_is_small() {
        let g = TorusGrid::new(32).unwrap();
        let b = ConnectionField::random_coulomb(&g, 2.0, 1.0, 4);
        let opts = HeatSolveOpts { dt: 0.01, scheme: Scheme::Etdrk4, massive: false, dealias: true };
        let r = time_reversal_residual(&Connection::Static(b), &g, 0.2, [1.0, 2.0], 0.01, &opts).unwrap();
        // the remaining gap is the commutator of D^jD_j with the M/4 mollifier
        assert!(r < 5e-3, "{r}");
    }

    #[test]
    fn expansion_and_perturbation_identities() {
        let g = TorusGrid::new(32).unwrap();
        let b = ConnectionField::random_coulomb(&g, 3.0, 1.0, 6);
        let opts = HeatSolveOpts { dt: 0.002, scheme: Scheme::Etdrk4, massive: false, dealias: true };
        let y = [1.0, 2.0];
        let x = [1.6, 2.3];
        let r = expansion_residual(&Connection::Static(b.clone()), &g, y, x, 0.1, &opts).unwrap();
        assert!(r < 1e-2, "expansion {r}");
        let r = perturbation_residual(&b, y, x, 0.1, 1e-3, &opts).unwrap();
        assert!(r < 5e-2, "perturbation {r}");
    }
}
