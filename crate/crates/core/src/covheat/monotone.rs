//! Residual of the covariant monotonicity identity
//!
//! `∂_t(K|φ|^p/p) = −ΔK|φ|^p/p + KΔ(|φ|^p/p)
//!     − K((p−2)/4 · |φ|^{p−4}|∇|φ|²|² + |φ|^{p−2}|D_Aφ|² − |φ|^{p−2}Re(φ̄G))`
//!
//! for `(∂_t − D_A^jD_{A,j})φ = G` and `(∂_t + Δ)K = 0`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{ConnectionField, ScalarField, TorusGrid};

type Of<'a, T> = Box<dyn Fn(f64) -> T + 'a>;

/// Space-time data sampled on a grid.
pub struct MonotoneInput<'a> {
    pub grid: TorusGrid,
    pub a: Of<'a, ConnectionField>,
    pub phi: Of<'a, ScalarField>,
    pub g: Of<'a, ScalarField>,
    pub k: Of<'a, Vec<f64>>,
}

/// `∫|lhs − rhs| dx` at time `t`, with `∂_t` by a centred difference of half-width `dt`.
pub fn monotonicity_residual(inp: &MonotoneInput, t: f64, p: f64, dt: f64) -> Result<f64> {
    if p < 2.0 {
        return Err(Error::Invalid(format!("monotonicity identity needs p >= 2, got {p}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let g = &inp.grid;
    let energy_density = |tt: f64| -> Vec<f64> {
        let k = (inp.k)(tt);
        let phi = (inp.phi)(tt);
        k.iter().zip(phi.values.iter()).map(|(k, v)| k * v.norm().powf(p) / p).collect()
    };
    let (up, um) = (energy_density(t + dt), energy_density(t - dt));
    let k = (inp.k)(t);
    let phi = (inp.phi)(t);
    let a = (inp.a)(t);
    let gf = (inp.g)(t);
    let real = |v: &[f64]| g.forward(&v.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
    let lap = |v: &[f64]| -> Vec<f64> { g.inverse(&g.laplacian(&real(v))).iter().map(|z| z.re).collect() };
    let lap_k = lap(&k);
    let u: Vec<f64> = phi.values.iter().map(|v| v.norm().powf(p) / p).collect();
    let lap_u = lap(&u);
    let w: Vec<f64> = phi.values.iter().map(|v| v.norm_sqr()).collect();
    let ws = real(&w);
    let grad_w: Vec<Vec<C64>> = (0..2).map(|j| g.inverse(&g.deriv(&ws, j))).collect();
    let sp = phi.forward().coef;
    let dphi: Vec<Vec<C64>> = (0..2).map(|j| g.inverse(&g.deriv(&sp, j))).collect();
    let mut total = 0.0;
    for i in 0..g.len() {
        let v = phi.values[i];
        let m = v.norm();
        let gw2 = grad_w[0][i].re.powi(2) + grad_w[1][i].re.powi(2);
        let first = if p == 2.0 { 0.0 } else { (p - 2.0) / 4.0 * m.powf(p - 4.0) * gw2 };
        // D_Aφ pointwise: spectral ∂ plus the grid product iAφ
        let d0 = dphi[0][i] + C64::new(0.0, a.comps[0][i]) * v;
        let d1 = dphi[1][i] + C64::new(0.0, a.comps[1][i]) * v;
        let dd = d0.norm_sqr() + d1.norm_sqr();
        let mp2 = m.powf(p - 2.0);
        let rhs = -lap_k[i] * u[i] + k[i] * lap_u[i] - k[i] * (first + mp2 * dd - mp2 * (v.conj() * gf.values[i]).re);
        let lhs = (up[i] - um[i]) / (2.0 * dt);
        total += (lhs - rhs).abs();
    }
    Ok(total * g.cell())
}

/// A manufactured solution with analytic `G`: with `r(s) = 1/(c + cos s)`,
/// `φ = e^{−t}(r(x₁) + i r(x₂ + t))`, `A = ((1 + t) sin x₂, r(x₁))` (divergence
/// free), `K = 2 + e^t cos x₁`. Smaller `c > 1` means slower Fourier decay.
pub struct Manufactured {
    pub grid: TorusGrid,
    pub c: f64,
}

impl Manufactured {
    fn r(&self, s: f64) -> [f64; 3] {
        let d = self.c + s.cos();
        let r = 1.0 / d;
        let r1 = s.sin() / (d * d);
        let r2 = s.cos() / (d * d) + 2.0 * s.sin().powi(2) / (d * d * d);
        [r, r1, r2]
    }

    pub fn input(&self) -> MonotoneInput<'_> {
        let g = self.grid.clone();
        MonotoneInput {
            grid: g.clone(),
            a: Box::new(move |t| ConnectionField::from_fn(&self.grid, |x| [(1.0 + t) * x[1].sin(), self.r(x[0])[0]])),
            phi: Box::new(move |t| {
                ScalarField::from_fn(&self.grid, |x| {
                    C64::new(self.r(x[0])[0], self.r(x[1] + t)[0]) * (-t).exp()
                })
            }),
            g: Box::new(move |t| {
                ScalarField::from_fn(&self.grid, |x| {
                    let e = (-t).exp();
                    let ra = self.r(x[0]);
                    let rb = self.r(x[1] + t);
                    let i = C64::new(0.0, 1.0);
                    let phi = C64::new(ra[0], rb[0]) * e;
                    let dt = -phi + i * rb[1] * e;
                    let grad = [C64::new(ra[1], 0.0) * e, i * rb[1] * e];
                    let lap = C64::new(ra[2], rb[2]) * e;
                    let a = [(1.0 + t) * x[1].sin(), ra[0]];
                    let a2 = a[0] * a[0] + a[1] * a[1];
                    let cov = lap + 2.0 * i * (grad[0] * a[0] + grad[1] * a[1]) - phi * a2;
                    dt - cov
                })
            }),
            k: Box::new(move |t| g.sample_real(|x| 2.0 + t.exp() * x[0].cos())),
        }
    }
}
