//! Covariant derivatives, curvature, energy, the covariant heat flow and its
//! kernel, the covariant linear stochastic object and the monotonicity check.
//!
//! Throughout, `D_{A,j} = ∂_j + iA^j` and `F^{12} = ∂¹A² − ∂²A¹`.

mod cshe;
mod kernel;
mod monotone;
mod solve;

pub use cshe::{cshe_norm, cshe_norm_parts, cshe_object, CsheOpts, CsheTrajectory};
pub(crate) use cshe::cshe_evolve;
pub use kernel::{
    expansion_residual, kernel_constant, kernel_fki, kernel_pde, kernel_pde_field, perturbation_residual,
    time_reversal_residual, FkiOpts, KernelQuery, TrigConnection,
};
pub use monotone::{monotonicity_residual, Manufactured, MonotoneInput};
pub use solve::{covariant_heat_solve, evolve_spec, Connection, HeatSolveOpts, Scheme};


use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{leray_spec, ConnectionField, ScalarField, TorusGrid};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check(a: &ConnectionField, phi: &ScalarField) -> Result<()> {
    if a.grid != phi.grid {
        return Err(Error::GridMismatch(a.grid.m(), phi.grid.m()));
    }
    Ok(())
}

/// `D_{A,j}φ` on coefficients.
pub fn cov_deriv_spec(grid: &TorusGrid, a: &[Vec<C64>; 2], phi: &[C64], j: usize, dealias: bool) -> Vec<C64> {
    let mut d = grid.deriv(phi, j);
    let ap = grid.product(&a[j], phi, dealias);
    d.iter_mut().zip(ap.iter()).for_each(|(x, y)| *x += I * y);
    d
}

/// `D_A^j D_{A,j} φ` on coefficients.
pub fn cov_laplacian_spec(grid: &TorusGrid, a: &[Vec<C64>; 2], phi: &[C64], dealias: bool) -> Vec<C64> {
    let mut out = grid.zeros();
    for j in 0..2 {
        let d = cov_deriv_spec(grid, a, phi, j, dealias);
        let dd = cov_deriv_spec(grid, a, &d, j, dealias);
        out.iter_mut().zip(dd.iter()).for_each(|(x, y)| *x += y);
    }
    out
}

pub fn covariant_derivative(a: &ConnectionField, phi: &ScalarField, j: usize, dealias: bool) -> Result<ScalarField> {
    check(a, phi)?;
    if j > 1 {
        return Err(Error::Invalid(format!("direction j={j} must be 0 or 1")));
    }
    let g = &phi.grid;
    let d = cov_deriv_spec(g, &a.spectra(), &phi.forward().coef, j, dealias);
    Ok(ScalarField::new(g, g.inverse(&d)))
}

/// `F^{12}` on coefficients.
pub fn curvature_spec(grid: &TorusGrid, a: &[Vec<C64>; 2]) -> Vec<C64> {
    let d12 = grid.deriv(&a[1], 0);
    let d21 = grid.deriv(&a[0], 1);
    d12.iter().zip(d21.iter()).map(|(x, y)| x - y).collect()
}

/// `F^{12}` as a (real) scalar field.
pub fn curvature(a: &ConnectionField) -> ScalarField {
    let g = &a.grid;
    let mut v = g.inverse(&curvature_spec(g, &a.spectra()));
    v.iter_mut().for_each(|z| z.im = 0.0);
    ScalarField::new(g, v)
}

/// `∫ |F_A|²/4 + |D_Aφ|²/2 + |φ|^{q+1}/(q+1)` by grid quadrature.
pub fn energy(a: &ConnectionField, phi: &ScalarField, q: u32, dealias: bool) -> Result<f64> {
    check(a, phi)?;
    if q % 2 == 0 {
        return Err(Error::Invalid(format!("energy needs odd q, got {q}")));
    }
    let g = &phi.grid;
    let sa = a.spectra();
    let sp = phi.forward().coef;
    let f = g.inverse(&curvature_spec(g, &sa));
    let d: Vec<Vec<C64>> = (0..2).map(|j| g.inverse(&cov_deriv_spec(g, &sa, &sp, j, dealias))).collect();
    let qq = (q + 1) as f64;
    let mut e = 0.0;
    for i in 0..g.len() {
        // F_{jk}F^{jk} = 2 (F^{12})²
        e += 0.5 * f[i].re * f[i].re;
        e += 0.5 * (d[0][i].norm_sqr() + d[1][i].norm_sqr());
        e += phi.values[i].norm().powf(qq) / qq;
    }
    Ok(e * g.cell())
}

/// `max |(D¹D² − D²D¹)φ − iF^{12}φ|`.
pub fn commutator_residual(a: &ConnectionField, phi: &ScalarField, dealias: bool) -> Result<f64> {
    check(a, phi)?;
    let g = &phi.grid;
    let sa = a.spectra();
    let sp = phi.forward().coef;
    let d1 = cov_deriv_spec(g, &sa, &sp, 0, dealias);
    let d2 = cov_deriv_spec(g, &sa, &sp, 1, dealias);
    let d12 = cov_deriv_spec(g, &sa, &d2, 0, dealias);
    let d21 = cov_deriv_spec(g, &sa, &d1, 1, dealias);
    let fphi = g.product(&curvature_spec(g, &sa), &sp, dealias);
    let r: Vec<C64> = (0..g.len()).map(|i| d12[i] - d21[i] - I * fphi[i]).collect();
    Ok(max_abs(&g.inverse(&r)))
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |½Δ|φ|² − Re(φ̄ D^jD_jφ) − |D_Aφ|²|`.
pub fn bochner_residual(a: &ConnectionField, phi: &ScalarField, dealias: bool) -> Result<f64> {
    check(a, phi)?;
    let g = &phi.grid;
    let sa = a.spectra();
    let sp = phi.forward().coef;
    let cp = g.conj_spec(&sp);
    let mod2 = g.product(&cp, &sp, dealias);
    let lhs = g.inverse(&g.laplacian(&mod2));
    let lap = cov_laplacian_spec(g, &sa, &sp, dealias);
    let re = g.inverse(&g.real_part_spec(&g.product(&cp, &lap, dealias)));
    let mut dd = g.zeros();
    for j in 0..2 {
        let d = cov_deriv_spec(g, &sa, &sp, j, dealias);
        let m = g.product(&g.conj_spec(&d), &d, dealias);
        dd.iter_mut().zip(m.iter()).for_each(|(x, y)| *x += y);
    }
    let dd = g.inverse(&dd);
    Ok((0..g.len()).map(|i| (0.5 * lhs[i] - re[i] - dd[i]).norm()).fold(0.0, f64::max))
}

/// `max_j max |∂_j(φ̄ψ) − conj(D_jφ)ψ − φ̄ D_jψ|`.
pub fn product_rule_residual(a: &ConnectionField, phi: &ScalarField, psi: &ScalarField, dealias: bool) -> Result<f64> {
    check(a, phi)?;
    check(a, psi)?;
    let g = &phi.grid;
    let sa = a.spectra();
    let sp = phi.forward().coef;
    let sq = psi.forward().coef;
    let cp = g.conj_spec(&sp);
    let prod = g.product(&cp, &sq, dealias);
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let lhs = g.deriv(&prod, j);
        let t1 = g.product(&g.conj_spec(&cov_deriv_spec(g, &sa, &sp, j, dealias)), &sq, dealias);
        let t2 = g.product(&cp, &cov_deriv_spec(g, &sa, &sq, j, dealias), dealias);
        let r: Vec<C64> = (0..g.len()).map(|i| lhs[i] - t1[i] - t2[i]).collect();
        worst = worst.max(max_abs(&g.inverse(&r)));
    }
    Ok(worst)
}

/// Largest violation of `|∂_j|φ|| ≤ |D_{A,j}φ|` over points with `|φ| > floor`.
pub fn diamagnetic_pointwise_violation(a: &ConnectionField, phi: &ScalarField, floor: f64) -> Result<f64> {
    check(a, phi)?;
    let g = &phi.grid;
    let sa = a.spectra();
    let sp = phi.forward().coef;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..2 {
        let d = g.inverse(&g.deriv(&sp, j));
        let dd = g.inverse(&cov_deriv_spec(g, &sa, &sp, j, true));
        for i in 0..g.len() {
            let v = phi.values[i];
            let r = v.norm();
            if r <= floor {
                continue;
            }
            // ∂|φ| = Re(φ̄ ∂φ)/|φ|
            let grad_mod = (v.conj() * d[i]).re / r;
            worst = worst.max(grad_mod.abs() - dd[i].norm());
        }
    }
    Ok(worst)
}

/// `P_⊥ Im(φ̄ D_Aψ)` on coefficients.
pub fn a_nonlinearity_spec(grid: &TorusGrid, a: &[Vec<C64>; 2], phi: &[C64], psi: &[C64], dealias: bool) -> [Vec<C64>; 2] {
    let cp = grid.conj_spec(phi);
    let mut out = [grid.zeros(), grid.zeros()];
    for (j, o) in out.iter_mut().enumerate() {
        let p = grid.product(&cp, &cov_deriv_spec(grid, a, psi, j, dealias), dealias);
        let c = grid.conj_spec(&p);
        // Im z = (z − z̄)/2i
        *o = p.iter().zip(c.iter()).map(|(x, y)| (x - y) / (2.0 * I)).collect();
    }
    leray_spec(grid, &mut out);
    out
}

pub fn a_nonlinearity(a: &ConnectionField, phi: &ScalarField, psi: &ScalarField, dealias: bool) -> Result<ConnectionField> {
    check(a, phi)?;
    check(a, psi)?;
    let g = &phi.grid;
    let s = a_nonlinearity_spec(g, &a.spectra(), &phi.forward().coef, &psi.forward().coef, dealias);
    let mut out = ConnectionField::from_spectra(g, &s);
    out.coulomb = true;
    Ok(out)
}

/// `max |P_⊥Im(φ̄D_Aψ) − P_⊥Im(ψ̄D_Aφ)|`.
pub fn a_symmetry_residual(a: &ConnectionField, phi: &ScalarField, psi: &ScalarField, dealias: bool) -> Result<f64> {
    let x = a_nonlinearity(a, phi, psi, dealias)?;
    let y = a_nonlinearity(a, psi, phi, dealias)?;
    Ok(x.max_abs_diff(&y))
}

/// `max |(A^j − Ā^j)∂_jφ − ½ Σ_{jk} Q_{jk}(φ, Δ⁻¹F^{kj})|` for Coulomb `A`,
/// `Q_{jk}(u,v) = ∂_ju∂_kv − ∂_ku∂_jv`.
pub fn null_form_residual(a: &ConnectionField, phi: &ScalarField, dealias: bool) -> Result<f64> {
    check(a, phi)?;
    let g = &phi.grid;
    let mut sa = a.spectra();
    sa[0][0] = C64::new(0.0, 0.0);
    sa[1][0] = C64::new(0.0, 0.0);
    let sp = phi.forward().coef;
    let dphi = [g.deriv(&sp, 0), g.deriv(&sp, 1)];
    let mut lhs = g.product(&sa[0], &dphi[0], dealias);
    let l2 = g.product(&sa[1], &dphi[1], dealias);
    lhs.iter_mut().zip(l2.iter()).for_each(|(x, y)| *x += y);
    let f12 = curvature_spec(g, &sa);
    // F^{kj} as a 2×2 antisymmetric table of coefficient vectors
    let f21: Vec<C64> = f12.iter().map(|z| -z).collect();
    let zero = g.zeros();
    let fk = |k: usize, j: usize| -> &Vec<C64> {
        match (k, j) {
            (0, 1) => &f12,
            (1, 0) => &f21,
            _ => &zero,
        }
    };
    let mut rhs = g.zeros();
    for j in 0..2 {
        for k in 0..2 {
            let v = g.inv_laplacian(fk(k, j));
            let t1 = g.product(&dphi[j], &g.deriv(&v, k), dealias);
            let t2 = g.product(&dphi[k], &g.deriv(&v, j), dealias);
            for i in 0..g.len() {
                rhs[i] += 0.5 * (t1[i] - t2[i]);
            }
        }
    }
    let r: Vec<C64> = lhs.iter().zip(rhs.iter()).map(|(x, y)| x - y).collect();
    Ok(max_abs(&g.inverse(&r)))
}
