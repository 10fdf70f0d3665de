//! Torus discretization and Fourier-side operators.
//!
//! Conventions: `f̂(n) = M⁻² Σ_x f(x) e^{-in·x}`, modes `n ∈ {-M/2, …, M/2-1}²`
//! with the `-M/2` rows and columns held at zero. Grid `L^p` norms use the
//! un-normalized measure on `[0,2π)²`, so `‖1‖_{L^p} = (2π)^{2/p}`.

mod field;
mod grid;
pub mod io;
mod norms;

pub use field::{ConnectionField, ScalarField, Spectrum};
pub use grid::{wav, TorusGrid};
pub use norms::{
    besov_norm, besov_norm_shifted, besov_norm_vec, dyadic_scales, gauge_invariant_norm_connection,
    default_radius, gauge_invariant_norm_scalar, lp_norm, lp_norm_vec, paraproduct, GaugeKind,
    Para,
};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Transition profile of the radial cutoff `ρ` on `1 < |x| < 9/8`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Profile {
    /// `g(1-s)/(g(1-s)+g(s))`, `g(u)=e^{-1/u}`, `s = 8(|x|-1)`; C^∞ at both ends.
    #[default]
    SmoothStep,
    /// `exp(1 - 1/(1-s²))`; only C¹ at `|x| = 1`.
    Bump,
}

pub fn rho_profile(profile: Profile, r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 9.0 / 8.0 {
        return 0.0;
    }
    let s = 8.0 * (r - 1.0);
    match profile {
        Profile::SmoothStep => {
            let g = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
            let a = g(1.0 - s);
            a / (a + g(s))
        }
        Profile::Bump => (1.0 - 1.0 / (1.0 - s * s)).exp(),
    }
}

/// The repo-wide radial cutoff `ρ(|x|)`.
#[inline]
pub fn rho(r: f64) -> f64 {
    rho_profile(Profile::SmoothStep, r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffMode {
    /// `ρ_{≤N}(n) = ρ(n/N)`
    Le,
    /// `ρ_N = ρ_{≤N} − ρ_{≤N/2}`, with `ρ_1 = ρ_{≤1}`
    Eq,
}

pub fn cutoff_symbol_profile(profile: Profile, n: [f64; 2], big_n: f64, mode: CutoffMode) -> f64 {
    let r = (n[0] * n[0] + n[1] * n[1]).sqrt();
    let le = |nn: f64| rho_profile(profile, r / nn);
    match mode {
        CutoffMode::Le => le(big_n),
        CutoffMode::Eq => {
            if big_n <= 1.0 {
                le(1.0)
            } else {
                le(big_n) - le(big_n / 2.0)
            }
        }
    }
}

pub fn cutoff_symbol(n: [f64; 2], big_n: f64, mode: CutoffMode) -> Result<f64> {
    if big_n <= 0.0 || big_n.is_nan() {
        return Err(Error::Invalid(format!("cutoff N={big_n} must be positive")));
    }
    Ok(cutoff_symbol_profile(Profile::SmoothStep, n, big_n, mode))
}

#[inline]
pub(crate) fn rho_le(n: [i64; 2], big_n: f64) -> f64 {
    cutoff_symbol_profile(Profile::SmoothStep, [n[0] as f64, n[1] as f64], big_n, CutoffMode::Le)
}

/// Littlewood–Paley projection / mollification on coefficients.
pub fn project_spec(grid: &TorusGrid, coef: &[C64], big_n: f64, mode: CutoffMode) -> Vec<C64> {
    let mut out = coef.to_vec();
    grid.multiply(&mut out, |n| {
        cutoff_symbol_profile(Profile::SmoothStep, [n[0] as f64, n[1] as f64], big_n, mode)
    });
    out
}

pub fn project(f: &ScalarField, big_n: f64, mode: CutoffMode) -> Result<ScalarField> {
    if big_n <= 0.0 {
        return Err(Error::Invalid(format!("cutoff N={big_n} must be positive")));
    }
    let s = f.forward();
    Ok(Spectrum {
        grid: s.grid.clone(),
        coef: project_spec(&s.grid, &s.coef, big_n, mode),
    }
    .inverse())
}

/// `(P_⊥A)^j = A^j − Δ⁻¹∂^j∂_kA^k` on coefficient pairs; zero mode untouched.
pub fn leray_spec(grid: &TorusGrid, a: &mut [Vec<C64>; 2]) {
    for idx in 0..grid.len() {
        if grid.is_nyquist(idx) {
            a[0][idx] = C64::new(0.0, 0.0);
            a[1][idx] = C64::new(0.0, 0.0);
            continue;
        }
        let n = grid.mode(idx);
        let k2 = (n[0] * n[0] + n[1] * n[1]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let (n0, n1) = (n[0] as f64, n[1] as f64);
        let dot = (a[0][idx] * n0 + a[1][idx] * n1) / k2;
        a[0][idx] -= dot * n0;
        a[1][idx] -= dot * n1;
    }
}

pub fn leray_project(a: &ConnectionField) -> ConnectionField {
    let mut s = a.spectra();
    leray_spec(&a.grid, &mut s);
    let mut out = ConnectionField::from_spectra(&a.grid, &s);
    out.coulomb = true;
    out
}

/// Spectral divergence `∂_jA^j` as coefficients.
pub fn divergence_spec(grid: &TorusGrid, a: &[Vec<C64>; 2]) -> Vec<C64> {
    let d0 = grid.deriv(&a[0], 0);
    let d1 = grid.deriv(&a[1], 1);
    d0.iter().zip(d1.iter()).map(|(x, y)| x + y).collect()
}

pub fn heat_symbol(n: [i64; 2], t: f64, massive: bool) -> f64 {
    let k2 = (n[0] * n[0] + n[1] * n[1]) as f64;
    let lam = if massive { k2 + 1.0 } else { k2 };
    (-t * lam).exp()
}

pub fn heat_spec(grid: &TorusGrid, coef: &mut [C64], t: f64, massive: bool) {
    grid.multiply(coef, |n| heat_symbol(n, t, massive));
}

pub fn heat_semigroup(f: &ScalarField, t: f64, massive: bool) -> Result<ScalarField> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::Invalid(format!("heat time t={t} must be >= 0")));
    }
    let mut s = f.forward();
    heat_spec(&s.grid, &mut s.coef, t, massive);
    Ok(s.inverse())
}

/// `(1 − e^{−hλ})/λ`, with the `λ → 0` limit `h`.
#[inline]
pub fn phi1_h(lam: f64, h: f64) -> f64 {
    let z = lam * h;
    if z.abs() < 1e-8 {
        h * (1.0 - 0.5 * z)
    } else {
        -(-z).exp_m1() / lam
    }
}

/// `∫₀ᵗ e^{(t−s)Δ}F(s) ds` for forcing piecewise constant on steps of length
/// `dt` (`forcing[k]` holds on `[k dt, (k+1) dt)`), evaluated at `t = steps·dt`.
pub fn duhamel_spec(
    grid: &TorusGrid,
    forcing: &[Vec<C64>],
    dt: f64,
    steps: usize,
    massive: bool,
) -> Result<Vec<C64>> {
    if steps > forcing.len() {
        return Err(Error::Invalid(format!(
            "Duhamel time {} outside forcing window of {} steps",
            steps as f64 * dt,
            forcing.len()
        )));
    }
    let mut u = grid.zeros();
    for f in forcing.iter().take(steps) {
        for idx in 0..grid.len() {
            if grid.is_nyquist(idx) {
                continue;
            }
            let n = grid.mode(idx);
            let k2 = (n[0] * n[0] + n[1] * n[1]) as f64;
            let lam = if massive { k2 + 1.0 } else { k2 };
            u[idx] = u[idx] * (-dt * lam).exp() + f[idx] * phi1_h(lam, dt);
        }
    }
    Ok(u)
}

pub fn duhamel(forcing: &[ScalarField], dt: f64, t: f64, massive: bool) -> Result<ScalarField> {
    let grid = forcing
        .first()
        .map(|f| f.grid.clone())
        .ok_or_else(|| Error::Invalid("empty forcing".into()))?;
    let steps = (t / dt).round() as usize;
    if ((steps as f64) * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::Invalid(format!("t={t} is not on the forcing grid (dt={dt})")));
    }
    let spec: Vec<Vec<C64>> = forcing.iter().map(|f| f.forward().coef).collect();
    let u = duhamel_spec(&grid, &spec, dt, steps, massive)?;
    Ok(Spectrum { grid, coef: u }.inverse())
}
