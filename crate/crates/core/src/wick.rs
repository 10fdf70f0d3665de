//! Complex Hermite polynomials, the variance `σ²_{≤N}` and Wick powers.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{rho, TorusGrid};

/// Which of the two defining recursions builds the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// start from `H_{m,0} = z^m`, raise `n` with `H_{m,n+1} = z̄H_{m,n} − mσ²H_{m−1,n}`
    RaiseN,
    /// start from `H_{0,n} = z̄^n`, raise `m` with `H_{m+1,n} = zH_{m,n} − nσ²H_{m,n−1}`
    RaiseM,
}

fn table(m: usize, n: usize, z: C64, s2: f64, route: Route) -> Vec<Vec<C64>> {
    let zero = C64::new(0.0, 0.0);
    let mut h = vec![vec![zero; n + 1]; m + 1];
    match route {
        Route::RaiseN => {
            let mut p = C64::new(1.0, 0.0);
            for row in h.iter_mut() {
                row[0] = p;
                p *= z;
            }
            for j in 0..n {
                for i in 0..=m {
                    let lower = if i > 0 { h[i - 1][j] * (i as f64 * s2) } else { zero };
                    h[i][j + 1] = z.conj() * h[i][j] - lower;
                }
            }
        }
        Route::RaiseM => {
            let mut p = C64::new(1.0, 0.0);
            for j in 0..=n {
                h[0][j] = p;
                p *= z.conj();
            }
            for i in 0..m {
                for j in 0..=n {
                    let lower = if j > 0 { h[i][j - 1] * (j as f64 * s2) } else { zero };
                    h[i + 1][j] = z * h[i][j] - lower;
                }
            }
        }
    }
    h
}

pub fn hermite_eval_route(m: i64, n: i64, z: C64, s2: f64, route: Route) -> Result<C64> {
    if m < 0 || n < 0 {
        return Err(Error::Invalid(format!("Hermite degrees ({m},{n}) must be non-negative")));
    }
    let (m, n) = (m as usize, n as usize);
    Ok(table(m, n, z, s2, route)[m][n])
}

/// `H_{m,n}(z, z̄; σ²)`.
pub fn hermite_eval(m: i64, n: i64, z: C64, s2: f64) -> Result<C64> {
    hermite_eval_route(m, n, z, s2, Route::RaiseN)
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `|H_{m,n}(z+w) − Σ C(m,k₁)C(n,k₂) w^{m−k₁} w̄^{n−k₂} H_{k₁,k₂}(z)|`.
pub fn hermite_shift_check(m: usize, n: usize, z: C64, w: C64, s2: f64) -> f64 {
    let lhs = table(m, n, z + w, s2, Route::RaiseN)[m][n];
    let h = table(m, n, z, s2, Route::RaiseN);
    let mut rhs = C64::new(0.0, 0.0);
    for k1 in 0..=m {
        for k2 in 0..=n {
            rhs += w.powu((m - k1) as u32)
                * w.conj().powu((n - k2) as u32)
                * h[k1][k2]
                * (binom(m, k1) * binom(n, k2));
        }
    }
    (lhs - rhs).norm()
}

/// Monomial expansion of `H_{m,n}`: map `(i, j) ↦` coefficient of `z^i z̄^j`.
pub fn hermite_monomials(m: usize, n: usize, s2: f64) -> BTreeMap<(usize, usize), f64> {
    type Poly = BTreeMap<(usize, usize), f64>;
    let mut h: Vec<Vec<Poly>> = vec![vec![Poly::new(); n + 1]; m + 1];
    for (i, row) in h.iter_mut().enumerate() {
        row[0].insert((i, 0), 1.0);
    }
    for j in 0..n {
        for i in 0..=m {
            let mut next = Poly::new();
            for (&(a, b), &c) in &h[i][j] {
                *next.entry((a, b + 1)).or_insert(0.0) += c;
            }
            if i > 0 {
                for (&(a, b), &c) in &h[i - 1][j] {
                    *next.entry((a, b)).or_insert(0.0) -= c * i as f64 * s2;
                }
            }
            next.retain(|_, c| *c != 0.0);
            h[i][j + 1] = next;
        }
    }
    std::mem::take(&mut h[m][n])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaMethod {
    /// closed-form lattice sum
    Parseval,
    /// space-time quadrature of the defining norm
    Quadrature,
}

/// `σ²_{≤N} = (8π²)⁻¹ Σ_n ρ(n/N)² / (1 + |n|²)`, or the quadrature oracle.
pub fn sigma_squared(big_n: f64, method: SigmaMethod) -> Result<f64> {
    if big_n < 1.0 || big_n.is_nan() {
        return Err(Error::Invalid(format!("sigma^2 needs N >= 1, got {big_n}")));
    }
    Ok(match method {
        SigmaMethod::Parseval => sigma_parseval(big_n),
        SigmaMethod::Quadrature => sigma_quadrature(big_n),
    })
}

fn sigma_parseval(big_n: f64) -> f64 {
    let r = (1.125 * big_n).floor() as i64 + 1;
    let mut s = 0.0;
    for n1 in -r..=r {
        for n2 in -r..=r {
            let k2 = (n1 * n1 + n2 * n2) as f64;
            let w = rho(k2.sqrt() / big_n);
            if w > 0.0 {
                s += w * w / (1.0 + k2);
            }
        }
    }
    s / (8.0 * PI * PI)
}

/// `∫_{−∞}^0 ds ∫_{T²} dy |e^s (χ_{≤N} ⋆ p)(s, y; 0, 0)|²` with the kernel
/// sampled in real space and the `s` integral on a geometric grid.
fn sigma_quadrature(big_n: f64) -> f64 {
    let band = (1.125 * big_n).floor() as usize + 1;
    let mut m = 8;
    while m <= 2 * band + 2 {
        m *= 2;
    }
    let grid = TorusGrid::new(m).expect("even grid");
    let norm = 1.0 / (4.0 * PI * PI);
    let integrand = |s_abs: f64| -> f64 {
        let mut coef = grid.zeros();
        for (idx, c) in coef.iter_mut().enumerate() {
            if grid.is_nyquist(idx) {
                continue;
            }
            let n = grid.mode(idx);
            let k2 = (n[0] * n[0] + n[1] * n[1]) as f64;
            let w = rho(k2.sqrt() / big_n);
            if w > 0.0 {
                // e^{s} times the mollified backward heat kernel at (0,0)
                *c = C64::new(norm * w * (-s_abs * (1.0 + k2)).exp(), 0.0);
            }
        }
        let vals = grid.inverse(&coef);
        vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell()
    };
    // s = −e^v; trapezoid in v
    let dv: f64 = 0.01;
    let mut v: f64 = -40.0;
    let mut total = 0.0;
    let mut prev = integrand(v.exp()) * v.exp();
    loop {
        let nv = v + dv;
        let cur = integrand(nv.exp()) * nv.exp();
        total += 0.5 * dv * (prev + cur);
        v = nv;
        prev = cur;
        if nv > 0.0 && cur < 1e-14 * total {
            break;
        }
    }
    total
}

/// Coefficients `c_i` with `H_{k+1,k}(z) = z Σ_i c_i |z|^{2i}`, `q = 2k+1`.
pub fn wick_coefficients(q: u32, s2: f64) -> Result<Vec<f64>> {
    if q % 2 == 0 || q == 0 {
        return Err(Error::Invalid(format!("Wick power needs odd q, got {q}")));
    }
    let k = ((q - 1) / 2) as usize;
    let mono = hermite_monomials(k + 1, k, s2);
    let mut c = vec![0.0; k + 1];
    for ((a, b), v) in mono {
        debug_assert_eq!(a, b + 1);
        c[b] += v;
    }
    Ok(c)
}

/// Pointwise `:|z|^{q−1}z:`.
pub fn wick_pointwise(z: C64, q: u32, s2: f64) -> Result<C64> {
    if q % 2 == 0 {
        return Err(Error::Invalid(format!("Wick power needs odd q, got {q}")));
    }
    let k = ((q - 1) / 2) as i64;
    hermite_eval(k + 1, k, z, s2)
}

/// `:|φ|^{q−1}φ:` on coefficients, by iterated (dealiased) binary products.
pub fn wick_power_spec(grid: &TorusGrid, phi: &[C64], q: u32, s2: f64, dealias: bool) -> Result<Vec<C64>> {
    let c = wick_coefficients(q, s2)?;
    let u = grid.product(&grid.conj_spec(phi), phi, dealias);
    // P(u) = Σ c_i u^i
    let mut poly = grid.zeros();
    poly[0] = C64::new(c[0], 0.0);
    let mut power = u.clone();
    for (i, ci) in c.iter().enumerate().skip(1) {
        if i > 1 {
            power = grid.product(&power, &u, dealias);
        }
        poly.iter_mut().zip(power.iter()).for_each(|(p, x)| *p += x * *ci);
    }
    Ok(grid.product(phi, &poly, dealias))
}

/// Field-level Wick power.
pub fn wick_power(
    phi: &crate::spectral::ScalarField,
    q: u32,
    s2: f64,
    dealias: bool,
) -> Result<crate::spectral::ScalarField> {
    let s = phi.forward();
    let w = wick_power_spec(&phi.grid, &s.coef, q, s2, dealias)?;
    Ok(crate::spectral::Spectrum { grid: phi.grid.clone(), coef: w }.inverse())
}
