//! Resonance functions of the covariant linear object and their `N → ∞` limits.
//!
//! `resgauge` is evaluated on the Fourier side,
//! `ℛ_{≤N}(b,t) = (2π)⁻² ∫ dη ρ²(|η|/N) (b+η)(1 − e^{−2t⟨b+η⟩²}) / (2⟨b+η⟩²)`,
//! which follows from the real-space double integral by Plancherel and the
//! `s`-integration. [`resgauge_real_space`] keeps the real-space form as an
//! independent check.

use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::io::csv_row;
use crate::spectral::{rho_profile, Profile};

pub const C_G: f64 = 1.0 / (8.0 * PI);

// 8-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL_W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// Composite 8-point Gauss–Legendre nodes and weights on `[a, b]` with panels of width ≤ `w`.
fn gauss_panels(a: f64, b: f64, w: f64) -> Vec<(f64, f64)> {
    let n = ((b - a) / w).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let mut out = Vec::with_capacity(8 * n);
    for p in 0..n {
        let c = a + (p as f64 + 0.5) * h;
        for k in 0..4 {
            let d = 0.5 * h * GL_X[k];
            out.push((c - d, 0.5 * h * GL_W[k]));
            out.push((c + d, 0.5 * h * GL_W[k]));
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct ResonanceQuery {
    pub b: [f64; 2],
    pub t: f64,
    pub big_n: f64,
    pub profile: Profile,
    /// agreement required between two successive quadrature refinements
    pub tol: f64,
}

impl ResonanceQuery {
    pub fn new(b: [f64; 2], t: f64, big_n: f64) -> Result<Self> {
        let q = ResonanceQuery { b, t, big_n, profile: Profile::default(), tol: 1e-10 };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0) || !(self.big_n >= 1.0) || !self.b.iter().all(|x| x.is_finite()) {
            return Err(Error::Invalid(format!(
                "resonance query needs t > 0, N >= 1 and finite b (t={}, N={})",
                self.t, self.big_n
            )));
        }
        Ok(())
    }
}

fn resgauge_at_level(q: &ResonanceQuery, level: u32) -> [f64; 2] {
    let f = 2f64.powi(level as i32);
    let r_max = 1.125 * q.big_n;
    let bn = (q.b[0] * q.b[0] + q.b[1] * q.b[1]).sqrt();
    let radial = gauss_panels(0.0, r_max, (0.25f64).min(q.big_n / 64.0) / f);
    // a multiple of 4 keeps quarter-turn rotations of b exact
    let k = 4 * ((16.0 * (r_max + bn + 4.0) * f / 4.0).ceil() as usize);
    let dth = 2.0 * PI / k as f64;
    let dirs: Vec<[f64; 2]> = (0..k).map(|j| [(j as f64 * dth).cos(), (j as f64 * dth).sin()]).collect();
    let t = q.t;
    let mut acc = [0.0; 2];
    for &(r, w) in &radial {
        let rho = rho_profile(q.profile, r / q.big_n);
        if rho == 0.0 {
            continue;
        }
        let mut ring = [0.0; 2];
        for d in &dirs {
            let v = [q.b[0] + r * d[0], q.b[1] + r * d[1]];
            let jp = 1.0 + v[0] * v[0] + v[1] * v[1];
            let s = -(-2.0 * t * jp).exp_m1() / (2.0 * jp);
            ring[0] += v[0] * s;
            ring[1] += v[1] * s;
        }
        let c = w * r * rho * rho * dth;
        acc[0] += c * ring[0];
        acc[1] += c * ring[1];
    }
    let norm = 1.0 / (4.0 * PI * PI);
    [acc[0] * norm, acc[1] * norm]
}

/// `ℛ_{≤N}(b, t)` by polar quadrature, refined until two levels agree within `tol`.
pub fn resgauge(q: &ResonanceQuery) -> Result<[f64; 2]> {
    q.validate()?;
    if q.b == [0.0, 0.0] {
        // odd integrand
        return Ok([0.0, 0.0]);
    }
    let mut prev = resgauge_at_level(q, 0);
    for level in 1..=4 {
        let cur = resgauge_at_level(q, level);
        let d = ((cur[0] - prev[0]).powi(2) + (cur[1] - prev[1]).powi(2)).sqrt();
        if d <= q.tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numerical {
        step: 4,
        t: q.t,
        reason: format!("resgauge quadrature did not reach tolerance {} at N={}", q.tol, q.big_n),
    })
}

/// Catmull–Rom interpolation of samples on a uniform grid starting at 0.
fn interp(table: &[f64], dr: f64, r: f64) -> f64 {
    let x = r / dr;
    let i = x.floor() as usize;
    if i + 2 >= table.len() {
        return 0.0;
    }
    let s = x - i as f64;
    let p0 = if i == 0 { table[1] } else { table[i - 1] }; // h is even in r
    let (p1, p2, p3) = (table[i], table[i + 1], table[i + 2]);
    p1 + 0.5 * s * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
}

/// The real-space form
/// `(1/32π) ∫₀ᵗ ds e^{−2(t−s)} ∫ du (χ_{≤N})^{*2}(u) sin(u·b) u (t−s)^{−2} e^{−|u|²/8(t−s)}`,
/// with the radial profile of `(χ_{≤N})^{*2}` obtained by Hankel inversion of `ρ²`
/// on `2¹⁴` radial points. Slow; meant for small `N`.
pub fn resgauge_real_space(q: &ResonanceQuery) -> Result<[f64; 2]> {
    q.validate()?;
    let bn = (q.b[0] * q.b[0] + q.b[1] * q.b[1]).sqrt();
    if bn == 0.0 {
        return Ok([0.0, 0.0]);
    }
    let n = q.big_n;
    let u_max = (320.0 * q.t).sqrt();
    let pts = 1usize << 14;
    let dr = u_max / (pts - 3) as f64;
    // h(r) = (2π)⁻¹ ∫ k ρ²(k/N) J₀(kr) dk
    let table: Vec<f64> = (0..pts)
        .into_par_iter()
        .map(|i| {
            let r = i as f64 * dr;
            let nodes = gauss_panels(0.0, 1.125 * n, (n / 16.0).min(1.0 / (r + 1.0)));
            nodes
                .iter()
                .map(|&(k, w)| {
                    let rho = rho_profile(q.profile, k / n);
                    w * k * rho * rho * libm::j0(k * r)
                })
                .sum::<f64>()
                / (2.0 * PI)
        })
        .collect();
    let taus = gauss_panels(0.0, q.t, q.t / 16.0);
    let total: f64 = taus
        .par_iter()
        .map(|&(tau, wt)| {
            let umax = (320.0 * tau).sqrt().min(u_max);
            let width = 0.5 * (8.0 * tau).sqrt().min(1.0 / n).min(1.0 / bn);
            let inner: f64 = gauss_panels(0.0, umax, width)
                .iter()
                .map(|&(r, w)| w * r * r * interp(&table, dr, r) * (-r * r / (8.0 * tau)).exp() * 2.0 * PI * libm::j1(r * bn))
                .sum();
            wt * (-2.0 * tau).exp() / (tau * tau) * inner
        })
        .sum();
    let mag = total / (32.0 * PI);
    Ok([mag * q.b[0] / bn, mag * q.b[1] / bn])
}

/// `(2π)⁻² Σ_n (ρ_{≤N}(n)² − ρ_{≤N}(n−n₀)²) n / (2⟨n⟩²)`, summed exactly over the symbol support.
pub fn fourier_resonance_shift_profile(n0: [i64; 2], big_n: f64, profile: Profile) -> Result<[f64; 2]> {
    if !(big_n >= 1.0) {
        return Err(Error::Invalid(format!("resonance cutoff N={big_n} must be >= 1")));
    }
    let r = (1.125 * big_n).ceil() as i64 + n0[0].abs().max(n0[1].abs()) + 1;
    let sym = |n: [i64; 2]| {
        let x = ((n[0] * n[0] + n[1] * n[1]) as f64).sqrt() / big_n;
        let v = rho_profile(profile, x);
        v * v
    };
    let mut acc = [0.0; 2];
    for a in -r..=r {
        for b in -r..=r {
            let d = sym([a, b]) - sym([a - n0[0], b - n0[1]]);
            if d != 0.0 {
                let jp = 2.0 * (1 + a * a + b * b) as f64;
                acc[0] += d * a as f64 / jp;
                acc[1] += d * b as f64 / jp;
            }
        }
    }
    let norm = 1.0 / (4.0 * PI * PI);
    Ok([acc[0] * norm, acc[1] * norm])
}

pub fn fourier_resonance_shift(n0: [i64; 2], big_n: f64) -> Result<[f64; 2]> {
    fourier_resonance_shift_profile(n0, big_n, Profile::default())
}

#[derive(Clone, Copy, Debug)]
pub enum ResonanceSubject {
    /// `ℛ_{≤N}(b, t)`, limit `b/8π`
    Gauge { b: [f64; 2], t: f64 },
    /// Fourier shift sum, limit `−n₀/8π`
    Shift { n0: [i64; 2] },
}

impl ResonanceSubject {
    pub fn limit(&self) -> [f64; 2] {
        match *self {
            ResonanceSubject::Gauge { b, .. } => [b[0] * C_G, b[1] * C_G],
            ResonanceSubject::Shift { n0 } => [-(n0[0] as f64) * C_G, -(n0[1] as f64) * C_G],
        }
    }

    pub fn eval(&self, big_n: f64) -> Result<[f64; 2]> {
        match *self {
            ResonanceSubject::Gauge { b, t } => resgauge(&ResonanceQuery::new(b, t, big_n)?),
            ResonanceSubject::Shift { n0 } => fourier_resonance_shift(n0, big_n),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceRow {
    pub big_n: f64,
    pub value: [f64; 2],
    pub limit: [f64; 2],
    pub abs_err: f64,
}

/// Evaluate over `ns` (in parallel) and tabulate the distance to the limit.
pub fn resonance_report(subject: ResonanceSubject, ns: &[f64]) -> Result<Vec<ResonanceRow>> {
    let limit = subject.limit();
    ns.par_iter()
        .map(|&n| {
            let v = subject.eval(n)?;
            let e = ((v[0] - limit[0]).powi(2) + (v[1] - limit[1]).powi(2)).sqrt();
            Ok(ResonanceRow { big_n: n, value: v, limit, abs_err: e })
        })
        .collect()
}

pub fn resonance_csv(rows: &[ResonanceRow]) -> String {
    let mut s = String::from("N,component1,component2,limit1,limit2,abs_err\n");
    for r in rows {
        s.push_str(&csv_row(&[r.big_n, r.value[0], r.value[1], r.limit[0], r.limit[1], r.abs_err]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn err(v: [f64; 2], l: [f64; 2]) -> f64 {
        ((v[0] - l[0]).powi(2) + (v[1] - l[1]).powi(2)).sqrt()
    }

    #[test]
    fn gauss_panels_integrate_polynomials() {
        let s: f64 = gauss_panels(0.0, 2.0, 0.7).iter().map(|&(x, w)| w * x.powi(9)).sum();
        assert!((s - 2f64.powi(10) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn shift_trivial_cases() {
        assert_eq!(fourier_resonance_shift([0, 0], 16.0).unwrap(), [0.0, 0.0]);
        let a = fourier_resonance_shift([1, 2], 8.0).unwrap();
        let b = fourier_resonance_shift([-1, -2], 8.0).unwrap();
        assert!((a[0] + b[0]).abs() < 1e-14 && (a[1] + b[1]).abs() < 1e-14);
        assert!(fourier_resonance_shift([1, 0], 0.5).is_err());
    }

    #[test]
    fn shift_converges_to_counterterm() {
        let l = ResonanceSubject::Shift { n0: [1, 0] }.limit();
        let e: Vec<f64> = [16.0, 32.0, 64.0].iter().map(|&n| err(fourier_resonance_shift([1, 0], n).unwrap(), l)).collect();
        assert!(e[2] < 0.05 * C_G, "{e:?}");
        assert!(e[1] < 0.6 * e[0], "{e:?}");
    }

    #[test]
    fn shift_is_profile_independent_on_sharp_lattices() {
        // N for which no lattice point of either support lies in the transition annulus
        let sharp = |n: f64, n0: [i64; 2]| {
            let r = (1.125 * n).ceil() as i64 + 3;
            (-r..=r).all(|a| {
                (-r..=r).all(|b| {
                    [[a, b], [a - n0[0], b - n0[1]]].iter().all(|m| {
                        let x = ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt() / n;
                        x <= 1.0 || x >= 1.125
                    })
                })
            })
        };
        let found: Vec<f64> = (1..40).map(|n| n as f64).filter(|&n| sharp(n, [1, 0])).collect();
        assert!(!found.is_empty());
        for n in found {
            let a = fourier_resonance_shift_profile([1, 0], n, Profile::SmoothStep).unwrap();
            let b = fourier_resonance_shift_profile([1, 0], n, Profile::Bump).unwrap();
            assert!(err(a, b) < 1e-15, "N={n}");
        }
    }

    #[test]
    fn resgauge_zero_b_and_validation() {
        assert_eq!(resgauge(&ResonanceQuery::new([0.0, 0.0], 0.5, 4.0).unwrap()).unwrap(), [0.0, 0.0]);
        assert!(ResonanceQuery::new([1.0, 0.0], 0.0, 4.0).is_err());
        assert!(ResonanceQuery::new([1.0, 0.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn resgauge_matches_real_space_form() {
        for b in [[2.0, 0.0], [0.3, -0.7]] {
            let q = ResonanceQuery::new(b, 0.5, 4.0).unwrap();
            let f = resgauge(&q).unwrap();
            let r = resgauge_real_space(&q).unwrap();
            assert!(err(f, r) < 1e-6, "{f:?} {r:?}");
        }
    }

    #[test]
    fn resgauge_rate() {
        let s = ResonanceSubject::Gauge { b: [2.0, 0.0], t: 0.5 };
        let rows = resonance_report(s, &[16.0, 32.0]).unwrap();
        assert!(rows[1].abs_err <= 0.5 * 1.4 * rows[0].abs_err, "{rows:?}");
        assert!(resonance_report(s, &[]).unwrap().is_empty());
    }

    #[test]
    fn csv_layout() {
        let rows = resonance_report(ResonanceSubject::Shift { n0: [1, 0] }, &[4.0, 8.0]).unwrap();
        let csv = resonance_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("N,component1,component2,limit1,limit2,abs_err\n"));
        assert!(rows.iter().all(|r| (r.limit[0] + C_G).abs() < 1e-16));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn resgauge_rotation_equivariance(bx in -3.0f64..3.0, by in -3.0f64..3.0, t in 0.05f64..1.0) {
            let v = resgauge(&ResonanceQuery::new([bx, by], t, 4.0).unwrap()).unwrap();
            for (rb, rv) in [([-by, bx], [-v[1], v[0]]), ([-bx, -by], [-v[0], -v[1]]), ([by, -bx], [v[1], -v[0]])] {
                let w = resgauge(&ResonanceQuery::new(rb, t, 4.0).unwrap()).unwrap();
                prop_assert!(err(w, rv) < 1e-8);
            }
        }
    }
}
