//! Uniform grid on the torus `[0, 2π)²` with cached FFT plans.
//!
//! Layout is row-major: flat index `i1 * M + i2` holds the sample at
//! `x = (2π i1 / M, 2π i2 / M)`, and in spectral arrays the same index holds
//! the coefficient of `e^{i(n1 x1 + n2 x2)}` with `n_j = wav(i_j)`.
//!
//! Coefficients follow `f̂(n) = M⁻² Σ_x f(x) e^{-in·x}`, so that
//! `f(x) = Σ_n f̂(n) e^{in·x}` on the grid.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

struct Plans {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    fn transpose(&self, data: &mut [C64]) {
        let m = self.m;
        for i in 0..m {
            for j in (i + 1)..m {
                data.swap(i * m + j, j * m + i);
            }
        }
    }

    /// Unnormalized 2D transform in place.
    fn fft2(&self, data: &mut [C64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        self.transpose(data);
        plan.process_with_scratch(data, &mut scratch);
        self.transpose(data);
    }
}

/// `M × M` torus grid. Cheap to clone; plans are shared.
#[derive(Clone)]
pub struct TorusGrid {
    main: Arc<Plans>,
    pad: Arc<Plans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TorusGrid(M={}, pad={})", self.main.m, self.pad.m)
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.main.m == other.main.m
    }
}

/// Wavenumber of FFT index `i` on an `m`-point axis.
#[inline]
pub fn wav(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

impl TorusGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(Error::Invalid(format!("grid size M={m} must be even and >= 4")));
        }
        // 3/2 rule, rounded up to an even size
        let mut p = (3 * m).div_ceil(2);
        if p % 2 == 1 {
            p += 1;
        }
        Ok(TorusGrid {
            main: Arc::new(Plans::new(m)),
            pad: Arc::new(Plans::new(p)),
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.main.m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.main.m * self.main.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn padded_m(&self) -> usize {
        self.pad.m
    }

    /// Grid spacing `2π/M`.
    pub fn h(&self) -> f64 {
        2.0 * PI / self.m() as f64
    }

    /// Quadrature weight of one cell, `(2π/M)²`.
    pub fn cell(&self) -> f64 {
        self.h() * self.h()
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let m = self.m();
        [(idx / m) as f64 * self.h(), (idx % m) as f64 * self.h()]
    }

    /// Mode vector held at flat spectral index `idx`.
    #[inline]
    pub fn mode(&self, idx: usize) -> [i64; 2] {
        let m = self.m();
        [wav(idx / m, m), wav(idx % m, m)]
    }

    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let m = self.m();
        idx / m == m / 2 || idx % m == m / 2
    }

    /// Flat index of mode `n`, `None` if it is outside the resolved band
    /// (Nyquist included).
    pub fn index_of(&self, n: [i64; 2]) -> Option<usize> {
        let h = (self.m() / 2) as i64;
        if n[0] <= -h || n[0] >= h || n[1] <= -h || n[1] >= h {
            return None;
        }
        let m = self.m() as i64;
        Some((n[0].rem_euclid(m) * m + n[1].rem_euclid(m)) as usize)
    }

    /// Largest resolved wavenumber per axis.
    pub fn kmax(&self) -> i64 {
        self.m() as i64 / 2 - 1
    }

    pub fn zeros(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.len()]
    }

    pub fn zero_nyquist(&self, coef: &mut [C64]) {
        let m = self.m();
        let h = m / 2;
        for k in 0..m {
            coef[h * m + k] = C64::new(0.0, 0.0);
            coef[k * m + h] = C64::new(0.0, 0.0);
        }
    }

    /// Samples → normalized coefficients (Nyquist zeroed).
    pub fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut out = values.to_vec();
        self.forward_inplace(&mut out);
        out
    }

    pub fn forward_inplace(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.len());
        self.main.fft2(data, false);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
        self.zero_nyquist(data);
    }

    /// Coefficients → samples.
    pub fn inverse(&self, coef: &[C64]) -> Vec<C64> {
        let mut out = coef.to_vec();
        self.inverse_inplace(&mut out);
        out
    }

    pub fn inverse_inplace(&self, data: &mut [C64]) {
        assert_eq!(data.len(), self.len());
        self.zero_nyquist(data);
        self.main.fft2(data, true);
    }

    /// Evaluate the trigonometric polynomial `coef` on the padded grid.
    pub fn to_padded(&self, coef: &[C64]) -> Vec<C64> {
        let m = self.m();
        let p = self.pad.m;
        let mut big = vec![C64::new(0.0, 0.0); p * p];
        let h = (m / 2) as i64;
        for (idx, c) in coef.iter().enumerate() {
            let n = self.mode(idx);
            if n[0] == -h || n[1] == -h {
                continue;
            }
            let a = n[0].rem_euclid(p as i64) as usize;
            let b = n[1].rem_euclid(p as i64) as usize;
            big[a * p + b] = *c;
        }
        self.pad.fft2(&mut big, true);
        big
    }

    /// Padded samples → coefficients truncated to the resolved band.
    pub fn from_padded(&self, mut big: Vec<C64>) -> Vec<C64> {
        let m = self.m();
        let p = self.pad.m;
        self.pad.fft2(&mut big, false);
        let s = 1.0 / (p * p) as f64;
        let mut out = self.zeros();
        for (idx, o) in out.iter_mut().enumerate() {
            if self.is_nyquist(idx) {
                continue;
            }
            let n = self.mode(idx);
            let a = n[0].rem_euclid(p as i64) as usize;
            let b = n[1].rem_euclid(p as i64) as usize;
            *o = big[a * p + b] * s;
        }
        let _ = m;
        out
    }

    /// Physical-space evaluation on the working grid (padded or not).
    pub fn to_work(&self, coef: &[C64], dealias: bool) -> Vec<C64> {
        if dealias {
            self.to_padded(coef)
        } else {
            self.inverse(coef)
        }
    }

    pub fn from_work(&self, vals: Vec<C64>, dealias: bool) -> Vec<C64> {
        if dealias {
            self.from_padded(vals)
        } else {
            let mut v = vals;
            self.forward_inplace(&mut v);
            v
        }
    }

    /// Spectral product of two band-limited functions, truncated to the band.
    pub fn product(&self, a: &[C64], b: &[C64], dealias: bool) -> Vec<C64> {
        let mut pa = self.to_work(a, dealias);
        let pb = self.to_work(b, dealias);
        pa.iter_mut().zip(pb.iter()).for_each(|(x, y)| *x *= *y);
        self.from_work(pa, dealias)
    }

    /// Coefficients of the complex conjugate function.
    pub fn conj_spec(&self, coef: &[C64]) -> Vec<C64> {
        let mut out = self.zeros();
        for (idx, o) in out.iter_mut().enumerate() {
            if self.is_nyquist(idx) {
                continue;
            }
            let n = self.mode(idx);
            let j = self.index_of([-n[0], -n[1]]).expect("band is symmetric");
            *o = coef[j].conj();
        }
        out
    }

    /// Coefficients of `Re f`.
    pub fn real_part_spec(&self, coef: &[C64]) -> Vec<C64> {
        let c = self.conj_spec(coef);
        coef.iter().zip(c.iter()).map(|(a, b)| (a + b) * 0.5).collect()
    }

    /// Apply a real Fourier multiplier.
    pub fn multiply<F: Fn([i64; 2]) -> f64>(&self, coef: &mut [C64], sym: F) {
        for (idx, c) in coef.iter_mut().enumerate() {
            if self.is_nyquist(idx) {
                *c = C64::new(0.0, 0.0);
            } else {
                *c *= sym(self.mode(idx));
            }
        }
    }

    /// Spectral partial derivative `∂_j`.
    pub fn deriv(&self, coef: &[C64], j: usize) -> Vec<C64> {
        coef.iter()
            .enumerate()
            .map(|(idx, c)| {
                if self.is_nyquist(idx) {
                    C64::new(0.0, 0.0)
                } else {
                    c * C64::new(0.0, self.mode(idx)[j] as f64)
                }
            })
            .collect()
    }

    pub fn laplacian(&self, coef: &[C64]) -> Vec<C64> {
        let mut out = coef.to_vec();
        self.multiply(&mut out, |n| -((n[0] * n[0] + n[1] * n[1]) as f64));
        out
    }

    /// `Δ⁻¹` with the zero mode sent to zero.
    pub fn inv_laplacian(&self, coef: &[C64]) -> Vec<C64> {
        let mut out = coef.to_vec();
        self.multiply(&mut out, |n| {
            let k2 = (n[0] * n[0] + n[1] * n[1]) as f64;
            if k2 == 0.0 {
                0.0
            } else {
                -1.0 / k2
            }
        });
        out
    }

    /// Samples of `e^{i n·x}`.
    pub fn plane_wave(&self, n: [f64; 2]) -> Vec<C64> {
        (0..self.len())
            .map(|idx| {
                let x = self.point(idx);
                C64::from_polar(1.0, n[0] * x[0] + n[1] * x[1])
            })
            .collect()
    }

    /// Evaluate a function of position on every grid point.
    pub fn sample<F: Fn([f64; 2]) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.len()).map(|idx| f(self.point(idx))).collect()
    }

    pub fn sample_real<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.point(idx))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft_oracle(g: &TorusGrid, v: &[C64]) -> Vec<C64> {
        let m = g.m();
        let mut out = g.zeros();
        for (k, o) in out.iter_mut().enumerate() {
            let n = g.mode(k);
            let mut s = C64::new(0.0, 0.0);
            for (j, x) in v.iter().enumerate() {
                let p = g.point(j);
                s += x * C64::from_polar(1.0, -(n[0] as f64 * p[0] + n[1] as f64 * p[1]));
            }
            *o = s / (m * m) as f64;
        }
        g.zero_nyquist(&mut out);
        out
    }

    #[test]
    fn forward_matches_direct_dft() {
        let g = TorusGrid::new(8).unwrap();
        let v: Vec<C64> = (0..64)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let a = g.forward(&v);
        let b = dft_oracle(&g, &v);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_has_single_coefficient() {
        let g = TorusGrid::new(16).unwrap();
        let c = g.forward(&g.plane_wave([3.0, 1.0]));
        let k = g.index_of([3, 1]).unwrap();
        for (i, x) in c.iter().enumerate() {
            let want = if i == k { 1.0 } else { 0.0 };
            assert!((x - C64::new(want, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn roundtrip_band_limited() {
        let g = TorusGrid::new(16).unwrap();
        let mut c = g.zeros();
        for (i, x) in c.iter_mut().enumerate() {
            *x = C64::new((i as f64).sin(), (i as f64 * 0.5).cos());
        }
        g.zero_nyquist(&mut c);
        let back = g.forward(&g.inverse(&c));
        for (x, y) in c.iter().zip(back.iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn padded_product_is_exact_for_low_modes() {
        let g = TorusGrid::new(16).unwrap();
        let a = g.forward(&g.plane_wave([3.0, -2.0]));
        let b = g.forward(&g.plane_wave([4.0, 5.0]));
        let p = g.product(&a, &b, true);
        let k = g.index_of([7, 3]).unwrap();
        assert!((p[k] - C64::new(1.0, 0.0)).norm() < 1e-13);
        // (7,3) + (5,0) = (12,3) lies outside the band: dropped, not aliased
        let c = g.forward(&g.plane_wave([5.0, 0.0]));
        let q = g.product(&p, &c, true);
        assert!(q.iter().all(|x| x.norm() < 1e-13));
    }

    #[test]
    fn index_of_rejects_nyquist() {
        let g = TorusGrid::new(8).unwrap();
        assert!(g.index_of([-4, 0]).is_none());
        assert!(g.index_of([3, -3]).is_some());
        assert_eq!(g.mode(g.index_of([-3, 2]).unwrap()), [-3, 2]);
    }
}
