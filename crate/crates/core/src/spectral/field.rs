use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::TorusGrid;
use crate::error::{Error, Result};

/// Complex scalar samples on the grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: TorusGrid,
    pub values: Vec<C64>,
}

/// Normalized Fourier coefficients of a field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: TorusGrid,
    pub coef: Vec<C64>,
}

/// Real one-form `(A¹, A²)` on the grid.
#[derive(Clone, Debug)]
pub struct ConnectionField {
    pub grid: TorusGrid,
    pub comps: [Vec<f64>; 2],
    /// Set when the field is known to be divergence free.
    pub coulomb: bool,
}

impl ScalarField {
    pub fn new(grid: &TorusGrid, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.len());
        ScalarField { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        ScalarField::new(grid, grid.zeros())
    }

    pub fn from_fn<F: Fn([f64; 2]) -> C64>(grid: &TorusGrid, f: F) -> Self {
        ScalarField::new(grid, grid.sample(f))
    }

    pub fn forward(&self) -> Spectrum {
        Spectrum { grid: self.grid.clone(), coef: self.grid.forward(&self.values) }
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.m() != other.grid.m() {
            return Err(Error::GridMismatch(self.grid.m(), other.grid.m()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Random trigonometric polynomial supported on `|n| ≤ band`, with
    /// coefficients decaying like `⟨n⟩^{-2}`.
    pub fn random_smooth(grid: &TorusGrid, band: f64, amp: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1_ab1e);
        let mut coef = grid.zeros();
        for (idx, c) in coef.iter_mut().enumerate() {
            if grid.is_nyquist(idx) {
                continue;
            }
            let n = grid.mode(idx);
            let r2 = (n[0] * n[0] + n[1] * n[1]) as f64;
            if r2.sqrt() <= band {
                let w = amp / (1.0 + r2);
                *c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * w;
            }
        }
        Spectrum { grid: grid.clone(), coef }.inverse()
    }
}

impl Spectrum {
    pub fn inverse(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.grid.inverse(&self.coef) }
    }
}

impl ConnectionField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        ConnectionField {
            grid: grid.clone(),
            comps: [vec![0.0; grid.len()], vec![0.0; grid.len()]],
            coulomb: true,
        }
    }

    pub fn from_fn<F: Fn([f64; 2]) -> [f64; 2]>(grid: &TorusGrid, f: F) -> Self {
        let vals: Vec<[f64; 2]> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        ConnectionField {
            grid: grid.clone(),
            comps: [vals.iter().map(|v| v[0]).collect(), vals.iter().map(|v| v[1]).collect()],
            coulomb: false,
        }
    }

    pub fn constant(grid: &TorusGrid, b: [f64; 2]) -> Self {
        ConnectionField {
            grid: grid.clone(),
            comps: [vec![b[0]; grid.len()], vec![b[1]; grid.len()]],
            coulomb: true,
        }
    }

    pub fn spectra(&self) -> [Vec<C64>; 2] {
        let f = |v: &Vec<f64>| {
            let c: Vec<C64> = v.iter().map(|x| C64::new(*x, 0.0)).collect();
            self.grid.forward(&c)
        };
        [f(&self.comps[0]), f(&self.comps[1])]
    }

    /// Build from coefficients; imaginary round-off is discarded.
    pub fn from_spectra(grid: &TorusGrid, s: &[Vec<C64>; 2]) -> Self {
        let f = |c: &Vec<C64>| grid.inverse(c).iter().map(|z| z.re).collect::<Vec<f64>>();
        ConnectionField { grid: grid.clone(), comps: [f(&s[0]), f(&s[1])], coulomb: false }
    }

    pub fn mean(&self) -> [f64; 2] {
        let n = self.grid.len() as f64;
        [self.comps[0].iter().sum::<f64>() / n, self.comps[1].iter().sum::<f64>() / n]
    }

    pub fn shifted(&self, n0: [f64; 2]) -> Self {
        let mut out = self.clone();
        for j in 0..2 {
            out.comps[j].iter_mut().for_each(|v| *v += n0[j]);
        }
        out
    }

    /// Pointwise Euclidean sup norm.
    pub fn max_abs(&self) -> f64 {
        self.comps[0]
            .iter()
            .zip(self.comps[1].iter())
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ConnectionField) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                (self.comps[0][i] - other.comps[0][i]).hypot(self.comps[1][i] - other.comps[1][i])
            })
            .fold(0.0, f64::max)
    }

    /// Grid `L²` norm.
    pub fn l2(&self) -> f64 {
        let s: f64 = (0..self.grid.len())
            .map(|i| self.comps[0][i].powi(2) + self.comps[1][i].powi(2))
            .sum();
        (s * self.grid.cell()).sqrt()
    }

    pub fn divergence(&self) -> Vec<f64> {
        let s = self.spectra();
        let d = super::divergence_spec(&self.grid, &s);
        self.grid.inverse(&d).iter().map(|z| z.re).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Random real one-form supported on `|n| ≤ band` (mean zero), rescaled so
    /// that `max |A| = amp`.
    pub fn random_smooth(grid: &TorusGrid, band: f64, amp: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ff_ee00);
        let mut s = [grid.zeros(), grid.zeros()];
        for idx in 0..grid.len() {
            if grid.is_nyquist(idx) {
                continue;
            }
            let n = grid.mode(idx);
            // draw on a half lattice and mirror for a real field
            if !(n[1] > 0 || (n[1] == 0 && n[0] > 0)) {
                continue;
            }
            let r2 = (n[0] * n[0] + n[1] * n[1]) as f64;
            if r2.sqrt() > band {
                continue;
            }
            let j = grid.index_of([-n[0], -n[1]]).expect("symmetric band");
            for comp in s.iter_mut() {
                let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    / (1.0 + r2);
                comp[idx] = c;
                comp[j] = c.conj();
            }
        }
        let mut a = ConnectionField::from_spectra(grid, &s);
        let m = a.max_abs();
        if m > 0.0 {
            a.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= amp / m));
        }
        a
    }

    /// Random divergence-free one-form with `max |A| = amp`.
    pub fn random_coulomb(grid: &TorusGrid, band: f64, amp: f64, seed: u64) -> Self {
        let a = ConnectionField::random_smooth(grid, band, 1.0, seed);
        let mut p = super::leray_project(&a);
        let m = p.max_abs();
        if m > 0.0 {
            p.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= amp / m));
        }
        p.coulomb = true;
        p
    }
}
