//! Fourier-side Brownian motions driving the connection (`ξ`, real) and the
//! scalar (`ζ`, complex) equations.
//!
//! Every increment is a pure function of `(seed, kind, level, time index,
//! mode)`: the root increments live on the coarsest step, and each halving of
//! `Δt` splits an increment by a Brownian-bridge draw keyed by its own
//! counter. Summing two fine increments therefore reproduces the coarse one,
//! and modes outside the grid (needed for shifted noises) are available too.

use num_complex::Complex64 as C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::{leray_spec, rho_le, TorusGrid};

const OFF: i64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    /// Connection noise, two real components.
    Xi,
    /// Scalar noise, complex.
    Zeta,
}

/// Lazily evaluated noise path on `t_k = k Δt`, `k = 0..K`.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub seed: u64,
    root_dt: f64,
    level: u32,
    steps: usize,
}

fn stream_key(channel: u64, level: u32, index: u64) -> u64 {
    (index << 7) | ((level as u64) << 2) | channel
}

/// Standard complex normals (`E|Z|² = 1`) for modes `(n1, n2_lo..n2_lo+count)`.
fn normals(seed: u64, stream: u64, n1: i64, n2_lo: i64, count: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let key = ((n1 + OFF) as u128) << 17 | (n2_lo + OFF) as u128;
    rng.set_word_pos(key * 4);
    (0..count)
        .map(|_| {
            // Box-Muller on exactly two words pairs so positions stay fixed
            let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let r = (-u1.ln()).sqrt();
            C64::from_polar(r, 2.0 * PI * u2)
        })
        .collect()
}

impl NoisePath {
    pub fn sample_path(dt: f64, steps: usize, seed: u64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::Invalid(format!("noise step dt={dt} must be positive")));
        }
        if steps == 0 {
            return Err(Error::Invalid("noise path needs K >= 1 steps".into()));
        }
        Ok(NoisePath { seed, root_dt: dt, level: 0, steps })
    }

    /// The same Brownian motions on the grid with half the step.
    pub fn refine(&self) -> Self {
        NoisePath { seed: self.seed, root_dt: self.root_dt, level: self.level + 1, steps: 2 * self.steps }
    }

    pub fn dt(&self) -> f64 {
        self.root_dt / (1u64 << self.level) as f64
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt()
    }

    /// Increments of one channel over `[t_k, t_{k+1}]` for a contiguous run of
    /// `n2`. Components have `E|ΔW|² = Δt`.
    fn increments(&self, channel: u64, k: usize, n1: i64, n2_lo: i64, count: usize) -> Vec<C64> {
        let root = (k >> self.level) as u64;
        let mut len = self.root_dt;
        let z = normals(self.seed, stream_key(channel, 0, root), n1, n2_lo, count);
        let mut x: Vec<C64> = z.iter().map(|z| z * len.sqrt()).collect();
        for l in 1..=self.level {
            let parent = (k >> (self.level - l + 1)) as u64;
            let left = ((k >> (self.level - l)) & 1) == 0;
            let z = normals(self.seed, stream_key(channel, l, parent), n1, n2_lo, count);
            let s = 0.5 * len.sqrt();
            for (xi, zi) in x.iter_mut().zip(z.iter()) {
                *xi = if left { *xi * 0.5 + zi * s } else { *xi * 0.5 - zi * s };
            }
            len *= 0.5;
        }
        x
    }

    /// `ΔW_ζ(k, n)`.
    pub fn zeta(&self, k: usize, n: [i64; 2]) -> C64 {
        self.increments(0, k, n[0], n[1], 1)[0]
    }

    /// `ΔW_ξ(k, n)` with `ΔW_ξ(k, −n) = conj ΔW_ξ(k, n)` and a real zero mode.
    pub fn xi(&self, k: usize, n: [i64; 2]) -> [C64; 2] {
        let upper = n[1] > 0 || (n[1] == 0 && n[0] > 0);
        if n == [0, 0] {
            let f = |c: u64| {
                let v = self.increments(c, k, 0, 0, 1)[0];
                C64::new(v.re * std::f64::consts::SQRT_2, 0.0)
            };
            return [f(1), f(2)];
        }
        if upper {
            [self.increments(1, k, n[0], n[1], 1)[0], self.increments(2, k, n[0], n[1], 1)[0]]
        } else {
            let w = self.xi(k, [-n[0], -n[1]]);
            [w[0].conj(), w[1].conj()]
        }
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k >= self.steps {
            return Err(Error::Invalid(format!("noise step k={k} out of range 0..{}", self.steps)));
        }
        Ok(())
    }

    /// Coefficients of the `ζ` increment `(1/2π) Σ_n ρ_{≤N}(n + sym) e_n ΔW_ζ(k, n + idx)`.
    ///
    /// `sym` shifts the argument of the symbol and `idx` the Brownian motion
    /// index; `cutoff = None` means symbol one on all resolved modes.
    pub fn zeta_spec(
        &self,
        grid: &TorusGrid,
        k: usize,
        cutoff: Option<f64>,
        sym: [i64; 2],
        idx: [i64; 2],
    ) -> Result<Vec<C64>> {
        self.check_k(k)?;
        let m = grid.m();
        let kmax = grid.kmax();
        let mut out = grid.zeros();
        let norm = 1.0 / (2.0 * PI);
        for n1 in -kmax..=kmax {
            let row = self.increments(0, k, n1 + idx[0], -kmax + idx[1], (2 * kmax + 1) as usize);
            for (off, w) in row.iter().enumerate() {
                let n2 = -kmax + off as i64;
                let s = match cutoff {
                    Some(nn) => rho_le([n1 + sym[0], n2 + sym[1]], nn),
                    None => 1.0,
                };
                if s == 0.0 {
                    continue;
                }
                let i = (n1.rem_euclid(m as i64) as usize) * m + n2.rem_euclid(m as i64) as usize;
                out[i] = w * (s * norm);
            }
        }
        Ok(out)
    }

    /// Coefficients of the (optionally Leray-projected) `ξ_{≤N}` increment.
    pub fn xi_spec(
        &self,
        grid: &TorusGrid,
        k: usize,
        cutoff: Option<f64>,
        leray: bool,
    ) -> Result<[Vec<C64>; 2]> {
        self.check_k(k)?;
        let m = grid.m() as i64;
        let kmax = grid.kmax();
        let mut out = [grid.zeros(), grid.zeros()];
        let norm = 1.0 / (2.0 * PI);
        let at = |n: [i64; 2]| (n[0].rem_euclid(m) * m + n[1].rem_euclid(m)) as usize;
        // upper half lattice, mirrored
        for n1 in -kmax..=kmax {
            let lo = if n1 > 0 { 0 } else { 1 };
            let count = (kmax - lo + 1) as usize;
            let r1 = self.increments(1, k, n1, lo, count);
            let r2 = self.increments(2, k, n1, lo, count);
            for off in 0..count {
                let n = [n1, lo + off as i64];
                let s = match cutoff {
                    Some(nn) => rho_le(n, nn),
                    None => 1.0,
                };
                if s == 0.0 {
                    continue;
                }
                let (a, b) = (r1[off] * (s * norm), r2[off] * (s * norm));
                out[0][at(n)] = a;
                out[1][at(n)] = b;
                out[0][at([-n[0], -n[1]])] = a.conj();
                out[1][at([-n[0], -n[1]])] = b.conj();
            }
        }
        let z = self.xi(k, [0, 0]);
        out[0][0] = z[0] * norm;
        out[1][0] = z[1] * norm;
        if leray {
            leray_spec(grid, &mut out);
        }
        Ok(out)
    }
}
