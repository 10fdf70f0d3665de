//! Acceptance suite: one PASS/FAIL line per criterion, runtime budget included.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use ahlab::cli::identity_suite;
use ahlab::covheat::{
    kernel_constant, kernel_fki, kernel_pde, kernel_pde_field, monotonicity_residual, null_form_residual, Connection,
    FkiOpts, HeatSolveOpts, KernelQuery, Manufactured, Scheme, TrigConnection,
};
use ahlab::diagnostics::{decay_csv, decay_report, ParameterLedger};
use ahlab::noise::NoisePath;
use ahlab::resonance::{resgauge, resgauge_real_space, resonance_csv, resonance_report, ResonanceQuery, ResonanceSubject, C_G};
use ahlab::sah::{gauge_covariance_experiment, gauge_csv, sah_solve, sah_solve_with, GaugeRow, Modification, SahConfig, SahState};
use ahlab::spectral::{heat_semigroup, leray_project, lp_norm, ConnectionField, ScalarField, TorusGrid};
use ahlab::wick::{hermite_shift_check, sigma_squared, SigmaMethod};
use ahlab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn artifacts() -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&d).expect("artifact dir");
    d
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn c1() -> Outcome {
    let ns = [4.0, 8.0, 16.0, 32.0, 64.0];
    let rows = resonance_report(ResonanceSubject::Shift { n0: [1, 0] }, &ns).map_err(e)?;
    fs::write(artifacts().join("criterion1_resonance.csv"), resonance_csv(&rows)).map_err(e)?;
    let lim = -C_G;
    let rel64 = (rows[4].value[0] - lim).abs() / lim.abs();
    let (e16, e32) = (rows[2].abs_err, rows[3].abs_err);
    let ok = rel64 <= 0.05 && rows[4].value[1].abs() <= 0.05 * lim.abs() && e32 <= 0.6 * e16;
    Ok((ok, format!("rel err N=64 {rel64:.2e}, err32/err16 = {:.3}", e32 / e16)))
}

fn c2() -> Outcome {
    let err = |n: f64| -> Result<f64, String> {
        let v = resgauge(&ResonanceQuery::new([2.0, 0.0], 0.5, n).map_err(e)?).map_err(e)?;
        Ok((v[0] - 1.0 / (4.0 * PI)).hypot(v[1]))
    };
    let (e16, e32) = (err(16.0)?, err(32.0)?);
    // the Fourier route against the real-space oracle
    let q = ResonanceQuery::new([2.0, 0.0], 0.5, 8.0).map_err(e)?;
    let (f, r) = (resgauge(&q).map_err(e)?, resgauge_real_space(&q).map_err(e)?);
    let gap = (f[0] - r[0]).hypot(f[1] - r[1]);
    let ok = e32 <= 0.5 * 1.4 * e16 && gap < 1e-6;
    Ok((ok, format!("err16 {e16:.2e}, err32 {e32:.2e}, ratio {:.3}; real-space gap at N=8 {gap:.1e}", e32 / e16)))
}

fn c3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = C64::from_polar(3.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let w = C64::from_polar(3.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let s2 = 5.0 * rng.random::<f64>();
        for m in 0..=4 {
            for n in 0..=4 {
                worst = worst.max(hermite_shift_check(m, n, z, w, s2));
            }
        }
    }
    Ok((worst <= 1e-9, format!("max residual {worst:.2e}")))
}

fn c4() -> Outcome {
    let exact = 3.0 / (8.0 * PI * PI);
    let p1 = sigma_squared(1.0, SigmaMethod::Parseval).map_err(e)?;
    let q1 = sigma_squared(1.0, SigmaMethod::Quadrature).map_err(e)?;
    let want = 2f64.ln() / (4.0 * PI);
    let mut ok = (p1 - exact).abs() < 1e-12 && (q1 - p1).abs() <= 1e-6;
    let mut detail = format!("sigma2(1) {p1:.12} vs 3/8pi^2 {exact:.12}, quadrature gap {:.1e}", (q1 - p1).abs());
    for n in [128.0, 256.0] {
        let d = sigma_squared(2.0 * n, SigmaMethod::Parseval).map_err(e)? - sigma_squared(n, SigmaMethod::Parseval).map_err(e)?;
        ok &= ((d - want) / want).abs() <= 0.1;
        detail.push_str(&format!("; increment at {n}: {:.2}% off", 100.0 * (d - want) / want));
    }
    Ok((ok, detail))
}

fn random_b(g: &TorusGrid, seed: u64) -> ConnectionField {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let band = 1.0 + 7.0 * rng.random::<f64>();
    let mean = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let b = ConnectionField::random_coulomb(g, band, 1.0, seed).shifted(mean);
    let target = rng.random_range(1.0..3.0);
    let s = target / b.max_abs();
    let mut out = b.clone();
    out.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= s));
    out
}

const TIMES: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];

fn c5() -> Outcome {
    let g = TorusGrid::new(64).map_err(e)?;
    let opts = HeatSolveOpts { dt: 2e-3, scheme: Scheme::Etdrk4, massive: false, dealias: true };
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let b = random_b(&g, seed);
        let conn = Connection::Static(b);
        for y in [g.point(0), g.point(64 * 21 + 40)] {
            let fields = kernel_pde_field(&conn, &g, 0.0, y, &TIMES, &opts).map_err(e)?;
            for (f, &t) in fields.iter().zip(TIMES.iter()) {
                for (i, v) in f.values.iter().enumerate() {
                    let q = KernelQuery::new(0.0, y, t, g.point(i)).map_err(e)?;
                    let p = kernel_constant([0.0, 0.0], &q).map_err(e)?.re;
                    worst = worst.max(v.norm() - p);
                }
            }
        }
    }
    Ok((worst <= 1e-3, format!("max(|p_B| - p) = {worst:.2e} over 20 fields, 2 sources, 5 times, all grid targets")))
}

fn c6() -> Outcome {
    let g = TorusGrid::new(64).map_err(e)?;
    let opts = HeatSolveOpts { dt: 5e-3, scheme: Scheme::Etdrk4, massive: false, dealias: true };
    let mut worst: f64 = 0.0;
    for b in [[0.0, 0.0], [1.3, -0.4], [3.0, 0.0], [-2.1, 2.1], [0.5, 2.9], [-1.7, -2.2]] {
        for y in [g.point(0), g.point(64 * 10 + 50)] {
            let fields = kernel_pde_field(&Connection::Constant(b), &g, 0.0, y, &TIMES, &opts).map_err(e)?;
            for (f, &t) in fields.iter().zip(TIMES.iter()) {
                for (i, v) in f.values.iter().enumerate() {
                    let q = KernelQuery::new(0.0, y, t, g.point(i)).map_err(e)?;
                    worst = worst.max((v - kernel_constant(b, &q).map_err(e)?).norm());
                }
            }
        }
    }
    Ok((worst <= 1e-3, format!("sup error {worst:.2e}")))
}

fn c7() -> Outcome {
    let o = FkiOpts { paths: 100_000, substeps: 256, seed: 11, stratonovich: false };
    let mut detail = Vec::new();
    let mut ok = true;
    // a near-antipodal pair (two winding classes) and a near pair
    let qs = [
        KernelQuery::new(0.0, [0.5, 0.5], 0.25, [0.5 + PI - 0.1, 0.2]).map_err(e)?,
        KernelQuery::new(0.0, [1.0, 2.0], 0.2, [1.4, 2.3]).map_err(e)?,
    ];
    for b in [[1.2, 0.7], [-2.5, 1.0]] {
        for q in &qs {
            let (p, se) = kernel_fki(&TrigConnection::constant(b), q, &o).map_err(e)?;
            let exact = kernel_constant(b, q).map_err(e)?;
            let d = (p - exact).norm();
            // one dominant winding class makes the estimator deterministic (se = 0): allow roundoff
            ok &= d <= 3.0 * se + 1e-12 * exact.norm();
            detail.push(format!("{d:.1e}/{se:.1e}"));
        }
    }
    let g = TorusGrid::new(64).map_err(e)?;
    let opts = HeatSolveOpts { dt: 1e-3, scheme: Scheme::Etdrk4, massive: false, dealias: true };
    for seed in [1u64, 2] {
        let b = ConnectionField::random_coulomb(&g, 3.0, 1.0, seed).shifted([0.4, -0.3]);
        for q in &qs {
            let pde = kernel_pde(&Connection::Static(b.clone()), &g, q, &opts).map_err(e)?;
            let (p, se) = kernel_fki(&TrigConnection::from_field(&b, 1e-14), q, &o).map_err(e)?;
            let d = (p - pde).norm();
            ok &= d <= 3.0 * se + 1e-3;
            detail.push(format!("{d:.1e}/{:.1e}", 3.0 * se + 1e-3));
        }
    }
    Ok((ok, format!("constant (gap/se): {}; smooth (gap/bound): {}", detail[..4].join(" "), detail[4..].join(" "))))
}

fn c8() -> Outcome {
    let g = TorusGrid::new(64).map_err(e)?;
    let ns = [8.0, 16.0, 32.0];
    let dt = 1e-4;
    let mut all: Vec<GaugeRow> = Vec::new();
    let (mut id_worst, mut votes_on, mut votes_off) = (0.0f64, 0, 0);
    let mut detail = Vec::new();
    for seed in 0..3u64 {
        let mut cfg = SahConfig::new(64, 8.0, dt, 0.25, 3, seed).map_err(e)?;
        let path = NoisePath::sample_path(dt, cfg.steps(), seed).map_err(e)?;
        for cg in [C_G, 0.0] {
            cfg.cg = cg;
            let rows = gauge_covariance_experiment(&SahState::zeros(&g), &path, [1, 0], &ns, &cfg).map_err(e)?;
            id_worst = rows.iter().fold(id_worst, |m, r| m.max(r.identity));
            let (d8, d32) = (rows[0].covariance_a, rows[2].covariance_a);
            if cg > 0.0 {
                votes_on += (d32 < d8) as usize;
            } else {
                votes_off += (d32 >= d8) as usize;
            }
            detail.push(format!("s{seed} cg={:.3}: {d8:.2e}->{d32:.2e}", cg));
            all.extend(rows);
        }
    }
    fs::write(artifacts().join("criterion8_gauge.csv"), gauge_csv(&all)).map_err(e)?;
    let ok = id_worst <= 5.0 * dt && votes_on >= 2 && votes_off >= 2;
    Ok((ok, format!("(a) max {id_worst:.1e} <= {:.0e}; (b) connection part D(8)->D(32): {}", 5.0 * dt, detail.join(", "))))
}

fn c9() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [2.0, 4.0] {
        let coarse = Manufactured { grid: TorusGrid::new(16).map_err(e)?, c: 1.2 };
        let fine = Manufactured { grid: TorusGrid::new(32).map_err(e)?, c: 1.2 };
        let e1 = monotonicity_residual(&coarse.input(), 0.2, p, 1e-5).map_err(e)?;
        let e2 = monotonicity_residual(&fine.input(), 0.2, p, 1e-5).map_err(e)?;
        let space = (e1 / e2).log2();
        let m = Manufactured { grid: TorusGrid::new(64).map_err(e)?, c: 1.2 };
        let t1 = monotonicity_residual(&m.input(), 0.2, p, 0.08).map_err(e)?;
        let t2 = monotonicity_residual(&m.input(), 0.2, p, 0.04).map_err(e)?;
        let time = (t1 / t2).log2();
        ok &= space >= 1.8 && time >= 0.8;
        detail.push(format!("p={p}: space order {space:.2}, time order {time:.2}"));
    }
    Ok((ok, detail.join("; ")))
}

fn c10() -> Outcome {
    let g = TorusGrid::new(64).map_err(e)?;
    let f = ScalarField::random_smooth(&g, 20.0, 1.0, 5);
    let phys: f64 = f.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.cell();
    let four: f64 = f.forward().coef.iter().map(|z| z.norm_sqr()).sum::<f64>() * 4.0 * PI * PI;
    let parseval = (phys - four).abs() / phys;
    let a = ConnectionField::random_smooth(&g, 20.0, 1.0, 6);
    let p1 = leray_project(&a);
    let idem = p1.max_abs_diff(&leray_project(&p1));
    let div = p1.divergence().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let nf = null_form_residual(&ConnectionField::random_coulomb(&g, 8.0, 2.0, 7), &f, true).map_err(e)?;
    let mut heat_ok = true;
    for seed in 0..50u64 {
        let mut psi = ScalarField::random_smooth(&g, 16.0, 1.0, 100 + seed);
        let mean = psi.values.iter().sum::<C64>() / g.len() as f64;
        psi.values.iter_mut().for_each(|v| *v -= mean);
        let t = 0.01 + 0.02 * seed as f64;
        let h = heat_semigroup(&psi, t, false).map_err(e)?;
        heat_ok &= lp_norm(&g, &h.values, 2.0) <= (-t).exp() * lp_norm(&g, &psi.values, 2.0) * (1.0 + 1e-12);
    }
    let ok = parseval <= 1e-10 && idem <= 1e-10 && div <= 1e-10 && nf <= 1e-10 && heat_ok;
    Ok((ok, format!("parseval {parseval:.1e}, leray idempotence {idem:.1e}, div {div:.1e}, null form {nf:.1e}, heat decay 50/50 {heat_ok}")))
}

fn c11() -> Outcome {
    let g = TorusGrid::new(64).map_err(e)?;
    let mut worst: f64 = 0.0;
    for seed in 0..2u64 {
        let cfg = SahConfig::new(64, 16.0, 1e-3, 0.5, 3, seed).map_err(e)?;
        let path = NoisePath::sample_path(cfg.dt, cfg.steps(), seed).map_err(e)?;
        let init = SahState::new(
            ConnectionField::random_coulomb(&g, 6.0, 1.0, seed),
            ScalarField::random_smooth(&g, 6.0, 0.5, seed + 1),
        );
        let tr = sah_solve_with(&init, &path, &cfg, &Modification::standard(), false).map_err(e)?;
        worst = tr.checkpoints.iter().fold(worst, |m, s| m.max(s.coulomb_defect()));
    }
    Ok((worst <= 1e-9, format!("max |div A| / |A| = {worst:.1e} at every checkpoint")))
}

fn c12() -> Outcome {
    let mut ok = true;
    let mut worst = Vec::new();
    for seed in 0..3u64 {
        for c in identity_suite(64, 10 * seed).map_err(e)? {
            ok &= c.pass();
            if seed == 0 {
                worst.push(format!("{} {:.1e}", c.name, c.value));
            }
        }
    }
    Ok((ok, worst.join(", ")))
}

fn c13() -> Outcome {
    let g = TorusGrid::new(64).map_err(e)?;
    let dt = 5e-4;
    let ledger = ParameterLedger::default();
    let mut ok = true;
    let mut detail = Vec::new();
    let mut csv = String::new();
    for seed in 0..5u64 {
        let cfg = SahConfig::new(64, 16.0, dt, 2.0, 3, seed).map_err(e)?;
        let path = NoisePath::sample_path(dt, cfg.steps(), seed).map_err(e)?;
        let tr = sah_solve(&SahState::zeros(&g), &path, &cfg, &Modification::standard()).map_err(e)?;
        let rows = decay_report(&tr, &path, &cfg, &ledger, &[(0.0, 2.0)]).map_err(e)?;
        let at = rows.iter().find(|r| (r.t - 0.25).abs() < 1e-9).ok_or("no checkpoint at t = 0.25")?.max_col;
        let mx = rows.iter().map(|r| r.max_col).fold(0.0, f64::max);
        ok &= mx.is_finite() && mx < 10.0 * at;
        detail.push(format!("{:.2}", mx / at));
        if seed == 0 {
            csv = decay_csv(&rows);
        }
    }
    fs::write(artifacts().join("criterion13_decay_seed0.csv"), csv).map_err(e)?;
    Ok((ok, format!("max/value(0.25) per seed: {} (bound 10)", detail.join(", "))))
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let suite: [(usize, &str, f64, fn() -> Outcome); 13] = [
        (1, "resonance constant (Fourier)", 1.0, c1),
        (2, "resonance constant (gauge, real-space oracle)", 30.0, c2),
        (3, "Hermite expansion identity", 1.0, c3),
        (4, "sigma^2 value and log increments", 10.0, c4),
        (5, "diamagnetic inequality for the kernel", 120.0, c5),
        (6, "constant-connection kernel", 60.0, c6),
        (7, "FKI cross-validation", 120.0, c7),
        (8, "gauge covariance", 600.0, c8),
        (9, "monotonicity-formula residual", 60.0, c9),
        (10, "spectral infrastructure", 5.0, c10),
        (11, "Coulomb preservation", 120.0, c11),
        (12, "identity suite", 10.0, c12),
        (13, "decay diagnostic", 900.0, c13),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in suite {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let res = f();
        let secs = t0.elapsed().as_secs_f64();
        let (ok, detail) = match res {
            Ok((ok, d)) => (ok && secs < budget, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        failed += (!ok) as usize;
        println!(
            "criterion {id:>2} [{}] {name}: {detail} ({secs:.1}s, budget {budget:.0}s)",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
