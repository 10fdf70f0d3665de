//! Command-line front end: config resolution, subcommands and artifacts.
//!
//! Values are resolved per key, later sources winning:
//! built-in default < `--config` file (`key = value` lines, `#` comments)
//! < environment `AHLAB_<key>` (exact key case, e.g. `AHLAB_dt`)
//! < `--set key=value` < the per-key flag (`--dt 1e-3`) < `--seed`.
//! `--out`, `--threads` and `--config` also read `AHLAB_OUT`,
//! `AHLAB_THREADS` and `AHLAB_CONFIG`.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical abort.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Arg, ArgAction, ArgMatches, Command};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::covheat::{
    a_symmetry_residual, bochner_residual, commutator_residual, diamagnetic_pointwise_violation, energy, kernel_constant,
    kernel_fki, kernel_pde, null_form_residual, product_rule_residual, Connection, FkiOpts, HeatSolveOpts, KernelQuery,
    TrigConnection,
};
use crate::diagnostics::{decay_csv, decay_report, ParameterLedger};
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::resonance::{resonance_csv, resonance_report, ResonanceSubject, C_G};
use crate::sah::{gauge_covariance_experiment, gauge_csv, sah_solve, series_csv, Modification, SahConfig, SahState};
use crate::spectral::io::{csv_row, fmt_f64, write_connection, write_scalar};
use crate::spectral::{ConnectionField, ScalarField, TorusGrid};
use crate::wick::{hermite_shift_check, sigma_squared, SigmaMethod};

pub const ENV_PREFIX: &str = "AHLAB_";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Need {
    Required,
    Default(&'static str),
    Optional,
}

#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub name: &'static str,
    pub need: Need,
    pub help: &'static str,
}

const fn req(name: &'static str, help: &'static str) -> Key {
    Key { name, need: Need::Required, help }
}
const fn def(name: &'static str, v: &'static str, help: &'static str) -> Key {
    Key { name, need: Need::Default(v), help }
}
const fn opt(name: &'static str, help: &'static str) -> Key {
    Key { name, need: Need::Optional, help }
}

pub const SUBCOMMANDS: &[(&str, &str)] = &[
    ("simulate", "run the regularized equations and write the norm series and checkpoints"),
    ("gauge-check", "gauge-covariance discrepancy table over N and C_g"),
    ("resonance", "convergence table of the resonance constant"),
    ("kernel", "covariant heat kernel at one space-time pair by several backends"),
    ("wick-table", "sigma^2 table: Parseval sum vs quadrature oracle"),
    ("decay-report", "simulate, then the gauge-invariant decay diagnostic"),
    ("selftest", "identity suite with pass/fail counts"),
];

const RUN_KEYS: &[Key] = &[
    req("M", "grid points per side (even)"),
    req("N", "noise cutoff"),
    req("dt", "time step"),
    req("T", "final time (multiple of dt)"),
    req("q", "odd power of the Wick nonlinearity"),
    def("seed", "0", "noise seed"),
    opt("output", "output directory (overridden by --out)"),
    opt("checkpoint_every", "steps between checkpoints (default: round(0.05/dt))"),
    def("init", "zero", "initial data: zero | smooth"),
    def("init_band", "4", "band of smooth initial data"),
    def("init_amp", "0.5", "amplitude of smooth initial data"),
    def("init_seed", "1", "seed of smooth initial data"),
    def("kappa", "0.1", "regularity of the C^-kappa proxy norms"),
    def("ceiling", "1e6", "abort when sup|phi| exceeds this"),
    def("dealias", "true", "3/2-rule dealiasing of products"),
];

fn keys(sub: &str) -> Vec<Key> {
    let mut k: Vec<Key> = Vec::new();
    match sub {
        "simulate" => {
            k.extend_from_slice(RUN_KEYS);
            k.push(def("cg", "1/8pi", "gauge renormalization constant"));
        }
        "gauge-check" => {
            k.extend_from_slice(RUN_KEYS);
            k.retain(|x| x.name != "N");
            k.push(def("N", "8,16,32", "noise cutoffs"));
            k.push(def("cg", "0,1/8pi", "gauge renormalization constants"));
            k.push(def("n0", "1,0", "integer gauge shift"));
        }
        "decay-report" => {
            k.extend_from_slice(RUN_KEYS);
            k.push(def("cg", "1/8pi", "gauge renormalization constant"));
            k.push(opt("windows", "t0:len,... (default 0:T)"));
            k.push(def("nu", "0.1", "ledger base parameter"));
            k.push(def("c3", "1", "admissible time-scale constant"));
            k.push(def("r_cap", "8", "cap on the L^r exponent"));
        }
        "resonance" => {
            k.push(def("N", "4,8,16,32,64", "cutoffs"));
            k.push(opt("n0", "integer shift: Fourier shift sum"));
            k.push(opt("b", "constant connection: gauge resonance (needs t)"));
            k.push(opt("t", "time of the gauge resonance"));
            k.push(opt("output", "output directory (overridden by --out)"));
        }
        "kernel" => {
            k.push(def("M", "64", "grid points per side"));
            k.push(def("b", "0,0", "constant part of the connection"));
            k.push(def("field_band", "0", "band of a random Coulomb fluctuation (0: constant connection)"));
            k.push(def("field_amp", "1", "amplitude of the fluctuation"));
            k.push(def("field_seed", "0", "seed of the fluctuation"));
            k.push(def("s", "0", "source time"));
            k.push(def("y", "0,0", "source point"));
            k.push(def("t", "0.5", "target time"));
            k.push(def("x", "1,1", "target point"));
            k.push(def("backend", "all", "pde | constant | fki | all"));
            k.push(def("dt", "1e-3", "time step of the PDE route"));
            k.push(def("paths", "100000", "Monte Carlo paths"));
            k.push(def("substeps", "256", "Monte Carlo time substeps"));
            k.push(def("seed", "0", "Monte Carlo seed"));
            k.push(opt("output", "output directory (overridden by --out)"));
        }
        "wick-table" => {
            k.push(def("N", "1,2,4,8,16,32,64,128,256", "cutoffs"));
            k.push(opt("output", "output directory (overridden by --out)"));
        }
        "selftest" => {
            k.push(def("M", "32", "grid points per side"));
            k.push(def("seed", "0", "seed of the random test data"));
            k.push(opt("output", "output directory (overridden by --out)"));
        }
        _ => {}
    }
    k
}

/// Column documentation of every CSV the binary can write.
pub const SCHEMAS: &[(&str, &[(&str, &str)])] = &[
    (
        "series.csv",
        &[
            ("t", "time"),
            ("energy", "discrete energy of (A, phi)"),
            ("besov_A", "C^-kappa proxy norm of A"),
            ("besov_phi", "C^-kappa proxy norm of phi"),
            ("gaugeinv_A", "gauge-invariant C^-kappa proxy norm of A"),
            ("gaugeinv_phi", "gauge-invariant C^-kappa proxy norm of phi"),
        ],
    ),
    (
        "gauge.csv",
        &[
            ("N", "noise cutoff"),
            ("cg", "gauge renormalization constant"),
            ("identity", "sup over checkpoints: transformed modified run vs direct transformed run"),
            ("covariance", "sup over checkpoints: transformed standard run vs transformed modified run"),
            ("covariance_A", "connection part of covariance"),
            ("covariance_phi", "scalar part of covariance"),
        ],
    ),
    (
        "resonance.csv",
        &[
            ("N", "cutoff"),
            ("component1", "first component of the resonance"),
            ("component2", "second component of the resonance"),
            ("limit1", "first component of the limit"),
            ("limit2", "second component of the limit"),
            ("abs_err", "Euclidean distance to the limit"),
        ],
    ),
    (
        "kernel.csv",
        &[
            ("s", "source time"),
            ("y1", "source point, first coordinate"),
            ("y2", "source point, second coordinate"),
            ("t", "target time"),
            ("x1", "target point, first coordinate"),
            ("x2", "target point, second coordinate"),
            ("backend", "pde | constant | fki"),
            ("re", "real part of the kernel"),
            ("im", "imaginary part of the kernel"),
            ("stderr", "Monte Carlo standard error (0 for deterministic backends)"),
        ],
    ),
    (
        "sigma2.csv",
        &[
            ("N", "cutoff"),
            ("parseval", "lattice-sum value of sigma^2"),
            ("quadrature", "space-time quadrature value of sigma^2"),
            ("diff", "parseval - quadrature"),
        ],
    ),
    (
        "decay.csv",
        &[
            ("t", "time"),
            ("gaugeinvA_gamma", "gauge-invariant norm of A minus its linear object, to the power gamma"),
            ("psi_Lr", "capped L^r norm of phi minus its linear object"),
            ("max_col", "max of the two previous columns"),
            ("window_id", "index of the window"),
        ],
    ),
    (
        "decay_raw.csv",
        &[
            ("t", "time"),
            ("raw_A", "gauge-invariant C^-kappa proxy norm of A"),
            ("raw_phi", "gauge-invariant C^-kappa proxy norm of phi"),
            ("grows", "1 if max_col grew since the previous checkpoint of the window"),
        ],
    ),
    (
        "selftest.csv",
        &[
            ("name", "identity"),
            ("value", "residual"),
            ("tolerance", "pass threshold"),
            ("pass", "1 on pass"),
        ],
    ),
];

fn header_of(file: &str) -> String {
    let cols = SCHEMAS.iter().find(|s| s.0 == file).expect("documented file").1;
    let mut h = cols.iter().map(|c| c.0).collect::<Vec<_>>().join(",");
    h.push('\n');
    h
}

pub fn schema_json() -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (file, cols) in SCHEMAS {
        let c: Vec<_> = cols.iter().map(|(n, d)| json!({"name": n, "description": d})).collect();
        m.insert(file.to_string(), json!({ "columns": c }));
    }
    serde_json::Value::Object(m)
}

fn command() -> Command {
    let mut cmd = Command::new("ahlab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Numerical laboratory for the stochastic Abelian-Higgs equations on the two-torus")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("PATH").env("AHLAB_CONFIG").help("key = value config file"))
        .arg(Arg::new("out").long("out").global(true).value_name("DIR").env("AHLAB_OUT").help("output directory [default: out]"))
        .arg(Arg::new("seed").long("seed").global(true).value_name("SEED").help("overrides the seed key"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .env("AHLAB_THREADS")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads (0: all cores)"),
        )
        .arg(
            Arg::new("set")
                .long("set")
                .global(true)
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("override one config key"),
        );
    for &(name, about) in SUBCOMMANDS {
        let mut sc = Command::new(name).about(about);
        for k in keys(name) {
            if k.name == "seed" || k.name == "output" {
                continue;
            }
            let help = match k.need {
                Need::Required => format!("{} [required]", k.help),
                Need::Default(d) => format!("{} [default: {d}]", k.help),
                Need::Optional => k.help.to_string(),
            };
            sc = sc.arg(Arg::new(k.name).long(k.name).value_name("VALUE").allow_hyphen_values(true).help(help));
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub subcommand: String,
    pub values: BTreeMap<String, String>,
    pub sources: BTreeMap<String, &'static str>,
    pub out: PathBuf,
    pub threads: usize,
}

/// Parse a `key = value` file; unknown keys are rejected by the caller.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn resolve(m: &ArgMatches, sub: &str, sm: &ArgMatches, env: &dyn Fn(&str) -> Option<String>) -> Result<RunConfig> {
    let ks = keys(sub);
    let known = |k: &str| ks.iter().any(|x| x.name == k);
    let mut values = BTreeMap::new();
    let mut sources = BTreeMap::new();
    for k in &ks {
        if let Need::Default(d) = k.need {
            values.insert(k.name.to_string(), d.to_string());
            sources.insert(k.name.to_string(), "default");
        }
    }
    let mut unknown = Vec::new();
    if let Some(path) = m.get_one::<String>("config") {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
        for (k, v) in parse_config_text(&text)? {
            if known(&k) {
                values.insert(k.clone(), v);
                sources.insert(k, "file");
            } else {
                unknown.push(k);
            }
        }
    }
    for k in &ks {
        if let Some(v) = env(&format!("{ENV_PREFIX}{}", k.name)) {
            values.insert(k.name.to_string(), v);
            sources.insert(k.name.to_string(), "env");
        }
    }
    if let Some(sets) = m.get_many::<String>("set") {
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            let k = k.trim();
            if known(k) {
                values.insert(k.to_string(), v.trim().to_string());
                sources.insert(k.to_string(), "flag");
            } else {
                unknown.push(k.to_string());
            }
        }
    }
    for k in &ks {
        if let Ok(Some(v)) = sm.try_get_one::<String>(k.name) {
            values.insert(k.name.to_string(), v.clone());
            sources.insert(k.name.to_string(), "flag");
        }
    }
    if let Some(s) = m.get_one::<String>("seed") {
        if !known("seed") {
            unknown.push("seed".into());
        } else {
            values.insert("seed".into(), s.clone());
            sources.insert("seed".into(), "flag");
        }
    }
    if !unknown.is_empty() {
        return Err(Error::Config(format!("unknown keys for `{sub}`: {}", unknown.join(", "))));
    }
    let missing: Vec<&str> = ks
        .iter()
        .filter(|k| k.need == Need::Required && !values.contains_key(k.name))
        .map(|k| k.name)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing keys for `{sub}`: {}", missing.join(", "))));
    }
    let out = m
        .get_one::<String>("out")
        .cloned()
        .or_else(|| values.get("output").cloned())
        .unwrap_or_else(|| "out".into());
    let threads = m.get_one::<usize>("threads").copied().unwrap_or(0);
    Ok(RunConfig { subcommand: sub.to_string(), values, sources, out: PathBuf::from(out), threads })
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    let t = v.trim();
    if t == "1/8pi" {
        return Ok(C_G);
    }
    t.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("key {key}: `{v}` is not a finite number")))
}

impl RunConfig {
    fn raw(&self, k: &str) -> Option<&str> {
        self.values.get(k).map(|s| s.as_str())
    }

    fn must(&self, k: &str) -> Result<&str> {
        self.raw(k).ok_or_else(|| Error::Config(format!("missing key {k}")))
    }

    pub fn f64(&self, k: &str) -> Result<f64> {
        parse_num(k, self.must(k)?)
    }

    pub fn uint(&self, k: &str) -> Result<u64> {
        let v = self.must(k)?;
        v.trim().parse::<u64>().map_err(|_| Error::Config(format!("key {k}: `{v}` is not a non-negative integer")))
    }

    pub fn flag(&self, k: &str) -> Result<bool> {
        match self.must(k)?.trim() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::Config(format!("key {k}: `{v}` is not a boolean"))),
        }
    }

    pub fn list(&self, k: &str) -> Result<Vec<f64>> {
        let v = self.must(k)?;
        let l: Vec<f64> = v.split(',').map(|s| parse_num(k, s)).collect::<Result<_>>()?;
        if l.is_empty() {
            return Err(Error::Config(format!("key {k}: empty list")));
        }
        Ok(l)
    }

    pub fn pair(&self, k: &str) -> Result<[f64; 2]> {
        let l = self.list(k)?;
        if l.len() != 2 {
            return Err(Error::Config(format!("key {k}: expected two comma-separated numbers")));
        }
        Ok([l[0], l[1]])
    }

    pub fn int_pair(&self, k: &str) -> Result<[i64; 2]> {
        let p = self.pair(k)?;
        if p.iter().any(|x| x.fract() != 0.0) {
            return Err(Error::Config(format!("key {k}: expected integers")));
        }
        Ok([p[0] as i64, p[1] as i64])
    }

    /// Resolved config in `key = value` form; feeding it back via `--config` replays the run.
    pub fn to_config_text(&self) -> String {
        let mut s = format!("# ahlab {}\n", self.subcommand);
        for (k, v) in &self.values {
            if k != "output" {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    argv: &'a [String],
    config: &'a BTreeMap<String, String>,
    sources: &'a BTreeMap<String, &'static str>,
    threads: usize,
    outputs: &'a [String],
    status: &'a str,
    error: Option<String>,
    details: serde_json::Value,
    created_unix: u64,
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn sah_config(rc: &RunConfig, big_n: f64) -> Result<SahConfig> {
    let m = rc.uint("M")? as usize;
    let dt = rc.f64("dt")?;
    let q = rc.uint("q")?;
    let mut c = SahConfig::new(m, big_n, dt, rc.f64("T")?, q as u32, rc.uint("seed")?)?;
    if rc.raw("cg").is_some() && rc.subcommand != "gauge-check" {
        c.cg = rc.f64("cg")?;
    }
    c.kappa = rc.f64("kappa")?;
    c.ceiling = rc.f64("ceiling")?;
    c.dealias = rc.flag("dealias")?;
    if rc.raw("checkpoint_every").is_some() {
        c.checkpoint_every = rc.uint("checkpoint_every")? as usize;
    }
    c.validate()?;
    Ok(c)
}

fn initial_state(rc: &RunConfig, g: &TorusGrid) -> Result<SahState> {
    match rc.must("init")? {
        "zero" => Ok(SahState::zeros(g)),
        "smooth" => {
            let (band, amp, seed) = (rc.f64("init_band")?, rc.f64("init_amp")?, rc.uint("init_seed")?);
            Ok(SahState::new(
                ConnectionField::random_coulomb(g, band, amp, seed),
                ScalarField::random_smooth(g, band, amp, seed + 1),
            ))
        }
        v => Err(Error::Config(format!("key init: `{v}` is neither zero nor smooth"))),
    }
}

fn run_simulation(rc: &RunConfig) -> Result<(SahConfig, NoisePath, crate::sah::SahTrajectory)> {
    let cfg = sah_config(rc, rc.f64("N")?)?;
    let g = TorusGrid::new(cfg.m)?;
    let init = initial_state(rc, &g)?;
    let path = NoisePath::sample_path(cfg.dt, cfg.steps(), cfg.seed)?;
    let tr = sah_solve(&init, &path, &cfg, &Modification::standard())?;
    Ok((cfg, path, tr))
}

fn cmd_simulate(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let (cfg, _, tr) = run_simulation(rc)?;
    out.write("series.csv", series_csv(&tr.series).as_bytes())?;
    for (i, st) in tr.checkpoints.iter().enumerate() {
        let mut a = Vec::new();
        write_connection(&mut a, &st.a)?;
        out.write(&format!("checkpoints/{i:05}_A.bin"), &a)?;
        let mut p = Vec::new();
        write_scalar(&mut p, &st.physical_phi())?;
        out.write(&format!("checkpoints/{i:05}_phi.bin"), &p)?;
    }
    let times: Vec<f64> = tr.checkpoints.iter().map(|s| s.t).collect();
    Ok(json!({ "sigma2": cfg.sigma2, "steps": cfg.steps(), "checkpoint_times": times }))
}

fn cmd_gauge(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let ns = rc.list("N")?;
    let cgs = rc.list("cg")?;
    let n0 = rc.int_pair("n0")?;
    let base = sah_config(rc, ns[0])?;
    let g = TorusGrid::new(base.m)?;
    let init = initial_state(rc, &g)?;
    let path = NoisePath::sample_path(base.dt, base.steps(), base.seed)?;
    let mut rows = Vec::new();
    for cg in cgs {
        let mut c = base.clone();
        c.cg = cg;
        rows.extend(gauge_covariance_experiment(&init, &path, n0, &ns, &c)?);
    }
    out.write("gauge.csv", gauge_csv(&rows).as_bytes())?;
    Ok(json!({ "dt": base.dt, "identity_bound_5dt": 5.0 * base.dt }))
}

fn cmd_resonance(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let ns = rc.list("N")?;
    let subject = match (rc.raw("n0"), rc.raw("b"), rc.raw("t")) {
        (Some(_), None, None) => ResonanceSubject::Shift { n0: rc.int_pair("n0")? },
        (None, Some(_), Some(_)) => ResonanceSubject::Gauge { b: rc.pair("b")?, t: rc.f64("t")? },
        _ => return Err(Error::Config("resonance needs either n0, or both b and t".into())),
    };
    let rows = resonance_report(subject, &ns)?;
    out.write("resonance.csv", resonance_csv(&rows).as_bytes())?;
    let l = subject.limit();
    Ok(json!({ "limit": [l[0], l[1]] }))
}

fn cmd_kernel(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let g = TorusGrid::new(rc.uint("M")? as usize)?;
    let b = rc.pair("b")?;
    let band = rc.f64("field_band")?;
    let field = if band > 0.0 {
        Some(ConnectionField::random_coulomb(&g, band, rc.f64("field_amp")?, rc.uint("field_seed")?).shifted(b))
    } else {
        None
    };
    let q = KernelQuery::new(rc.f64("s")?, rc.pair("y")?, rc.f64("t")?, rc.pair("x")?)?;
    let backend = rc.must("backend")?;
    let wanted: Vec<&str> = match backend {
        "all" if field.is_some() => vec!["pde", "fki"],
        "all" => vec!["pde", "constant", "fki"],
        "pde" | "constant" | "fki" => vec![backend],
        v => return Err(Error::Config(format!("key backend: unknown backend `{v}`"))),
    };
    let mut s = header_of("kernel.csv");
    for w in wanted {
        let (v, se) = match w {
            "constant" => {
                if field.is_some() {
                    return Err(Error::Config("backend constant needs field_band = 0".into()));
                }
                (kernel_constant(b, &q)?, 0.0)
            }
            "pde" => {
                let conn = match &field {
                    Some(f) => Connection::Static(f.clone()),
                    None => Connection::Constant(b),
                };
                let opts = HeatSolveOpts { dt: rc.f64("dt")?, ..HeatSolveOpts::default() };
                (kernel_pde(&conn, &g, &q, &opts)?, 0.0)
            }
            _ => {
                let tc = match &field {
                    Some(f) => TrigConnection::from_field(f, 1e-14),
                    None => TrigConnection::constant(b),
                };
                let o = FkiOpts {
                    paths: rc.uint("paths")? as usize,
                    substeps: rc.uint("substeps")? as usize,
                    seed: rc.uint("seed")?,
                    stratonovich: false,
                };
                kernel_fki(&tc, &q, &o)?
            }
        };
        let mut row = csv_row(&[q.s, q.y[0], q.y[1], q.t, q.x[0], q.x[1]]);
        row.pop();
        s.push_str(&format!("{row},{w},{},{},{}\n", fmt_f64(v.re), fmt_f64(v.im), fmt_f64(se)));
    }
    out.write("kernel.csv", s.as_bytes())?;
    Ok(json!({ "kernel_scale": "mollified delta of band M/4" }))
}

fn cmd_wick(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let mut s = header_of("sigma2.csv");
    for n in rc.list("N")? {
        let p = sigma_squared(n, SigmaMethod::Parseval)?;
        let q = sigma_squared(n, SigmaMethod::Quadrature)?;
        s.push_str(&csv_row(&[n, p, q, p - q]));
    }
    out.write("sigma2.csv", s.as_bytes())?;
    Ok(json!({}))
}

fn cmd_decay(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let (cfg, path, tr) = run_simulation(rc)?;
    let ledger = ParameterLedger::new(rc.f64("nu")?, rc.f64("c3")?, rc.f64("r_cap")?)?;
    let windows: Vec<(f64, f64)> = match rc.raw("windows") {
        None => vec![(0.0, cfg.t_end)],
        Some(w) => w
            .split(',')
            .map(|p| {
                let (a, b) = p
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("key windows: `{p}` is not t0:len")))?;
                Ok((parse_num("windows", a)?, parse_num("windows", b)?))
            })
            .collect::<Result<_>>()?,
    };
    let rows = decay_report(&tr, &path, &cfg, &ledger, &windows)?;
    out.write("decay.csv", decay_csv(&rows).as_bytes())?;
    let mut raw = header_of("decay_raw.csv");
    for r in &rows {
        raw.push_str(&csv_row(&[r.t, r.raw_a, r.raw_phi, if r.grows { 1.0 } else { 0.0 }]));
    }
    out.write("decay_raw.csv", raw.as_bytes())?;
    let growing: Vec<usize> = (0..windows.len())
        .filter(|&w| {
            let col: Vec<f64> = rows.iter().filter(|r| r.window_id == w).map(|r| r.max_col).collect();
            col.len() > 1 && col[col.len() - 1] > col[0]
        })
        .collect();
    let table: BTreeMap<String, f64> = ledger.table().into_iter().collect();
    Ok(json!({
        "ledger_log10": table,
        "ordering_holds": ledger.ordering_holds(),
        "r_used": ledger.r_used(),
        "growing_windows": growing,
    }))
}

/// One named identity residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.value <= self.tol
    }
}

/// Covariant calculus identities, gauge invariance of the energy and the
/// Hermite shift identity on band-limited random data.
pub fn identity_suite(m: usize, seed: u64) -> Result<Vec<Check>> {
    let g = TorusGrid::new(m)?;
    let band = (m / 8).max(2) as f64;
    let a = ConnectionField::random_smooth(&g, band, 2.0, seed).shifted([0.3, -0.7]);
    let phi = ScalarField::random_smooth(&g, band, 1.5, seed + 1);
    let psi = ScalarField::random_smooth(&g, band, 1.0, seed + 2);
    let c = ConnectionField::random_coulomb(&g, band, 2.0, seed + 3);
    let n0 = [1.0, -2.0];
    let phase = g.plane_wave([-n0[0], -n0[1]]);
    let phig = ScalarField::new(&g, phi.values.iter().zip(phase.iter()).map(|(x, y)| x * y).collect());
    let e0 = energy(&a, &phi, 3, true)?;
    let e1 = energy(&a.shifted(n0), &phig, 3, true)?;
    let mut hermite: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unif = || rng.random::<f64>();
    for _ in 0..20 {
        let z = C64::from_polar(3.0 * unif(), 6.3 * unif());
        let w = C64::from_polar(3.0 * unif(), 6.3 * unif());
        let s2 = 5.0 * unif();
        for mm in 0..=4 {
            for nn in 0..=4 {
                hermite = hermite.max(hermite_shift_check(mm, nn, z, w, s2));
            }
        }
    }
    Ok(vec![
        Check { name: "commutator", value: commutator_residual(&a, &phi, true)?, tol: 1e-9 },
        Check { name: "bochner", value: bochner_residual(&a, &phi, true)?, tol: 1e-9 },
        Check { name: "product_rule", value: product_rule_residual(&a, &phi, &psi, true)?, tol: 1e-9 },
        Check { name: "energy_gauge_invariance", value: (e0 - e1).abs() / e0.abs().max(1.0), tol: 1e-9 },
        Check { name: "a_nonlinearity_symmetry", value: a_symmetry_residual(&a, &phi, &psi, true)?, tol: 1e-9 },
        Check { name: "null_form", value: null_form_residual(&c, &phi, true)?, tol: 1e-10 },
        Check { name: "diamagnetic", value: diamagnetic_pointwise_violation(&a, &phi, 1e-3)?, tol: 1e-9 },
        Check { name: "hermite_shift", value: hermite, tol: 1e-9 },
    ])
}

fn cmd_selftest(rc: &RunConfig, out: &mut Out) -> Result<serde_json::Value> {
    let checks = identity_suite(rc.uint("M")? as usize, rc.uint("seed")?)?;
    let mut s = header_of("selftest.csv");
    for c in &checks {
        println!("{} {} {:.3e} (tol {:.0e})", if c.pass() { "PASS" } else { "FAIL" }, c.name, c.value, c.tol);
        s.push_str(&format!("{},{},{},{}\n", c.name, fmt_f64(c.value), fmt_f64(c.tol), c.pass() as u8));
    }
    out.write("selftest.csv", s.as_bytes())?;
    let passed = checks.iter().filter(|c| c.pass()).count();
    let failed = checks.len() - passed;
    println!("selftest: {passed} passed, {failed} failed");
    if failed > 0 {
        return Err(Error::Invalid(format!("{failed} identity checks failed")));
    }
    Ok(json!({ "passed": passed, "failed": failed }))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } => 2,
        _ => 1,
    }
}

fn execute(rc: &RunConfig, argv: &[String]) -> Result<()> {
    fs::create_dir_all(&rc.out)?;
    let mut out = Out { dir: rc.out.clone(), files: Vec::new() };
    let res = match rc.subcommand.as_str() {
        "simulate" => cmd_simulate(rc, &mut out),
        "gauge-check" => cmd_gauge(rc, &mut out),
        "resonance" => cmd_resonance(rc, &mut out),
        "kernel" => cmd_kernel(rc, &mut out),
        "wick-table" => cmd_wick(rc, &mut out),
        "decay-report" => cmd_decay(rc, &mut out),
        "selftest" => cmd_selftest(rc, &mut out),
        other => Err(Error::Config(format!("unknown subcommand {other}"))),
    };
    out.write("config.txt", rc.to_config_text().as_bytes())?;
    out.write("schema.json", serde_json::to_string_pretty(&schema_json())?.as_bytes())?;
    let (status, error, details) = match &res {
        Ok(d) => ("ok", None, d.clone()),
        Err(e @ Error::Numerical { .. }) => ("numerical_abort", Some(e.to_string()), json!({})),
        Err(e) => ("failed", Some(e.to_string()), json!({})),
    };
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let man = Manifest {
        tool: "ahlab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: &rc.subcommand,
        argv,
        config: &rc.values,
        sources: &rc.sources,
        threads: rc.threads,
        outputs: &files,
        status,
        error,
        details,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    fs::write(rc.out.join("manifest.json"), serde_json::to_string_pretty(&man)?)?;
    res.map(|_| ())
}

/// Parse `argv`, resolve the config against `env` and run; returns the exit code.
pub fn run_with_env<I, S>(argv: I, env: &dyn Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let m = match command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let (sub, sm) = m.subcommand().expect("subcommand is required");
    let rc = match resolve(&m, sub, sm, env) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(rc.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&rc, &argv)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    run_with_env(argv, &|k| std::env::var(k).ok())
}

/// Read a file written by this binary (helper for tests and replays).
pub fn read_text(dir: &Path, name: &str) -> Result<String> {
    Ok(fs::read_to_string(dir.join(name))?)
}
