//! Experiment drivers. Each returns rendered CSV documents; writing them is
//! left to the caller.

use skgs_core::diagnostics::{
    charge, charge_law_reference, charge_slope, energy, energy_drift_rate, energy_law_reference, multisymplectic_form,
    multisymplectic_residual, symplectic_form, TangentPair,
};
use skgs_core::grid::{FieldState, SchemeKind};
use skgs_core::integrators::Stepper;
use skgs_core::montecarlo::{run_convergence, run_ensemble, SeriesStats};
use skgs_core::noise::{sample_path, sample_seed, GENERATOR_NAME};
use skgs_core::SkgsError;

use crate::config::{Command, RunConfig};
use crate::csv::{num, CsvDoc};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bound on `|mean - reference| / stderr` for the evolution-law checks.
pub const Z_BOUND: f64 = 3.0;
/// Bound on the per-step relative change of the wedge functionals.
pub const WEDGE_BOUND: f64 = 1e-8;

/// One output document.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub scheme: SchemeKind,
    /// `"main"`, or `"fields"` for simulation snapshots.
    pub part: &'static str,
    pub doc: CsvDoc,
    /// Outcome of the command's built-in check, where it has one.
    pub passed: Option<bool>,
}

impl Report {
    pub fn render(&self) -> String {
        self.doc.render()
    }
}

fn header(cmd: Command, cfg: &RunConfig, part: &str) -> Vec<(String, String)> {
    let g = &cfg.grid;
    let s = &cfg.scheme;
    let mut h = vec![
        ("command".to_string(), cmd.name().to_string()),
        ("part".into(), part.into()),
        ("version".into(), format!("skgs {VERSION}")),
        ("scheme".into(), s.name.to_string()),
        (
            "grid".into(),
            format!("a={} b={} cells={} h={}", g.a, g.b, g.cells, (g.b - g.a) / g.cells as f64),
        ),
        ("dt".into(), s.dt.to_string()),
        ("t_final".into(), s.t_final.to_string()),
        ("noise".into(), format!("c1={} c2={}", cfg.noise.c1, cfg.noise.c2)),
        ("generator".into(), GENERATOR_NAME.into()),
        ("master_seed".into(), cfg.ensemble.seed.to_string()),
    ];
    if !s.name.is_runge_kutta() {
        h.push((
            "noise_coupling".into(),
            format!("{:?}", s.noise_coupling).to_lowercase(),
        ));
    }
    if s.name.is_runge_kutta() {
        h.push(("stages".into(), s.stages.to_string()));
        h.push(("alpha".into(), format!("{:?}", s.alpha)));
    }
    h
}

fn doc(cmd: Command, cfg: &RunConfig, part: &str, extra: Vec<(String, String)>, columns: &[&str]) -> CsvDoc {
    let mut header = header(cmd, cfg, part);
    header.extend(extra);
    CsvDoc {
        header,
        config: cfg.to_toml(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: Vec::new(),
        summary: Vec::new(),
    }
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

/// Runs `cmd` once per scheme in `schemes` (or for the configured scheme
/// when the list is empty).
pub fn run(cmd: Command, cfg: &RunConfig, schemes: &[SchemeKind], threads: Option<usize>) -> Result<Vec<Report>, CliError> {
    let list: Vec<SchemeKind> = if schemes.is_empty() { vec![cfg.scheme.name] } else { schemes.to_vec() };
    let mut out = Vec::new();
    for &kind in &list {
        let mut c = cfg.clone();
        c.scheme.name = kind;
        c.validate(cmd)?;
        match cmd {
            Command::Simulate => out.extend(simulate(&c)?),
            Command::ChargeLaw => out.push(charge_law(&c, threads)?),
            Command::EnergyLaw => out.push(energy_law(&c, threads)?),
            Command::Converge => out.push(converge(&c, threads)?),
            Command::Symplectic | Command::Multisymplectic => out.push(wedge(cmd, &c)?),
        }
    }
    Ok(out)
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<Report>, CliError> {
    let cmd = Command::Simulate;
    let problem = cfg.problem()?;
    let setup = problem.setup()?;
    let grid = &problem.grid;
    let dt = cfg.scheme.dt;
    let n_steps = problem.scheme.n_steps()?;
    let stepper = problem.stepper(&setup, dt)?;
    let op = stepper.operator();
    let seed = sample_seed(cfg.ensemble.seed, 0);
    let path = sample_path(seed, dt, n_steps)?;

    let mut main = doc(cmd, cfg, "main", vec![kv("path_seed", seed)], &["step", "t", "charge", "energy"]);
    let mut fields = doc(
        cmd,
        cfg,
        "fields",
        vec![kv("path_seed", seed)],
        &["step", "t", "x", "p", "q", "u", "u_t"],
    );
    let stride = cfg.simulate.record_stride;
    let snap = cfg.simulate.snapshot_stride;
    let xs = grid.interior_nodes();
    let mut s = setup.initial.clone();
    let (n0, h0) = (charge(&s, op), energy(&s, op));
    let (mut dn, mut dh) = (0.0f64, 0.0f64);
    for n in 0..=n_steps {
        if n > 0 {
            s = stepper.step(&s, &path.increments[n - 1]).map_err(|e| SkgsError::Sample {
                sample: 0,
                step: n,
                source: Box::new(e),
            })?;
        }
        let t = n as f64 * dt;
        let (c, e) = (charge(&s, op), energy(&s, op));
        dn = dn.max((c - n0).abs());
        dh = dh.max((e - h0).abs());
        if n % stride == 0 || n == n_steps {
            main.rows.push(vec![n.to_string(), num(t), num(c), num(e)]);
        }
        if snap > 0 && (n % snap == 0 || n == n_steps) {
            let ut = s.u_t();
            for i in 0..s.len() {
                fields.rows.push(vec![
                    n.to_string(),
                    num(t),
                    num(xs[i]),
                    num(s.p[i]),
                    num(s.q[i]),
                    num(s.u[i]),
                    num(ut[i]),
                ]);
            }
        }
    }
    main.summary = vec![
        kv("steps", n_steps),
        kv("max_abs_charge_change", num(dn)),
        kv("max_abs_energy_change", num(dh)),
    ];
    let mut out = vec![Report {
        command: cmd,
        scheme: cfg.scheme.name,
        part: "main",
        doc: main,
        passed: None,
    }];
    if snap > 0 {
        fields.summary = vec![kv("snapshot_stride", snap)];
        out.push(Report {
            command: cmd,
            scheme: cfg.scheme.name,
            part: "fields",
            doc: fields,
            passed: None,
        });
    }
    Ok(out)
}

/// `max_n |mean - reference| / stderr` over `n ≥ 1`. A zero standard error
/// (deterministic runs) is replaced by a rounding-level floor.
pub fn max_z(series: &SeriesStats, reference: &[f64]) -> f64 {
    series
        .mean
        .iter()
        .zip(&series.stderr)
        .zip(reference)
        .skip(1)
        .map(|((m, s), r)| (m - r).abs() / s.max(1e-12 * r.abs().max(1.0)))
        .fold(0.0, f64::max)
}

fn ensemble_header(cfg: &RunConfig) -> Vec<(String, String)> {
    vec![
        kv("samples", cfg.ensemble.samples),
        kv("record_stride", cfg.ensemble.record_stride),
        kv("fine_dt", cfg.scheme.dt),
    ]
}

pub fn charge_law(cfg: &RunConfig, threads: Option<usize>) -> Result<Report, CliError> {
    let cmd = Command::ChargeLaw;
    let spec = cfg.ensemble_spec()?;
    let setup = spec.problem.setup()?;
    let rec = run_ensemble(&spec, threads)?;
    let dt = cfg.scheme.dt;
    let n0 = rec.charge.mean[0];
    let reference: Vec<f64> = rec
        .steps
        .iter()
        .map(|&n| charge_law_reference(n, n0, &setup.params, &setup.op, dt))
        .collect();
    let mut d = doc(cmd, cfg, "main", ensemble_header(cfg), &["t", "mean", "stderr", "reference"]);
    for k in 0..rec.steps.len() {
        d.rows.push(vec![
            num(rec.times[k]),
            num(rec.charge.mean[k]),
            num(rec.charge.stderr[k]),
            num(reference[k]),
        ]);
    }
    let z = max_z(&rec.charge, &reference);
    let passed = z <= Z_BOUND;
    d.summary = vec![
        kv("claim", "averaged charge law"),
        kv("slope", num(charge_slope(&setup.params, &setup.op))),
        kv("max_abs_z", num(z)),
        kv("z_bound", Z_BOUND),
        kv("within_bound", passed),
    ];
    Ok(Report {
        command: cmd,
        scheme: cfg.scheme.name,
        part: "main",
        doc: d,
        passed: Some(passed),
    })
}

pub fn energy_law(cfg: &RunConfig, threads: Option<usize>) -> Result<Report, CliError> {
    let cmd = Command::EnergyLaw;
    let spec = cfg.ensemble_spec()?;
    let setup = spec.problem.setup()?;
    let rec = run_ensemble(&spec, threads)?;
    let reference = energy_law_reference(
        rec.energy.mean[0],
        &rec.times,
        &rec.cumulative_coupling.mean,
        &setup.params,
        &setup.op,
    )?;
    let mut d = doc(
        cmd,
        cfg,
        "main",
        ensemble_header(cfg),
        &[
            "t",
            "mean",
            "stderr",
            "reference",
            "coupling_mean",
            "cumulative_coupling_mean",
            "residual_mean",
            "residual_stderr",
        ],
    );
    for k in 0..rec.steps.len() {
        d.rows.push(vec![
            num(rec.times[k]),
            num(rec.energy.mean[k]),
            num(rec.energy.stderr[k]),
            num(reference[k]),
            num(rec.coupling.mean[k]),
            num(rec.cumulative_coupling.mean[k]),
            num(rec.energy_residual.mean[k]),
            num(rec.energy_residual.stderr[k]),
        ]);
    }
    let z = max_z(&rec.energy, &reference);
    let zr = max_z(&rec.energy_residual, &vec![0.0; rec.steps.len()]);
    let claimed = cfg.scheme.name.has_evolution_laws();
    let passed = z <= Z_BOUND;
    d.summary = vec![
        kv(
            "claim",
            if claimed { "averaged energy law" } else { "no theoretical reference claimed" },
        ),
        kv("drift_rate", num(energy_drift_rate(&setup.params, &setup.op))),
        kv("max_abs_z", num(z)),
        kv("max_abs_z_residual", num(zr)),
        kv("z_bound", Z_BOUND),
        kv("within_bound", passed),
    ];
    Ok(Report {
        command: cmd,
        scheme: cfg.scheme.name,
        part: "main",
        doc: d,
        passed: claimed.then_some(passed),
    })
}

pub fn converge(cfg: &RunConfig, threads: Option<usize>) -> Result<Report, CliError> {
    let cmd = Command::Converge;
    let spec = cfg.convergence_spec()?;
    let table = run_convergence(&spec, threads)?;
    let mut d = doc(
        cmd,
        cfg,
        "main",
        vec![
            kv("samples", spec.samples),
            kv("reference_dt", spec.reference_dt),
            kv("fine_dt", spec.reference_dt),
            kv("norm", "sqrt(E[h sum_i |x_coarse - x_ref|^2 over P, Q, U, V]) at t_final"),
        ],
        &["dt", "rms_error"],
    );
    for (dt, e) in table.dt.iter().zip(&table.rms_error) {
        d.rows.push(vec![num(*dt), num(*e)]);
    }
    d.summary = vec![kv("slope", table.slope.map_or("none".to_string(), num))];
    Ok(Report {
        command: cmd,
        scheme: cfg.scheme.name,
        part: "main",
        doc: d,
        passed: None,
    })
}

/// Wedge functional drift along `steps` steps for `pairs` tangent pairs.
pub fn wedge(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    let problem = cfg.problem()?;
    let setup = problem.setup()?;
    let grid = problem.grid.clone();
    let dt = cfg.scheme.dt;
    let rk = match problem.stepper(&setup, dt)? {
        Stepper::RungeKutta(rk) => rk,
        Stepper::Linear(_) => return Err(CliError::Usage(format!("{} needs a Runge-Kutta scheme", cmd.name()))),
    };
    let multi = cmd == Command::Multisymplectic;
    let form = |p: &TangentPair| {
        if multi {
            multisymplectic_form(p, &grid)
        } else {
            symplectic_form(p, &grid)
        }
    };
    let tc = &cfg.symplectic;
    let seed = sample_seed(cfg.ensemble.seed, 0);
    let path = sample_path(seed, dt, tc.steps)?;
    let n = grid.interior_len();
    let columns: &[&str] = if multi {
        &["pair", "step", "t", "form", "abs_change", "rel_change", "residual"]
    } else {
        &["pair", "step", "t", "form", "abs_change", "rel_change"]
    };
    let mut d = doc(
        cmd,
        cfg,
        "main",
        vec![
            kv("pairs", tc.pairs),
            kv("steps", tc.steps),
            kv("tangent_seed", tc.seed),
            kv("path_seed", seed),
            kv(
                "form",
                if multi { "h sum (2 dQ^dP + dR^dU)" } else { "h sum (dq^dp + dv^du)" },
            ),
        ],
        columns,
    );
    let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
    for k in 0..tc.pairs {
        let mut pair = if tc.zero {
            TangentPair::zeros(n)
        } else {
            TangentPair::random(n, sample_seed(tc.seed, k as u64))
        };
        let w0 = form(&pair);
        let mut s: FieldState = setup.initial.clone();
        let mut row = |step: usize, pair: &TangentPair, resid: f64| {
            let w = form(pair);
            let abs = (w - w0).abs();
            let rel = if w0 == 0.0 { if abs == 0.0 { 0.0 } else { f64::INFINITY } } else { abs / w0.abs() };
            worst_rel = worst_rel.max(rel);
            worst_abs = worst_abs.max(abs);
            let mut r = vec![k.to_string(), step.to_string(), num(step as f64 * dt), num(w), num(abs), num(rel)];
            if multi {
                r.push(num(resid));
            }
            d.rows.push(r);
        };
        row(0, &pair, 0.0);
        for (i, inc) in path.increments.iter().enumerate() {
            let before = pair.clone();
            let mut t = [pair.first, pair.second];
            s = rk.step_with_tangents(&s, inc, &mut t).map_err(|e| SkgsError::Sample {
                sample: k,
                step: i + 1,
                source: Box::new(e),
            })?;
            let [first, second] = t;
            pair = TangentPair { first, second };
            row(i + 1, &pair, multisymplectic_residual(&before, &pair, &grid, dt));
        }
    }
    let passed = worst_rel <= WEDGE_BOUND;
    d.summary = vec![
        kv("max_rel_change", num(worst_rel)),
        kv("max_abs_change", num(worst_abs)),
        kv("rel_bound", format!("{WEDGE_BOUND:e}")),
        kv("within_bound", passed),
    ];
    Ok(Report {
        command: cmd,
        scheme: cfg.scheme.name,
        part: "main",
        doc: d,
        passed: Some(passed),
    })
}

/// Reruns the command recorded in a document's metadata and returns the
/// report for the same part.
pub fn rerun(doc: &CsvDoc, threads: Option<usize>) -> Result<Report, CliError> {
    let name = doc
        .header_value("command")
        .ok_or_else(|| CliError::Usage("metadata has no `command` entry".into()))?;
    let cmd = Command::from_name(name).ok_or_else(|| CliError::Usage(format!("unknown command `{name}` in metadata")))?;
    let part = doc.header_value("part").unwrap_or("main");
    let cfg = RunConfig::from_toml(&doc.config)?;
    cfg.validate(cmd)?;
    run(cmd, &cfg, &[], threads)?
        .into_iter()
        .find(|r| r.part == part)
        .ok_or_else(|| CliError::Usage(format!("the rerun produced no `{part}` part")))
}
