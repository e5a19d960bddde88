//! Command-line interface: configuration ingestion, subcommand dispatch, and
//! deterministic report emission.

pub mod config;
pub mod report;

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::Path;

use crate::carleman::{
    build_weight_pair_with_options, carleman_ratio, certify_subellipticity, manufactured_pair,
    PhaseId, PhasePair1D,
};
use crate::disc::build_grid;
use crate::error::Error;
use crate::evolution::{simulate, InitialData};
use crate::generator::assemble_generator;
use crate::spectral::{log_spaced, resolvent_sweep, spectrum};
pub use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "kv-plate-lab",
    about = "Numerical laboratory for a transmission plate with localized Kelvin-Voigt damping",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the model configuration; --show prints the resolved config.
    Model {
        #[command(flatten)]
        config: ConfigArg,
        /// Print the fully resolved configuration (all defaults) as JSON.
        #[arg(long)]
        show: bool,
    },
    /// Evolve the damped plate and write the energy ledger.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Final time (overrides the config).
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Use a pure undamped mode as initial data instead of smooth
        /// projected random data.
        #[arg(long)]
        mode: Option<usize>,
        #[arg(long, default_value = "trace.csv")]
        out: String,
    },
    /// Dense spectrum of the generator.
    Spectrum {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "eig.csv")]
        out: String,
    },
    /// Resolvent-norm sweep along the imaginary axis with the growth fit.
    Resolvent {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        mu_min: Option<f64>,
        #[arg(long)]
        mu_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, default_value = "sweep.csv")]
        out: String,
    },
    /// Weighted transmission-inequality sweep over the semiclassical
    /// parameter.
    Carleman {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated h values (overrides the config sweep).
        #[arg(long, value_delimiter = ',')]
        h_sweep: Option<Vec<f64>>,
        #[arg(long, default_value = "ratio.csv")]
        out: String,
    },
    /// Build the two-phase weight pair and certify sub-ellipticity.
    Weights {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        hole_x: Option<f64>,
        #[arg(long)]
        hole_r: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "weights.json")]
        out: String,
    },
    /// Assemble the summary document from emitted artifacts.
    Report {
        #[arg(long)]
        trace: Option<String>,
        #[arg(long)]
        eig: Option<String>,
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        ratio: Option<String>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value = "summary.json")]
        out: String,
    },
}

/// Entry point: returns the process exit code (0 success, 1 validation
/// error, 2 numerical failure with a diagnostic file).
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version on stdout with success status
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err((e, out_hint)) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if code == 2 {
                let diag = diagnostic_path(out_hint.as_deref());
                let body = serde_json::json!({
                    "error": e.to_string(),
                    "kind": "numerical-failure",
                });
                if let Ok(text) = serde_json::to_string_pretty(&body) {
                    let _ = std::fs::write(&diag, text + "\n");
                    eprintln!("diagnostic written to {diag}");
                }
            }
            code
        }
    }
}

fn diagnostic_path(out: Option<&str>) -> String {
    match out {
        Some(o) => {
            let p = Path::new(o);
            let dir = p.parent().unwrap_or_else(|| Path::new("."));
            dir.join("kv-plate-lab-failure.json")
                .to_string_lossy()
                .into_owned()
        }
        None => "kv-plate-lab-failure.json".into(),
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig, Error> {
    let cfg = match &arg.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

type CmdResult = Result<(), (Error, Option<String>)>;

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Model { config, show } => {
            let cfg = load_config(&config).map_err(|e| (e, None))?;
            cmd_model(&cfg, show).map_err(|e| (e, None))
        }
        Command::Simulate {
            config,
            t_final,
            dt,
            mode,
            out,
        } => {
            let mut cfg = load_config(&config).map_err(|e| (e, Some(out.clone())))?;
            if let Some(t) = t_final {
                cfg.numerics.t_final = t;
            }
            if let Some(d) = dt {
                cfg.numerics.dt = d;
            }
            cmd_simulate(&cfg, mode, &out).map_err(|e| (e, Some(out.clone())))
        }
        Command::Spectrum { config, out } => {
            let cfg = load_config(&config).map_err(|e| (e, Some(out.clone())))?;
            cmd_spectrum(&cfg, &out).map_err(|e| (e, Some(out.clone())))
        }
        Command::Resolvent {
            config,
            mu_min,
            mu_max,
            points,
            out,
        } => {
            let mut cfg = load_config(&config).map_err(|e| (e, Some(out.clone())))?;
            if let Some(v) = mu_min {
                cfg.sweep.mu_min = v;
            }
            if let Some(v) = mu_max {
                cfg.sweep.mu_max = v;
            }
            if let Some(v) = points {
                cfg.sweep.points = v;
            }
            cfg.validate().map_err(|e| (e, Some(out.clone())))?;
            cmd_resolvent(&cfg, &out).map_err(|e| (e, Some(out.clone())))
        }
        Command::Carleman {
            config,
            h_sweep,
            out,
        } => {
            let mut cfg = load_config(&config).map_err(|e| (e, Some(out.clone())))?;
            if let Some(hs) = h_sweep {
                cfg.carleman.h_sweep = hs;
            }
            cfg.validate().map_err(|e| (e, Some(out.clone())))?;
            cmd_carleman(&cfg, &out).map_err(|e| (e, Some(out.clone())))
        }
        Command::Weights {
            config,
            hole_x,
            hole_r,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config).map_err(|e| (e, Some(out.clone())))?;
            if let Some(v) = hole_x {
                cfg.carleman.hole_x = v;
            }
            if let Some(v) = hole_r {
                cfg.carleman.hole_r = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            cfg.validate().map_err(|e| (e, Some(out.clone())))?;
            cmd_weights(&cfg, &out).map_err(|e| (e, Some(out.clone())))
        }
        Command::Report {
            trace,
            eig,
            sweep,
            ratio,
            weights,
            out,
        } => cmd_report(
            trace.as_deref(),
            eig.as_deref(),
            sweep.as_deref(),
            ratio.as_deref(),
            weights.as_deref(),
            &out,
        )
        .map_err(|e| (e, Some(out.clone()))),
    }
}

fn cmd_model(cfg: &RunConfig, show: bool) -> Result<(), Error> {
    if show {
        println!("{}", serde_json::to_string_pretty(cfg).unwrap());
        return Ok(());
    }
    let model = cfg.build_model()?;
    let grid = build_grid(&model, cfg.numerics.n_cells)?;
    println!(
        "model ok: L={}, interfaces ({}, {}), c=({}, {}), damping {:?}",
        model.length,
        model.interface_left,
        model.interface_right,
        model.c1,
        model.c2,
        model.damping.shape
    );
    if grid.n_cells != grid.requested_cells {
        println!(
            "grid: requested {} cells, adjusted to {} so the interfaces land on nodes (h = {})",
            grid.requested_cells, grid.n_cells, grid.spacing
        );
    } else {
        println!("grid: {} cells, h = {}", grid.n_cells, grid.spacing);
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, mode: Option<usize>, out: &str) -> Result<(), Error> {
    let model = cfg.build_model()?;
    let grid = build_grid(&model, cfg.numerics.n_cells)?;
    let gen = assemble_generator(&model, &grid)?;
    let init = match mode {
        Some(k) => InitialData::Mode(k),
        None => InitialData::SmoothK {
            k: 8.min(gen.n()),
            seed: cfg.seed,
        },
    };
    let trace = simulate(&gen, &init, cfg.numerics.t_final, cfg.numerics.dt)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(file, "t,energy,cumulative_dissipation,identity_residual")?;
    for i in 0..trace.times.len() {
        writeln!(
            file,
            "{},{},{},{}",
            trace.times[i],
            trace.energy[i],
            trace.cumulative_dissipation[i],
            trace.identity_residual(i)
        )?;
    }
    println!(
        "trace written to {out}: {} samples, E(0) = {}, E(T) = {}",
        trace.times.len(),
        trace.energy[0],
        trace.energy.last().unwrap()
    );
    Ok(())
}

fn cmd_spectrum(cfg: &RunConfig, out: &str) -> Result<(), Error> {
    let model = cfg.build_model()?;
    let grid = build_grid(&model, cfg.numerics.n_cells)?;
    let gen = assemble_generator(&model, &grid)?;
    let rep = spectrum(&gen)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(file, "re,im")?;
    for l in &rep.eigenvalues {
        writeln!(file, "{},{}", l.re, l.im)?;
    }
    println!(
        "spectrum written to {out}: {} eigenvalues, max Re = {:e}",
        rep.eigenvalues.len(),
        rep.max_real_part
    );
    if rep.max_real_part > 1e-10 {
        println!("warning: eigenvalues found right of the 1e-10 half-plane margin");
    }
    Ok(())
}

fn cmd_resolvent(cfg: &RunConfig, out: &str) -> Result<(), Error> {
    let model = cfg.build_model()?;
    let grid = build_grid(&model, cfg.numerics.n_cells)?;
    let gen = assemble_generator(&model, &grid)?;
    let mus = log_spaced(cfg.sweep.mu_min, cfg.sweep.mu_max, cfg.sweep.points.max(2));
    let mus = if cfg.sweep.points == 1 {
        vec![cfg.sweep.mu_min]
    } else {
        mus
    };
    let sweep = resolvent_sweep(&gen, &mus);
    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(file, "mu,norm,log_norm,iterations")?;
    for s in &sweep.samples {
        writeln!(file, "{},{},{},{}", s.mu, s.norm, s.norm.ln(), s.iterations)?;
    }
    match sweep.envelope {
        Some(env) => println!(
            "sweep written to {out}: {} points, envelope log|R| <= {} + {} |mu|",
            sweep.samples.len(),
            env.c_a,
            env.c_b
        ),
        None => println!(
            "sweep written to {out}: {} points, no finite samples for the envelope",
            sweep.samples.len()
        ),
    }
    Ok(())
}

fn cmd_carleman(cfg: &RunConfig, out: &str) -> Result<(), Error> {
    let model = cfg.build_model()?;
    let grid = build_grid(&model, cfg.numerics.n_cells)?;
    let phases = PhasePair1D::standard(&model, cfg.carleman.s1, cfg.carleman.s2)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(
        file,
        "h,lhs,rhs,ratio,lhs_w1,lhs_grad_w1,lhs_w1_s,lhs_grad_w1_s,lhs_dn_w1_s,lhs_w2,lhs_grad_w2,lhs_w2_s,lhs_grad_w2_s,lhs_dn_w2_s,rhs_f1,rhs_f2,rhs_w1_obs,rhs_dn_w1_obs,rhs_e1,rhs_grad_e1,rhs_e2"
    )?;
    for &h in &cfg.carleman.h_sweep {
        let aux = manufactured_pair(&model, &grid, h, cfg.carleman.alpha1, cfg.carleman.alpha2);
        let rep = carleman_ratio(&model, &grid, &phases, h, &aux, cfg.carleman.h0)?;
        write!(file, "{},{:e},{:e},{}", rep.h, rep.lhs, rep.rhs, rep.ratio)?;
        for t in rep.lhs_terms {
            write!(file, ",{t:e}")?;
        }
        for t in rep.rhs_terms {
            write!(file, ",{t:e}")?;
        }
        writeln!(file)?;
    }
    println!(
        "ratio sweep written to {out}: {} h values",
        cfg.carleman.h_sweep.len()
    );
    Ok(())
}

fn cmd_weights(cfg: &RunConfig, out: &str) -> Result<(), Error> {
    let domain = cfg.build_annulus()?;
    let pair =
        build_weight_pair_with_options(&domain, cfg.seed, cfg.carleman.skip_hole_sign_check)?;
    let mut certificates = Vec::new();
    for phase in [PhaseId::Phase1, PhaseId::Phase2] {
        certificates.push(certify_subellipticity(
            &pair,
            phase,
            cfg.carleman.cert_grid,
        )?);
    }
    let crit_json = |pts: &[crate::carleman::CriticalPoint],
                     partner: &dyn crate::carleman::Field2| {
        pts.iter()
            .map(|c| {
                serde_json::json!({
                    "x": c.pos[0],
                    "y": c.pos[1],
                    "kind": c.kind,
                    "value": c.value,
                    "partner_value": partner.eval(c.pos),
                })
            })
            .collect::<Vec<_>>()
    };
    let body = serde_json::json!({
        "domain": domain,
        "seed": cfg.seed,
        "trivial": pair.trivial,
        "epsilon": pair.epsilon,
        "critical_points_phase1": crit_json(&pair.crit1, pair.psi2.as_ref()),
        "critical_points_phase2": crit_json(&pair.crit2, pair.psi1.as_ref()),
        "certificates": certificates,
    });
    std::fs::write(out, serde_json::to_string_pretty(&body).unwrap() + "\n")?;
    println!(
        "weights written to {out}: {} + {} critical points, eps = {}, lambdas = {:?}",
        pair.crit1.len(),
        pair.crit2.len(),
        pair.epsilon,
        certificates
            .iter()
            .map(|c| c.lambda_used)
            .collect::<Vec<_>>()
    );
    Ok(())
}

fn cmd_report(
    trace: Option<&str>,
    eig: Option<&str>,
    sweep: Option<&str>,
    ratio: Option<&str>,
    weights: Option<&str>,
    out: &str,
) -> Result<(), Error> {
    let summary = report::build_summary(trace, eig, sweep, ratio, weights)?;
    std::fs::write(out, serde_json::to_string_pretty(&summary).unwrap() + "\n")?;
    println!("summary written to {out}");
    Ok(())
}
