use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hetfront::background::{background_state, riccati_slopes, stationary_front_positions, BoundaryPolicy, Sign};
use hetfront::config::{DdeRunConfig, ModelSpec, PdeRunConfig};
use hetfront::constant_coeff::speed_roots;
use hetfront::dde::{dde_run_algo1, dde_run_algo2, Algorithm};
use hetfront::harness::{compare_trajectories, run_example, time_align, traversal_window, ExampleSettings};
use hetfront::pde::run_pde;
use hetfront::trajectory::{fmt_g15, write_profile_csv};
use hetfront::wave::{find_speed, RootIndex, ShootOptions};
use hetfront::{ModelParams, Trajectory, UniformGrid};

#[derive(Parser)]
#[command(name = "hetfront", version, about = "Fronts in heterogeneous slow-fast reaction-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Named example (fig1, ex0, ex1, ex2, ex3) supplying parameters and heterogeneities.
    #[arg(long)]
    example: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    tauhat: Option<f64>,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        ModelSpec {
            example: self.example.clone(),
            alpha: self.alpha,
            gamma: self.gamma,
            tauhat: self.tauhat,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Background state table: x, f2, v_b^- + 1, q_b^-.
    Background {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 5.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.01)]
        dx: f64,
        /// Treat heterogeneities as constant beyond the grid.
        #[arg(long)]
        frozen: bool,
        /// Output file (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leading-order stationary front positions as JSON.
    StationaryFronts {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 10.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.005)]
        dx: f64,
    },
    /// Singular-limit speeds of the homogeneous problem as JSON.
    Speeds {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        tauhat: f64,
    },
    /// Travelling-wave speed at epsilon > 0 by shooting, as a JSON bracket.
    Shoot {
        #[arg(long)]
        eps: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        tauhat: f64,
        #[arg(long, default_value = "0")]
        root: String,
        #[arg(long, default_value_t = 1e-4)]
        width: f64,
    },
    /// Full PDE run from a TOML config.
    PdeRun {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "HETFRONT_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Delay-equation run from a TOML config.
    DdeRun {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's algorithm.
        #[arg(long)]
        algo: Option<String>,
        #[arg(long, env = "HETFRONT_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Runs a worked example; exits nonzero if any check fails.
    Example {
        id: String,
        /// Comma-separated epsilons for the PDE runs.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, env = "HETFRONT_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// TOML overrides of the example settings; these win over the flags.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compares two trajectory CSVs after aligning both through an anchor.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Anchor `z,s`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        anchor: Option<Vec<f64>>,
        /// Position range `z0,z1`; compares over the time `a` takes to traverse it.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Background { model, x_min, x_max, dx, frozen, out } => {
            let (_, f1, f2) = model.spec().resolve()?;
            let g = UniformGrid::covering(x_min, x_max, dx)?;
            let policy = if frozen { BoundaryPolicy::Frozen } else { BoundaryPolicy::Strict };
            let bg = background_state(&f1, &f2, Sign::Minus, &g, policy)?;
            let mut s = String::from("x,f2,vbm_plus_1,qbm\n");
            for i in 0..g.n {
                let x = g.x(i);
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_g15(x),
                    fmt_g15(f2.eval(x)),
                    fmt_g15(bg.v.values[i] + 1.0),
                    fmt_g15(bg.q.values[i])
                ));
            }
            match out {
                Some(p) => std::fs::write(&p, s).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{s}"),
            }
        }
        Cmd::StationaryFronts { model, x_min, x_max, dx } => {
            let (p, f1, f2) = model.spec().resolve()?;
            let g = UniformGrid::covering(x_min, x_max, dx)?;
            let bg = background_state(&f1, &f2, Sign::Minus, &g, BoundaryPolicy::Strict)?;
            let slopes = riccati_slopes(&f1, &g)?;
            let set = stationary_front_positions(&p, &bg, &slopes)?;
            println!("{}", serde_json::to_string_pretty(&set)?);
        }
        Cmd::Speeds { alpha, gamma, tauhat } => {
            let r = speed_roots(&ModelParams::new(alpha, gamma, tauhat, 0.0)?)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Cmd::Shoot { eps, alpha, gamma, tauhat, root, width } => {
            let p = ModelParams::new(alpha, gamma, tauhat, eps)?;
            let root: RootIndex = root.parse()?;
            let (lo, hi) = find_speed(&p, root, None, width, &ShootOptions::default())?;
            let report = serde_json::json!({
                "params": p, "root": root, "bracket": [lo, hi], "width": hi - lo,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::PdeRun { config, out } => {
            let rc = PdeRunConfig::from_toml(&read(&config)?)?;
            let cfg = rc.pde_config()?;
            let ic = rc.initial_state(&cfg)?;
            let run = run_pde(&cfg, &ic)?;
            std::fs::create_dir_all(&out)?;
            run.trajectory.save(&out.join("trajectory.csv"))?;
            for (k, snap) in run.snapshots.iter().enumerate() {
                let xs = snap.u.grid().xs();
                write_profile_csv(&out.join(format!("profile_{k:04}.csv")), &xs, &snap.u.values, &snap.v.values)?;
            }
            let meta = serde_json::json!({ "config": cfg, "run_config": rc, "stats": run.stats, "failure": run.failure });
            std::fs::write(out.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
            if let Some(f) = &run.failure {
                eprintln!("run stopped early: {f}");
                return Ok(false);
            }
        }
        Cmd::DdeRun { config, algo, out } => {
            let mut rc = DdeRunConfig::from_toml(&read(&config)?)?;
            if let Some(a) = algo {
                rc.algo = Some(match a.as_str() {
                    "1" => Algorithm::One,
                    "2" => Algorithm::Two,
                    other => bail!("--algo must be 1 or 2, got {other}"),
                });
            }
            let (cfg, bg, hist) = rc.build()?;
            let run = match cfg.algo {
                Algorithm::One => dde_run_algo1(&hist, rc.t_span, &cfg, &bg)?,
                Algorithm::Two => dde_run_algo2(&hist, None, rc.t_span, &cfg, &bg)?.0,
            };
            std::fs::create_dir_all(&out)?;
            run.trajectory.save(&out.join("trajectory.csv"))?;
            std::fs::write(out.join("diagnostics.csv"), run.diagnostics_csv())?;
            std::fs::write(out.join("run_config.json"), serde_json::to_string_pretty(&rc)?)?;
            if let Some(f) = &run.failure {
                eprintln!("run stopped early: {f}");
                return Ok(false);
            }
        }
        Cmd::Example { id, eps, out, seed, config } => {
            let mut s = ExampleSettings::defaults(&id)?;
            if let Some(e) = eps {
                s.eps = e;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(c) = config {
                s = hetfront::config::merge_toml(&s, &read(&c)?)?;
            }
            let report = run_example(&s, &out)?;
            for (k, v) in &report.pass_flags {
                println!("{} {k}", if *v { "PASS" } else { "FAIL" });
            }
            for e in &report.errors {
                println!("ERROR {e}");
            }
            println!("report: {}", out.join(&id).join("report.json").display());
            return Ok(report.all_passed());
        }
        Cmd::Compare { a, b, anchor, window } => {
            for (name, v) in [("--anchor", &anchor), ("--window", &window)] {
                if v.as_ref().is_some_and(|v| v.len() != 2) {
                    bail!("{name} takes two comma-separated numbers");
                }
            }
            let ta = Trajectory::read_csv(&a)?;
            let tb = Trajectory::read_csv(&b)?;
            let (ta, tb) = match anchor {
                Some(v) => (time_align(&ta, (v[0], v[1]))?, time_align(&tb, (v[0], v[1]))?),
                None => (ta, tb),
            };
            let sw = match window {
                Some(w) => Some(traversal_window(&ta, (w[0], w[1])).context("first trajectory does not traverse the window")?),
                None => None,
            };
            let c = compare_trajectories(&ta, &tb, sw)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
    }
    Ok(true)
}
