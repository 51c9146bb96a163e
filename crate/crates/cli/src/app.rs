use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::commands::{execute, Options, Outcome};
use crate::config::{parse, set_path, Check, ExperimentConfig, KernelChoice, RenormAction};
use crate::error::{CliError, EXIT_GATE, EXIT_OK};
use crate::run::{load, RunDir};

#[derive(Parser, Debug)]
#[command(
    name = "gfperc",
    version,
    about = "Percolation experiments on smooth Gaussian fields"
)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (default `runs/<command>-<hash>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "GFPERC_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true)]
    n: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid spacing.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Truncation radius.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Detector scale.
    #[arg(long = "R", global = true)]
    scale: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    level: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    kernel: Option<KernelChoice>,
    #[arg(long, global = true)]
    coupled: bool,
    /// Detector parameters as JSON.
    #[arg(long, global = true)]
    params: Option<String>,
    /// Record wall time in CSV rows.
    #[arg(long, global = true)]
    timing: bool,
    /// Stop after this many new replicates; finish later with `resume`.
    #[arg(long, global = true)]
    max_replicates: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write one field sample.
    Sample,
    /// Estimate the probability (or mean) of a detector.
    Estimate { detector: Option<String> },
    /// Estimates over a list of level shifts.
    Sweep {
        detector: Option<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        common_rng: bool,
    },
    /// Level at which an increasing detector reaches a target probability.
    Bisect {
        detector: Option<String>,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Statistical checks with a pass/fail gate (exit 4 on failure).
    Validate {
        check: Check,
        #[arg(long, value_delimiter = ',')]
        lags: Option<Vec<f64>>,
        /// Sprinkling shift.
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Renormalization arithmetic and synthetic lattices.
    Renorm {
        action: RenormAction,
        #[arg(long)]
        lambda: Option<u64>,
        #[arg(long)]
        rho: Option<u64>,
        #[arg(long)]
        sigma: Option<u64>,
        #[arg(long)]
        q0: Option<f64>,
        /// Largest scale index.
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        pairs: Option<usize>,
        /// `R,gamma,beta`: bound `P[H_n^c]` from the decay exponent.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Finish an interrupted run.
    Resume { dir: PathBuf },
    /// Print the JSON schema of the config file.
    Schema,
}

fn set(v: &mut Value, path: &[&str], x: Value) -> Result<(), CliError> {
    set_path(v, path, x)
}

fn set_opt<T: serde::Serialize>(
    v: &mut Value,
    path: &[&str],
    x: &Option<T>,
) -> Result<(), CliError> {
    match x {
        Some(x) => set(v, path, json!(x)),
        None => Ok(()),
    }
}

fn set_detector(v: &mut Value, name: &Option<String>) -> Result<(), CliError> {
    if let Some(name) = name {
        if v.pointer("/detector/name").and_then(Value::as_str) != Some(name) {
            set(v, &["detector"], json!({ "name": name }))?;
        }
    }
    Ok(())
}

fn build_config(flags: &Flags, cmd: &Cmd) -> Result<ExperimentConfig, CliError> {
    let mut v = match &flags.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::io(p.display().to_string(), e))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::config(
                    p.display().to_string(),
                    format!(
                        "malformed JSON at line {}, column {}: {e}",
                        e.line(),
                        e.column()
                    ),
                )
            })?
        }
        None => json!({}),
    };
    if !v.is_object() {
        return Err(CliError::config("", "config must be a JSON object"));
    }
    let (command, detector) = match cmd {
        Cmd::Sample => ("sample", None),
        Cmd::Estimate { detector } => ("estimate", detector.clone()),
        Cmd::Sweep { detector, .. } => ("sweep", detector.clone()),
        Cmd::Bisect { detector, .. } => ("bisect", detector.clone()),
        Cmd::Validate { .. } => ("validate", None),
        Cmd::Renorm { .. } => ("renorm", None),
        Cmd::Resume { .. } | Cmd::Schema => unreachable!("handled before config"),
    };
    set(&mut v, &["command"], json!(command))?;
    set_detector(&mut v, &detector)?;
    if let Some(p) = &flags.params {
        let params: Value = serde_json::from_str(p)
            .map_err(|e| CliError::config("detector.params", format!("malformed JSON: {e}")))?;
        set(&mut v, &["detector", "params"], params)?;
    }
    set_opt(&mut v, &["n"], &flags.n)?;
    set_opt(&mut v, &["seed"], &flags.seed)?;
    set_opt(&mut v, &["R"], &flags.scale)?;
    set_opt(&mut v, &["level"], &flags.level)?;
    set_opt(&mut v, &["sampler", "h"], &flags.h)?;
    set_opt(&mut v, &["sampler", "r"], &flags.r)?;
    set_opt(&mut v, &["sampler", "dim"], &flags.dim)?;
    set_opt(&mut v, &["sampler", "kernel"], &flags.kernel)?;
    if flags.coupled {
        set(&mut v, &["sampler", "coupled"], json!(true))?;
    }
    if flags.timing {
        set(&mut v, &["timing"], json!(true))?;
    }
    match cmd {
        Cmd::Sweep {
            levels, common_rng, ..
        } => {
            set_opt(&mut v, &["sweep", "levels"], levels)?;
            if *common_rng {
                set(&mut v, &["sweep", "common_rng"], json!(true))?;
            }
        }
        Cmd::Bisect {
            target,
            lo,
            hi,
            tol,
            ..
        } => {
            set_opt(&mut v, &["bisect", "target"], target)?;
            set_opt(&mut v, &["bisect", "tol"], tol)?;
            if lo.is_some() || hi.is_some() {
                let cur = v
                    .pointer("/bisect/bracket")
                    .cloned()
                    .unwrap_or(json!([-0.5, 0.5]));
                let lo = lo.map(Value::from).unwrap_or_else(|| cur[0].clone());
                let hi = hi.map(Value::from).unwrap_or_else(|| cur[1].clone());
                set(&mut v, &["bisect", "bracket"], json!([lo, hi]))?;
            }
        }
        Cmd::Validate {
            check,
            lags,
            t,
            radii,
        } => {
            set(&mut v, &["validate", "check"], json!(check))?;
            set_opt(&mut v, &["validate", "lags"], lags)?;
            set_opt(&mut v, &["validate", "t"], t)?;
            set_opt(&mut v, &["validate", "radii"], radii)?;
        }
        Cmd::Renorm {
            action,
            lambda,
            rho,
            sigma,
            q0,
            nmax,
            trials,
            pairs,
            eps,
        } => {
            set(&mut v, &["renorm", "action"], json!(action))?;
            set_opt(&mut v, &["renorm", "lambda"], lambda)?;
            set_opt(&mut v, &["renorm", "rho"], rho)?;
            set_opt(&mut v, &["renorm", "sigma"], sigma)?;
            set_opt(&mut v, &["renorm", "d"], &flags.dim)?;
            set_opt(&mut v, &["renorm", "q0"], q0)?;
            set_opt(&mut v, &["renorm", "nmax"], nmax)?;
            set_opt(&mut v, &["renorm", "trials"], trials)?;
            set_opt(&mut v, &["renorm", "pairs"], pairs)?;
            if let Some(e) = eps {
                if e.len() != 3 {
                    return Err(CliError::config(
                        "renorm.hmode.eps",
                        "expected R,gamma,beta",
                    ));
                }
                set(
                    &mut v,
                    &["renorm", "hmode"],
                    json!({"eps": {"r": e[0], "gamma": e[1], "beta": e[2]}}),
                )?;
            }
        }
        _ => {}
    }
    parse(v)
}

fn report(dir: &Path, out: Outcome) -> i32 {
    match out {
        Outcome::Done { summary, gate } => {
            println!("{summary}");
            println!("run directory: {}", dir.display());
            match gate {
                Some(false) => {
                    eprintln!("error: acceptance gate failed");
                    EXIT_GATE
                }
                _ => EXIT_OK,
            }
        }
        Outcome::Partial { done, total } => {
            println!("stopped after {done} of {total} replicates");
            println!("continue with: gfperc resume {}", dir.display());
            EXIT_OK
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let flags = &cli.flags;
    let workers = |cfg: &ExperimentConfig| flags.workers.or(cfg.workers).unwrap_or(0);
    match &cli.cmd {
        Cmd::Schema => {
            let schema = schemars::schema_for!(ExperimentConfig);
            println!(
                "{}",
                serde_json::to_string_pretty(&schema).expect("schema serializes")
            );
            Ok(EXIT_OK)
        }
        Cmd::Resume { dir } => {
            let (cfg, record) = load(dir)?;
            let mut run = RunDir {
                path: dir.clone(),
                record,
            };
            if run.record.complete {
                run.verify_complete()?;
                println!("run already complete; nothing to do");
                return Ok(if run.record.gate == Some(false) {
                    EXIT_GATE
                } else {
                    EXIT_OK
                });
            }
            let opt = Options {
                workers: workers(&cfg),
                max_replicates: flags.max_replicates,
            };
            let out = execute(&cfg, &mut run, &opt)?;
            Ok(report(dir, out))
        }
        cmd => {
            let cfg = build_config(flags, cmd)?;
            let dir = flags
                .out
                .clone()
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| {
                    PathBuf::from(format!(
                        "runs/{}-{}",
                        cfg.command.as_str(),
                        &cfg.hash()[..12]
                    ))
                });
            let mut run = RunDir::open(&dir, &cfg)?;
            if run.record.complete {
                run.verify_complete()?;
                println!(
                    "{} already holds this completed run; nothing to do",
                    dir.display()
                );
                return Ok(if run.record.gate == Some(false) {
                    EXIT_GATE
                } else {
                    EXIT_OK
                });
            }
            let opt = Options {
                workers: workers(&cfg),
                max_replicates: flags.max_replicates,
            };
            let out = execute(&cfg, &mut run, &opt)?;
            Ok(report(&dir, out))
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> Result<ExperimentConfig, CliError> {
        let cli =
            Cli::try_parse_from(std::iter::once("gfperc").chain(args.iter().copied())).unwrap();
        build_config(&cli.flags, &cli.cmd)
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(
            &p,
            r#"{"command": "sample", "n": 5, "seed": 9, "sampler": {"h": 0.5}}"#,
        )
        .unwrap();
        let c = cfg(&[
            "--config",
            p.to_str().unwrap(),
            "estimate",
            "crossing",
            "--n",
            "7",
            "--level",
            "-0.25",
        ])
        .unwrap();
        assert_eq!(c.command.as_str(), "estimate");
        assert_eq!((c.n, c.seed, c.sampler.h, c.level), (7, 9, 0.5, -0.25));
        assert_eq!(c.detector.unwrap().name, "crossing");
    }

    #[test]
    fn subcommand_sections() {
        let c = cfg(&["validate", "covariance", "--lags", "0,1"]).unwrap();
        assert_eq!(c.validate.unwrap().lags, Some(vec![0.0, 1.0]));
        let c = cfg(&["renorm", "verify", "--eps", "1e6,0.2,20", "--dim", "3"]).unwrap();
        let r = c.renorm.unwrap();
        assert_eq!(r.d, Some(3));
        assert!(r.hmode.is_some());
        let c = cfg(&["bisect", "crossing", "--lo", "-1"]).unwrap();
        assert_eq!(c.bisect.unwrap().bracket, (-1.0, 0.5));
    }

    #[test]
    fn bad_params_name_the_field() {
        let e = cfg(&["estimate", "crossing", "--params", "{oops"]).unwrap_err();
        assert_eq!((e.code, e.path.as_str()), (2, "detector.params"));
    }
}
