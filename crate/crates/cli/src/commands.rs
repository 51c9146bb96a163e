use std::time::Instant;

use gfperc_core::estimate::{
    bisect_level, check_compatible, csv_bytes, duality_check, field_covariance, fkg_check,
    kac_rice_check, run_records, sprinkling_check, summarize, sweep_levels, truncation_check,
    BisectionParams, CsvRow, Estimate, TruncationParams,
};
use gfperc_core::events::{AnnulusMode, AnnulusSpec, CrossingSpec, Detector};
use gfperc_core::fieldgen::{make_kernel, KernelSpec, SamplerConfig};
use gfperc_core::io::save_sample;
use gfperc_core::renorm::{
    geometry_trials, make_h_bounds, verify_recursion, HBounds, LatticeConfig, ProbBound,
    RenormScheme, ScaleParams,
};
use gfperc_core::Error;
use serde::Serialize;

use crate::config::{
    params_json, resolve_detector, BisectParams, Check, Command, ExperimentConfig, HMode,
    RenormAction, RenormParams,
};
use crate::error::{CliError, Context};
use crate::run::RunDir;

pub struct Options {
    pub workers: usize,
    /// Stop after this many new replicates (estimate only).
    pub max_replicates: Option<u64>,
}

/// Result of one invocation on a run directory.
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Done { summary: String, gate: Option<bool> },
    Partial { done: u64, total: u64 },
}

fn done(summary: String) -> Outcome {
    Outcome::Done {
        summary,
        gate: None,
    }
}

fn gated(summary: String, pass: bool) -> Outcome {
    Outcome::Done {
        summary,
        gate: Some(pass),
    }
}

pub fn csv_of<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    w.into_inner().expect("in-memory writer")
}

fn json_of<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("value serializes");
    s.push(b'\n');
    s
}

fn truncation_of(sc: &SamplerConfig) -> Option<f64> {
    match sc {
        SamplerConfig::Convolution { kernel, .. } => kernel.r,
        _ => None,
    }
}

fn csv_row(
    cfg: &ExperimentConfig,
    det: &Detector,
    sc: &SamplerConfig,
    level: f64,
    est: &Estimate,
    wall_ms: u64,
) -> CsvRow {
    CsvRow::new(
        det.name(),
        params_json(det),
        level,
        cfg.scale_or(10.0),
        truncation_of(sc),
        sc.grid().h,
        est,
        if cfg.timing { wall_ms } else { 0 },
    )
}

fn need<'a, T>(v: &'a Option<T>, path: &str) -> Result<&'a T, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::config(path, "required for this command"))
}

pub fn execute(
    cfg: &ExperimentConfig,
    dir: &mut RunDir,
    opt: &Options,
) -> Result<Outcome, CliError> {
    if cfg.n == 0 && !matches!(cfg.command, Command::Renorm | Command::Sample) {
        return Err(CliError::config("n", "need at least one replicate"));
    }
    let t0 = Instant::now();
    let out = match cfg.command {
        Command::Sample => sample(cfg, dir),
        Command::Estimate => estimate(cfg, dir, opt, t0),
        Command::Sweep => sweep(cfg, dir, opt.workers, t0),
        Command::Bisect => bisect(cfg, dir, opt.workers),
        Command::Validate => validate(cfg, dir, opt.workers),
        Command::Renorm => renorm(cfg, need(&cfg.renorm, "renorm")?, dir, opt.workers),
    }?;
    dir.record.elapsed_ms += t0.elapsed().as_millis() as u64;
    match &out {
        Outcome::Done { gate, .. } => {
            dir.record.gate = *gate;
            dir.finish()?
        }
        Outcome::Partial { .. } => dir.save()?,
    }
    Ok(out)
}

fn sample(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Outcome, CliError> {
    let det = match cfg.detector {
        Some(_) => Some(cfg.detector()?),
        None => None,
    };
    let sc = cfg.sampler_for(det.as_ref())?;
    let s = sc.build().at("sampler")?.sample(cfg.seed);
    save_sample(&dir.path.join("sample.fgrid"), &s).at("out")?;
    dir.write_artifact("sampler.json", &json_of(&sc))?;
    dir.register("sample.fgrid");
    Ok(done(format!(
        "sample.fgrid: shape {:?}, seed {}",
        sc.grid().shape(),
        cfg.seed
    )))
}

fn estimate(
    cfg: &ExperimentConfig,
    dir: &mut RunDir,
    opt: &Options,
    t0: Instant,
) -> Result<Outcome, CliError> {
    let det = cfg.detector()?;
    let sc = cfg.sampler_for(Some(&det))?;
    let sampler = sc.build().at("sampler")?;
    check_compatible(&det, &sampler).at("")?;
    let chunk = dir.record.chunk;
    let mut budget = opt.max_replicates.unwrap_or(u64::MAX);
    let mut first = 0;
    while first < cfg.n {
        let count = chunk.min(cfg.n - first);
        if !dir.has_shard(first) {
            if budget == 0 {
                let done = dir.record.shards.iter().map(|s| s.count).sum();
                return Ok(Outcome::Partial { done, total: cfg.n });
            }
            let recs = run_records(&det, &sampler, first..first + count, cfg.seed, opt.workers)
                .at("detector")?;
            dir.add_shard(first, &recs)?;
            budget = budget.saturating_sub(count);
        }
        first += count;
    }
    let values = dir.merged_values(cfg.n)?;
    let est = summarize(&det, &values, cfg.seed);
    let wall = dir.record.elapsed_ms + t0.elapsed().as_millis() as u64;
    let row = csv_row(cfg, &det, &sc, cfg.level, &est, wall);
    dir.write_artifact("estimate.csv", &csv_bytes(&[row]).at("out")?)?;
    Ok(done(format!(
        "{}: p_hat = {:.4} [{:.4}, {:.4}], n = {}",
        det.name(),
        est.p_hat,
        est.ci_lo,
        est.ci_hi,
        est.n
    )))
}

fn sweep(
    cfg: &ExperimentConfig,
    dir: &mut RunDir,
    workers: usize,
    t0: Instant,
) -> Result<Outcome, CliError> {
    let sp = need(&cfg.sweep, "sweep")?;
    let det = cfg.detector()?;
    let sc = cfg.sampler_for(Some(&det))?;
    let curve = sweep_levels(
        &det,
        &sc,
        &sp.levels,
        cfg.n,
        cfg.seed,
        sp.common_rng,
        workers,
    )
    .at("sweep")?;
    let wall = t0.elapsed().as_millis() as u64;
    let rows: Vec<CsvRow> = curve
        .levels
        .iter()
        .zip(&curve.estimates)
        .map(|(&t, e)| csv_row(cfg, &det, &sc, cfg.level + t, e, wall))
        .collect();
    dir.write_artifact("estimate.csv", &csv_bytes(&rows).at("out")?)?;
    dir.write_artifact("sweep.json", &json_of(&curve))?;
    let mut s = format!("{} levels", rows.len());
    if let Some(v) = curve.monotone_violations {
        s.push_str(&format!(", {v} monotonicity violations"));
    }
    Ok(done(s))
}

fn bisect(cfg: &ExperimentConfig, dir: &mut RunDir, workers: usize) -> Result<Outcome, CliError> {
    let bp = cfg.bisect.clone().unwrap_or_default();
    let det = cfg.detector()?;
    let sc = cfg.sampler_for(Some(&det))?;
    let BisectParams {
        target,
        bracket,
        tol,
    } = bp;
    let params = BisectionParams::new(target, bracket, tol, cfg.n);
    let res = bisect_level(&det, &sc, &params, cfg.seed, workers).at("bisect")?;
    let rows: Vec<CsvRow> = res
        .steps
        .iter()
        .map(|s| csv_row(cfg, &det, &sc, cfg.level + s.level, &s.estimate, 0))
        .collect();
    dir.write_artifact("estimate.csv", &csv_bytes(&rows).at("out")?)?;
    dir.write_artifact("bisect.json", &json_of(&res))?;
    Ok(done(format!(
        "level_hat = {:.4} (bracket [{:.4}, {:.4}], {} steps)",
        res.level_hat,
        res.bracket.0,
        res.bracket.1,
        res.steps.len()
    )))
}

/// Five pairs of increasing planar events on `[0, R]^2`.
fn default_fkg_pairs(r: f64, level: f64) -> Vec<(Detector, Detector)> {
    let sq = || CrossingSpec::square(r, level);
    let point = |x: f64, y: f64| Detector::PointValue {
        point: vec![x, y],
        level,
    };
    let c = r / 2.0;
    vec![
        (
            Detector::Crossing(sq()),
            Detector::Crossing(CrossingSpec::along(1, vec![0.0, 0.0], vec![r, r], level)),
        ),
        (Detector::Crossing(sq()), point(c, c)),
        (
            Detector::Annulus(AnnulusSpec::new(
                vec![c, c],
                1.0,
                c,
                AnnulusMode::Arm,
                level,
            )),
            Detector::Crossing(sq()),
        ),
        (point(r / 4.0, r / 4.0), point(3.0 * r / 4.0, 3.0 * r / 4.0)),
        (
            Detector::Crossing(CrossingSpec::along(0, vec![0.0, 0.0], vec![c, r], level)),
            Detector::Crossing(sq()),
        ),
    ]
}

fn union_box(dets: &[&Detector]) -> Option<(Vec<f64>, Vec<f64>)> {
    dets.iter()
        .filter_map(|d| d.extent())
        .reduce(|(lo, hi), (l, h)| {
            (
                lo.iter().zip(&l).map(|(a, b)| a.min(*b)).collect(),
                hi.iter().zip(&h).map(|(a, b)| a.max(*b)).collect(),
            )
        })
}

#[derive(Serialize)]
struct LagRow {
    lag: f64,
    estimate: f64,
    std_err: f64,
    oracle: f64,
    n: u64,
    pass: bool,
}

#[derive(Serialize)]
struct FkgRow {
    pair: usize,
    a: String,
    b: String,
    p_a: f64,
    p_b: f64,
    p_ab: f64,
    cov: f64,
    std_err: f64,
    n: u64,
    pass: bool,
}

fn validate(cfg: &ExperimentConfig, dir: &mut RunDir, workers: usize) -> Result<Outcome, CliError> {
    let vp = need(&cfg.validate, "validate")?;
    let (n, seed) = (cfg.n, cfg.seed);
    match vp.check {
        Check::Covariance => {
            let sc = cfg.sampler_for(None)?;
            let lags = vp.lags.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0]);
            let res = field_covariance(&sc, &lags, n, seed, workers).at("validate.lags")?;
            let rows: Vec<LagRow> = res
                .iter()
                .map(|c| LagRow {
                    lag: c.lag,
                    estimate: c.estimate,
                    std_err: c.std_err,
                    oracle: c.oracle,
                    n: c.n,
                    pass: c.within(3.0, 0.02),
                })
                .collect();
            let pass = rows.iter().all(|r| r.pass);
            dir.write_artifact("covariance.csv", &csv_of(&rows))?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "lag {}: {:.4} vs {:.4} (se {:.4})",
                        r.lag, r.estimate, r.oracle, r.std_err
                    )
                })
                .collect();
            Ok(gated(lines.join("\n"), pass))
        }
        Check::Fkg => {
            let scale = cfg.scale_or(10.0);
            let pairs = match &vp.pairs {
                Some(ps) => ps
                    .iter()
                    .enumerate()
                    .map(|(i, (a, b))| {
                        let p = format!("validate.pairs[{i}]");
                        Ok((
                            resolve_detector(
                                a,
                                scale,
                                cfg.level,
                                cfg.sampler.dim,
                                &format!("{p}[0]"),
                            )?,
                            resolve_detector(
                                b,
                                scale,
                                cfg.level,
                                cfg.sampler.dim,
                                &format!("{p}[1]"),
                            )?,
                        ))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?,
                None => default_fkg_pairs(scale, cfg.level),
            };
            let mut rows = Vec::new();
            for (i, (a, b)) in pairs.iter().enumerate() {
                let mut c = cfg.clone();
                if c.sampler.lo.is_none() {
                    if let Some((lo, hi)) = union_box(&[a, b]) {
                        c.sampler.lo = Some(lo);
                        c.sampler.hi = Some(hi);
                    }
                }
                let sc = c.sampler_for(Some(a))?;
                let e =
                    fkg_check(a, b, &sc, n, seed, workers).at(&format!("validate.pairs[{i}]"))?;
                rows.push(FkgRow {
                    pair: i,
                    a: a.name().into(),
                    b: b.name().into(),
                    p_a: e.p_a,
                    p_b: e.p_b,
                    p_ab: e.p_ab,
                    cov: e.cov,
                    std_err: e.std_err,
                    n: e.n,
                    pass: e.cov >= -3.0 * e.std_err,
                });
            }
            let pass = rows.iter().all(|r| r.pass);
            dir.write_artifact("fkg.csv", &csv_of(&rows))?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{} x {}: cov {:.5} (se {:.5})", r.a, r.b, r.cov, r.std_err))
                .collect();
            Ok(gated(lines.join("\n"), pass))
        }
        Check::Truncation => {
            let params = TruncationParams {
                kernel: KernelSpec::bargmann_fock(cfg.sampler.dim.unwrap_or(2)),
                radius: cfg.scale_or(8.0),
                h: cfg.sampler.h,
                radii: vp.radii.clone().unwrap_or_else(|| vec![4.0, 6.0, 8.0]),
                threshold_const: vp.threshold_const.unwrap_or(1.0),
            };
            let rows = truncation_check(&params, n, seed, workers).at("validate.radii")?;
            let pass = rows.windows(2).all(|w| w[1].median < w[0].median);
            dir.write_artifact("truncation.csv", &csv_of(&rows))?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("r {}: median {:.3e}, p95 {:.3e}", r.r, r.median, r.p95))
                .collect();
            Ok(gated(lines.join("\n"), pass))
        }
        Check::Sprinkling => {
            let scale = cfg.scale_or(10.0);
            let det = match cfg.detector {
                Some(_) => cfg.detector()?,
                None => Detector::Crossing(CrossingSpec::square(scale, cfg.level)),
            };
            let sc = cfg.sampler_for(Some(&det))?;
            let t = vp.t.unwrap_or(0.1);
            let res = sprinkling_check(&det, &sc, scale, t, n, seed, workers).at("detector")?;
            let pass = res.diff >= -3.0 * res.diff_std_err;
            dir.write_artifact("sprinkling.json", &json_of(&res))?;
            Ok(gated(
                format!(
                    "P[A] = {:.4}, P[A + t] = {:.4}, diff {:.4} (se {:.4})",
                    res.p_base, res.p_raised, res.diff, res.diff_std_err
                ),
                pass,
            ))
        }
        Check::Kacrice => {
            let kernel =
                make_kernel(KernelSpec::bargmann_fock(2), cfg.sampler.r).at("sampler.r")?;
            let half = cfg.scale_or(4.0);
            let res = kac_rice_check(&kernel, cfg.level, half, cfg.sampler.h, n, seed, workers)
                .at("validate")?;
            let pass = res.mc.p_hat <= res.bound + 3.0 * res.mc.std_err;
            dir.write_artifact("kacrice.json", &json_of(&res))?;
            Ok(gated(
                format!(
                    "mean components {:.4} (se {:.4}), bound {:.4}",
                    res.mc.p_hat, res.mc.std_err, res.bound
                ),
                pass,
            ))
        }
        Check::Duality => {
            let spec = CrossingSpec::square(cfg.scale_or(10.0), cfg.level);
            let sc = cfg.sampler_for(Some(&Detector::Crossing(spec.clone())))?;
            let res = duality_check(&spec, &sc, n, seed, workers).at("validate")?;
            dir.write_artifact("duality.json", &json_of(&res))?;
            Ok(gated(
                format!(
                    "{} of {} realizations exclusive, P[cross] = {:.4}",
                    res.exclusive, res.n, res.crossing.p_hat
                ),
                res.exclusive == res.n,
            ))
        }
    }
}

fn renorm(
    cfg: &ExperimentConfig,
    rp: &RenormParams,
    dir: &mut RunDir,
    workers: usize,
) -> Result<Outcome, CliError> {
    let d = rp.d.unwrap_or(2);
    match rp.action {
        RenormAction::Verify => {
            let scales = ScaleParams::new(
                d,
                rp.lambda.unwrap_or(10_000_000_000),
                rp.rho.unwrap_or(2),
                rp.sigma.unwrap_or(1000),
            )
            .at("renorm")?;
            let nmax = rp.nmax.unwrap_or(20);
            let mut scheme = RenormScheme::at_cap(scales);
            if let Some(q0) = rp.q0 {
                scheme.q0 = ProbBound::Absolute(q0);
            }
            if let Some(HMode::Eps { r, gamma, beta }) = &rp.hmode {
                let rep = make_h_bounds(*r, *gamma, *beta, d, scales.lambda, nmax)
                    .at("renorm.hmode.eps")?;
                scheme.h_bounds = rep.h_bounds.clone();
                dir.write_artifact("hbounds.json", &json_of(&rep))?;
            }
            let trace = verify_recursion(&scheme, nmax).map_err(|e| match e {
                Error::Hypothesis { n: 0, message } => CliError::config("renorm.q0", message),
                Error::Hypothesis { message, .. } => CliError::config("renorm.hmode", message),
                other => CliError::from_core("renorm", other),
            })?;
            dir.write_artifact("recursion.csv", &csv_of(&trace.rows))?;
            let worst = trace.rows.iter().map(|r| r.u_exact).fold(0.0, f64::max);
            let h = match scheme.h_bounds {
                HBounds::Cap { .. } => "at cap",
                _ => "from eps",
            };
            Ok(gated(
                format!(
                    "n <= {nmax}, H bounds {h}: max q_n / (qbar0 2^-2^n) = {worst:.6}; bound {}",
                    if trace.all_pass { "holds" } else { "FAILS" }
                ),
                trace.all_pass,
            ))
        }
        RenormAction::Simulate => {
            let lambda = rp.lambda.unwrap_or(50);
            let rho = rp.rho.unwrap_or(2);
            let scales = ScaleParams::new(d, lambda, rho, rp.sigma.unwrap_or(1)).at("renorm")?;
            let n = rp.nmax.unwrap_or(1);
            let side = (8 * rho * lambda + 1) as f64;
            let p_g0 = rp.p_g0.unwrap_or(1.0 - side.powi(-(d as i32)));
            let lc = LatticeConfig::new(scales, n, p_g0, vec![rp.p_h.unwrap_or(1.0); n], cfg.seed);
            let rep = geometry_trials(
                &lc,
                rp.trials.unwrap_or(500),
                rp.pairs.unwrap_or(20),
                workers,
            )
            .at("renorm")?;
            dir.write_artifact("counterexamples.json", &json_of(&rep.counterexamples))?;
            dir.write_artifact("geometry.json", &json_of(&rep))?;
            Ok(gated(
                format!(
                    "{} trials, G held in {}, {} pairs checked, {} counterexamples",
                    rep.trials,
                    rep.g_held,
                    rep.pairs_checked,
                    rep.counterexamples.len()
                ),
                rep.counterexamples.is_empty(),
            ))
        }
    }
}
