//! Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed. Exits
//! nonzero if any criterion fails.

use std::time::Instant;

use gfperc_core::estimate::{
    bisect_level, duality_check, field_covariance, fkg_check, kac_rice_check, map_replicates,
    run_mc, truncation_check, BisectionParams, Estimate, TruncationParams,
};
use gfperc_core::events::{
    AnnulusMode, AnnulusSpec, CrossingSpec, Detector, SlabEventSpec, SproutsSpec,
};
use gfperc_core::fieldgen::{make_kernel, GridGeometry, KernelSpec, SamplerConfig};
use gfperc_core::renorm::{
    geometry_trials, verify_recursion, LatticeConfig, RenormScheme, ScaleParams,
};
use gfperc_core::Result;

/// Worker threads; 0 means every core.
const WORKERS: usize = 0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn bf(lo: Vec<f64>, hi: Vec<f64>, h: f64, r: Option<f64>) -> Result<SamplerConfig> {
    SamplerConfig::bargmann_fock(lo, hi, h, r, false)
}

fn square_sampler(side: f64, h: f64) -> Result<SamplerConfig> {
    bf(vec![0.0, 0.0], vec![side, side], h, None)
}

/// Sampler whose box is the detector's extent.
fn sampler_for(det: &Detector, h: f64, r: Option<f64>) -> Result<SamplerConfig> {
    let (lo, hi) = det.extent().expect("detector reads the field");
    let kernel = make_kernel(KernelSpec::bargmann_fock(lo.len()), r)?;
    let grid = GridGeometry::snapped(&lo, &hi, h, kernel.support_radius())?;
    Ok(SamplerConfig::Convolution {
        kernel,
        grid,
        coupled: false,
    })
}

fn binom_sd(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn fmt_est(e: &Estimate) -> String {
    format!("{:.4}±{:.4}", e.p_hat, e.std_err)
}

// 1. Empirical covariance against exp(-lag^2/2).
fn covariance() -> Result<Verdict> {
    let sc = bf(vec![-4.0; 2], vec![4.0; 2], 0.25, Some(8.0))?;
    let lags = [0.0, 0.5, 1.0, 2.0];
    let rows = field_covariance(&sc, &lags, 2000, 101, WORKERS)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &rows {
        let exact = (-c.lag * c.lag / 2.0).exp();
        pass &= (c.estimate - exact).abs() <= 3.0 * c.std_err + 0.02;
        parts.push(format!("{}:{:.4}/{:.4}", c.lag, c.estimate, exact));
    }
    verdict(pass, parts.join(" "))
}

struct Dual {
    p: Estimate,
    exclusive: u64,
}

fn self_dual(h: f64) -> Result<Dual> {
    let res = duality_check(
        &CrossingSpec::square(10.0, 0.0),
        &square_sampler(10.0, h)?,
        4000,
        102,
        WORKERS,
    )?;
    Ok(Dual {
        p: res.crossing,
        exclusive: res.exclusive,
    })
}

fn dual_ok(d: &Dual, widen: f64) -> bool {
    let sd = binom_sd(0.5, d.p.n);
    (d.p.p_hat - 0.5).abs() <= widen * (3.0 * sd + 0.03) && d.exclusive == d.p.n
}

// 2. Square crossing at the self-dual level.
fn crossing_half(d: &Dual) -> Result<Verdict> {
    verdict(
        dual_ok(d, 1.0),
        format!("p_hat {}, duality {}/{}", fmt_est(&d.p), d.exclusive, d.p.n),
    )
}

// 3. Long crossings of 3:1 rectangles stay away from 0 and 1.
fn rsw() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [8.0, 16.0] {
        let det = Detector::Crossing(CrossingSpec::rectangle(3.0 * r, r, 0.0));
        let e = run_mc(
            &det,
            &bf(vec![0.0, 0.0], vec![3.0 * r, r], 0.25, None)?,
            4000,
            103,
            WORKERS,
        )?;
        pass &= (0.05..=0.95).contains(&e.p_hat);
        parts.push(format!("R={r}: {}", fmt_est(&e)));
    }
    verdict(pass, parts.join(", "))
}

fn critical_level(h: f64) -> Result<f64> {
    let det = Detector::Crossing(CrossingSpec::square(20.0, 0.0));
    let params = BisectionParams::new(0.5, (-0.5, 0.5), 0.02, 1000);
    Ok(bisect_level(&det, &square_sampler(20.0, h)?, &params, 104, WORKERS)?.level_hat)
}

// 4. Bisection for the planar critical level.
fn critical(level: f64) -> Result<Verdict> {
    verdict(level.abs() <= 0.04, format!("level_hat {level:.4}"))
}

/// Five pairs of increasing planar events on `[0, 10]^2`.
fn fkg_pairs() -> Vec<(Detector, Detector)> {
    let r = 10.0;
    let sq = || Detector::Crossing(CrossingSpec::square(r, 0.0));
    let point = |x: f64, y: f64| Detector::PointValue {
        point: vec![x, y],
        level: 0.0,
    };
    vec![
        (
            sq(),
            Detector::Crossing(CrossingSpec::along(1, vec![0.0, 0.0], vec![r, r], 0.0)),
        ),
        (sq(), point(5.0, 5.0)),
        (
            Detector::Annulus(AnnulusSpec::new(
                vec![5.0, 5.0],
                1.0,
                5.0,
                AnnulusMode::Arm,
                0.0,
            )),
            sq(),
        ),
        (point(2.5, 2.5), point(7.5, 7.5)),
        (
            Detector::Crossing(CrossingSpec::along(0, vec![0.0, 0.0], vec![5.0, r], 0.0)),
            sq(),
        ),
    ]
}

// 5. Positive association, and independence beyond the truncation range.
fn fkg() -> Result<Verdict> {
    let sc = square_sampler(10.0, 0.25)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (a, b)) in fkg_pairs().iter().enumerate() {
        let c = fkg_check(a, b, &sc, 2000, 105 + i as u64, WORKERS)?;
        pass &= c.cov >= -3.0 * c.std_err;
        parts.push(format!("{:.4}", c.cov));
    }
    // q_4 vanishes beyond 2, so boxes 10 apart see independent fields
    let near = Detector::Crossing(CrossingSpec::along(0, vec![0.0, 0.0], vec![4.0, 4.0], 0.0));
    let far = Detector::Crossing(CrossingSpec::along(
        0,
        vec![14.0, 0.0],
        vec![18.0, 4.0],
        0.0,
    ));
    let sc = bf(vec![0.0, 0.0], vec![18.0, 4.0], 0.25, Some(4.0))?;
    let c = fkg_check(&near, &far, &sc, 2000, 110, WORKERS)?;
    pass &= c.cov.abs() <= 3.0 * c.std_err;
    parts.push(format!("far {:.4}±{:.4}", c.cov, c.std_err));
    verdict(pass, format!("cov {}", parts.join(" ")))
}

// 6. Sup-norm truncation error on B(8).
fn truncation() -> Result<Verdict> {
    let params = TruncationParams {
        kernel: KernelSpec::bargmann_fock(2),
        radius: 8.0,
        h: 0.25,
        radii: vec![4.0, 6.0, 8.0],
        threshold_const: 1.0,
    };
    let rows = truncation_check(&params, 200, 111, WORKERS)?;
    let decreasing = rows.windows(2).all(|w| w[1].median < w[0].median);
    // r = 32 is twice the diameter of B(8): f_r and f agree exactly
    let kernel = make_kernel(KernelSpec::bargmann_fock(2), Some(32.0))?;
    let grid = GridGeometry::centered(2, 8.0, 0.25, kernel.untruncated().support_radius())?;
    let sc = SamplerConfig::Convolution {
        kernel,
        grid: grid.clone(),
        coupled: true,
    };
    let gaps = map_replicates(&sc.build()?, 0..50, 111, WORKERS, |s| {
        s.coupling_gap(|idx| {
            let p = grid.point(idx);
            p[0] * p[0] + p[1] * p[1] <= 64.0
        })
    })?;
    let zero = gaps.iter().all(|&g| g == 0.0);
    let medians: Vec<String> = rows
        .iter()
        .map(|r| format!("r={}:{:.2e}", r.r, r.median))
        .collect();
    verdict(
        decreasing && zero,
        format!(
            "medians {}, r=32 max gap {:.1e}",
            medians.join(" "),
            gaps.iter().fold(0.0f64, |a, &b| a.max(b))
        ),
    )
}

// 7. Doubly exponential bound at the caps, exact dyadic arithmetic.
fn recursion() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [2, 3] {
        let t = verify_recursion(
            &RenormScheme::at_cap(ScaleParams::new(d, 10_000_000_000, 2, 1000)?),
            20,
        )?;
        let exact = t.rows.iter().all(|r| r.exact && r.pass_exact);
        // u_{n+1} = 1 + u_n^2 / 4 from u_0 = 1
        let known = t.rows[1].u_exact == 1.25 && t.rows[2].u_exact == 1.390625;
        pass &= t.all_pass && exact && known && t.rows.len() == 21;
        let worst = t.rows.iter().map(|r| r.u_exact).fold(0.0, f64::max);
        parts.push(format!("d={d}: max u {worst:.6}"));
    }
    verdict(pass, parts.join(", "))
}

// 8. Black paths between large sets whenever G_{1,0} holds.
fn geometry() -> Result<Verdict> {
    let scales = ScaleParams::new(2, 50, 2, 1)?;
    let cfg = LatticeConfig::new(scales, 1, 1.0 - 1.0 / 641_601.0, vec![1.0], 112);
    let rep = geometry_trials(&cfg, 500, 20, WORKERS)?;
    verdict(
        rep.counterexamples.is_empty() && rep.g_held > 0,
        format!(
            "G held in {}/{} lattices, {} pairs, {} counterexamples",
            rep.g_held,
            rep.trials,
            rep.pairs_checked,
            rep.counterexamples.len()
        ),
    )
}

// 9. One-arm decay and the half-plane two-arm constant.
fn arms() -> Result<Verdict> {
    let mut one = Vec::new();
    for r in [4.0, 8.0, 16.0] {
        let det = Detector::Annulus(AnnulusSpec::new(
            vec![0.0, 0.0],
            1.0,
            r,
            AnnulusMode::Arm,
            0.0,
        ));
        one.push(run_mc(
            &det,
            &sampler_for(&det, 0.25, None)?,
            2000,
            113,
            WORKERS,
        )?);
    }
    let decreasing = one.windows(2).all(|w| w[1].p_hat < w[0].p_hat);
    let mut cs = Vec::new();
    for (r1, r2) in [(1.0, 4.0), (1.0, 8.0), (2.0, 8.0)] {
        let det = Detector::TwoArms {
            center: vec![0.0; 3],
            r_inner: r1,
            r_outer: r2,
            level: 0.0,
        };
        let e = run_mc(&det, &sampler_for(&det, 0.5, None)?, 1000, 114, WORKERS)?;
        cs.push(e.p_hat * r2 / r1);
    }
    let (lo, hi) = cs
        .iter()
        .fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    let stable = lo > 0.0 && hi <= 2.0 * lo;
    let one_s: Vec<String> = one.iter().map(fmt_est).collect();
    let c_s: Vec<String> = cs.iter().map(|c| format!("{c:.3}")).collect();
    verdict(
        decreasing && stable,
        format!("one-arm {}; c fits {}", one_s.join(" > "), c_s.join(" ")),
    )
}

// 10. Three-dimensional trends.
fn slabs() -> Result<Verdict> {
    let trend = |ests: &[Estimate]| {
        ests.windows(2).all(|w| {
            w[1].p_hat >= w[0].p_hat - 3.0 * (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt()
        })
    };
    let mut uniq = Vec::new();
    let mut sprout = Vec::new();
    for (r, n) in [(8.0, 200), (16.0, 200), (32.0, 100)] {
        let trunc = Some(f64::powf(r, 0.2).max(2.0));
        let det = Detector::Uniqueness(SlabEventSpec::scaled(r, 0.5, 0.25));
        uniq.push(run_mc(
            &det,
            &sampler_for(&det, 0.5, trunc)?,
            n,
            115,
            WORKERS,
        )?);
        let det = Detector::Sprouts(SproutsSpec::new(r, 0.5, 0.2));
        sprout.push(run_mc(
            &det,
            &sampler_for(&det, 0.5, trunc)?,
            n,
            116,
            WORKERS,
        )?);
    }
    let det = Detector::Crossing(CrossingSpec::slab(20.0, 5.0, 0.0));
    let slab = run_mc(&det, &sampler_for(&det, 0.5, None)?, 400, 117, WORKERS)?;
    let above = slab.p_hat - 0.5 >= 3.0 * slab.std_err;
    let show = |v: &[Estimate]| v.iter().map(fmt_est).collect::<Vec<_>>().join(" ");
    verdict(
        trend(&uniq) && trend(&sprout) && above,
        format!(
            "uniqueness {}; sprouts {}; slab crossing {}",
            show(&uniq),
            show(&sprout),
            fmt_est(&slab)
        ),
    )
}

// 11. Mean component count in the unit disk against the critical-point bound.
fn kac_rice() -> Result<Verdict> {
    let kernel = make_kernel(KernelSpec::bargmann_fock(2), None)?;
    let res = kac_rice_check(&kernel, 0.0, 4.0, 0.25, 2000, 118, WORKERS)?;
    verdict(
        res.mc.p_hat <= res.bound + 3.0 * res.mc.std_err,
        format!("mean {} vs bound {:.4}", fmt_est(&res.mc), res.bound),
    )
}

// 12. Criteria 2 and 4 at h = 0.5.
fn refinement(fine: &Dual, coarse: &Dual, level_fine: f64, level_coarse: f64) -> Result<Verdict> {
    let sd = (2.0f64).sqrt() * binom_sd(0.5, fine.p.n);
    let agree_p = (coarse.p.p_hat - fine.p.p_hat).abs() <= 2.0 * (3.0 * sd + 0.03);
    let agree_l = (level_coarse - level_fine).abs() <= 2.0 * 0.04;
    verdict(
        dual_ok(coarse, 2.0) && level_coarse.abs() <= 0.08 && agree_p && agree_l,
        format!(
            "p_hat {} (h=0.25: {:.4}), duality {}/{}, level_hat {level_coarse:.4} (h=0.25: {level_fine:.4})",
            fmt_est(&coarse.p),
            fine.p.p_hat,
            coarse.exclusive,
            coarse.p.n
        ),
    )
}

fn main() {
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let wanted = |k: usize| filter.is_none_or(|f| f == k);
    let mut failed = 0;
    let mut report = |k: usize, name: &str, f: &mut dyn FnMut() -> Result<Verdict>| {
        if !wanted(k) {
            return;
        }
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {k:2} {name:<22} {} ({:.1}s) {detail}",
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    };
    let need_2_12 = wanted(2) || wanted(12);
    let need_4_12 = wanted(4) || wanted(12);
    let skipped = || "not run".to_string();
    let fine = if need_2_12 {
        self_dual(0.25).map_err(|e| e.to_string())
    } else {
        Err(skipped())
    };
    let level_fine = if need_4_12 {
        critical_level(0.25).map_err(|e| e.to_string())
    } else {
        Err(skipped())
    };
    let missing = |e: &String| gfperc_core::Error::Precondition(format!("h = 0.25 run: {e}"));

    report(1, "covariance", &mut covariance);
    report(2, "self-dual crossing", &mut || {
        crossing_half(fine.as_ref().map_err(missing)?)
    });
    report(3, "rsw bounds", &mut rsw);
    report(4, "critical level", &mut || {
        critical(*level_fine.as_ref().map_err(missing)?)
    });
    report(5, "fkg", &mut fkg);
    report(6, "truncation decay", &mut truncation);
    report(7, "renorm arithmetic", &mut recursion);
    report(8, "black-path geometry", &mut geometry);
    report(9, "arm decay", &mut arms);
    report(10, "3d trends", &mut slabs);
    report(11, "kac-rice bound", &mut kac_rice);
    report(12, "h refinement", &mut || {
        let coarse = self_dual(0.5)?;
        let level = critical_level(0.5)?;
        refinement(
            fine.as_ref().map_err(missing)?,
            &coarse,
            *level_fine.as_ref().map_err(missing)?,
            level,
        )
    });
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
