//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use gsc_restore::admm::TraceRecord;
use gsc_restore::degradation::{
    make_gaussian_kernel, make_motion_kernel, make_random_mask, make_uniform_kernel, BlockCsOperator, BlurOperator,
    DegradationOp, MaskOperator,
};
use gsc_restore::imaging::Manifest;
use gsc_restore::patch_groups::{aggregate_groups, build_groups, GroupGeometry};
use gsc_restore::shrinkage::{denoise_group, scalar_prox, weighted_sv_prox, RelaxationSpec};
use gsc_restore::task::{execute_task, prepare_task, TaskConfig, TaskKind, TaskReport};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn spec_for(p: f64) -> RelaxationSpec {
    if p == 1.0 {
        RelaxationSpec::nuclear()
    } else {
        RelaxationSpec::schatten(p).expect("valid exponent")
    }
}

// Independent scalar objective: 1/2 (s - delta)^2 + xi * s^p.
fn objective(p: f64, xi: f64, delta: f64, s: f64) -> f64 {
    0.5 * (s - delta) * (s - delta) + xi * s.powf(p)
}

// Grid search with a final step of 1e-5. A 1e-3 scan brackets every local
// minimum on (0, delta]; each bracket is then rescanned at 1e-5. The
// objective is smooth away from zero so no minimizer falls between
// coarse points by more than one step. Returns every local minimizer whose
// value ties the best one: at the jump of a thresholding rule both 0 and
// the nonzero branch are global minimizers, and which one a grid prefers is
// down to rounding.
fn grid_minimizers(p: f64, xi: f64, delta: f64) -> Vec<f64> {
    const FINE: f64 = 1e-5;
    const COARSE: f64 = 1e-3;
    if delta <= 0.0 {
        return vec![0.0];
    }
    let f = |s: f64| objective(p, xi, delta, s);
    let n = (delta / COARSE).ceil() as usize;
    let pts: Vec<f64> = (0..=n).map(|k| (k as f64 * COARSE).min(delta)).collect();
    let vals: Vec<f64> = pts.iter().map(|&s| f(s)).collect();
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for k in 0..pts.len() {
        let left = if k == 0 { f64::INFINITY } else { vals[k - 1] };
        let right = if k + 1 == pts.len() { f64::INFINITY } else { vals[k + 1] };
        if vals[k] <= left && vals[k] <= right {
            let lo = (pts[k] - COARSE).max(0.0);
            let hi = (pts[k] + COARSE).min(delta);
            let m = ((hi - lo) / FINE).round() as usize;
            let mut best = (f64::INFINITY, lo);
            for j in 0..=m {
                let s = (lo + j as f64 * FINE).min(hi);
                let v = f(s);
                if v < best.0 {
                    best = (v, s);
                }
            }
            minima.push(best);
        }
    }
    let best = minima.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    // A 1e-5 grid misses a smooth minimum by up to ~1e-10 in value.
    let tie = 1e-9 * (1.0 + best.abs());
    minima.into_iter().filter(|m| m.0 <= best + tie).map(|m| m.1).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: Vec<(String, f64)> = Vec::new();
    for (label, p) in [("1/2", 0.5), ("2/3", 2.0 / 3.0), ("nuclear", 1.0)] {
        let spec = spec_for(p);
        let mut err = 0.0f64;
        for &xi in &[0.05, 0.4, 1.0, 2.5] {
            for k in 0..200 {
                let delta = k as f64 * 0.06;
                let s = scalar_prox(&spec, xi, delta);
                let gap = grid_minimizers(p, xi, delta)
                    .iter()
                    .map(|g| (s - g).abs())
                    .fold(f64::INFINITY, f64::min);
                err = err.max(gap);
            }
        }
        worst.push((label.to_string(), err));
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst.iter().all(|(_, e)| *e <= 1e-4) && secs < 10.0;
    let errs: Vec<String> = worst.iter().map(|(l, e)| format!("{} {:.1e}", l, e)).collect();
    outcome(ok, format!("max |prox - grid|: {}; {:.1} s", errs.join(", "), secs))
}

fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let y = gaussian(36, 60, &mut rng) * 10.0;
        let lambda = 1.0 + (k % 10) as f64 * 2.0;
        let (x, _) = weighted_sv_prox(&y, &[1.0; 36], &RelaxationSpec::nuclear(), lambda).expect("svd");
        let svd = y.clone().svd(true, true);
        let shrunk = svd.singular_values.map(|s| (s - lambda).max(0.0));
        let classic = svd.u.expect("u") * DMatrix::from_diagonal(&shrunk) * svd.v_t.expect("v_t");
        worst = worst.max((x - classic).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 30.0, format!("max Frobenius gap {:.1e}; {:.1} s", worst, secs))
}

// 1/2 ||Y - X||^2 + lambda * sum (s_i^p)^p, evaluated on the matrices.
// Singular values below the usual numerical-rank cutoff are rounding noise
// of an exactly rank-deficient X and count as zero; s^(p^2) would otherwise
// turn 1e-13 into 1e-3.
fn group_objective(y: &DMatrix<f64>, x: &DMatrix<f64>, p: f64, lambda: f64) -> f64 {
    let s = x.clone().singular_values();
    let cutoff = s.max() * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    let penalty: f64 = s.iter().filter(|&&v| v > cutoff).map(|v| v.powf(p).powf(p)).sum();
    0.5 * (y - x).norm_squared() + lambda * penalty
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rise = f64::NEG_INFINITY;
    let mut steps = 0;
    for g in 0..50 {
        let p = [0.5, 2.0 / 3.0][g % 2];
        let rank = 1 + g % 6;
        let low = gaussian(36, rank, &mut rng) * gaussian(rank, 60, &mut rng) * 15.0;
        let y = low + gaussian(36, 60, &mut rng) * 4.0;
        let lambda = 10.0 + 5.0 * (g % 5) as f64;
        let spec = spec_for(p);
        let obj: Vec<f64> = (1..=8)
            .map(|k| {
                let (x, _) = denoise_group(&y, lambda, &spec, k).expect("svd");
                group_objective(&y, &x, p, lambda)
            })
            .collect();
        for w in obj.windows(2) {
            rise = rise.max(w[1] - w[0]);
            steps += 1;
        }
    }
    outcome(rise <= 1e-8, format!("largest rise {:.1e} over {} steps", rise, steps))
}

fn adjoint_gap(op: &DegradationOp, out_dim: (usize, usize), rng: &mut ChaCha8Rng) -> f64 {
    let x = Array2::from_shape_simple_fn(op.image_dim(), || StandardNormal.sample(rng));
    let y: Array2<f64> = Array2::from_shape_simple_fn(out_dim, || StandardNormal.sample(rng));
    let lhs: f64 = op.apply_plane(0, &x).expect("shape").iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.iter().zip(op.adjoint_plane(0, &y).expect("shape").iter()).map(|(a, b)| a * b).sum();
    (lhs - rhs).abs() / (1.0 + lhs.abs())
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agg = 0.0f64;
    for &(h, w, side, stride) in &[(37, 45, 8, 4), (64, 64, 6, 3), (50, 31, 10, 5), (256, 256, 8, 4)] {
        let img = Array2::from_shape_simple_fn((h, w), || 128.0 + 40.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let geom = GroupGeometry::new(side, 60, 20, stride).expect("geometry");
        let back = aggregate_groups(&build_groups(&img, &geom).expect("groups"), h, w).expect("aggregate");
        agg = back.iter().zip(img.iter()).map(|(a, b)| (a - b).abs()).fold(agg, f64::max);
    }
    let (h, w) = (64, 80);
    let blur = |k| DegradationOp::Blur(BlurOperator::new(k, h, w).expect("blur"));
    let cs = BlockCsOperator::new(h, w, 32, 0.3, 9).expect("cs");
    let cs_dim = cs.measurement_dim();
    let ops = [
        (DegradationOp::Mask(MaskOperator::new(make_random_mask(h, w, 0.5, 4).expect("mask"))), (h, w)),
        (blur(make_uniform_kernel(9).expect("kernel")), (h, w)),
        (blur(make_gaussian_kernel(25, 1.6).expect("kernel")), (h, w)),
        (blur(make_motion_kernel(20.0, 45.0).expect("kernel")), (h, w)),
        (DegradationOp::BlockCs(cs), cs_dim),
    ];
    let mut adj = 0.0f64;
    for (op, dim) in &ops {
        for _ in 0..5 {
            adj = adj.max(adjoint_gap(op, *dim, &mut rng));
        }
    }
    outcome(
        agg <= 1e-10 && adj <= 1e-8,
        format!("aggregation {:.1e}/pixel; adjoint gap {:.1e} (mask, 3 blurs, block-cs)", agg, adj),
    )
}

struct Run {
    report: TaskReport,
    image_note: String,
}

fn run(cfg: TaskConfig) -> Result<Run, String> {
    let manifest = Manifest::load_default().map_err(|e| e.to_string())?;
    let name = cfg.input.clone().unwrap_or_default();
    let image_note = match manifest.entry(&name) {
        Some(e) if e.source.starts_with("stand-in") => format!(" [{}: {}]", name, e.source),
        _ => String::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    pool.install(|| {
        let prepared = prepare_task(&cfg).map_err(|e| e.to_string())?;
        let report = execute_task(cfg.task, cfg.p, &prepared, |_| {}).map_err(|e| e.to_string())?;
        Ok(Run { report, image_note })
    })
}

fn psnrs(r: &TaskReport) -> (f64, f64) {
    (r.psnr_in.unwrap_or(f64::NAN), r.psnr_out.unwrap_or(f64::NAN))
}

fn describe(r: &Run) -> String {
    let (i, o) = psnrs(&r.report);
    format!(
        "in {:.2} dB, out {:.2} dB, {} iters, {:.0} s{}",
        i, o, r.report.iterations, r.report.seconds, r.image_note
    )
}

fn task_outcome<F>(run: &Result<Run, String>, check: F) -> Outcome
where
    F: Fn(f64, f64, f64) -> bool,
{
    match run {
        Ok(r) => {
            let (i, o) = psnrs(&r.report);
            outcome(check(i, o, r.report.seconds), describe(r))
        }
        Err(e) => outcome(false, format!("error: {}", e)),
    }
}

/// Worst drop between consecutive PSNR values over the final half of the
/// outer iterations.
fn late_drop(trace: &[TraceRecord]) -> f64 {
    let psnr: Vec<f64> = trace.iter().filter_map(|t| t.psnr).collect();
    let tail = &psnr[psnr.len() / 2..];
    tail.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

fn main() -> ExitCode {
    // Optional criterion numbers on the command line select a subset.
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| picked.is_empty() || picked.contains(&n);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut emit = |n: u32, name: &'static str, o: Outcome| {
        println!("criterion {} {:<28} {}  {}", n, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    if want(1) {
        emit(1, "scalar prox oracle", criterion_1());
    }
    if want(2) {
        emit(2, "weighted SVT", criterion_2());
    }
    if want(3) {
        emit(3, "surrogate monotonicity", criterion_3());
    }
    if want(4) {
        emit(4, "round trips and adjoints", criterion_4());
    }

    let runs_all = want(9);
    let mut traces: Vec<(&str, Result<Run, String>)> = Vec::new();

    if runs_all || want(5) {
        let mut cfg = TaskConfig::new(TaskKind::Spn, "cameraman");
        cfg.density = Some(0.3);
        let r = run(cfg);
        if want(5) {
            emit(5, "spn 30% cameraman", task_outcome(&r, |i, o, s| o >= 30.0 && o >= i + 3.0 && s <= 900.0));
        }
        traces.push(("spn", r));
    }

    if runs_all || want(6) {
        let mut cfg = TaskConfig::new(TaskKind::Inpaint, "house");
        cfg.missing = Some(0.5);
        let r = run(cfg);
        if want(6) {
            emit(6, "inpaint 50% house", task_outcome(&r, |_, o, s| o >= 35.0 && s <= 1200.0));
        }
        traces.push(("inpaint", r));
    }

    if runs_all || want(7) {
        let mut cfg = TaskConfig::new(TaskKind::Deblur, "peppers");
        cfg.kernel = Some("uniform9".into());
        cfg.sigma = Some(2f64.sqrt());
        let r = run(cfg);
        if want(7) {
            emit(7, "deblur uniform9 peppers", task_outcome(&r, |i, o, _| o >= 27.0 && o >= i + 5.0));
        }
        traces.push(("deblur", r));
    }

    if runs_all || want(8) {
        let mut cfg = TaskConfig::new(TaskKind::Cs, "house");
        cfg.subrate = Some(0.3);
        let r = run(cfg);
        if want(8) {
            emit(8, "cs 0.3 house", task_outcome(&r, |_, o, _| o >= 32.0));
        }
        traces.push(("cs", r));
    }

    if runs_all {
        let mut drops = Vec::new();
        let mut ok = true;
        for (label, r) in &traces {
            match r {
                Ok(r) => {
                    let d = late_drop(&r.report.trace);
                    ok &= d <= 0.05;
                    drops.push(format!("{} {:.3}", label, d));
                }
                Err(_) => {
                    ok = false;
                    drops.push(format!("{} no trace", label));
                }
            }
        }
        emit(9, "late PSNR nondecreasing", outcome(ok, format!("worst late drop (dB): {}", drops.join(", "))));
    }

    let failed = results.iter().filter(|(_, _, o)| !o.passed).count();
    println!("{} criteria, {} failed", results.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
