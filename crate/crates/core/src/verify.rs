//! Self-checks run by `gsc-restore verify`.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::degradation::{
    make_gaussian_kernel, make_motion_kernel, make_random_mask, make_uniform_kernel, BlockCsOperator, BlurOperator,
    DegradationOp, MaskOperator,
};
use crate::patch_groups::{aggregate_groups, build_groups, GroupGeometry};
use crate::shrinkage::{
    half_threshold, half_threshold_level, inner_objectives, scalar_objective, scalar_prox, weighted_sv_prox,
    RelaxationSpec, CLOSED_FORM_CONSTANTS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Global minimizer of the scalar objective on `[0, delta]` by a coarse
/// scan followed by a fine scan around the best coarse point.
pub fn grid_prox(p: f64, xi: f64, delta: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| scalar_objective(p, xi, delta, s);
    let scan = |lo: f64, hi: f64, step: f64| {
        let n = ((hi - lo) / step).ceil() as usize;
        (0..=n)
            .map(|k| (lo + k as f64 * step).min(hi))
            .fold((f(lo), lo), |best, s| {
                let v = f(s);
                if v < best.0 {
                    (v, s)
                } else {
                    best
                }
            })
    };
    let coarse_step = delta / 2000.0;
    let (_, s0) = scan(0.0, delta, coarse_step);
    let (vf, sf) = scan((s0 - coarse_step).max(0.0), (s0 + coarse_step).min(delta), 1e-6_f64.max(delta * 1e-9));
    if f(0.0) <= vf {
        0.0
    } else {
        sf
    }
}

fn prox_grid_points() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for &xi in &[0.05, 0.4, 1.0, 2.5] {
        for k in 0..100 {
            pts.push((xi, k as f64 * 0.12));
        }
    }
    pts
}

/// Largest disagreement between `prox` and the grid oracle over a fixed
/// `(xi, delta)` grid.
pub fn prox_oracle_error<F>(p: f64, prox: F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    prox_grid_points()
        .into_iter()
        .map(|(xi, delta)| (prox(xi, delta) - grid_prox(p, xi, delta)).abs())
        .fold(0.0, f64::max)
}

fn random_matrix(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

fn random_plane(dim: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn(dim, || StandardNormal.sample(rng))
}

fn adjoint_gap(op: &DegradationOp, out_dim: (usize, usize), rng: &mut ChaCha8Rng) -> f64 {
    let x = random_plane(op.image_dim(), rng);
    let y = random_plane(out_dim, rng);
    let ax = op.apply_plane(0, &x).expect("shape");
    let aty = op.adjoint_plane(0, &y).expect("shape");
    let lhs: f64 = ax.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.iter().zip(aty.iter()).map(|(a, b)| a * b).sum();
    (lhs - rhs).abs() / (1.0 + lhs.abs())
}

pub fn run_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20);

    for (label, p) in [("prox oracle p=1/2", 0.5), ("prox oracle p=2/3", 2.0 / 3.0), ("prox oracle nuclear", 1.0)] {
        let spec = if p == 1.0 {
            RelaxationSpec::nuclear()
        } else {
            RelaxationSpec::schatten(p).expect("valid p")
        };
        let err = prox_oracle_error(p, |xi, d| scalar_prox(&spec, xi, d));
        out.push(Check::new(label, err <= 1e-4, format!("max error {:.2e} ({:?})", err, CLOSED_FORM_CONSTANTS)));
    }

    let mutant = |xi: f64, d: f64| {
        if d <= 1.1 * half_threshold_level(xi, CLOSED_FORM_CONSTANTS) {
            0.0
        } else {
            half_threshold(xi, d)
        }
    };
    let err = prox_oracle_error(0.5, mutant);
    out.push(Check::new(
        "prox oracle rejects 10% threshold mutant",
        err > 1e-4,
        format!("mutant error {:.2e}", err),
    ));

    let mut worst = 0.0f64;
    for _ in 0..10 {
        let y = random_matrix(36, 60, &mut rng) * 10.0;
        let (x, _) = weighted_sv_prox(&y, &[1.0; 36], &RelaxationSpec::nuclear(), 5.0).expect("svd");
        let svd = y.clone().svd(true, true);
        let shrunk = svd.singular_values.map(|s| (s - 5.0).max(0.0));
        let classic = svd.u.expect("u") * DMatrix::from_diagonal(&shrunk) * svd.v_t.expect("v_t");
        worst = worst.max((x - classic).norm());
    }
    out.push(Check::new("weighted SVT equals soft SVT", worst <= 1e-8, format!("max Frobenius gap {:.2e}", worst)));

    let mut rises = 0.0f64;
    for p in [0.5, 2.0 / 3.0] {
        let spec = RelaxationSpec::schatten(p).expect("valid p");
        for _ in 0..10 {
            let low = random_matrix(36, 4, &mut rng) * random_matrix(4, 60, &mut rng) * 20.0;
            let y = low + random_matrix(36, 60, &mut rng) * 3.0;
            let obj = inner_objectives(&y, 30.0, &spec, 6).expect("svd");
            for w in obj.windows(2) {
                rises = rises.max(w[1] - w[0]);
            }
        }
    }
    out.push(Check::new(
        "surrogate objective nonincreasing",
        rises <= 1e-8,
        format!("largest rise {:.2e}", rises),
    ));

    let (h, w) = (40, 48);
    let ops = [
        ("mask", DegradationOp::Mask(MaskOperator::new(make_random_mask(h, w, 0.5, 1).expect("mask"))), (h, w)),
        (
            "blur uniform9",
            DegradationOp::Blur(BlurOperator::new(make_uniform_kernel(9).expect("kernel"), h, w).expect("blur")),
            (h, w),
        ),
        (
            "blur gaussian",
            DegradationOp::Blur(BlurOperator::new(make_gaussian_kernel(25, 1.6).expect("kernel"), h, w).expect("blur")),
            (h, w),
        ),
        (
            "blur motion",
            DegradationOp::Blur(BlurOperator::new(make_motion_kernel(20.0, 45.0).expect("kernel"), h, w).expect("blur")),
            (h, w),
        ),
    ];
    for (label, op, dim) in ops {
        let gap = adjoint_gap(&op, dim, &mut rng);
        out.push(Check::new(&format!("adjoint {}", label), gap <= 1e-8, format!("relative gap {:.2e}", gap)));
    }
    let cs = BlockCsOperator::new(h, w, 32, 0.3, 2).expect("cs");
    let dim = cs.measurement_dim();
    let gap = adjoint_gap(&DegradationOp::BlockCs(cs), dim, &mut rng);
    out.push(Check::new("adjoint block-cs", gap <= 1e-8, format!("relative gap {:.2e}", gap)));

    let img = random_plane((37, 45), &mut rng).mapv(|v| 128.0 + 40.0 * v);
    let geom = GroupGeometry::new(8, 16, 20, 4).expect("geometry");
    let back = aggregate_groups(&build_groups(&img, &geom).expect("groups"), 37, 45).expect("aggregate");
    let err = back.iter().zip(img.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(Check::new("aggregation round trip", err <= 1e-10, format!("max pixel error {:.2e}", err)));

    out
}

pub fn print_table(checks: &[Check]) {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        println!(
            "{:<width$}  {}  {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail,
            width = width
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
}
