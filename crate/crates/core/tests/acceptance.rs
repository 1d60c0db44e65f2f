//! The ten acceptance criteria. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use dtlab::brown::{perturbed_microstate, radial_cdf_distance, radial_cdf_distance_with, EigenvalueSequence};
use dtlab::dimension::{dimension_scan, is_non_decreasing_within, ScanConfig};
use dtlab::dyson::{
    delta_schedule, gamma_product_rate, log_e_eps_mc, log_e_eps_quadrature, selberg_box_integral_log,
    selberg_lower_bound_f,
};
use dtlab::ensembles::{assemble_block_dt, sample_dt, sample_ginibre, star_moments, DTParams};
use dtlab::linalg::{eigenvalues, normalized_trace, schur};
use dtlab::measures::{
    overlap_bound, pair_proximity_mass, perturbation_radius, sample_measure, sigma_eps, CompactMeasure, SampleMode,
};
use dtlab::quadrature::GaussLegendre;
use dtlab::rng::{child_seed, stream};
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn schur_correctness() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let mut ok = true;
    for (i, &k) in [8usize, 64, 256].iter().enumerate() {
        let a = sample_ginibre(k, 1.0 / k as f64, 100 + i as u64);
        let s = schur(&a).expect("schur converges");
        let defect = s.unitarity_defect();
        ok &= s.residual <= 1e-10 && defect <= 1e-10 * (k as f64).sqrt() && s.t.is_upper_triangular();
        worst = (worst.0.max(s.residual), worst.1.max(defect / (k as f64).sqrt()));
    }
    outcome(ok, format!("max residual {:.1e}, max defect/sqrt(k) {:.1e}", worst.0, worst.1))
}

fn selberg_identity() -> Outcome {
    // ∫∫_{[-1,1]²} (x - y)² dx dy = 8/3.
    let two = (selberg_box_integral_log(2, 1.0).log_value - (8.0f64 / 3.0).ln()).abs();
    // Three-point tensor rule is exact for the degree-4-per-variable integrand.
    let gl = GaussLegendre::new(3);
    let eps = 0.1;
    let mut sum = 0.0;
    for (a, wa) in gl.nodes().iter().zip(gl.weights()) {
        for (b, wb) in gl.nodes().iter().zip(gl.weights()) {
            for (d, wd) in gl.nodes().iter().zip(gl.weights()) {
                let (x, y, z) = (eps * a, eps * b, eps * d);
                sum += eps.powi(3) * wa * wb * wd * ((x - y) * (x - z) * (y - z)).powi(2);
            }
        }
    }
    let three = (selberg_box_integral_log(3, eps).log_value - sum.ln()).abs();
    outcome(two <= 1e-9 && three <= 1e-4, format!("n=2 error {two:.1e}, n=3 error {three:.1e}"))
}

fn gamma_rate() -> Outcome {
    let gap = |n| (gamma_product_rate(n) + 2.0 * LN_2).abs();
    let (g128, g256, g512) = (gap(128), gap(256), gap(512));
    outcome(g256 <= 0.05 && g512 < g128, format!("|gap| n=128 {g128:.4}, n=256 {g256:.4}, n=512 {g512:.4}"))
}

fn circular_law() -> Outcome {
    let k = 1024;
    let d: Vec<f64> = (0..5)
        .map(|s| {
            let a = sample_ginibre(k, 1.0 / k as f64, 400 + s);
            radial_cdf_distance(&eigenvalues(&a).expect("eigenvalues"), c(0.0, 0.0), 1.0)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    outcome(mean <= 0.03, format!("mean sup distance {mean:.4} over 5 seeds"))
}

fn disk_law() -> Outcome {
    let mu = CompactMeasure::dirac(c(0.0, 0.0));
    let oracle = [(0.5, 0.7882), (1.0, 1.2011)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (eps, r_ref) in oracle {
        let r = perturbation_radius(1.0, 1.0, eps);
        ok &= (r - r_ref).abs() < 1e-4;
        let mut dist = 0.0;
        let mut min_inside = 1.0f64;
        for s in 0..5 {
            let z = perturbed_microstate(&mu, 1.0, eps, 1024, 500 + s).expect("microstate").z;
            let ev = eigenvalues(&z).expect("eigenvalues");
            dist += radial_cdf_distance(&ev, c(0.0, 0.0), r) / 5.0;
            let inside = ev.values().iter().filter(|w| w.norm() <= 1.1 * r).count() as f64 / ev.len() as f64;
            min_inside = min_inside.min(inside);
        }
        ok &= dist <= 0.05 && min_inside >= 0.95;
        parts.push(format!("eps={eps}: r={r:.4}, mean distance {dist:.4}, min inside 1.1r {min_inside:.3}"));
    }
    outcome(ok, parts.join("; "))
}

fn moment_self_consistency() -> Outcome {
    let mu = CompactMeasure::dirac(c(0.0, 0.0));
    let z = sample_dt(&DTParams::new(mu.clone(), 1.0, 1024, 600).unwrap()).unwrap();
    let zz = normalized_trace(&z.adjoint().matmul(&z).unwrap()).unwrap().re;
    let direct: BTreeMap<_, _> = star_moments(std::slice::from_ref(&z), 4).unwrap().into_iter().collect();
    let block = assemble_block_dt(&mu, 1.0, 4, 256, 601).unwrap();
    let worst = star_moments(std::slice::from_ref(&block), 4)
        .unwrap()
        .into_iter()
        .map(|(w, v)| (v - direct[&w]).norm())
        .fold(0.0, f64::max);
    outcome(
        (zz - 0.5).abs() <= 0.02 && worst <= 0.03,
        format!("tr(Z*Z) = {zz:.4}, worst block/direct moment gap {worst:.4} over 30 words"),
    )
}

/// `pair_proximity_mass` with a standard error from the Hoeffding
/// decomposition of the U-statistic: `Var ≈ 4 Var(h₁) / n`.
fn proximity_with_se(points: &[Complex64], delta: f64) -> (f64, f64) {
    let n = points.len();
    let h1: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points.iter().enumerate().filter(|&(j, q)| j != i && (p - q).norm() < delta).count() as f64 / (n - 1) as f64
        })
        .collect();
    let mean = h1.iter().sum::<f64>() / n as f64;
    let var = h1.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (pair_proximity_mass(points, delta), (4.0 * var / n as f64).sqrt())
}

fn overlap() -> Outcome {
    let mu = CompactMeasure::parse("atom:0,0,0.3; atom:3,0,0.2; disk:0,4,1,0.5").unwrap();
    let mut worst_margin = f64::INFINITY;
    let mut ok = true;
    for (i, eps) in [1.0, 0.1, 0.01].into_iter().enumerate() {
        let sigma = sigma_eps(&mu, 1.0, eps).unwrap();
        let pts = sample_measure(&sigma, 4096, SampleMode::Iid, 700 + i as u64);
        for delta in [0.05, 0.1, 0.3] {
            let (emp, se) = proximity_with_se(&pts, delta);
            let bound = overlap_bound(&mu, 1.0, eps, delta).unwrap();
            let margin = bound + 3.0 * se - emp;
            ok &= margin >= 0.0;
            worst_margin = worst_margin.min(margin);
        }
    }
    outcome(ok, format!("9 cells, smallest margin bound + 3se - empirical = {worst_margin:.2e}"))
}

fn estimator_ordering() -> Outcome {
    let mut rng = stream(800, 0, 0);
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for inst in 0..20u64 {
        let n = 2 + (inst % 2) as usize;
        let eps = if inst < 10 { 1e-3 } else { 5e-3 };
        let pts: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))).collect();
        let lambda = EigenvalueSequence::new(pts).unwrap();
        let delta = delta_schedule(eps).unwrap();
        let lb = selberg_lower_bound_f(&lambda, eps, delta, false).unwrap();
        let mc = log_e_eps_mc(&lambda, eps, 4000, child_seed(800, inst)).unwrap();
        let quad = log_e_eps_quadrature(&lambda, eps).unwrap();
        let tol = 3.0 * mc.jensen.std_error;
        let gap = (lb.log_value - mc.jensen.log_value - tol).max(mc.jensen.log_value - quad.log_value - tol);
        worst = worst.max(gap);
        if gap > 0.0 {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures}/20 violations, largest excess {worst:.3e}"))
}

fn scan_trend() -> Outcome {
    let mut cfg = ScanConfig {
        mu: CompactMeasure::dirac(c(0.0, 0.0)),
        c: 1.0,
        big_n: 8,
        k: 128,
        eps_grid: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        chi_offset: 0.0,
        log_vol_omega: None,
        seed: 900,
    };
    let base = dimension_scan(&cfg).unwrap();
    cfg.chi_offset = 1e4;
    let shifted = dimension_scan(&cfg).unwrap();
    let hats: Vec<f64> = base.rows.iter().map(|r| r.delta_hat).collect();
    let trend =
        base.skipped.is_empty() && hats.len() == 5 && is_non_decreasing_within(&hats, 0.05) && hats[4] > hats[0];
    let n2 = (8.0f64 * 128.0).powi(2);
    let mut identity_err = 0.0f64;
    for (r, s) in base.rows.iter().zip(&shifted.rows) {
        let le = r.eps.ln().abs();
        let lead = 2.0 - 1.0 / 8.0;
        identity_err = identity_err
            .max((r.delta_hat - lead - (r.f_lb_norm + r.const_term) / le).abs())
            .max((r.log_packing_lb / n2 - lead * le - r.f_lb_norm - r.const_term).abs() / le)
            .max((s.delta_hat - r.delta_hat - 1e4 / (n2 * le)).abs());
    }
    let hat_text: Vec<String> = hats.iter().map(|h| format!("{h:.3}")).collect();
    outcome(
        trend && identity_err <= 1e-12,
        format!("delta_hat [{}], identity error {identity_err:.1e}", hat_text.join(", ")),
    )
}

fn dyson_pushforward() -> Outcome {
    let k = 512;
    let a = sample_ginibre(k, 1.0, 1000);
    let diag = EigenvalueSequence::new(schur(&a).unwrap().t.diagonal()).unwrap();
    let scale = (k as f64).sqrt();
    let d = radial_cdf_distance_with(&diag, c(0.0, 0.0), scale, 1.5, |t| {
        dtlab::stats::ginibre_radial_cdf(k, 1.0, t * scale)
    });
    outcome(d <= 0.03, format!("sup distance to the finite-k Ginibre radial law {d:.4}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Schur correctness", Duration::from_secs(30), schur_correctness),
        ("Selberg identity", Duration::from_secs(10), selberg_identity),
        ("Gamma-product rate", Duration::from_secs(1), gamma_rate),
        ("Circular law", Duration::from_secs(120), circular_law),
        ("Disk law", Duration::from_secs(600), disk_law),
        ("DT moment self-consistency", Duration::from_secs(300), moment_self_consistency),
        ("Overlap bound", Duration::from_secs(120), overlap),
        ("E_eps estimator ordering", Duration::from_secs(120), estimator_ordering),
        ("Dimension scan trend", Duration::from_secs(900), scan_trend),
        ("Dyson pushforward", Duration::from_secs(120), dyson_pushforward),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= *budget;
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {:<28} {}  ({}; {:.1}s of {}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
