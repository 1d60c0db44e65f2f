//! The six subcommands.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use dtlab::brown::{
    brown_from_eigenvalues, brown_logdet_grid, operator_norm_estimate, perturbed_microstate, radial_cdf_distance,
    EigenvalueSequence, Grid,
};
use dtlab::dimension::{dimension_scan, is_non_decreasing_within, write_scan_csv, ScanConfig};
use dtlab::dyson::{
    delta_schedule, gamma_product_rate, log_e_eps_mc, log_e_eps_quadrature, selberg_box_integral_log,
    selberg_lower_bound_f,
};
use dtlab::ensembles::{assemble_block_dt, freeness_check, sample_dt, sample_ginibre, star_moments, DTParams};
use dtlab::linalg::{eigenvalues, ComplexMatrix};
use dtlab::measures::{perturbation_radius, read_points_csv, CompactMeasure};
use dtlab::quadrature::GaussLegendre;
use dtlab::rng::child_seed;
use dtlab::special::log_sum_exp;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::output::OutDir;
use crate::{Common, Failure, Verdict};

type Outcome = Result<Verdict, Failure>;

pub fn run<A: Serialize>(common: &Common, name: &str, args: A, body: fn(&A, &OutDir) -> Outcome) -> Outcome {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let out = OutDir::create(&common.out, name, &args)?;
    body(&args, &out)
}

fn measure(literal: &str) -> Result<CompactMeasure, Failure> {
    Ok(CompactMeasure::parse(literal)?)
}

fn eps_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split([',', ' '])
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| Failure::Config(format!("bad number `{s}`: {e}"))))
        .collect()
}

fn write_points(w: &mut dyn Write, points: &[Complex64]) -> std::io::Result<()> {
    writeln!(w, "re,im")?;
    for z in points {
        writeln!(w, "{},{}", z.re, z.im)?;
    }
    Ok(())
}

fn require(cond: bool, msg: impl Into<String>) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(Failure::Config(msg.into()))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Measure literal for the diagonal, e.g. `atom:0,0,1` or `disk:0,0,1,1`.
    #[arg(long, default_value = "atom:0,0,1")]
    pub mu: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Total matrix size.
    #[arg(long, default_value_t = 512)]
    pub k: usize,
    /// Build from an N x N block model instead (k must be divisible by N).
    #[arg(long)]
    pub block: Option<usize>,
    /// Largest word length in moments.json.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
}

pub fn sample(a: &SampleArgs, out: &OutDir) -> Outcome {
    let mu = measure(&a.mu)?;
    require(a.k >= 1, "--k must be at least 1")?;
    let seed = a.common.seed;
    let x = match a.block {
        Some(n) => {
            require(n >= 2 && a.k.is_multiple_of(n), format!("--block {n} must be >= 2 and divide --k {}", a.k))?;
            assemble_block_dt(&mu, a.c, n, a.k / n, seed)?
        }
        None => sample_dt(&DTParams::new(mu, a.c, a.k, seed)?)?,
    };
    let lambda = eigenvalues(&x)?;
    let moments = star_moments(std::slice::from_ref(&x), a.order)?;

    out.csv("matrix.csv", None, |w| {
        writeln!(w, "row,col,re,im")?;
        for i in 0..x.rows() {
            for (j, z) in x.row(i).iter().enumerate() {
                if *z != Complex64::new(0.0, 0.0) {
                    writeln!(w, "{i},{j},{},{}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    })?;
    out.csv("eigenvalues.csv", None, |w| write_points(w, lambda.values()))?;
    let table: Vec<_> =
        moments.iter().map(|(word, v)| json!({ "word": word.to_string(), "re": v.re, "im": v.im })).collect();
    out.json("moments.json", json!({ "k": a.k, "order": a.order, "moments": table }))?;
    Ok(Verdict::Pass)
}

#[derive(Args, Debug, Serialize)]
pub struct BrownArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "atom:0,0,1")]
    pub mu: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 256)]
    pub k: usize,
    /// Regularization of the log-determinant field.
    #[arg(long, default_value_t = 0.1)]
    pub delta_reg: f64,
    /// Grid spacing; must not exceed --delta-reg.
    #[arg(long, default_value_t = 0.05)]
    pub spacing: f64,
    /// Skip the log-determinant grid (the slow part).
    #[arg(long)]
    pub skip_grid: bool,
    /// Largest accepted radial CDF distance per atom.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
}

pub fn brown(a: &BrownArgs, out: &OutDir) -> Outcome {
    let mu = measure(&a.mu)?;
    require(a.c > 0.0, "--c must be positive")?;
    let micro = perturbed_microstate(&mu, a.c, a.eps, a.k, a.common.seed)?;
    let lambda = brown_from_eigenvalues(&micro.z)?;
    out.csv("eigenvalues.csv", None, |w| write_points(w, lambda.values()))?;

    // z is block upper triangular, so each atom block carries its own eigenvalues.
    let mut atoms = Vec::new();
    let mut curves = Vec::new();
    let mut all_pass = true;
    for (atom, range) in mu.atoms().iter().zip(&micro.blocks) {
        if range.is_empty() {
            continue;
        }
        let len = range.len();
        let block = ComplexMatrix::from_fn(len, len, |i, j| micro.z[(range.start + i, range.start + j)]);
        let seq = eigenvalues(&block)?;
        let radius = perturbation_radius(atom.mass, a.c, a.eps);
        let distance = radial_cdf_distance(&seq, atom.location, radius);
        let outside =
            seq.values().iter().filter(|z| (*z - atom.location).norm() > 1.1 * radius).count() as f64 / len as f64;
        let pass = distance <= a.tolerance;
        all_pass &= pass;
        atoms.push(json!({
            "location": [atom.location.re, atom.location.im],
            "mass": atom.mass,
            "block_size": len,
            "radius": radius,
            "cdf_distance": distance,
            "fraction_outside_1.1r": outside,
            "pass": pass,
        }));
        let mut radii: Vec<f64> = seq.values().iter().map(|z| (z - atom.location).norm() / radius).collect();
        radii.sort_by(f64::total_cmp);
        curves.push(radii);
    }
    out.csv("radial_cdf.csv", None, |w| {
        writeln!(w, "atom,t,empirical,disk")?;
        for (i, radii) in curves.iter().enumerate() {
            for step in 0..=150 {
                let t = step as f64 / 100.0;
                let below = radii.partition_point(|&r| r <= t) as f64 / radii.len() as f64;
                writeln!(w, "{i},{t},{below},{}", (t * t).min(1.0))?;
            }
        }
        Ok(())
    })?;

    let mut grid_summary = serde_json::Value::Null;
    if !a.skip_grid {
        let reach = 1.15 * operator_norm_estimate(&micro.z)?;
        let grid = Grid::square(Complex64::new(0.0, 0.0), reach, a.spacing)?;
        let field = brown_logdet_grid(&micro.z, &grid, a.delta_reg)?;
        let near_atoms: f64 = mu
            .atoms()
            .iter()
            .map(|atom| field.mass_within(atom.location, 1.05 * perturbation_radius(atom.mass, a.c, a.eps)))
            .sum();
        grid_summary = json!({ "mass": field.mass(), "mass_near_atoms": near_atoms, "grid": field.header_json() });
        out.csv("density.csv", Some(json!({ "field": field.header_json() })), |w| field.write_csv(w))?;
    }

    out.json(
        "verdict.json",
        json!({
            "perturbation_slack": micro.slack,
            "no_atoms": micro.no_atoms,
            "atoms": atoms,
            "grid": grid_summary,
            "pass": all_pass,
        }),
    )?;
    if all_pass {
        Ok(Verdict::Pass)
    } else {
        Ok(Verdict::Fail(format!("an atom's radial CDF distance exceeds {}", a.tolerance)))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct EepsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Points as `re,im;re,im;...`.
    #[arg(long, conflicts_with = "lambda_file")]
    pub lambda: Option<String>,
    /// CSV of `re,im` rows.
    #[arg(long)]
    pub lambda_file: Option<PathBuf>,
    /// Measure for generated points (eigenvalues of a DT sample of size k).
    #[arg(long, default_value = "disk:0,0,1,1")]
    pub mu: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 64)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Defaults to 1/|log eps|.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

fn parse_lambda(text: &str) -> Result<Vec<Complex64>, Failure> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let v = eps_list(pair)?;
            match v[..] {
                [re, im] => Ok(Complex64::new(re, im)),
                [re] => Ok(Complex64::new(re, 0.0)),
                _ => Err(Failure::Config(format!("bad point `{pair}`"))),
            }
        })
        .collect()
}

pub fn eeps(a: &EepsArgs, out: &OutDir) -> Outcome {
    let points = match (&a.lambda, &a.lambda_file) {
        (Some(text), _) => parse_lambda(text)?,
        (None, Some(path)) => read_points_csv(path)?,
        (None, None) => {
            let x = sample_dt(&DTParams::new(measure(&a.mu)?, a.c, a.k, a.common.seed)?)?;
            eigenvalues(&x)?.into_vec()
        }
    };
    let lambda = EigenvalueSequence::new(points)?;
    let n = lambda.len();
    let delta = match a.delta {
        Some(d) => d,
        None => delta_schedule(a.eps)?,
    };
    let mc = log_e_eps_mc(&lambda, a.eps, a.trials, child_seed(a.common.seed, 1))?;
    let mut records = vec![mc.unbiased.record(n, a.eps, None), mc.jensen.record(n, a.eps, None)];
    let mut failures = Vec::new();
    // Jensen's bound uses the same draws, so it can never exceed the log-mean.
    if mc.jensen.log_value > mc.unbiased.log_value + 1e-9 * mc.unbiased.log_value.abs() {
        failures.push("jensen bound above the Monte Carlo estimate".to_string());
    }
    let slack = 4.0 * mc.unbiased.std_error;
    let mut selberg = serde_json::Value::Null;
    if n >= 2 {
        let lb = selberg_lower_bound_f(&lambda, a.eps, delta, false)?;
        records.push(lb.record(n, a.eps, Some(delta)));
        selberg = json!(lb);
        if lb.log_value > mc.unbiased.log_value + slack {
            failures.push(format!("selberg bound {} above estimate {}", lb.log_value, mc.unbiased.log_value));
        }
    }
    let mut quadrature = serde_json::Value::Null;
    if n <= 4 {
        let q = log_e_eps_quadrature(&lambda, a.eps)?;
        records.push(q.record(n, a.eps, None));
        quadrature = json!(q);
        if (q.log_value - mc.unbiased.log_value).abs() > slack.max(1e-9) {
            failures.push(format!("quadrature {} vs Monte Carlo {}", q.log_value, mc.unbiased.log_value));
        }
    }
    out.json(
        "estimates.json",
        json!({
            "n": n,
            "delta": delta,
            "records": records,
            "unbiased": mc.unbiased,
            "jensen": mc.jensen,
            "selberg_lower_bound": selberg,
            "quadrature": quadrature,
            "trials": mc.trials,
            "resampled": mc.resampled,
            "checks_failed": failures,
        }),
    )?;
    if failures.is_empty() {
        Ok(Verdict::Pass)
    } else {
        Ok(Verdict::Fail(failures.join("; ")))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SelbergArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated n values.
    #[arg(long, default_value = "1,2,3,4,5,6,8,16,64,256,1024")]
    pub n_grid: String,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Largest n checked against tensor Gauss-Legendre quadrature.
    #[arg(long, default_value_t = 6)]
    pub max_quadrature_n: usize,
    /// Largest accepted |closed form - quadrature| in log space.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

/// `log ∫_{[-ε,ε]^n} Π_{i≠j} |x_i - x_j| dx` by an `n`-point tensor rule,
/// which is exact because the integrand has degree `2(n-1)` per variable.
fn selberg_by_quadrature(n: usize, eps: f64) -> f64 {
    let gl = GaussLegendre::new(n.max(1));
    let nodes: Vec<f64> = gl.nodes().iter().map(|x| eps * x).collect();
    let log_w: Vec<f64> = gl.weights().iter().map(|w| (eps * w).ln()).collect();
    let total = n.pow(n as u32);
    let mut terms = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let mut t: f64 = idx.iter().map(|&i| log_w[i]).sum();
        'pairs: for p in 0..n {
            for q in p + 1..n {
                let d = nodes[idx[p]] - nodes[idx[q]];
                if d == 0.0 {
                    t = f64::NEG_INFINITY;
                    break 'pairs;
                }
                t += 2.0 * d.abs().ln();
            }
        }
        terms.push(t);
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    log_sum_exp(&terms)
}

pub fn selberg(a: &SelbergArgs, out: &OutDir) -> Outcome {
    let grid: Vec<usize> = eps_list(&a.n_grid)?.into_iter().map(|v| v as usize).collect();
    require(grid.iter().all(|&n| n >= 1), "--n-grid values must be positive integers")?;
    require(a.eps > 0.0, "--eps must be positive")?;
    require(a.max_quadrature_n <= 8, "--max-quadrature-n above 8 is too slow")?;
    let limit = -2.0 * 2f64.ln();
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &n in &grid {
        let closed = selberg_box_integral_log(n, a.eps).log_value;
        let quad = (n <= a.max_quadrature_n).then(|| selberg_by_quadrature(n, a.eps));
        let residual = quad.map(|q| q - closed);
        if let Some(r) = residual {
            worst = worst.max(r.abs());
        }
        let rate = gamma_product_rate(n);
        rows.push((n, closed, quad, residual, rate, rate - limit));
    }
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    out.csv("selberg.csv", None, |w| {
        writeln!(w, "n,log_box_integral,log_quadrature,identity_residual,gamma_product_rate,rate_gap")?;
        for (n, closed, quad, residual, rate, gap) in &rows {
            writeln!(w, "{n},{closed},{},{},{rate},{gap}", fmt(*quad), fmt(*residual))?;
        }
        Ok(())
    })?;
    if worst <= a.tolerance {
        Ok(Verdict::Pass)
    } else {
        Ok(Verdict::Fail(format!("Selberg identity residual {worst:e} exceeds {:e}", a.tolerance)))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "atom:0,0,1")]
    pub mu: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Number of diagonal blocks N.
    #[arg(long, default_value_t = 8)]
    pub big_n: usize,
    /// Block size.
    #[arg(long, default_value_t = 128)]
    pub k: usize,
    #[arg(long, default_value = "1e-2,1e-3,1e-4,1e-5,1e-6")]
    pub eps_grid: String,
    /// Additive offset to log P.
    #[arg(long, default_value_t = 0.0)]
    pub chi_offset: f64,
    /// log vol of the unitary factor per real dimension; defaults to -log(k)/2.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Largest tolerated drop between consecutive delta_hat values.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
}

pub fn scan(a: &ScanArgs, out: &OutDir) -> Outcome {
    let cfg = ScanConfig {
        mu: measure(&a.mu)?,
        c: a.c,
        big_n: a.big_n,
        k: a.k,
        eps_grid: eps_list(&a.eps_grid)?,
        chi_offset: a.chi_offset,
        log_vol_omega: a.omega,
        seed: a.common.seed,
    };
    require(!cfg.eps_grid.is_empty(), "--eps-grid is empty")?;
    let report = dimension_scan(&cfg)?;
    out.csv("scan.csv", Some(json!({ "skipped": report.skipped })), |w| write_scan_csv(&report.rows, w))?;

    // Trend is judged from coarse to fine eps.
    let mut rows = report.rows.clone();
    rows.sort_by(|x, y| y.eps.total_cmp(&x.eps));
    let hats: Vec<f64> = rows.iter().map(|r| r.delta_hat).collect();
    let monotone = hats.len() >= 2 && is_non_decreasing_within(&hats, a.slack);
    let mut lines = vec![format!("rows: {}, skipped: {}", rows.len(), report.skipped.len())];
    for r in &rows {
        lines.push(format!("eps {:e}: delta_hat {:.6}", r.eps, r.delta_hat));
    }
    for s in &report.skipped {
        lines.push(format!("eps {:e}: skipped ({})", s.eps, s.reason));
    }
    if let Some(last) = rows.last() {
        lines.push(format!("final delta_hat: {:.6} at eps {:e}", last.delta_hat, last.eps));
    }
    lines.push(format!("trend: {}", if monotone { "non-decreasing as eps -> 0" } else { "NOT monotone" }));
    out.text("summary.txt", &lines)?;
    if monotone {
        Ok(Verdict::Pass)
    } else {
        Ok(Verdict::Fail("delta_hat is not non-decreasing as eps shrinks".into()))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FreenessArgs {
    #[command(flatten)]
    pub common: Common,
    /// `ginibre` (variance 1/k entries) or `dt` (independent DT samples).
    #[arg(long, default_value = "ginibre")]
    pub model: String,
    #[arg(long, default_value_t = 2)]
    pub members: usize,
    #[arg(long, default_value_t = 256)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value = "atom:0,0,1")]
    pub mu: String,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

pub fn freeness(a: &FreenessArgs, out: &OutDir) -> Outcome {
    require(a.members >= 1 && a.k >= 1, "--members and --k must be positive")?;
    let seeds = (0..a.members).map(|i| child_seed(a.common.seed, i as u64));
    let family: Vec<ComplexMatrix> = match a.model.as_str() {
        "ginibre" => seeds.map(|s| sample_ginibre(a.k, 1.0 / a.k as f64, s)).collect(),
        "dt" => {
            let mu = measure(&a.mu)?;
            seeds.map(|s| sample_dt(&DTParams::new(mu.clone(), a.c, a.k, s)?)).collect::<dtlab::Result<_>>()?
        }
        other => return Err(Failure::Config(format!("unknown --model `{other}` (ginibre|dt)"))),
    };
    let report = freeness_check(&family, a.m, a.gamma)?;
    out.json("freeness.json", json!({ "report": report }))?;
    if report.pass {
        Ok(Verdict::Pass)
    } else {
        Ok(Verdict::Fail(format!("max residual {} exceeds gamma {}", report.max_residual, a.gamma)))
    }
}
