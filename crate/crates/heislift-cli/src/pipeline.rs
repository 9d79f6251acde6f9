//! Pipeline orchestration and artifact emission.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use heislift::analyze;
use heislift::extend::{BoundaryData, ExtensionField};
use heislift::heis;
use heislift::io as hio;
use heislift::triangulate::{build_complex, quality_report, QualityReport};
use heislift::whitney::{decompose, verify_whitney, CompactSet, WhitneyReport};
use heislift::{Error, Result};

use crate::config::{CheckKind, RunConfig, TargetConfig};

/// Validation outcome of `check`: hard violations (reject) and warnings
/// (allowed, reported).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    pub site_count: usize,
}

/// Parse the inputs and validate the configuration without building.
pub fn validate(cfg: &RunConfig, config_path: &Path) -> Result<ValidationReport> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    if cfg.m < 1 {
        violations.push("m must be at least 1".into());
    }
    if cfg.n < 1 {
        violations.push("n must be at least 1".into());
    }
    if cfg.n >= cfg.m {
        violations.push(format!(
            "skeleton dimension n={} must be below m={}",
            cfg.n, cfg.m
        ));
    }
    if matches!(cfg.target, TargetConfig::Heisenberg) && cfg.n >= 2 {
        // Surface the capability boundary before any building happens.
        violations.push(format!(
            "heisenberg targets support skeleton dimension 1 only (sphere fills above k=0 \
             are unsupported); got n={}",
            cfg.n
        ));
    }
    if cfg.omega.dim() != cfg.m {
        violations.push(format!(
            "omega has dimension {}, expected m={}",
            cfg.omega.dim(),
            cfg.m
        ));
    }
    if cfg.max_generation > 24 {
        violations.push("max_generation above 24 exceeds the exact integer lattice".into());
    }
    if cfg.eps_sing <= 0.0 || cfg.eps_sing >= 0.5 {
        violations.push(format!("eps_sing {} outside (0, 0.5)", cfg.eps_sing));
    }
    if let Some(c) = cfg.collar_radius {
        if c <= 0.0 {
            violations.push("collar_radius must be positive".into());
        }
    }
    if cfg.analysis.p_list.windows(2).any(|w| w[0] > w[1]) {
        violations.push("analysis.p_list must be ascending".into());
    }
    if cfg.analysis.p_list.first().map_or(false, |p| *p < 1.0) {
        violations.push("analysis.p_list entries must be >= 1".into());
    }
    let threshold = (cfg.n + 1) as f64;
    for p in &cfg.analysis.p_list {
        if *p >= threshold {
            warnings.push(format!(
                "p = {p} is at or above the integrability threshold n+1 = {threshold}; \
                 estimates will not converge (blow-up demonstration)"
            ));
        }
    }

    let mut site_count = 0;
    let path = cfg.boundary_path(config_path);
    match fs::File::open(&path) {
        Err(e) => violations.push(format!("boundary file {}: {e}", path.display())),
        Ok(f) => match hio::read_boundary_csv(f, cfg.m, cfg.target_dim()) {
            Err(e) => violations.push(format!("boundary file {}: {e}", path.display())),
            Ok((sites, _values)) => {
                site_count = sites.len();
                if sites.is_empty() {
                    violations.push("boundary file has no rows".into());
                }
                for (i, z) in sites.iter().enumerate() {
                    if !cfg.omega.contains_strict(z) {
                        violations.push(format!("site {i} is not strictly inside omega"));
                    }
                }
            }
        },
    }

    Ok(ValidationReport {
        ok: violations.is_empty(),
        violations,
        warnings,
        site_count,
    })
}

/// One certification check with its verdict and measured quantities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Pipeline summary written to `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub site_count: usize,
    pub cube_count: usize,
    pub unresolved_count: usize,
    pub m_simplex_count: usize,
    pub l_measured: f64,
    pub c_tilde_measured: f64,
    pub gamma: f64,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

/// Execute the full pipeline and write the artifact bundle; returns the
/// summary. All randomness is derived from `cfg.analysis.seed`.
pub fn run(cfg: &RunConfig, config_path: &Path, out_override: Option<&Path>) -> Result<RunSummary> {
    let validation = validate(cfg, config_path)?;
    if !validation.ok {
        return Err(Error::invalid(
            "cli",
            format!("configuration invalid: {}", validation.violations.join("; ")),
        ));
    }

    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| {
        if cfg.out_dir.is_absolute() {
            cfg.out_dir.clone()
        } else {
            config_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&cfg.out_dir)
        }
    });
    fs::create_dir_all(out_dir.join("reports"))?;
    let reports_dir = out_dir.join("reports");

    // Inputs.
    let boundary_file = fs::File::open(cfg.boundary_path(config_path))?;
    let (site_rows, value_rows) = hio::read_boundary_csv(boundary_file, cfg.m, cfg.target_dim())?;
    let sites = CompactSet::new(site_rows)?;
    let target = cfg.target_space();
    let seed = cfg.analysis.seed;

    // Geometry.
    let dec = decompose(&sites, &cfg.omega, cfg.max_generation)?;
    write_json(&out_dir, "cubes.json", &dec)?;
    let whitney_report = verify_whitney(&dec, &sites);
    write_json(&reports_dir, "whitney.json", &whitney_report)?;

    let cx = build_complex(&dec)?;
    write_json(&out_dir, "complex.json", &cx)?;
    let quality = quality_report(&cx, Some(&sites), seed);
    write_json(&out_dir, "quality.json", &quality)?;

    // Field.
    let boundary = BoundaryData::new(sites, value_rows, &target)?;
    let field = ExtensionField::new(
        cx,
        boundary,
        target.clone(),
        cfg.omega.clone(),
        cfg.n,
        cfg.eps_sing,
        cfg.collar_radius,
    )?;
    write_json(&out_dir, "field.json", &field.to_bundle())?;

    // Checks.
    let mut checks: Vec<CheckResult> = Vec::new();
    let enabled = |k: CheckKind| cfg.analysis.checks.contains(&k);

    if enabled(CheckKind::Whitney) {
        checks.push(check_whitney(&whitney_report));
    }
    if enabled(CheckKind::Complex) {
        checks.push(check_complex(&field, &quality, seed)?);
    }
    if enabled(CheckKind::HeisCore) {
        let audit = heis::group_audit(seed, 10_000);
        write_json(&reports_dir, "heis_core.json", &audit)?;
        checks.push(CheckResult {
            name: "heis_core".into(),
            pass: audit.ok,
            detail: format!(
                "gamma measured {:.6} (bound {:.6}), worst endpoint error {:.2e}",
                audit.gamma_measured, audit.gamma_bound, audit.max_endpoint_error
            ),
        });
    }
    if enabled(CheckKind::Skeleton) {
        checks.push(check_skeleton(&field)?);
    }
    if enabled(CheckKind::Trace) {
        let report = analyze::trace_check(&field, cfg.analysis.trace_samples, seed)?;
        write_json(&reports_dir, "trace.json", &report)?;
        checks.push(CheckResult {
            name: "trace".into(),
            pass: report.violations == 0 && report.samples_used > 0,
            detail: format!(
                "max ratio {:.4} vs bound {:.4} over {} samples",
                report.max_ratio, report.bound, report.samples_used
            ),
        });
    }
    if enabled(CheckKind::Sobolev) {
        checks.push(check_sobolev(&field, cfg, &reports_dir)?);
    }
    if enabled(CheckKind::Blowup) {
        checks.push(check_blowup(&field, cfg, &reports_dir)?);
    }
    if enabled(CheckKind::Contact) {
        checks.push(check_contact(&field, cfg, &reports_dir)?);
    }
    if enabled(CheckKind::Domination) {
        let report = analyze::slope_domination_check(
            &field,
            cfg.analysis.domination_phis,
            cfg.analysis.domination_samples,
            seed,
        )?;
        write_json(&reports_dir, "domination.json", &report)?;
        checks.push(CheckResult {
            name: "domination".into(),
            pass: report.violations == 0 && report.samples_used > 0,
            detail: format!(
                "{} checks, max ratio {:.4}, violations {}",
                report.checks, report.max_ratio, report.violations
            ),
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    let summary = RunSummary {
        seed,
        site_count: field.boundary().sites.len(),
        cube_count: field.complex().decomposition().cubes.len(),
        unresolved_count: field.complex().decomposition().unresolved.len(),
        m_simplex_count: field.complex().simplex_count(field.m()),
        l_measured: field.l_measured(),
        c_tilde_measured: field.c_tilde(),
        gamma: target.gamma,
        checks,
        all_pass,
    };
    write_json(&out_dir, "summary.json", &summary)?;
    Ok(summary)
}

fn check_whitney(report: &WhitneyReport) -> CheckResult {
    CheckResult {
        name: "whitney".into(),
        pass: report.ok,
        detail: format!(
            "ratio range [{:.4}, {:.4}] within [1, 4], max neighbors {}, max jump {}",
            report.min_ratio, report.max_ratio, report.max_neighbors, report.max_generation_jump
        ),
    }
}

fn check_complex(field: &ExtensionField, quality: &QualityReport, seed: u64) -> Result<CheckResult> {
    let cx = field.complex();
    let structural = cx.structural_check().is_ok();
    let overlap = cx.overlap_probe(20_000, seed).is_ok();
    let size_ok = quality.size_min.map_or(false, |s| s >= 1.0 - 1e-12)
        && quality
            .size_max
            .map_or(false, |s| s <= quality.size_ceiling + 1e-12);
    Ok(CheckResult {
        name: "complex".into(),
        pass: structural && overlap && size_ok,
        detail: format!(
            "{} m-simplices, {} similarity classes, diam/beta <= {:.4}, size in [{:.4}, {:.4}]",
            quality.m_simplex_count,
            quality.similarity_classes,
            quality.d2_observed,
            quality.size_min.unwrap_or(f64::NAN),
            quality.size_max.unwrap_or(f64::NAN)
        ),
    })
}

fn check_skeleton(field: &ExtensionField) -> Result<CheckResult> {
    let cx = field.complex();
    let n = field.skeleton().n;
    let l = field.l_measured();
    let c_tilde = field.c_tilde();
    // Every n-cell's recorded constant must sit below C~ L, and vertex
    // witnesses must be exactly nearest.
    let mut worst: f64 = 0.0;
    for cell in &field.skeleton().cell_maps[n - 1] {
        worst = worst.max(cell.lip_bound());
    }
    let cells_ok = worst <= c_tilde * l * (1.0 + 1e-12) + 1e-300;
    let sites = &field.boundary().sites;
    let mut witnesses_ok = true;
    for v in 0..cx.vertex_count() as u32 {
        let assigned = field.skeleton().vertex_site[v as usize] as usize;
        let (nearest, _) = sites.nearest(cx.vertex(v));
        if assigned != nearest {
            witnesses_ok = false;
            break;
        }
    }
    Ok(CheckResult {
        name: "skeleton".into(),
        pass: cells_ok && witnesses_ok,
        detail: format!(
            "C~ measured {:.4} over {} n-cells, witnesses exact: {}",
            c_tilde,
            field.skeleton().cell_maps[n - 1].len(),
            witnesses_ok
        ),
    })
}

fn check_sobolev(field: &ExtensionField, cfg: &RunConfig, reports_dir: &Path) -> Result<CheckResult> {
    let seed = cfg.analysis.seed;
    let n = cfg.analysis.n_samples;
    let mut rows = Vec::new();
    let mut pass = true;
    let mut details = Vec::new();
    for &p in &cfg.analysis.p_list {
        let at_n = analyze::lp_norm(field, p, n, seed)?;
        let at_4n = analyze::lp_norm(field, p, 4 * n, seed)?;
        let drift = (at_4n.estimate - at_n.estimate).abs();
        let tol = 3.0 * at_n.std_error.max(at_4n.std_error);
        let converged = drift <= tol;
        pass &= converged;
        details.push(format!(
            "p={p}: {:.5} -> {:.5} (drift {:.2e} vs 3se {:.2e})",
            at_n.estimate, at_4n.estimate, drift, tol
        ));
        rows.push((p, at_n, at_4n));
    }
    // Dilation linearity of the p = 1 estimate.
    let base = analyze::lp_norm(field, 1.0, n, seed)?;
    for lambda in [0.5, 2.0] {
        let scaled = field.boundary().scaled(field.target(), lambda)?;
        let dfield = ExtensionField::new(
            field.complex().clone(),
            scaled,
            field.target().clone(),
            field.omega().clone(),
            field.skeleton().n,
            field.policy().eps_sing,
            Some(field.policy().collar_radius),
        )?;
        let got = analyze::lp_norm(&dfield, 1.0, n, seed)?;
        let tol = 2.0 * (got.std_error + lambda * base.std_error) + 1e-12;
        let ok = (got.estimate - lambda * base.estimate).abs() <= tol;
        pass &= ok;
        details.push(format!(
            "dilation {lambda}: {:.5} vs {:.5}",
            got.estimate,
            lambda * base.estimate
        ));
    }
    #[derive(Serialize)]
    struct SobolevArtifact {
        at_n: Vec<analyze::SobolevReport>,
        at_4n: Vec<analyze::SobolevReport>,
    }
    let artifact = SobolevArtifact {
        at_n: rows.iter().map(|(_, a, _)| a.clone()).collect(),
        at_4n: rows.iter().map(|(_, _, b)| b.clone()).collect(),
    };
    write_json(reports_dir, "sobolev.json", &artifact)?;
    let mut csv = String::from("p,estimate\n");
    for (p, _, b) in &rows {
        csv.push_str(&format!("{p},{}\n", b.estimate));
    }
    fs::write(reports_dir.join("sobolev.csv"), csv)?;
    Ok(CheckResult {
        name: "sobolev".into(),
        pass,
        detail: details.join("; "),
    })
}

fn check_blowup(field: &ExtensionField, cfg: &RunConfig, reports_dir: &Path) -> Result<CheckResult> {
    let seed = cfg.analysis.seed;
    let n = cfg.analysis.n_samples;
    let blowup_p = cfg.analysis.blowup_p.unwrap_or((cfg.n + 1) as f64);
    let mut p_list = cfg.analysis.p_list.clone();
    if p_list.last().map_or(true, |&p| p < blowup_p) {
        p_list.push(blowup_p);
    }
    let sweep = analyze::p_sweep(field, &p_list, n, seed)?;
    write_json(reports_dir, "blowup.json", &sweep)?;
    let mut csv = String::from("p,estimate\n");
    for r in &sweep.reports {
        csv.push_str(&format!("{},{}\n", r.p, r.estimate));
    }
    fs::write(reports_dir.join("p_sweep.csv"), csv)?;
    // Reference level: the estimate at p = 1.5 when present, otherwise
    // the largest sub-threshold exponent.
    let reference = sweep
        .reports
        .iter()
        .filter(|r| r.p < blowup_p)
        .map(|r| (r.p, r.estimate))
        .fold(None, |acc: Option<(f64, f64)>, (p, e)| match acc {
            Some((bp, be)) if (bp - 1.5).abs() <= (p - 1.5).abs() => Some((bp, be)),
            _ => Some((p, e)),
        });
    let (ref_p, ref_est) = reference.unwrap_or((1.0, f64::INFINITY));
    let grew = sweep.refinement.strictly_increasing;
    let exceeded = sweep.refinement.estimates[2] > 3.0 * ref_est;
    Ok(CheckResult {
        name: "blowup".into(),
        pass: grew && exceeded,
        detail: format!(
            "p={} refinement {:.4} -> {:.4} -> {:.4} (increasing: {grew}), vs 3x p={ref_p} = {:.4}",
            sweep.refinement.p,
            sweep.refinement.estimates[0],
            sweep.refinement.estimates[1],
            sweep.refinement.estimates[2],
            3.0 * ref_est
        ),
    })
}

fn check_contact(field: &ExtensionField, cfg: &RunConfig, reports_dir: &Path) -> Result<CheckResult> {
    let seed = cfg.analysis.seed;
    let h = cfg
        .analysis
        .contact_h
        .unwrap_or_else(|| 1e-3 * field.omega().diameter());
    let lines = analyze::random_lines(field, cfg.analysis.contact_lines, seed);
    let report = analyze::contact_residual(field, &lines, h)?;
    write_json(reports_dir, "contact.json", &report)?;
    let threshold = 1e-3 * field.l_measured();
    let small = report.median_h <= threshold;
    let converges = report.median_h2 <= 0.75 * report.median_h;
    Ok(CheckResult {
        name: "contact".into(),
        pass: small && converges,
        detail: format!(
            "median {:.3e} (<= {:.3e}: {small}) halves to {:.3e} (<= 0.75x: {converges})",
            report.median_h, threshold, report.median_h2
        ),
    })
}
