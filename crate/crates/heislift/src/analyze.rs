//! Numerical certification of a built field: finite-difference slope
//! sampling, seeded Monte Carlo estimates of the slope's L^p norms with
//! a refinement diagnostic for the integrability threshold, contact
//! residuals along lines, the trace inequality near `Z`, and the
//! post-composition domination inequality.
//!
//! Every routine is deterministic under a fixed seed: work item `i`
//! draws from its own RNG stream, and reductions run in index order, so
//! results are independent of thread count and of the `parallel`
//! feature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extend::{EvalFlag, ExtensionField};
use crate::heis::HPoint;
use crate::oracle::TargetKind;
use crate::par;
use crate::rng::{purpose_seed, stream_rng, uniform_in_box, unit_vector};

/// Extra random probe directions added to the 2m axis directions.
pub const EXTRA_DIRECTIONS: usize = 8;
/// Probe step as a fraction of the local simplex diameter.
pub const STEP_FRACTION: f64 = 1e-3;

/// A finite-difference slope sample: the max difference quotient over
/// the probe directions. A lower bound for the true local slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeSample {
    pub x: Vec<f64>,
    pub h: f64,
    pub g_hat: f64,
    pub flag: EvalFlag,
    pub directions_used: usize,
}

/// Slope proxy at `x`: probes the 2m axis directions plus `q` seeded
/// random unit directions at step `h`, skipping probes that leave the
/// domain or fall off the regular region.
pub fn slope_at(
    field: &ExtensionField,
    x: &[f64],
    h: f64,
    q: usize,
    seed: u64,
) -> Result<SlopeSample> {
    let mut rng = stream_rng(seed, 0);
    let (value, flag) = field.evaluate_flagged(x)?;
    let (g_hat, used) = probe_slope(field, x, &value, h, q, &mut rng)?;
    Ok(SlopeSample {
        x: x.to_vec(),
        h,
        g_hat,
        flag,
        directions_used: used,
    })
}

fn probe_slope(
    field: &ExtensionField,
    x: &[f64],
    f0: &[f64],
    h: f64,
    q: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(f64, usize)> {
    let m = field.m();
    let mut g: f64 = 0.0;
    let mut used = 0usize;
    let probe = |y: &[f64], g: &mut f64, used: &mut usize| -> Result<()> {
        if !field.omega().contains(y) {
            return Ok(());
        }
        let (fy, flag) = field.evaluate_flagged(y)?;
        if flag != EvalFlag::Regular {
            return Ok(());
        }
        *g = f64::max(*g, field.target().dist(f0, &fy)? / h);
        *used += 1;
        Ok(())
    };
    for k in 0..m {
        for sgn in [1.0, -1.0] {
            let mut y = x.to_vec();
            y[k] += sgn * h;
            probe(&y, &mut g, &mut used)?;
        }
    }
    for _ in 0..q {
        let d = unit_vector(rng, m);
        let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + h * di).collect();
        probe(&y, &mut g, &mut used)?;
    }
    if used == 0 {
        return Err(Error::NoValidDirection);
    }
    Ok((g, used))
}

/// One Monte Carlo sample of the extended slope: regular points get the
/// finite-difference proxy at `h = STEP_FRACTION * local diameter`;
/// collar, truncated, and singular points contribute the policy value
/// `L (C~ + 4)` exactly.
fn sample_g(field: &ExtensionField, seed: u64, index: u64) -> (f64, EvalFlag) {
    let mut rng = stream_rng(seed, index);
    let omega = field.omega();
    let x = uniform_in_box(&mut rng, &omega.min, &omega.max);
    let collar_value = field.collar_slope_value();
    let (value, flag) = match field.evaluate_flagged(&x) {
        Ok(v) => v,
        Err(_) => return (collar_value, EvalFlag::Collar),
    };
    if flag != EvalFlag::Regular {
        return (collar_value, flag);
    }
    let (sid, _) = match field.complex().locate(&x) {
        Ok(hit) => hit,
        Err(_) => return (collar_value, EvalFlag::Collar),
    };
    let h = STEP_FRACTION * field.simplex_diameter(sid);
    match probe_slope(field, &x, &value, h, EXTRA_DIRECTIONS, &mut rng) {
        Ok((g, _)) => (g, EvalFlag::Regular),
        // No usable direction: the sample sits against the collar; it
        // contributes the policy value like its neighbors.
        Err(_) => (collar_value, EvalFlag::Collar),
    }
}

/// Monte Carlo estimate of `‖ĝ‖_{L^p(Ω)}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SobolevReport {
    pub p: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// (|Ω| mean ĝ^p)^{1/p}
    pub estimate: f64,
    /// delta-method standard error of the estimate
    pub std_error: f64,
    /// estimate / (L diam(Ω)^{m/p})
    pub bound_ratio: f64,
    pub collar_fraction: f64,
    pub singular_count: usize,
}

fn reduce_report(
    field: &ExtensionField,
    p: f64,
    seed: u64,
    samples: &[(f64, EvalFlag)],
) -> SobolevReport {
    let n = samples.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut collar = 0usize;
    let mut singular = 0usize;
    for (g, flag) in samples {
        let gp = g.powf(p);
        sum += gp;
        sum_sq += gp * gp;
        match flag {
            EvalFlag::Collar => collar += 1,
            EvalFlag::Singular => singular += 1,
            EvalFlag::Regular => {}
        }
    }
    let omega = field.omega();
    let volume: f64 = omega
        .min
        .iter()
        .zip(&omega.max)
        .map(|(a, b)| b - a)
        .product();
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let integral = volume * mean;
    let se_integral = volume * (var / n as f64).sqrt();
    let estimate = integral.powf(1.0 / p);
    let std_error = if integral > 0.0 {
        (1.0 / p) * integral.powf(1.0 / p - 1.0) * se_integral
    } else {
        0.0
    };
    let m = field.m() as f64;
    let denom = field.l_measured() * omega.diameter().powf(m / p);
    SobolevReport {
        p,
        n_samples: n,
        seed,
        estimate,
        std_error,
        bound_ratio: if denom > 0.0 { estimate / denom } else { 0.0 },
        collar_fraction: collar as f64 / n as f64,
        singular_count: singular,
    }
}

/// Seeded Monte Carlo estimate of `‖ĝ‖_{L^p}` from `n` uniform samples
/// over the domain box.
pub fn lp_norm(field: &ExtensionField, p: f64, n: usize, seed: u64) -> Result<SobolevReport> {
    if p < 1.0 {
        return Err(Error::invalid("analyze", format!("p = {p} must be >= 1")));
    }
    if n == 0 {
        return Err(Error::invalid("analyze", "sample count must be positive"));
    }
    let samples = par::map_indexed(n, |i| sample_g(field, seed, i as u64));
    Ok(reduce_report(field, p, seed, &samples))
}

/// Growth of the estimate under sample refinement `n, 4n, 16n`; the
/// blow-up detector for `p >= n+1` (the slope behaves like an inverse
/// distance to a codimension-(n+1) set, whose p-th power stops being
/// integrable there).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementDiagnostic {
    pub p: f64,
    pub n_samples: [usize; 3],
    pub estimates: [f64; 3],
    pub strictly_increasing: bool,
}

/// Per-p reports plus the refinement diagnostic at the largest p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PSweepReport {
    pub reports: Vec<SobolevReport>,
    pub refinement: RefinementDiagnostic,
}

/// Sweep `‖ĝ‖_p` over an ascending p list; sample values are shared
/// across p (the sample streams do not depend on p), so each report is
/// bit-identical to a standalone `lp_norm` call at the same seed and
/// sample count.
pub fn p_sweep(field: &ExtensionField, p_list: &[f64], n: usize, seed: u64) -> Result<PSweepReport> {
    if p_list.is_empty() {
        return Err(Error::invalid("analyze", "empty p list"));
    }
    if p_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("analyze", "p list must be ascending"));
    }
    if p_list[0] < 1.0 {
        return Err(Error::invalid("analyze", "p values must be >= 1"));
    }
    if n == 0 {
        return Err(Error::invalid("analyze", "sample count must be positive"));
    }
    let samples = par::map_indexed(16 * n, |i| sample_g(field, seed, i as u64));
    let reports = p_list
        .iter()
        .map(|&p| reduce_report(field, p, seed, &samples[..n]))
        .collect::<Vec<_>>();
    let p_max = *p_list.last().unwrap();
    let estimates = [
        reduce_report(field, p_max, seed, &samples[..n]).estimate,
        reduce_report(field, p_max, seed, &samples[..4 * n]).estimate,
        reduce_report(field, p_max, seed, &samples).estimate,
    ];
    Ok(PSweepReport {
        reports,
        refinement: RefinementDiagnostic {
            p: p_max,
            n_samples: [n, 4 * n, 16 * n],
            estimates,
            strictly_increasing: estimates[0] < estimates[1] && estimates[1] < estimates[2],
        },
    })
}

/// Integrated residual of the contact equation along sampled lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactReport {
    pub h: f64,
    pub lines_used: usize,
    pub median_h: f64,
    pub max_h: f64,
    pub median_h2: f64,
    pub max_h2: f64,
    /// residual per unit length at step h, per line
    pub per_line_h: Vec<f64>,
    /// same lines at step h/2
    pub per_line_h2: Vec<f64>,
    /// steps dropped because an endpoint was collar/singular
    pub excluded_steps: usize,
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Residual of `Δh = 2 Σ_j (ḡ_j Δf_j - f̄_j Δg_j)` accumulated along one
/// segment with endpoint-averaged coefficients, per unit of counted
/// length. The rule is exact on straight pieces of horizontal polylines,
/// so the residual measures corner crossings and genuine contact
/// violations only.
fn line_residual(
    field: &ExtensionField,
    a: &[f64],
    b: &[f64],
    step: f64,
) -> Result<(Option<f64>, usize)> {
    let len: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let steps = ((len / step).ceil() as usize).max(1);
    let path = field.eval_on_segment(a, b, steps)?;
    let nh = field.target().point_dim();
    let n = (nh - 1) / 2;
    let step_len = len / steps as f64;
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut excluded = 0usize;
    for i in 0..steps {
        if path.flags[i] != EvalFlag::Regular || path.flags[i + 1] != EvalFlag::Regular {
            excluded += 1;
            continue;
        }
        let u = &path.points[i];
        let v = &path.points[i + 1];
        let dh = v[nh - 1] - u[nh - 1];
        let mut twist = 0.0;
        for j in 0..n {
            let f_mid = 0.5 * (u[2 * j] + v[2 * j]);
            let g_mid = 0.5 * (u[2 * j + 1] + v[2 * j + 1]);
            let df = v[2 * j] - u[2 * j];
            let dg = v[2 * j + 1] - u[2 * j + 1];
            twist += 2.0 * (g_mid * df - f_mid * dg);
        }
        total += (dh - twist).abs();
        counted += 1;
    }
    if counted == 0 {
        return Ok((None, excluded));
    }
    Ok((Some(total / (counted as f64 * step_len)), excluded))
}

/// Contact residuals along the given segments at steps `h` and `h/2`.
/// Heisenberg targets only.
pub fn contact_residual(
    field: &ExtensionField,
    lines: &[(Vec<f64>, Vec<f64>)],
    h: f64,
) -> Result<ContactReport> {
    if !matches!(field.target().kind, TargetKind::Heisenberg { .. }) {
        return Err(Error::invalid(
            "analyze",
            "contact residuals are defined for Heisenberg targets only",
        ));
    }
    if h <= 0.0 {
        return Err(Error::invalid("analyze", "step must be positive"));
    }
    let results = par::map_indexed(lines.len(), |i| {
        let (a, b) = &lines[i];
        let at_h = line_residual(field, a, b, h);
        let at_h2 = line_residual(field, a, b, h / 2.0);
        (at_h, at_h2)
    });
    let mut per_h = Vec::new();
    let mut per_h2 = Vec::new();
    let mut excluded = 0usize;
    for (rh, rh2) in results {
        let (vh, e1) = rh?;
        let (vh2, e2) = rh2?;
        excluded += e1 + e2;
        if let (Some(vh), Some(vh2)) = (vh, vh2) {
            per_h.push(vh);
            per_h2.push(vh2);
        }
    }
    Ok(ContactReport {
        h,
        lines_used: per_h.len(),
        median_h: median(&per_h),
        max_h: per_h.iter().cloned().fold(0.0, f64::max),
        median_h2: median(&per_h2),
        max_h2: per_h2.iter().cloned().fold(0.0, f64::max),
        per_line_h: per_h,
        per_line_h2: per_h2,
        excluded_steps: excluded,
    })
}

/// Seeded random segments inside the domain box.
pub fn random_lines(field: &ExtensionField, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let omega = field.omega();
    let s = purpose_seed(seed, "contact-lines");
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(s, i as u64);
            let a = uniform_in_box(&mut rng, &omega.min, &omega.max);
            let b = uniform_in_box(&mut rng, &omega.min, &omega.max);
            (a, b)
        })
        .collect()
}

/// Trace inequality audit near `Z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceReport {
    pub samples_used: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    /// L (C~ + 4)
    pub bound: f64,
    pub violations: usize,
}

/// Sample points at distances in `[collar, 10 collar]` from `Z` and
/// compare `dist(F(x), f(z_x)) / |x - z_x|` against `L (C~ + 4)`.
pub fn trace_check(field: &ExtensionField, n: usize, seed: u64) -> Result<TraceReport> {
    if n == 0 {
        return Err(Error::invalid("analyze", "sample count must be positive"));
    }
    let collar = field.policy().collar_radius;
    if collar <= 0.0 {
        return Err(Error::invalid("analyze", "collar radius must be positive"));
    }
    let bound = field.collar_slope_value();
    let s = purpose_seed(seed, "trace");
    let results = par::map_indexed(n, |i| -> Result<Option<f64>> {
        let mut rng = stream_rng(s, i as u64);
        for _ in 0..64 {
            let site = rng.gen_range(0..field.boundary().sites.len());
            let dir = unit_vector(&mut rng, field.m());
            let rho = rng.gen_range(collar..10.0 * collar);
            let x: Vec<f64> = field
                .boundary()
                .sites
                .point(site)
                .iter()
                .zip(&dir)
                .map(|(z, d)| z + rho * d)
                .collect();
            if !field.omega().contains(&x) {
                continue;
            }
            let (nearest, d2) = field.boundary().sites.nearest(&x);
            let d = d2.sqrt();
            if d < collar || d > 10.0 * collar {
                continue;
            }
            let (value, flag) = field.evaluate_flagged(&x)?;
            if flag == EvalFlag::Singular {
                return Ok(None);
            }
            let dv = field
                .target()
                .dist(&value, &field.boundary().values[nearest])?;
            return Ok(Some(dv / d));
        }
        Ok(None)
    });
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0usize;
    for r in results {
        match r? {
            Some(ratio) => {
                used += 1;
                max_ratio = max_ratio.max(ratio);
                if ratio > bound * (1.0 + 1e-9) {
                    violations += 1;
                }
            }
            None => skipped += 1,
        }
    }
    Ok(TraceReport {
        samples_used: used,
        skipped,
        max_ratio,
        bound,
        violations,
    })
}

/// Post-composition domination audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub phis: usize,
    pub samples_used: usize,
    pub checks: usize,
    pub violations: usize,
    /// max over checks of |∂(φ∘F)| / ĝ
    pub max_ratio: f64,
    /// tolerance factor applied to ĝ
    pub tolerance: f64,
}

/// At regular sample points, finite differences of `φ_i ∘ F` along the
/// axis directions must be dominated by `(1 + tol) ĝ` for seeded
/// 1-Lipschitz Korányi distance functions `φ_i = d_K(·, p_i)`.
pub fn slope_domination_check(
    field: &ExtensionField,
    n_phis: usize,
    n: usize,
    seed: u64,
) -> Result<DominationReport> {
    if !matches!(field.target().kind, TargetKind::Heisenberg { .. }) {
        return Err(Error::invalid(
            "analyze",
            "domination check is defined for Heisenberg targets only",
        ));
    }
    // Anchor points from the padded bounding box of the boundary values.
    let dim = field.target().point_dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for v in &field.boundary().values {
        for i in 0..dim {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    for i in 0..dim {
        let pad = 0.5 * (hi[i] - lo[i]) + 0.5;
        lo[i] -= pad;
        hi[i] += pad;
    }
    let phi_seed = purpose_seed(seed, "phi-anchors");
    let anchors: Vec<HPoint> = (0..n_phis)
        .map(|i| {
            let mut rng = stream_rng(phi_seed, i as u64);
            HPoint::from_flat(&uniform_in_box(&mut rng, &lo, &hi)).expect("valid anchor")
        })
        .collect();

    let s = purpose_seed(seed, "domination");
    let tolerance = 0.05;
    let results = par::map_indexed(n, |i| -> Result<Option<(usize, usize, f64)>> {
        let mut rng = stream_rng(s, i as u64);
        let omega = field.omega();
        for _ in 0..64 {
            let x = uniform_in_box(&mut rng, &omega.min, &omega.max);
            let (f0, flag) = field.evaluate_flagged(&x)?;
            if flag != EvalFlag::Regular {
                continue;
            }
            let (sid, _) = field.complex().locate(&x)?;
            let h = STEP_FRACTION * field.simplex_diameter(sid);
            // Regular axis probes; ĝ is their max quotient plus the extra
            // random directions.
            let m = field.m();
            let mut probes: Vec<Vec<f64>> = Vec::new();
            for k in 0..m {
                for sgn in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] += sgn * h;
                    if !omega.contains(&y) {
                        continue;
                    }
                    if let Ok((fy, EvalFlag::Regular)) = field.evaluate_flagged(&y) {
                        probes.push(fy);
                    }
                }
            }
            if probes.is_empty() {
                continue;
            }
            let mut g_hat: f64 = 0.0;
            for fy in &probes {
                g_hat = g_hat.max(field.target().dist(&f0, fy)? / h);
            }
            for _ in 0..EXTRA_DIRECTIONS {
                let d = unit_vector(&mut rng, m);
                let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + h * di).collect();
                if !omega.contains(&y) {
                    continue;
                }
                if let Ok((fy, EvalFlag::Regular)) = field.evaluate_flagged(&y) {
                    g_hat = g_hat.max(field.target().dist(&f0, &fy)? / h);
                }
            }
            if g_hat == 0.0 {
                // Locally constant: every φ difference is zero too.
                return Ok(Some((anchors.len() * probes.len(), 0, 0.0)));
            }
            let p0 = HPoint::from_flat(&f0)?;
            let mut checks = 0usize;
            let mut violations = 0usize;
            let mut worst: f64 = 0.0;
            for anchor in &anchors {
                let phi0 = crate::heis::koranyi_dist(&p0, anchor)?;
                for fy in &probes {
                    let py = HPoint::from_flat(fy)?;
                    let phiy = crate::heis::koranyi_dist(&py, anchor)?;
                    let lhs = (phiy - phi0).abs() / h;
                    checks += 1;
                    worst = worst.max(lhs / g_hat);
                    if lhs > (1.0 + tolerance) * g_hat {
                        violations += 1;
                    }
                }
            }
            return Ok(Some((checks, violations, worst)));
        }
        Ok(None)
    });
    let mut used = 0usize;
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut max_ratio: f64 = 0.0;
    for r in results {
        if let Some((c, v, w)) = r? {
            used += 1;
            checks += c;
            violations += v;
            max_ratio = max_ratio.max(w);
        }
    }
    Ok(DominationReport {
        phis: n_phis,
        samples_used: used,
        checks,
        violations,
        max_ratio,
        tolerance,
    })
}
