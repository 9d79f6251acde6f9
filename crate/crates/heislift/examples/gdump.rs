// Slope-tail diagnostics: gdump <config-dir> <n> <seed> [max_gen]
use heislift::extend::{BoundaryData, EvalFlag, ExtensionField};
use heislift::oracle::TargetSpace;
use heislift::triangulate::build_complex;
use heislift::whitney::{decompose, BoxRegion, CompactSet};
use heislift::{analyze, io as hio, par};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = &args[1];
    let n: usize = args[2].parse().unwrap();
    let seed: u64 = args[3].parse().unwrap();
    let max_gen: u32 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(10);
    let f = std::fs::File::open(format!("{dir}/boundary.csv")).unwrap();
    let (sites, values) = hio::read_boundary_csv(f, 2, 3).unwrap();
    let z = CompactSet::new(sites).unwrap();
    let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let dec = decompose(&z, &omega, max_gen).unwrap();
    let cx = build_complex(&dec).unwrap();
    let target = TargetSpace::heisenberg(1);
    let boundary = BoundaryData::new(z, values, &target).unwrap();
    let field = ExtensionField::new(cx, boundary, target, omega, 1, 1e-6, None).unwrap();
    eprintln!(
        "L = {:.4}, C~ = {:.4}, collar value = {:.4}, collar radius = {:.5}, m-simplices = {}",
        field.l_measured(),
        field.c_tilde(),
        field.collar_slope_value(),
        field.policy().collar_radius,
        field.complex().simplex_count(2)
    );
    // Raw per-sample slope values, exactly as lp_norm draws them.
    let samples: Vec<(f64, u8)> = par::map_indexed(n, |i| {
        let mut rng = heislift::rng::stream_rng(seed, i as u64);
        let x = heislift::rng::uniform_in_box(&mut rng, &field.omega().min, &field.omega().max);
        match field.evaluate_flagged(&x) {
            Ok((_, EvalFlag::Regular)) => {
                match analyze::slope_at(&field, &x, 1e-3 * local_diam(&field, &x), 8, seed ^ i as u64) {
                    Ok(s) => (s.g_hat, 0),
                    Err(_) => (field.collar_slope_value(), 1),
                }
            }
            _ => (field.collar_slope_value(), 1),
        }
    });
    let mut g: Vec<f64> = samples.iter().map(|(v, _)| *v).collect();
    let collar_count = samples.iter().filter(|(_, f)| *f == 1).count();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eprintln!("collar fraction = {:.5}", collar_count as f64 / n as f64);
    for q in [0.5, 0.9, 0.99, 0.999, 0.9999, 1.0] {
        let idx = ((n as f64 - 1.0) * q) as usize;
        eprintln!("q{q}: g = {:.3}", g[idx]);
    }
    // Tail index check: count(g > t) * t^2 should be ~constant for a 1/r tail.
    for t in [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0] {
        let c = g.iter().rev().take_while(|v| **v > t).count();
        eprintln!("t={t}: count={c}  c*t^2/n={:.3}", c as f64 * t * t / n as f64);
    }
    // Prefix estimates of the p=2 and p=1.5 norms (index order, like lp_norm).
    let vals: Vec<f64> = samples.iter().map(|(v, _)| *v).collect();
    for p in [1.5f64, 2.0] {
        let mut acc = 0.0;
        let mut marks = vec![];
        for (i, v) in vals.iter().enumerate() {
            acc += v.powf(p);
            let k = i + 1;
            if k % (n / 16) == 0 {
                marks.push((k, (4.0 * acc / k as f64).powf(1.0 / p)));
            }
        }
        eprintln!("p={p} prefix estimates: {marks:?}");
    }
}

fn local_diam(field: &ExtensionField, x: &[f64]) -> f64 {
    field
        .complex()
        .locate(x)
        .map(|(sid, _)| field.simplex_diameter(sid))
        .unwrap_or(1.0)
}
