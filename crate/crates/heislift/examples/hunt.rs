// Criterion-7 style scan over analysis seeds: hunt <dir> <n> <max_gen> <seed>...
use heislift::extend::{BoundaryData, ExtensionField};
use heislift::oracle::TargetSpace;
use heislift::triangulate::build_complex;
use heislift::whitney::{decompose, BoxRegion, CompactSet};
use heislift::{analyze, io as hio};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dir = &args[1];
    let n: usize = args[2].parse().unwrap();
    let max_gen: u32 = args[3].parse().unwrap();
    let f = std::fs::File::open(format!("{dir}/boundary.csv")).unwrap();
    let (sites, values) = hio::read_boundary_csv(f, 2, 3).unwrap();
    let z = CompactSet::new(sites).unwrap();
    let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let dec = decompose(&z, &omega, max_gen).unwrap();
    let cx = build_complex(&dec).unwrap();
    let target = TargetSpace::heisenberg(1);
    let boundary = BoundaryData::new(z, values, &target).unwrap();
    let field = ExtensionField::new(cx, boundary, target, omega, 1, 1e-6, None).unwrap();
    eprintln!("L={:.3} C~={:.3} simplices={}", field.l_measured(), field.c_tilde(),
        field.complex().simplex_count(2));
    for seed_str in &args[4..] {
        let seed: u64 = seed_str.parse().unwrap();
        let sweep = analyze::p_sweep(&field, &[1.0, 1.5, 1.9, 2.0], n, seed).unwrap();
        let p15 = sweep.reports.iter().find(|r| r.p == 1.5).unwrap().estimate;
        let e = sweep.refinement.estimates;
        let ratio = e[2] / p15;
        let inc = sweep.refinement.strictly_increasing;
        let verdict = if inc && ratio > 3.0 { "PASS" } else { "fail" };
        println!(
            "seed {seed}: refine {:.2} -> {:.2} -> {:.2} inc={inc} p1.5={:.2} ratio={:.2} [{verdict}]",
            e[0], e[1], e[2], p15, ratio
        );
    }
}
