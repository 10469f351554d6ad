//! Focused calibration for the banks and scaling comparisons.

use spikesim::experiments::{bandwidth_match_scan, sweep, MetricConfig, SweepKind};
use spikesim::ParallelismConfig;

fn main() {
    let seeds = std::env::args()
        .nth(1)
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(16);

    // Banks comparison at G=2 with the four-bank baseline.
    let base_b = ParallelismConfig {
        p_ts: 2,
        p_fx: 8,
        p_ci: 16,
        p_wo: 2,
        m: 1,
        b_m: 4,
        ..ParallelismConfig::default()
    };
    let mcfg = MetricConfig {
        seeds,
        ..MetricConfig::default()
    };
    let rows = sweep(SweepKind::Banks, &mcfg, &base_b).unwrap();
    let unified = rows
        .iter()
        .find(|r| r.kind == "banks_unified")
        .map(|r| r.d_mean)
        .unwrap();
    print!("banks G=2 (2,1) unified={unified:.0} | ");
    for r in rows.iter().filter(|r| r.kind == "banks_crossbar") {
        print!("B{}:{:.2}x ", r.b_m, r.d_mean / unified);
    }
    println!();
    let (ud, scans) = bandwidth_match_scan(&mcfg, &base_b, &[1, 2, 3, 4, 6, 8]).unwrap();
    let s: Vec<String> = scans
        .iter()
        .map(|(k, d)| format!("{k}x:{:.2}", d / ud))
        .collect();
    println!("bandwidth-to-match at b_m=4: {}", s.join(" "));

    // Scaling candidates: throughput/split and window-length variations.
    for (p_wo, m, ci_mult) in [
        (5usize, 1usize, 64usize),
        (6, 1, 64),
        (3, 2, 64),
        (8, 1, 128),
        (8, 1, 256),
        (6, 1, 128),
        (5, 1, 128),
    ] {
        let base_s = ParallelismConfig {
            p_ts: 2,
            p_fx: 8,
            p_ci: 16,
            p_wo,
            m,
            b_m: 8,
            ..ParallelismConfig::default()
        };
        let mcfg_s = MetricConfig {
            seeds,
            scale_grid: vec![1, 2, 4, 8, 16, 32, 64, 128],
            ..MetricConfig::default()
        };
        // Override the synthetic window length through a custom layer by
        // scaling p_ci reference: sweep() sizes c_i = 64 * p_ci, so emulate
        // longer windows by running the scan manually.
        let t0 = std::time::Instant::now();
        let rows = sweep_with_ci(&mcfg_s, &base_s, ci_mult * 16);
        let u: Vec<f64> = rows.0;
        let x: Vec<f64> = rows.1;
        println!(
            "scaling G={} ({p_wo},{m}) c_i={}: unified deg={:.1}% [{}..{}] crossbar deg={:.1}% [{}..{}] ({:?})",
            p_wo * m,
            ci_mult * 16,
            (1.0 - u[0] / u[u.len() - 1]) * 100.0,
            u[0] as u64,
            u[u.len() - 1] as u64,
            (1.0 - x[0] / x[x.len() - 1]) * 100.0,
            x[0] as u64,
            x[x.len() - 1] as u64,
            t0.elapsed()
        );
    }
}

fn sweep_with_ci(
    mcfg: &MetricConfig,
    base: &ParallelismConfig,
    c_i: usize,
) -> (Vec<f64>, Vec<f64>) {
    use spikesim::balancer::{simulate_crossbar, simulate_unified, CrossbarModel};
    use spikesim::config::{LayerKind, LayerShape, SparsityModel};
    use spikesim::GridWorkload;
    let layer = LayerShape {
        t_s: 1,
        f_h: 64,
        f_w: 64,
        c_i,
        c_o: 64,
        k_h: 3,
        k_w: 3,
        stride: 1,
        padding: 1,
        kind: LayerKind::Conv,
    };
    let mut unified = Vec::new();
    let mut crossbar = Vec::new();
    for &n in &mcfg.scale_grid {
        let cfg = ParallelismConfig {
            p_ts: 1,
            p_fx: n,
            ..base.clone()
        };
        let model = CrossbarModel::new(base.b_m, base.p_ci, cfg.g());
        let mut du = 0.0;
        let mut dx = 0.0;
        for i in 0..mcfg.seeds {
            let sm = SparsityModel::bernoulli(mcfg.sparsity, mcfg.base_seed + i as u64);
            let w = GridWorkload::generate(&layer, &sm, &cfg, 0);
            du += simulate_unified(&w, &cfg).cycles as f64;
            dx += simulate_crossbar(&w, &model, &cfg).cycles as f64;
        }
        unified.push(du / mcfg.seeds as f64);
        crossbar.push(dx / mcfg.seeds as f64);
    }
    (unified, crossbar)
}
