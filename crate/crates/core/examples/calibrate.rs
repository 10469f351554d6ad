//! Calibration sweep over candidate configs for the acceptance criteria.
//! Prints measured quantities so thresholds can be frozen into tests.

use spikesim::experiments::{
    argmax_f, bandwidth_match_scan, linear_fit_r2, sweep, MetricConfig, SweepKind,
};
use spikesim::ParallelismConfig;

fn main() {
    let seeds = std::env::args()
        .nth(1)
        .and_then(|s| s.parse::<usize>().ok())
        .unwrap_or(16);
    println!("== calibration with {seeds} seeds ==");

    // Fig-8-style pci sweep: argmax F per G and max-F linearity.
    let mcfg = MetricConfig {
        seeds,
        ..MetricConfig::default()
    };
    let base = ParallelismConfig {
        p_ts: 2,
        p_fx: 8,
        ..ParallelismConfig::default()
    };
    let t0 = std::time::Instant::now();
    let rows = sweep(SweepKind::Pci, &mcfg, &base).unwrap();
    println!("-- pci sweep ({:?})", t0.elapsed());
    for &g in &mcfg.g_grid {
        let curve: Vec<String> = rows
            .iter()
            .filter(|r| r.g == g)
            .map(|r| format!("P_Ci={}: D={:.0} F_norm={:.3}", r.p_ci, r.d_mean, r.f_norm))
            .collect();
        println!("G={g}: argmax={:?} | {}", argmax_f(&rows, g), curve.join("  "));
    }
    let pts: Vec<(f64, f64)> = mcfg
        .g_grid
        .iter()
        .filter_map(|&g| {
            let best = rows
                .iter()
                .filter(|r| r.g == g)
                .max_by(|a, b| a.f.total_cmp(&b.f))?;
            Some((best.p_ci as f64, best.f))
        })
        .collect();
    println!("max-F vs optimal P_Ci points: {pts:?}");
    println!("linear fit R^2 = {:.4}", linear_fit_r2(&pts));

    // Fig-9A-style workers sweep.
    let t0 = std::time::Instant::now();
    let mcfg_w = MetricConfig {
        seeds,
        g_grid: vec![4, 8],
        ..MetricConfig::default()
    };
    let rows = sweep(SweepKind::Workers, &mcfg_w, &base).unwrap();
    println!("-- workers sweep ({:?})", t0.elapsed());
    for &g in &mcfg_w.g_grid {
        let curve: Vec<&spikesim::experiments::SweepRow> =
            rows.iter().filter(|r| r.g == g).collect();
        let rmax = curve.iter().map(|r| r.r).fold(0.0f64, f64::max);
        for r in &curve {
            println!(
                "G={g} P_Wo={} M={}: D={:.0} R={:.6} R/Rmax={:.3}",
                r.p_wo,
                r.m,
                r.d_mean,
                r.r,
                r.r / rmax
            );
        }
    }

    // Fig-9B-style banks sweep at matched bandwidth, several G splits.
    for (g_label, p_wo, m) in [(2, 2, 1), (4, 2, 2), (4, 4, 1), (8, 2, 4), (8, 4, 2)] {
        let t0 = std::time::Instant::now();
        let base_b = ParallelismConfig {
            p_ts: 2,
            p_fx: 8,
            p_ci: 16,
            p_wo,
            m,
            b_m: 8,
            ..ParallelismConfig::default()
        };
        let mcfg_b = MetricConfig {
            seeds,
            ..MetricConfig::default()
        };
        let rows = sweep(SweepKind::Banks, &mcfg_b, &base_b).unwrap();
        let unified = rows
            .iter()
            .find(|r| r.kind == "banks_unified")
            .map(|r| r.d_mean)
            .unwrap();
        print!("-- banks G={g_label} (P_Wo={p_wo},M={m}) unified D={unified:.0} | ");
        for r in rows.iter().filter(|r| r.kind == "banks_crossbar") {
            print!("B{}:{:.0} ({:.2}x) ", r.b_m, r.d_mean, r.d_mean / unified);
        }
        println!("({:?})", t0.elapsed());

        let (ud, scans) =
            bandwidth_match_scan(&mcfg_b, &base_b, &[1, 2, 3, 4, 6, 8]).unwrap();
        let s: Vec<String> = scans
            .iter()
            .map(|(k, d)| format!("{k}x:{:.2}", d / ud))
            .collect();
        println!("   bandwidth-to-match (crossbar D / unified D): {}", s.join(" "));
    }

    // Fig-9C-style scaling sweep, candidate worker splits.
    for (g_label, p_wo, m) in [(4, 2, 2), (8, 4, 2), (8, 8, 1), (16, 8, 2), (16, 16, 1)] {
        let t0 = std::time::Instant::now();
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
        let rows = sweep(SweepKind::Scaling, &mcfg_s, &base_s).unwrap();
        let curve = |kind: &str| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.kind == kind)
                .map(|r| r.d_mean)
                .collect()
        };
        let u = curve("scaling_unified");
        let x = curve("scaling_crossbar");
        println!(
            "-- scaling G={g_label} (P_Wo={p_wo},M={m}): unified deg={:.1}% crossbar deg={:.1}% ({:?})",
            (1.0 - u[0] / u[u.len() - 1]) * 100.0,
            (1.0 - x[0] / x[x.len() - 1]) * 100.0,
            t0.elapsed()
        );
        println!(
            "   unified D: {:?}",
            u.iter().map(|d| *d as u64).collect::<Vec<_>>()
        );
        println!(
            "   crossbar D: {:?}",
            x.iter().map(|d| *d as u64).collect::<Vec<_>>()
        );
    }
}
