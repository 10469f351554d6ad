//! Command-line frontend for the accelerator simulator.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 usage error,
//! 3 I/O error. Every numeric flag accepts decimal or 0x-prefixed hex.
//! Relative `--output` paths resolve under `$SPIKESIM_OUT_DIR` when set.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use spikesim::balancer::sparsity_stability;
use spikesim::binary::{
    build_optimized_popcount, build_vanilla_popcount, reference_transpose, transpose_frame, Frame,
    TransposeMemory,
};
use spikesim::config::{parse_layer_list, parse_sim_config, AttentionDefaults, SimConfig};
use spikesim::decoder::{decode_stream, expected_stream_cycles, oracle_decode};
use spikesim::experiments::{
    argmax_f, sweep, write_csv, write_json, MetricConfig, SweepKind, SweepRow,
};
use spikesim::orchestrator::{orchestrate_check, FeatureMap};
use spikesim::pipeline::{end_to_end, schedule_attention, AttnOp};
use spikesim::{GridWorkload, ParallelismConfig, SimError, SparsityModel, SpikeBitmap};

#[derive(Parser)]
#[command(name = "spikesim", version, about = "Dual-engine sparse accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct SweepArgs {
    /// Throughput values G to sweep.
    #[arg(long = "g", value_delimiter = ',')]
    g: Vec<u64>,
    /// Seeds per sweep point.
    #[arg(long, default_value = "32", value_parser = int_flag)]
    seeds: u64,
    /// Base RNG seed.
    #[arg(long, default_value = "1", value_parser = int_flag)]
    seed: u64,
    /// Zero probability of the synthetic workload.
    #[arg(long, default_value = "0.75")]
    sparsity: f64,
    /// Temporal grid dimension.
    #[arg(long, default_value = "2", value_parser = int_flag)]
    p_ts: u64,
    /// Spatial grid dimension.
    #[arg(long, default_value = "8", value_parser = int_flag)]
    p_fx: u64,
    /// Channel-in width (fixed-width sweeps only).
    #[arg(long, default_value = "16", value_parser = int_flag)]
    p_ci: u64,
    /// Crossbar bank count for paired comparisons.
    #[arg(long, default_value = "8", value_parser = int_flag)]
    b_m: u64,
    /// Workers per grid point (banks/scale sweeps).
    #[arg(long, default_value = "2", value_parser = int_flag)]
    p_wo: u64,
    /// Decoder lanes per worker (banks/scale sweeps).
    #[arg(long, default_value = "2", value_parser = int_flag)]
    m: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a bitmap through the M-lane sparse decoder and print the
    /// per-cycle trace.
    Decode {
        /// Input bitmap (hex or decimal).
        #[arg(long, value_parser = int_flag)]
        bits: u64,
        /// Decoder lanes M.
        #[arg(long, value_parser = int_flag)]
        lanes: u64,
        /// Bitmap width in bits.
        #[arg(long, default_value = "16", value_parser = int_flag)]
        width: u64,
    },
    /// F-versus-P_Ci sweep across throughputs.
    SweepPci {
        #[command(flatten)]
        common: SweepArgs,
        /// P_Ci grid.
        #[arg(long = "pci", value_delimiter = ',')]
        pci: Vec<u64>,
    },
    /// R-versus-P_Wo sweep at fixed throughput.
    SweepWorkers {
        #[command(flatten)]
        common: SweepArgs,
        /// Worker-count grid.
        #[arg(long = "workers", value_delimiter = ',')]
        workers: Vec<u64>,
    },
    /// Unified versus crossbar at matched total bandwidth.
    SweepBanks {
        #[command(flatten)]
        common: SweepArgs,
        /// Bank-count grid.
        #[arg(long = "banks", value_delimiter = ',')]
        banks: Vec<u64>,
    },
    /// Grid-scaling sweep of both balancers.
    Scale {
        #[command(flatten)]
        common: SweepArgs,
        /// Grid sizes (P_Ts x P_Fx products).
        #[arg(long = "grid", value_delimiter = ',')]
        grid: Vec<u64>,
    },
    /// LUT6 cost of the vanilla and optimized AND-PopCount circuits.
    PopcountCost {
        #[arg(long, value_parser = int_flag)]
        width: u64,
    },
    /// Implicit-transpose equivalence check against the permutation oracle.
    TransposeCheck {
        #[arg(long = "L", value_parser = int_flag)]
        l: u64,
        #[arg(long = "d", value_parser = int_flag)]
        d: u64,
        #[arg(long = "T", value_parser = int_flag)]
        t: u64,
        #[arg(long, default_value = "1", value_parser = int_flag)]
        seed: u64,
    },
    /// Push/pop dataflow equivalence against the im2col oracle.
    OrchestrateCheck {
        /// Layer token, e.g. `64c3`, `64c3s2p1`.
        #[arg(long)]
        layer: String,
        /// Input dims as CxHxW.
        #[arg(long, default_value = "16x8x8")]
        input: String,
        #[arg(long, default_value = "2", value_parser = int_flag)]
        timesteps: u64,
        #[arg(long, default_value = "2", value_parser = int_flag)]
        p_ts: u64,
        #[arg(long, default_value = "4", value_parser = int_flag)]
        p_fx: u64,
        #[arg(long, default_value = "4", value_parser = int_flag)]
        p_ci: u64,
        #[arg(long, default_value = "1", value_parser = int_flag)]
        seed: u64,
    },
    /// Latency-hiding schedule of a network's attention blocks as JSON.
    Pipeline {
        /// Network config file (TOML).
        #[arg(long)]
        net: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// End-to-end per-layer cycle report.
    EndToEnd {
        /// Network config file (TOML).
        #[arg(long)]
        net: PathBuf,
        /// Override the config's sparsity rate.
        #[arg(long)]
        sparsity: Option<f64>,
        /// Override the config's sparsity seed.
        #[arg(long, value_parser = int_flag)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Per-grid-point sparsity stability of a synthetic workload.
    Stability {
        #[arg(long, default_value = "0.75")]
        sparsity: f64,
        #[arg(long, default_value = "1", value_parser = int_flag)]
        seed: u64,
        #[arg(long, default_value = "256", value_parser = int_flag)]
        c_i: u64,
        #[arg(long, default_value = "8", value_parser = int_flag)]
        p_ts: u64,
        #[arg(long, default_value = "16", value_parser = int_flag)]
        p_fx: u64,
    },
}

/// Accepts `123` or `0x7b`.
fn int_flag(s: &str) -> Result<u64, String> {
    let parsed = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16)
    } else {
        s.parse()
    };
    parsed.map_err(|e| format!("invalid number `{s}`: {e}"))
}

enum CliFailure {
    Check(String),
    Usage(String),
    Io(String),
}

impl From<SimError> for CliFailure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(inner) => CliFailure::Io(inner.to_string()),
            other => CliFailure::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliFailure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliFailure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliFailure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn resolve_output(path: &PathBuf) -> PathBuf {
    if path.is_relative() {
        if let Ok(dir) = std::env::var("SPIKESIM_OUT_DIR") {
            return PathBuf::from(dir).join(path);
        }
    }
    path.clone()
}

fn write_artifact(path: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliFailure> {
    match path {
        Some(p) => {
            let p = resolve_output(p);
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent).map_err(|e| CliFailure::Io(e.to_string()))?;
                }
            }
            fs::write(&p, bytes).map_err(|e| CliFailure::Io(e.to_string()))?;
            println!("wrote {}", p.display());
            Ok(())
        }
        None => {
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliFailure::Io(e.to_string()))?;
            Ok(())
        }
    }
}

fn rows_to_bytes(rows: &[SweepRow], format: OutputFormat) -> Result<Vec<u8>, CliFailure> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(rows, &mut buf)?,
        OutputFormat::Json => write_json(rows, &mut buf)?,
    }
    Ok(buf)
}

fn metric_config(common: &SweepArgs) -> MetricConfig {
    let mut mcfg = MetricConfig {
        lambda: 1.0,
        sparsity: common.sparsity,
        seeds: common.seeds as usize,
        base_seed: common.seed,
        ..MetricConfig::default()
    };
    if !common.g.is_empty() {
        mcfg.g_grid = common.g.iter().map(|&g| g as usize).collect();
    }
    mcfg
}

fn base_config(common: &SweepArgs) -> ParallelismConfig {
    ParallelismConfig {
        p_ts: common.p_ts as usize,
        p_fx: common.p_fx as usize,
        p_ci: common.p_ci as usize,
        b_m: common.b_m as usize,
        p_wo: common.p_wo as usize,
        m: common.m as usize,
        ..ParallelismConfig::default()
    }
}

fn load_sim_config(path: &PathBuf) -> Result<SimConfig, CliFailure> {
    let text = fs::read_to_string(path).map_err(|e| CliFailure::Io(e.to_string()))?;
    Ok(parse_sim_config(&text)?)
}

fn run(cmd: Command) -> Result<(), CliFailure> {
    match cmd {
        Command::Decode { bits, lanes, width } => {
            if width == 0 || width > 64 {
                return Err(CliFailure::Usage("width must be in 1..=64".into()));
            }
            if lanes == 0 {
                return Err(CliFailure::Usage("lanes must be >= 1".into()));
            }
            let input = SpikeBitmap::from_u64(width as usize, bits);
            let trace = decode_stream(std::slice::from_ref(&input), lanes as usize);
            for e in &trace.entries {
                let positions: Vec<String> = e.positions.iter().map(|p| p.to_string()).collect();
                println!("cycle {}: bits {}", e.cycle, positions.join(","));
            }
            let got: Vec<usize> = trace
                .entries
                .iter()
                .flat_map(|e| e.positions.iter().copied())
                .collect();
            let expected = oracle_decode(&input);
            let formula = expected_stream_cycles(std::slice::from_ref(&input), lanes as usize);
            let indices: Vec<String> = got.iter().map(|p| p.to_string()).collect();
            println!(
                "decode: 0x{bits:x} with {lanes} lane(s) -> {} cycle(s), indices {}",
                trace.cycles,
                indices.join(",")
            );
            if got != expected || trace.cycles != formula {
                return Err(CliFailure::Check("decode trace diverged from oracle".into()));
            }
            Ok(())
        }
        Command::SweepPci { common, pci } => {
            let mut mcfg = metric_config(&common);
            if !pci.is_empty() {
                mcfg.pci_grid = pci.iter().map(|&v| v as usize).collect();
            }
            let base = base_config(&common);
            let rows = sweep(SweepKind::Pci, &mcfg, &base)?;
            let summaries: Vec<String> = mcfg
                .g_grid
                .iter()
                .filter_map(|&g| argmax_f(&rows, g).map(|p| format!("G={g} -> P_Ci={p}")))
                .collect();
            write_artifact(&common.output, &rows_to_bytes(&rows, common.format)?)?;
            println!(
                "sweep-pci: {} points; argmax F: {}",
                rows.len(),
                summaries.join(", ")
            );
            Ok(())
        }
        Command::SweepWorkers { common, workers } => {
            let mut mcfg = metric_config(&common);
            if !workers.is_empty() {
                mcfg.workers_grid = workers.iter().map(|&v| v as usize).collect();
            }
            let base = base_config(&common);
            let rows = sweep(SweepKind::Workers, &mcfg, &base)?;
            write_artifact(&common.output, &rows_to_bytes(&rows, common.format)?)?;
            println!("sweep-workers: {} points", rows.len());
            Ok(())
        }
        Command::SweepBanks { common, banks } => {
            let mut mcfg = metric_config(&common);
            if !banks.is_empty() {
                mcfg.banks_grid = banks.iter().map(|&v| v as usize).collect();
            }
            let base = base_config(&common);
            let rows = sweep(SweepKind::Banks, &mcfg, &base)?;
            let unified = rows
                .iter()
                .find(|r| r.kind == "banks_unified")
                .map(|r| r.d_mean);
            let xbar = rows
                .iter()
                .find(|r| r.kind == "banks_crossbar" && r.b_m == base.b_m)
                .map(|r| r.d_mean);
            write_artifact(&common.output, &rows_to_bytes(&rows, common.format)?)?;
            if let (Some(u), Some(x)) = (unified, xbar) {
                println!(
                    "sweep-banks: {} points; speedup at B_m={}: {:.2}x",
                    rows.len(),
                    base.b_m,
                    x / u
                );
            } else {
                println!("sweep-banks: {} points", rows.len());
            }
            Ok(())
        }
        Command::Scale { common, grid } => {
            let mut mcfg = metric_config(&common);
            if !grid.is_empty() {
                mcfg.scale_grid = grid.iter().map(|&v| v as usize).collect();
            }
            let base = base_config(&common);
            let rows = sweep(SweepKind::Scaling, &mcfg, &base)?;
            let deg = |kind: &str| -> Option<f64> {
                let curve: Vec<&SweepRow> = rows.iter().filter(|r| r.kind == kind).collect();
                let first = curve.first()?;
                let last = curve.last()?;
                Some(1.0 - first.d_mean / last.d_mean)
            };
            write_artifact(&common.output, &rows_to_bytes(&rows, common.format)?)?;
            println!(
                "scale: {} points; degradation unified {:.1}%, crossbar {:.1}%",
                rows.len(),
                deg("scaling_unified").unwrap_or(0.0) * 100.0,
                deg("scaling_crossbar").unwrap_or(0.0) * 100.0
            );
            Ok(())
        }
        Command::PopcountCost { width } => {
            if width == 0 {
                return Err(CliFailure::Usage("width must be >= 1".into()));
            }
            let vanilla = build_vanilla_popcount(width as usize).cost();
            let optimized = build_optimized_popcount(width as usize).cost();
            let json = serde_json::json!({
                "width": width,
                "vanilla": {"lut6": vanilla.lut6_count, "depth": vanilla.depth},
                "optimized": {"lut6": optimized.lut6_count, "depth": optimized.depth},
            });
            println!("{}", serde_json::to_string_pretty(&json).unwrap());
            Ok(())
        }
        Command::TransposeCheck { l, d, t, seed } => {
            let (l, d, t) = (l as usize, d as usize, t as usize);
            if l == 0 || d == 0 || t == 0 {
                return Err(CliFailure::Usage("dims must be >= 1".into()));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<u8> = (0..l * d * t).map(|_| rand::Rng::random(&mut rng)).collect();
            let frame = Frame::new(l, d, t, data);
            let mut mem = TransposeMemory::new(t, d, l);
            let (got, stats) = transpose_frame(&mut mem, &frame)?;
            let expect = reference_transpose(&frame);
            if stats.max_writes_per_bank_cycle > 1 || stats.max_reads_per_bank_cycle > 1 {
                return Err(CliFailure::Check("port legality violated".into()));
            }
            match got.iter().zip(&expect).position(|(a, b)| a != b) {
                None if got.len() == expect.len() => {
                    println!(
                        "transpose-check: PASS (L={l} d={d} T={t}, {} bytes, {} push + {} pop cycles)",
                        got.len(),
                        stats.push_cycles,
                        stats.pop_cycles
                    );
                    Ok(())
                }
                mismatch => {
                    let at = mismatch.unwrap_or(got.len().min(expect.len()));
                    println!("transpose-check: FAIL at byte {at}");
                    Err(CliFailure::Check(format!("first mismatch at byte {at}")))
                }
            }
        }
        Command::OrchestrateCheck {
            layer,
            input,
            timesteps,
            p_ts,
            p_fx,
            p_ci,
            seed,
        } => {
            let att = AttentionDefaults::default();
            let list = format!("{input}-{layer}");
            let net = parse_layer_list(&list, "cli", timesteps as usize, &att)?;
            let shape = net
                .layers
                .first()
                .ok_or_else(|| CliFailure::Usage("layer token produced no layer".into()))?;
            let cfg = ParallelismConfig {
                p_ts: p_ts as usize,
                p_fx: p_fx as usize,
                p_ci: p_ci as usize,
                ..ParallelismConfig::default()
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fm = FeatureMap::random(shape.t_s, shape.f_h, shape.f_w, shape.c_i, 0.4, &mut rng);
            let check = orchestrate_check(&fm, shape, &cfg)?;
            match check.first_divergence {
                None => {
                    println!(
                        "orchestrate-check: PASS ({} vectors, {} pop cycles, {} stalls)",
                        check.vectors, check.pop_cycles, check.stalls
                    );
                    Ok(())
                }
                Some(at) => {
                    println!("orchestrate-check: FAIL at vector {at}");
                    Err(CliFailure::Check(format!("first divergence at vector {at}")))
                }
            }
        }
        Command::Pipeline { net, output } => {
            let cfg = load_sim_config(&net)?;
            let mut schedules = Vec::new();
            for (bi, blk) in cfg.network.attention_blocks.iter().enumerate() {
                let layer = &cfg.network.layers[blk.q_layer];
                let workloads = spikesim::pipeline::compute_workloads(layer, true, &cfg.parallelism);
                let sparse = (workloads.w_s / workloads.p_s).max(1);
                let binary = (workloads.w_b / (2 * workloads.p_b)).max(1);
                let schedule = schedule_attention(
                    blk.heads,
                    move |_, _| sparse,
                    move |op, _| match op {
                        AttnOp::Score | AttnOp::Output => binary,
                        _ => 0,
                    },
                );
                let sparse_total: u64 = 3 * sparse * blk.heads as u64;
                let utilization = sparse_total as f64 / schedule.total_cycles.max(1) as f64;
                println!(
                    "block {bi}: total={} exposed={} sparse_util={:.3}",
                    schedule.total_cycles, schedule.exposed_binary_cycles, utilization
                );
                schedules.push(serde_json::json!({
                    "block": bi,
                    "entries": schedule.entries,
                    "total_cycles": schedule.total_cycles,
                    "exposed_binary_cycles": schedule.exposed_binary_cycles,
                    "sparse_utilization": utilization,
                }));
            }
            if schedules.is_empty() {
                return Err(CliFailure::Usage(
                    "network has no attention blocks to schedule".into(),
                ));
            }
            let bytes = serde_json::to_vec_pretty(&schedules).unwrap();
            write_artifact(&output, &bytes)?;
            Ok(())
        }
        Command::EndToEnd {
            net,
            sparsity,
            seed,
            output,
            format,
        } => {
            let mut cfg = load_sim_config(&net)?;
            if let Some(s) = sparsity {
                cfg.sparsity.rate = s;
            }
            if let Some(s) = seed {
                cfg.sparsity.seed = s;
            }
            let report = end_to_end(&cfg.network, &cfg.parallelism, &cfg.sparsity)?;
            let bytes = match format {
                OutputFormat::Json => serde_json::to_vec_pretty(&report).unwrap(),
                OutputFormat::Csv => {
                    let mut text = String::from(
                        "index,kind,orchestrator_cycles,sparse_cycles,binary_cycles,exposed_binary_cycles,total_cycles\n",
                    );
                    for l in &report.per_layer {
                        text.push_str(&format!(
                            "{},{:?},{},{},{},{},{}\n",
                            l.index,
                            l.kind,
                            l.orchestrator_cycles,
                            l.sparse_cycles,
                            l.binary_cycles,
                            l.exposed_binary_cycles,
                            l.total_cycles
                        ));
                    }
                    text.into_bytes()
                }
            };
            write_artifact(&output, &bytes)?;
            println!(
                "end-to-end: {} layers, total {} cycles",
                report.per_layer.len(),
                report.total_cycles
            );
            Ok(())
        }
        Command::Stability {
            sparsity,
            seed,
            c_i,
            p_ts,
            p_fx,
        } => {
            let layer = spikesim::experiments::synthetic_layer(16);
            let layer = spikesim::LayerShape {
                c_i: c_i as usize,
                ..layer
            };
            let cfg = ParallelismConfig {
                p_ts: p_ts as usize,
                p_fx: p_fx as usize,
                ..ParallelismConfig::default()
            };
            let model = SparsityModel::bernoulli(sparsity, seed);
            let w = GridWorkload::generate(&layer, &model, &cfg, 0);
            println!(
                "stability: std/max = {:.5} over {} grid points",
                sparsity_stability(&w),
                cfg.grid_points()
            );
            Ok(())
        }
    }
}
