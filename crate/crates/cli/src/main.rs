//! `epp`: purification runs, MEMS and rank-three sweeps, random ensembles and yield tables.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use epp_core::analytic::{mems, rank3, rank3_preimages, Rank3Params};
use epp_core::ensemble::{run_ensemble, EnsembleConfig, NrMode};
use epp_core::yieldsim::{dominant_mean, mc_yield, yield_pmf, YieldConfig};
use epp_core::{run, BellDensityMatrix64, Options64, ProtocolKind, StateFile};
use rayon::prelude::*;
use serde_json::json;

use output::{num, write_csv, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "epp", version, about = "Recurrence entanglement purification of two-qubit states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Protocol {
    M2,
    M2h,
    M2h2,
    Dejmps,
}

impl From<Protocol> for ProtocolKind {
    fn from(p: Protocol) -> Self {
        match p {
            Protocol::M2 => ProtocolKind::M2,
            Protocol::M2h => ProtocolKind::M2H,
            Protocol::M2h2 => ProtocolKind::M2H2,
            Protocol::Dejmps => ProtocolKind::DEJMPS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum YieldMode {
    Exact,
    Mc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Purify one state read from a JSON file.
    Purify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "m2h2")]
        protocol: Protocol,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 128)]
        max_iter: usize,
        #[arg(long, default_value_t = 64)]
        max_k: usize,
        /// Output JSON file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success probability of MEMS over a concurrence range.
    Mems {
        #[arg(long, default_value_t = 0.0)]
        c_min: f64,
        #[arg(long, default_value_t = 1.0)]
        c_max: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "m2,m2h,m2h2,dejmps")]
        protocols: Vec<Protocol>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Purity-concurrence grid of the rank-three family.
    Rank3 {
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, value_enum, default_value = "m2h2")]
        protocol: Protocol,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-state ensemble: concurrence histogram, purifiable fractions, mean success.
    Ensemble {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 1, 2, 3, 4 or "uniform".
        #[arg(long, default_value = "uniform")]
        nr_mode: String,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "m2,m2h,dejmps")]
        protocols: Vec<Protocol>,
        /// Prefix for hist.csv, fraction.csv and avgp.csv.
        #[arg(long)]
        out_prefix: String,
    },
    /// Distribution of surviving pairs over rounds.
    Yield {
        #[arg(long)]
        pairs: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        probs: Vec<f64>,
        #[arg(long, value_enum, default_value = "exact")]
        mode: YieldMode,
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("EPP_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().with_context(|| format!("EPP_THREADS={v:?}"))?;
    if n == 0 {
        bail!("EPP_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Purify { input, protocol, tol, max_iter, max_k, out } => purify(&input, protocol, Options64 { tol, max_iter, max_k }, out.as_deref()),
        Command::Mems { c_min, c_max, steps, protocols, out } => mems_sweep(c_min, c_max, steps, &protocols, &out).map(|_| 0),
        Command::Rank3 { theta, phi, grid, protocol, out } => rank3_grid(theta, phi, grid, protocol, &out).map(|_| 0),
        Command::Ensemble { samples, bins, seed, nr_mode, protocols, out_prefix } => {
            ensemble(samples, bins, seed, &nr_mode, &protocols, &out_prefix).map(|_| 0)
        }
        Command::Yield { pairs, probs, mode, trials, seed, out } => yields(pairs, probs, mode, trials, seed, &out).map(|_| 0),
    }
}

fn purify(input: &Path, protocol: Protocol, opts: Options64, out: Option<&Path>) -> Result<u8> {
    opts.validate()?;
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let rho: BellDensityMatrix64 = StateFile::parse(&text)?.to_bell()?;
    let res = run(protocol.into(), &rho, &opts)?;
    let manifest = RunManifest::new("purify", json!({"input": input.display().to_string(), "protocol": ProtocolKind::from(protocol).name(), "tol": opts.tol, "max_iter": opts.max_iter, "max_k": opts.max_k}), None);
    let mut doc = res.to_json();
    doc["manifest"] = serde_json::to_value(&manifest)?;
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match out {
        Some(p) => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            manifest.write_sidecar(p, serde_json::Value::Null)?;
        }
        None => print!("{text}"),
    }
    eprintln!("{}: {:?}, probability {}", ProtocolKind::from(protocol).name(), res.status, num(res.overall_probability));
    Ok(if res.purified() { 0 } else { 2 })
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

fn mems_sweep(c_min: f64, c_max: f64, steps: usize, protocols: &[Protocol], out: &Path) -> Result<()> {
    if !(0.0 <= c_min && c_min < c_max && c_max <= 1.0) {
        bail!("need 0 <= c-min < c-max <= 1");
    }
    if steps == 0 || steps > 1_000_000 {
        bail!("steps must be in [1, 1000000]");
    }
    if protocols.is_empty() {
        bail!("no protocols given");
    }
    let opts = Options64::default();
    let kinds: Vec<ProtocolKind> = protocols.iter().map(|&p| p.into()).collect();
    let rows: Vec<Vec<String>> = linspace(c_min, c_max, steps)
        .into_par_iter()
        .map(|c| -> Result<Vec<String>> {
            let rho = mems(c)?;
            let mut row = vec![num(c)];
            for &k in &kinds {
                row.push(num(run(k, &rho, &opts)?.overall_probability));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["C".to_string()];
    header.extend(kinds.iter().map(|k| format!("P_{}", k.name())));
    let manifest = RunManifest::new("mems", json!({"c_min": c_min, "c_max": c_max, "steps": steps, "protocols": kinds.iter().map(|k| k.name()).collect::<Vec<_>>()}), None);
    let markers = json!({"dejmps_threshold": 1.0 / 3.0, "m_minus_only_below": 2f64.sqrt() / 3.0, "mems_type_boundary": 2.0 / 3.0});
    write_csv(out, &manifest, &[format!("markers {markers}")], &header, &rows)?;
    manifest.write_sidecar(out, json!({"markers": markers}))?;
    Ok(())
}

fn rank3_grid(theta: f64, phi: f64, grid: usize, protocol: Protocol, out: &Path) -> Result<()> {
    if !(2..=2000).contains(&grid) {
        bail!("grid must be in [2, 2000]");
    }
    // Validates the angles.
    Rank3Params::new(0.5, 0.0, theta, phi)?;
    let kind: ProtocolKind = protocol.into();
    let s = theta.sin();
    let opts = Options64::default();
    let purities = linspace(1.0 / 3.0, 1.0, grid);
    let concurrences = linspace(0.0, s, grid);
    let cells: Vec<(f64, f64)> = purities.iter().flat_map(|&p| concurrences.iter().map(move |&c| (p, c))).collect();
    let rows: Vec<Vec<String>> = cells
        .into_par_iter()
        .map(|(p, c)| -> Result<Vec<String>> {
            let u = if s > 0.0 { c / s } else { 0.0 };
            let roots = if u <= 1.0 { rank3_preimages(p, u) } else { vec![] };
            if roots.is_empty() {
                return Ok(vec![num(p), num(c), "0".into(), String::new(), String::new()]);
            }
            let mut best: Option<(f64, bool)> = None;
            for (w, u) in roots {
                let rho = rank3(&Rank3Params::new(w, u, theta, phi)?);
                let r = run(kind, &rho, &opts)?;
                let cand = (r.overall_probability, r.purified());
                if best.is_none_or(|b| cand.0 > b.0) {
                    best = Some(cand);
                }
            }
            let (prob, ok) = best.expect("at least one root");
            Ok(vec![num(p), num(c), "1".into(), num(prob), (ok as u8).to_string()])
        })
        .collect::<Result<_>>()?;
    let header: Vec<String> = ["purity", "concurrence", "physical", "success_probability", "purifiable"].iter().map(|s| s.to_string()).collect();
    let manifest = RunManifest::new("rank3", json!({"theta": theta, "phi": phi, "grid": grid, "protocol": kind.name()}), None);
    write_csv(out, &manifest, &[], &header, &rows)?;
    manifest.write_sidecar(out, serde_json::Value::Null)?;
    Ok(())
}

fn parse_nr(s: &str) -> Result<NrMode> {
    match s.trim() {
        "uniform" => Ok(NrMode::UniformRandom1to4),
        x => {
            let n: u8 = x.parse().map_err(|_| anyhow!("nr-mode must be 1, 2, 3, 4 or uniform, got {x:?}"))?;
            Ok(NrMode::Fixed(n))
        }
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn ensemble(samples: usize, bins: usize, seed: u64, nr_mode: &str, protocols: &[Protocol], prefix: &str) -> Result<()> {
    let kinds: Vec<ProtocolKind> = protocols.iter().map(|&p| p.into()).collect();
    let cfg = EnsembleConfig { samples, bins, nr_mode: parse_nr(nr_mode)?, seed, protocols: kinds.clone() };
    cfg.validate()?;
    let rep = run_ensemble::<f64>(&cfg)?;
    let manifest = RunManifest::new(
        "ensemble",
        json!({"samples": samples, "bins": bins, "nr_mode": nr_mode, "protocols": kinds.iter().map(|k| k.name()).collect::<Vec<_>>()}),
        Some(seed),
    );
    let names: Vec<&str> = kinds.iter().map(|k| k.name()).collect();

    let hist_header: Vec<String> = ["c_low", "c_high", "count", "fraction"].iter().map(|s| s.to_string()).collect();
    let hist: Vec<Vec<String>> = rep
        .bins
        .iter()
        .map(|b| vec![num(b.c_low), num(b.c_high), b.count.to_string(), num(b.count as f64 / samples as f64)])
        .collect();

    let mut frac_header = vec!["c_center".to_string(), "count".to_string()];
    frac_header.extend(names.iter().map(|n| format!("f_{n}")));
    let frac: Vec<Vec<String>> = rep
        .bins
        .iter()
        .map(|b| {
            let mut r = vec![num(b.center()), b.count.to_string()];
            r.extend((0..kinds.len()).map(|k| opt_num(b.fraction_purifiable(k))));
            r
        })
        .collect();

    let mut avg_header = vec!["c_center".to_string(), "count".to_string()];
    avg_header.extend(names.iter().map(|n| format!("P_{n}")));
    avg_header.extend(names.iter().map(|n| format!("P_{n}_purifiable")));
    let avg: Vec<Vec<String>> = rep
        .bins
        .iter()
        .map(|b| {
            let mut r = vec![num(b.center()), b.count.to_string()];
            r.extend((0..kinds.len()).map(|k| opt_num(b.mean_success(k))));
            r.extend((0..kinds.len()).map(|k| opt_num(b.mean_success_purifiable(k))));
            r
        })
        .collect();

    for (name, header, rows) in [("hist.csv", &hist_header, &hist), ("fraction.csv", &frac_header, &frac), ("avgp.csv", &avg_header, &avg)] {
        let path = PathBuf::from(format!("{prefix}{name}"));
        write_csv(&path, &manifest, &[], header, rows)?;
        manifest.write_sidecar(&path, json!({"mean_concurrence": rep.mean_concurrence}))?;
    }
    println!("mean concurrence {}", num(rep.mean_concurrence));
    Ok(())
}

fn yields(pairs: usize, probs: Vec<f64>, mode: YieldMode, trials: usize, seed: u64, out: &Path) -> Result<()> {
    let cfg = YieldConfig { n_pairs: pairs, probs };
    cfg.validate()?;
    let exact = yield_pmf(cfg.n_pairs, &cfg.probs)?;
    let dists = match mode {
        YieldMode::Exact => exact.clone(),
        YieldMode::Mc => mc_yield(&cfg, trials, seed)?,
    };
    let rows: Vec<Vec<String>> = dists
        .iter()
        .flat_map(|d| d.pmf.iter().enumerate().map(move |(k, p)| vec![d.round.to_string(), k.to_string(), num(*p)]))
        .collect();
    let mut means = Vec::new();
    println!("round,mean,exact_mean,dominant_mean");
    for (d, e) in dists.iter().zip(&exact) {
        let dom = dominant_mean(cfg.n_pairs, &cfg.probs[..d.round]);
        println!("{},{},{},{}", d.round, num(d.mean()), num(e.mean()), num(dom));
        means.push(json!({"round": d.round, "mean": d.mean(), "exact_mean": e.mean(), "dominant_mean": dom}));
    }
    let (mode_name, seed) = match mode {
        YieldMode::Exact => ("exact", None),
        YieldMode::Mc => ("mc", Some(seed)),
    };
    let manifest = RunManifest::new("yield", json!({"pairs": cfg.n_pairs, "probs": cfg.probs, "mode": mode_name, "trials": trials}), seed);
    let header: Vec<String> = ["round", "k", "probability"].iter().map(|s| s.to_string()).collect();
    write_csv(out, &manifest, &[], &header, &rows)?;
    manifest.write_sidecar(out, json!({"means": means}))?;
    Ok(())
}
