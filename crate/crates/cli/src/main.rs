use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stylized_facts::crosssection::{hierarchical_cluster, stylized_distance_matrix};
use stylized_facts::dexarb::{
    band_violations, count_price_changes, lead_lag_xcorr, simulate_arb_pool, FeeTier,
};
use stylized_facts::facts::{FactColumn, StylizedFactsRow};
use stylized_facts::ingestion::{parse_candles, parse_timestamp, to_price_series, CandleSchema, Fetcher, FetchOptions, PriceField};
use stylized_facts::report::{build_report, compute_row, emit_plot_data, load_prices, run_report, CalendarChoice, RunConfig, FIGURES};
use stylized_facts::timeseries::{log_returns, PriceSeries, SessionCalendar};

type CliResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

/// Stylized facts of asset returns: ingestion, per-asset statistics,
/// cross-sectional structure and DEX arbitrage checks.
#[derive(Parser, Debug)]
#[command(name = "stylized", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// run configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// start of the date window (epoch seconds, YYYY-MM-DD or RFC 3339)
    #[arg(long, global = true)]
    from: Option<String>,
    /// end of the date window, exclusive
    #[arg(long, global = true)]
    to: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory or file
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// never touch the network, cache only
    #[arg(long, global = true)]
    offline: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch every configured source into the candle cache
    Ingest,
    /// Stylized-facts row of one asset
    Row(RowArgs),
    /// Full report bundle: rows, cross-sectional data, figures, manifest
    Report,
    /// Data behind one figure
    Plotdata {
        #[arg(long)]
        figure: String,
    },
    /// Complete-linkage clustering of a rows table
    Cluster(ClusterArgs),
    /// No-arbitrage band and lead-lag checks of a pool against a reference
    Dexarb(DexArgs),
}

#[derive(Args, Debug)]
struct RowArgs {
    /// asset id (from the config, or the label for --input)
    #[arg(long)]
    asset: String,
    /// canonical candle CSV instead of a configured source
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "continuous", value_parser = parse_calendar)]
    calendar: CalendarChoice,
    #[arg(long, default_value = "")]
    sector: String,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    /// rows table written by `report`
    #[arg(long)]
    rows: PathBuf,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long)]
    include_zeros: bool,
}

#[derive(Args, Debug)]
struct DexArgs {
    /// reference (CEX) candles, canonical CSV
    #[arg(long)]
    reference: PathBuf,
    /// pool candles; simulated from the reference when absent
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    fee_bps: f64,
    /// lead-lag sampling interval in seconds
    #[arg(long, default_value_t = 600)]
    sample_seconds: i64,
    #[arg(long, default_value_t = 10)]
    max_lag: usize,
    #[arg(long)]
    centered: bool,
}

fn parse_calendar(s: &str) -> std::result::Result<CalendarChoice, String> {
    match s {
        "continuous" => Ok(CalendarChoice::Continuous),
        "us_equity" => Ok(CalendarChoice::UsEquity),
        "fx" => Ok(CalendarChoice::Fx),
        other => Err(format!("unknown calendar {other}; use continuous, us_equity or fx")),
    }
}

fn calendar(c: CalendarChoice) -> SessionCalendar {
    match c {
        CalendarChoice::Continuous => SessionCalendar::continuous(),
        CalendarChoice::UsEquity => SessionCalendar::us_equity([]),
        CalendarChoice::Fx => SessionCalendar::fx([]),
    }
}

/// ALLOW_NETWORK=1 or true enables fetching unless --offline is given.
fn env_allows_network() -> bool {
    std::env::var("ALLOW_NETWORK").is_ok_and(|v| v == "1" || v.eq_ignore_ascii_case("true"))
}

fn load_config(c: &Common) -> CliResult<RunConfig> {
    let path = c.config.as_ref().ok_or("--config is required for this command")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(f) = &c.from {
        cfg.window.from = Some(parse_timestamp(f)?);
    }
    if let Some(t) = &c.to {
        cfg.window.to = Some(parse_timestamp(t)?);
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        if cfg.cache_dir.is_none() {
            cfg.cache_dir = Some(cfg.cache_dir());
        }
        cfg.output_dir = o.clone();
    }
    cfg.allow_network = !c.offline && (cfg.allow_network || env_allows_network());
    Ok(cfg)
}

fn read_prices(path: &Path, id: &str) -> CliResult<PriceSeries> {
    let parsed = parse_candles(path, &CandleSchema::canonical())?;
    Ok(to_price_series(id, &parsed.records, PriceField::Close, None)?.series)
}

/// Text to `--out` when given, stdout otherwise.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn rows_csv(rows: &[StylizedFactsRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(StylizedFactsRow::header())?;
    for r in rows {
        w.write_record(r.to_record())?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Exit status 0 on success, 2 when some assets failed.
fn run(cli: Cli) -> CliResult<u8> {
    let c = &cli.common;
    match cli.command {
        Command::Ingest => {
            let cfg = load_config(c)?;
            cfg.validate()?;
            let fetcher = Fetcher::new(FetchOptions::new(cfg.cache_dir(), cfg.allow_network))?;
            let mut status = 0;
            for s in &cfg.sources {
                match fetcher.load(&s.source) {
                    Ok(r) => {
                        println!(
                            "{}: {} candles, partial={}, missing={}, duplicates={}, rejected={}, cached={}",
                            s.asset_id,
                            r.records.len(),
                            r.partial,
                            r.missing,
                            r.duplicates,
                            r.rejected,
                            r.from_cache
                        );
                        if r.partial {
                            status = 2;
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", s.asset_id);
                        status = 2;
                    }
                }
            }
            Ok(status)
        }
        Command::Row(args) => {
            let window = |p: PriceSeries, cfg: Option<&RunConfig>| {
                let from = c.from.as_deref().map(parse_timestamp).transpose()?;
                let to = c.to.as_deref().map(parse_timestamp).transpose()?;
                let (f, t) = match cfg {
                    Some(cfg) => (from.or(cfg.window.from), to.or(cfg.window.to)),
                    None => (from, to),
                };
                Ok::<_, stylized_facts::Error>(p.window(f, t))
            };
            let row = if let Some(input) = &args.input {
                let p = window(read_prices(input, &args.asset)?, None)?;
                let analysis = match &c.config {
                    Some(_) => load_config(c)?.analysis,
                    None => Default::default(),
                };
                compute_row(&args.asset, &args.sector, &p, &calendar(args.calendar), &analysis)?
            } else {
                let mut cfg = load_config(c)?;
                cfg.sources.retain(|s| s.asset_id == args.asset);
                if cfg.sources.is_empty() {
                    return Err(format!("asset {} is not in the config", args.asset).into());
                }
                let (src, prices) = load_prices(&cfg)?.remove(0);
                let p = window(prices?, Some(&cfg))?;
                compute_row(&src.asset_id, &src.sector, &p, &src.session_calendar(), &cfg.analysis)?
            };
            emit(c.out.as_deref(), &rows_csv(&[row])?)?;
            Ok(0)
        }
        Command::Report => {
            let cfg = load_config(c)?;
            let outcome = run_report(&cfg)?;
            let failed = outcome.report.failed();
            println!(
                "wrote {} rows ({} failed) to {}",
                outcome.report.assets.len(),
                failed.len(),
                outcome.dir.display()
            );
            for f in failed {
                eprintln!("{}: {}", f.source.asset_id, f.analysis.as_ref().err().map_or("", |s| s));
            }
            Ok(if outcome.is_partial() { 2 } else { 0 })
        }
        Command::Plotdata { figure } => {
            if !FIGURES.contains(&figure.as_str()) {
                return Err(format!("unknown figure `{figure}`; available: {}", FIGURES.join(", ")).into());
            }
            let cfg = load_config(c)?;
            let loaded = load_prices(&cfg)?;
            let report = build_report(&cfg, &loaded, &cfg.window);
            let dir = c.out.clone().unwrap_or_else(|| cfg.output_dir.join("plots"));
            for p in emit_plot_data(&report, &figure, &dir)? {
                println!("{}", p.display());
            }
            Ok(if report.failed().is_empty() { 0 } else { 2 })
        }
        Command::Cluster(args) => {
            let mut reader = csv::Reader::from_path(&args.rows)?;
            let mut rows = Vec::new();
            for rec in reader.records() {
                let rec = rec?;
                let fields: Vec<&str> = rec.iter().collect();
                rows.push(StylizedFactsRow::from_record(&fields)?);
            }
            let dist = stylized_distance_matrix(&rows, &FactColumn::clustering_default(args.include_zeros))?;
            let cl = hierarchical_cluster(&dist, args.k)?;
            let mut s = String::from("asset,cluster,leaf_position\n");
            for (pos, &i) in cl.leaf_order.iter().enumerate() {
                s.push_str(&format!("{},{},{pos}\n", dist.labels[i], cl.labels[i]));
            }
            emit(c.out.as_deref(), &s)?;
            Ok(0)
        }
        Command::Dexarb(args) => {
            let tier = FeeTier::from_bps(args.fee_bps)?;
            let reference = read_prices(&args.reference, "ref")?;
            let pool = match &args.pool {
                Some(p) => read_prices(p, "pool")?,
                None => simulate_arb_pool(&reference, tier, None)?,
            };
            let events = band_violations(&pool, &reference, tier)?;
            let sample = |p: &PriceSeries| {
                let pts = p.points().iter().copied().filter(|(t, _)| t % args.sample_seconds == 0).collect();
                PriceSeries::new(p.asset_id(), args.sample_seconds, pts).and_then(|s| log_returns(&s, args.sample_seconds))
            };
            let curve = lead_lag_xcorr(&sample(&reference)?, &sample(&pool)?, args.max_lag, args.centered)?;
            let mut s = format!(
                "# fee_bps={} band_violations={} reference_changes={} pool_changes={}\n",
                args.fee_bps,
                events.len(),
                count_price_changes(&reference),
                count_price_changes(&pool)
            );
            s.push_str("# positive lag: reference leads pool\nlag,corr,stderr,significant\n");
            for (i, k) in curve.lags.iter().enumerate() {
                let sig = curve.significant_at(*k).unwrap_or(false);
                s.push_str(&format!("{k},{},{},{}\n", curve.values[i], curve.stderr[i], sig as u8));
            }
            emit(c.out.as_deref(), &s)?;
            Ok(if events.is_empty() { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
