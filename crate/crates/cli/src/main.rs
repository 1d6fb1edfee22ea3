//! `exchpoly` command-line front-end.
//!
//! Results go to standard output (or `--output`), diagnostics to standard
//! error. Exit status: 0 on success, 2 on usage errors, 1 on computation or
//! I/O errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exchpoly::geometry::{linear_grid, triangulate_class};
use exchpoly::inference::{
    glr_test, loglik, mle_fixed_p, mle_unconstrained, CountData, NullHypothesis,
};
use exchpoly::measures::{correlation_bounds, ray_extrema, MeasureDistribution, MeasureSpec};
use exchpoly::pex::{pex_rays, PartitionSpec};
use exchpoly::rays::{enumerate_rays, ExchangeablePmf, MixtureWeights, RayDensity, SumPmf};
use exchpoly::sampling::{
    beta_mixture_params, empirical_measure_distribution, random_weights, sample_beta_mixture,
    sample_mixture, sample_one_factor, sample_uniform_pmfs, CorrelationFamily, SampleBatch,
    SampleMode, SUM_ONLY_DEFAULT_ABOVE,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Offset applied to `--seed` when drawing Dirichlet mixture weights, so the
/// weights never share a random stream with the draws.
const LAMBDA_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Parser)]
#[command(
    name = "exchpoly",
    version,
    about = "Exchangeable Bernoulli polytopes: rays, measures, sampling, inference"
)]
struct Cli {
    /// Write results to this file instead of standard output.
    #[arg(short, long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extremal rays of S_d(p).
    Rays {
        #[command(flatten)]
        class: Class,
        /// Emit JSON (default).
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        /// Emit CSV with columns ray,y,mass.
        #[arg(long)]
        csv: bool,
    },
    /// Triangulation of S_d(p) (or of S_d without --p): simplices, volumes, selection probabilities.
    Triangulate {
        #[command(flatten)]
        class: OptClass,
    },
    /// Exact CDF (and optionally PDF) of an expectation measure over the uniform law on E_d(p).
    MeasureCdf {
        #[command(flatten)]
        class: OptClass,
        #[command(flatten)]
        measure: MeasureArg,
        /// Number of equally spaced grid points spanning the support.
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Add a central-difference density column f.
        #[arg(long)]
        pdf: bool,
        /// Half-width of the central difference (default: support width / 1000).
        #[arg(long, requires = "pdf")]
        delta: Option<f64>,
    },
    /// Empirical CDF of any measure under uniform sampling from E_d(p); CSV t,F.
    MeasureDist {
        #[command(flatten)]
        class: OptClass,
        #[command(flatten)]
        measure: MeasureArg,
        /// Number of uniformly drawn pmfs.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Correlation bounds of E_d(p), or the extremes of a measure over its rays.
    Bounds {
        #[command(flatten)]
        class: Class,
        /// Measure whose ray extremes to report instead of the correlation bounds.
        #[arg(long, value_name = "MEASURE")]
        measure: Option<MeasureSpec>,
    },
    /// Evaluate a measure on one pmf read from JSON.
    Measure {
        /// JSON file: an array of sum probabilities p_0..p_d, {"probs": [...]}, or {"f": [...]} with
        /// exchangeable values f_0..f_d.
        #[arg(long, value_name = "FILE")]
        pmf: PathBuf,
        #[command(flatten)]
        measure: MeasureArg,
    },
    /// Draw binary vectors from a mixture of rays or a comparison model.
    ///
    /// Full mode writes one 0/1 row per draw; sum-only mode writes a "y,count"
    /// header followed by one line per observed sum. Sum-only is the default
    /// above d = 10000.
    Sample(SampleArgs),
    /// Pmfs drawn uniformly from S_d(p), or from S_d without --p; JSON array of sum pmfs.
    UniformSample {
        #[command(flatten)]
        class: OptClass,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Maximum-likelihood exchangeable pmf, optionally with a fixed mean.
    Mle {
        #[command(flatten)]
        data: DataArgs,
        /// Fix the Bernoulli mean; also reports mixture weights over the rays.
        #[arg(long, value_parser = probability)]
        p: Option<f64>,
    },
    /// Likelihood-ratio test of exchangeability.
    GlrTest {
        #[command(flatten)]
        data: DataArgs,
        /// Null hypothesis: exchangeable, or exchangeable with mean --p.
        #[arg(long, value_enum)]
        h0: H0,
        /// Bernoulli mean under exch-p.
        #[arg(long, required_if_eq("h0", "exch-p"), value_parser = probability)]
        p: Option<f64>,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Extremal points of a partially exchangeable class with given group means.
    PexRays {
        /// Dimension.
        #[arg(long, value_parser = dimension)]
        d: usize,
        /// Partition of 1..d, groups separated by '|', e.g. "1,2|3,4".
        #[arg(long)]
        groups: String,
        /// Comma-separated Bernoulli mean of each group.
        #[arg(long, value_delimiter = ',')]
        means: Vec<f64>,
    },
}

#[derive(Args)]
struct Class {
    /// Dimension.
    #[arg(long, value_parser = dimension)]
    d: usize,
    /// Bernoulli mean, in (0, 1).
    #[arg(long, value_parser = probability)]
    p: f64,
}

#[derive(Args)]
struct OptClass {
    /// Dimension.
    #[arg(long, value_parser = dimension)]
    d: usize,
    /// Bernoulli mean; omit for the whole exchangeable simplex.
    #[arg(long, value_parser = probability)]
    p: Option<f64>,
}

#[derive(Args)]
struct MeasureArg {
    /// moment:K (cross moment), raw:K, entropic:GAMMA, excess:K, quantile:ALPHA, entropy or correlation.
    #[arg(long)]
    measure: MeasureSpec,
}

#[derive(Args)]
struct DataArgs {
    /// CSV of 0/1 observations, one per row.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Skip a header line.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    class: Class,
    /// JSON weights over the rays (array, or {"lambda": [...]}), in `rays` order.
    #[arg(long, value_name = "FILE", group = "law")]
    lambda: Option<PathBuf>,
    /// Uniformly random (flat Dirichlet) weights over the rays.
    #[arg(long, group = "law")]
    dirichlet: bool,
    /// Target correlation; alone it selects the two-ray family, with --model the model's correlation.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["lambda", "dirichlet"])]
    rho: Option<f64>,
    /// Comparison model instead of a ray mixture (needs --rho > 0).
    #[arg(long, value_enum, group = "law", requires = "rho")]
    model: Option<Model>,
    /// Number of draws.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Emit only the histogram of sums.
    #[arg(long, conflicts_with = "full")]
    sum_only: bool,
    /// Emit full rows even above d = 10000.
    #[arg(long)]
    full: bool,
}

fn dimension(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(d) if d >= 1 => Ok(d),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn probability(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(p) if p > 0.0 && p < 1.0 => Ok(p),
        _ => Err(format!(
            "expected a number strictly between 0 and 1, got {s:?}"
        )),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    OneFactor,
    Beta,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum H0 {
    Exch,
    ExchP,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] exchpoly::Error),
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn input(path: &Path, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        CliError::Input {
            path: path.to_owned(),
            source: source.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Serialize)]
struct RayJson {
    support: Vec<usize>,
    mass: Vec<f64>,
}

impl From<&RayDensity> for RayJson {
    fn from(r: &RayDensity) -> Self {
        RayJson {
            support: r.support(),
            mass: r.masses(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PmfFile {
    Probs(Vec<f64>),
    Sum { probs: Vec<f64> },
    Exchangeable { f: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LambdaFile {
    Bare(Vec<f64>),
    Named { lambda: Vec<f64> },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_reader(io::BufReader::new(file)).map_err(|e| CliError::input(path, e))
}

fn read_rows(path: &Path, header: bool) -> CliResult<Vec<Vec<u8>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(path, e))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(path, e))?;
        let row = record
            .iter()
            .map(|v| match v {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(CliError::input(
                    path,
                    format!("record {}: expected 0 or 1, found {other:?}", i + 1),
                )),
            })
            .collect::<CliResult<Vec<u8>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(path, "no observations"));
    }
    Ok(rows)
}

fn write_json(out: &mut dyn Write, value: &impl Serialize) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn write_batch(out: &mut dyn Write, batch: &SampleBatch) -> CliResult<()> {
    match batch.rows() {
        Some(_) => {
            let mut line = String::with_capacity(2 * batch.d());
            for i in 0..batch.n() {
                line.clear();
                for (k, bit) in batch.dense_row(i).expect("full mode").iter().enumerate() {
                    if k > 0 {
                        line.push(',');
                    }
                    line.push(if *bit == 1 { '1' } else { '0' });
                }
                writeln!(out, "{line}")?;
            }
        }
        None => {
            writeln!(out, "y,count")?;
            for (y, c) in batch
                .sum_counts()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
            {
                writeln!(out, "{y},{c}")?;
            }
        }
    }
    Ok(())
}

fn sample(args: &SampleArgs, out: &mut dyn Write) -> CliResult<()> {
    let SampleArgs {
        class: Class { d, p },
        n,
        seed,
        ..
    } = *args;
    let mode = if args.sum_only || (!args.full && d > SUM_ONLY_DEFAULT_ABOVE) {
        SampleMode::SumOnly
    } else {
        SampleMode::Full
    };
    let batch = if let Some(model) = args.model {
        let rho = args.rho.expect("clap enforces --rho with --model");
        match model {
            Model::OneFactor => sample_one_factor(d, p, rho, n, seed, mode)?,
            Model::Beta => {
                let (a, b) = beta_mixture_params(p, rho)?;
                sample_beta_mixture(d, a, b, n, seed, mode)?
            }
        }
    } else if let Some(path) = &args.lambda {
        let w = match read_json::<LambdaFile>(path)? {
            LambdaFile::Bare(w) | LambdaFile::Named { lambda: w } => w,
        };
        sample_mixture(d, p, &MixtureWeights::new(w)?, n, seed, mode)?
    } else if args.dirichlet {
        let k = enumerate_rays(d, p)?.len();
        let w = random_weights(k, seed.wrapping_add(LAMBDA_SEED_OFFSET))?;
        sample_mixture(d, p, &w, n, seed, mode)?
    } else if let Some(rho) = args.rho {
        CorrelationFamily::new(d, p, rho)?.sample(n, seed, mode)?
    } else {
        return usage("sample needs one of --lambda, --dirichlet, --rho or --model");
    };
    write_batch(out, &batch)
}

fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Rays { class, csv, .. } => {
            let rays = enumerate_rays(class.d, class.p)?;
            if csv {
                writeln!(out, "ray,y,mass")?;
                for (i, r) in rays.iter().enumerate() {
                    for (y, m) in r.atoms() {
                        writeln!(out, "{i},{y},{m}")?;
                    }
                }
                Ok(())
            } else {
                let rays: Vec<RayJson> = rays.iter().map(RayJson::from).collect();
                write_json(out, &json!({ "d": class.d, "p": class.p, "rays": rays }))
            }
        }
        Command::Triangulate { class } => {
            let t = triangulate_class(class.d, class.p)?;
            let vertices: Vec<&[f64]> = t.vertices.iter().map(SumPmf::probs).collect();
            write_json(
                out,
                &json!({
                    "d": class.d,
                    "p": class.p,
                    "vertices": vertices,
                    "simplices": t.triangulation.simplices(),
                    "volumes": t.triangulation.volumes(),
                    "probs": t.triangulation.probs(),
                }),
            )
        }
        Command::MeasureCdf {
            class,
            measure,
            grid,
            pdf,
            delta,
        } => {
            if grid < 2 {
                return usage("--grid needs at least 2 points");
            }
            let dist = MeasureDistribution::new(class.d, class.p, measure.measure)?;
            let (lo, hi) = dist.support();
            let ts = linear_grid(lo, hi, grid);
            let cdf = dist.tabulate(&ts)?;
            let density = if pdf {
                Some(dist.pdf(&ts, delta.unwrap_or_else(|| dist.default_delta()))?)
            } else {
                None
            };
            writeln!(out, "{}", if pdf { "t,F,f" } else { "t,F" })?;
            for (i, (t, f)) in ts.iter().zip(&cdf.values).enumerate() {
                match &density {
                    Some(den) => writeln!(out, "{t},{f},{}", den[i])?,
                    None => writeln!(out, "{t},{f}")?,
                }
            }
            Ok(())
        }
        Command::MeasureDist {
            class,
            measure,
            n,
            seed,
        } => {
            let cdf = empirical_measure_distribution(class.d, class.p, measure.measure, n, seed)?;
            writeln!(out, "t,F")?;
            for (t, f) in cdf.grid.iter().zip(&cdf.values) {
                writeln!(out, "{t},{f}")?;
            }
            Ok(())
        }
        Command::Bounds { class, measure } => match measure {
            None => {
                let (lo, hi) = correlation_bounds(class.d, class.p)?;
                write_json(
                    out,
                    &json!({ "d": class.d, "p": class.p, "rho_min": lo, "rho_max": hi }),
                )
            }
            Some(spec) => {
                let (lo, hi) = ray_extrema(class.d, class.p, spec)?;
                write_json(
                    out,
                    &json!({ "d": class.d, "p": class.p, "measure": spec.to_string(), "min": lo, "max": hi }),
                )
            }
        },
        Command::Measure { pmf, measure } => {
            let py = match read_json::<PmfFile>(&pmf)? {
                PmfFile::Probs(v) | PmfFile::Sum { probs: v } => SumPmf::new(v)?,
                PmfFile::Exchangeable { f } => ExchangeablePmf::new(f)?.to_sum_pmf(),
            };
            let spec = measure.measure;
            let value = spec.evaluate(&py)?;
            write_json(
                out,
                &json!({ "d": py.d(), "measure": spec.to_string(), "value": value }),
            )
        }
        Command::Sample(args) => sample(&args, out),
        Command::UniformSample { class, n, seed } => {
            let pmfs = sample_uniform_pmfs(class.d, class.p, n, seed)?;
            let probs: Vec<&[f64]> = pmfs.iter().map(SumPmf::probs).collect();
            write_json(out, &probs)
        }
        Command::Mle { data, p } => {
            let counts = CountData::from_rows(&read_rows(&data.data, data.header)?)?;
            match p {
                None => {
                    let f = mle_unconstrained(&counts)?;
                    let ll = loglik(&counts, &f);
                    write_json(
                        out,
                        &json!({ "d": counts.d(), "n": counts.n(), "f_hat": f.values(), "loglik": ll }),
                    )
                }
                Some(p) => {
                    let mle = mle_fixed_p(&counts, p)?;
                    let f = mle.exchangeable();
                    let lambda: Vec<_> = mle
                        .components
                        .iter()
                        .map(|(r, w)| json!({ "support": r.support(), "mass": r.masses(), "weight": w }))
                        .collect();
                    write_json(
                        out,
                        &json!({
                            "d": counts.d(),
                            "n": counts.n(),
                            "p": p,
                            "f_hat": f.values(),
                            "lambda_hat": lambda,
                            "loglik": loglik(&counts, &f),
                        }),
                    )
                }
            }
        }
        Command::GlrTest { data, h0, p, alpha } => {
            let counts = CountData::from_rows(&read_rows(&data.data, data.header)?)?;
            let null = match (h0, p) {
                (H0::Exch, None) => NullHypothesis::Exchangeable,
                (H0::ExchP, Some(p)) => NullHypothesis::ExchangeableWithMean(p),
                (H0::Exch, Some(_)) => return usage("--p only applies to --h0 exch-p"),
                (H0::ExchP, None) => return usage("--h0 exch-p needs --p"),
            };
            let r = glr_test(&counts, null, alpha)?;
            write_json(
                out,
                &json!({
                    "d": counts.d(),
                    "n": counts.n(),
                    "h0": if h0 == H0::Exch { "exch" } else { "exch-p" },
                    "p": p,
                    "lambda": r.lambda_stat,
                    "neg2log": r.neg2log,
                    "df": r.df,
                    "p_value": r.p_value,
                    "alpha": r.alpha,
                    "reject": r.reject,
                    "min_expected_count": r.min_expected_count,
                    "warning": r.warning,
                }),
            )
        }
        Command::PexRays { d, groups, means } => {
            let spec =
                PartitionSpec::parse(d, &groups).map_err(|e| CliError::Usage(e.to_string()))?;
            if means.len() != spec.num_groups() {
                return usage(format!(
                    "{} means given for {} groups",
                    means.len(),
                    spec.num_groups()
                ));
            }
            let rays: Vec<_> = pex_rays(&spec, &means)?
                .iter()
                .map(|r| {
                    let support = r.support();
                    let cells: Vec<Vec<usize>> = support.iter().map(|&i| r.cell(i)).collect();
                    let mass: Vec<f64> = support.iter().map(|&i| r.probs()[i]).collect();
                    json!({ "support": cells, "mass": mass })
                })
                .collect();
            write_json(
                out,
                &json!({ "d": d, "groups": spec.to_string(), "means": means, "grid_shape": spec.grid_shape(), "rays": rays }),
            )
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("EXCHPOLY_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        CliError::Usage(format!(
            "EXCHPOLY_THREADS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    // 0 keeps rayon's automatic choice.
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let mut out: BufWriter<Box<dyn Write>> = BufWriter::new(match &cli.output {
            Some(path) => Box::new(File::create(path).map_err(|e| CliError::input(path, e))?),
            None => Box::new(io::stdout().lock()),
        });
        run(cli, &mut out)?;
        out.flush()?;
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
