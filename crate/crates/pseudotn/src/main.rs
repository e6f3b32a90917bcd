use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use pseudotn::ensembles::EnsembleSpec;
use pseudotn::spinmodel::rt_lower_bound;
use pseudotn::tngraph::{build_hyperbolic_64, build_staircase, min_cut, TensorNetworkGraph};
use pseudotn::xcli::{
    area_law_csv, area_law_profile, csv_f, distance_csv, lemma1_check, lemma2_sweep, oracle_csv,
    partition_oracle_rows, rt_report_csv, rt_verify, weingarten_check, weingarten_csv,
};
use pseudotn::{Error, Result};

/// Moment, entanglement, and min-cut experiments on random isometric tensor
/// networks. All results are CSV; identical config and seed reproduce
/// byte-identical output. Exit codes: 0 success, 1 assertion failure,
/// 2 configuration error.
#[derive(Parser)]
#[command(name = "pseudotn", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct GraphSource {
    /// Path to a graph description file.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Staircase circuit "L,NU" (L gates, bond dimension 2^NU).
    #[arg(long)]
    staircase: Option<String>,
    /// Hyperbolic {6,4} patch "LAYERS,CHI".
    #[arg(long)]
    hyperbolic: Option<String>,
}

impl GraphSource {
    fn load(&self) -> Result<TensorNetworkGraph> {
        if let Some(path) = &self.graph {
            let text = fs::read_to_string(path)?;
            return TensorNetworkGraph::parse(&text);
        }
        if let Some(spec) = &self.staircase {
            let (l, nu) = parse_pair(spec, "staircase")?;
            return build_staircase(l, nu);
        }
        if let Some(spec) = &self.hyperbolic {
            let (layers, chi) = parse_pair(spec, "hyperbolic")?;
            return build_hyperbolic_64(layers, chi as u64);
        }
        Err(Error::Config("no graph source given".into()))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Residuals of the Weingarten sum identities over a (copies, dim) grid.
    ///
    /// CSV columns: m, d, accepted, reason, s1_residual, s2_residual,
    /// s3_max_ratio_err, s3_sign_ok, s4_residual.
    WeingartenCheck {
        /// Copy counts m, comma-separated.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
        copies: Vec<usize>,
        /// Local dimensions d, comma-separated (default 3..16 plus 32, 64).
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact m-copy trace-norm distance between the Haar-gate staircase
    /// ensemble and globally Haar-random states, swept over bond dimension.
    ///
    /// CSV columns: chi, nu, l, n_qubits, m, distance, method, samples,
    /// stderr (blank for exact rows).
    MomentDistance {
        /// Staircase "L,NU" or sweep "L,A-B" over NU = A..B.
        #[arg(long)]
        staircase: String,
        /// Copy count m.
        #[arg(long, default_value_t = 2)]
        copies: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled PFC-gate moment against the exact Haar-gate moment on one
    /// staircase. At two copies the distance is asserted under five stderr.
    ///
    /// CSV columns: chi, nu, l, n_qubits, m, distance, method, samples,
    /// stderr.
    PfcDistance {
        /// Staircase "L,NU".
        #[arg(long)]
        staircase: String,
        /// Copy count m.
        #[arg(long, default_value_t = 2)]
        copies: usize,
        /// Number of sampled states.
        #[arg(long)]
        samples: u64,
        /// Master seed for the sample stream.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prefix-cut entropy profile of a staircase with Page-curve reference
    /// columns.
    ///
    /// CSV columns: l, nu, samples, cut, mean_bits, stderr_bits,
    /// page_mean_bits, page_stderr_bits.
    AreaLaw {
        /// Staircase "L,NU".
        #[arg(long)]
        staircase: String,
        /// Gate ensemble: haar, clifford, pfc, or pfc:keyed.
        #[arg(long, default_value = "haar")]
        ensemble: String,
        /// Number of sampled states.
        #[arg(long)]
        samples: usize,
        /// Master seed for the sample stream.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Min-cut bits, exact partition lower bound, and sampled mean
    /// entanglement entropy of one region, with the sandwich
    /// lower − 3σ ≤ mean ≤ mincut asserted.
    ///
    /// CSV columns: region, mincut_bits, cut_cardinality,
    /// rt_lower_bound_bits, mean_entropy_bits, stderr_bits, samples, chi,
    /// newton_4_over_ln_chi, newton_4_over_log2_chi, sandwich_ok.
    RtVerify {
        #[command(flatten)]
        source: GraphSource,
        /// Output vertex ids forming the region, comma-separated.
        #[arg(long)]
        region: String,
        /// Gate ensemble: haar, clifford, pfc, or pfc:keyed.
        #[arg(long, default_value = "haar")]
        ensemble: String,
        /// Number of sampled states (at least 2).
        #[arg(long)]
        samples: u64,
        /// Master seed for the sample stream.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check of the two exact moment pipelines (sequential twirl vs
    /// partition sum) over the fixed suite of small graphs.
    ///
    /// CSV columns: name, m, total_dim, max_abs_diff, trace_twirl,
    /// trace_partition, pass.
    PartitionOracle {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural validation and shape report for a graph, with optional
    /// region min-cut.
    ///
    /// CSV columns: property, value (one row per property; commas in
    /// violation messages are replaced by semicolons).
    GraphValidate {
        #[command(flatten)]
        source: GraphSource,
        /// Output vertex ids forming a region, comma-separated.
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pair(s: &str, what: &str) -> Result<(usize, usize)> {
    let mut it = s.split(',');
    let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
        return Err(Error::Config(format!(
            "{what} wants two comma-separated integers, got {s:?}"
        )));
    };
    let a = a
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: bad integer {a:?}")))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{what}: bad integer {b:?}")))?;
    Ok((a, b))
}

fn parse_sweep(s: &str) -> Result<(usize, Vec<usize>)> {
    let mut it = s.split(',');
    let (Some(l), Some(nu), None) = (it.next(), it.next(), it.next()) else {
        return Err(Error::Config(format!(
            "staircase wants \"L,NU\" or \"L,A-B\", got {s:?}"
        )));
    };
    let l = l
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("staircase: bad integer {l:?}")))?;
    let nu = nu.trim();
    let nus = if let Some((a, b)) = nu.split_once('-') {
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("staircase: bad integer {a:?}")))?;
        let b: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("staircase: bad integer {b:?}")))?;
        if a > b {
            return Err(Error::Config(format!("staircase: empty range {nu:?}")));
        }
        (a..=b).collect()
    } else {
        vec![nu
            .parse()
            .map_err(|_| Error::Config(format!("staircase: bad integer {nu:?}")))?]
    };
    Ok((l, nus))
}

fn parse_region(s: &str) -> Result<BTreeSet<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Config(format!("region: bad vertex id {t:?}")))
        })
        .collect()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn graph_validate_csv(
    g: &TensorNetworkGraph,
    region: &Option<BTreeSet<usize>>,
) -> Result<(String, bool)> {
    let report = g.validate();
    let shape = g.system_shape();
    let mut s = String::from("property,value\n");
    writeln!(s, "valid,{}", report.ok()).expect("string write");
    for v in &report.violations {
        writeln!(s, "violation,{}", v.replace(',', ";")).expect("string write");
    }
    writeln!(s, "n_outputs,{}", shape.n_outputs).expect("string write");
    writeln!(s, "n_unitaries,{}", shape.n_unitaries).expect("string write");
    writeln!(s, "total_dim,{}", shape.total_dim).expect("string write");
    writeln!(s, "effective_qubits,{}", csv_f(shape.effective_qubits)).expect("string write");
    if let Some(region) = region {
        if !report.ok() {
            return Err(Error::Config(
                "region analysis needs a valid graph".into(),
            ));
        }
        let region_vec: Vec<usize> = region.iter().copied().collect();
        let cut = min_cut(g, &region_vec)?;
        let ids = region_vec
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writeln!(s, "region,{ids}").expect("string write");
        writeln!(s, "mincut_bits,{}", cut.weight_bits).expect("string write");
        writeln!(s, "cut_cardinality,{}", cut.cardinality).expect("string write");
        if let Ok(rt) = rt_lower_bound(g, region) {
            writeln!(s, "rt_lower_bound_bits,{}", csv_f(rt)).expect("string write");
        }
    }
    Ok((s, report.ok()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::WeingartenCheck { copies, dims, out } => {
            let dims = dims.unwrap_or_else(|| (3..=16).chain([32, 64]).collect());
            let rows = weingarten_check(&copies, &dims)?;
            emit(&out, &weingarten_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::MomentDistance { staircase, copies, out } => {
            let (l, nus) = parse_sweep(&staircase)?;
            let records = lemma2_sweep(l, &nus, copies)?;
            emit(&out, &distance_csv(&records))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::PfcDistance { staircase, copies, samples, seed, out } => {
            let (l, nu) = parse_pair(&staircase, "staircase")?;
            let record = lemma1_check(l, nu, copies, samples, seed)?;
            emit(&out, &distance_csv(&[record]))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::AreaLaw { staircase, ensemble, samples, seed, out } => {
            let (l, nu) = parse_pair(&staircase, "staircase")?;
            let spec = EnsembleSpec::from_str(&ensemble)?;
            let report = area_law_profile(l, nu, spec, samples, seed)?;
            emit(&out, &area_law_csv(&report))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::RtVerify { source, region, ensemble, samples, seed, out } => {
            let g = source.load()?;
            let region = parse_region(&region)?;
            let spec = EnsembleSpec::from_str(&ensemble)?;
            let report = rt_verify(&g, &region, spec, samples, seed)?;
            emit(&out, &rt_report_csv(&report))?;
            if report.sandwich_ok {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "sandwich violated: lower {} bits, mean {} bits, mincut {} bits",
                    report.rt_lower_bound_bits, report.mean_entropy_bits, report.mincut_bits
                );
                Ok(ExitCode::from(1))
            }
        }
        Cmd::PartitionOracle { out } => {
            let rows = partition_oracle_rows()?;
            let all_pass = rows.iter().all(|r| r.pass);
            emit(&out, &oracle_csv(&rows))?;
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("pipelines disagree beyond 1e-8");
                Ok(ExitCode::from(1))
            }
        }
        Cmd::GraphValidate { source, region, out } => {
            let g = source.load()?;
            let region = region.as_deref().map(parse_region).transpose()?;
            let (text, ok) = graph_validate_csv(&g, &region)?;
            emit(&out, &text)?;
            if ok {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("graph is invalid");
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Simulation(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
