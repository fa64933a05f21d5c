//! Command-line front-end wiring ingestion, clustering, and estimation
//! into reproducible batch runs with manifest-logged outputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gravnet::cluster::{agglomerate, build_distance, cut};
use gravnet::error::{Error, Result};
use gravnet::ingest::{
    apply_crosswalk, build_availability, clean_rail, most_recent_year, read_rail_csv_path,
    Crosswalk,
};
use gravnet::manifest::RunManifest;
use gravnet::regress::config::TableConfig;
use gravnet::regress::report::render_table;
use gravnet::regress::{build_design, drop_separated, ols_fit, ppml_fit, Family, FitResult};
use gravnet::table::{DyadTable, SciMatrix};
use gravnet::RegionId;

#[derive(Parser)]
#[command(name = "gravnet", version, about = "Dyadic network econometrics toolkit")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and harmonize raw passenger-rail reports.
    EtlRail(EtlRailArgs),
    /// Cluster regions by connectedness and cut at the requested sizes.
    Cluster(ClusterArgs),
    /// Fit the regression columns described by a model config.
    Fit(FitArgs),
}

#[derive(Args)]
struct EtlRailArgs {
    /// Raw rail CSV: reporter,year,i,j,passengers (empty = missing).
    #[arg(long)]
    raw: PathBuf,
    /// Optional region crosswalk CSV: old,new,population_share.
    #[arg(long)]
    crosswalk: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// SCI dyad CSV with a single measure column.
    #[arg(long)]
    sci: PathBuf,
    /// Comma-separated community counts to cut at, e.g. 20,50.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Model table config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::EtlRail(args) => cmd_etl_rail(args, cli.quiet),
        Command::Cluster(args) => cmd_cluster(args, cli.quiet),
        Command::Fit(args) => cmd_fit(args, cli.quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gravnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_etl_rail(args: &EtlRailArgs, quiet: bool) -> Result<()> {
    let reports = read_rail_csv_path(&args.raw)?;
    if reports.is_empty() {
        return Err(Error::validation("no reports in the raw rail file"));
    }
    let availability = build_availability(&reports);

    // universe: every usable region code in the file; bare country codes
    // stand in for single-region countries unless sibling regions exist
    let mut regions: BTreeSet<RegionId> = BTreeSet::new();
    for r in &reports {
        for code in [&r.i, &r.j] {
            let c = code.code();
            if c.ends_with("XX") || c.ends_with("ZZ") {
                continue;
            }
            regions.insert(code.clone());
        }
    }
    let with_subregions: BTreeSet<String> = regions
        .iter()
        .filter(|r| !r.is_country_level())
        .map(|r| r.country().code().to_string())
        .collect();
    let universe: BTreeSet<RegionId> = regions
        .into_iter()
        .filter(|r| !r.is_country_level() || !with_subregions.contains(r.country().code()))
        .collect();

    let mut panel = clean_rail(&reports, &availability, &universe)?;
    let mut inputs: Vec<&Path> = vec![args.raw.as_path()];
    if let Some(cw_path) = &args.crosswalk {
        let cw = Crosswalk::read_csv_path(cw_path)?;
        panel = apply_crosswalk(&panel, &cw)?;
        inputs.push(cw_path.as_path());
    }

    std::fs::create_dir_all(&args.out)?;
    for measure in panel.measure_names() {
        let year = measure.trim_start_matches('y');
        let mut per_year = DyadTable::new();
        for (i, j, vals) in panel.iter() {
            if let Some(v) = vals.get(&measure).filter(|v| !v.is_nan()) {
                per_year.set(i.clone(), j.clone(), "passengers", *v)?;
            }
        }
        per_year.write_csv_path(args.out.join(format!("rail_{year}.csv")))?;
    }
    most_recent_year(&panel)?.write_csv_path(args.out.join("rail_most_recent.csv"))?;
    availability.write_csv(std::fs::File::create(args.out.join("availability.csv"))?)?;

    let config = format!("raw={:?} crosswalk={:?}", args.raw, args.crosswalk);
    RunManifest::new("etl-rail", config.as_bytes(), &inputs)?
        .write_json(args.out.join("manifest.json"))?;
    if !quiet {
        println!(
            "etl-rail: {} cleaned rows across {} years -> {}",
            panel.n_rows(),
            panel.measure_names().len(),
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_cluster(args: &ClusterArgs, quiet: bool) -> Result<()> {
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(Error::validation("--k must list community counts >= 1"));
    }
    let sci = SciMatrix::read_csv_path(&args.sci)?;
    let dist = build_distance(&sci)?;
    let tree = agglomerate(&dist)?;

    std::fs::create_dir_all(&args.out)?;
    tree.write_csv(std::fs::File::create(args.out.join("merge_tree.csv"))?)?;
    tree.write_leaves_csv(std::fs::File::create(args.out.join("merge_tree_leaves.csv"))?)?;
    for &k in &args.k {
        let assignment = cut(&tree, k)?;
        assignment.write_csv(std::fs::File::create(
            args.out.join(format!("clusters_k{k}.csv")),
        )?)?;
    }
    if !quiet && !tree.inversions.is_empty() {
        println!(
            "cluster: {} dendrogram height inversions recorded",
            tree.inversions.len()
        );
    }
    let config = format!("sci={:?} k={:?}", args.sci, args.k);
    RunManifest::new("cluster", config.as_bytes(), &[args.sci.as_path()])?
        .write_json(args.out.join("manifest.json"))?;
    if !quiet {
        println!(
            "cluster: {} regions, cuts at {:?} -> {}",
            sci.len(),
            args.k,
            args.out.display()
        );
    }
    Ok(())
}

fn worker_threads(n_jobs: usize) -> usize {
    std::env::var("GRAVNET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(n_jobs)
        .min(n_jobs.max(1))
}

fn cmd_fit(args: &FitArgs, quiet: bool) -> Result<()> {
    let cfg = TableConfig::from_path(&args.config)?;
    let base_dir = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let input = cfg.load_input(&base_dir)?;
    let specs = cfg.model_specs()?;

    // independent columns fit concurrently, capped by GRAVNET_THREADS
    let threads = worker_threads(specs.len());
    let mut results: Vec<Option<Result<FitResult>>> = (0..specs.len()).map(|_| None).collect();
    for chunk in specs.chunks(threads).zip_longest_indices(threads) {
        let (start, batch) = chunk;
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|(_, spec)| {
                    let input = &input;
                    scope.spawn(move || fit_one(input, spec))
                })
                .collect();
            for (offset, h) in handles.into_iter().enumerate() {
                results[start + offset] = Some(h.join().expect("fit thread panicked"));
            }
        });
    }

    std::fs::create_dir_all(&args.out)?;
    let mut table_rows = Vec::new();
    for (idx, ((name, _), result)) in specs.iter().zip(results).enumerate() {
        let fit = result.expect("every column fitted")?;
        let json = serde_json::to_string_pretty(&fit).expect("fit result serializes");
        std::fs::write(args.out.join(format!("fit_{}.json", idx + 1)), json + "\n")?;
        if !quiet && !fit.converged {
            println!("fit: column {name} did not converge (reported in output)");
        }
        table_rows.push((name.clone(), fit));
    }
    let rendered = render_table(&table_rows);
    std::fs::write(args.out.join("fit_table.txt"), &rendered)?;
    if !quiet {
        print!("{rendered}");
    }

    let config_bytes = std::fs::read(&args.config)?;
    let mut inputs: Vec<PathBuf> = Vec::new();
    let resolve = |p: &PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            base_dir.join(p)
        }
    };
    if let Some(p) = &cfg.data.dyads {
        inputs.push(resolve(p));
    }
    if let Some(p) = &cfg.data.attributes {
        inputs.push(resolve(p));
    }
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    RunManifest::new("fit", &config_bytes, &input_refs)?
        .write_json(args.out.join("manifest.json"))?;
    Ok(())
}

fn fit_one(
    input: &gravnet::regress::InputTable,
    spec: &gravnet::regress::ModelSpec,
) -> Result<FitResult> {
    let dm = build_design(input, spec)?;
    match spec.family {
        Family::Ols => ols_fit(&dm),
        Family::Ppml => {
            let (dm, n_dropped) = drop_separated(&dm)?;
            ppml_fit(&dm, n_dropped)
        }
    }
}

/// Splits `0..len` into consecutive batches of at most `size`, yielding the
/// batch start plus the slice of items.
trait ChunkWithStart<T> {
    fn zip_longest_indices(self, size: usize) -> Vec<(usize, Vec<T>)>;
}

impl<'a, T: Clone> ChunkWithStart<&'a T> for std::slice::Chunks<'a, T> {
    fn zip_longest_indices(self, size: usize) -> Vec<(usize, Vec<&'a T>)> {
        self.enumerate()
            .map(|(k, chunk)| (k * size, chunk.iter().collect()))
            .collect()
    }
}
