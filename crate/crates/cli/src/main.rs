//! `camoscore`: score camouflage datasets, compare with human rankings and
//! generate synthetic sequences.

mod config;
mod sheet;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use camoscore::rank::{compare_with_human, Calibration};
use camoscore::score::{score_example_detailed, summary_table};
use camoscore::synth::{emit_dataset, SynthConfig, SynthSource, TrajectoryParams};
use camoscore::{
    calibrate_alpha, rank, score_dataset, BinaryMask, DatasetKind, DatasetReport, Error, HumanRanking,
    ImagePlane, Manifest, RankKey, Sidecars, TauVariant,
};
use clap::{Parser, Subcommand};

use crate::config::Overrides;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Core(Error::Parameter(_)) => 3,
            CliError::Core(e) if e.is_degenerate_input() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "camoscore", version, about = "Camouflage scores for images and videos")]
struct Cli {
    /// TOML file with default settings; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one image/mask pair and print the report as JSON
    Score {
        image: PathBuf,
        mask: PathBuf,
        /// Example id recorded in the report (default: the image's file stem)
        #[arg(long)]
        id: Option<String>,
        /// Write the reconstructed image (full frame) to this PNG
        #[arg(long)]
        dump_recon: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score every example of a manifest and write report.json, report.csv and summary.txt
    ScoreDataset {
        manifest: PathBuf,
        #[arg(long, default_value = "camoscore-out")]
        out_dir: PathBuf,
        /// Also list the best and worst examples under this key
        #[arg(long)]
        rank_by: Option<RankKey>,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, default_value_t = 5)]
        bottom: usize,
        /// Render the listed examples' crops into a PNG contact sheet
        #[arg(long, requires = "rank_by")]
        contact_sheet: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the examples of a dataset report ordered by a score
    Rank {
        report: PathBuf,
        #[arg(long, default_value = "s_alpha")]
        by: RankKey,
        #[arg(long)]
        top: Option<usize>,
    },
    /// Kendall tau of every score's ranking against a human ranking
    CompareHuman {
        report: PathBuf,
        human: PathBuf,
        /// Use tau-a instead of the tie-adjusted tau-b
        #[arg(long)]
        tau_a: bool,
        /// Also search the combination weight
        #[arg(long)]
        calibrate: bool,
    },
    /// Grid-search the combination weight against a human ranking
    CalibrateAlpha {
        report: PathBuf,
        human: PathBuf,
        #[arg(long)]
        tau_a: bool,
    },
    /// Generate synthetic camouflage sequences from an image manifest
    SynthVideo {
        /// Manifest of (image, mask) pairs to draw objects and backgrounds from
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest per-frame displacement in pixels
        #[arg(long, default_value_t = camoscore::synth::DEFAULT_MAX_STEP)]
        max_step: i32,
        /// Directory of precomputed `{id}.png` background plates
        #[arg(long)]
        plates: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("camoscore: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn settings(config: &Option<PathBuf>, flags: &Overrides) -> CliResult<Overrides> {
    let file = match config {
        Some(p) => Overrides::load(p)?,
        None => Overrides::default(),
    };
    let merged = file.merged_with(flags);
    init_threads(merged.thread_count()?)?;
    Ok(merged)
}

fn init_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Score {
            image,
            mask,
            id,
            dump_recon,
            overrides,
        } => {
            let s = settings(&cli.config, &overrides)?;
            let config = s.score_config()?;
            let id = id.unwrap_or_else(|| {
                image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let img = ImagePlane::load(&image)?;
            let m = BinaryMask::load(&mask)?;
            let sidecars = Sidecars::load(&image, &config)?;
            let details = score_example_detailed(&id, &img, &m, &sidecars, &config)?;
            if let Some(path) = dump_recon {
                let mut full = img.to_rgb();
                if let Some(r) = &details.reconstruction {
                    let b = details.report.crop;
                    for y in 0..b.height() {
                        for x in 0..b.width() {
                            full.pixel_mut(b.x0 + x, b.y0 + y).copy_from_slice(r.image.pixel(x, y));
                        }
                    }
                }
                full.save_png(&path)?;
            }
            println!("{}", serde_json::to_string_pretty(&details.report).expect("report serializes"));
            Ok(())
        }
        Command::ScoreDataset {
            manifest,
            out_dir,
            rank_by,
            top,
            bottom,
            contact_sheet,
            overrides,
        } => {
            let s = settings(&cli.config, &overrides)?;
            let config = s.score_config()?;
            let m = Manifest::load(&manifest)?;
            let report = score_dataset(&m, &config)?;
            write_dataset_outputs(&report, &out_dir)?;
            print!("{}", summary_table(std::slice::from_ref(&report)));
            if report.summary.failed > 0 {
                eprintln!(
                    "camoscore: {} of {} examples failed; see failures in report.json",
                    report.summary.failed,
                    m.examples.len()
                );
            }
            if let Some(key) = rank_by {
                let listing = rank_listing(&report, key, top, bottom)?;
                let path = out_dir.join(format!("ranking_{key}.csv"));
                std::fs::write(&path, listing_csv(&listing)).map_err(|e| io_error(&path, e))?;
                for l in &listing {
                    println!("{:>6} {:<6} {:<24} {}", l.section, l.position, l.id, fmt_value(l.value));
                }
                if let Some(sheet_path) = contact_sheet {
                    sheet::render(&m, &report, &listing, &sheet_path)?;
                }
            }
            if report.summary.scored == 0 {
                return Err(Error::Degenerate("no example could be scored".into()).into());
            }
            Ok(())
        }
        Command::Rank { report, by, top } => {
            let r = load_report(&report)?;
            let order = rank(&r.per_example, by)?;
            let n = top.unwrap_or(order.len());
            for (i, id) in order.iter().take(n).enumerate() {
                let value = r
                    .per_example
                    .iter()
                    .find(|x| &x.example_id == id)
                    .and_then(|x| by.value(x));
                println!("{:<5} {:<24} {}", i + 1, id, fmt_value(value));
            }
            Ok(())
        }
        Command::CompareHuman {
            report,
            human,
            tau_a,
            calibrate,
        } => {
            let r = load_report(&report)?;
            let h = HumanRanking::load(&human)?;
            let variant = if tau_a { TauVariant::A } else { TauVariant::B };
            let rows = compare_with_human(&r.per_example, &h, variant)?;
            println!("{:<8} {:>8}", "score", if tau_a { "tau-a" } else { "tau-b" });
            for (key, tau) in rows {
                match tau {
                    Ok(t) => println!("{:<8} {:>8.4}", key.name(), t),
                    Err(e) => println!("{:<8} {:>8}  ({e})", key.name(), "-"),
                }
            }
            if calibrate {
                let c = calibrate_alpha(&r.per_example, &h, variant)?;
                print_calibration(&c);
            }
            Ok(())
        }
        Command::CalibrateAlpha { report, human, tau_a } => {
            let r = load_report(&report)?;
            let h = HumanRanking::load(&human)?;
            let variant = if tau_a { TauVariant::A } else { TauVariant::B };
            let c = calibrate_alpha(&r.per_example, &h, variant)?;
            println!("{}", serde_json::to_string_pretty(&c).expect("calibration serializes"));
            Ok(())
        }
        Command::SynthVideo {
            sources,
            out,
            count,
            length,
            seed,
            max_step,
            plates,
            threads,
        } => {
            let file = match &cli.config {
                Some(p) => Overrides::load(p)?,
                None => Overrides::default(),
            };
            let threads = Overrides {
                threads,
                ..Overrides::default()
            };
            init_threads(file.merged_with(&threads).thread_count()?)?;
            let m = Manifest::load(&sources)?;
            let missing: Vec<PathBuf> = m
                .examples
                .iter()
                .flat_map(|e| [e.image.clone(), e.mask.clone()])
                .filter(|p| !p.is_file())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingFiles(missing).into());
            }
            let srcs = m
                .examples
                .iter()
                .map(|e| {
                    Ok(SynthSource {
                        id: e.id.clone(),
                        image: ImagePlane::load(&e.image)?,
                        mask: BinaryMask::load(&e.mask)?,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let config = SynthConfig {
                count,
                length,
                seed,
                trajectory: TrajectoryParams {
                    max_step,
                    ..TrajectoryParams::default()
                },
                plate_dir: plates,
            };
            let path = emit_dataset(&out, &srcs, &config)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_dataset_outputs(report: &DatasetReport, out_dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    report.write_json(out_dir.join("report.json"))?;
    let csv_path = out_dir.join("report.csv");
    let f = std::fs::File::create(&csv_path).map_err(|e| io_error(&csv_path, e))?;
    report.write_csv(f)?;
    let summary = out_dir.join("summary.txt");
    std::fs::write(&summary, summary_table(std::slice::from_ref(report))).map_err(|e| io_error(&summary, e))?;
    if report.kind != DatasetKind::Image {
        let groups = out_dir.join("groups.csv");
        let mut text = String::from("group,n,s_rf,s_b,s_alpha,d2\n");
        for g in &report.per_group {
            let m = &g.means;
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                g.group,
                m.n,
                m.s_rf,
                m.s_b,
                m.s_alpha,
                m.d2.map(|v| v.to_string()).unwrap_or_default()
            ));
        }
        std::fs::write(&groups, text).map_err(|e| io_error(&groups, e))?;
    }
    Ok(())
}

fn load_report(path: &Path) -> CliResult<DatasetReport> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    })
}

pub struct ListingRow {
    pub section: &'static str,
    pub position: usize,
    pub id: String,
    pub value: Option<f64>,
}

fn rank_listing(report: &DatasetReport, key: RankKey, top: usize, bottom: usize) -> CliResult<Vec<ListingRow>> {
    let order = rank(&report.per_example, key)?;
    let value = |id: &str| {
        report
            .per_example
            .iter()
            .find(|r| r.example_id == id)
            .and_then(|r| key.value(r))
    };
    let n = order.len();
    let mut rows: Vec<ListingRow> = order
        .iter()
        .take(top)
        .enumerate()
        .map(|(i, id)| ListingRow {
            section: "top",
            position: i + 1,
            id: id.clone(),
            value: value(id),
        })
        .collect();
    let start = n.saturating_sub(bottom).max(top.min(n));
    rows.extend(order[start..].iter().enumerate().map(|(i, id)| ListingRow {
        section: "bottom",
        position: start + i + 1,
        id: id.clone(),
        value: value(id),
    }));
    Ok(rows)
}

fn listing_csv(rows: &[ListingRow]) -> String {
    let mut s = String::from("section,position,id,value\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.section,
            r.position,
            r.id,
            r.value.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    s
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

fn print_calibration(c: &Calibration) {
    println!();
    println!("{:<8} {:>8}", "alpha", "tau");
    for (a, t) in &c.grid {
        let mark = if *a == c.alpha { " *" } else { "" };
        println!("{a:<8.2} {t:>8.4}{mark}");
    }
    println!("best alpha {:.2} (tau {:.4})", c.alpha, c.tau);
}
