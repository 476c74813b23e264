use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bankrun::config::PipelineConfig;
use bankrun::io::{read_csv_strict, write_jsonl};
use bankrun::pipeline::{EpisodesArgs, ExtractArgs, ExtractMode, RunOptions, Runner};
use bankrun::{report, synth, Error, Result};
use bankrun_core::corpus::SynthSpec;
use bankrun_core::episodes::{expand_fixture, FixtureCell};
use clap::{Parser, Subcommand};

const DEFAULT_CONFIG: &str = "bankrun.toml";

/// Bank-distress episodes from newspaper archives, and the panel
/// regressions built on them.
///
/// Exit status: 0 success, 2 configuration error (including unknown
/// presets), 3 a prior stage has not been run, 4 data error, 5 the language
/// model service is unavailable.
#[derive(Debug, Parser)]
#[command(name = "bankrun", version)]
struct Cli {
    /// Pipeline configuration (TOML). Relative paths inside it are resolved
    /// against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads within a stage.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for anything random, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replay model replies from a fixtures file instead of calling the
    /// service. Without a value the configured fixtures are used.
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, value_name = "FIXTURES")]
    mock_llm: Option<Option<PathBuf>>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Validate the article collection and copy it into the work directory.
    Ingest,
    /// Apply the keyword rules.
    Screen,
    /// Model screen and event extraction for rule hits.
    Extract {
        #[arg(long, value_enum, default_value_t = ExtractMode::All)]
        stage: ExtractMode,
        /// Rule hits to process instead of the screen output.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Where to write extracted events.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Client settings (TOML) replacing the `[llm]` table.
        #[arg(long)]
        client: Option<PathBuf>,
    },
    /// Match events to banks and places.
    Resolve,
    /// Group events into episodes, run the episode-level model calls and
    /// classify.
    Episodes {
        /// Resolved events in place of the resolve output.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Receivership records to merge.
        #[arg(long)]
        occ: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Episode counts by sample.
    Tabulate {
        #[arg(long)]
        episodes: Option<PathBuf>,
        /// Row layout; eras with crisis splits is the only one.
        #[arg(long, value_parser = ["era"], default_value = "era")]
        by: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bank-year panel from call reports and episodes.
    Panel,
    /// Estimate the configured presets.
    Fit,
    /// Table and chart for one preset.
    Report {
        preset: String,
        /// Input file instead of the stage output the preset reads.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Every stage in order.
    Pipeline,
    /// Write a synthetic corpus with registry, gazetteer, ground truth,
    /// replay fixtures and a config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        articles: Option<usize>,
        #[arg(long)]
        events: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Expand compact count cells into classified episodes.
    ExpandFixture {
        #[arg(long)]
        cells: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List report presets.
    Presets,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None if Path::new(DEFAULT_CONFIG).is_file() => PipelineConfig::load(Path::new(DEFAULT_CONFIG)),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = || load_config(cli.config.as_deref());
    let runner = || -> Result<Runner> {
        Runner::new(cfg()?, RunOptions { jobs: cli.jobs, mock_llm: cli.mock_llm.clone(), seed: cli.seed })
    };
    match &cli.cmd {
        Cmd::Ingest => runner()?.ingest(),
        Cmd::Screen => runner()?.screen(),
        Cmd::Extract { stage, input, out, client } => {
            runner()?.extract(&ExtractArgs { mode: *stage, input: input.clone(), out: out.clone(), client: client.clone() })
        }
        Cmd::Resolve => runner()?.resolve(),
        Cmd::Episodes { events, occ, out } => {
            runner()?.episodes(&EpisodesArgs { events: events.clone(), occ: occ.clone(), out: out.clone() })
        }
        Cmd::Tabulate { episodes, out, .. } => runner()?.tabulate(episodes.as_deref(), out.as_deref()),
        Cmd::Panel => runner()?.panel(),
        Cmd::Fit => runner()?.fit(),
        Cmd::Report { preset, input } => {
            report::lookup(preset)?;
            runner()?.report(preset, input.as_deref())
        }
        Cmd::Pipeline => runner()?.pipeline(),
        Cmd::Synth { out, articles, events, noise } => {
            let c = cfg()?;
            let mut spec = c.synth.clone().unwrap_or_else(SynthSpec::default);
            if let Some(n) = articles {
                spec.n_articles = *n;
            }
            if let Some(n) = events {
                spec.n_planted_events = *n;
            }
            if let Some(r) = noise {
                spec.noise_rate = *r;
            }
            if let Some(s) = cli.seed.or(c.seed) {
                spec.rng_seed = s;
            }
            let files = synth::write(out, &spec, c.episodes.grouping, c.episodes.selection)?;
            println!("{}", files.config.display());
            Ok(())
        }
        Cmd::ExpandFixture { cells, out } => {
            let c = cfg()?;
            let cells: Vec<FixtureCell> = read_csv_strict(cells)?;
            let eps = expand_fixture(&cells, &c.tabulate.crisis_years).map_err(Error::Data)?;
            write_jsonl(out, &eps)
        }
        Cmd::Presets => {
            for p in report::PRESETS {
                println!("{:<14} {}", p.name, p.title);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bankrun: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
