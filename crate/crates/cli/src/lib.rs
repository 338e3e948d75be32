//! `frc-strength`: fetch division data, fit strength models, evaluate them
//! and serve a draft-day API.
//!
//! Every command reads its inputs from files and writes one JSON report, so
//! runs are reproducible from the files alone. Outputs are written atomically
//! and never replace an existing file unless `--force` is given.

pub mod error;
pub mod report;
pub mod server;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand, ValueEnum};
use frc_core::{
    agreement, playoff_metrics, stability_suite, Criterion, DivisionSnapshot, ProcedureRegistry, TopSetRule,
};
use frc_ingest::tba::TOKEN_ENV;
use frc_ingest::{
    import_csv, load_snapshot, save_snapshot, write_atomic, AuthToken, FixtureTransport, HttpTransport, IngestError,
    RecordingTransport, SnapshotFile, TbaClient, Transport,
};

pub use error::{exit, CliError};
use report::{to_json_bytes, EvaluationReport, FitReport, StabilityFile, REPORT_SCHEMA_VERSION, TOP_N};

#[derive(Debug, Parser)]
#[command(name = "frc-strength", version, about = "Robot strength estimates for FRC divisions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Opr,
    Oprc1,
    Oprc2,
    Wmpr,
    Wmprc1,
    Wmprc2,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Opr => "opr",
            ModelName::Oprc1 => "oprc1",
            ModelName::Oprc2 => "oprc2",
            ModelName::Wmpr => "wmpr",
            ModelName::Wmprc1 => "wmprc1",
            ModelName::Wmprc2 => "wmprc2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Pr,
    Mspe,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Pr => Criterion::Pr,
            CriterionArg::Mspe => Criterion::Mspe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopSetArg {
    /// Top 8 of the fit on all qualification matches.
    FullFit,
    /// Top 8 of the fit on the shorter prefix of each pair.
    PerPrefix,
}

impl From<TopSetArg> for TopSetRule {
    fn from(t: TopSetArg) -> Self {
        match t {
            TopSetArg::FullFit => TopSetRule::FullFit,
            TopSetArg::PerPrefix => TopSetRule::PerPrefix,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download a division from The Blue Alliance into a snapshot file.
    Fetch {
        #[arg(long)]
        event: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        base_url: Option<String>,
        /// Replay recorded responses from this directory instead of the network.
        #[arg(long, conflicts_with = "base_url")]
        fixtures: Option<PathBuf>,
        /// Also save every response to this directory for later replay.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Build a snapshot file from match and ranking CSV exports.
    Import {
        #[arg(long)]
        matches: PathBuf,
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        division: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Timestamp recorded in the snapshot (RFC 3339); defaults to the Unix epoch.
        #[arg(long)]
        fetched_at: Option<DateTime<Utc>>,
    },
    /// Fit a model on the qualification matches and write a fit report.
    Fit {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_enum)]
        model: ModelName,
        #[arg(long, value_enum, default_value = "pr")]
        criterion: CriterionArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Compare a fit with official rankings and score it on playoff matches.
    Evaluate {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Refit on growing prefixes of the qualification schedule.
    Stability {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_enum)]
        model: ModelName,
        #[arg(long, value_enum, default_value = "pr")]
        criterion: CriterionArg,
        #[arg(long, value_enum, default_value = "full-fit")]
        top_set: TopSetArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Serve strengths, predictions and a draft board over HTTP.
    Serve {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fetch {
            event,
            out,
            force,
            base_url,
            fixtures,
            record,
        } => fetch(&event, &out, force, base_url, fixtures, record),
        Command::Import {
            matches,
            rankings,
            division,
            out,
            force,
            fetched_at,
        } => {
            refuse_existing(&out, force)?;
            let snapshot = import_csv(&matches, &rankings, &division)?;
            let file = SnapshotFile::new(&snapshot, fetched_at.unwrap_or(DateTime::UNIX_EPOCH));
            save_snapshot(&file, &out, force)?;
            log::info!(
                "imported {} ({} robots) to {}",
                division,
                snapshot.num_robots(),
                out.display()
            );
            Ok(())
        }
        Command::Fit {
            snapshot,
            model,
            criterion,
            out,
            force,
        } => {
            refuse_existing(&out, force)?;
            let snapshot = load_snapshot(&snapshot)?;
            let report = fit(&snapshot, model, criterion.into())?;
            write_report(&out, &report, force)
        }
        Command::Evaluate {
            snapshot,
            fit,
            out,
            force,
        } => {
            refuse_existing(&out, force)?;
            let snapshot = load_snapshot(&snapshot)?;
            let report = evaluate(&snapshot, &FitReport::read(&fit)?)?;
            write_report(&out, &report, force)
        }
        Command::Stability {
            snapshot,
            model,
            criterion,
            top_set,
            out,
            force,
        } => {
            refuse_existing(&out, force)?;
            let snapshot = load_snapshot(&snapshot)?;
            let report = stability(&snapshot, model, criterion.into(), top_set.into())?;
            write_report(&out, &report, force)
        }
        Command::Serve {
            snapshot,
            fit,
            port,
            host,
        } => {
            let snapshot = load_snapshot(&snapshot)?;
            let state = server::AppState::new(snapshot, &FitReport::read(&fit)?)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Server(e.to_string()))?;
            runtime.block_on(server::serve(state, SocketAddr::new(host, port)))
        }
    }
}

fn fetch(
    event: &str,
    out: &Path,
    force: bool,
    base_url: Option<String>,
    fixtures: Option<PathBuf>,
    record: Option<PathBuf>,
) -> Result<(), CliError> {
    refuse_existing(out, force)?;
    // Replayed fixtures need no credentials.
    let token = match (&fixtures, std::env::var(TOKEN_ENV)) {
        (Some(_), Err(_)) => AuthToken::new("fixture-replay")?,
        _ => AuthToken::from_env()?,
    };
    let source: Arc<dyn Transport> = match fixtures {
        Some(dir) => Arc::new(FixtureTransport::new(dir)),
        None => Arc::new(HttpTransport::new(Duration::from_secs(30))),
    };
    let transport: Arc<dyn Transport> = match record {
        Some(dir) => Arc::new(RecordingTransport::new(source, dir)),
        None => source,
    };
    let mut client = TbaClient::new(transport, token);
    if let Some(url) = base_url {
        client = client.with_base_url(url);
    }
    let file = client.fetch_division(event)?;
    save_snapshot(&file, out, force)?;
    log::info!(
        "fetched {} ({} qualification matches) to {}",
        event,
        file.qual_matches.len(),
        out.display()
    );
    Ok(())
}

/// Runs the named procedure; rank deficiency is reported with robot keys.
pub fn fit(snapshot: &DivisionSnapshot, model: ModelName, criterion: Criterion) -> Result<FitReport, CliError> {
    let selection = ProcedureRegistry::builtin()
        .run(model.as_str(), snapshot, criterion)
        .map_err(|e| with_robot_keys(snapshot, e))?;
    Ok(FitReport::new(snapshot, model.as_str(), &selection))
}

pub fn evaluate(snapshot: &DivisionSnapshot, fit: &FitReport) -> Result<EvaluationReport, CliError> {
    let model = fit.restore(snapshot)?;
    let playoff = if snapshot.playoff_matches.is_empty() {
        None
    } else {
        Some(playoff_metrics(snapshot, &model)?)
    };
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        division_key: fit.division_key.clone(),
        snapshot_hash: fit.snapshot_hash.clone(),
        model: fit.model.clone(),
        chosen_c: fit.chosen_c,
        qualification_prediction_rate: fit.cv.prediction_rate,
        qualification_mspe: fit.cv.mspe,
        agreement: agreement(snapshot, &model, &TOP_N)?,
        playoff,
    })
}

pub fn stability(
    snapshot: &DivisionSnapshot,
    model: ModelName,
    criterion: Criterion,
    rule: TopSetRule,
) -> Result<StabilityFile, CliError> {
    let registry = ProcedureRegistry::builtin();
    let procedure = registry.lookup(model.as_str())?;
    let report = stability_suite(snapshot, procedure, criterion, rule).map_err(|e| with_robot_keys(snapshot, e))?;
    Ok(StabilityFile {
        schema_version: REPORT_SCHEMA_VERSION,
        division_key: snapshot.division_key.clone(),
        snapshot_hash: report::snapshot_hash(snapshot),
        report,
    })
}

fn with_robot_keys(snapshot: &DivisionSnapshot, error: frc_core::Error) -> CliError {
    match &error {
        frc_core::Error::RankDeficient { robots, .. } => CliError::RankDeficient {
            robots: robots.iter().map(|&i| snapshot.key(i).to_string()).collect(),
            source: error,
        },
        _ => error.into(),
    }
}

/// Fails early, before any work, when `out` exists and `force` is off.
/// The final write checks again.
fn refuse_existing(out: &Path, force: bool) -> Result<(), CliError> {
    if !force && out.exists() {
        return Err(IngestError::AlreadyExists(out.to_path_buf()).into());
    }
    Ok(())
}

fn write_report<T: serde::Serialize>(out: &Path, report: &T, force: bool) -> Result<(), CliError> {
    write_atomic(out, &to_json_bytes(report), force)?;
    log::info!("wrote {}", out.display());
    Ok(())
}
