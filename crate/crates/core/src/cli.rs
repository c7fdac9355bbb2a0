//! Command-line driver.
//!
//! Every subcommand reads its inputs, runs one stage of the pipeline and
//! writes that stage's files into `--out`. Settings come from defaults, then
//! an optional `--config` file, then flags.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::filters::{filter_measurements, parse_mask, write_mask, DropReasons};
use crate::ground_truth::{
    aggregate_predictions, expand_activity, expand_possession, frame_outcomes, offdef_accordance,
    timeline_rows, write_timeline, TimelineError,
};
use crate::ingest::{
    load_config, parse_activity_report, parse_possession_report, parse_tracking,
    write_activity_report, write_possession_report, write_tracking, Config, ParseError,
};
use crate::model::Frame;
use crate::possession::{
    label_possessions, parse_labels, write_labels, AttackDirection, PossessionError,
};
use crate::synth::{generate, parse_script, SynthError};
use crate::tuning::{confusion, write_auc_table, write_grid, write_youden_table, TuningError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_CONTRACT: i32 = 4;
pub const EXIT_TUNING: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Contract(String),
    #[error("tuning: {0}")]
    Tuning(#[from] TuningError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Parse {
                source: ParseError::Io(_),
                ..
            } => EXIT_USAGE,
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Contract(_) => EXIT_CONTRACT,
            CliError::Tuning(TuningError::Degenerate(_)) => EXIT_TUNING,
            CliError::Tuning(_) => EXIT_CONTRACT,
        }
    }
}

impl From<PossessionError> for CliError {
    fn from(e: PossessionError) -> Self {
        CliError::Contract(e.to_string())
    }
}

impl From<TimelineError> for CliError {
    fn from(e: TimelineError) -> Self {
        CliError::Contract(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hoopscan",
    version,
    about = "Filter, label and tune basketball tracking data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drop inactive frames from a tracking stream.
    Filter {
        #[arg(long)]
        tracking: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Label every kept frame as offence, defence or transition.
    Label {
        /// Filtered tracking stream (xr.csv).
        #[arg(long)]
        xr: PathBuf,
        /// Activity report used to locate period boundaries.
        #[arg(long)]
        activity: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Grid-search the speed threshold and spell duration.
    Tune {
        #[arg(long)]
        tracking: PathBuf,
        #[arg(long)]
        activity: PathBuf,
        /// Length of the annotated game; defaults to the tracking span.
        #[arg(long)]
        duration_s: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic game from a script.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predictions against the annotation reports.
    Evaluate {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        activity: PathBuf,
        #[arg(long)]
        possession: PathBuf,
        #[arg(long)]
        duration_s: Option<u32>,
        /// Directory for timeline.csv; omitted means summary only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    v_min_kmh: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_vel_s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_ft_s: Option<String>,
    /// `min:max:step` in km/h.
    #[arg(long, allow_hyphen_values = true)]
    grid_vmin: Option<String>,
    /// `min:max:step` in seconds.
    #[arg(long, allow_hyphen_values = true)]
    grid_tvel: Option<String>,
    /// One direction for the first half (the second half is mirrored), or
    /// four comma-separated directions, one per period.
    #[arg(long, allow_hyphen_values = true)]
    attack_direction: Option<String>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
        let mut kv = Vec::new();
        let mut push = |k: &str, v: &str| kv.push((k.to_string(), v.to_string()));
        if let Some(v) = &self.v_min_kmh {
            push("v_min_kmh", v);
        }
        if let Some(v) = &self.t_vel_s {
            push("t_vel_s", v);
        }
        if let Some(v) = &self.t_ft_s {
            push("t_ft_s", v);
        }
        for (flag, prefix, value) in [
            ("--grid-vmin", "grid_vmin", &self.grid_vmin),
            ("--grid-tvel", "grid_tvel", &self.grid_tvel),
        ] {
            if let Some(v) = value {
                let parts: Vec<&str> = v.split(':').collect();
                let [min, max, step] = parts[..] else {
                    return Err(CliError::Usage(format!(
                        "{flag} expects min:max:step, got `{v}`"
                    )));
                };
                push(&format!("{prefix}_min"), min);
                push(&format!("{prefix}_max"), max);
                push(&format!("{prefix}_step"), step);
            }
        }
        if let Some(v) = &self.attack_direction {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            let dirs: Vec<String> = match parts[..] {
                [one] => {
                    let d: AttackDirection = one.parse().map_err(CliError::Usage)?;
                    [d, d, d.flipped(), d.flipped()]
                        .iter()
                        .map(|d| d.to_string())
                        .collect()
                }
                [_, _, _, _] => parts.iter().map(|s| s.to_string()).collect(),
                _ => {
                    return Err(CliError::Usage(format!(
                        "--attack-direction expects one or four directions, got `{v}`"
                    )))
                }
            };
            for (p, d) in dirs.iter().enumerate() {
                push(&format!("attack_direction_p{}", p + 1), d);
            }
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
            push(k.trim(), v.trim());
        }
        Ok(kv)
    }

    fn config(&self) -> Result<Config, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                load_config(&text).map_err(|source| CliError::Parse {
                    path: path.clone(),
                    source,
                })?
            }
            None => Config::default(),
        };
        for (k, v) in self.overrides()? {
            config.set(&k, &v).map_err(CliError::Usage)?;
        }
        config
            .validate()
            .map_err(|e| CliError::Contract(e.to_string()))?;
        Ok(config)
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn read_with<T>(
    path: &Path,
    parse: impl FnOnce(BufReader<File>) -> Result<T, ParseError>,
) -> Result<T, CliError> {
    parse(open(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(
    dir: &Path,
    name: &str,
    write: impl FnOnce(File) -> io::Result<()>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    File::create(&path)
        .and_then(write)
        .map_err(|source| CliError::Io { path, source })
}

fn console(r: io::Result<()>) -> Result<(), CliError> {
    r.map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// Seconds spanned by a stream whose last sample sits at `last_t_ms`.
fn span_s(last_t_ms: Option<u64>) -> u32 {
    last_t_ms.map_or(0, |t| (t / 1000 + 1) as u32)
}

fn cmd_filter(tracking: &Path, common: &Common, out: &mut dyn Write) -> Result<(), CliError> {
    let config = common.config()?;
    let frames = read_with(tracking, parse_tracking)?;
    let (xr, mask) = filter_measurements(&frames, &config.geometry, &config.params);
    prepare_out(&common.out)?;
    write_file(&common.out, "xr.csv", |f| write_tracking(&xr, f))?;
    write_file(&common.out, "mask.csv", |f| write_mask(&mask, f))?;
    console((|| {
        writeln!(out, "frames in: {}", frames.len())?;
        writeln!(out, "frames out: {}", xr.len())?;
        for reason in [
            DropReasons::NOT_FIVE_PLAYERS,
            DropReasons::FREE_THROW_DWELL,
            DropReasons::LOW_SPEED_SPELL,
        ] {
            writeln!(out, "{}: {}", reason, mask.count_with(reason))?;
        }
        Ok(())
    })())
}

fn cmd_label(
    xr_path: &Path,
    activity: Option<&Path>,
    common: &Common,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut config = common.config()?;
    if let Some(path) = activity {
        let rows = read_with(path, parse_activity_report)?;
        config.orientation = config.orientation.with_periods_from_report(&rows);
    }
    let xr = read_with(xr_path, parse_tracking)?;
    let labeling = label_possessions(
        &xr,
        &config.geometry,
        &config.orientation,
        config.transition_band_cm,
    )?;
    prepare_out(&common.out)?;
    write_file(&common.out, "labels.csv", |f| {
        write_labels(&labeling.frames, f)
    })?;
    console((|| {
        writeln!(out, "frames: {}", labeling.frames.len())?;
        writeln!(out, "possessions: {}", labeling.possessions())?;
        writeln!(out, "direct flips: {}", labeling.direct_flips)
    })())
}

fn cmd_tune(
    tracking: &Path,
    activity: &Path,
    duration_s: Option<u32>,
    common: &Common,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let config = common.config()?;
    let frames: Vec<Frame> = read_with(tracking, parse_tracking)?;
    let rows = read_with(activity, parse_activity_report)?;
    let duration = duration_s.unwrap_or_else(|| span_s(frames.last().map(|f| f.t_ms)));
    let truth = expand_activity(&rows, duration)?;
    let result = crate::tuning::tune(
        &frames,
        &config.geometry,
        config.params.t_ft_ms,
        &truth,
        &config.grid,
    )?;
    prepare_out(&common.out)?;
    write_file(&common.out, "auc.csv", |f| {
        write_auc_table(&result.auc_table, f)
    })?;
    write_file(&common.out, "youden.csv", |f| {
        write_youden_table(&result.youden_table, f)
    })?;
    write_file(&common.out, "grid.csv", |f| write_grid(&result.grid, f))?;
    console((|| {
        writeln!(out, "v_min_star_kmh: {}", result.v_min_star)?;
        writeln!(out, "auc_star: {}", result.auc_star)?;
        writeln!(
            out,
            "t_vel_star_s: {}",
            result.t_vel_star_ms as f64 / 1000.0
        )?;
        writeln!(out, "youden_star: {}", result.youden_star)
    })())
}

fn cmd_simulate(
    script_path: &Path,
    seed: Option<u64>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let text = fs::read_to_string(script_path).map_err(|source| CliError::Io {
        path: script_path.to_path_buf(),
        source,
    })?;
    let synth_err = |e: SynthError| match e {
        SynthError::Syntax { line, message } => CliError::Parse {
            path: script_path.to_path_buf(),
            source: ParseError::Config { line, message },
        },
        other => CliError::Contract(other.to_string()),
    };
    let mut script = parse_script(&text).map_err(synth_err)?;
    if let Some(seed) = seed {
        script.seed = seed;
    }
    let game = generate(&script).map_err(synth_err)?;
    prepare_out(dir)?;
    write_file(dir, "tracking.csv", |f| write_tracking(&game.frames, f))?;
    write_file(dir, "activity.csv", |f| {
        write_activity_report(&game.activity, f)
    })?;
    write_file(dir, "possession.csv", |f| {
        write_possession_report(&game.possession, f)
    })?;
    console((|| {
        writeln!(out, "frames: {}", game.frames.len())?;
        writeln!(out, "duration_s: {}", game.duration_s)
    })())
}

fn rate(r: Result<f64, crate::tuning::RateError>) -> String {
    r.map_or_else(|_| "undefined".to_string(), |v| v.to_string())
}

fn cmd_evaluate(
    mask_path: &Path,
    labels_path: &Path,
    activity: &Path,
    possession: &Path,
    duration_s: Option<u32>,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mask = read_with(mask_path, parse_mask)?;
    let labels = read_with(labels_path, parse_labels)?;
    let act_rows = read_with(activity, parse_activity_report)?;
    let poss_rows = read_with(possession, parse_possession_report)?;
    let duration = duration_s.unwrap_or_else(|| span_s(mask.t_ms.last().copied()));
    let outcomes = frame_outcomes(&mask, &labels);
    let pred = aggregate_predictions(&outcomes, duration);
    let truth = expand_activity(&act_rows, duration)?;
    let truth_poss = expand_possession(&poss_rows, duration)?;
    let counts = confusion(&pred, &truth)?;
    let accordance = offdef_accordance(&pred, &truth_poss);
    if let Some(dir) = dir {
        let rows = timeline_rows(&truth, &pred, Some(&truth_poss))?;
        prepare_out(dir)?;
        write_file(dir, "timeline.csv", |f| write_timeline(&rows, f))?;
    }
    console((|| {
        writeln!(out, "seconds: {duration}")?;
        writeln!(
            out,
            "tp: {} tn: {} fp: {} fn: {}",
            counts.tp, counts.tn, counts.fp, counts.fn_
        )?;
        writeln!(out, "sensitivity: {}", rate(counts.sensitivity()))?;
        writeln!(out, "specificity: {}", rate(counts.specificity()))?;
        let c = &accordance.counts;
        writeln!(
            out,
            "off/def agree: {} disagree: {}",
            c.tp + c.tn,
            c.fp + c.fn_
        )?;
        writeln!(
            out,
            "off/def excluded: transition {} no-prediction {}",
            accordance.excluded_transition, accordance.excluded_none
        )
    })())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Filter { tracking, common } => cmd_filter(&tracking, &common, out),
        Command::Label {
            xr,
            activity,
            common,
        } => cmd_label(&xr, activity.as_deref(), &common, out),
        Command::Tune {
            tracking,
            activity,
            duration_s,
            common,
        } => cmd_tune(&tracking, &activity, duration_s, &common, out),
        Command::Simulate {
            script,
            seed,
            out: dir,
        } => cmd_simulate(&script, seed, &dir, out),
        Command::Evaluate {
            mask,
            labels,
            activity,
            possession,
            duration_s,
            out: dir,
        } => cmd_evaluate(
            &mask,
            &labels,
            &activity,
            &possession,
            duration_s,
            dir.as_deref(),
            out,
        ),
    }
}

/// Runs the command line with explicit output streams; returns the exit
/// status.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
