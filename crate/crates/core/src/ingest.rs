//! Plain-text readers and writers: tracking streams, the two annotation
//! reports, and the `key = value` configuration file.
//!
//! Parsing is strict. Anything that does not match the declared layout is
//! rejected with the offending line number rather than coerced.

use std::collections::HashSet;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::filters::FilterParams;
use crate::model::{CourtGeometry, Frame, PlayerId, PlayerSample};
use crate::possession::{AttackDirection, Orientation};
use crate::tuning::GridSpec;

pub const TRACKING_HEADER: &str = "t_ms,player_id,pos_x_cm,pos_y_cm,vel_x_kmh,vel_y_kmh";
pub const ACTIVITY_HEADER: &str = "action,sec,active,timeout,ft,quarter,half";
pub const POSSESSION_HEADER: &str = "action,sec,off";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    Header {
        line: u64,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: column `{column}`: {reason} (`{value}`)")]
    Field {
        line: u64,
        column: &'static str,
        value: String,
        reason: String,
    },
    #[error("line {line}: duplicate record for t={t_ms} ms, player {player}")]
    Duplicate {
        line: u64,
        t_ms: u64,
        player: PlayerId,
    },
    #[error("line {line}: t={t_ms} ms does not follow t={prev_t_ms} ms")]
    Ordering {
        line: u64,
        t_ms: u64,
        prev_t_ms: u64,
    },
    #[error("line {line} (row {row}): {rule}")]
    Report { line: u64, row: usize, rule: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One line of a tracking file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingRecord {
    pub t_ms: u64,
    pub sample: PlayerSample,
}

pub(crate) fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .buffer_capacity(1 << 20)
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
}

pub(crate) fn line_of(rec: &csv::ByteRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub(crate) fn field<'a>(
    rec: &'a csv::ByteRecord,
    idx: usize,
    column: &'static str,
) -> Result<&'a str, ParseError> {
    std::str::from_utf8(&rec[idx]).map_err(|_| ParseError::Field {
        line: line_of(rec),
        column,
        value: String::from_utf8_lossy(&rec[idx]).into_owned(),
        reason: "not valid UTF-8".into(),
    })
}

pub(crate) fn bad_field(
    rec: &csv::ByteRecord,
    column: &'static str,
    value: &str,
    reason: &str,
) -> ParseError {
    ParseError::Field {
        line: line_of(rec),
        column,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

pub(crate) fn parse_u64(
    rec: &csv::ByteRecord,
    idx: usize,
    column: &'static str,
) -> Result<u64, ParseError> {
    let s = field(rec, idx, column)?;
    s.parse::<u64>()
        .map_err(|_| bad_field(rec, column, s, "expected a non-negative integer"))
}

pub(crate) fn parse_f64(
    rec: &csv::ByteRecord,
    idx: usize,
    column: &'static str,
) -> Result<f64, ParseError> {
    match fast_float2::parse::<f64, _>(&rec[idx]) {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(bad_field(
            rec,
            column,
            &String::from_utf8_lossy(&rec[idx]),
            "expected a finite decimal number",
        )),
    }
}

/// Writes `v` in its shortest exactly round-tripping form.
pub(crate) fn write_f64<W: Write>(out: &mut W, buf: &mut ryu::Buffer, v: f64) -> io::Result<()> {
    out.write_all(buf.format(v).as_bytes())
}

pub(crate) fn parse_flag(
    rec: &csv::ByteRecord,
    idx: usize,
    column: &'static str,
) -> Result<bool, ParseError> {
    match field(rec, idx, column)? {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(bad_field(rec, column, other, "expected 0 or 1")),
    }
}

/// Reads the header row and checks it. Returns `false` when the input holds
/// no records at all.
pub(crate) fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    rec: &mut csv::ByteRecord,
    expected: &'static str,
) -> Result<bool, ParseError> {
    if !read_record(rdr, rec)? {
        return Ok(false);
    }
    let joined = rec
        .iter()
        .map(|f| String::from_utf8_lossy(f).into_owned())
        .collect::<Vec<_>>()
        .join(",");
    if joined != expected {
        return Err(ParseError::Header {
            line: line_of(rec),
            expected,
            found: joined,
        });
    }
    Ok(true)
}

pub(crate) fn read_record<R: Read>(
    rdr: &mut csv::Reader<R>,
    rec: &mut csv::ByteRecord,
) -> Result<bool, ParseError> {
    rdr.read_byte_record(rec).map_err(|e| {
        let line = e.position().map_or(0, |p| p.line());
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => ParseError::Io(io),
                _ => unreachable!(),
            }
        } else {
            ParseError::Csv { line, source: e }
        }
    })
}

pub(crate) fn expect_fields(rec: &csv::ByteRecord, n: usize) -> Result<(), ParseError> {
    if rec.len() != n {
        return Err(ParseError::FieldCount {
            line: line_of(rec),
            expected: n,
            found: rec.len(),
        });
    }
    Ok(())
}

fn parse_tracking_record(rec: &csv::ByteRecord) -> Result<TrackingRecord, ParseError> {
    expect_fields(rec, 6)?;
    let t_ms = parse_u64(rec, 0, "t_ms")?;
    let id = field(rec, 1, "player_id")?;
    let player_id = PlayerId(
        id.parse::<u32>()
            .map_err(|_| bad_field(rec, "player_id", id, "expected an unsigned integer id"))?,
    );
    let sample = PlayerSample {
        player_id,
        pos_x: parse_f64(rec, 2, "pos_x_cm")?,
        pos_y: parse_f64(rec, 3, "pos_y_cm")?,
        vel_x: parse_f64(rec, 4, "vel_x_kmh")?,
        vel_y: parse_f64(rec, 5, "vel_y_kmh")?,
    };
    Ok(TrackingRecord { t_ms, sample })
}

/// Parses a tracking file into time-ordered frames.
///
/// Records sharing a timestamp must be adjacent in the file and timestamps
/// must increase from one group to the next. A completely empty input is
/// accepted as an empty stream.
pub fn parse_tracking<R: Read>(input: R) -> Result<Vec<Frame>, ParseError> {
    let mut rdr = reader(input);
    let mut rec = csv::ByteRecord::new();
    if !check_header(&mut rdr, &mut rec, TRACKING_HEADER)? {
        return Ok(Vec::new());
    }
    let mut frames: Vec<Frame> = Vec::new();
    while read_record(&mut rdr, &mut rec)? {
        let r = parse_tracking_record(&rec)?;
        match frames.last_mut() {
            Some(frame) if frame.t_ms == r.t_ms => {
                if frame
                    .samples
                    .iter()
                    .any(|s| s.player_id == r.sample.player_id)
                {
                    return Err(ParseError::Duplicate {
                        line: line_of(&rec),
                        t_ms: r.t_ms,
                        player: r.sample.player_id,
                    });
                }
                frame.samples.push(r.sample);
            }
            Some(frame) if frame.t_ms > r.t_ms => {
                return Err(ParseError::Ordering {
                    line: line_of(&rec),
                    t_ms: r.t_ms,
                    prev_t_ms: frame.t_ms,
                });
            }
            _ => {
                let mut samples = Vec::with_capacity(frames.last().map_or(8, |f| f.samples.len()));
                samples.push(r.sample);
                frames.push(Frame::new(r.t_ms, samples));
            }
        }
    }
    Ok(frames)
}

pub fn write_tracking<W: Write>(frames: &[Frame], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{TRACKING_HEADER}")?;
    let mut buf = ryu::Buffer::new();
    for frame in frames {
        for s in &frame.samples {
            write!(out, "{},{}", frame.t_ms, s.player_id)?;
            for v in [s.pos_x, s.pos_y, s.vel_x, s.vel_y] {
                out.write_all(b",")?;
                write_f64(&mut out, &mut buf, v)?;
            }
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

// ---------------------------------------------------------------------------
// Activity report
// ---------------------------------------------------------------------------

/// Why the game stopped, as flagged on a `stop` row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    Generic,
    Timeout,
    FreeThrow,
    Quarter,
    Half,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Generic => "generic",
            StopReason::Timeout => "timeout",
            StopReason::FreeThrow => "ft",
            StopReason::Quarter => "quarter",
            StopReason::Half => "half",
        }
    }

    /// Quarter and half-time intervals separate game periods.
    pub fn ends_period(self) -> bool {
        matches!(self, StopReason::Quarter | StopReason::Half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityAction {
    Play,
    Stop(StopReason),
}

/// One row of the activity report. `active` and the reason flags of the
/// file are derived from `action`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivityReportRow {
    pub action: ActivityAction,
    pub sec: u32,
}

impl ActivityReportRow {
    pub fn is_play(&self) -> bool {
        matches!(self.action, ActivityAction::Play)
    }
}

fn report_error(rec: &csv::ByteRecord, row: usize, rule: impl Into<String>) -> ParseError {
    ParseError::Report {
        line: line_of(rec),
        row,
        rule: rule.into(),
    }
}

fn parse_sec(rec: &csv::ByteRecord, row: usize) -> Result<u32, ParseError> {
    let s = field(rec, 1, "sec")?;
    match s.parse::<u32>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(report_error(
            rec,
            row,
            format!("sec must be a positive integer, got `{s}`"),
        )),
    }
}

pub fn parse_activity_report<R: Read>(input: R) -> Result<Vec<ActivityReportRow>, ParseError> {
    let mut rdr = reader(input);
    let mut rec = csv::ByteRecord::new();
    if !check_header(&mut rdr, &mut rec, ACTIVITY_HEADER)? {
        return Ok(Vec::new());
    }
    let mut rows: Vec<ActivityReportRow> = Vec::new();
    while read_record(&mut rdr, &mut rec)? {
        let row = rows.len() + 1;
        expect_fields(&rec, 7)?;
        let action = field(&rec, 0, "action")?;
        let sec = parse_sec(&rec, row)?;
        let active = parse_flag(&rec, 2, "active")?;
        let flags = [
            (parse_flag(&rec, 3, "timeout")?, StopReason::Timeout),
            (parse_flag(&rec, 4, "ft")?, StopReason::FreeThrow),
            (parse_flag(&rec, 5, "quarter")?, StopReason::Quarter),
            (parse_flag(&rec, 6, "half")?, StopReason::Half),
        ];
        let raised: Vec<StopReason> = flags
            .iter()
            .filter(|(on, _)| *on)
            .map(|&(_, r)| r)
            .collect();
        if raised.len() > 1 {
            return Err(report_error(
                &rec,
                row,
                "at most one of timeout/ft/quarter/half may be 1",
            ));
        }
        let action = match action {
            "play" => {
                if !active {
                    return Err(report_error(&rec, row, "a play row must have active=1"));
                }
                if !raised.is_empty() {
                    return Err(report_error(
                        &rec,
                        row,
                        "a play row cannot carry a stop reason",
                    ));
                }
                ActivityAction::Play
            }
            "stop" => {
                if active {
                    return Err(report_error(&rec, row, "a stop row must have active=0"));
                }
                ActivityAction::Stop(raised.first().copied().unwrap_or(StopReason::Generic))
            }
            other => {
                return Err(report_error(
                    &rec,
                    row,
                    format!("action must be play or stop, got `{other}`"),
                ));
            }
        };
        if let Some(prev) = rows.last() {
            if sec <= prev.sec {
                return Err(report_error(
                    &rec,
                    row,
                    format!(
                        "sec {sec} does not increase over previous row's {}",
                        prev.sec
                    ),
                ));
            }
            if prev.is_play() == matches!(action, ActivityAction::Play) {
                return Err(report_error(
                    &rec,
                    row,
                    "action must alternate between play and stop",
                ));
            }
        }
        rows.push(ActivityReportRow { action, sec });
    }
    Ok(rows)
}

pub fn write_activity_report<W: Write>(rows: &[ActivityReportRow], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{ACTIVITY_HEADER}")?;
    for row in rows {
        let (name, active, reason) = match row.action {
            ActivityAction::Play => ("play", 1, None),
            ActivityAction::Stop(r) => ("stop", 0, Some(r)),
        };
        let flag = |r: StopReason| u8::from(reason == Some(r));
        writeln!(
            out,
            "{name},{},{active},{},{},{},{}",
            row.sec,
            flag(StopReason::Timeout),
            flag(StopReason::FreeThrow),
            flag(StopReason::Quarter),
            flag(StopReason::Half),
        )?;
    }
    out.flush()
}

// ---------------------------------------------------------------------------
// Possession report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PossessionAction {
    Off,
    Def,
}

impl PossessionAction {
    pub fn as_str(self) -> &'static str {
        match self {
            PossessionAction::Off => "off",
            PossessionAction::Def => "def",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            PossessionAction::Off => PossessionAction::Def,
            PossessionAction::Def => PossessionAction::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PossessionReportRow {
    pub action: PossessionAction,
    pub sec: u32,
}

pub fn parse_possession_report<R: Read>(input: R) -> Result<Vec<PossessionReportRow>, ParseError> {
    let mut rdr = reader(input);
    let mut rec = csv::ByteRecord::new();
    if !check_header(&mut rdr, &mut rec, POSSESSION_HEADER)? {
        return Ok(Vec::new());
    }
    let mut rows: Vec<PossessionReportRow> = Vec::new();
    while read_record(&mut rdr, &mut rec)? {
        let row = rows.len() + 1;
        expect_fields(&rec, 3)?;
        let action = match field(&rec, 0, "action")? {
            "off" => PossessionAction::Off,
            "def" => PossessionAction::Def,
            other => {
                return Err(report_error(
                    &rec,
                    row,
                    format!("action must be off or def, got `{other}`"),
                ));
            }
        };
        let sec = parse_sec(&rec, row)?;
        let off = parse_flag(&rec, 2, "off")?;
        if off != (action == PossessionAction::Off) {
            return Err(report_error(
                &rec,
                row,
                "off must be 1 exactly when action is off",
            ));
        }
        if let Some(prev) = rows.last() {
            if sec <= prev.sec {
                return Err(report_error(
                    &rec,
                    row,
                    format!(
                        "sec {sec} does not increase over previous row's {}",
                        prev.sec
                    ),
                ));
            }
            if prev.action == action {
                return Err(report_error(
                    &rec,
                    row,
                    "action must alternate between off and def",
                ));
            }
        }
        rows.push(PossessionReportRow { action, sec });
    }
    Ok(rows)
}

pub fn write_possession_report<W: Write>(rows: &[PossessionReportRow], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{POSSESSION_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{}",
            row.action.as_str(),
            row.sec,
            u8::from(row.action == PossessionAction::Off)
        )?;
    }
    out.flush()
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Everything the pipeline can be configured with, already in canonical
/// units.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: CourtGeometry,
    pub params: FilterParams,
    pub orientation: Orientation,
    pub transition_band_cm: f64,
    pub grid: GridSpec,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            geometry: CourtGeometry::default(),
            params: FilterParams::default(),
            orientation: Orientation::default(),
            transition_band_cm: 400.0,
            grid: GridSpec::default(),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "half_length_cm",
    "half_width_cm",
    "ftsa_center_x_cm",
    "ftsa_radius_cm",
    "t_ft_s",
    "v_min_kmh",
    "t_vel_s",
    "transition_band_cm",
    "attack_direction_p1",
    "attack_direction_p2",
    "attack_direction_p3",
    "attack_direction_p4",
    "period_starts_s",
    "grid_vmin_min",
    "grid_vmin_max",
    "grid_vmin_step",
    "grid_tvel_min",
    "grid_tvel_max",
    "grid_tvel_step",
];

fn number(key: &str, value: &str) -> Result<f64, String> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{key}: `{value}` is not a finite number")),
    }
}

/// Seconds (possibly fractional) to whole milliseconds.
fn seconds_to_ms(key: &str, value: &str) -> Result<u64, String> {
    let s = number(key, value)?;
    if s < 0.0 {
        return Err(format!("{key}: durations cannot be negative ({value})"));
    }
    Ok((s * 1000.0).round() as u64)
}

impl Config {
    /// Applies one `key = value` setting. Used both by the file loader and
    /// by command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "half_length_cm" => self.geometry.half_length = number(key, value)?,
            "half_width_cm" => self.geometry.half_width = number(key, value)?,
            "ftsa_center_x_cm" => self.geometry.ftsa_center_abs_x = number(key, value)?,
            "ftsa_radius_cm" => self.geometry.ftsa_radius = number(key, value)?,
            "t_ft_s" => self.params.t_ft_ms = seconds_to_ms(key, value)?,
            "v_min_kmh" => self.params.v_min_kmh = number(key, value)?,
            "t_vel_s" => self.params.t_vel_ms = seconds_to_ms(key, value)?,
            "transition_band_cm" => self.transition_band_cm = number(key, value)?,
            "attack_direction_p1"
            | "attack_direction_p2"
            | "attack_direction_p3"
            | "attack_direction_p4" => {
                let period = key.as_bytes()[key.len() - 1] - b'0';
                let dir = value
                    .parse::<AttackDirection>()
                    .map_err(|e| format!("{key}: {e}"))?;
                self.orientation.directions[usize::from(period - 1)] = dir;
            }
            "period_starts_s" => {
                let mut starts = Vec::new();
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    starts.push(seconds_to_ms(key, part)?);
                }
                self.orientation.period_starts_ms = starts;
            }
            "grid_vmin_min" => self.grid.v_min.min = number(key, value)?,
            "grid_vmin_max" => self.grid.v_min.max = number(key, value)?,
            "grid_vmin_step" => self.grid.v_min.step = number(key, value)?,
            "grid_tvel_min" => self.grid.t_vel.min_ms = seconds_to_ms(key, value)?,
            "grid_tvel_max" => self.grid.t_vel.max_ms = seconds_to_ms(key, value)?,
            "grid_tvel_step" => self.grid.t_vel.step_ms = seconds_to_ms(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ParseError> {
        let invalid = |m: String| ParseError::Invalid(m);
        self.geometry
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.params.validate().map_err(invalid)?;
        if !(self.transition_band_cm.is_finite() && self.transition_band_cm > 0.0) {
            return Err(invalid(format!(
                "transition_band_cm must be positive, got {}",
                self.transition_band_cm
            )));
        }
        self.orientation.validate().map_err(invalid)?;
        self.grid.validate().map_err(invalid)?;
        Ok(())
    }
}

/// Parses a configuration file. Absent keys keep their defaults.
pub fn load_config(text: &str) -> Result<Config, ParseError> {
    let mut config = Config::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ParseError::Config {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(ParseError::Config {
                line,
                message: format!("key `{key}` given more than once"),
            });
        }
        config
            .set(key, value)
            .map_err(|message| ParseError::Config { line, message })?;
    }
    config.validate()?;
    Ok(config)
}
