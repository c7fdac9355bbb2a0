//! Per-second timelines: the annotated truth expanded from the reports, and
//! the filter's frame-level output aggregated to one vote per second.
//!
//! Second `s` (1-based) covers `t_ms` in `[(s - 1) * 1000, s * 1000)`.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::filters::DropMask;
use crate::ingest::{
    self, ActivityAction, ActivityReportRow, ParseError, PossessionAction, PossessionReportRow,
    StopReason,
};
use crate::possession::{LabeledFrame, Poss};
use crate::tuning::ConfusionCounts;

pub const TIMELINE_HEADER: &str = "sec,truth_active,pred_active,truth_poss,pred_poss";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error("report row at second {last_sec} lies beyond the {duration_s} s range")]
    Range { duration_s: u32, last_sec: u32 },
    #[error("timelines cover different ranges ({left} s vs {right} s)")]
    RangeMismatch { left: usize, right: usize },
    #[error("possession report has no rows")]
    NoRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityLabel {
    Active,
    /// `None` before the first report row.
    Inactive(Option<StopReason>),
}

impl ActivityLabel {
    pub fn is_active(self) -> bool {
        matches!(self, ActivityLabel::Active)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityTimeline {
    labels: Vec<ActivityLabel>,
}

impl ActivityTimeline {
    pub fn from_labels(labels: Vec<ActivityLabel>) -> Self {
        Self { labels }
    }

    pub fn duration_s(&self) -> usize {
        self.labels.len()
    }

    /// Label of 1-based second `sec`.
    pub fn at(&self, sec: usize) -> ActivityLabel {
        self.labels[sec - 1]
    }

    pub fn labels(&self) -> &[ActivityLabel] {
        &self.labels
    }

    pub fn inactive_seconds(&self) -> usize {
        self.labels.iter().filter(|l| !l.is_active()).count()
    }
}

/// Offence/defence truth per second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PossessionTimeline {
    labels: Vec<PossessionAction>,
}

impl PossessionTimeline {
    pub fn from_labels(labels: Vec<PossessionAction>) -> Self {
        Self { labels }
    }

    pub fn duration_s(&self) -> usize {
        self.labels.len()
    }

    pub fn at(&self, sec: usize) -> PossessionAction {
        self.labels[sec - 1]
    }

    pub fn labels(&self) -> &[PossessionAction] {
        &self.labels
    }
}

fn check_range(last_sec: Option<u32>, duration_s: u32) -> Result<(), TimelineError> {
    match last_sec {
        Some(last_sec) if last_sec > duration_s => Err(TimelineError::Range {
            duration_s,
            last_sec,
        }),
        _ => Ok(()),
    }
}

/// Step-function expansion of the activity report: each row's state holds
/// from its own second until the next row. Seconds before the first row are
/// pre-game and count as inactive.
pub fn expand_activity(
    rows: &[ActivityReportRow],
    duration_s: u32,
) -> Result<ActivityTimeline, TimelineError> {
    check_range(rows.last().map(|r| r.sec), duration_s)?;
    let mut labels = vec![ActivityLabel::Inactive(None); duration_s as usize];
    for (i, row) in rows.iter().enumerate() {
        let end = rows.get(i + 1).map_or(duration_s, |next| next.sec - 1);
        let label = match row.action {
            ActivityAction::Play => ActivityLabel::Active,
            ActivityAction::Stop(reason) => ActivityLabel::Inactive(Some(reason)),
        };
        labels[(row.sec - 1) as usize..end as usize].fill(label);
    }
    Ok(ActivityTimeline { labels })
}

/// Expansion of the possession report. Each row closes the phase that
/// precedes it: its action labels the seconds from the previous row up to
/// the second before its own. Seconds from the last row onward keep the
/// last row's action.
///
/// With the rows `off,1` `def,32` `off,72` `def,138` this yields defence on
/// 1-31, offence on 32-71 and defence from 72 onward.
pub fn expand_possession(
    rows: &[PossessionReportRow],
    duration_s: u32,
) -> Result<PossessionTimeline, TimelineError> {
    let last = rows.last().ok_or(TimelineError::NoRows)?;
    check_range(Some(last.sec), duration_s)?;
    let mut labels = Vec::with_capacity(duration_s as usize);
    let mut next = 0;
    for sec in 1..=duration_s {
        while next < rows.len() && rows[next].sec <= sec {
            next += 1;
        }
        labels.push(rows.get(next).unwrap_or(last).action);
    }
    Ok(PossessionTimeline { labels })
}

/// Inverse of [`expand_possession`]: the shortest report that expands to
/// `timeline`.
///
/// A final phase lasting a single second cannot be expressed in this report
/// layout; it is folded into the phase before it.
pub fn possession_rows(timeline: &PossessionTimeline) -> Vec<PossessionReportRow> {
    let mut labels = timeline.labels().to_vec();
    let n = labels.len();
    if n == 0 {
        return Vec::new();
    }
    if n >= 2 {
        labels[n - 1] = labels[n - 2];
    }
    let mut rows: Vec<PossessionReportRow> = (2..n)
        .filter(|&sec| labels[sec - 1] != labels[sec - 2])
        .map(|sec| PossessionReportRow {
            action: labels[sec - 2],
            sec: sec as u32,
        })
        .collect();
    rows.push(PossessionReportRow {
        action: labels[n - 1],
        sec: n as u32,
    });
    rows
}

/// Majority possession label of a second's retained frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MajorityPoss {
    Off,
    Def,
    Transition,
    None,
}

impl MajorityPoss {
    pub fn as_str(self) -> &'static str {
        match self {
            MajorityPoss::Off => "off",
            MajorityPoss::Def => "def",
            MajorityPoss::Transition => "transition",
            MajorityPoss::None => "none",
        }
    }
}

/// Aggregated prediction per second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionTimeline {
    pub inactive: Vec<bool>,
    pub poss: Vec<MajorityPoss>,
}

impl PredictionTimeline {
    pub fn duration_s(&self) -> usize {
        self.inactive.len()
    }
}

/// Filter and labelling outcome of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutcome {
    pub t_ms: u64,
    pub dropped: bool,
    /// Possession label of a retained frame.
    pub poss: Option<Poss>,
}

/// Joins a drop mask with the labels of the retained frames.
pub fn frame_outcomes(mask: &DropMask, labels: &[LabeledFrame]) -> Vec<FrameOutcome> {
    let mut labels = labels.iter().peekable();
    mask.t_ms
        .iter()
        .zip(&mask.reasons)
        .map(|(&t_ms, r)| {
            while labels.next_if(|l| l.t_ms < t_ms).is_some() {}
            let poss = if r.is_kept() {
                labels.next_if(|l| l.t_ms == t_ms).map(|l| l.label.poss)
            } else {
                None
            };
            FrameOutcome {
                t_ms,
                dropped: !r.is_kept(),
                poss,
            }
        })
        .collect()
}

fn second_index(t_ms: u64, duration_s: usize) -> Option<usize> {
    let idx = (t_ms / 1000) as usize;
    (idx < duration_s).then_some(idx)
}

/// Per-second inactivity vote: a second is predicted inactive when at least
/// half of its frames were dropped, or when it has no frames at all.
pub fn per_second_inactive(t_ms: &[u64], dropped: &[bool], duration_s: usize) -> Vec<bool> {
    let mut total = vec![0u32; duration_s];
    let mut hits = vec![0u32; duration_s];
    for (&t, &d) in t_ms.iter().zip(dropped) {
        if let Some(i) = second_index(t, duration_s) {
            total[i] += 1;
            hits[i] += u32::from(d);
        }
    }
    total
        .iter()
        .zip(&hits)
        .map(|(&n, &d)| n == 0 || 2 * d >= n)
        .collect()
}

pub fn aggregate_predictions(frames: &[FrameOutcome], duration_s: u32) -> PredictionTimeline {
    let duration = duration_s as usize;
    let t_ms: Vec<u64> = frames.iter().map(|f| f.t_ms).collect();
    let dropped: Vec<bool> = frames.iter().map(|f| f.dropped).collect();
    let inactive = per_second_inactive(&t_ms, &dropped, duration);

    // off, def, transition votes from retained frames
    let mut votes = vec![[0u32; 3]; duration];
    for f in frames.iter().filter(|f| !f.dropped) {
        if let (Some(i), Some(p)) = (second_index(f.t_ms, duration), f.poss) {
            let slot = match p {
                Poss::Offensive => 0,
                Poss::Defensive => 1,
                Poss::Transition => 2,
            };
            votes[i][slot] += 1;
        }
    }
    let poss = votes
        .iter()
        .map(|&[off, def, tr]| {
            if off + def + tr == 0 {
                MajorityPoss::None
            } else if off > def && off > tr {
                MajorityPoss::Off
            } else if def > off && def > tr {
                MajorityPoss::Def
            } else {
                MajorityPoss::Transition
            }
        })
        .collect();
    PredictionTimeline { inactive, poss }
}

/// Agreement of the predicted offence/defence labels with the truth.
/// Offence is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AccordanceReport {
    pub counts: ConfusionCounts,
    pub excluded_transition: usize,
    pub excluded_none: usize,
}

pub fn offdef_accordance(
    pred: &PredictionTimeline,
    truth: &PossessionTimeline,
) -> AccordanceReport {
    let mut report = AccordanceReport::default();
    for (p, &t) in pred.poss.iter().zip(truth.labels()) {
        let predicted_off = match p {
            MajorityPoss::Off => true,
            MajorityPoss::Def => false,
            MajorityPoss::Transition => {
                report.excluded_transition += 1;
                continue;
            }
            MajorityPoss::None => {
                report.excluded_none += 1;
                continue;
            }
        };
        report
            .counts
            .record(predicted_off, t == PossessionAction::Off);
    }
    report
}

/// One line of the timeline export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineRow {
    pub sec: u32,
    pub truth_active: bool,
    pub pred_active: bool,
    pub truth_poss: Option<PossessionAction>,
    pub pred_poss: MajorityPoss,
}

pub fn timeline_rows(
    truth: &ActivityTimeline,
    pred: &PredictionTimeline,
    truth_poss: Option<&PossessionTimeline>,
) -> Result<Vec<TimelineRow>, TimelineError> {
    if truth.duration_s() != pred.duration_s() {
        return Err(TimelineError::RangeMismatch {
            left: truth.duration_s(),
            right: pred.duration_s(),
        });
    }
    Ok((1..=truth.duration_s())
        .map(|sec| TimelineRow {
            sec: sec as u32,
            truth_active: truth.at(sec).is_active(),
            pred_active: !pred.inactive[sec - 1],
            truth_poss: truth_poss
                .filter(|p| sec <= p.duration_s())
                .map(|p| p.at(sec)),
            pred_poss: pred.poss[sec - 1],
        })
        .collect())
}

pub fn write_timeline<W: Write>(rows: &[TimelineRow], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{TIMELINE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.sec,
            u8::from(r.truth_active),
            u8::from(r.pred_active),
            r.truth_poss.map_or("none", PossessionAction::as_str),
            r.pred_poss.as_str()
        )?;
    }
    out.flush()
}

pub fn parse_timeline<R: Read>(input: R) -> Result<Vec<TimelineRow>, ParseError> {
    let mut rdr = ingest::reader(input);
    let mut rec = csv::ByteRecord::new();
    let mut rows = Vec::new();
    if !ingest::check_header(&mut rdr, &mut rec, TIMELINE_HEADER)? {
        return Ok(rows);
    }
    while ingest::read_record(&mut rdr, &mut rec)? {
        ingest::expect_fields(&rec, 5)?;
        let sec = ingest::parse_u64(&rec, 0, "sec")?;
        let truth_poss = match ingest::field(&rec, 3, "truth_poss")? {
            "off" => Some(PossessionAction::Off),
            "def" => Some(PossessionAction::Def),
            "none" => None,
            other => {
                return Err(ingest::bad_field(
                    &rec,
                    "truth_poss",
                    other,
                    "expected off, def or none",
                ))
            }
        };
        let pred_poss = match ingest::field(&rec, 4, "pred_poss")? {
            "off" => MajorityPoss::Off,
            "def" => MajorityPoss::Def,
            "transition" => MajorityPoss::Transition,
            "none" => MajorityPoss::None,
            other => {
                return Err(ingest::bad_field(
                    &rec,
                    "pred_poss",
                    other,
                    "expected off, def, transition or none",
                ))
            }
        };
        rows.push(TimelineRow {
            sec: u32::try_from(sec)
                .map_err(|_| ingest::bad_field(&rec, "sec", &sec.to_string(), "out of range"))?,
            truth_active: ingest::parse_flag(&rec, 1, "truth_active")?,
            pred_active: ingest::parse_flag(&rec, 2, "pred_active")?,
            truth_poss,
            pred_poss,
        });
    }
    Ok(rows)
}
