//! Offence/defence/transition labelling of the retained frames and the
//! running possession counter.

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::filters::PLAYERS_ON_COURT;
use crate::ingest::{self, write_f64, ActivityAction, ActivityReportRow, ParseError};
use crate::model::{in_court, CourtGeometry, Frame};

pub const LABELS_HEADER: &str = "t_ms,mean_x_cm,poss,ord";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PossessionError {
    #[error("frame at t={t_ms} ms has {count} players on court, expected 5")]
    NotFiveOnCourt { t_ms: u64, count: usize },
    #[error("cannot number possessions of an empty sequence")]
    EmptySequence,
}

/// Basket the tracked team attacks during a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackDirection {
    PlusX,
    MinusX,
}

impl AttackDirection {
    fn sign(self) -> f64 {
        match self {
            AttackDirection::PlusX => 1.0,
            AttackDirection::MinusX => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            AttackDirection::PlusX => AttackDirection::MinusX,
            AttackDirection::MinusX => AttackDirection::PlusX,
        }
    }
}

impl fmt::Display for AttackDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackDirection::PlusX => "+x",
            AttackDirection::MinusX => "-x",
        })
    }
}

impl FromStr for AttackDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+x" | "x" => Ok(AttackDirection::PlusX),
            "-x" => Ok(AttackDirection::MinusX),
            other => Err(format!("attack direction must be +x or -x, got `{other}`")),
        }
    }
}

/// Attack direction per game period, plus where each period starts.
///
/// `period_starts_ms[k]` is the first timestamp of period `k + 2`; frames
/// before the first entry belong to period 1. Periods past the fourth
/// (overtime) keep the fourth period's direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Orientation {
    pub directions: [AttackDirection; 4],
    pub period_starts_ms: Vec<u64>,
}

impl Default for Orientation {
    fn default() -> Self {
        use AttackDirection::*;
        Self {
            directions: [PlusX, PlusX, MinusX, MinusX],
            period_starts_ms: Vec::new(),
        }
    }
}

impl Orientation {
    pub fn fixed(direction: AttackDirection) -> Self {
        Self {
            directions: [direction; 4],
            period_starts_ms: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.period_starts_ms.windows(2).any(|w| w[0] >= w[1]) {
            return Err("period starts must be strictly increasing".into());
        }
        Ok(())
    }

    /// 1-based period containing `t_ms`.
    pub fn period_of(&self, t_ms: u64) -> usize {
        1 + self.period_starts_ms.partition_point(|&s| s <= t_ms)
    }

    pub fn direction_at(&self, t_ms: u64) -> AttackDirection {
        self.directions[self.period_of(t_ms).min(4) - 1]
    }

    /// Takes period boundaries from an activity report: a period starts at
    /// the first `play` row following a quarter or half-time stop.
    pub fn with_periods_from_report(mut self, rows: &[ActivityReportRow]) -> Self {
        let mut starts = Vec::new();
        let mut pending = false;
        for row in rows {
            match row.action {
                ActivityAction::Stop(reason) if reason.ends_period() => pending = true,
                ActivityAction::Play if pending => {
                    starts.push(u64::from(row.sec - 1) * 1000);
                    pending = false;
                }
                _ => {}
            }
        }
        self.period_starts_ms = starts;
        self
    }

    pub fn mirrored(&self) -> Self {
        Self {
            directions: self.directions.map(AttackDirection::flipped),
            period_starts_ms: self.period_starts_ms.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Poss {
    Offensive,
    Defensive,
    Transition,
}

impl Poss {
    pub fn as_str(self) -> &'static str {
        match self {
            Poss::Offensive => "offensive",
            Poss::Defensive => "defensive",
            Poss::Transition => "transition",
        }
    }
}

impl FromStr for Poss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offensive" => Ok(Poss::Offensive),
            "defensive" => Ok(Poss::Defensive),
            "transition" => Ok(Poss::Transition),
            other => Err(format!("unknown possession type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PossessionLabel {
    pub poss: Poss,
    pub ord: u32,
}

/// Average `x` of the five on-court players.
pub fn mean_x(frame: &Frame, geom: &CourtGeometry) -> Result<f64, PossessionError> {
    let mut count = 0;
    let mut sum = 0.0;
    for s in frame
        .samples
        .iter()
        .filter(|s| in_court(s.pos_x, s.pos_y, geom))
    {
        count += 1;
        sum += s.pos_x;
    }
    if count != PLAYERS_ON_COURT {
        return Err(PossessionError::NotFiveOnCourt {
            t_ms: frame.t_ms,
            count,
        });
    }
    Ok(sum / PLAYERS_ON_COURT as f64)
}

/// Side of the court the team stands on. `|mean_x| == band` is transition.
pub fn classify_poss(mean_x_cm: f64, direction: AttackDirection, band_cm: f64) -> Poss {
    let x = mean_x_cm * direction.sign();
    if x > band_cm {
        Poss::Offensive
    } else if x < -band_cm {
        Poss::Defensive
    } else {
        Poss::Transition
    }
}

/// Possession ordinal for every label: starts at 1 and increases whenever a
/// transition frame is followed by an offensive or defensive one.
pub fn assign_ord(poss: &[Poss]) -> Result<Vec<u32>, PossessionError> {
    if poss.is_empty() {
        return Err(PossessionError::EmptySequence);
    }
    let mut ord = Vec::with_capacity(poss.len());
    let mut current = 1;
    ord.push(current);
    for w in poss.windows(2) {
        if w[0] == Poss::Transition && w[1] != Poss::Transition {
            current += 1;
        }
        ord.push(current);
    }
    Ok(ord)
}

/// Offensive/defensive label changes with no transition frame in between.
/// These do not advance the counter, so a high count hints at undercounting.
pub fn direct_flips(poss: &[Poss]) -> usize {
    poss.windows(2)
        .filter(|w| w[0] != Poss::Transition && w[1] != Poss::Transition && w[0] != w[1])
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledFrame {
    pub t_ms: u64,
    pub mean_x_cm: f64,
    pub label: PossessionLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labeling {
    pub frames: Vec<LabeledFrame>,
    pub direct_flips: usize,
}

impl Labeling {
    /// Total number of possessions (the final ordinal), zero when empty.
    pub fn possessions(&self) -> u32 {
        self.frames.last().map_or(0, |f| f.label.ord)
    }
}

pub fn label_possessions(
    xr: &[Frame],
    geom: &CourtGeometry,
    orientation: &Orientation,
    band_cm: f64,
) -> Result<Labeling, PossessionError> {
    if xr.is_empty() {
        return Ok(Labeling::default());
    }
    let mut means = Vec::with_capacity(xr.len());
    let mut poss = Vec::with_capacity(xr.len());
    for frame in xr {
        let m = mean_x(frame, geom)?;
        means.push(m);
        poss.push(classify_poss(
            m,
            orientation.direction_at(frame.t_ms),
            band_cm,
        ));
    }
    let ord = assign_ord(&poss)?;
    let frames = xr
        .iter()
        .zip(means)
        .zip(poss.iter().zip(ord))
        .map(|((f, m), (&p, o))| LabeledFrame {
            t_ms: f.t_ms,
            mean_x_cm: m,
            label: PossessionLabel { poss: p, ord: o },
        })
        .collect();
    Ok(Labeling {
        frames,
        direct_flips: direct_flips(&poss),
    })
}

pub fn write_labels<W: Write>(frames: &[LabeledFrame], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{LABELS_HEADER}")?;
    let mut buf = ryu::Buffer::new();
    for f in frames {
        write!(out, "{},", f.t_ms)?;
        write_f64(&mut out, &mut buf, f.mean_x_cm)?;
        writeln!(out, ",{},{}", f.label.poss.as_str(), f.label.ord)?;
    }
    out.flush()
}

pub fn parse_labels<R: Read>(input: R) -> Result<Vec<LabeledFrame>, ParseError> {
    let mut rdr = ingest::reader(input);
    let mut rec = csv::ByteRecord::new();
    let mut out: Vec<LabeledFrame> = Vec::new();
    if !ingest::check_header(&mut rdr, &mut rec, LABELS_HEADER)? {
        return Ok(out);
    }
    while ingest::read_record(&mut rdr, &mut rec)? {
        ingest::expect_fields(&rec, 4)?;
        let t_ms = ingest::parse_u64(&rec, 0, "t_ms")?;
        let mean_x_cm = ingest::parse_f64(&rec, 1, "mean_x_cm")?;
        let raw = ingest::field(&rec, 2, "poss")?;
        let poss: Poss = raw
            .parse()
            .map_err(|e: String| ingest::bad_field(&rec, "poss", raw, &e))?;
        let raw_ord = ingest::field(&rec, 3, "ord")?;
        let ord = match raw_ord.parse::<u32>() {
            Ok(v) if v >= 1 => v,
            _ => {
                return Err(ingest::bad_field(
                    &rec,
                    "ord",
                    raw_ord,
                    "expected a positive integer",
                ))
            }
        };
        if let Some(prev) = out.last() {
            if prev.t_ms >= t_ms {
                return Err(ParseError::Ordering {
                    line: ingest::line_of(&rec),
                    t_ms,
                    prev_t_ms: prev.t_ms,
                });
            }
            if ord < prev.label.ord || ord > prev.label.ord + 1 {
                return Err(ingest::bad_field(
                    &rec,
                    "ord",
                    raw_ord,
                    "ordinal must stay or advance by one",
                ));
            }
        } else if ord != 1 {
            return Err(ingest::bad_field(
                &rec,
                "ord",
                raw_ord,
                "first ordinal must be 1",
            ));
        }
        out.push(LabeledFrame {
            t_ms,
            mean_x_cm,
            label: PossessionLabel { poss, ord },
        });
    }
    Ok(out)
}
