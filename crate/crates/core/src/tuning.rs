//! Threshold tuning against the annotated activity timeline.
//!
//! "Inactive" is the positive class. For every `V_min` on the grid the
//! `T_vel` sweep traces an ROC curve whose area ranks that `V_min`; the best
//! `V_min` is then paired with the `T_vel` maximizing Youden's index.
//!
//! Counts are integers throughout. Rates are divided out only at the end,
//! and every argmax compares exact integer quantities, so ties are genuine
//! ties and break toward the smallest parameter.

use std::cmp::Ordering;
use std::io::{self, Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::filters::{criterion_free_throw, criterion_not_five, mark_long_runs, SpeedProfile};
use crate::ground_truth::{
    per_second_inactive, ActivityTimeline, PredictionTimeline, TimelineError,
};
use crate::ingest::{self, ParseError};
use crate::model::{CourtGeometry, Frame};

pub const AUC_HEADER: &str = "v_min_kmh,auc";
pub const YOUDEN_HEADER: &str = "t_vel_s,sensitivity,specificity,youden";
pub const GRID_HEADER: &str = "v_min_kmh,t_vel_s,tp,tn,fp,fn,sensitivity,specificity";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("sensitivity is undefined: no positive (inactive) seconds in the truth")]
    Sensitivity,
    #[error("specificity is undefined: no negative (active) seconds in the truth")]
    Specificity,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuningError {
    #[error("degenerate ground truth: {0}")]
    Degenerate(#[from] RateError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error("invalid grid: {0}")]
    Grid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted_positive: bool, truly_positive: bool) {
        match (predicted_positive, truly_positive) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn sensitivity(&self) -> Result<f64, RateError> {
        sensitivity(self)
    }

    pub fn specificity(&self) -> Result<f64, RateError> {
        specificity(self)
    }
}

/// Per-second confusion of predicted vs. annotated inactivity.
pub fn confusion(
    pred: &PredictionTimeline,
    truth: &ActivityTimeline,
) -> Result<ConfusionCounts, TimelineError> {
    confusion_from_flags(&pred.inactive, truth)
}

fn confusion_from_flags(
    pred_inactive: &[bool],
    truth: &ActivityTimeline,
) -> Result<ConfusionCounts, TimelineError> {
    if pred_inactive.len() != truth.duration_s() {
        return Err(TimelineError::RangeMismatch {
            left: pred_inactive.len(),
            right: truth.duration_s(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, t) in pred_inactive.iter().zip(truth.labels()) {
        c.record(p, !t.is_active());
    }
    Ok(c)
}

pub fn sensitivity(c: &ConfusionCounts) -> Result<f64, RateError> {
    match c.positives() {
        0 => Err(RateError::Sensitivity),
        p => Ok(c.tp as f64 / p as f64),
    }
}

pub fn specificity(c: &ConfusionCounts) -> Result<f64, RateError> {
    match c.negatives() {
        0 => Err(RateError::Specificity),
        n => Ok(c.tn as f64 / n as f64),
    }
}

pub fn youden(sens: f64, spec: f64) -> f64 {
    sens + spec - 1.0
}

/// One point of an ROC curve, produced by one `T_vel` threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub t_vel_ms: u64,
}

impl RocPoint {
    pub fn from_counts(c: &ConfusionCounts, t_vel_ms: u64) -> Result<Self, RateError> {
        Ok(Self {
            fpr: 1.0 - specificity(c)?,
            tpr: sensitivity(c)?,
            t_vel_ms,
        })
    }
}

/// Trapezoidal area under the curve through `(0,0)`, the points sorted by
/// false positive rate (then true positive rate), and `(1,1)`.
///
/// The area is accumulated as `0.5` plus the signed area between the curve
/// and the diagonal, so points on the diagonal contribute exactly zero.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    curve.push((0.0, 0.0));
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    curve.extend(sorted);
    curve.push((1.0, 1.0));
    let lift: f64 = curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * ((w[0].1 - w[0].0) + (w[1].1 - w[1].0)) / 2.0)
        .sum();
    0.5 + lift
}

/// Twice the area under the ROC curve scaled by `positives * negatives`,
/// computed on raw counts so the result is exact.
fn auc_numerator(cells: &[ConfusionCounts]) -> u128 {
    let (p, n) = match cells.first() {
        Some(c) => (c.positives(), c.negatives()),
        None => return 0,
    };
    let mut curve: Vec<(u64, u64)> = Vec::with_capacity(cells.len() + 2);
    curve.push((0, 0));
    let mut sorted: Vec<(u64, u64)> = cells.iter().map(|c| (c.fp, c.tp)).collect();
    sorted.sort_unstable();
    curve.extend(sorted);
    curve.push((n, p));
    curve
        .windows(2)
        .map(|w| u128::from(w[1].0 - w[0].0) * u128::from(w[0].1 + w[1].1))
        .sum()
}

/// `V_min` values (km/h) from `min` to `max` inclusive in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl SpeedGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.min + k as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<(), String> {
        if ![self.min, self.max, self.step]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err("V_min grid bounds must be finite".into());
        }
        if self.step <= 0.0 {
            return Err(format!(
                "V_min grid step must be positive, got {}",
                self.step
            ));
        }
        if self.min < 0.0 || self.min > self.max {
            return Err(format!(
                "V_min grid needs 0 <= min <= max, got [{}, {}]",
                self.min, self.max
            ));
        }
        Ok(())
    }
}

/// `T_vel` values in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TvelGrid {
    pub min_ms: u64,
    pub max_ms: u64,
    pub step_ms: u64,
}

impl TvelGrid {
    pub fn values(&self) -> Vec<u64> {
        (self.min_ms..=self.max_ms)
            .step_by(self.step_ms as usize)
            .collect()
    }

    fn validate(&self) -> Result<(), String> {
        if self.step_ms == 0 {
            return Err("T_vel grid step must be positive".into());
        }
        if self.min_ms > self.max_ms {
            return Err(format!(
                "T_vel grid needs min <= max, got [{}, {}] ms",
                self.min_ms, self.max_ms
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub v_min: SpeedGrid,
    pub t_vel: TvelGrid,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            v_min: SpeedGrid {
                min: 0.0,
                max: 20.0,
                step: 0.25,
            },
            t_vel: TvelGrid {
                min_ms: 0,
                max_ms: 20_000,
                step_ms: 1_000,
            },
        }
    }
}

impl GridSpec {
    pub fn single(v_min_kmh: f64, t_vel_ms: u64) -> Self {
        Self {
            v_min: SpeedGrid {
                min: v_min_kmh,
                max: v_min_kmh,
                step: 1.0,
            },
            t_vel: TvelGrid {
                min_ms: t_vel_ms,
                max_ms: t_vel_ms,
                step_ms: 1_000,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.v_min.validate()?;
        self.t_vel.validate()
    }
}

/// Everything about a stream that does not depend on `V_min` or `T_vel`,
/// computed once and shared read-only by all grid cells.
pub struct Evaluator<'a> {
    profile: SpeedProfile,
    fixed_drop: Vec<bool>,
    truth: &'a ActivityTimeline,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        frames: &[Frame],
        geom: &CourtGeometry,
        t_ft_ms: u64,
        truth: &'a ActivityTimeline,
    ) -> Self {
        let not_five = criterion_not_five(frames, geom);
        let ft = criterion_free_throw(frames, geom, t_ft_ms);
        Self {
            profile: SpeedProfile::new(frames, geom),
            fixed_drop: not_five.iter().zip(&ft).map(|(&a, &b)| a || b).collect(),
            truth,
        }
    }

    fn counts_for(&self, slow: &[bool], t_vel_ms: u64) -> ConfusionCounts {
        let spell = mark_long_runs(&self.profile.t_ms, slow, t_vel_ms);
        let dropped: Vec<bool> = spell
            .iter()
            .zip(&self.fixed_drop)
            .map(|(&a, &b)| a || b)
            .collect();
        let inactive = per_second_inactive(&self.profile.t_ms, &dropped, self.truth.duration_s());
        confusion_from_flags(&inactive, self.truth).expect("prediction sized to the truth")
    }

    /// Confusion counts for every `T_vel` at one `V_min`.
    pub fn row(&self, v_min_kmh: f64, t_vel_ms: &[u64]) -> Vec<ConfusionCounts> {
        let slow = self.profile.slow_frames(v_min_kmh);
        t_vel_ms
            .iter()
            .map(|&t| self.counts_for(&slow, t))
            .collect()
    }

    pub fn cell(&self, v_min_kmh: f64, t_vel_ms: u64) -> ConfusionCounts {
        self.row(v_min_kmh, &[t_vel_ms])[0]
    }
}

/// ROC points traced by sweeping `T_vel` at a fixed `V_min`.
pub fn roc_for_vmin(
    v_min_kmh: f64,
    t_vel: &TvelGrid,
    frames: &[Frame],
    geom: &CourtGeometry,
    t_ft_ms: u64,
    truth: &ActivityTimeline,
) -> Result<Vec<RocPoint>, TuningError> {
    t_vel.validate().map_err(TuningError::Grid)?;
    let grid = t_vel.values();
    let evaluator = Evaluator::new(frames, geom, t_ft_ms, truth);
    evaluator
        .row(v_min_kmh, &grid)
        .iter()
        .zip(&grid)
        .map(|(c, &t)| RocPoint::from_counts(c, t).map_err(TuningError::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub v_min_kmh: f64,
    pub t_vel_ms: u64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucRow {
    pub v_min_kmh: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoudenRow {
    pub t_vel_ms: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub youden: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub auc_table: Vec<AucRow>,
    pub v_min_star: f64,
    pub auc_star: f64,
    pub youden_table: Vec<YoudenRow>,
    pub t_vel_star_ms: u64,
    pub youden_star: f64,
    /// Row-major over (`V_min`, `T_vel`).
    pub grid: Vec<GridCell>,
}

/// Index of the first maximum.
fn first_argmax<T: Ord + Copy>(values: impl IntoIterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v.cmp(&b) == Ordering::Greater) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Full grid search. Cells are evaluated in parallel; the result does not
/// depend on scheduling.
pub fn tune(
    frames: &[Frame],
    geom: &CourtGeometry,
    t_ft_ms: u64,
    truth: &ActivityTimeline,
    grids: &GridSpec,
) -> Result<TuningResult, TuningError> {
    grids.validate().map_err(TuningError::Grid)?;
    let positives = truth.inactive_seconds() as u64;
    let negatives = truth.duration_s() as u64 - positives;
    if positives == 0 {
        return Err(RateError::Sensitivity.into());
    }
    if negatives == 0 {
        return Err(RateError::Specificity.into());
    }

    let v_values = grids.v_min.values();
    let t_values = grids.t_vel.values();
    let evaluator = Evaluator::new(frames, geom, t_ft_ms, truth);
    let rows: Vec<Vec<ConfusionCounts>> = v_values
        .par_iter()
        .map(|&v| evaluator.row(v, &t_values))
        .collect();

    let area_scale = 2.0 * positives as f64 * negatives as f64;
    let numerators: Vec<u128> = rows.iter().map(|r| auc_numerator(r)).collect();
    let best_v = first_argmax(numerators.iter().copied()).expect("grid has at least one V_min");
    let auc_table = v_values
        .iter()
        .zip(&numerators)
        .map(|(&v, &num)| AucRow {
            v_min_kmh: v,
            auc: num as f64 / area_scale,
        })
        .collect();

    // sens + spec - 1 scaled by P * N
    let best_row = &rows[best_v];
    let scaled_sum = |c: &ConfusionCounts| {
        u128::from(c.tp) * u128::from(negatives) + u128::from(c.tn) * u128::from(positives)
    };
    let best_t =
        first_argmax(best_row.iter().map(scaled_sum)).expect("grid has at least one T_vel");
    let youden_table: Vec<YoudenRow> = best_row
        .iter()
        .zip(&t_values)
        .map(|(c, &t)| {
            let sens = c.tp as f64 / positives as f64;
            let spec = c.tn as f64 / negatives as f64;
            YoudenRow {
                t_vel_ms: t,
                sensitivity: sens,
                specificity: spec,
                youden: youden(sens, spec),
            }
        })
        .collect();

    let grid = v_values
        .iter()
        .zip(&rows)
        .flat_map(|(&v, row)| {
            t_values.iter().zip(row).map(move |(&t, &counts)| GridCell {
                v_min_kmh: v,
                t_vel_ms: t,
                counts,
            })
        })
        .collect();

    Ok(TuningResult {
        v_min_star: v_values[best_v],
        auc_star: numerators[best_v] as f64 / area_scale,
        t_vel_star_ms: t_values[best_t],
        youden_star: youden_table[best_t].youden,
        auc_table,
        youden_table,
        grid,
    })
}

fn seconds(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

pub fn write_auc_table<W: Write>(rows: &[AucRow], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{AUC_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{}", r.v_min_kmh, r.auc)?;
    }
    out.flush()
}

pub fn write_youden_table<W: Write>(rows: &[YoudenRow], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{YOUDEN_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            seconds(r.t_vel_ms),
            r.sensitivity,
            r.specificity,
            r.youden
        )?;
    }
    out.flush()
}

pub fn write_grid<W: Write>(cells: &[GridCell], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{GRID_HEADER}")?;
    for cell in cells {
        let c = &cell.counts;
        let rate = |r: Result<f64, RateError>| {
            r.map_or_else(|_| "undefined".to_string(), |v| v.to_string())
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            cell.v_min_kmh,
            seconds(cell.t_vel_ms),
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            rate(c.sensitivity()),
            rate(c.specificity()),
        )?;
    }
    out.flush()
}

fn parse_seconds_ms(
    rec: &csv::ByteRecord,
    idx: usize,
    column: &'static str,
) -> Result<u64, ParseError> {
    let s = ingest::parse_f64(rec, idx, column)?;
    if s < 0.0 {
        return Err(ingest::bad_field(
            rec,
            column,
            &s.to_string(),
            "negative duration",
        ));
    }
    Ok((s * 1000.0).round() as u64)
}

pub fn parse_auc_table<R: Read>(input: R) -> Result<Vec<AucRow>, ParseError> {
    let mut rdr = ingest::reader(input);
    let mut rec = csv::ByteRecord::new();
    let mut rows = Vec::new();
    if !ingest::check_header(&mut rdr, &mut rec, AUC_HEADER)? {
        return Ok(rows);
    }
    while ingest::read_record(&mut rdr, &mut rec)? {
        ingest::expect_fields(&rec, 2)?;
        rows.push(AucRow {
            v_min_kmh: ingest::parse_f64(&rec, 0, "v_min_kmh")?,
            auc: ingest::parse_f64(&rec, 1, "auc")?,
        });
    }
    Ok(rows)
}

pub fn parse_youden_table<R: Read>(input: R) -> Result<Vec<YoudenRow>, ParseError> {
    let mut rdr = ingest::reader(input);
    let mut rec = csv::ByteRecord::new();
    let mut rows = Vec::new();
    if !ingest::check_header(&mut rdr, &mut rec, YOUDEN_HEADER)? {
        return Ok(rows);
    }
    while ingest::read_record(&mut rdr, &mut rec)? {
        ingest::expect_fields(&rec, 4)?;
        rows.push(YoudenRow {
            t_vel_ms: parse_seconds_ms(&rec, 0, "t_vel_s")?,
            sensitivity: ingest::parse_f64(&rec, 1, "sensitivity")?,
            specificity: ingest::parse_f64(&rec, 2, "specificity")?,
            youden: ingest::parse_f64(&rec, 3, "youden")?,
        });
    }
    Ok(rows)
}

pub fn parse_grid<R: Read>(input: R) -> Result<Vec<GridCell>, ParseError> {
    let mut rdr = ingest::reader(input);
    let mut rec = csv::ByteRecord::new();
    let mut cells = Vec::new();
    if !ingest::check_header(&mut rdr, &mut rec, GRID_HEADER)? {
        return Ok(cells);
    }
    while ingest::read_record(&mut rdr, &mut rec)? {
        ingest::expect_fields(&rec, 8)?;
        let counts = ConfusionCounts {
            tp: ingest::parse_u64(&rec, 2, "tp")?,
            tn: ingest::parse_u64(&rec, 3, "tn")?,
            fp: ingest::parse_u64(&rec, 4, "fp")?,
            fn_: ingest::parse_u64(&rec, 5, "fn")?,
        };
        // rates are derived; check they agree with the counts
        for (idx, column, expected) in [
            (6, "sensitivity", counts.sensitivity()),
            (7, "specificity", counts.specificity()),
        ] {
            let raw = ingest::field(&rec, idx, column)?;
            let ok = match expected {
                Ok(v) => raw.parse::<f64>().is_ok_and(|r| r == v),
                Err(_) => raw == "undefined",
            };
            if !ok {
                return Err(ingest::bad_field(
                    &rec,
                    column,
                    raw,
                    "does not match the counts",
                ));
            }
        }
        cells.push(GridCell {
            v_min_kmh: ingest::parse_f64(&rec, 0, "v_min_kmh")?,
            t_vel_ms: parse_seconds_ms(&rec, 1, "t_vel_s")?,
            counts,
        });
    }
    Ok(cells)
}
