//! Synthetic games with known ground truth.
//!
//! A [`GameScript`] is a list of segments, each holding one game state for a
//! whole number of seconds. [`generate`] turns it into a 50 Hz tracking
//! stream and the two annotation reports describing it exactly.
//!
//! Speeds are scripted directly: active play draws each player's speed from
//! `[high, 1.1 * high]`, stoppages (and lulls inside active play) from
//! `[0.9 * low, low)`. Positions are fixed per-segment anchors plus
//! independent Gaussian noise on each axis.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::ground_truth::{
    expand_activity, expand_possession, possession_rows, ActivityTimeline, PossessionTimeline,
};
use crate::ingest::{
    ActivityAction, ActivityReportRow, PossessionAction, PossessionReportRow, StopReason,
};
use crate::model::{
    CourtGeometry, Frame, PlayerId, PlayerSample, SAMPLE_PERIOD_MS, SAMPLE_RATE_HZ,
};
use crate::possession::{AttackDirection, Orientation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("segment {index}: {message}")]
    Segment { index: usize, message: String },
    #[error("script: {0}")]
    Script(String),
    #[error("script line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentState {
    ActiveOffence,
    ActiveDefence,
    ActiveTransition,
    InactiveStop,
    InactiveFreeThrow,
    InactiveTimeout,
    InactiveQuarter,
    InactiveHalf,
}

impl SegmentState {
    const NAMES: [(SegmentState, &'static str); 8] = [
        (SegmentState::ActiveOffence, "active-offence"),
        (SegmentState::ActiveDefence, "active-defence"),
        (SegmentState::ActiveTransition, "active-transition"),
        (SegmentState::InactiveStop, "inactive-stop"),
        (SegmentState::InactiveFreeThrow, "inactive-freethrow"),
        (SegmentState::InactiveTimeout, "inactive-timeout"),
        (SegmentState::InactiveQuarter, "inactive-quarter"),
        (SegmentState::InactiveHalf, "inactive-half"),
    ];

    pub fn is_active(self) -> bool {
        matches!(
            self,
            SegmentState::ActiveOffence
                | SegmentState::ActiveDefence
                | SegmentState::ActiveTransition
        )
    }

    fn stop_reason(self) -> Option<StopReason> {
        match self {
            SegmentState::InactiveStop => Some(StopReason::Generic),
            SegmentState::InactiveFreeThrow => Some(StopReason::FreeThrow),
            SegmentState::InactiveTimeout => Some(StopReason::Timeout),
            SegmentState::InactiveQuarter => Some(StopReason::Quarter),
            SegmentState::InactiveHalf => Some(StopReason::Half),
            _ => None,
        }
    }

    /// Players leave the floor for time-outs and intervals.
    fn on_bench(self) -> bool {
        matches!(
            self,
            SegmentState::InactiveTimeout
                | SegmentState::InactiveQuarter
                | SegmentState::InactiveHalf
        )
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::NAMES.iter().find(|(_, n)| *n == s).map(|(st, _)| *st)
    }

    pub fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(st, _)| *st == self)
            .map(|(_, n)| *n)
            .unwrap()
    }
}

/// Nominal speeds of a segment, in km/h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRegime {
    pub low_kmh: f64,
    pub high_kmh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: SegmentState,
    pub duration_s: u32,
    pub regime: SpeedRegime,
    /// Period of slow lulls inside active play; 0 disables them.
    pub lull_every_s: u32,
    pub lull_s: u32,
}

impl Segment {
    pub fn new(state: SegmentState, duration_s: u32, regime: SpeedRegime) -> Self {
        Self {
            state,
            duration_s,
            regime,
            lull_every_s: 0,
            lull_s: 0,
        }
    }

    pub fn with_lulls(mut self, every_s: u32, lull_s: u32) -> Self {
        self.lull_every_s = every_s;
        self.lull_s = lull_s;
        self
    }

    /// Whether second `k` (0-based within the segment) is a lull.
    fn is_lull(&self, k: u32) -> bool {
        if !self.state.is_active() || self.lull_every_s == 0 || self.lull_s == 0 {
            return false;
        }
        let start = k / self.lull_every_s * self.lull_every_s;
        start > 0 && k - start < self.lull_s && start + self.lull_s < self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameScript {
    pub segments: Vec<Segment>,
    pub seed: u64,
    /// Standard deviation of the positional noise per axis.
    pub noise_cm: f64,
    /// Length of the linear speed ramp at the start of each segment.
    pub ramp_s: f64,
    /// Extra tracked players sitting off court for the whole game.
    pub bench_players: u32,
    pub directions: [AttackDirection; 4],
    pub geometry: CourtGeometry,
}

impl GameScript {
    pub fn new(segments: Vec<Segment>, seed: u64) -> Self {
        Self {
            segments,
            seed,
            noise_cm: 30.0,
            ramp_s: 0.0,
            bench_players: 0,
            directions: Orientation::default().directions,
            geometry: CourtGeometry::default(),
        }
    }

    pub fn duration_s(&self) -> u32 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.segments.is_empty() {
            return Err(SynthError::Script("no segments".into()));
        }
        if !(self.noise_cm.is_finite() && self.noise_cm >= 0.0) {
            return Err(SynthError::Script(format!(
                "noise must be non-negative, got {}",
                self.noise_cm
            )));
        }
        if !(self.ramp_s.is_finite() && self.ramp_s >= 0.0) {
            return Err(SynthError::Script(format!(
                "ramp must be non-negative, got {}",
                self.ramp_s
            )));
        }
        self.geometry
            .validate()
            .map_err(|e| SynthError::Script(e.to_string()))?;
        for (index, seg) in self.segments.iter().enumerate() {
            let fail = |message: String| Err(SynthError::Segment { index, message });
            if seg.duration_s < 1 {
                return fail("duration must be at least 1 s".into());
            }
            let SpeedRegime { low_kmh, high_kmh } = seg.regime;
            if !(low_kmh.is_finite() && high_kmh.is_finite() && low_kmh > 0.0) {
                return fail(format!(
                    "speed regime ({low_kmh}, {high_kmh}) must be finite with low > 0"
                ));
            }
            if low_kmh >= high_kmh {
                return fail(format!(
                    "low speed {low_kmh} must be below high speed {high_kmh}"
                ));
            }
            if seg.lull_every_s > 0 && seg.lull_s >= seg.lull_every_s {
                return fail("lulls must be shorter than their period".into());
            }
        }
        Ok(())
    }

    /// Exact per-second activity truth implied by the script.
    pub fn activity_timeline(&self) -> ActivityTimeline {
        expand_activity(&activity_rows(&self.segments), self.duration_s())
            .expect("rows lie inside the script")
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGame {
    pub frames: Vec<Frame>,
    pub activity: Vec<ActivityReportRow>,
    pub possession: Vec<PossessionReportRow>,
    pub duration_s: u32,
}

impl SyntheticGame {
    pub fn activity_timeline(&self) -> ActivityTimeline {
        expand_activity(&self.activity, self.duration_s).expect("generated rows are in range")
    }

    pub fn possession_timeline(&self) -> PossessionTimeline {
        expand_possession(&self.possession, self.duration_s).expect("generated rows are in range")
    }
}

fn activity_rows(segments: &[Segment]) -> Vec<ActivityReportRow> {
    let mut rows: Vec<ActivityReportRow> = Vec::new();
    let mut sec = 1;
    for seg in segments {
        let action = match seg.state.stop_reason() {
            None => ActivityAction::Play,
            Some(r) => ActivityAction::Stop(r),
        };
        let changed = rows
            .last()
            .is_none_or(|r| r.is_play() != matches!(action, ActivityAction::Play));
        if changed {
            rows.push(ActivityReportRow { action, sec });
        }
        sec += seg.duration_s;
    }
    rows
}

/// Offence/defence per second. Transition and stoppages keep the side of
/// the last offence/defence segment (or the next one, before the first).
fn possession_labels(segments: &[Segment]) -> Vec<PossessionAction> {
    let side = |st: SegmentState| match st {
        SegmentState::ActiveOffence => Some(PossessionAction::Off),
        SegmentState::ActiveDefence => Some(PossessionAction::Def),
        _ => None,
    };
    let mut current = segments
        .iter()
        .find_map(|s| side(s.state))
        .unwrap_or(PossessionAction::Off);
    let mut labels = Vec::new();
    for seg in segments {
        if let Some(s) = side(seg.state) {
            current = s;
        }
        labels.extend(std::iter::repeat_n(current, seg.duration_s as usize));
    }
    labels
}

const PLAYERS: usize = 5;
/// Distance kept between anchors and the court edges.
const EDGE_MARGIN_CM: f64 = 150.0;

struct Anchors {
    points: [(f64, f64); PLAYERS],
}

fn far_from_ftsa(x: f64, y: f64, geom: &CourtGeometry) -> bool {
    let dx = x.abs() - geom.ftsa_center_abs_x;
    let keep_out = geom.ftsa_radius + EDGE_MARGIN_CM;
    dx * dx + y * y > keep_out * keep_out
}

fn draw_anchor(rng: &mut ChaCha8Rng, x_range: (f64, f64), geom: &CourtGeometry) -> (f64, f64) {
    let y_max = geom.half_width - EDGE_MARGIN_CM;
    loop {
        let x = rng.random_range(x_range.0..=x_range.1);
        let y = rng.random_range(-y_max..=y_max);
        if far_from_ftsa(x, y, geom) {
            return (x, y);
        }
    }
}

fn segment_anchors(
    rng: &mut ChaCha8Rng,
    state: SegmentState,
    sign: f64,
    previous: Option<&Anchors>,
    geom: &CourtGeometry,
) -> Anchors {
    let deep = geom.half_length - EDGE_MARGIN_CM;
    let mut points = [(0.0, 0.0); PLAYERS];
    match state {
        SegmentState::ActiveOffence | SegmentState::ActiveDefence => {
            let side = if state == SegmentState::ActiveOffence {
                sign
            } else {
                -sign
            };
            for p in points.iter_mut() {
                let (x, y) = draw_anchor(rng, (500.0, deep), geom);
                *p = (side * x, y);
            }
        }
        SegmentState::ActiveTransition => {
            for p in points.iter_mut() {
                *p = draw_anchor(rng, (-250.0, 250.0), geom);
            }
        }
        SegmentState::InactiveFreeThrow => {
            // shooter on the line of the attacked basket, others along the lane
            let basket = sign * geom.ftsa_center_abs_x;
            points[0] = (basket, 0.0);
            let lane_y = geom.ftsa_radius + EDGE_MARGIN_CM;
            for (i, p) in points.iter_mut().enumerate().skip(1) {
                let along = if i <= 2 { 100.0 } else { 300.0 };
                let y = if i % 2 == 0 { lane_y } else { -lane_y };
                *p = (basket + sign * along, y);
            }
        }
        SegmentState::InactiveTimeout
        | SegmentState::InactiveQuarter
        | SegmentState::InactiveHalf => {
            let bench_y = geom.half_width + 200.0;
            for (i, p) in points.iter_mut().enumerate() {
                *p = (-300.0 + 150.0 * i as f64, bench_y);
            }
        }
        SegmentState::InactiveStop => match previous {
            Some(prev) => points = prev.points,
            None => {
                for p in points.iter_mut() {
                    *p = draw_anchor(rng, (-250.0, 250.0), geom);
                }
            }
        },
    }
    Anchors { points }
}

/// Speed bands around a regime. The slow band stays strictly below `low`
/// even after the speed is split into components and recombined.
fn slow_band(regime: &SpeedRegime) -> (f64, f64) {
    (0.9 * regime.low_kmh, regime.low_kmh * (1.0 - 1e-9))
}

fn fast_band(regime: &SpeedRegime) -> (f64, f64) {
    (regime.high_kmh, 1.1 * regime.high_kmh)
}

pub fn generate(script: &GameScript) -> Result<SyntheticGame, SynthError> {
    script.validate()?;
    let geom = &script.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let noise = Normal::new(0.0, script.noise_cm).map_err(|e| SynthError::Script(e.to_string()))?;
    let frames_per_s = SAMPLE_RATE_HZ as u32;
    let ramp_frames = (script.ramp_s * SAMPLE_RATE_HZ as f64).round() as u32;
    let bench_y = geom.half_width + 200.0;

    let mut frames = Vec::with_capacity(script.duration_s() as usize * frames_per_s as usize);
    let mut period = 1usize;
    let mut period_pending = false;
    let mut anchors: Option<Anchors> = None;
    let mut last_speed = [0.0f64; PLAYERS];
    let mut frame_idx: u64 = 0;

    for seg in &script.segments {
        if seg.state.is_active() && period_pending {
            period += 1;
            period_pending = false;
        }
        let sign = match script.directions[period.min(4) - 1] {
            AttackDirection::PlusX => 1.0,
            AttackDirection::MinusX => -1.0,
        };
        let seg_anchors = segment_anchors(&mut rng, seg.state, sign, anchors.as_ref(), geom);
        let start_speed = last_speed;

        for k in 0..seg.duration_s {
            let (lo, hi) = if !seg.state.is_active() || seg.is_lull(k) {
                slow_band(&seg.regime)
            } else {
                fast_band(&seg.regime)
            };
            for f in 0..frames_per_s {
                let in_seg = k * frames_per_s + f;
                let t_ms = frame_idx * SAMPLE_PERIOD_MS;
                let mut samples = Vec::with_capacity(PLAYERS + script.bench_players as usize);
                for (i, &(ax, ay)) in seg_anchors.points.iter().enumerate() {
                    let mut speed = rng.random_range(lo..hi);
                    if in_seg < ramp_frames {
                        let frac = f64::from(in_seg + 1) / f64::from(ramp_frames);
                        speed = start_speed[i] + (speed - start_speed[i]) * frac;
                    }
                    last_speed[i] = speed;
                    let heading = rng.random_range(0.0..TAU);
                    samples.push(PlayerSample {
                        player_id: PlayerId(i as u32 + 1),
                        pos_x: ax + noise.sample(&mut rng),
                        pos_y: ay + noise.sample(&mut rng),
                        vel_x: speed * heading.cos(),
                        vel_y: speed * heading.sin(),
                    });
                }
                for b in 0..script.bench_players {
                    samples.push(PlayerSample {
                        player_id: PlayerId(PLAYERS as u32 + 1 + b),
                        pos_x: -600.0 + 100.0 * f64::from(b),
                        pos_y: bench_y,
                        vel_x: 0.0,
                        vel_y: 0.0,
                    });
                }
                frames.push(Frame::new(t_ms, samples));
                frame_idx += 1;
            }
        }
        if matches!(
            seg.state,
            SegmentState::InactiveQuarter | SegmentState::InactiveHalf
        ) {
            period_pending = true;
        }
        if !seg.state.on_bench() {
            anchors = Some(seg_anchors);
        }
    }

    let duration_s = script.duration_s();
    let possession = possession_rows(&PossessionTimeline::from_labels(possession_labels(
        &script.segments,
    )));
    Ok(SyntheticGame {
        frames,
        activity: activity_rows(&script.segments),
        possession,
        duration_s,
    })
}

// ---------------------------------------------------------------------------
// Script files
// ---------------------------------------------------------------------------

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, SynthError> {
    value.parse::<T>().map_err(|_| SynthError::Syntax {
        line,
        message: format!("{key}: cannot parse `{value}`"),
    })
}

fn parse_float(line: usize, key: &str, value: &str) -> Result<f64, SynthError> {
    let v: f64 = parse_num(line, key, value)?;
    if !v.is_finite() {
        return Err(SynthError::Syntax {
            line,
            message: format!("{key}: `{value}` is not finite"),
        });
    }
    Ok(v)
}

#[derive(Default)]
struct SegmentDraft {
    line: usize,
    state: Option<SegmentState>,
    duration_s: Option<u32>,
    low_kmh: Option<f64>,
    high_kmh: Option<f64>,
    lull_every_s: Option<u32>,
    lull_s: Option<u32>,
}

/// Parses a script file: global `key = value` settings followed by one
/// `[segment]` block per segment.
///
/// Global keys: `seed`, `noise_cm`, `ramp_s`, `bench_players`, `repeat`,
/// `low_kmh`, `high_kmh`, `lull_every_s`, `lull_s` (segment defaults) and
/// `attack_direction_p1`..`attack_direction_p4`. Segment keys: `state`,
/// `duration_s` and overrides of the speed and lull defaults. `repeat`
/// plays the whole segment list that many times.
pub fn parse_script(text: &str) -> Result<GameScript, SynthError> {
    let mut script = GameScript::new(Vec::new(), 0);
    let mut default_low = 5.0;
    let mut default_high = 12.0;
    let mut default_lull_every = 0;
    let mut default_lull = 0;
    let mut repeat = 1u32;
    let mut drafts: Vec<SegmentDraft> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "[segment]" {
            drafts.push(SegmentDraft {
                line,
                ..Default::default()
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SynthError::Syntax {
            line,
            message: format!("expected `key = value` or `[segment]`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let unknown = || SynthError::Syntax {
            line,
            message: format!("unknown key `{key}`"),
        };
        match drafts.last_mut() {
            None => match key {
                "seed" => script.seed = parse_num(line, key, value)?,
                "noise_cm" => script.noise_cm = parse_float(line, key, value)?,
                "ramp_s" => script.ramp_s = parse_float(line, key, value)?,
                "bench_players" => script.bench_players = parse_num(line, key, value)?,
                "repeat" => repeat = parse_num(line, key, value)?,
                "low_kmh" => default_low = parse_float(line, key, value)?,
                "high_kmh" => default_high = parse_float(line, key, value)?,
                "lull_every_s" => default_lull_every = parse_num(line, key, value)?,
                "lull_s" => default_lull = parse_num(line, key, value)?,
                k if k.starts_with("attack_direction_p") => {
                    let period: usize = k["attack_direction_p".len()..]
                        .parse()
                        .ok()
                        .filter(|p| (1..=4).contains(p))
                        .ok_or_else(unknown)?;
                    script.directions[period - 1] = value
                        .parse()
                        .map_err(|message| SynthError::Syntax { line, message })?;
                }
                _ => return Err(unknown()),
            },
            Some(d) => match key {
                "state" => {
                    d.state =
                        Some(
                            SegmentState::parse(value).ok_or_else(|| SynthError::Syntax {
                                line,
                                message: format!("unknown segment state `{value}`"),
                            })?,
                        )
                }
                "duration_s" => d.duration_s = Some(parse_num(line, key, value)?),
                "low_kmh" => d.low_kmh = Some(parse_float(line, key, value)?),
                "high_kmh" => d.high_kmh = Some(parse_float(line, key, value)?),
                "lull_every_s" => d.lull_every_s = Some(parse_num(line, key, value)?),
                "lull_s" => d.lull_s = Some(parse_num(line, key, value)?),
                _ => return Err(unknown()),
            },
        }
    }

    let mut segments = Vec::with_capacity(drafts.len());
    for d in &drafts {
        let missing = |what: &str| SynthError::Syntax {
            line: d.line,
            message: format!("segment is missing `{what}`"),
        };
        segments.push(Segment {
            state: d.state.ok_or_else(|| missing("state"))?,
            duration_s: d.duration_s.ok_or_else(|| missing("duration_s"))?,
            regime: SpeedRegime {
                low_kmh: d.low_kmh.unwrap_or(default_low),
                high_kmh: d.high_kmh.unwrap_or(default_high),
            },
            lull_every_s: d.lull_every_s.unwrap_or(default_lull_every),
            lull_s: d.lull_s.unwrap_or(default_lull),
        });
    }
    script.segments = segments.repeat(repeat as usize);
    script.validate()?;
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{criterion_not_five, on_court_ids};
    use crate::model::in_ftsa;

    const REGIME: SpeedRegime = SpeedRegime {
        low_kmh: 5.0,
        high_kmh: 12.0,
    };

    #[test]
    fn single_offence_segment() {
        let script = GameScript::new(
            vec![Segment::new(SegmentState::ActiveOffence, 10, REGIME)],
            1,
        );
        let game = generate(&script).unwrap();
        assert_eq!(game.frames.len(), 500);
        let g = CourtGeometry::default();
        assert!(game.frames.iter().all(|f| on_court_ids(f, &g).len() == 5));
        assert_eq!(
            game.activity,
            vec![ActivityReportRow {
                action: ActivityAction::Play,
                sec: 1
            }]
        );
        // offence while attacking +x
        for f in &game.frames {
            let mean: f64 = f.samples.iter().map(|s| s.pos_x).sum::<f64>() / 5.0;
            assert!(mean > 400.0);
            assert!(f.samples.iter().all(|s| s.speed() >= 12.0));
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let script = GameScript::new(
            vec![
                Segment::new(SegmentState::ActiveDefence, 5, REGIME),
                Segment::new(SegmentState::InactiveStop, 3, REGIME),
            ],
            99,
        );
        assert_eq!(generate(&script).unwrap(), generate(&script).unwrap());
        let other = GameScript {
            seed: 100,
            ..script.clone()
        };
        assert_ne!(
            generate(&script).unwrap().frames,
            generate(&other).unwrap().frames
        );
    }

    #[test]
    fn stop_segments_are_slow() {
        let script = GameScript::new(
            vec![
                Segment::new(SegmentState::ActiveOffence, 2, REGIME),
                Segment::new(SegmentState::InactiveStop, 4, REGIME),
            ],
            3,
        );
        let game = generate(&script).unwrap();
        for f in &game.frames[100..] {
            assert!(f
                .samples
                .iter()
                .all(|s| s.speed() < 5.0 && s.speed() >= 4.5));
        }
    }

    #[test]
    fn free_throw_shooter_stays_in_disc() {
        let script = GameScript::new(
            vec![
                Segment::new(SegmentState::ActiveOffence, 2, REGIME),
                Segment::new(SegmentState::InactiveFreeThrow, 12, REGIME),
            ],
            5,
        );
        let game = generate(&script).unwrap();
        let g = CourtGeometry::default();
        for f in &game.frames[100..] {
            assert!(in_ftsa(f.samples[0].pos_x, f.samples[0].pos_y, &g));
        }
        assert_eq!(
            game.activity[1],
            ActivityReportRow {
                action: ActivityAction::Stop(StopReason::FreeThrow),
                sec: 3
            }
        );
    }

    #[test]
    fn intervals_empty_the_court() {
        let mut script = GameScript::new(
            vec![
                Segment::new(SegmentState::ActiveOffence, 2, REGIME),
                Segment::new(SegmentState::InactiveQuarter, 3, REGIME),
                Segment::new(SegmentState::ActiveOffence, 2, REGIME),
            ],
            5,
        );
        script.bench_players = 3;
        script.directions[1] = AttackDirection::MinusX;
        let game = generate(&script).unwrap();
        let g = CourtGeometry::default();
        let not_five = criterion_not_five(&game.frames, &g);
        assert!(not_five[..100].iter().all(|&d| !d));
        assert!(not_five[100..250].iter().all(|&d| d));
        assert!(game.frames.iter().all(|f| f.samples.len() == 8));
        // the interval starts period two, scripted to attack -x
        for f in &game.frames[250..] {
            let mean: f64 = f.samples[..5].iter().map(|s| s.pos_x).sum::<f64>() / 5.0;
            assert!(mean < -400.0);
        }
    }

    #[test]
    fn reports_follow_segments() {
        let script = GameScript::new(
            vec![
                Segment::new(SegmentState::ActiveDefence, 31, REGIME),
                Segment::new(SegmentState::ActiveTransition, 2, REGIME),
                Segment::new(SegmentState::ActiveOffence, 20, REGIME),
                Segment::new(SegmentState::InactiveStop, 5, REGIME),
                Segment::new(SegmentState::InactiveTimeout, 5, REGIME),
                Segment::new(SegmentState::ActiveDefence, 10, REGIME),
            ],
            5,
        );
        let game = generate(&script).unwrap();
        assert_eq!(
            game.activity,
            vec![
                ActivityReportRow {
                    action: ActivityAction::Play,
                    sec: 1
                },
                ActivityReportRow {
                    action: ActivityAction::Stop(StopReason::Generic),
                    sec: 54
                },
                ActivityReportRow {
                    action: ActivityAction::Play,
                    sec: 64
                },
            ]
        );
        let poss = game.possession_timeline();
        assert_eq!(poss.duration_s(), 73);
        assert_eq!(poss.at(1), PossessionAction::Def);
        assert_eq!(poss.at(33), PossessionAction::Def);
        assert_eq!(poss.at(34), PossessionAction::Off);
        assert_eq!(poss.at(63), PossessionAction::Off);
        assert_eq!(poss.at(64), PossessionAction::Def);
        assert_eq!(game.activity_timeline(), script.activity_timeline());
    }

    #[test]
    fn lulls_are_interior_and_slow() {
        let seg = Segment::new(SegmentState::ActiveOffence, 30, REGIME).with_lulls(10, 2);
        let lulls: Vec<u32> = (0..30).filter(|&k| seg.is_lull(k)).collect();
        assert_eq!(lulls, vec![10, 11, 20, 21]);
        let short = Segment::new(SegmentState::ActiveOffence, 11, REGIME).with_lulls(10, 2);
        assert!((0..11).all(|k| !short.is_lull(k)));

        let game = generate(&GameScript::new(vec![seg], 2)).unwrap();
        assert!(game.frames[500..600]
            .iter()
            .all(|f| f.samples.iter().all(|s| s.speed() < 5.0)));
        assert!(game.frames[600..1000]
            .iter()
            .all(|f| f.samples.iter().all(|s| s.speed() >= 12.0)));
    }

    #[test]
    fn ramp_blends_speeds() {
        let mut script = GameScript::new(
            vec![
                Segment::new(SegmentState::InactiveStop, 2, REGIME),
                Segment::new(SegmentState::ActiveOffence, 2, REGIME),
            ],
            8,
        );
        script.ramp_s = 1.0;
        let game = generate(&script).unwrap();
        let first_active = game.frames[100].samples[0].speed();
        assert!(
            first_active < 12.0,
            "ramp should start near the previous speed"
        );
        assert!(game.frames[150..]
            .iter()
            .all(|f| f.samples.iter().all(|s| s.speed() >= 12.0)));
    }

    #[test]
    fn invalid_scripts() {
        let bad = |seg: Segment| generate(&GameScript::new(vec![seg], 0)).is_err();
        assert!(bad(Segment::new(SegmentState::ActiveOffence, 0, REGIME)));
        assert!(bad(Segment::new(
            SegmentState::ActiveOffence,
            5,
            SpeedRegime {
                low_kmh: 12.0,
                high_kmh: 5.0
            }
        )));
        assert!(generate(&GameScript::new(vec![], 0)).is_err());
    }

    #[test]
    fn script_file() {
        let text = "\
seed = 11
noise_cm = 0
low_kmh = 5
high_kmh = 12
repeat = 3

[segment]
state = active-offence
duration_s = 30
lull_every_s = 10
lull_s = 2

[segment]
state = inactive-stop
duration_s = 10
low_kmh = 4
";
        let script = parse_script(text).unwrap();
        assert_eq!(script.seed, 11);
        assert_eq!(script.noise_cm, 0.0);
        assert_eq!(script.segments.len(), 6);
        assert_eq!(script.duration_s(), 120);
        assert_eq!(
            script.segments[1].regime,
            SpeedRegime {
                low_kmh: 4.0,
                high_kmh: 12.0
            }
        );
        assert_eq!(script.segments[0].lull_s, 2);

        assert!(parse_script("[segment]\nstate = active-offence\n").is_err());
        assert!(parse_script("[segment]\nstate = dancing\nduration_s = 3\n").is_err());
        assert!(parse_script("colour = red\n").is_err());
        assert!(parse_script("attack_direction_p5 = +x\n").is_err());
    }
}
