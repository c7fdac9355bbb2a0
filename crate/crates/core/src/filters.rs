//! Removal of inactive measurements.
//!
//! Three independent criteria are evaluated on the raw stream and their
//! per-frame verdicts are merged into a [`DropMask`]:
//!
//! * not exactly five players inside the court,
//! * a player dwelling in a free throw shooting area for at least `T_ft`,
//! * every on-court player slower than `V_min` for at least `T_vel`.
//!
//! Dwells and spells are maximal runs of contiguous frames (see
//! [`model::contiguous`](crate::model::contiguous)). A run that meets its
//! threshold is removed as a whole.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use crate::ingest::{self, ParseError};
use crate::model::{
    contiguous, in_court, in_ftsa, run_duration_ms, CourtGeometry, Frame, PlayerId,
};

pub const MASK_HEADER: &str = "t_ms,kept,reasons";

/// Number of players each team has on court.
pub const PLAYERS_ON_COURT: usize = 5;

/// Kinematic thresholds of the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub t_ft_ms: u64,
    pub v_min_kmh: f64,
    pub t_vel_ms: u64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            t_ft_ms: 10_000,
            v_min_kmh: 9.25,
            t_vel_ms: 2_000,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_min_kmh.is_finite() && self.v_min_kmh >= 0.0) {
            return Err(format!(
                "V_min must be a non-negative speed, got {}",
                self.v_min_kmh
            ));
        }
        Ok(())
    }
}

/// Set of reasons a frame was dropped. Empty means kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DropReasons(u8);

impl DropReasons {
    pub const NOT_FIVE_PLAYERS: Self = Self(1);
    pub const FREE_THROW_DWELL: Self = Self(1 << 1);
    pub const LOW_SPEED_SPELL: Self = Self(1 << 2);

    const ALL: [(Self, &'static str); 3] = [
        (Self::NOT_FIVE_PLAYERS, "not_five_players"),
        (Self::FREE_THROW_DWELL, "free_throw_dwell"),
        (Self::LOW_SPEED_SPELL, "low_speed_spell"),
    ];

    pub const fn empty() -> Self {
        Self(0)
    }

    pub fn is_kept(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, other: Self) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Self) {
        self.0 |= other.0;
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn names(self) -> impl Iterator<Item = &'static str> {
        Self::ALL
            .into_iter()
            .filter(move |(r, _)| self.contains(*r))
            .map(|(_, name)| name)
    }
}

impl fmt::Display for DropReasons {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, name) in self.names().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            f.write_str(name)?;
        }
        Ok(())
    }
}

impl FromStr for DropReasons {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Self::empty();
        if s.is_empty() {
            return Ok(out);
        }
        for part in s.split('|') {
            let (reason, _) = Self::ALL
                .iter()
                .find(|(_, name)| *name == part)
                .ok_or_else(|| format!("unknown drop reason `{part}`"))?;
            out.insert(*reason);
        }
        Ok(out)
    }
}

/// Per-frame keep/drop decision, aligned with the frames it was computed on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropMask {
    pub t_ms: Vec<u64>,
    pub reasons: Vec<DropReasons>,
}

impl DropMask {
    pub fn kept(frames: &[Frame]) -> Self {
        Self {
            t_ms: frames.iter().map(|f| f.t_ms).collect(),
            reasons: vec![DropReasons::empty(); frames.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.reasons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reasons.is_empty()
    }

    /// Adds `reason` to every frame flagged in `hits`.
    pub fn apply(&mut self, hits: &[bool], reason: DropReasons) {
        assert_eq!(hits.len(), self.reasons.len(), "criterion length mismatch");
        for (r, &hit) in self.reasons.iter_mut().zip(hits) {
            if hit {
                r.insert(reason);
            }
        }
    }

    pub fn kept_count(&self) -> usize {
        self.reasons.iter().filter(|r| r.is_kept()).count()
    }

    pub fn count_with(&self, reason: DropReasons) -> usize {
        self.reasons.iter().filter(|r| r.contains(reason)).count()
    }
}

pub fn write_mask<W: Write>(mask: &DropMask, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{MASK_HEADER}")?;
    for (t, r) in mask.t_ms.iter().zip(&mask.reasons) {
        writeln!(out, "{t},{},{r}", u8::from(r.is_kept()))?;
    }
    out.flush()
}

pub fn parse_mask<R: Read>(input: R) -> Result<DropMask, ParseError> {
    let mut rdr = ingest::reader(input);
    let mut rec = csv::ByteRecord::new();
    let mut mask = DropMask::default();
    if !ingest::check_header(&mut rdr, &mut rec, MASK_HEADER)? {
        return Ok(mask);
    }
    while ingest::read_record(&mut rdr, &mut rec)? {
        ingest::expect_fields(&rec, 3)?;
        let t = ingest::parse_u64(&rec, 0, "t_ms")?;
        let kept = ingest::parse_flag(&rec, 1, "kept")?;
        let raw = ingest::field(&rec, 2, "reasons")?;
        let reasons: DropReasons = raw
            .parse()
            .map_err(|e: String| ingest::bad_field(&rec, "reasons", raw, &e))?;
        if kept != reasons.is_kept() {
            return Err(ingest::bad_field(
                &rec,
                "reasons",
                raw,
                "kept flag disagrees with reasons",
            ));
        }
        if mask.t_ms.last().is_some_and(|&prev| prev >= t) {
            return Err(ParseError::Ordering {
                line: ingest::line_of(&rec),
                t_ms: t,
                prev_t_ms: *mask.t_ms.last().unwrap(),
            });
        }
        mask.t_ms.push(t);
        mask.reasons.push(reasons);
    }
    Ok(mask)
}

/// Ids of the players inside the court in `frame`.
pub fn on_court_ids(frame: &Frame, geom: &CourtGeometry) -> Vec<PlayerId> {
    frame
        .samples
        .iter()
        .filter(|s| in_court(s.pos_x, s.pos_y, geom))
        .map(|s| s.player_id)
        .collect()
}

fn on_court_count(frame: &Frame, geom: &CourtGeometry) -> usize {
    frame
        .samples
        .iter()
        .filter(|s| in_court(s.pos_x, s.pos_y, geom))
        .count()
}

/// Frames whose on-court head count differs from five.
pub fn criterion_not_five(frames: &[Frame], geom: &CourtGeometry) -> Vec<bool> {
    frames
        .iter()
        .map(|f| on_court_count(f, geom) != PLAYERS_ON_COURT)
        .collect()
}

/// Marks every maximal run of contiguous `true` frames lasting at least
/// `min_duration_ms`.
pub fn mark_long_runs(t_ms: &[u64], pred: &[bool], min_duration_ms: u64) -> Vec<bool> {
    assert_eq!(t_ms.len(), pred.len());
    let mut out = vec![false; pred.len()];
    let mut i = 0;
    while i < pred.len() {
        if !pred[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < pred.len() && pred[i + 1] && contiguous(t_ms[i], t_ms[i + 1]) {
            i += 1;
        }
        if run_duration_ms(t_ms[start], t_ms[i]) >= min_duration_ms {
            out[start..=i].fill(true);
        }
        i += 1;
    }
    out
}

#[derive(Clone, Copy)]
struct OpenRun {
    start_idx: usize,
    last_idx: usize,
    start_t: u64,
    last_t: u64,
}

/// Frames covered by a per-player free throw dwell of at least `t_ft_ms`.
pub fn criterion_free_throw(frames: &[Frame], geom: &CourtGeometry, t_ft_ms: u64) -> Vec<bool> {
    let mut out = vec![false; frames.len()];
    let close = |run: OpenRun, out: &mut Vec<bool>| {
        if run_duration_ms(run.start_t, run.last_t) >= t_ft_ms {
            out[run.start_idx..=run.last_idx].fill(true);
        }
    };
    let mut open: HashMap<PlayerId, OpenRun> = HashMap::new();
    for (i, frame) in frames.iter().enumerate() {
        for s in frame
            .samples
            .iter()
            .filter(|s| in_ftsa(s.pos_x, s.pos_y, geom))
        {
            let t = frame.t_ms;
            match open.get_mut(&s.player_id) {
                Some(run) if run.last_idx + 1 == i && contiguous(run.last_t, t) => {
                    run.last_idx = i;
                    run.last_t = t;
                }
                slot => {
                    let fresh = OpenRun {
                        start_idx: i,
                        last_idx: i,
                        start_t: t,
                        last_t: t,
                    };
                    match slot {
                        Some(run) => {
                            close(*run, &mut out);
                            *run = fresh;
                        }
                        None => {
                            open.insert(s.player_id, fresh);
                        }
                    }
                }
            }
        }
    }
    for run in open.into_values() {
        close(run, &mut out);
    }
    out
}

/// Per-frame maximum on-court speed, with frames that do not have exactly
/// five players on court mapped to infinity so they can never satisfy a
/// low-speed predicate.
///
/// Computing this once lets a threshold sweep re-evaluate the low-speed
/// criterion without touching the samples again.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    pub t_ms: Vec<u64>,
    pub max_speed: Vec<f64>,
}

impl SpeedProfile {
    pub fn new(frames: &[Frame], geom: &CourtGeometry) -> Self {
        let mut t_ms = Vec::with_capacity(frames.len());
        let mut max_speed = Vec::with_capacity(frames.len());
        for f in frames {
            t_ms.push(f.t_ms);
            let mut count = 0;
            let mut top = 0.0f64;
            for s in f
                .samples
                .iter()
                .filter(|s| in_court(s.pos_x, s.pos_y, geom))
            {
                count += 1;
                top = top.max(s.speed());
            }
            max_speed.push(if count == PLAYERS_ON_COURT {
                top
            } else {
                f64::INFINITY
            });
        }
        Self { t_ms, max_speed }
    }

    /// Frames where every one of the five on-court players is strictly
    /// slower than `v_min_kmh`.
    pub fn slow_frames(&self, v_min_kmh: f64) -> Vec<bool> {
        self.max_speed.iter().map(|&v| v < v_min_kmh).collect()
    }

    pub fn low_speed_mask(&self, v_min_kmh: f64, t_vel_ms: u64) -> Vec<bool> {
        mark_long_runs(&self.t_ms, &self.slow_frames(v_min_kmh), t_vel_ms)
    }
}

/// Frames inside an all-slow spell lasting at least `t_vel_ms`.
pub fn criterion_low_speed(
    frames: &[Frame],
    geom: &CourtGeometry,
    v_min_kmh: f64,
    t_vel_ms: u64,
) -> Vec<bool> {
    SpeedProfile::new(frames, geom).low_speed_mask(v_min_kmh, t_vel_ms)
}

/// Applies all three criteria to the raw stream. Returns the retained
/// frames, in their original order, and the full mask.
pub fn filter_measurements(
    frames: &[Frame],
    geom: &CourtGeometry,
    params: &FilterParams,
) -> (Vec<Frame>, DropMask) {
    let mask = compute_mask(frames, geom, params);
    let kept = frames
        .iter()
        .zip(&mask.reasons)
        .filter(|(_, r)| r.is_kept())
        .map(|(f, _)| f.clone())
        .collect();
    (kept, mask)
}

/// Mask only, without copying the retained frames.
pub fn compute_mask(frames: &[Frame], geom: &CourtGeometry, params: &FilterParams) -> DropMask {
    let mut mask = DropMask::kept(frames);
    mask.apply(
        &criterion_not_five(frames, geom),
        DropReasons::NOT_FIVE_PLAYERS,
    );
    mask.apply(
        &criterion_free_throw(frames, geom, params.t_ft_ms),
        DropReasons::FREE_THROW_DWELL,
    );
    mask.apply(
        &criterion_low_speed(frames, geom, params.v_min_kmh, params.t_vel_ms),
        DropReasons::LOW_SPEED_SPELL,
    );
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PlayerSample, SAMPLE_PERIOD_MS};

    fn sample(id: u32, x: f64, y: f64, speed: f64) -> PlayerSample {
        PlayerSample {
            player_id: PlayerId(id),
            pos_x: x,
            pos_y: y,
            vel_x: speed,
            vel_y: 0.0,
        }
    }

    /// Five players spread over the half court at the given speed.
    fn five_at(t_ms: u64, speed: f64) -> Frame {
        let samples = (0..5)
            .map(|i| sample(i, 300.0 + 100.0 * f64::from(i), -300.0, speed))
            .collect();
        Frame::new(t_ms, samples)
    }

    fn stream(n: usize, f: impl Fn(u64) -> Frame) -> Vec<Frame> {
        (0..n as u64).map(|i| f(i * SAMPLE_PERIOD_MS)).collect()
    }

    #[test]
    fn on_court_ids_examples() {
        let g = CourtGeometry::default();
        let mut samples: Vec<_> = (0..5).map(|i| sample(i, 0.0, 0.0, 0.0)).collect();
        samples.extend((5..10).map(|i| sample(i, 0.0, 900.0, 0.0)));
        let ids = on_court_ids(&Frame::new(0, samples), &g);
        assert_eq!(ids, (0..5).map(PlayerId).collect::<Vec<_>>());
        assert!(on_court_ids(&Frame::new(0, vec![]), &g).is_empty());
        let sideline = Frame::new(0, vec![sample(1, 0.0, 750.0, 0.0)]);
        assert_eq!(on_court_ids(&sideline, &g), vec![PlayerId(1)]);
    }

    #[test]
    fn not_five_examples() {
        let g = CourtGeometry::default();
        let mut six = five_at(0, 10.0);
        six.samples.push(sample(9, 0.0, 0.0, 0.0));
        let mut four = five_at(20, 10.0);
        four.samples.pop();
        let frames = vec![five_at(0, 10.0), six, four];
        assert_eq!(criterion_not_five(&frames, &g), vec![false, true, true]);
    }

    #[test]
    fn free_throw_dwell_long_enough() {
        let g = CourtGeometry::default();
        let frames = stream(150, |t| {
            let mut f = five_at(t, 10.0);
            f.samples[0].pos_x = 820.0;
            f.samples[0].pos_y = 0.0;
            f
        });
        assert!(criterion_free_throw(&frames, &g, 2_000).iter().all(|&d| d));
    }

    #[test]
    fn free_throw_dwell_too_short() {
        let g = CourtGeometry::default();
        let frames = stream(50, |t| {
            let mut f = five_at(t, 10.0);
            f.samples[0].pos_x = -820.0;
            f
        });
        assert!(criterion_free_throw(&frames, &g, 2_000).iter().all(|&d| !d));
    }

    #[test]
    fn free_throw_dwell_is_per_player() {
        // Two players alternate in the disc every 10 frames; neither dwells.
        let g = CourtGeometry::default();
        let frames = stream(300, |t| {
            let mut f = five_at(t, 10.0);
            let who = ((t / SAMPLE_PERIOD_MS) / 10 % 2) as usize;
            f.samples[who].pos_x = 820.0;
            f.samples[who].pos_y = 0.0;
            f
        });
        assert!(criterion_free_throw(&frames, &g, 1_000).iter().all(|&d| !d));
    }

    #[test]
    fn free_throw_dwell_broken_by_gap() {
        let g = CourtGeometry::default();
        let mut frames = stream(100, |t| {
            let mut f = five_at(t, 10.0);
            f.samples[2].pos_x = 820.0;
            f.samples[2].pos_y = 0.0;
            f
        });
        // drop one frame: runs of 50 frames (1000 ms) and 49 frames (980 ms)
        frames.remove(50);
        assert!(criterion_free_throw(&frames, &g, 1_500).iter().all(|&d| !d));
        let hits = criterion_free_throw(&frames, &g, 1_000);
        assert!(hits[..50].iter().all(|&d| d));
        assert!(hits[50..].iter().all(|&d| !d));
        assert!(criterion_free_throw(&frames, &g, 980).iter().all(|&d| d));
    }

    #[test]
    fn low_speed_examples() {
        let g = CourtGeometry::default();
        let slow = stream(150, |t| five_at(t, 2.0));
        assert!(criterion_low_speed(&slow, &g, 9.25, 2_000)
            .iter()
            .all(|&d| d));

        let one_fast = stream(150, |t| {
            let mut f = five_at(t, 2.0);
            f.samples[3].vel_x = 12.0;
            f
        });
        assert!(criterion_low_speed(&one_fast, &g, 9.25, 2_000)
            .iter()
            .all(|&d| !d));
    }

    #[test]
    fn low_speed_is_strict() {
        let g = CourtGeometry::default();
        let frames = stream(10, |t| five_at(t, 9.25));
        assert!(criterion_low_speed(&frames, &g, 9.25, 0)
            .iter()
            .all(|&d| !d));
    }

    #[test]
    fn low_speed_requires_five_on_court() {
        let g = CourtGeometry::default();
        let frames = stream(200, |t| {
            let mut f = five_at(t, 1.0);
            f.samples.pop();
            f
        });
        assert!(criterion_low_speed(&frames, &g, 9.25, 0)
            .iter()
            .all(|&d| !d));
    }

    #[test]
    fn run_threshold_boundary() {
        // 100 frames = exactly 2000 ms.
        let t: Vec<u64> = (0..100).map(|i| i * SAMPLE_PERIOD_MS).collect();
        let pred = vec![true; 100];
        assert!(mark_long_runs(&t, &pred, 2_000).iter().all(|&d| d));
        assert!(mark_long_runs(&t, &pred, 2_001).iter().all(|&d| !d));
    }

    #[test]
    fn filter_identity_and_empty() {
        let g = CourtGeometry::default();
        let clean = stream(100, |t| five_at(t, 15.0));
        let (xr, mask) = filter_measurements(&clean, &g, &FilterParams::default());
        assert_eq!(xr, clean);
        assert_eq!(mask.kept_count(), 100);

        let (xr, mask) = filter_measurements(&[], &g, &FilterParams::default());
        assert!(xr.is_empty());
        assert!(mask.is_empty());
    }

    #[test]
    fn crowded_court_never_counts_as_slow_spell() {
        // Slow for 200 frames; frames 150..250 have a sixth player on court.
        let g = CourtGeometry::default();
        let frames = stream(300, |t| {
            let i = t / SAMPLE_PERIOD_MS;
            let mut f = five_at(t, if i < 200 { 2.0 } else { 15.0 });
            if (150..250).contains(&i) {
                f.samples.push(sample(9, 0.0, 0.0, 1.0));
            }
            f
        });
        for t_vel_ms in [0, 2_000] {
            let params = FilterParams {
                t_vel_ms,
                ..FilterParams::default()
            };
            let (xr, mask) = filter_measurements(&frames, &g, &params);
            assert_eq!(mask.reasons[0], DropReasons::LOW_SPEED_SPELL);
            assert_eq!(mask.reasons[160], DropReasons::NOT_FIVE_PLAYERS);
            assert_eq!(xr.len(), 50);
        }
    }

    #[test]
    fn crowded_court_and_dwell_overlap() {
        // A shooter dwells for 12 s; a sixth player walks on for frames 100..200.
        let g = CourtGeometry::default();
        let frames = stream(600, |t| {
            let i = t / SAMPLE_PERIOD_MS;
            let mut f = five_at(t, 15.0);
            f.samples[0].pos_x = -820.0;
            f.samples[0].pos_y = 30.0;
            if (100..200).contains(&i) {
                f.samples.push(sample(9, 0.0, 0.0, 1.0));
            }
            f
        });
        let (_, mask) = filter_measurements(&frames, &g, &FilterParams::default());
        let both = DropReasons::NOT_FIVE_PLAYERS.union(DropReasons::FREE_THROW_DWELL);
        assert_eq!(mask.reasons[150], both);
        assert_eq!(mask.reasons[50], DropReasons::FREE_THROW_DWELL);
        assert_eq!(mask.count_with(DropReasons::NOT_FIVE_PLAYERS), 100);
    }

    #[test]
    fn free_throw_and_low_speed_overlap() {
        let g = CourtGeometry::default();
        let frames = stream(600, |t| {
            let i = t / SAMPLE_PERIOD_MS;
            let mut f = five_at(t, if i < 300 { 2.0 } else { 15.0 });
            f.samples[0].pos_x = 820.0;
            f.samples[0].pos_y = 0.0;
            f
        });
        let (xr, mask) = filter_measurements(&frames, &g, &FilterParams::default());
        let both = DropReasons::FREE_THROW_DWELL.union(DropReasons::LOW_SPEED_SPELL);
        assert_eq!(mask.reasons[0], both);
        assert_eq!(mask.reasons[400], DropReasons::FREE_THROW_DWELL);
        assert!(xr.is_empty());
    }

    #[test]
    fn reasons_text_round_trip() {
        let all = DropReasons::NOT_FIVE_PLAYERS
            .union(DropReasons::FREE_THROW_DWELL)
            .union(DropReasons::LOW_SPEED_SPELL);
        assert_eq!(
            all.to_string(),
            "not_five_players|free_throw_dwell|low_speed_spell"
        );
        assert_eq!(all.to_string().parse::<DropReasons>().unwrap(), all);
        assert_eq!("".parse::<DropReasons>().unwrap(), DropReasons::empty());
        assert!("bogus".parse::<DropReasons>().is_err());
    }

    #[test]
    fn mask_file_round_trip() {
        let mut mask = DropMask::kept(&stream(3, |t| five_at(t, 1.0)));
        mask.apply(&[false, true, true], DropReasons::LOW_SPEED_SPELL);
        mask.apply(&[false, false, true], DropReasons::NOT_FIVE_PLAYERS);
        let mut buf = Vec::new();
        write_mask(&mask, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "t_ms,kept,reasons\n0,1,\n20,0,low_speed_spell\n40,0,not_five_players|low_speed_spell\n"
        );
        assert_eq!(parse_mask(&buf[..]).unwrap(), mask);
        assert!(parse_mask(&b"t_ms,kept,reasons\n0,1,low_speed_spell\n"[..]).is_err());
    }
}
