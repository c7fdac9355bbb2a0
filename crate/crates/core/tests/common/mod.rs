//! Brute-force reference implementations and random game builders shared by
//! the integration tests. Nothing here calls the library's own run-length or
//! geometry code.

#![allow(dead_code)]

use hoopscan::ground_truth::MajorityPoss;
use hoopscan::model::{CourtGeometry, Frame, PlayerId, PlayerSample};
use hoopscan::possession::Poss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FRAME_MS: u64 = 20;

fn on_court(s: &PlayerSample, g: &CourtGeometry) -> bool {
    s.pos_x.abs() <= g.half_length && s.pos_y.abs() <= g.half_width
}

fn in_disc(s: &PlayerSample, g: &CourtGeometry) -> bool {
    let dx = s.pos_x.abs() - g.ftsa_center_abs_x;
    dx * dx + s.pos_y * s.pos_y <= g.ftsa_radius * g.ftsa_radius
}

fn linked(a: u64, b: u64) -> bool {
    b > a && b - a <= 30
}

pub fn oracle_not_five(frames: &[Frame], g: &CourtGeometry) -> Vec<bool> {
    frames
        .iter()
        .map(|f| f.samples.iter().filter(|s| on_court(s, g)).count() != 5)
        .collect()
}

/// Extends a frame's run of `pred` in both directions and reports whether
/// the whole run lasts at least `min_ms`.
fn containing_run_long_enough(
    frames: &[Frame],
    i: usize,
    pred: &dyn Fn(usize) -> bool,
    min_ms: u64,
) -> bool {
    if !pred(i) {
        return false;
    }
    let mut lo = i;
    while lo > 0 && pred(lo - 1) && linked(frames[lo - 1].t_ms, frames[lo].t_ms) {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < frames.len() && pred(hi + 1) && linked(frames[hi].t_ms, frames[hi + 1].t_ms) {
        hi += 1;
    }
    frames[hi].t_ms - frames[lo].t_ms + FRAME_MS >= min_ms
}

pub fn oracle_free_throw(frames: &[Frame], g: &CourtGeometry, t_ft_ms: u64) -> Vec<bool> {
    (0..frames.len())
        .map(|i| {
            frames[i].samples.iter().filter(|s| in_disc(s, g)).any(|s| {
                let id = s.player_id;
                let pred = |j: usize| {
                    frames[j]
                        .samples
                        .iter()
                        .any(|q| q.player_id == id && in_disc(q, g))
                };
                containing_run_long_enough(frames, i, &pred, t_ft_ms)
            })
        })
        .collect()
}

pub fn oracle_slow(frame: &Frame, g: &CourtGeometry, v_min_kmh: f64) -> bool {
    let on: Vec<&PlayerSample> = frame.samples.iter().filter(|s| on_court(s, g)).collect();
    on.len() == 5
        && on
            .iter()
            .all(|s| (s.vel_x * s.vel_x + s.vel_y * s.vel_y).sqrt() < v_min_kmh)
}

pub fn oracle_low_speed(
    frames: &[Frame],
    g: &CourtGeometry,
    v_min_kmh: f64,
    t_vel_ms: u64,
) -> Vec<bool> {
    let slow: Vec<bool> = frames
        .iter()
        .map(|f| oracle_slow(f, g, v_min_kmh))
        .collect();
    let pred = |j: usize| slow[j];
    (0..frames.len())
        .map(|i| containing_run_long_enough(frames, i, &pred, t_vel_ms))
        .collect()
}

/// Per-second activity prediction by direct counting.
pub fn naive_inactive(t_ms: &[u64], dropped: &[bool], duration_s: usize) -> Vec<bool> {
    (1..=duration_s)
        .map(|s| {
            let lo = (s as u64 - 1) * 1000;
            let hi = s as u64 * 1000;
            let idx: Vec<usize> = (0..t_ms.len())
                .filter(|&i| t_ms[i] >= lo && t_ms[i] < hi)
                .collect();
            let d = idx.iter().filter(|&&i| dropped[i]).count();
            idx.is_empty() || 2 * d >= idx.len()
        })
        .collect()
}

pub fn naive_majority(polls: &[Poss]) -> MajorityPoss {
    if polls.is_empty() {
        return MajorityPoss::None;
    }
    let count = |p: Poss| polls.iter().filter(|&&q| q == p).count();
    let (o, d, t) = (
        count(Poss::Offensive),
        count(Poss::Defensive),
        count(Poss::Transition),
    );
    if o > d && o > t {
        MajorityPoss::Off
    } else if d > o && d > t {
        MajorityPoss::Def
    } else {
        MajorityPoss::Transition
    }
}

pub fn naive_final_ord(poss: &[Poss]) -> u32 {
    let mut firings = 0;
    for k in 1..poss.len() {
        if poss[k - 1] == Poss::Transition && poss[k] != Poss::Transition {
            firings += 1;
        }
    }
    1 + firings
}

/// (tp, tn, fp, fn) with `true` as the positive class.
pub fn naive_confusion(pred: &[bool], truth: &[bool]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.0 += 1,
            (false, false) => c.1 += 1,
            (true, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    c
}

/// A random stream of up to `max_frames` frames built from sticky per-player
/// Markov chains, so runs of every length occur. Speeds hover around
/// `v_ref`, positions wander in and out of the free throw discs, players
/// occasionally step off court, and the clock occasionally skips.
pub fn micro_game(seed: u64, max_frames: usize, v_ref: f64) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CourtGeometry::default();
    let n = rng.random_range(1..=max_frames);
    let players = rng.random_range(5..=6u32);
    let stick = rng.random_range(0.80..0.995);
    let mut in_ft = vec![false; players as usize];
    let mut slow = vec![true; players as usize];
    let mut off = vec![false; players as usize];
    let mut frames = Vec::with_capacity(n);
    let mut t = rng.random_range(0..5u64) * FRAME_MS;
    for _ in 0..n {
        let mut samples = Vec::new();
        for p in 0..players as usize {
            if !rng.random_bool(stick) {
                in_ft[p] = !in_ft[p];
            }
            if !rng.random_bool(stick) {
                slow[p] = !slow[p];
            }
            if rng.random_bool(if off[p] { 0.2 } else { 0.01 }) {
                off[p] = !off[p];
            }
            let (x, y) = if off[p] {
                (0.0, g.half_width + 100.0)
            } else if in_ft[p] {
                let side = if p % 2 == 0 { 1.0 } else { -1.0 };
                (
                    side * (g.ftsa_center_abs_x + rng.random_range(-170.0..170.0)),
                    rng.random_range(-40.0..40.0),
                )
            } else {
                (
                    rng.random_range(-300.0..300.0),
                    rng.random_range(-700.0..700.0),
                )
            };
            let speed = if slow[p] {
                rng.random_range(0.0..v_ref)
            } else {
                rng.random_range(v_ref..2.0 * v_ref)
            };
            // occasionally land exactly on the threshold
            let speed = if rng.random_bool(0.02) { v_ref } else { speed };
            samples.push(PlayerSample {
                player_id: PlayerId(p as u32 + 1),
                pos_x: x,
                pos_y: y,
                vel_x: speed,
                vel_y: 0.0,
            });
        }
        frames.push(Frame::new(t, samples));
        t += match rng.random_range(0..100) {
            0 => 60,
            1 => 40,
            2 => 30,
            _ => FRAME_MS,
        };
    }
    frames
}
