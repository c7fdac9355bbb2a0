//! Domain types shared by every stage of the pipeline.
//!
//! Units are fixed throughout the crate: positions in centimeters, velocities
//! in km/h, timestamps in milliseconds. The court origin is the center of the
//! floor, `x` runs along the court length and `y` along its width. Anything
//! read from disk is converted to these units at the boundary.

use std::fmt;

use thiserror::Error;

/// Nominal sampling period of the tracker (50 Hz).
pub const SAMPLE_PERIOD_MS: u64 = 20;

/// Sampling frequency of the tracker.
pub const SAMPLE_RATE_HZ: u64 = 1000 / SAMPLE_PERIOD_MS;

/// Largest spacing between two consecutive frames that still counts as
/// contiguous. One lost sample (40 ms) breaks a run.
pub const MAX_CONTIGUOUS_GAP_MS: u64 = SAMPLE_PERIOD_MS + SAMPLE_PERIOD_MS / 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("invalid court geometry: {0}")]
    InvalidGeometry(String),
}

/// Tracker-assigned player identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlayerId(pub u32);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One player's position (cm) and velocity (km/h) at a time instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerSample {
    pub player_id: PlayerId,
    pub pos_x: f64,
    pub pos_y: f64,
    pub vel_x: f64,
    pub vel_y: f64,
}

impl PlayerSample {
    pub fn new(
        player_id: PlayerId,
        pos_x: f64,
        pos_y: f64,
        vel_x: f64,
        vel_y: f64,
    ) -> Result<Self, ModelError> {
        for (name, v) in [
            ("pos_x", pos_x),
            ("pos_y", pos_y),
            ("vel_x", vel_x),
            ("vel_y", vel_y),
        ] {
            if !v.is_finite() {
                return Err(ModelError::InvalidMeasurement(format!(
                    "player {player_id}: {name} is not finite ({v})"
                )));
            }
        }
        Ok(Self {
            player_id,
            pos_x,
            pos_y,
            vel_x,
            vel_y,
        })
    }

    /// Planar speed in km/h. Samples are validated on construction, so this
    /// cannot fail.
    pub fn speed(&self) -> f64 {
        self.vel_x.hypot(self.vel_y)
    }
}

/// All samples recorded at one time instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub t_ms: u64,
    pub samples: Vec<PlayerSample>,
}

impl Frame {
    pub fn new(t_ms: u64, samples: Vec<PlayerSample>) -> Self {
        Self { t_ms, samples }
    }
}

/// True when two frames are close enough in time to belong to the same run.
pub fn contiguous(prev_t_ms: u64, next_t_ms: u64) -> bool {
    next_t_ms > prev_t_ms && next_t_ms - prev_t_ms <= MAX_CONTIGUOUS_GAP_MS
}

/// Duration of a run of frames from `first_t_ms` to `last_t_ms` inclusive.
/// A single frame lasts one sampling period.
pub fn run_duration_ms(first_t_ms: u64, last_t_ms: u64) -> u64 {
    last_t_ms - first_t_ms + SAMPLE_PERIOD_MS
}

/// Court dimensions relevant to the filters, in centimeters.
///
/// `ftsa_center_abs_x` is the distance from midcourt to the center of each
/// free throw circle; the free throw shooting area is the disc of radius
/// `ftsa_radius` around it, on both halves of the court.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourtGeometry {
    pub half_length: f64,
    pub half_width: f64,
    pub ftsa_center_abs_x: f64,
    pub ftsa_radius: f64,
}

impl Default for CourtGeometry {
    /// 28 m x 15 m FIBA court; free throw line 5.80 m from the endline.
    fn default() -> Self {
        Self {
            half_length: 1400.0,
            half_width: 750.0,
            ftsa_center_abs_x: 820.0,
            ftsa_radius: 180.0,
        }
    }
}

impl CourtGeometry {
    pub fn new(
        half_length: f64,
        half_width: f64,
        ftsa_center_abs_x: f64,
        ftsa_radius: f64,
    ) -> Result<Self, ModelError> {
        let geom = Self {
            half_length,
            half_width,
            ftsa_center_abs_x,
            ftsa_radius,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("half_length", self.half_length),
            ("half_width", self.half_width),
            ("ftsa_center_abs_x", self.ftsa_center_abs_x),
            ("ftsa_radius", self.ftsa_radius),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidGeometry(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.ftsa_center_abs_x >= self.half_length {
            return Err(ModelError::InvalidGeometry(format!(
                "free throw center {} must lie inside half length {}",
                self.ftsa_center_abs_x, self.half_length
            )));
        }
        if self.ftsa_radius > self.half_width {
            return Err(ModelError::InvalidGeometry(format!(
                "free throw radius {} exceeds half width {}",
                self.ftsa_radius, self.half_width
            )));
        }
        Ok(())
    }
}

/// Euclidean norm of a planar velocity, in km/h.
pub fn planar_speed(vel_x: f64, vel_y: f64) -> Result<f64, ModelError> {
    if !(vel_x.is_finite() && vel_y.is_finite()) {
        return Err(ModelError::InvalidMeasurement(format!(
            "velocity ({vel_x}, {vel_y}) is not finite"
        )));
    }
    Ok(vel_x.hypot(vel_y))
}

/// Closed containment test against the court rectangle.
pub fn in_court(pos_x: f64, pos_y: f64, geom: &CourtGeometry) -> bool {
    pos_x.abs() <= geom.half_length && pos_y.abs() <= geom.half_width
}

/// Closed containment test against either free throw shooting disc.
pub fn in_ftsa(pos_x: f64, pos_y: f64, geom: &CourtGeometry) -> bool {
    // Both discs are mirror images, so fold onto the positive half.
    let dx = pos_x.abs() - geom.ftsa_center_abs_x;
    dx * dx + pos_y * pos_y <= geom.ftsa_radius * geom.ftsa_radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn planar_speed_examples() {
        assert_eq!(planar_speed(3.0, 4.0).unwrap(), 5.0);
        assert_eq!(planar_speed(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(planar_speed(-6.0, 8.0).unwrap(), 10.0);
    }

    #[test]
    fn planar_speed_rejects_non_finite() {
        assert!(matches!(
            planar_speed(f64::NAN, 1.0),
            Err(ModelError::InvalidMeasurement(_))
        ));
        assert!(planar_speed(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn in_court_examples() {
        let g = CourtGeometry::default();
        assert!(in_court(0.0, 0.0, &g));
        assert!(!in_court(1500.0, 0.0, &g));
        assert!(in_court(-1400.0, 750.0, &g));
    }

    #[test]
    fn in_ftsa_examples() {
        let g = CourtGeometry::default();
        assert!(in_ftsa(820.0, 0.0, &g));
        assert!(!in_ftsa(820.0, 181.0, &g));
        assert!(!in_ftsa(0.0, 0.0, &g));
        assert!(in_ftsa(-820.0, 180.0, &g));
    }

    #[test]
    fn geometry_validation() {
        assert!(CourtGeometry::default().validate().is_ok());
        assert!(CourtGeometry::new(1400.0, 750.0, 1400.0, 180.0).is_err());
        assert!(CourtGeometry::new(1400.0, 750.0, 820.0, 751.0).is_err());
        assert!(CourtGeometry::new(1400.0, 0.0, 820.0, 180.0).is_err());
        assert!(CourtGeometry::new(f64::NAN, 750.0, 820.0, 180.0).is_err());
    }

    #[test]
    fn sample_rejects_non_finite() {
        assert!(PlayerSample::new(PlayerId(1), 0.0, f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn run_accounting() {
        assert_eq!(run_duration_ms(100, 100), 20);
        assert_eq!(run_duration_ms(0, 2980), 3000);
        assert!(contiguous(0, 20));
        assert!(!contiguous(0, 40));
        assert!(!contiguous(20, 20));
    }

    proptest! {
        #[test]
        fn speed_symmetries(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let s = planar_speed(a, b).unwrap();
            prop_assert_eq!(s, planar_speed(a.abs(), b.abs()).unwrap());
            prop_assert_eq!(s, planar_speed(b, a).unwrap());
            prop_assert!(s >= 0.0);
        }

        #[test]
        fn ftsa_mirror_symmetry(x in -1500f64..1500.0, y in -800f64..800.0) {
            let g = CourtGeometry::default();
            prop_assert_eq!(in_ftsa(x, y, &g), in_ftsa(-x, y, &g));
            prop_assert_eq!(in_ftsa(x, y, &g), in_ftsa(x, -y, &g));
        }

        #[test]
        fn ftsa_implies_court(x in -1500f64..1500.0, y in -800f64..800.0) {
            let g = CourtGeometry::default();
            if in_ftsa(x, y, &g) {
                prop_assert!(in_court(x, y, &g));
            }
        }
    }
}
