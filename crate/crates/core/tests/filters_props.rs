mod common;

use common::{micro_game, oracle_free_throw, oracle_low_speed, oracle_not_five, oracle_slow};
use hoopscan::filters::{
    compute_mask, criterion_free_throw, criterion_low_speed, criterion_not_five,
    filter_measurements, DropMask, DropReasons, FilterParams,
};
use hoopscan::model::CourtGeometry;
use proptest::prelude::*;

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn criteria_match_oracles(seed in any::<u64>(), t_ft in 0u64..3_000, t_vel in 0u64..3_000) {
        let g = CourtGeometry::default();
        let frames = micro_game(seed, 600, 8.0);
        prop_assert_eq!(criterion_not_five(&frames, &g), oracle_not_five(&frames, &g));
        prop_assert_eq!(criterion_free_throw(&frames, &g, t_ft), oracle_free_throw(&frames, &g, t_ft));
        prop_assert_eq!(criterion_low_speed(&frames, &g, 8.0, t_vel), oracle_low_speed(&frames, &g, 8.0, t_vel));
    }

    #[test]
    fn low_speed_monotone_in_vmin(seed in any::<u64>(), v in 0.0f64..16.0, dv in 0.0f64..4.0, t_vel in 0u64..2_000) {
        let g = CourtGeometry::default();
        let frames = micro_game(seed, 400, 8.0);
        let low = criterion_low_speed(&frames, &g, v, t_vel);
        let high = criterion_low_speed(&frames, &g, v + dv, t_vel);
        prop_assert!(subset(&low, &high));
    }

    #[test]
    fn durations_monotone(seed in any::<u64>(), t in 0u64..2_000, dt in 0u64..2_000) {
        let g = CourtGeometry::default();
        let frames = micro_game(seed, 400, 8.0);
        prop_assert!(subset(&criterion_low_speed(&frames, &g, 8.0, t + dt), &criterion_low_speed(&frames, &g, 8.0, t)));
        prop_assert!(subset(&criterion_free_throw(&frames, &g, t + dt), &criterion_free_throw(&frames, &g, t)));
    }

    #[test]
    fn zero_duration_is_the_bare_predicate(seed in any::<u64>(), v in 0.0f64..16.0) {
        let g = CourtGeometry::default();
        let frames = micro_game(seed, 400, 8.0);
        let bare: Vec<bool> = frames.iter().map(|f| oracle_slow(f, &g, v)).collect();
        prop_assert_eq!(criterion_low_speed(&frames, &g, v, 0), bare);
    }

    #[test]
    fn reduced_stream_is_ordered_subsequence(seed in any::<u64>()) {
        let g = CourtGeometry::default();
        let frames = micro_game(seed, 400, 8.0);
        let params = FilterParams { t_ft_ms: 1_000, v_min_kmh: 8.0, t_vel_ms: 500 };
        let (xr, mask) = filter_measurements(&frames, &g, &params);
        let expected: Vec<_> = frames.iter().zip(&mask.reasons).filter(|(_, r)| r.is_kept()).map(|(f, _)| f.clone()).collect();
        prop_assert_eq!(&xr, &expected);
        prop_assert_eq!(xr.len(), mask.kept_count());
        prop_assert!(xr.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
    }

    #[test]
    fn criteria_commute(seed in any::<u64>(), order in Just([0usize, 1, 2]).prop_shuffle()) {
        let g = CourtGeometry::default();
        let frames = micro_game(seed, 400, 8.0);
        let params = FilterParams { t_ft_ms: 800, v_min_kmh: 8.0, t_vel_ms: 400 };
        let hits = [
            (criterion_not_five(&frames, &g), DropReasons::NOT_FIVE_PLAYERS),
            (criterion_free_throw(&frames, &g, params.t_ft_ms), DropReasons::FREE_THROW_DWELL),
            (criterion_low_speed(&frames, &g, params.v_min_kmh, params.t_vel_ms), DropReasons::LOW_SPEED_SPELL),
        ];
        let mut mask = DropMask::kept(&frames);
        for &k in &order {
            mask.apply(&hits[k].0, hits[k].1);
        }
        prop_assert_eq!(mask, compute_mask(&frames, &g, &params));
    }
}

#[test]
fn overlapping_criteria_carry_every_reason() {
    let g = CourtGeometry::default();
    let params = FilterParams {
        t_ft_ms: 600,
        v_min_kmh: 8.0,
        t_vel_ms: 600,
    };
    let mut seen_pairs = 0;
    for seed in 0..200 {
        let frames = micro_game(seed, 800, 8.0);
        let mask = compute_mask(&frames, &g, &params);
        let a = oracle_not_five(&frames, &g);
        let b = oracle_free_throw(&frames, &g, params.t_ft_ms);
        let c = oracle_low_speed(&frames, &g, params.v_min_kmh, params.t_vel_ms);
        for i in 0..frames.len() {
            let r = mask.reasons[i];
            assert_eq!(r.contains(DropReasons::NOT_FIVE_PLAYERS), a[i]);
            assert_eq!(r.contains(DropReasons::FREE_THROW_DWELL), b[i]);
            assert_eq!(r.contains(DropReasons::LOW_SPEED_SPELL), c[i]);
            // a crowded or thin court is never a slow spell
            assert!(!(a[i] && c[i]));
            if (a[i] || c[i]) && b[i] {
                seen_pairs += 1;
            }
        }
    }
    assert!(seen_pairs > 0, "generator never produced overlapping drops");
}
