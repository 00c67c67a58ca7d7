//! Fixtures shared by the integration test targets.

#![allow(dead_code)]

use rankone::sidon::{generate_sidon_construction, CutSchedule};
use rankone::{Construction, Int, StageParams};

/// The two-stage worked example: h1 = 2, spacers (1,2) then (20,60).
pub fn c0() -> Construction {
    Construction::new(
        Int::from(2),
        vec![
            StageParams::from_i64(&[1, 2]),
            StageParams::from_i64(&[20, 60]),
        ],
    )
    .unwrap()
}

/// Same, with the stage-1 spacers swapped: a distinct construction whose
/// derived heights and widths all agree with `c0`.
pub fn c0_swapped() -> Construction {
    Construction::new(
        Int::from(2),
        vec![
            StageParams::from_i64(&[2, 1]),
            StageParams::from_i64(&[20, 60]),
        ],
    )
    .unwrap()
}

/// `c0` extended by a third stage (cuts 2, spacers 3 and 5), giving a
/// defined stage-4 tower of height 196 and width 1/8 for grid oracles.
pub fn c0_extended() -> Construction {
    Construction::new(
        Int::from(2),
        vec![
            StageParams::from_i64(&[1, 2]),
            StageParams::from_i64(&[20, 60]),
            StageParams::from_i64(&[3, 5]),
        ],
    )
    .unwrap()
}

/// Geometric-spacer construction with `stages` stages: h1 = 1, growth 10,
/// cut counts j+1.
pub fn sidon_geometric(stages: u32) -> Construction {
    generate_sidon_construction(Int::from(1), CutSchedule::LinearPlusOne, 10, stages, 4096).unwrap()
}
