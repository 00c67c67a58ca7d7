//! Shared fixtures for the benchmark targets.

use rankone::sidon::{generate_sidon_construction, CutSchedule};
use rankone::{Construction, Int, StageParams};

/// The two-stage worked example with a third stage appended, deep enough to
/// exercise refinement without dwarfing the bench loop.
pub fn three_stage() -> Construction {
    Construction::new(
        Int::from(2),
        vec![
            StageParams::new(vec![Int::from(1), Int::from(2)]),
            StageParams::new(vec![Int::from(20), Int::from(60)]),
            StageParams::new(vec![Int::from(3), Int::from(5), Int::from(9)]),
        ],
    )
    .unwrap()
}

/// A four-stage geometric-spacer construction, the realistic verification load.
pub fn generated() -> Construction {
    generate_sidon_construction(Int::from(1), CutSchedule::LinearPlusOne, 10, 4, 4096).unwrap()
}
