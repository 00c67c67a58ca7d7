//! First-return analysis of the tower bases and the skyscraper decomposition
//! they induce.
//!
//! The base `E_j` is level 0 of tower `j`, realized as the interval
//! `[0, w_j)`. A base point in column `c` of the next stage climbs the
//! stage-`j` copy and the spacers above it; for every column but the last it
//! then lands on the bottom of the neighbouring copy, which is again inside
//! `E_j`, after exactly `h_j + s_j(c)` steps. The last column exits tower
//! `j+1` and the same dichotomy repeats one stage deeper, so first-return
//! times resolve column by column up to a chosen depth cap. Mass whose
//! return needs stages beyond the cap is reported as escaping.
//!
//! Every resolved return lands inside `E_j` again, which is what makes the
//! avoidance check in [`skyscraper_check`] decidable: a set that misses
//! `E_j` is missed by all landings, including the ones not yet resolved.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::arith::{rat_int, serde_int, serde_rat, serde_rat_pairs, Int, Rat};
use crate::cells::{Cell, CellSet};
use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::intervals::IntervalSet;

/// One first-return class: the base mass returning after exactly
/// `return_time` steps, with its horizontal location and landing image.
///
/// `base` and `landing` are disjoint interval unions inside `[0, w_j)`;
/// the landing of `base` under the `return_time`-th power is `landing`,
/// a translate within the base level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpectrumEntry {
    #[serde(with = "serde_int")]
    pub return_time: Int,
    #[serde(with = "serde_rat")]
    pub mass: Rat,
    #[serde(with = "serde_rat_pairs")]
    pub base: Vec<(Rat, Rat)>,
    #[serde(with = "serde_rat_pairs")]
    pub landing: Vec<(Rat, Rat)>,
}

/// First-return-time spectrum of the stage-`stage` base, resolved through
/// tower `depth`.
///
/// Invariant: the entry masses plus `escaping_mass` sum to `w_stage`
/// exactly, and entries are sorted by return time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReturnSpectrum {
    pub stage: u32,
    pub depth: u32,
    #[serde(with = "serde_rat")]
    pub base_width: Rat,
    pub entries: Vec<SpectrumEntry>,
    #[serde(with = "serde_rat_pairs")]
    pub escaping: Vec<(Rat, Rat)>,
    #[serde(with = "serde_rat")]
    pub escaping_mass: Rat,
}

/// Report of [`skyscraper_check`]: minimum return time against a threshold,
/// exact bookkeeping of the swept region, and the avoidance measurements
/// against a test set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkyscraperReport {
    pub spectrum: ReturnSpectrum,
    /// Exact minimum return time when any class resolved, else the generic
    /// lower bound `h_stage` (a first return must climb the whole tower).
    #[serde(with = "serde_int")]
    pub h_min_lower: Int,
    pub h_min_exact: bool,
    pub exceeds_threshold: bool,
    /// Sum of `return_time * mass` over the resolved classes.
    #[serde(with = "serde_rat")]
    pub swept_mass: Rat,
    #[serde(with = "serde_rat")]
    pub space_measure: Rat,
    pub sweeps_disjoint: bool,
    /// Per return time, the exact overlap of the landing with the test set.
    #[serde(with = "crate::arith::serde_int_rat_pairs")]
    pub landing_overlaps: Vec<(Int, Rat)>,
    #[serde(with = "serde_rat")]
    pub landing_overlap_total: Rat,
    /// Escaping mass also lands in the base eventually, so its overlap with
    /// the test set is bounded by `min(escaping_mass, base_overlap)`.
    #[serde(with = "serde_rat")]
    pub unresolved_overlap_bound: Rat,
    /// Exact measure of the test set inside the base interval; avoidance of
    /// every landing, resolved or not, follows whenever this is small.
    #[serde(with = "serde_rat")]
    pub base_overlap: Rat,
    pub avoidance_within_tol: bool,
}

/// A branch of the first-return recursion: mass sitting on the top level of
/// tower `stage`, occupying stage-`stage` offsets `window`, having climbed
/// `steps` levels since leaving the base. Adding `base_shift` to a window
/// point recovers the branch's starting offset in the base.
struct Branch {
    stage: u32,
    window: (Rat, Rat),
    base_shift: Rat,
    steps: Int,
}

fn check_depth(c: &Construction, j: u32, depth: u32) -> Result<()> {
    if j == 0 || j >= depth || depth > c.max_stage() {
        return Err(Error::DepthOutOfRange {
            stage: j,
            depth,
            max: c.max_stage(),
        });
    }
    Ok(())
}

/// Resolves the first-return time of every base point of tower `j` whose
/// orbit stays within tower `depth`, classifying the base `[0, w_j)` into
/// return classes plus an escaping remainder.
pub fn return_spectrum(c: &Construction, j: u32, depth: u32) -> Result<ReturnSpectrum> {
    type Windows = (Vec<(Rat, Rat)>, Vec<(Rat, Rat)>);
    check_depth(c, j, depth)?;
    let w_j = c.width(j).clone();
    let mut classes: BTreeMap<Int, Windows> = BTreeMap::new();
    let mut escaping_raw: Vec<(Rat, Rat)> = Vec::new();

    let mut queue = vec![Branch {
        stage: j,
        window: (Rat::zero(), w_j.clone()),
        base_shift: Rat::zero(),
        steps: c.height(j) - Int::one(),
    }];
    while let Some(branch) = queue.pop() {
        let k = branch.stage;
        let params = c.stage_params(k)?;
        let w_next = c.width(k + 1);
        let cuts = params.cuts();
        for col in 0..cuts {
            let col_lo = rat_int(&Int::from(col)) * w_next;
            let col_hi = &col_lo + w_next;
            let lo = (&branch.window.0).max(&col_lo).clone();
            let hi = (&branch.window.1).min(&col_hi).clone();
            if lo >= hi {
                continue;
            }
            let spacer = &params.spacers[col];
            if col + 1 < cuts {
                // lands on the bottom level of the next copy: a return
                let time = &branch.steps + spacer + Int::one();
                let entry = classes.entry(time).or_default();
                entry
                    .0
                    .push((&lo + &branch.base_shift, &hi + &branch.base_shift));
                entry.1.push((&lo + w_next, &hi + w_next));
            } else if k + 1 < depth {
                queue.push(Branch {
                    stage: k + 1,
                    window: (&lo - &col_lo, &hi - &col_lo),
                    base_shift: &branch.base_shift + &col_lo,
                    steps: &branch.steps + spacer,
                });
            } else {
                escaping_raw.push((&lo + &branch.base_shift, &hi + &branch.base_shift));
            }
        }
    }

    let mut entries = Vec::with_capacity(classes.len());
    for (time, (base, landing)) in classes {
        let base = IntervalSet::from_spans(base);
        let landing = IntervalSet::from_spans(landing);
        debug_assert_eq!(base.measure(), landing.measure());
        entries.push(SpectrumEntry {
            return_time: time,
            mass: base.measure(),
            base: base.spans().to_vec(),
            landing: landing.spans().to_vec(),
        });
    }
    let escaping = IntervalSet::from_spans(escaping_raw);
    let escaping_mass = escaping.measure();
    debug_assert_eq!(
        entries.iter().map(|e| &e.mass).sum::<Rat>() + &escaping_mass,
        w_j
    );
    Ok(ReturnSpectrum {
        stage: j,
        depth,
        base_width: w_j,
        entries,
        escaping: escaping.spans().to_vec(),
        escaping_mass,
    })
}

/// True when the two level runs share a level and their offset windows meet.
fn runs_overlap(a: &Cell, b: &Cell) -> bool {
    a.level < &b.level + &b.span && b.level < &a.level + &a.span && a.lo < b.hi && b.lo < a.hi
}

/// Checks the skyscraper decomposition induced by the stage-`j` base against
/// a height threshold and a test set.
///
/// The swept region of a return class is its base pieces carried through all
/// `return_time` levels of the climb; those climbs stay inside tower `depth`
/// and are pairwise disjoint, which is verified exactly on the level runs.
/// Avoidance holds within `tol` whenever the test set meets `[0, w_j)` in
/// measure at most `tol`, since every landing falls back into the base.
pub fn skyscraper_check(
    c: &Construction,
    j: u32,
    depth: u32,
    threshold: &Int,
    a: &CellSet,
    tol: &Rat,
) -> Result<SkyscraperReport> {
    let spectrum = return_spectrum(c, j, depth)?;

    let (h_min_lower, h_min_exact) = match spectrum.entries.first() {
        Some(e) => (e.return_time.clone(), true),
        None => (c.height(j).clone(), false),
    };
    let exceeds_threshold = &h_min_lower > threshold;

    let mut swept_mass = Rat::zero();
    let mut sweep_runs: Vec<Cell> = Vec::new();
    for entry in &spectrum.entries {
        swept_mass += rat_int(&entry.return_time) * &entry.mass;
        let base_set = IntervalSet::from_spans(entry.base.clone());
        let (cells, unaddressed) = CellSet::from_intervals(c, &base_set, depth)?;
        debug_assert!(unaddressed.is_zero());
        for cell in cells.cells() {
            sweep_runs.push(Cell {
                level: cell.level.clone(),
                span: &cell.span - Int::one() + &entry.return_time,
                lo: cell.lo.clone(),
                hi: cell.hi.clone(),
            });
        }
    }
    let mut sweeps_disjoint = true;
    'outer: for (i, a_run) in sweep_runs.iter().enumerate() {
        for b_run in &sweep_runs[i + 1..] {
            if runs_overlap(a_run, b_run) {
                sweeps_disjoint = false;
                break 'outer;
            }
        }
    }

    let realized_a = a.realize(c)?;
    let base_interval = IntervalSet::interval(Rat::zero(), spectrum.base_width.clone());
    let base_overlap = realized_a.intersect(&base_interval).measure();
    let mut landing_overlaps = Vec::with_capacity(spectrum.entries.len());
    let mut landing_overlap_total = Rat::zero();
    for entry in &spectrum.entries {
        let landing = IntervalSet::from_spans(entry.landing.clone());
        let overlap = realized_a.intersect(&landing).measure();
        landing_overlap_total += &overlap;
        landing_overlaps.push((entry.return_time.clone(), overlap));
    }
    let unresolved_overlap_bound = (&spectrum.escaping_mass).min(&base_overlap).clone();
    let avoidance_within_tol = &base_overlap <= tol;

    Ok(SkyscraperReport {
        h_min_lower,
        h_min_exact,
        exceeds_threshold,
        swept_mass,
        space_measure: c.tower_measure(depth).clone(),
        sweeps_disjoint,
        landing_overlaps,
        landing_overlap_total,
        unresolved_overlap_bound,
        base_overlap,
        avoidance_within_tol,
        spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};
    use crate::cells::image_set;
    use crate::construction::{StageParams, TowerCoord};

    fn c0() -> Construction {
        Construction::new(
            int(2),
            vec![
                StageParams::from_i64(&[1, 2]),
                StageParams::from_i64(&[20, 60]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn depth_two_resolves_first_column_only() {
        let s = return_spectrum(&c0(), 1, 2).unwrap();
        assert_eq!(s.entries.len(), 1);
        let e = &s.entries[0];
        assert_eq!(e.return_time, int(3));
        assert_eq!(e.mass, rat(1, 2));
        assert_eq!(e.base, vec![(rat(0, 1), rat(1, 2))]);
        assert_eq!(e.landing, vec![(rat(1, 2), rat(1, 1))]);
        assert_eq!(s.escaping, vec![(rat(1, 2), rat(1, 1))]);
        assert_eq!(s.escaping_mass, rat(1, 2));
    }

    #[test]
    fn depth_three_resolves_through_second_stage() {
        let s = return_spectrum(&c0(), 1, 3).unwrap();
        let times: Vec<_> = s.entries.iter().map(|e| e.return_time.clone()).collect();
        assert_eq!(times, vec![int(3), int(24)]);
        let deep = &s.entries[1];
        assert_eq!(deep.mass, rat(1, 4));
        assert_eq!(deep.base, vec![(rat(1, 2), rat(3, 4))]);
        assert_eq!(deep.landing, vec![(rat(1, 4), rat(1, 2))]);
        assert_eq!(s.escaping, vec![(rat(3, 4), rat(1, 1))]);
        assert_eq!(s.escaping_mass, rat(1, 4));
    }

    #[test]
    fn masses_sum_to_base_width_and_escape_shrinks_with_depth() {
        let c = c0();
        let mut last_escape = None;
        for depth in 2..=3 {
            let s = return_spectrum(&c, 1, depth).unwrap();
            let total: Rat =
                s.entries.iter().map(|e| e.mass.clone()).sum::<Rat>() + &s.escaping_mass;
            assert_eq!(total, rat(1, 1));
            if let Some(prev) = last_escape {
                assert!(s.escaping_mass <= prev);
            }
            last_escape = Some(s.escaping_mass);
        }
        let s2 = return_spectrum(&c, 2, 3).unwrap();
        let total: Rat = s2.entries.iter().map(|e| e.mass.clone()).sum::<Rat>() + &s2.escaping_mass;
        assert_eq!(total, rat(1, 2));
        assert_eq!(s2.entries[0].return_time, int(27));
    }

    #[test]
    fn zero_spacers_collapse_to_a_single_return_time() {
        let c = Construction::new(
            int(2),
            vec![
                StageParams::from_i64(&[0, 0, 0]),
                StageParams::from_i64(&[0, 0, 0]),
            ],
        )
        .unwrap();
        let shallow = return_spectrum(&c, 1, 2).unwrap();
        assert_eq!(shallow.entries.len(), 1);
        assert_eq!(shallow.entries[0].return_time, int(2));
        assert_eq!(shallow.entries[0].mass, rat(2, 3));
        let deep = return_spectrum(&c, 1, 3).unwrap();
        assert_eq!(deep.entries.len(), 1);
        assert_eq!(deep.entries[0].return_time, int(2));
        assert_eq!(deep.entries[0].mass, rat(2, 3) + rat(2, 9));
        assert_eq!(deep.escaping_mass, rat(1, 9));
    }

    #[test]
    fn landing_agrees_with_the_power_engine() {
        let c = c0();
        let s = return_spectrum(&c, 1, 3).unwrap();
        let deep = &s.entries[1];

        // pointwise: a representative of the base piece moves by -1/4
        let x = rat(5, 8);
        let coord = TowerCoord::new(1, int(0), x.clone());
        let moved = c.apply_power(&coord, &deep.return_time, 3).unwrap();
        assert_eq!(c.realize_coord(&moved).unwrap(), rat(3, 8));

        // setwise: the shifted base piece realizes to the landing window
        let base = IntervalSet::from_spans(deep.base.clone());
        let (cells, unaddressed) = CellSet::from_intervals(&c, &base, 3).unwrap();
        assert_eq!(unaddressed, rat(0, 1));
        let (img, dropped) = image_set(&c, &deep.return_time, &cells, 3).unwrap();
        assert_eq!(dropped, rat(0, 1));
        let realized = img.realize(&c).unwrap();
        assert_eq!(realized.spans(), &[(rat(1, 4), rat(1, 2))]);
    }

    #[test]
    fn skyscraper_report_on_a_set_missing_the_base() {
        let c = c0();
        let (a, rest) =
            CellSet::from_intervals(&c, &IntervalSet::interval(rat(5, 2), rat(3, 1)), 3).unwrap();
        assert_eq!(rest, rat(0, 1));
        let r = skyscraper_check(&c, 1, 3, &int(2), &a, &rat(0, 1)).unwrap();
        assert!(r.h_min_exact);
        assert_eq!(r.h_min_lower, int(3));
        assert!(r.exceeds_threshold);
        assert_eq!(r.swept_mass, rat(15, 2));
        assert_eq!(r.space_measure, rat(47, 2));
        assert!(r.sweeps_disjoint);
        assert_eq!(r.base_overlap, rat(0, 1));
        assert_eq!(r.landing_overlap_total, rat(0, 1));
        assert_eq!(r.unresolved_overlap_bound, rat(0, 1));
        assert!(r.avoidance_within_tol);
    }

    #[test]
    fn skyscraper_negative_control_on_the_base_itself() {
        let c = c0();
        let (a, _) =
            CellSet::from_intervals(&c, &IntervalSet::interval(rat(0, 1), rat(1, 1)), 3).unwrap();
        let r = skyscraper_check(&c, 1, 3, &int(2), &a, &rat(0, 1)).unwrap();
        assert_eq!(r.base_overlap, rat(1, 1));
        assert_eq!(r.landing_overlap_total, rat(3, 4));
        assert_eq!(r.unresolved_overlap_bound, rat(1, 4));
        assert!(!r.avoidance_within_tol);
        assert_eq!(
            r.landing_overlaps,
            vec![(int(3), rat(1, 2)), (int(24), rat(1, 4))]
        );
    }

    #[test]
    fn depth_bounds_are_enforced() {
        let c = c0();
        assert!(matches!(
            return_spectrum(&c, 1, 4),
            Err(Error::DepthOutOfRange { .. })
        ));
        assert!(matches!(
            return_spectrum(&c, 2, 2),
            Err(Error::DepthOutOfRange { .. })
        ));
        assert!(matches!(
            return_spectrum(&c, 0, 2),
            Err(Error::DepthOutOfRange { .. })
        ));
    }
}
