//! Prefix-matched extensions: given a target construction, build a second
//! construction that copies the target's parameters up to a prefix stage and
//! continues with fast-growing spacers, then measure how close the two are.
//!
//! The two constructions share every tower up to the prefix stage, so their
//! point maps coincide there except on the top level; everything the
//! extension adds travels through spacers that grow geometrically, each
//! spacer count exceeding `growth` times the previous one. The report pairs
//! the truncated-distance computation with two proof-shaped window bounds on
//! the shared prefix tower `U`: within the stage-`j` window the self-overlap
//! of `U` under the extension is confined to one column, so its measure is
//! at most `mu(U)/r_j`, and equivalently at most (floor count of `U` in the
//! prefix grid) times the next level width.

use std::collections::BTreeSet;

use num_traits::Zero;
use serde::Serialize;

use crate::arith::{rat_int, serde_int, serde_rat, Int, Rat};
use crate::cells::{image_measure, CellSet};
use crate::construction::{Construction, StageParams};
use crate::error::{Error, Result};
use crate::metrics::{r_truncated, MetricReport};
use crate::sidon::{overlap_windows, verify_sidon_stage, window_samples, SamplePlan, MIN_GROWTH};

/// Window check of the prefix tower's self-overlap at one extension stage.
///
/// `observed_max` is the largest resolved overlap among the sampled powers;
/// single-column confinement (a shifted copy meets at most one column of
/// each level) caps the true value by
/// `column_bound = mu(U)/r_j`, and `floor_bound` restates it as the floor
/// count of `U` times the stage-`j+1` level width (the two coincide at the
/// prefix stage and the floor form shrinks faster beyond it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowBound {
    pub stage: u32,
    #[serde(with = "serde_rat")]
    pub column_bound: Rat,
    #[serde(with = "serde_rat")]
    pub floor_bound: Rat,
    #[serde(with = "serde_rat")]
    pub observed_max: Rat,
    #[serde(with = "serde_int")]
    pub observed_at: Int,
    #[serde(with = "serde_rat")]
    pub max_unresolved: Rat,
    pub sample_count: u32,
    pub within_column_bound: bool,
}

/// Output of [`approximate_report`]: the extension, the exact mass on which
/// the two point maps provably coincide, the truncated-distance report, and
/// the per-stage window bounds.
#[derive(Debug, Clone, Serialize)]
pub struct ApproximationReport {
    pub prefix_stage: u32,
    #[serde(with = "serde_int")]
    pub growth: Int,
    pub extension: Construction,
    /// Exact measure of the region where both point maps provably agree:
    /// the shared prefix tower minus its top level, plus the top-level
    /// pieces whose next landing is forced to the same place.
    #[serde(with = "serde_rat")]
    pub agreement_mass: Rat,
    #[serde(with = "serde_rat")]
    pub prefix_tower_measure: Rat,
    pub metric: MetricReport,
    pub bounds: Vec<WindowBound>,
}

/// Copies the target's stages `1..prefix-1` and appends `extra` generated
/// stages. Each generated stage reuses the target's cut count where defined
/// (the last one beyond that) and chains spacers geometrically: the first is
/// `growth * h + 1` off the current height, each next is `growth * s + 1`,
/// so consecutive travel times grow by more than `growth` even across stage
/// boundaries. Every generated stage except the last is verified to have
/// single-column self-overlaps; the last exists to certify its predecessor.
pub fn sidon_extend(
    target: &Construction,
    prefix: u32,
    growth: u32,
    extra: u32,
) -> Result<Construction> {
    if growth < MIN_GROWTH {
        return Err(Error::GrowthTooSmall { growth });
    }
    let defined = target.stage_count();
    if prefix == 0 || prefix > defined + 1 {
        return Err(Error::PrefixOutOfRange {
            prefix,
            max: defined + 1,
        });
    }
    if extra == 0 {
        return Err(Error::EmptyStageList);
    }

    let mut stages: Vec<StageParams> = target.stages()[..(prefix - 1) as usize].to_vec();
    let mut h = target.base_height().clone();
    for p in &stages {
        h = &h * Int::from(p.cuts() as u64) + p.spacer_sum();
    }
    let g = Int::from(growth);
    for idx in 0..extra {
        let j = prefix + idx;
        let cuts = if j <= defined {
            target.stage_params(j)?.cuts()
        } else {
            target.stages().last().unwrap().cuts()
        };
        let mut spacers = Vec::with_capacity(cuts);
        let mut prev = h.clone();
        for _ in 0..cuts {
            let s = &g * &prev + 1u32;
            prev = s.clone();
            spacers.push(s);
        }
        let params = StageParams::new(spacers);
        h = &h * Int::from(cuts as u64) + params.spacer_sum();
        stages.push(params);
    }
    let extension = Construction::new(target.base_height().clone(), stages)?;
    for j in prefix..prefix + extra - 1 {
        let cert = verify_sidon_stage(&extension, j, j + 1, &Rat::zero())?;
        if !cert.verdict.is_verified() {
            return Err(Error::NotSidon { stage: j });
        }
    }
    Ok(extension)
}

/// Exact measure of the region where the point maps of `s` and `t` provably
/// coincide, given that they share all parameters below stage `prefix`.
///
/// Every non-top level of the shared tower maps identically. A top-level
/// piece over cut column `c` also does when both maps send it to the same
/// place: to the bottom of column `c+1` when both spacer counts are zero, or
/// to the first fresh level of spacer block `c`, which sits at the same
/// position exactly when the spacer sums over earlier columns agree.
fn agreement_mass(s: &Construction, t: &Construction, prefix: u32) -> Rat {
    let mut mass = t.tower_measure(prefix) - t.width(prefix);
    if prefix <= t.stage_count() {
        let ps = s.stage_params(prefix).unwrap();
        let pt = t.stage_params(prefix).unwrap();
        debug_assert_eq!(ps.cuts(), pt.cuts());
        let w_next = s.width(prefix + 1);
        let mut sum_s = Int::zero();
        let mut sum_t = Int::zero();
        for c in 0..pt.cuts() {
            let (a, b) = (&ps.spacers[c], &pt.spacers[c]);
            let same_landing = if a.is_zero() && b.is_zero() {
                true
            } else {
                !a.is_zero() && !b.is_zero() && sum_s == sum_t
            };
            if same_landing {
                mass += w_next;
            }
            sum_s += a;
            sum_t += b;
        }
    }
    mass
}

/// Builds the prefix-matched extension of `target` at `prefix` (one stage
/// deeper than the target), computes the truncated distance between the two
/// over `plan`, and checks the window bounds of the shared prefix tower.
///
/// Requires `prefix >= 2`: the bounds live on tower `prefix - 1`.
pub fn approximate_report(
    target: &Construction,
    prefix: u32,
    growth: u32,
    k: u32,
    plan: &SamplePlan,
    tol: &Rat,
) -> Result<ApproximationReport> {
    if prefix < 2 {
        return Err(Error::PrefixOutOfRange {
            prefix,
            max: target.stage_count() + 1,
        });
    }
    let extra = (target.stage_count() + 2) - prefix;
    let extension = sidon_extend(target, prefix, growth, extra)?;
    let metric = r_truncated(&extension, target, k, plan, tol)?;
    let agreement = agreement_mass(&extension, target, prefix);

    let u_stage = prefix - 1;
    let mu_u = extension.tower_measure(u_stage).clone();
    let floors =
        extension.height(u_stage) * Int::from(extension.stage_params(u_stage)?.cuts() as u64);
    let depth = extension.max_stage();
    let u_fine = CellSet::tower(&extension, u_stage)?.refine_to(&extension, depth)?;

    let mut bounds = Vec::new();
    for j in prefix..=extension.stage_count() {
        let r_j = extension.stage_params(j)?.cuts() as u64;
        let mut samples: BTreeSet<Int> = BTreeSet::new();
        for w in overlap_windows(&extension, j)? {
            samples.extend(window_samples(&w, plan.per_window));
        }
        let lo = extension.height(j);
        let hi = extension.height(j + 1);
        for n in 1..=plan.exhaustive {
            let m = Int::from(n);
            if &m > lo && &m <= hi {
                samples.insert(m);
            }
        }
        let mut observed_max = Rat::zero();
        let mut observed_at = Int::zero();
        let mut max_unresolved = Rat::zero();
        for m in &samples {
            let est = image_measure(&extension, m, &u_fine, &u_fine, depth)?;
            if est.resolved > observed_max {
                observed_max = est.resolved;
                observed_at = m.clone();
            }
            if est.unresolved_bound > max_unresolved {
                max_unresolved = est.unresolved_bound;
            }
        }
        let column_bound = &mu_u / rat_int(&Int::from(r_j));
        let floor_bound = rat_int(&floors) * extension.width(j + 1);
        let within_column_bound = observed_max <= column_bound;
        bounds.push(WindowBound {
            stage: j,
            column_bound,
            floor_bound,
            observed_max,
            observed_at,
            max_unresolved,
            sample_count: samples.len() as u32,
            within_column_bound,
        });
    }

    Ok(ApproximationReport {
        prefix_stage: prefix,
        growth: Int::from(growth),
        extension,
        agreement_mass: agreement,
        prefix_tower_measure: target.tower_measure(prefix).clone(),
        metric,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};
    use crate::construction::TowerCoord;

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
    fn extension_copies_the_prefix_and_chains_spacers() {
        let s = sidon_extend(&c0(), 2, 10, 2).unwrap();
        assert_eq!(s.stages()[0], StageParams::from_i64(&[1, 2]));
        // stage 2 regenerated off h_2 = 7: 10*7+1, then 10*71+1
        assert_eq!(s.stages()[1], StageParams::from_i64(&[71, 711]));
        assert_eq!(s.height(3), &int(796));
        // stage 3 reuses the last cut count and chains off h_3
        assert_eq!(s.stages()[2].cuts(), 2);
        assert_eq!(s.stages()[2].spacers[0], int(7961));
        assert_eq!(s.stages()[2].spacers[1], int(79611));
        for j in [1u32, 2] {
            let cert = verify_sidon_stage(&s, j, j + 1, &rat(0, 1)).unwrap();
            assert!(cert.verdict.is_verified());
        }
    }

    #[test]
    fn extension_rejects_bad_arguments() {
        assert!(matches!(
            sidon_extend(&c0(), 4, 10, 1),
            Err(Error::PrefixOutOfRange { prefix: 4, max: 3 })
        ));
        assert!(matches!(
            sidon_extend(&c0(), 0, 10, 1),
            Err(Error::PrefixOutOfRange { .. })
        ));
        assert!(matches!(
            sidon_extend(&c0(), 2, 2, 1),
            Err(Error::GrowthTooSmall { growth: 2 })
        ));
    }

    #[test]
    fn point_maps_agree_below_the_prefix_top() {
        let t = c0();
        let s = sidon_extend(&t, 2, 10, 2).unwrap();
        // every non-top level of the shared tower 2, a few offsets each
        for level in 0..6i64 {
            for num in [1i64, 3, 5] {
                let p = TowerCoord::new(2, int(level), rat(num, 16));
                let via_s = s
                    .realize_coord(&s.apply_power(&p, &int(1), 3).unwrap())
                    .unwrap();
                let via_t = t
                    .realize_coord(&t.apply_power(&p, &int(1), 3).unwrap())
                    .unwrap();
                assert_eq!(via_s, via_t);
            }
        }
        // top level, first column: both land on the first fresh level
        let p = TowerCoord::new(2, int(6), rat(1, 8));
        let via_s = s
            .realize_coord(&s.apply_power(&p, &int(1), 3).unwrap())
            .unwrap();
        let via_t = t
            .realize_coord(&t.apply_power(&p, &int(1), 3).unwrap())
            .unwrap();
        assert_eq!(via_s, via_t);
        assert_eq!(via_s, rat(7, 2) + rat(1, 8));
        // top level, second column: spacer prefixes differ, landings differ
        let p = TowerCoord::new(2, int(6), rat(3, 8));
        let via_s = s
            .realize_coord(&s.apply_power(&p, &int(1), 3).unwrap())
            .unwrap();
        let via_t = t
            .realize_coord(&t.apply_power(&p, &int(1), 3).unwrap())
            .unwrap();
        assert_ne!(via_s, via_t);
    }

    #[test]
    fn agreement_mass_counts_the_matching_top_pieces() {
        let t = c0();
        let s = sidon_extend(&t, 2, 10, 2).unwrap();
        // tower 2 minus its top level, plus the first column's top piece
        assert_eq!(agreement_mass(&s, &t, 2), rat(7, 2) - rat(1, 2) + rat(1, 4));
    }

    #[test]
    fn report_checks_window_bounds_on_the_prefix_tower() {
        let t = c0();
        let plan = SamplePlan {
            exhaustive: 8,
            window_stage_bound: 3,
            per_window: 5,
        };
        let r = approximate_report(&t, 2, 10, 2, &plan, &rat(100, 1)).unwrap();
        assert_eq!(r.prefix_stage, 2);
        assert_eq!(r.agreement_mass, rat(13, 4));
        assert_eq!(r.prefix_tower_measure, rat(7, 2));
        assert!(r.agreement_mass >= &r.prefix_tower_measure - rat(1, 2));
        assert_eq!(r.bounds.len(), 2);
        for b in &r.bounds {
            assert!(b.within_column_bound);
            assert!(b.sample_count > 0);
            // mu(U) = 2, r_j = 2 at both extension stages
            assert_eq!(b.column_bound, rat(1, 1));
        }
        // floor form coincides with the column form at the prefix stage
        assert_eq!(r.bounds[0].floor_bound, r.bounds[0].column_bound);
        assert!(r.bounds[1].floor_bound < r.bounds[1].column_bound);
        assert!(r.metric.r_hat >= rat(0, 1));
    }

    #[test]
    fn deeper_prefix_needs_no_new_disagreement() {
        let t = c0();
        let plan = SamplePlan {
            exhaustive: 8,
            window_stage_bound: 3,
            per_window: 5,
        };
        let shallow = approximate_report(&t, 2, 10, 2, &plan, &rat(100, 1)).unwrap();
        let deep = approximate_report(&t, 3, 10, 2, &plan, &rat(100, 1)).unwrap();
        // prefix = stage count + 1: the whole target is copied
        assert_eq!(deep.extension.stages()[..2], t.stages()[..]);
        assert!(deep.metric.r_hat <= shallow.metric.r_hat);
        assert!(deep.agreement_mass > shallow.agreement_mass);
        assert!(matches!(
            approximate_report(&t, 1, 10, 2, &plan, &rat(100, 1)),
            Err(Error::PrefixOutOfRange { .. })
        ));
    }
}
