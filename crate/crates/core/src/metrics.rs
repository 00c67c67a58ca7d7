//! Reference-set family and truncated transformation metrics.
//!
//! Two constructions realized on the same half-line are compared through a
//! fixed family of dyadic intervals `{A_i}`. The coarse distance sums
//! weighted symmetric differences of images and preimages, the weak distance
//! sums weighted differences of intersection measures at one power, and the
//! combined distance adds the supremum of the weak distance over powers.
//!
//! The supremum is not computable exactly; it is sampled over a
//! deterministic plan (exhaustive prefix plus both constructions' overlap
//! windows, where tower self-intersections spike). All values are exact
//! rationals for the resolved mass, with per-term error bounds covering
//! unresolved and unaddressed mass, so a reported combined value is a
//! certified lower bound up to those stated bounds.

use std::collections::BTreeMap;

use num_integer::Roots;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::arith::{serde_int, serde_rat, Int, Rat};
use crate::cells::{image_set, CellSet};
use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::intervals::IntervalSet;
use crate::sidon::{overlap_windows, window_samples, SamplePlan};

/// The `n`-th reference interval: decode `z = n - 1` into a diagonal pair
/// `(d, k)` and take the dyadic interval `[k * 2^(1-d), (k+1) * 2^(1-d))`.
/// Every finite union of dyadic intervals is approximated by members of
/// this family, and each member has measure `2^(1-d) <= 2`.
pub fn reference_set(n: u64) -> (Rat, Rat) {
    assert!(n >= 1, "reference sets are indexed from 1");
    let z = (n - 1) as u128;
    let w = ((8 * z + 1).sqrt() - 1) / 2;
    let t = w * (w + 1) / 2;
    let k = z - t;
    let d = (w - k) as u32;
    let scale = Rat::new(Int::from(2), Int::from(1) << d);
    let lo = Rat::from(Int::from(k)) * &scale;
    let hi = Rat::from(Int::from(k + 1)) * &scale;
    (lo, hi)
}

/// Materialized prefix `A_1..A_K` of the reference family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReferenceFamily {
    pub truncation: u32,
    #[serde(with = "crate::arith::serde_rat_pairs")]
    pub intervals: Vec<(Rat, Rat)>,
}

impl ReferenceFamily {
    pub fn prefix(k: u32) -> Self {
        ReferenceFamily {
            truncation: k,
            intervals: (1..=k as u64).map(reference_set).collect(),
        }
    }
}

/// Truncated coarse distance with its two error components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RhoEstimate {
    pub truncation: u32,
    #[serde(with = "serde_rat")]
    pub value: Rat,
    /// Unresolved plus unaddressed mass that could shift the true value.
    #[serde(with = "serde_rat")]
    pub error_bound: Rat,
    /// Bound on the discarded tail `i > K`: each term is at most
    /// `2^-i * 4 * mu(A_i) <= 2^(3-i)`.
    #[serde(with = "serde_rat")]
    pub tail_bound: Rat,
}

/// Truncated weak distance at one power, with its error bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DwEstimate {
    pub truncation: u32,
    #[serde(with = "serde_int")]
    pub power: Int,
    #[serde(with = "serde_rat")]
    pub value: Rat,
    #[serde(with = "serde_rat")]
    pub error_bound: Rat,
}

/// One sampled power of the weak distance inside a combined-distance report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DwSample {
    #[serde(with = "serde_int")]
    pub power: Int,
    #[serde(with = "serde_rat")]
    pub value: Rat,
    #[serde(with = "serde_rat")]
    pub error_bound: Rat,
    /// Where the power came from: the exhaustive prefix, a window of one of
    /// the constructions, or an explicit caller list.
    pub provenance: String,
}

/// Truncated combined distance: coarse part plus the sampled supremum of
/// the weak part.
///
/// Invariants: `r_hat = rho_hat + dw_sup_hat`, every component nonnegative,
/// and `r_hat` is a lower bound of the truncated-family distance up to
/// `rho_error` (the supremum is sampled, never overestimated).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricReport {
    pub truncation: u32,
    #[serde(with = "serde_rat")]
    pub rho_hat: Rat,
    #[serde(with = "serde_rat")]
    pub rho_error: Rat,
    #[serde(with = "serde_rat")]
    pub rho_tail_bound: Rat,
    #[serde(with = "serde_rat")]
    pub dw_sup_hat: Rat,
    #[serde(with = "serde_rat")]
    pub dw_sup_error: Rat,
    #[serde(with = "serde_rat")]
    pub r_hat: Rat,
    pub sup_is_sampled: bool,
    pub sup_witness: Option<String>,
    pub sup_witness_provenance: Option<String>,
    pub samples: Vec<DwSample>,
}

/// A reference set addressed in one construction's deepest tower.
struct AddressedSet {
    cells: CellSet,
    unaddressed: Rat,
}

fn address_family(c: &Construction, k: u32) -> Result<Vec<AddressedSet>> {
    let depth = c.max_stage();
    (1..=k as u64)
        .map(|n| {
            let (a, b) = reference_set(n);
            let (cells, unaddressed) =
                CellSet::from_intervals(c, &IntervalSet::interval(a, b), depth)?;
            Ok(AddressedSet { cells, unaddressed })
        })
        .collect()
}

fn pow2_inv(i: u32) -> Rat {
    Rat::new(Int::from(1), Int::from(1) << i)
}

fn rho_core(
    cs: &Construction,
    ct: &Construction,
    fs: &[AddressedSet],
    ft: &[AddressedSet],
) -> Result<(Rat, Rat)> {
    let js = cs.max_stage();
    let jt = ct.max_stage();
    let mut value = Rat::zero();
    let mut error = Rat::zero();
    for (idx, (a_s, a_t)) in fs.iter().zip(ft).enumerate() {
        let weight = pow2_inv(idx as u32 + 1);
        let mut term = Rat::zero();
        let mut term_err = Rat::zero();
        for dir in [1i64, -1] {
            let m = Int::from(dir);
            let (img_s, u_s) = image_set(cs, &m, &a_s.cells, js)?;
            let (img_t, u_t) = image_set(ct, &m, &a_t.cells, jt)?;
            let delta = img_s.realize(cs)?.sym_diff(&img_t.realize(ct)?).measure();
            term += delta;
            term_err += u_s + u_t + &a_s.unaddressed + &a_t.unaddressed;
        }
        value += &weight * term;
        error += weight * term_err;
    }
    Ok((value, error))
}

fn rho_tail_bound(k: u32) -> Rat {
    Rat::new(Int::from(8), Int::from(1) << k)
}

/// Truncated coarse distance over `A_1..A_K`, both constructions resolved
/// at their own deepest stage. Errors out when the combined unresolved and
/// unaddressed mass exceeds `tol`.
pub fn rho_truncated(
    cs: &Construction,
    ct: &Construction,
    k: u32,
    tol: &Rat,
) -> Result<RhoEstimate> {
    let fs = address_family(cs, k)?;
    let ft = address_family(ct, k)?;
    let (value, error) = rho_core(cs, ct, &fs, &ft)?;
    if &error > tol {
        return Err(Error::ResolutionExhausted {
            tol: tol.clone(),
            best: error,
        });
    }
    Ok(RhoEstimate {
        truncation: k,
        value,
        error_bound: error,
        tail_bound: rho_tail_bound(k),
    })
}

fn dw_core(
    cs: &Construction,
    ct: &Construction,
    fs: &[AddressedSet],
    ft: &[AddressedSet],
    n: &Int,
) -> Result<(Rat, Rat)> {
    let js = cs.max_stage();
    let jt = ct.max_stage();
    let mut imgs_s = Vec::with_capacity(fs.len());
    for a in fs {
        imgs_s.push(image_set(cs, n, &a.cells, js)?);
    }
    let mut imgs_t = Vec::with_capacity(ft.len());
    for a in ft {
        imgs_t.push(image_set(ct, n, &a.cells, jt)?);
    }
    let mut value = Rat::zero();
    let mut error = Rat::zero();
    for i in 0..fs.len() {
        let w_i = pow2_inv(i as u32 + 1);
        let line_err = &imgs_s[i].1 + &fs[i].unaddressed + &imgs_t[i].1 + &ft[i].unaddressed;
        for j in 0..fs.len() {
            let weight = &w_i * pow2_inv(j as u32 + 1);
            let v_s = imgs_s[i].0.intersect_measure(&fs[j].cells);
            let v_t = imgs_t[i].0.intersect_measure(&ft[j].cells);
            value += &weight * (v_s - v_t).abs();
            error += weight * &line_err;
        }
    }
    Ok((value, error))
}

/// Truncated weak distance between the `n`-th powers over `A_1..A_K`.
pub fn dw_power(
    cs: &Construction,
    ct: &Construction,
    n: &Int,
    k: u32,
    tol: &Rat,
) -> Result<DwEstimate> {
    let fs = address_family(cs, k)?;
    let ft = address_family(ct, k)?;
    let (value, error) = dw_core(cs, ct, &fs, &ft, n)?;
    if &error > tol {
        return Err(Error::ResolutionExhausted {
            tol: tol.clone(),
            best: error,
        });
    }
    Ok(DwEstimate {
        truncation: k,
        power: n.clone(),
        value,
        error_bound: error,
    })
}

/// Expands a sample plan into powers tagged with their provenance; the
/// exhaustive prefix wins ties, then the first construction's windows.
fn planned_powers(
    plan: &SamplePlan,
    cs: &Construction,
    ct: &Construction,
) -> Result<Vec<(Int, String)>> {
    let mut map: BTreeMap<Int, String> = (1..=plan.exhaustive)
        .map(|n| (Int::from(n), "exhaustive".to_string()))
        .collect();
    for (tag, c) in [("left", cs), ("right", ct)] {
        let bound = plan.window_stage_bound.min(c.stage_count());
        for j in 1..=bound {
            for w in overlap_windows(c, j)? {
                for m in window_samples(&w, plan.per_window) {
                    map.entry(m)
                        .or_insert_with(|| format!("window stage {j} of {tag}"));
                }
            }
        }
    }
    Ok(map.into_iter().collect())
}

fn r_over_powers(
    cs: &Construction,
    ct: &Construction,
    k: u32,
    powers: &[(Int, String)],
    tol: &Rat,
) -> Result<MetricReport> {
    let fs = address_family(cs, k)?;
    let ft = address_family(ct, k)?;
    let (rho_hat, rho_error) = rho_core(cs, ct, &fs, &ft)?;
    if &rho_error > tol {
        return Err(Error::ResolutionExhausted {
            tol: tol.clone(),
            best: rho_error,
        });
    }
    let mut samples = Vec::with_capacity(powers.len());
    let mut best: Option<usize> = None;
    for (n, provenance) in powers {
        let (value, error) = dw_core(cs, ct, &fs, &ft, n)?;
        if &error > tol {
            return Err(Error::ResolutionExhausted {
                tol: tol.clone(),
                best: error,
            });
        }
        samples.push(DwSample {
            power: n.clone(),
            value,
            error_bound: error,
            provenance: provenance.clone(),
        });
        let better = match best {
            None => true,
            Some(b) => samples.last().unwrap().value > samples[b].value,
        };
        if better {
            best = Some(samples.len() - 1);
        }
    }
    let (dw_sup_hat, dw_sup_error, witness, witness_prov) = match best {
        Some(b) => (
            samples[b].value.clone(),
            samples[b].error_bound.clone(),
            Some(samples[b].power.to_string()),
            Some(samples[b].provenance.clone()),
        ),
        None => (Rat::zero(), Rat::zero(), None, None),
    };
    let r_hat = &rho_hat + &dw_sup_hat;
    Ok(MetricReport {
        truncation: k,
        rho_hat,
        rho_error,
        rho_tail_bound: rho_tail_bound(k),
        dw_sup_hat,
        dw_sup_error,
        r_hat,
        sup_is_sampled: true,
        sup_witness: witness,
        sup_witness_provenance: witness_prov,
        samples,
    })
}

/// Truncated combined distance with the supremum sampled from `plan`:
/// the exhaustive prefix plus both constructions' overlap windows.
pub fn r_truncated(
    cs: &Construction,
    ct: &Construction,
    k: u32,
    plan: &SamplePlan,
    tol: &Rat,
) -> Result<MetricReport> {
    let powers = planned_powers(plan, cs, ct)?;
    r_over_powers(cs, ct, k, &powers, tol)
}

/// Same as [`r_truncated`] but over an explicit power list, which makes
/// reports comparable across pairs (the plan expansion depends on the pair).
pub fn r_truncated_with_powers(
    cs: &Construction,
    ct: &Construction,
    k: u32,
    powers: &[Int],
    tol: &Rat,
) -> Result<MetricReport> {
    let mut tagged: Vec<(Int, String)> = powers
        .iter()
        .map(|n| (n.clone(), "explicit".to_string()))
        .collect();
    tagged.sort_by(|a, b| a.0.cmp(&b.0));
    tagged.dedup_by(|a, b| a.0 == b.0);
    r_over_powers(cs, ct, k, &tagged, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};
    use crate::construction::StageParams;

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

    fn c0_swapped() -> Construction {
        Construction::new(
            int(2),
            vec![
                StageParams::from_i64(&[2, 1]),
                StageParams::from_i64(&[20, 60]),
            ],
        )
        .unwrap()
    }

    fn third() -> Construction {
        Construction::new(
            int(2),
            vec![
                StageParams::from_i64(&[3, 1]),
                StageParams::from_i64(&[20, 60]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn reference_family_decodes_diagonally() {
        assert_eq!(reference_set(1), (rat(0, 1), rat(2, 1)));
        assert_eq!(reference_set(2), (rat(0, 1), rat(1, 1)));
        assert_eq!(reference_set(3), (rat(2, 1), rat(4, 1)));
        assert_eq!(reference_set(4), (rat(0, 1), rat(1, 2)));
        assert_eq!(reference_set(5), (rat(1, 1), rat(2, 1)));
        assert_eq!(reference_set(6), (rat(4, 1), rat(6, 1)));
        for n in 1..200u64 {
            let (a, b) = reference_set(n);
            assert!(a >= rat(0, 1) && a < b && b - a <= rat(2, 1));
        }
        let fam = ReferenceFamily::prefix(3);
        assert_eq!(fam.intervals.len(), 3);
        assert_eq!(fam.intervals[2], (rat(2, 1), rat(4, 1)));
    }

    #[test]
    fn identical_constructions_are_at_distance_zero() {
        let c = c0();
        let tol = rat(10, 1);
        let rho = rho_truncated(&c, &c, 3, &tol).unwrap();
        assert_eq!(rho.value, rat(0, 1));
        assert_eq!(rho.tail_bound, rat(1, 1));
        let dw = dw_power(&c, &c, &int(4), 3, &tol).unwrap();
        assert_eq!(dw.value, rat(0, 1));
        let r = r_truncated(&c, &c, 3, &SamplePlan::new(5, 1), &tol).unwrap();
        assert_eq!(r.r_hat, rat(0, 1));
        assert_eq!(r.rho_hat, rat(0, 1));
        assert_eq!(r.dw_sup_hat, rat(0, 1));
    }

    #[test]
    fn coarse_distance_separates_swapped_spacers() {
        let tol = rat(10, 1);
        let ab = rho_truncated(&c0(), &c0_swapped(), 2, &tol).unwrap();
        let ba = rho_truncated(&c0_swapped(), &c0(), 2, &tol).unwrap();
        assert_eq!(ab.value, ba.value);
        assert!(ab.value > rat(0, 1));
    }

    #[test]
    fn truncation_is_monotone_in_k() {
        let tol = rat(10, 1);
        let mut last = rat(0, 1);
        for k in 1..=4 {
            let e = rho_truncated(&c0(), &c0_swapped(), k, &tol).unwrap();
            assert!(e.value >= last);
            last = e.value;
        }
        let d2 = dw_power(&c0(), &c0_swapped(), &int(3), 2, &tol).unwrap();
        let d4 = dw_power(&c0(), &c0_swapped(), &int(3), 4, &tol).unwrap();
        assert!(d4.value >= d2.value);
    }

    #[test]
    fn pseudometric_axioms_on_a_triple() {
        let tol = rat(10, 1);
        let (a, b, c) = (c0(), c0_swapped(), third());
        let k = 3;

        let rho = |x: &Construction, y: &Construction| rho_truncated(x, y, k, &tol).unwrap().value;
        assert_eq!(rho(&a, &b), rho(&b, &a));
        assert!(rho(&a, &c) <= rho(&a, &b) + rho(&b, &c));
        assert!(rho(&a, &b) <= rho(&a, &c) + rho(&c, &b));

        let n = int(3);
        let dw = |x: &Construction, y: &Construction| dw_power(x, y, &n, k, &tol).unwrap().value;
        assert_eq!(dw(&a, &b), dw(&b, &a));
        assert!(dw(&a, &c) <= dw(&a, &b) + dw(&b, &c));
        assert!(dw(&a, &b) < rat(1, 1));

        let powers: Vec<Int> = (1..=3).map(Int::from).collect();
        let r = |x: &Construction, y: &Construction| {
            r_truncated_with_powers(x, y, k, &powers, &tol)
                .unwrap()
                .r_hat
        };
        let (rab, rbc, rac) = (r(&a, &b), r(&b, &c), r(&a, &c));
        assert_eq!(rab, r(&b, &a));
        assert!(rac <= &rab + &rbc);
        assert!(rab >= rat(0, 1) && rbc >= rat(0, 1) && rac >= rat(0, 1));
    }

    #[test]
    fn report_tracks_the_maximizing_power() {
        let tol = rat(10, 1);
        let r = r_truncated(&c0(), &c0_swapped(), 2, &SamplePlan::new(4, 2), &tol).unwrap();
        assert!(r.sup_is_sampled);
        let witness = r.sup_witness.clone().unwrap();
        let witness_sample = r
            .samples
            .iter()
            .find(|s| s.power.to_string() == witness)
            .unwrap();
        assert_eq!(witness_sample.value, r.dw_sup_hat);
        // the witness is the first maximizer in power order
        assert!(r
            .samples
            .iter()
            .take_while(|s| s.power != witness_sample.power)
            .all(|s| s.value < r.dw_sup_hat));
        assert_eq!(r.r_hat, &r.rho_hat + &r.dw_sup_hat);
        assert!(r.samples.iter().all(|s| s.value <= r.dw_sup_hat));
        // plan powers cover both constructions' windows plus the prefix
        assert!(r.samples.iter().any(|s| s.provenance == "exhaustive"));
        assert!(r
            .samples
            .iter()
            .any(|s| s.provenance.starts_with("window stage")));
    }

    #[test]
    fn zero_tolerance_rejects_unresolved_mass() {
        // the inverse image of the base level is unresolved at every depth
        let err = rho_truncated(&c0(), &c0_swapped(), 2, &rat(0, 1));
        assert!(matches!(err, Err(Error::ResolutionExhausted { .. })));
    }
}
