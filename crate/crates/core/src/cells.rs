//! Measurable sets as sparse unions of tower cells, and the engine that pushes
//! them through powers of the transformation.
//!
//! A `Cell` is a run of `span` consecutive levels of one tower, each carrying
//! the same horizontal offset window `[lo, hi)`. Keeping runs instead of
//! single levels is what makes the engine scale: refining one stage multiplies
//! the cell count by the cut count `r_k` only, never by tower heights, so
//! deep towers with astronomically many levels stay cheap to manipulate.
//!
//! `image_measure` is the central primitive. It shifts a set `A` by `m`
//! levels inside tower `J` and splits the mass of `A` into a part whose image
//! is known exactly (the shifted level stays inside the tower) and a part
//! that would exit through the top or bottom, whose image is unresolved at
//! stage `J`. The true value of `mu(S^m A` &cap; `B)` always lies within
//! `unresolved_bound` of the resolved value, and deepening `J` only shrinks
//! that bound.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::arith::{rat_int, serde_rat, Int, Rat};
use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::intervals::IntervalSet;

/// A run of `span` consecutive levels `[level, level + span)` of one tower,
/// restricted to the horizontal window `[lo, hi)`.
///
/// Invariants (relative to the owning set's stage `J`): `span >= 1`,
/// `0 <= level` and `level + span <= h_J`, `0 <= lo < hi <= w_J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub level: Int,
    pub span: Int,
    pub lo: Rat,
    pub hi: Rat,
}

impl Cell {
    fn measure(&self) -> Rat {
        rat_int(&self.span) * (&self.hi - &self.lo)
    }

    fn level_end(&self) -> Int {
        &self.level + &self.span
    }
}

/// A finite disjoint union of cells, all addressed at the same stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    stage: u32,
    cells: Vec<Cell>,
}

impl CellSet {
    pub fn empty(stage: u32) -> Self {
        CellSet {
            stage,
            cells: Vec::new(),
        }
    }

    /// Builds a set from raw cells, merging adjacent runs and checking the
    /// disjointness invariant. Panics if the cells overlap; every public
    /// constructor in this crate produces disjoint cells.
    pub fn from_cells(stage: u32, cells: Vec<Cell>) -> Self {
        let mut cells: Vec<Cell> = cells
            .into_iter()
            .filter(|c| !c.span.is_zero() && c.lo < c.hi)
            .collect();

        // vertical merge: equal offset windows, touching level runs
        cells.sort_by(|a, b| (&a.lo, &a.hi, &a.level).cmp(&(&b.lo, &b.hi, &b.level)));
        let mut merged: Vec<Cell> = Vec::with_capacity(cells.len());
        for c in cells {
            match merged.last_mut() {
                Some(p) if p.lo == c.lo && p.hi == c.hi && p.level_end() == c.level => {
                    p.span += &c.span;
                }
                _ => merged.push(c),
            }
        }

        // horizontal merge: identical level runs, touching offset windows
        merged.sort_by(|a, b| (&a.level, &a.span, &a.lo).cmp(&(&b.level, &b.span, &b.lo)));
        let mut out: Vec<Cell> = Vec::with_capacity(merged.len());
        for c in merged {
            match out.last_mut() {
                Some(p) if p.level == c.level && p.span == c.span && p.hi == c.lo => {
                    p.hi = c.hi;
                }
                _ => out.push(c),
            }
        }

        out.sort_by(|a, b| (&a.level, &a.lo).cmp(&(&b.level, &b.lo)));
        let set = CellSet { stage, cells: out };
        set.assert_disjoint();
        set
    }

    /// The whole of tower `j` as a single run.
    pub fn tower(c: &Construction, j: u32) -> Result<Self> {
        if j == 0 || j > c.max_stage() {
            return Err(Error::StageOutOfRange {
                stage: j,
                max: c.max_stage(),
            });
        }
        Ok(CellSet {
            stage: j,
            cells: vec![Cell {
                level: Int::zero(),
                span: c.height(j).clone(),
                lo: Rat::zero(),
                hi: c.width(j).clone(),
            }],
        })
    }

    /// Column `col` of stage `j` (the `col`-th copy of tower `j`, spacers
    /// excluded), addressed at stage `j + 1`.
    pub fn column(c: &Construction, j: u32, col: u32) -> Result<Self> {
        let params = c.stage_params(j)?;
        if col == 0 || col as usize > params.cuts() {
            return Err(Error::ColumnOutOfRange {
                stage: j,
                column: col,
                max: params.cuts() as u32,
            });
        }
        let starts = c.column_positions(j)?;
        Ok(CellSet {
            stage: j + 1,
            cells: vec![Cell {
                level: starts[(col - 1) as usize].clone(),
                span: c.height(j).clone(),
                lo: Rat::zero(),
                hi: c.width(j + 1).clone(),
            }],
        })
    }

    /// A single level of tower `j`.
    pub fn level(c: &Construction, j: u32, level: &Int) -> Result<Self> {
        c.level_interval(j, level)?;
        Ok(CellSet {
            stage: j,
            cells: vec![Cell {
                level: level.clone(),
                span: Int::from(1),
                lo: Rat::zero(),
                hi: c.width(j).clone(),
            }],
        })
    }

    /// Addresses a union of half-line intervals as stage-`stage` cells.
    /// Mass outside the realized space, or native to deeper towers than
    /// `stage`, cannot be addressed and is returned as the second component.
    pub fn from_intervals(c: &Construction, set: &IntervalSet, stage: u32) -> Result<(Self, Rat)> {
        if stage == 0 || stage > c.max_stage() {
            return Err(Error::StageOutOfRange {
                stage,
                max: c.max_stage(),
            });
        }
        let total = c.total_measure();
        let w = c.width(stage);
        let mut unaddressed = Rat::zero();
        let mut cells = Vec::new();
        for (a, b) in set.spans() {
            if a.is_negative() {
                let zero = Rat::zero();
                let clipped_hi = b.min(&zero);
                unaddressed += clipped_hi - a;
            }
            let mut x = a.max(&Rat::zero()).clone();
            if b > total {
                unaddressed += b - total.max(&x);
            }
            let b = b.min(total);
            while &x < b {
                let coord = c.locate_point(&x)?;
                if coord.stage > stage {
                    // native cell lies beyond the target stage; skip it whole
                    let native_w = c.width(coord.stage);
                    let cell_end = &x - &coord.offset + native_w;
                    let chunk_end = (&cell_end).min(b).clone();
                    unaddressed += &chunk_end - &x;
                    x = chunk_end;
                } else {
                    let coord = c.promote(&coord, stage)?;
                    let cell_end = &x - &coord.offset + w;
                    let chunk_end = (&cell_end).min(b).clone();
                    cells.push(Cell {
                        level: coord.level,
                        span: Int::from(1),
                        lo: coord.offset.clone(),
                        hi: &coord.offset + (&chunk_end - &x),
                    });
                    x = chunk_end;
                }
            }
        }
        Ok((CellSet::from_cells(stage, cells), unaddressed))
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn measure(&self) -> Rat {
        self.cells
            .iter()
            .fold(Rat::zero(), |acc, c| acc + c.measure())
    }

    /// Re-addresses the set at a deeper stage. Each refinement step maps a run
    /// to at most `r_k` runs, one per column whose horizontal slot meets the
    /// offset window.
    pub fn refine_to(&self, c: &Construction, target: u32) -> Result<Self> {
        if target < self.stage || target > c.max_stage() {
            return Err(Error::StageOutOfRange {
                stage: target,
                max: c.max_stage(),
            });
        }
        let mut cur = self.clone();
        while cur.stage < target {
            let j = cur.stage;
            let starts = c.column_positions(j)?;
            let w_next = c.width(j + 1);
            let mut next = Vec::with_capacity(cur.cells.len() * starts.len());
            for cell in &cur.cells {
                for (c0, start) in starts.iter().enumerate() {
                    let slot_lo = w_next * rat_int(&Int::from(c0));
                    let slot_hi = &slot_lo + w_next;
                    let lo = (&cell.lo).max(&slot_lo).clone();
                    let hi = (&cell.hi).min(&slot_hi).clone();
                    if lo < hi {
                        next.push(Cell {
                            level: start + &cell.level,
                            span: cell.span.clone(),
                            lo: lo - &slot_lo,
                            hi: hi - slot_lo,
                        });
                    }
                }
            }
            cur = CellSet::from_cells(j + 1, next);
        }
        Ok(cur)
    }

    /// Shifts every level by `m` inside the current tower, clipping runs at
    /// the floor and ceiling. Returns the surviving cells and the clipped
    /// mass, whose image is not resolved at this stage.
    pub fn shift_clip(&self, c: &Construction, m: &Int) -> (Self, Rat) {
        let h = c.height(self.stage);
        let mut out = Vec::with_capacity(self.cells.len());
        let mut dropped = Rat::zero();
        for cell in &self.cells {
            let new_lo = (&cell.level + m).max(Int::zero());
            let new_hi = (cell.level_end() + m).min(h.clone());
            let kept = (&new_hi - &new_lo).max(Int::zero());
            let lost = &cell.span - &kept;
            if !lost.is_zero() {
                dropped += rat_int(&lost) * (&cell.hi - &cell.lo);
            }
            if !kept.is_zero() {
                out.push(Cell {
                    level: new_lo,
                    span: kept,
                    lo: cell.lo.clone(),
                    hi: cell.hi.clone(),
                });
            }
        }
        (
            CellSet {
                stage: self.stage,
                cells: out,
            },
            dropped,
        )
    }

    /// Measure of the intersection with another same-stage set.
    ///
    /// Both cell lists are level-sorted, so the scan start into `other`
    /// only ever moves forward: near-linear on level-disjoint sets.
    pub fn intersect_measure(&self, other: &CellSet) -> Rat {
        assert_eq!(self.stage, other.stage, "cell sets at different stages");
        let mut acc = Rat::zero();
        let mut start = 0usize;
        for a in &self.cells {
            let a_end = a.level_end();
            while start < other.cells.len() && other.cells[start].level_end() <= a.level {
                start += 1;
            }
            for b in &other.cells[start..] {
                if b.level >= a_end {
                    break;
                }
                if b.level_end() <= a.level {
                    continue;
                }
                let lo = (&a.lo).max(&b.lo);
                let hi = (&a.hi).min(&b.hi);
                if lo < hi {
                    let overlap =
                        a_end.clone().min(b.level_end()) - a.level.clone().max(b.level.clone());
                    acc += rat_int(&overlap) * (hi - lo);
                }
            }
        }
        acc
    }

    /// Intersection with another same-stage set.
    pub fn intersect(&self, other: &CellSet) -> CellSet {
        assert_eq!(self.stage, other.stage, "cell sets at different stages");
        let mut out = Vec::new();
        let mut start = 0usize;
        for a in &self.cells {
            let a_end = a.level_end();
            while start < other.cells.len() && other.cells[start].level_end() <= a.level {
                start += 1;
            }
            for b in &other.cells[start..] {
                if b.level >= a_end {
                    break;
                }
                if b.level_end() <= a.level {
                    continue;
                }
                let lo = (&a.lo).max(&b.lo);
                let hi = (&a.hi).min(&b.hi);
                if lo < hi {
                    let level = a.level.clone().max(b.level.clone());
                    let span = a_end.clone().min(b.level_end()) - &level;
                    out.push(Cell {
                        level,
                        span,
                        lo: lo.clone(),
                        hi: hi.clone(),
                    });
                }
            }
        }
        CellSet::from_cells(self.stage, out)
    }

    /// Realizes the set as half-line intervals. Cost is proportional to the
    /// total level span, so this is for sets with few levels, not towers.
    pub fn realize(&self, c: &Construction) -> Result<IntervalSet> {
        let mut spans = Vec::new();
        for cell in &self.cells {
            let mut k = Int::zero();
            while k < cell.span {
                let level = &cell.level + &k;
                let (a, _) = c.level_interval(self.stage, &level)?;
                spans.push((&a + &cell.lo, a + &cell.hi));
                k += 1u32;
            }
        }
        Ok(IntervalSet::from_spans(spans))
    }

    /// Verifies pairwise disjointness by a level sweep. Panics on violation:
    /// overlapping cells mean a broken constructor, not bad input.
    fn assert_disjoint(&self) {
        #[derive(PartialEq, Eq, PartialOrd, Ord)]
        enum Kind {
            Close,
            Open,
        }
        let ends: Vec<Int> = self.cells.iter().map(|c| c.level_end()).collect();
        let mut events: Vec<(&Int, Kind, usize)> = Vec::with_capacity(self.cells.len() * 2);
        for (i, c) in self.cells.iter().enumerate() {
            events.push((&c.level, Kind::Open, i));
            events.push((&ends[i], Kind::Close, i));
        }
        events.sort();
        let mut active: BTreeMap<Rat, Rat> = BTreeMap::new();
        for (_, kind, i) in events {
            let cell = &self.cells[i];
            match kind {
                Kind::Open => {
                    let clash = active
                        .range(..&cell.lo)
                        .next_back()
                        .is_some_and(|(_, hi)| hi > &cell.lo)
                        || active
                            .range(&cell.lo..)
                            .next()
                            .is_some_and(|(lo, _)| lo < &cell.hi);
                    assert!(
                        !clash,
                        "cell set invariant violated: overlapping cells at stage {}",
                        self.stage
                    );
                    active.insert(cell.lo.clone(), cell.hi.clone());
                }
                Kind::Close => {
                    active.remove(&cell.lo);
                }
            }
        }
    }
}

/// Two-sided enclosure of `mu(S^m A` &cap; `B)` computed at `resolution_stage`:
/// the true value lies in `[resolved, resolved + unresolved_bound]`, and the
/// mass of `A` splits exactly into resolved plus unresolved parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasureEstimate {
    #[serde(with = "serde_rat")]
    pub resolved: Rat,
    #[serde(with = "serde_rat")]
    pub unresolved_bound: Rat,
    pub resolution_stage: u32,
}

impl MeasureEstimate {
    pub fn bounds(&self) -> (Rat, Rat) {
        (
            self.resolved.clone(),
            &self.resolved + &self.unresolved_bound,
        )
    }
}

/// Enclosure of `mu(S^m A` &cap; `B)` at the given resolution stage.
pub fn image_measure(
    c: &Construction,
    m: &Int,
    a: &CellSet,
    b: &CellSet,
    resolution: u32,
) -> Result<MeasureEstimate> {
    let a = a.refine_to(c, resolution)?;
    let b = b.refine_to(c, resolution)?;
    let (shifted, dropped) = a.shift_clip(c, m);
    Ok(MeasureEstimate {
        resolved: shifted.intersect_measure(&b),
        unresolved_bound: dropped,
        resolution_stage: resolution,
    })
}

/// The image set itself at the given resolution, with the unresolved mass.
pub fn image_set(
    c: &Construction,
    m: &Int,
    a: &CellSet,
    resolution: u32,
) -> Result<(CellSet, Rat)> {
    let a = a.refine_to(c, resolution)?;
    Ok(a.shift_clip(c, m))
}

/// Runs `image_measure` for each power, raising the resolution from the sets'
/// native stage until the unresolved bound meets `tol`. Fails with
/// `ResolutionExhausted` if even the deepest defined stage cannot meet it.
pub fn decay_sweep(
    c: &Construction,
    a: &CellSet,
    b: &CellSet,
    powers: &[Int],
    tol: &Rat,
) -> Result<Vec<(Int, MeasureEstimate)>> {
    let base = a.stage().max(b.stage());
    let mut out = Vec::with_capacity(powers.len());
    for m in powers {
        let mut chosen = None;
        for j in base..=c.max_stage() {
            let est = image_measure(c, m, a, b, j)?;
            if &est.unresolved_bound <= tol {
                chosen = Some(est);
                break;
            }
            if j == c.max_stage() {
                return Err(Error::ResolutionExhausted {
                    tol: tol.clone(),
                    best: est.unresolved_bound,
                });
            }
        }
        out.push((m.clone(), chosen.unwrap()));
    }
    Ok(out)
}
