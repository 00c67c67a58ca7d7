//! Cutting-and-stacking towers over the half-line.
//!
//! A construction is an initial column of `h1` unit-width levels together with
//! a finite list of stages. Stage `j` cuts tower `j` into `r_j` equal-width
//! columns, tops column `i` with `s_j(i)` spacer levels of fresh mass, and
//! stacks the columns left to right into tower `j+1`. The transformation `S`
//! moves every point one level up inside the current tower; what happens above
//! the top of the deepest defined tower is left unresolved rather than guessed.
//!
//! Realization on the half-line is canonical: level `i` of tower 1 is `[i, i+1)`
//! and every spacer level added at stage `j` is appended at the running
//! supremum of the space, ordered by (column, position within the spacer
//! block). Tower `j` therefore realizes exactly to `[0, mu(X_j))`.

use num_traits::{Signed, Zero};

use crate::arith::{rat_div_floor, rat_int, Int, Rat};
use crate::error::{Error, Result};

/// Parameters of one stage: the spacer counts per column. The cut count is
/// the length of the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageParams {
    pub spacers: Vec<Int>,
}

impl StageParams {
    pub fn new(spacers: Vec<Int>) -> Self {
        StageParams { spacers }
    }

    pub fn from_i64(spacers: &[i64]) -> Self {
        StageParams {
            spacers: spacers.iter().map(|&s| Int::from(s)).collect(),
        }
    }

    pub fn cuts(&self) -> usize {
        self.spacers.len()
    }

    pub fn spacer_sum(&self) -> Int {
        self.spacers.iter().sum()
    }
}

/// A point of the space in tower coordinates: level `level` of tower `stage`,
/// horizontal offset `offset` from the left edge of that level.
///
/// Invariants: `0 <= level < h_stage` and `0 <= offset < w_stage`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerCoord {
    pub stage: u32,
    pub level: Int,
    pub offset: Rat,
}

impl TowerCoord {
    pub fn new(stage: u32, level: Int, offset: Rat) -> Self {
        TowerCoord {
            stage,
            level,
            offset,
        }
    }
}

/// A validated construction with all per-stage derived data precomputed.
///
/// Stage indices are 1-based throughout the public interface: stages run
/// `1..=stage_count()` and towers run `1..=max_stage()` where
/// `max_stage() = stage_count() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Construction {
    base_height: Int,
    stages: Vec<StageParams>,
    heights: Vec<Int>,            // heights[j-1] = h_j
    widths: Vec<Rat>,             // widths[j-1] = w_j
    tower_measures: Vec<Rat>,     // tower_measures[j-1] = mu(X_j)
    column_starts: Vec<Vec<Int>>, // column_starts[j-1][c-1] = p_j(c)
    spacer_prefix: Vec<Vec<Int>>, // spacer_prefix[j-1][c] = sum of s_j(1..=c)
}

/// Serializes as the defining parameters only: base height plus the spacer
/// lists, all as decimal strings.
impl serde::Serialize for Construction {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let stages: Vec<Vec<String>> = self
            .stages
            .iter()
            .map(|p| p.spacers.iter().map(|s| s.to_string()).collect())
            .collect();
        let mut st = ser.serialize_struct("Construction", 2)?;
        st.serialize_field("base_height", &self.base_height.to_string())?;
        st.serialize_field("stages", &stages)?;
        st.end()
    }
}

impl Construction {
    /// Validates parameters and precomputes heights, widths, measures, column
    /// positions and spacer prefix sums.
    pub fn new(base_height: Int, stages: Vec<StageParams>) -> Result<Self> {
        if base_height < Int::from(1) {
            return Err(Error::NonPositiveHeight);
        }
        if stages.is_empty() {
            return Err(Error::EmptyStageList);
        }
        for (k, st) in stages.iter().enumerate() {
            let stage = (k + 1) as u32;
            if st.cuts() < 2 {
                return Err(Error::CutCountTooSmall {
                    stage,
                    cuts: st.cuts(),
                });
            }
            for (i, s) in st.spacers.iter().enumerate() {
                if s.is_negative() {
                    return Err(Error::NegativeSpacer {
                        stage,
                        index: i + 1,
                    });
                }
            }
        }

        let mut heights = vec![base_height.clone()];
        let mut widths = vec![Rat::from_integer(Int::from(1))];
        let mut tower_measures = vec![rat_int(&base_height)];
        let mut column_starts = Vec::with_capacity(stages.len());
        let mut spacer_prefix = Vec::with_capacity(stages.len());

        for st in &stages {
            let r = Int::from(st.cuts());
            let h = heights.last().unwrap().clone();
            let w = widths.last().unwrap().clone();
            let mu = tower_measures.last().unwrap().clone();

            let mut starts = Vec::with_capacity(st.cuts());
            let mut prefix = Vec::with_capacity(st.cuts() + 1);
            starts.push(Int::zero());
            prefix.push(Int::zero());
            for (c, s) in st.spacers.iter().enumerate() {
                prefix.push(prefix[c].clone() + s);
                if c + 1 < st.cuts() {
                    starts.push(starts[c].clone() + &h + s);
                }
            }
            let spacer_sum = prefix.last().unwrap().clone();

            let next_h = &h * &r + &spacer_sum;
            let next_w = &w / rat_int(&r);
            let next_mu = &mu + &next_w * rat_int(&spacer_sum);
            debug_assert_eq!(next_mu, rat_int(&next_h) * &next_w);

            heights.push(next_h);
            widths.push(next_w);
            tower_measures.push(next_mu);
            column_starts.push(starts);
            spacer_prefix.push(prefix);
        }

        Ok(Construction {
            base_height,
            stages,
            heights,
            widths,
            tower_measures,
            column_starts,
            spacer_prefix,
        })
    }

    pub fn base_height(&self) -> &Int {
        &self.base_height
    }

    /// Number of defined stages.
    pub fn stage_count(&self) -> u32 {
        self.stages.len() as u32
    }

    /// Index of the deepest defined tower, `stage_count() + 1`.
    pub fn max_stage(&self) -> u32 {
        self.stages.len() as u32 + 1
    }

    pub fn stages(&self) -> &[StageParams] {
        &self.stages
    }

    pub fn stage_params(&self, j: u32) -> Result<&StageParams> {
        self.check_stage_index(j)?;
        Ok(&self.stages[(j - 1) as usize])
    }

    fn check_stage_index(&self, j: u32) -> Result<()> {
        if j == 0 || j > self.stage_count() {
            return Err(Error::StageOutOfRange {
                stage: j,
                max: self.stage_count(),
            });
        }
        Ok(())
    }

    fn check_tower_index(&self, j: u32) -> Result<()> {
        if j == 0 || j > self.max_stage() {
            return Err(Error::StageOutOfRange {
                stage: j,
                max: self.max_stage(),
            });
        }
        Ok(())
    }

    /// Height `h_j` of tower `j`, for `j` in `1..=max_stage()`.
    pub fn height(&self, j: u32) -> &Int {
        &self.heights[(j - 1) as usize]
    }

    /// Level width `w_j` of tower `j`.
    pub fn width(&self, j: u32) -> &Rat {
        &self.widths[(j - 1) as usize]
    }

    /// Measure `mu(X_j) = h_j * w_j` of tower `j`.
    pub fn tower_measure(&self, j: u32) -> &Rat {
        &self.tower_measures[(j - 1) as usize]
    }

    /// Measure of the deepest tower, i.e. of the whole realized space.
    pub fn total_measure(&self) -> &Rat {
        self.tower_measures.last().unwrap()
    }

    /// Base positions `p_j(c)` of the stage-`j` columns inside tower `j+1`,
    /// indexed by `c - 1`.
    pub fn column_positions(&self, j: u32) -> Result<&[Int]> {
        self.check_stage_index(j)?;
        Ok(&self.column_starts[(j - 1) as usize])
    }

    /// Prefix sums of the stage-`j` spacers: entry `c` is `s_j(1) + .. + s_j(c)`.
    pub fn spacer_prefix(&self, j: u32) -> Result<&[Int]> {
        self.check_stage_index(j)?;
        Ok(&self.spacer_prefix[(j - 1) as usize])
    }

    pub fn check_coord(&self, coord: &TowerCoord) -> Result<()> {
        self.check_tower_index(coord.stage)?;
        let h = self.height(coord.stage);
        if coord.level.is_negative() || &coord.level >= h {
            return Err(Error::LevelOutOfRange {
                stage: coord.stage,
                level: coord.level.clone(),
                height: h.clone(),
            });
        }
        let w = self.width(coord.stage);
        if coord.offset.is_negative() || &coord.offset >= w {
            return Err(Error::OffsetOutOfRange {
                stage: coord.stage,
                offset: coord.offset.clone(),
                width: w.clone(),
            });
        }
        Ok(())
    }

    /// Half-open realization `[a, a + w_j)` of level `i` of tower `j`.
    ///
    /// Recursive in the stage: a tower-level either refines a level of the
    /// previous tower (shifted into the column's horizontal slot) or is a
    /// spacer level appended at the supremum reached when its stage was built.
    pub fn level_interval(&self, j: u32, level: &Int) -> Result<(Rat, Rat)> {
        self.check_tower_index(j)?;
        if level.is_negative() || level >= self.height(j) {
            return Err(Error::LevelOutOfRange {
                stage: j,
                level: level.clone(),
                height: self.height(j).clone(),
            });
        }
        let start = self.level_start(j, level);
        let end = &start + self.width(j);
        Ok((start, end))
    }

    fn level_start(&self, j: u32, level: &Int) -> Rat {
        if j == 1 {
            return rat_int(level);
        }
        let t = (j - 2) as usize; // transition that built tower j
        let starts = &self.column_starts[t];
        let c0 = starts.partition_point(|p| p <= level) - 1;
        let rel = level - &starts[c0];
        let h_prev = &self.heights[t];
        let w_j = &self.widths[t + 1];
        if &rel < h_prev {
            let inner = self.level_start(j - 1, &rel);
            inner + w_j * rat_int(&Int::from(c0))
        } else {
            let k = rel - h_prev;
            let offset_units = &self.spacer_prefix[t][c0] + k;
            &self.tower_measures[t] + w_j * rat_int(&offset_units)
        }
    }

    /// Tower coordinates of the half-line point `x`, at the native stage: the
    /// first tower whose realization contains `x`.
    pub fn locate_point(&self, x: &Rat) -> Result<TowerCoord> {
        if x.is_negative() || x >= self.total_measure() {
            return Err(Error::PointOutsideSpace {
                point: x.clone(),
                total: self.total_measure().clone(),
            });
        }
        if x < &self.tower_measures[0] {
            let level = rat_div_floor(x, &self.widths[0]);
            let offset = x - rat_int(&level);
            return Ok(TowerCoord::new(1, level, offset));
        }
        // x lies in the spacer block appended by some stage k; that block is
        // [mu(X_k), mu(X_{k+1})) and is tiled by width-w_{k+1} cells ordered
        // (column, position in block).
        let k = (1..=self.stage_count() as usize)
            .find(|&k| x < &self.tower_measures[k])
            .unwrap();
        let w = &self.widths[k];
        let rel = x - &self.tower_measures[k - 1];
        let q = rat_div_floor(&rel, w);
        let prefix = &self.spacer_prefix[k - 1];
        let c0 = prefix.partition_point(|v| v <= &q) - 1;
        let in_block = &q - &prefix[c0];
        let level = &self.column_starts[k - 1][c0] + &self.heights[k - 1] + in_block;
        let offset = rel - rat_int(&q) * w;
        Ok(TowerCoord::new(k as u32 + 1, level, offset))
    }

    /// Half-line point realized by a tower coordinate.
    pub fn realize_coord(&self, coord: &TowerCoord) -> Result<Rat> {
        self.check_coord(coord)?;
        Ok(self.level_start(coord.stage, &coord.level) + &coord.offset)
    }

    fn promote_one(&self, coord: &TowerCoord) -> TowerCoord {
        let t = (coord.stage - 1) as usize; // transition stage index (1-based == coord.stage)
        let w_next = &self.widths[t + 1];
        let c0 = rat_div_floor(&coord.offset, w_next);
        let c0_usize = usize::try_from(&c0).unwrap();
        let level = &self.column_starts[t][c0_usize] + &coord.level;
        let offset = &coord.offset - rat_int(&c0) * w_next;
        TowerCoord::new(coord.stage + 1, level, offset)
    }

    /// Rewrites a coordinate at a deeper stage. The point is unchanged; only
    /// the addressing refines.
    pub fn promote(&self, coord: &TowerCoord, target_stage: u32) -> Result<TowerCoord> {
        self.check_coord(coord)?;
        if target_stage < coord.stage || target_stage > self.max_stage() {
            return Err(Error::StageOutOfRange {
                stage: target_stage,
                max: self.max_stage(),
            });
        }
        let mut cur = coord.clone();
        while cur.stage < target_stage {
            cur = self.promote_one(&cur);
        }
        Ok(cur)
    }

    /// Applies `S^m` to a point: shifts the level by `m`, promoting to deeper
    /// towers while the target level falls outside the current one. Fails with
    /// `UnresolvedAtCap` if the orbit segment is still unresolved at
    /// `stage_cap`; the result, when it exists, is exact.
    pub fn apply_power(&self, coord: &TowerCoord, m: &Int, stage_cap: u32) -> Result<TowerCoord> {
        self.check_coord(coord)?;
        if stage_cap < coord.stage || stage_cap > self.max_stage() {
            return Err(Error::StageOutOfRange {
                stage: stage_cap,
                max: self.max_stage(),
            });
        }
        let mut cur = coord.clone();
        loop {
            let target = &cur.level + m;
            if !target.is_negative() && &target < self.height(cur.stage) {
                return Ok(TowerCoord::new(cur.stage, target, cur.offset));
            }
            if cur.stage == stage_cap {
                return Err(Error::UnresolvedAtCap { cap: stage_cap });
            }
            cur = self.promote_one(&cur);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{int, rat};

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
    fn recurrences_on_reference_construction() {
        let c = c0();
        assert_eq!(c.stage_count(), 2);
        assert_eq!(c.max_stage(), 3);
        assert_eq!(c.height(1), &int(2));
        assert_eq!(c.height(2), &int(7));
        assert_eq!(c.height(3), &int(94));
        assert_eq!(c.width(1), &rat(1, 1));
        assert_eq!(c.width(2), &rat(1, 2));
        assert_eq!(c.width(3), &rat(1, 4));
        assert_eq!(c.tower_measure(1), &rat(2, 1));
        assert_eq!(c.tower_measure(2), &rat(7, 2));
        assert_eq!(c.tower_measure(3), &rat(47, 2));
        assert_eq!(c.column_positions(1).unwrap(), &[int(0), int(3)]);
        assert_eq!(c.column_positions(2).unwrap(), &[int(0), int(27)]);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert_eq!(
            Construction::new(int(0), vec![StageParams::from_i64(&[1, 2])]),
            Err(Error::NonPositiveHeight)
        );
        assert_eq!(
            Construction::new(int(1), vec![]),
            Err(Error::EmptyStageList)
        );
        assert_eq!(
            Construction::new(int(1), vec![StageParams::from_i64(&[5])]),
            Err(Error::CutCountTooSmall { stage: 1, cuts: 1 })
        );
        assert_eq!(
            Construction::new(
                int(1),
                vec![
                    StageParams::from_i64(&[1, 2]),
                    StageParams::from_i64(&[3, -1])
                ]
            ),
            Err(Error::NegativeSpacer { stage: 2, index: 2 })
        );
    }

    #[test]
    fn zero_spacers_are_allowed() {
        let c = Construction::new(int(3), vec![StageParams::from_i64(&[0, 0, 0])]).unwrap();
        assert_eq!(c.height(2), &int(9));
        assert_eq!(c.tower_measure(2), &rat(3, 1));
    }

    #[test]
    fn level_intervals_match_canonical_realization() {
        let c = c0();
        assert_eq!(
            c.level_interval(1, &int(0)).unwrap(),
            (rat(0, 1), rat(1, 1))
        );
        assert_eq!(
            c.level_interval(2, &int(2)).unwrap(),
            (rat(2, 1), rat(5, 2))
        );
        assert_eq!(
            c.level_interval(2, &int(4)).unwrap(),
            (rat(3, 2), rat(2, 1))
        );
        // first spacer level of stage-2 column 1 sits at the old supremum
        assert_eq!(
            c.level_interval(3, &int(7)).unwrap(),
            (rat(7, 2), rat(15, 4))
        );
        // column 2's spacer block starts after column 1's 20 spacers
        assert_eq!(
            c.level_interval(3, &int(34)).unwrap(),
            (rat(17, 2), rat(35, 4))
        );
        assert!(c.level_interval(2, &int(7)).is_err());
        assert!(c.level_interval(4, &int(0)).is_err());
    }

    #[test]
    fn tower_levels_tile_the_realized_prefix() {
        let c = c0();
        for j in 1..=3u32 {
            let h = usize::try_from(c.height(j)).unwrap();
            let mut pieces: Vec<(Rat, Rat)> = (0..h)
                .map(|i| c.level_interval(j, &Int::from(i)).unwrap())
                .collect();
            pieces.sort_by(|a, b| a.0.cmp(&b.0));
            assert_eq!(pieces[0].0, rat(0, 1));
            for w in pieces.windows(2) {
                assert_eq!(w[0].1, w[1].0, "gap or overlap at stage {j}");
            }
            assert_eq!(&pieces.last().unwrap().1, c.tower_measure(j));
        }
    }

    #[test]
    fn promotion_refines_addresses() {
        let c = c0();
        let coord = TowerCoord::new(1, int(1), rat(7, 10));
        let up = c.promote(&coord, 2).unwrap();
        assert_eq!(up, TowerCoord::new(2, int(4), rat(1, 5)));
        // realization is unchanged by promotion
        assert_eq!(c.realize_coord(&coord).unwrap(), rat(17, 10));
        assert_eq!(c.realize_coord(&up).unwrap(), rat(17, 10));
        let up2 = c.promote(&coord, 3).unwrap();
        assert_eq!(c.realize_coord(&up2).unwrap(), rat(17, 10));
        assert_eq!(up2.stage, 3);
    }

    #[test]
    fn powers_resolve_or_report_the_cap() {
        let c = c0();
        let coord = TowerCoord::new(1, int(1), rat(1, 5));
        assert_eq!(
            c.apply_power(&coord, &int(1), 3).unwrap(),
            TowerCoord::new(2, int(2), rat(1, 5))
        );
        assert_eq!(
            c.apply_power(&coord, &int(1), 1),
            Err(Error::UnresolvedAtCap { cap: 1 })
        );
        // m = 0 resolves at the native stage
        assert_eq!(c.apply_power(&coord, &int(0), 1).unwrap(), coord);
        // descending below the floor promotes as well
        let low = TowerCoord::new(1, int(0), rat(7, 10));
        let back = c.apply_power(&low, &int(-1), 3).unwrap();
        assert_eq!(back, TowerCoord::new(2, int(2), rat(1, 5)));
        assert_eq!(
            c.apply_power(&back, &int(1), 3).unwrap(),
            c.promote(&low, 2).unwrap()
        );
        // the true base corner never resolves downward within defined stages
        let corner = TowerCoord::new(1, int(0), rat(1, 5));
        assert_eq!(
            c.apply_power(&corner, &int(-1), 3),
            Err(Error::UnresolvedAtCap { cap: 3 })
        );
    }

    #[test]
    fn point_location_inverts_realization() {
        let c = c0();
        let x = rat(23, 10);
        let coord = c.locate_point(&x).unwrap();
        assert_eq!(coord, TowerCoord::new(2, int(2), rat(3, 10)));
        assert_eq!(c.realize_coord(&coord).unwrap(), x);
        assert!(c.locate_point(&rat(-1, 2)).is_err());
        assert!(c.locate_point(&rat(47, 2)).is_err());
        // a point inside the stage-2 spacer block natively addresses tower 3
        let deep = c.locate_point(&rat(4, 1)).unwrap();
        assert_eq!(deep.stage, 3);
        assert_eq!(c.realize_coord(&deep).unwrap(), rat(4, 1));
    }
}
