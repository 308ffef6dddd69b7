//! Expected tightening of the PNS bounds from an observational study.
//!
//! Before the study, `D = P(y)` (for the lower bound) and
//! `D' = P(x,y) + P(x',y')` (for the upper bound) are unknown; each is taken
//! to be uniform on the interval the experimental data allow. The gains
//! `L' - L` and `U - U'` are then random variables with a point mass at zero
//! and a flat density up to `z_max`. This module gives their closed-form
//! means and the piecewise CDF/density they come from.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::pns_point_identification;
use crate::causal::ExperimentalDistribution;
use crate::{Error, Result, INPUT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `D = P(y)`
    PY,
    /// `D' = P(x,y) + P(x',y')`
    PXyPlusXpyp,
}

/// Range of an observational quantity that is compatible with the
/// experimental data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub quantity: Quantity,
}

impl FeasibleInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lo - tol && value <= self.hi + tol
    }
}

/// `[max(0, P(y_x) - P(y'_x')), min(1, P(y_x) + P(y_x'))]`, the range of `P(y)`.
pub fn feasible_interval_d(e: &ExperimentalDistribution) -> FeasibleInterval {
    FeasibleInterval {
        lo: (e.p_y_x() - e.p_yp_xp()).max(0.0),
        hi: (e.p_y_x() + e.p_y_xp()).min(1.0),
        quantity: Quantity::PY,
    }
}

/// `[max(0, P(y_x) - P(y_x')), min(1, P(y_x) + P(y'_x'))]`, the range of
/// `P(x,y) + P(x',y')`.
pub fn feasible_interval_d_prime(e: &ExperimentalDistribution) -> FeasibleInterval {
    FeasibleInterval {
        lo: (e.p_y_x() - e.p_y_xp()).max(0.0),
        hi: (e.p_y_x() + e.p_yp_xp()).min(1.0),
        quantity: Quantity::PXyPlusXpyp,
    }
}

fn is_zero(s: f64) -> bool {
    s.abs() <= INPUT_TOLERANCE
}

fn point_identified(e: &ExperimentalDistribution) -> Error {
    // Every failed precondition below is one of the point-identification sums.
    Error::PointIdentified {
        value: pns_point_identification(e).unwrap_or(0.0),
    }
}

fn min_square(e: &ExperimentalDistribution) -> f64 {
    let sq = |v: f64| v * v;
    sq(e.p_y_x())
        .min(sq(e.p_yp_x()))
        .min(sq(e.p_y_xp()))
        .min(sq(e.p_yp_xp()))
}

/// `E(L' - L)` when `P(y)` is uniform on [`feasible_interval_d`].
///
/// Fails with [`Error::PointIdentified`] when `P(y_x) + P(y_x') = 0` or
/// `P(y'_x) + P(y'_x') = 0`.
pub fn expected_lower_gain(e: &ExperimentalDistribution) -> Result<f64> {
    let a = e.p_y_x() + e.p_y_xp();
    let b = e.p_yp_x() + e.p_yp_xp();
    if is_zero(a) || is_zero(b) {
        return Err(point_identified(e));
    }
    Ok(min_square(e) / a.min(b))
}

/// `E(U - U')` when `P(x,y) + P(x',y')` is uniform on
/// [`feasible_interval_d_prime`].
///
/// Fails with [`Error::PointIdentified`] when `P(y_x) + P(y'_x') = 0` or
/// `P(y'_x) + P(y_x') = 0`.
pub fn expected_upper_drop(e: &ExperimentalDistribution) -> Result<f64> {
    let a = e.p_y_x() + e.p_yp_xp();
    let b = e.p_yp_x() + e.p_y_xp();
    if is_zero(a) || is_zero(b) {
        return Err(point_identified(e));
    }
    Ok(min_square(e) / a.min(b))
}

/// Which of the four sign/sum configurations the gain distribution falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GapCase {
    /// first >= second, first + second >= 1
    One,
    /// first >= second, first + second < 1
    Two,
    /// first < second, first + second >= 1
    Three,
    /// first < second, first + second < 1
    Four,
}

/// Law of `L' - L` (or `U - U'`): an atom of mass `offset / denominator` at
/// zero, density `2 / denominator` on `[0, z_max)`, and nothing beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapDistribution {
    pub case: GapCase,
    pub offset: f64,
    pub denominator: f64,
    pub z_max: f64,
}

impl GapDistribution {
    /// `first` is `P(y_x)`; `second` is `P(y_x')` for the lower-bound gain
    /// and `P(y'_x')` for the upper-bound drop. Complements are passed in
    /// rather than recomputed so that no `1 - (1 - q)` rounding creeps in.
    fn new(first: f64, first_c: f64, second: f64, second_c: f64) -> Self {
        let ge = first >= second;
        let upper_half = first + second >= 1.0;
        let offset = if ge { first - second } else { second - first };
        let denominator = if upper_half { first_c + second_c } else { first + second };
        let (case, z_max) = match (ge, upper_half) {
            (true, true) => (GapCase::One, first_c),
            (true, false) => (GapCase::Two, second),
            (false, true) => (GapCase::Three, second_c),
            (false, false) => (GapCase::Four, first),
        };
        Self {
            case,
            offset,
            denominator,
            z_max,
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            0.0
        } else if z >= self.z_max {
            1.0
        } else {
            ((self.offset + 2.0 * z) / self.denominator).min(1.0)
        }
    }

    /// Density of the continuous part.
    pub fn density(&self, z: f64) -> f64 {
        if (0.0..self.z_max).contains(&z) {
            2.0 / self.denominator
        } else {
            0.0
        }
    }

    /// Probability that the observational study does not move the bound.
    pub fn atom_at_zero(&self) -> f64 {
        self.cdf(0.0)
    }

    /// `integral of 2z / denominator over [0, z_max]`.
    pub fn mean(&self) -> f64 {
        self.z_max * self.z_max / self.denominator
    }
}

pub fn lower_gain_distribution(e: &ExperimentalDistribution) -> Result<GapDistribution> {
    if is_zero(e.p_y_x() + e.p_y_xp()) || is_zero(e.p_yp_x() + e.p_yp_xp()) {
        return Err(point_identified(e));
    }
    Ok(GapDistribution::new(e.p_y_x(), e.p_yp_x(), e.p_y_xp(), e.p_yp_xp()))
}

pub fn upper_drop_distribution(e: &ExperimentalDistribution) -> Result<GapDistribution> {
    if is_zero(e.p_y_x() + e.p_yp_xp()) || is_zero(e.p_yp_x() + e.p_y_xp()) {
        return Err(point_identified(e));
    }
    Ok(GapDistribution::new(e.p_y_x(), e.p_yp_x(), e.p_yp_xp(), e.p_y_xp()))
}

/// `P(L' - L <= z)`. Total on the reals: 0 below zero, 1 from `z_max` on.
pub fn lower_gain_cdf(e: &ExperimentalDistribution, z: f64) -> Result<f64> {
    Ok(lower_gain_distribution(e)?.cdf(z))
}

/// `P(U - U' <= z)`.
pub fn upper_drop_cdf(e: &ExperimentalDistribution, z: f64) -> Result<f64> {
    Ok(upper_drop_distribution(e)?.cdf(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImprovementReport {
    pub e_lower_gain: f64,
    pub e_upper_drop: f64,
    pub d_interval: FeasibleInterval,
    pub d_prime_interval: FeasibleInterval,
}

pub fn improvement_report(e: &ExperimentalDistribution) -> Result<ImprovementReport> {
    Ok(ImprovementReport {
        e_lower_gain: expected_lower_gain(e)?,
        e_upper_drop: expected_upper_drop(e)?,
        d_interval: feasible_interval_d(e),
        d_prime_interval: feasible_interval_d_prime(e),
    })
}

/// One grid cell; `None` marks a point-identified cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub p_y_x: f64,
    pub p_y_xp: f64,
    pub e_lower_gain: Option<f64>,
    pub e_upper_drop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub resolution: usize,
    pub closed: bool,
    /// Row-major: one row per `P(y_x')` value, `P(y_x)` varying within a row.
    pub records: Vec<SweepRecord>,
}

impl SweepGrid {
    pub fn coordinate(resolution: usize, closed: bool, i: usize) -> f64 {
        if closed {
            i as f64 / (resolution - 1) as f64
        } else {
            (i + 1) as f64 / (resolution + 1) as f64
        }
    }

    /// Records sharing `P(y_x') = coordinate(row)`.
    pub fn row(&self, row: usize) -> &[SweepRecord] {
        &self.records[row * self.resolution..(row + 1) * self.resolution]
    }
}

/// Evaluates both expectations on a `resolution x resolution` grid.
///
/// The open grid uses `i / (resolution + 1)` for `i = 1..=resolution`; the
/// closed grid includes 0 and 1.
pub fn sweep_grid(resolution: usize, closed: bool) -> Result<SweepGrid> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "sweep resolution must be at least 2, got {resolution}"
        )));
    }
    let records = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|row| {
            let q = SweepGrid::coordinate(resolution, closed, row);
            (0..resolution).map(move |col| {
                let p = SweepGrid::coordinate(resolution, closed, col);
                let e = ExperimentalDistribution::new(p, q).expect("grid points lie in [0, 1]");
                SweepRecord {
                    p_y_x: p,
                    p_y_xp: q,
                    e_lower_gain: expected_lower_gain(&e).ok(),
                    e_upper_drop: expected_upper_drop(&e).ok(),
                }
            })
        })
        .collect();
    Ok(SweepGrid {
        resolution,
        closed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp(p: f64, q: f64) -> ExperimentalDistribution {
        ExperimentalDistribution::new(p, q).unwrap()
    }

    #[test]
    fn feasible_intervals() {
        let d = feasible_interval_d(&exp(0.53, 0.48));
        assert!((d.lo - 0.01).abs() < 1e-12 && d.hi == 1.0);
        let d = feasible_interval_d(&exp(0.10, 0.90));
        assert!(d.lo.abs() < 1e-12 && d.hi == 1.0);
        let d = feasible_interval_d(&exp(0.55, 0.40));
        assert!(d.lo == 0.0 && (d.hi - 0.95).abs() < 1e-12);

        let d = feasible_interval_d_prime(&exp(0.53, 0.48));
        assert!((d.lo - 0.05).abs() < 1e-12 && d.hi == 1.0);
        let d = feasible_interval_d_prime(&exp(0.5, 0.5));
        assert!(d.lo == 0.0 && d.hi == 1.0);
        let d = feasible_interval_d_prime(&exp(0.55, 0.40));
        assert!((d.lo - 0.15).abs() < 1e-12 && d.hi == 1.0);
    }

    #[test]
    fn reported_expectations() {
        assert!((expected_lower_gain(&exp(0.53, 0.48)).unwrap() - 0.2231).abs() < 5e-5);
        assert!((expected_upper_drop(&exp(0.53, 0.48)).unwrap() - 0.2325).abs() < 5e-5);
        assert!((expected_lower_gain(&exp(0.10, 0.90)).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(expected_lower_gain(&exp(0.5, 0.5)).unwrap(), 0.25);
        assert_eq!(expected_upper_drop(&exp(0.5, 0.5)).unwrap(), 0.25);
        assert!((expected_upper_drop(&exp(0.55, 0.40)).unwrap() - 0.16 / 0.85).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_are_point_identified() {
        assert_eq!(
            expected_lower_gain(&exp(0.0, 0.0)),
            Err(Error::PointIdentified { value: 0.0 })
        );
        assert_eq!(
            expected_lower_gain(&exp(1.0, 1.0)),
            Err(Error::PointIdentified { value: 0.0 })
        );
        assert_eq!(
            expected_upper_drop(&exp(1.0, 0.0)),
            Err(Error::PointIdentified { value: 1.0 })
        );
        assert_eq!(
            expected_upper_drop(&exp(0.0, 1.0)),
            Err(Error::PointIdentified { value: 0.0 })
        );
        // (1, 0) meets the lower-gain preconditions; only the upper drop degenerates.
        assert!(expected_lower_gain(&exp(1.0, 0.0)).is_ok());
        assert!(lower_gain_cdf(&exp(0.0, 0.0), 0.1).is_err());
    }

    #[test]
    fn cdf_examples() {
        let e = exp(0.53, 0.48);
        assert!((lower_gain_cdf(&e, 0.2).unwrap() - 0.45 / 0.99).abs() < 1e-12);
        assert_eq!(lower_gain_cdf(&e, -0.1).unwrap(), 0.0);
        assert_eq!(lower_gain_cdf(&e, 0.47).unwrap(), 1.0);
        assert!((upper_drop_cdf(&e, 0.2).unwrap() - 0.41 / 0.95).abs() < 1e-12);
        assert_eq!(upper_drop_cdf(&e, 0.47).unwrap(), 1.0);
        assert_eq!(upper_drop_cdf(&exp(0.5, 0.5), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn case_selection() {
        let case = |p, q| lower_gain_distribution(&exp(p, q)).unwrap().case;
        assert_eq!(case(0.7, 0.6), GapCase::One);
        assert_eq!(case(0.4, 0.2), GapCase::Two);
        assert_eq!(case(0.6, 0.7), GapCase::Three);
        assert_eq!(case(0.2, 0.4), GapCase::Four);
        let case = |p, q| upper_drop_distribution(&exp(p, q)).unwrap().case;
        assert_eq!(case(0.7, 0.4), GapCase::One);
        assert_eq!(case(0.4, 0.8), GapCase::Two);
        assert_eq!(case(0.6, 0.3), GapCase::Three);
        assert_eq!(case(0.2, 0.6), GapCase::Four);
    }

    #[test]
    fn boundary_dispatch_is_value_neutral() {
        // p == q sits on the Case 1/3 and Case 2/4 seams; p + q == 1 on 1/2 and 3/4.
        for &(p, q) in &[(0.3, 0.3), (0.7, 0.7), (0.5, 0.5), (0.25, 0.75), (0.75, 0.25)] {
            let d = lower_gain_distribution(&exp(p, q)).unwrap();
            let swapped = GapDistribution::new(q, 1.0 - q, p, 1.0 - p);
            for k in 0..=50 {
                let z = k as f64 * 0.02;
                assert!((d.cdf(z) - swapped.cdf(z)).abs() < 1e-12, "p={p} q={q} z={z}");
            }
            assert!((d.mean() - expected_lower_gain(&exp(p, q)).unwrap()).abs() < 1e-15);
        }
        // straddling a seam by 1e-9 moves the CDF continuously
        let a = lower_gain_distribution(&exp(0.4, 0.4)).unwrap();
        let b = lower_gain_distribution(&exp(0.4, 0.4 + 1e-9)).unwrap();
        assert_ne!(a.case, b.case);
        assert!((a.cdf(0.1) - b.cdf(0.1)).abs() < 1e-8);
    }

    #[test]
    fn atom_and_density() {
        let d = lower_gain_distribution(&exp(0.53, 0.48)).unwrap();
        assert!((d.atom_at_zero() - 0.05 / 0.99).abs() < 1e-12);
        assert!((d.density(0.1) - 2.0 / 0.99).abs() < 1e-12);
        assert_eq!(d.density(0.5), 0.0);
        assert_eq!(d.density(-0.1), 0.0);
    }

    #[test]
    fn sweep_small() {
        let g = sweep_grid(2, false).unwrap();
        assert_eq!(g.records.len(), 4);
        assert!((g.records[1].p_y_x - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.records[1].p_y_xp - 1.0 / 3.0).abs() < 1e-15);
        let g = sweep_grid(3, true).unwrap();
        assert_eq!(g.records[0].e_lower_gain, None); // (0, 0)
        assert!(g.records[4].e_lower_gain.is_some()); // (0.5, 0.5)
        assert!(sweep_grid(1, false).is_err());
    }

    fn interior() -> impl Strategy<Value = (f64, f64)> {
        (0.001f64..0.999, 0.001f64..0.999)
    }

    proptest! {
        #[test]
        fn swap_symmetry((p, q) in interior()) {
            prop_assert_eq!(expected_lower_gain(&exp(p, q)).unwrap(), expected_lower_gain(&exp(q, p)).unwrap());
            prop_assert_eq!(expected_upper_drop(&exp(p, q)).unwrap(), expected_upper_drop(&exp(q, p)).unwrap());
        }

        #[test]
        fn complement_duality((p, q) in interior()) {
            let u = expected_upper_drop(&exp(p, q)).unwrap();
            let l = expected_lower_gain(&exp(p, 1.0 - q)).unwrap();
            prop_assert!((u - l).abs() <= 1e-15);
        }

        #[test]
        fn expectations_within_quarter((p, q) in interior()) {
            for v in [expected_lower_gain(&exp(p, q)).unwrap(), expected_upper_drop(&exp(p, q)).unwrap()] {
                prop_assert!((0.0..=0.25).contains(&v));
            }
        }

        #[test]
        fn cdf_is_monotone((p, q) in interior(), z1 in -0.2f64..1.2, z2 in -0.2f64..1.2) {
            let (lo, hi) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
            for d in [lower_gain_distribution(&exp(p, q)).unwrap(), upper_drop_distribution(&exp(p, q)).unwrap()] {
                prop_assert!(d.cdf(lo) <= d.cdf(hi));
                prop_assert!((0.0..=1.0).contains(&d.cdf(lo)));
                prop_assert_eq!(d.cdf(d.z_max), 1.0);
            }
        }

        #[test]
        fn case_mean_matches_closed_form((p, q) in interior()) {
            let e = exp(p, q);
            prop_assert!((lower_gain_distribution(&e).unwrap().mean() - expected_lower_gain(&e).unwrap()).abs() < 1e-14);
            prop_assert!((upper_drop_distribution(&e).unwrap().mean() - expected_upper_drop(&e).unwrap()).abs() < 1e-14);
        }

        #[test]
        fn zero_atom_is_offset_over_denominator((p, q) in interior()) {
            let d = lower_gain_distribution(&exp(p, q)).unwrap();
            prop_assert!((d.atom_at_zero() - (p - q).abs() / d.denominator).abs() < 1e-12);
        }
    }
}
