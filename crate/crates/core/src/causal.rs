//! Distribution types for a binary treatment `X` and binary outcome `Y`,
//! frequentist estimation from study counts, and the consistency relation
//! that experimental and observational data must satisfy jointly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, INPUT_TOLERANCE};

fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

/// Causal effects `P(y_x)` and `P(y_{x'})` from a randomized experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExperimental")]
pub struct ExperimentalDistribution {
    p_y_x: f64,
    p_y_xp: f64,
}

#[derive(Deserialize)]
struct RawExperimental {
    p_y_x: f64,
    p_y_xp: f64,
}

impl TryFrom<RawExperimental> for ExperimentalDistribution {
    type Error = Error;

    fn try_from(raw: RawExperimental) -> Result<Self> {
        Self::new(raw.p_y_x, raw.p_y_xp)
    }
}

impl ExperimentalDistribution {
    pub fn new(p_y_x: f64, p_y_xp: f64) -> Result<Self> {
        Ok(Self {
            p_y_x: check_probability("P(y_x)", p_y_x)?,
            p_y_xp: check_probability("P(y_x')", p_y_xp)?,
        })
    }

    /// `P(y_x)`
    pub fn p_y_x(&self) -> f64 {
        self.p_y_x
    }

    /// `P(y_{x'})`
    pub fn p_y_xp(&self) -> f64 {
        self.p_y_xp
    }

    /// `P(y'_x) = 1 - P(y_x)`
    pub fn p_yp_x(&self) -> f64 {
        1.0 - self.p_y_x
    }

    /// `P(y'_{x'}) = 1 - P(y_{x'})`
    pub fn p_yp_xp(&self) -> f64 {
        1.0 - self.p_y_xp
    }
}

/// Joint distribution `P(X, Y)` observed when units choose their own
/// treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObservational")]
pub struct ObservationalDistribution {
    p_xy: f64,
    p_xpy: f64,
    p_xyp: f64,
    p_xpyp: f64,
}

#[derive(Deserialize)]
struct RawObservational {
    p_xy: f64,
    p_xpy: f64,
    p_xyp: f64,
    p_xpyp: f64,
}

impl TryFrom<RawObservational> for ObservationalDistribution {
    type Error = Error;

    fn try_from(raw: RawObservational) -> Result<Self> {
        Self::new(raw.p_xy, raw.p_xpy, raw.p_xyp, raw.p_xpyp)
    }
}

impl ObservationalDistribution {
    /// Arguments are `P(x,y)`, `P(x',y)`, `P(x,y')`, `P(x',y')`; they must sum
    /// to one within [`INPUT_TOLERANCE`].
    pub fn new(p_xy: f64, p_xpy: f64, p_xyp: f64, p_xpyp: f64) -> Result<Self> {
        let p_xy = check_probability("P(x,y)", p_xy)?;
        let p_xpy = check_probability("P(x',y)", p_xpy)?;
        let p_xyp = check_probability("P(x,y')", p_xyp)?;
        let p_xpyp = check_probability("P(x',y')", p_xpyp)?;
        let sum = p_xy + p_xpy + p_xyp + p_xpyp;
        if (sum - 1.0).abs() > INPUT_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self {
            p_xy,
            p_xpy,
            p_xyp,
            p_xpyp,
        })
    }

    pub fn p_xy(&self) -> f64 {
        self.p_xy
    }

    pub fn p_xpy(&self) -> f64 {
        self.p_xpy
    }

    pub fn p_xyp(&self) -> f64 {
        self.p_xyp
    }

    pub fn p_xpyp(&self) -> f64 {
        self.p_xpyp
    }

    /// Marginal `P(y) = P(x,y) + P(x',y)`.
    pub fn p_y(&self) -> f64 {
        self.p_xy + self.p_xpy
    }

    /// Marginal `P(y') = 1 - P(y)`.
    pub fn p_yp(&self) -> f64 {
        1.0 - self.p_y()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Experimental,
    Observational,
}

/// Raw 2x2 study counts.
///
/// For an experimental table the "exposed" arm is the group forced to take
/// the treatment; for an observational table it is the group that chose it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable2x2 {
    pub kind: TableKind,
    pub exposed_pos: u64,
    pub exposed_neg: u64,
    pub unexposed_pos: u64,
    pub unexposed_neg: u64,
}

impl CountTable2x2 {
    pub fn experimental(treated_pos: u64, treated_neg: u64, control_pos: u64, control_neg: u64) -> Self {
        Self {
            kind: TableKind::Experimental,
            exposed_pos: treated_pos,
            exposed_neg: treated_neg,
            unexposed_pos: control_pos,
            unexposed_neg: control_neg,
        }
    }

    pub fn observational(chose_pos: u64, chose_neg: u64, declined_pos: u64, declined_neg: u64) -> Self {
        Self {
            kind: TableKind::Observational,
            exposed_pos: chose_pos,
            exposed_neg: chose_neg,
            unexposed_pos: declined_pos,
            unexposed_neg: declined_neg,
        }
    }

    /// Widened so that counts near `u64::MAX` cannot overflow.
    pub fn total(&self) -> u128 {
        [
            self.exposed_pos,
            self.exposed_neg,
            self.unexposed_pos,
            self.unexposed_neg,
        ]
        .iter()
        .map(|&c| c as u128)
        .sum()
    }
}

/// Frequentist `P(y_x)` and `P(y_{x'})` from an experimental table.
pub fn estimate_experimental(table: &CountTable2x2) -> Result<ExperimentalDistribution> {
    if table.kind != TableKind::Experimental {
        return Err(Error::WrongTableKind {
            expected: "experimental",
        });
    }
    let treated = table.exposed_pos as u128 + table.exposed_neg as u128;
    let control = table.unexposed_pos as u128 + table.unexposed_neg as u128;
    if treated == 0 {
        return Err(Error::EmptyArm { arm: "treated" });
    }
    if control == 0 {
        return Err(Error::EmptyArm { arm: "control" });
    }
    ExperimentalDistribution::new(
        table.exposed_pos as f64 / treated as f64,
        table.unexposed_pos as f64 / control as f64,
    )
}

/// Frequentist joint `P(X, Y)` from an observational table.
pub fn estimate_observational(table: &CountTable2x2) -> Result<ObservationalDistribution> {
    if table.kind != TableKind::Observational {
        return Err(Error::WrongTableKind {
            expected: "observational",
        });
    }
    let total = table.total();
    if total == 0 {
        return Err(Error::EmptyTable);
    }
    let n = total as f64;
    let p_xy = table.exposed_pos as f64 / n;
    let p_xyp = table.exposed_neg as f64 / n;
    let p_xpy = table.unexposed_pos as f64 / n;
    let p_xpyp = table.unexposed_neg as f64 / n;
    ObservationalDistribution::new(p_xy, p_xpy, p_xyp, p_xpyp)
}

/// Which data a bound was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    ExperimentalOnly,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInterval {
    pub lower: f64,
    pub upper: f64,
    pub source: BoundSource,
}

impl BoundInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64, tol: f64) -> bool {
        value >= self.lower - tol && value <= self.upper + tol
    }

    /// `self` lies inside `outer` up to `tol`.
    pub fn is_nested_in(&self, outer: &BoundInterval, tol: f64) -> bool {
        self.lower >= outer.lower - tol && self.upper <= outer.upper + tol
    }
}

/// One violated inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub tolerance: f64,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.consistent {
            return write!(f, "consistent");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{} violated ({} > {})", v.constraint, v.lhs, v.rhs)?;
        }
        Ok(())
    }
}

/// Checks `P(x,y) <= P(y_x) <= 1 - P(x,y')` and
/// `P(x',y) <= P(y_{x'}) <= 1 - P(x',y')` at [`INPUT_TOLERANCE`].
pub fn check_consistency(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> ConsistencyReport {
    check_consistency_with_tolerance(e, o, INPUT_TOLERANCE)
}

pub fn check_consistency_with_tolerance(
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
    tolerance: f64,
) -> ConsistencyReport {
    let constraints = [
        ("P(x,y) <= P(y_x)", o.p_xy(), e.p_y_x()),
        ("P(y_x) <= 1 - P(x,y')", e.p_y_x(), 1.0 - o.p_xyp()),
        ("P(x',y) <= P(y_x')", o.p_xpy(), e.p_y_xp()),
        ("P(y_x') <= 1 - P(x',y')", e.p_y_xp(), 1.0 - o.p_xpyp()),
    ];
    let violations: Vec<Violation> = constraints
        .into_iter()
        .filter(|&(_, lhs, rhs)| lhs > rhs + tolerance)
        .map(|(constraint, lhs, rhs)| Violation { constraint, lhs, rhs })
        .collect();
    ConsistencyReport {
        consistent: violations.is_empty(),
        tolerance,
        violations,
    }
}

pub(crate) fn ensure_consistent(
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
    tolerance: f64,
) -> Result<()> {
    let report = check_consistency_with_tolerance(e, o, tolerance);
    if report.consistent {
        Ok(())
    } else {
        Err(Error::InconsistentData { report })
    }
}

/// Data for one population characteristic `c`.
///
/// Every bound and expectation in this crate is computed from a single
/// stratum's distributions, so the conditional-on-`c` versions of the
/// results need nothing beyond passing that stratum's data.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    label: String,
    experimental: ExperimentalDistribution,
    observational: Option<ObservationalDistribution>,
}

impl Stratum {
    pub fn new(
        label: impl Into<String>,
        experimental: ExperimentalDistribution,
        observational: Option<ObservationalDistribution>,
    ) -> Result<Self> {
        Self::with_tolerance(label, experimental, observational, INPUT_TOLERANCE)
    }

    pub fn with_tolerance(
        label: impl Into<String>,
        experimental: ExperimentalDistribution,
        observational: Option<ObservationalDistribution>,
        tolerance: f64,
    ) -> Result<Self> {
        if let Some(o) = &observational {
            ensure_consistent(&experimental, o, tolerance)?;
        }
        Ok(Self {
            label: label.into(),
            experimental,
            observational,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn experimental(&self) -> &ExperimentalDistribution {
        &self.experimental
    }

    pub fn observational(&self) -> Option<&ObservationalDistribution> {
        self.observational.as_ref()
    }

    /// The tightest PNS bounds available for this stratum.
    pub fn pns_bounds(&self) -> Result<BoundInterval> {
        match &self.observational {
            Some(o) => crate::bounds::pns_bounds_combined(&self.experimental, o),
            None => Ok(crate::bounds::pns_bounds_experimental(&self.experimental)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn vaccine_experimental_table() {
        let e = estimate_experimental(&CountTable2x2::experimental(795, 705, 720, 780)).unwrap();
        assert!(close(e.p_y_x(), 0.53));
        assert!(close(e.p_y_xp(), 0.48));
    }

    #[test]
    fn enticement_experimental_table() {
        let e = estimate_experimental(&CountTable2x2::experimental(150, 1350, 1350, 150)).unwrap();
        assert!(close(e.p_y_x(), 0.1));
        assert!(close(e.p_y_xp(), 0.9));
    }

    #[test]
    fn degenerate_arms_are_allowed() {
        let e = estimate_experimental(&CountTable2x2::experimental(0, 10, 10, 0)).unwrap();
        assert_eq!((e.p_y_x(), e.p_y_xp()), (0.0, 1.0));
    }

    #[test]
    fn empty_arm_is_an_error() {
        let err = estimate_experimental(&CountTable2x2::experimental(0, 0, 3, 4)).unwrap_err();
        assert_eq!(err, Error::EmptyArm { arm: "treated" });
        let err = estimate_experimental(&CountTable2x2::experimental(1, 0, 0, 0)).unwrap_err();
        assert_eq!(err, Error::EmptyArm { arm: "control" });
    }

    #[test]
    fn vaccine_observational_table() {
        let o = estimate_observational(&CountTable2x2::observational(210, 450, 90, 750)).unwrap();
        assert!(close(o.p_xy(), 0.14));
        assert!(close(o.p_xpy(), 0.06));
        assert!(close(o.p_xyp(), 0.30));
        assert!(close(o.p_xpyp(), 0.50));
    }

    #[test]
    fn discount_observational_table() {
        let o = estimate_observational(&CountTable2x2::observational(450, 345, 30, 675)).unwrap();
        assert!(close(o.p_xy(), 0.30));
        assert!(close(o.p_xpy(), 0.02));
        assert!(close(o.p_xyp(), 0.23));
        assert!(close(o.p_xpyp(), 0.45));
    }

    #[test]
    fn single_cell_mass() {
        let o = estimate_observational(&CountTable2x2::observational(1, 0, 0, 0)).unwrap();
        assert_eq!((o.p_xy(), o.p_xpy(), o.p_xyp(), o.p_xpyp()), (1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_and_mismatched_tables() {
        assert_eq!(
            estimate_observational(&CountTable2x2::observational(0, 0, 0, 0)),
            Err(Error::EmptyTable)
        );
        assert!(matches!(
            estimate_observational(&CountTable2x2::experimental(1, 1, 1, 1)),
            Err(Error::WrongTableKind { .. })
        ));
        assert!(matches!(
            estimate_experimental(&CountTable2x2::observational(1, 1, 1, 1)),
            Err(Error::WrongTableKind { .. })
        ));
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert!(ExperimentalDistribution::new(1.2, 0.5).is_err());
        assert!(ExperimentalDistribution::new(0.5, f64::NAN).is_err());
        assert!(ObservationalDistribution::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(ObservationalDistribution::new(-0.1, 0.5, 0.5, 0.1).is_err());
    }

    #[test]
    fn vaccine_data_is_consistent() {
        let e = ExperimentalDistribution::new(0.53, 0.48).unwrap();
        let o = ObservationalDistribution::new(0.14, 0.06, 0.30, 0.50).unwrap();
        let report = check_consistency(&e, &o);
        assert!(report.consistent, "{report}");
    }

    #[test]
    fn reports_violation_with_both_sides() {
        let e = ExperimentalDistribution::new(0.53, 0.48).unwrap();
        let o = ObservationalDistribution::new(0.60, 0.06, 0.30, 0.04).unwrap();
        let report = check_consistency(&e, &o);
        assert!(!report.consistent);
        let first = &report.violations[0];
        assert_eq!(first.constraint, "P(x,y) <= P(y_x)");
        assert_eq!((first.lhs, first.rhs), (0.60, 0.53));
        // 0.53 <= 1 - 0.30 holds; 0.48 <= 1 - 0.04 holds.
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn boundary_equalities_pass() {
        let e = ExperimentalDistribution::new(1.0, 0.0).unwrap();
        let o = ObservationalDistribution::new(0.5, 0.0, 0.0, 0.5).unwrap();
        assert!(check_consistency(&e, &o).consistent);
    }

    #[test]
    fn stratum_refuses_inconsistent_pair() {
        let e = ExperimentalDistribution::new(0.53, 0.48).unwrap();
        let o = ObservationalDistribution::new(0.60, 0.06, 0.30, 0.04).unwrap();
        assert!(matches!(
            Stratum::new("c", e, Some(o)),
            Err(Error::InconsistentData { .. })
        ));
        // a looser tolerance lets the user proceed
        assert!(Stratum::with_tolerance("c", e, Some(o), 0.1).is_ok());
    }

    proptest! {
        #[test]
        fn observational_estimate_sums_to_one(
            a in 0u64..100_000, b in 0u64..100_000, c in 0u64..100_000, d in 1u64..100_000
        ) {
            let o = estimate_observational(&CountTable2x2::observational(a, b, c, d)).unwrap();
            let sum = o.p_xy() + o.p_xpy() + o.p_xyp() + o.p_xpyp();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn estimates_are_scale_invariant(
            a in 0u64..10_000, b in 1u64..10_000, c in 0u64..10_000, d in 1u64..10_000, k in 1u64..1000
        ) {
            let e1 = estimate_experimental(&CountTable2x2::experimental(a, b, c, d)).unwrap();
            let e2 = estimate_experimental(&CountTable2x2::experimental(a * k, b * k, c * k, d * k)).unwrap();
            prop_assert_eq!(e1, e2);
            let o1 = estimate_observational(&CountTable2x2::observational(a, b, c, d)).unwrap();
            let o2 = estimate_observational(&CountTable2x2::observational(a * k, b * k, c * k, d * k)).unwrap();
            prop_assert_eq!(o1, o2);
        }
    }
}
