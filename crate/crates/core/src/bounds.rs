//! Sharp bounds on PNS, PN and PS.
//!
//! PNS is bounded from experimental data alone or, more tightly, from
//! experimental and observational data together. PN and PS condition on an
//! observed cell, so they always need the observational joint.

use crate::causal::{
    ensure_consistent, BoundInterval, BoundSource, ConsistencyReport, ExperimentalDistribution,
    ObservationalDistribution, Violation,
};
use crate::{Error, Result, IDENTITY_TOLERANCE, INPUT_TOLERANCE};

fn max_of(terms: &[f64]) -> f64 {
    terms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(terms: &[f64]) -> f64 {
    terms.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Clamps to [0, 1] and absorbs a crossing of at most [`IDENTITY_TOLERANCE`].
fn finish(name: &'static str, lower: f64, upper: f64, source: BoundSource, tolerance: f64) -> Result<BoundInterval> {
    let lower = lower.clamp(0.0, 1.0);
    let mut upper = upper.clamp(0.0, 1.0);
    if lower > upper {
        if lower - upper < IDENTITY_TOLERANCE {
            upper = lower;
        } else {
            return Err(Error::InconsistentData {
                report: ConsistencyReport {
                    consistent: false,
                    tolerance,
                    violations: vec![Violation {
                        constraint: name,
                        lhs: lower,
                        rhs: upper,
                    }],
                },
            });
        }
    }
    Ok(BoundInterval { lower, upper, source })
}

/// PNS bounds from `P(y_x)` and `P(y_{x'})` only:
/// `max{0, P(y_x) - P(y_x')} <= PNS <= min{P(y_x), P(y'_x')}`.
pub fn pns_bounds_experimental(e: &ExperimentalDistribution) -> BoundInterval {
    // Rounding is monotone, so lower <= upper survives floating point.
    BoundInterval {
        lower: max_of(&[0.0, e.p_y_x() - e.p_y_xp()]).clamp(0.0, 1.0),
        upper: min_of(&[e.p_y_x(), e.p_yp_xp()]).clamp(0.0, 1.0),
        source: BoundSource::ExperimentalOnly,
    }
}

/// The four terms whose maximum is the combined PNS lower bound.
pub fn pns_lower_terms(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> [f64; 4] {
    [0.0, e.p_y_x() - e.p_y_xp(), o.p_y() - e.p_y_xp(), e.p_y_x() - o.p_y()]
}

/// The four terms whose minimum is the combined PNS upper bound.
pub fn pns_upper_terms(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> [f64; 4] {
    [
        e.p_y_x(),
        e.p_yp_xp(),
        o.p_xy() + o.p_xpyp(),
        e.p_y_x() - e.p_y_xp() + o.p_xyp() + o.p_xpy(),
    ]
}

/// PNS bounds from experimental and observational data together.
pub fn pns_bounds_combined(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> Result<BoundInterval> {
    pns_bounds_combined_with_tolerance(e, o, INPUT_TOLERANCE)
}

pub fn pns_bounds_combined_with_tolerance(
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
    tolerance: f64,
) -> Result<BoundInterval> {
    ensure_consistent(e, o, tolerance)?;
    finish(
        "PNS lower <= PNS upper",
        max_of(&pns_lower_terms(e, o)),
        min_of(&pns_upper_terms(e, o)),
        BoundSource::Combined,
        tolerance,
    )
}

/// Bounds on `PN = P(y'_{x'} | x, y)`.
pub fn pn_bounds(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> Result<BoundInterval> {
    pn_bounds_with_tolerance(e, o, INPUT_TOLERANCE)
}

pub fn pn_bounds_with_tolerance(
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
    tolerance: f64,
) -> Result<BoundInterval> {
    ensure_consistent(e, o, tolerance)?;
    let denom = o.p_xy();
    if denom == 0.0 {
        return Err(Error::UndefinedConditional {
            quantity: "PN",
            event: "(x, y)",
        });
    }
    finish(
        "PN lower <= PN upper",
        max_of(&[0.0, (o.p_y() - e.p_y_xp()) / denom]),
        min_of(&[1.0, (e.p_yp_xp() - o.p_xpyp()) / denom]),
        BoundSource::Combined,
        tolerance,
    )
}

/// Bounds on `PS = P(y_x | x', y')`.
pub fn ps_bounds(e: &ExperimentalDistribution, o: &ObservationalDistribution) -> Result<BoundInterval> {
    ps_bounds_with_tolerance(e, o, INPUT_TOLERANCE)
}

pub fn ps_bounds_with_tolerance(
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
    tolerance: f64,
) -> Result<BoundInterval> {
    ensure_consistent(e, o, tolerance)?;
    let denom = o.p_xpyp();
    if denom == 0.0 {
        return Err(Error::UndefinedConditional {
            quantity: "PS",
            event: "(x', y')",
        });
    }
    finish(
        "PS lower <= PS upper",
        max_of(&[0.0, (o.p_yp() - e.p_yp_x()) / denom]),
        min_of(&[1.0, (e.p_y_x() - o.p_xy()) / denom]),
        BoundSource::Combined,
        tolerance,
    )
}

/// Returns `Some(0.0)` or `Some(1.0)` when the experimental data alone pin
/// PNS to a single value.
pub fn pns_point_identification(e: &ExperimentalDistribution) -> Option<f64> {
    let zero = |s: f64| s.abs() <= INPUT_TOLERANCE;
    let (p, q, pc, qc) = (e.p_y_x(), e.p_y_xp(), e.p_yp_x(), e.p_yp_xp());
    if zero(p + q) || zero(p + qc) || zero(pc + qc) {
        Some(0.0)
    } else if zero(pc + q) {
        Some(1.0)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp(p: f64, q: f64) -> ExperimentalDistribution {
        ExperimentalDistribution::new(p, q).unwrap()
    }

    fn obs(a: f64, b: f64, c: f64, d: f64) -> ObservationalDistribution {
        ObservationalDistribution::new(a, b, c, d).unwrap()
    }

    fn assert_interval(b: BoundInterval, lower: f64, upper: f64, tol: f64) {
        assert!(
            (b.lower - lower).abs() <= tol && (b.upper - upper).abs() <= tol,
            "got [{}, {}], expected [{lower}, {upper}]",
            b.lower,
            b.upper
        );
    }

    #[test]
    fn experimental_only_examples() {
        assert_interval(pns_bounds_experimental(&exp(0.53, 0.48)), 0.05, 0.52, 1e-12);
        assert_interval(pns_bounds_experimental(&exp(0.10, 0.90)), 0.0, 0.10, 1e-12);
        assert_interval(pns_bounds_experimental(&exp(1.0, 0.0)), 1.0, 1.0, 0.0);
    }

    #[test]
    fn combined_examples() {
        let b = pns_bounds_combined(&exp(0.53, 0.48), &obs(0.14, 0.06, 0.30, 0.50)).unwrap();
        assert_eq!(b.source, BoundSource::Combined);
        assert_interval(b, 0.33, 0.41, 1e-12);
        let b = pns_bounds_combined(&exp(0.55, 0.40), &obs(0.30, 0.02, 0.23, 0.45)).unwrap();
        assert_interval(b, 0.23, 0.40, 1e-12);
        let b = pns_bounds_combined(&exp(1.0, 0.0), &obs(0.5, 0.0, 0.0, 0.5)).unwrap();
        assert_interval(b, 1.0, 1.0, 0.0);
    }

    #[test]
    fn combined_refuses_inconsistent_data() {
        let err = pns_bounds_combined(&exp(0.53, 0.48), &obs(0.60, 0.06, 0.30, 0.04)).unwrap_err();
        assert!(matches!(err, Error::InconsistentData { .. }));
    }

    #[test]
    fn pn_examples() {
        // (0.20 - 0.48)/0.14 < 0 and (0.52 - 0.50)/0.14 = 1/7
        let b = pn_bounds(&exp(0.53, 0.48), &obs(0.14, 0.06, 0.30, 0.50)).unwrap();
        assert_interval(b, 0.0, 0.02 / 0.14, 1e-12);
        assert!((b.upper - 0.142_857_142_857).abs() < 1e-9);
        let b = pn_bounds(&exp(1.0, 0.0), &obs(0.5, 0.0, 0.0, 0.5)).unwrap();
        assert_interval(b, 1.0, 1.0, 1e-12);
    }

    #[test]
    fn pn_lower_vanishes_when_py_equals_pyxp() {
        // P(y) = 0.2 + 0.2 = 0.4 = P(y_x')
        let b = pn_bounds(&exp(0.5, 0.4), &obs(0.2, 0.2, 0.3, 0.3)).unwrap();
        assert_eq!(b.lower, 0.0);
    }

    #[test]
    fn ps_examples() {
        let b = ps_bounds(&exp(0.53, 0.48), &obs(0.14, 0.06, 0.30, 0.50)).unwrap();
        assert_interval(b, 0.66, 0.78, 1e-12);
        let b = ps_bounds(&exp(1.0, 0.0), &obs(0.5, 0.0, 0.0, 0.5)).unwrap();
        assert_interval(b, 1.0, 1.0, 1e-12);
    }

    #[test]
    fn ps_lower_vanishes_when_pyp_equals_pypx() {
        // P(y') = 0.5 = P(y'_x)
        let b = ps_bounds(&exp(0.5, 0.4), &obs(0.3, 0.2, 0.2, 0.3)).unwrap();
        assert_eq!(b.lower, 0.0);
    }

    #[test]
    fn conditionals_on_empty_cells_are_undefined() {
        let e = exp(0.5, 0.5);
        let err = pn_bounds(&e, &obs(0.0, 0.5, 0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::UndefinedConditional { quantity: "PN", .. }));
        let err = ps_bounds(&e, &obs(0.0, 0.5, 0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::UndefinedConditional { quantity: "PS", .. }));
    }

    #[test]
    fn point_identification() {
        assert_eq!(pns_point_identification(&exp(0.0, 0.0)), Some(0.0));
        assert_eq!(pns_point_identification(&exp(0.0, 1.0)), Some(0.0));
        assert_eq!(pns_point_identification(&exp(1.0, 1.0)), Some(0.0));
        assert_eq!(pns_point_identification(&exp(1.0, 0.0)), Some(1.0));
        assert_eq!(pns_point_identification(&exp(0.53, 0.48)), None);
        assert_eq!(pns_point_identification(&exp(1.0 - 1e-10, 0.0)), Some(1.0));
    }

    #[test]
    fn point_identified_value_matches_experimental_bounds() {
        for (p, q) in [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)] {
            let e = exp(p, q);
            let b = pns_bounds_experimental(&e);
            let v = pns_point_identification(&e).unwrap();
            assert_eq!((b.lower, b.upper), (v, v));
        }
    }

    fn consistent_pair() -> impl Strategy<Value = (ExperimentalDistribution, ObservationalDistribution)> {
        // Build from response types and treatment propensities so the pair
        // is consistent by construction.
        (
            proptest::array::uniform4(0.0f64..1.0),
            proptest::array::uniform4(0.0f64..=1.0),
        )
            .prop_filter("nonzero mass", |(w, _)| w.iter().sum::<f64>() > 1e-3)
            .prop_map(|(w, prop)| {
                let s: f64 = w.iter().sum();
                let [c, a, n, d] = w.map(|v| v / s);
                let e = exp((c + a).min(1.0), (a + d).min(1.0));
                let p_xy = c * prop[0] + a * prop[1];
                let p_xyp = n * prop[2] + d * prop[3];
                let p_xpy = a * (1.0 - prop[1]) + d * (1.0 - prop[3]);
                let p_xpyp = c * (1.0 - prop[0]) + n * (1.0 - prop[2]);
                (e, obs(p_xy, p_xpy, p_xyp, p_xpyp))
            })
    }

    proptest! {
        #[test]
        fn combined_is_nested_in_experimental((e, o) in consistent_pair()) {
            let outer = pns_bounds_experimental(&e);
            let inner = pns_bounds_combined(&e, &o).unwrap();
            prop_assert!(inner.lower >= outer.lower && inner.upper <= outer.upper);
            prop_assert!(0.0 <= inner.lower && inner.lower <= inner.upper && inner.upper <= 1.0);
        }

        #[test]
        fn intervals_lie_in_unit_range((e, o) in consistent_pair()) {
            for b in [pn_bounds(&e, &o), ps_bounds(&e, &o)].into_iter().flatten() {
                prop_assert!(0.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0);
            }
        }

        #[test]
        fn lower_bound_ignores_term_order((e, o) in consistent_pair(), rot in 0usize..4) {
            let mut terms = pns_lower_terms(&e, &o);
            terms.rotate_left(rot);
            terms.swap(0, 3);
            let permuted = max_of(&terms).clamp(0.0, 1.0);
            prop_assert_eq!(permuted, pns_bounds_combined(&e, &o).unwrap().lower);
        }
    }
}
