//! Benefit-function bounds for unit selection.
//!
//! Selecting a complier, always-taker, never-taker or defier pays `beta`,
//! `gamma`, `theta` or `delta`. The expected payoff of a stratum is
//! `f(c) = W + sigma * PNS(c)`, so its bounds are an affine image of the PNS
//! bounds, with the endpoints swapped when `sigma < 0`.

use serde::{Deserialize, Serialize};

use crate::bounds::{pns_bounds_combined_with_tolerance, pns_bounds_experimental};
use crate::causal::{BoundInterval, BoundSource, ExperimentalDistribution, ObservationalDistribution};
use crate::improvement::{expected_lower_gain, expected_upper_drop};
use crate::{Error, Result, INPUT_TOLERANCE};

/// Payoffs for selecting each response type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenefitSpec {
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub delta: f64,
}

impl BenefitSpec {
    pub fn new(beta: f64, gamma: f64, theta: f64, delta: f64) -> Self {
        Self {
            beta,
            gamma,
            theta,
            delta,
        }
    }

    /// `beta - gamma - theta + delta`
    pub fn sigma(&self) -> f64 {
        self.beta - self.gamma - self.theta + self.delta
    }

    /// `(gamma - delta) P(y_x) + delta P(y_x') + theta P(y'_x')`
    pub fn w(&self, e: &ExperimentalDistribution) -> f64 {
        (self.gamma - self.delta) * e.p_y_x() + self.delta * e.p_y_xp() + self.theta * e.p_yp_xp()
    }
}

pub fn w_and_sigma(b: &BenefitSpec, e: &ExperimentalDistribution) -> (f64, f64) {
    (b.w(e), b.sigma())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenefitBounds {
    pub lb: f64,
    pub ub: f64,
    pub w: f64,
    pub source: BoundSource,
}

impl BenefitBounds {
    pub fn is_nested_in(&self, outer: &BenefitBounds, tol: f64) -> bool {
        self.lb >= outer.lb - tol && self.ub <= outer.ub + tol
    }
}

fn assemble(b: &BenefitSpec, e: &ExperimentalDistribution, pns: BoundInterval) -> BenefitBounds {
    let (w, sigma) = w_and_sigma(b, e);
    let (lb, ub) = if sigma > 0.0 {
        (w + sigma * pns.lower, w + sigma * pns.upper)
    } else if sigma < 0.0 {
        (w + sigma * pns.upper, w + sigma * pns.lower)
    } else {
        (w, w)
    };
    BenefitBounds {
        lb,
        ub,
        w,
        source: pns.source,
    }
}

/// Bounds on `f(c)` from experimental data alone.
pub fn benefit_bounds_experimental(b: &BenefitSpec, e: &ExperimentalDistribution) -> BenefitBounds {
    assemble(b, e, pns_bounds_experimental(e))
}

/// Bounds on `f(c)` from experimental and observational data.
pub fn benefit_bounds_combined(
    b: &BenefitSpec,
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
) -> Result<BenefitBounds> {
    benefit_bounds_combined_with_tolerance(b, e, o, INPUT_TOLERANCE)
}

pub fn benefit_bounds_combined_with_tolerance(
    b: &BenefitSpec,
    e: &ExperimentalDistribution,
    o: &ObservationalDistribution,
    tolerance: f64,
) -> Result<BenefitBounds> {
    Ok(assemble(b, e, pns_bounds_combined_with_tolerance(e, o, tolerance)?))
}

/// `E(LB' - LB)` and `E(UB - UB')` for the benefit function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenefitImprovement {
    pub e_lb_gain: f64,
    pub e_ub_drop: f64,
}

/// Scales the PNS expectations by `|sigma|`. For `sigma > 0` the lower
/// benefit bound tracks the PNS lower bound; for `sigma < 0` it tracks the
/// PNS upper bound, so the two expectations trade places.
///
/// `sigma == 0` is compared exactly and reported as [`Error::GainEquality`]
/// carrying `W`.
pub fn benefit_expected_improvement(b: &BenefitSpec, e: &ExperimentalDistribution) -> Result<BenefitImprovement> {
    let (w, sigma) = w_and_sigma(b, e);
    if sigma == 0.0 {
        return Err(Error::GainEquality { value: w });
    }
    // All four nondegeneracy sums are needed whichever sign sigma has.
    let lower = expected_lower_gain(e)?;
    let upper = expected_upper_drop(e)?;
    Ok(if sigma > 0.0 {
        BenefitImprovement {
            e_lb_gain: sigma * lower,
            e_ub_drop: sigma * upper,
        }
    } else {
        BenefitImprovement {
            e_lb_gain: -sigma * upper,
            e_ub_drop: -sigma * lower,
        }
    })
}
