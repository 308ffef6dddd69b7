use pcause::bounds::{
    pn_bounds_with_tolerance, pns_bounds_combined_with_tolerance, pns_bounds_experimental, pns_point_identification,
    ps_bounds_with_tolerance,
};
use pcause::causal::{
    check_consistency_with_tolerance, BoundInterval, ExperimentalDistribution, ObservationalDistribution,
};
use pcause::improvement::{improvement_report, sweep_grid, FeasibleInterval};
use pcause::unit_selection::{
    benefit_bounds_combined_with_tolerance, benefit_bounds_experimental, benefit_expected_improvement, BenefitBounds,
};
use pcause::Error;
use serde_json::{json, Map, Value};

use crate::input::Study;
use crate::CliError;

/// Largest accepted sweep resolution; 10^8 cells.
pub const MAX_RESOLUTION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Lower,
    Upper,
    Both,
}

fn pair(b: &BoundInterval) -> Value {
    json!([b.lower, b.upper])
}

fn benefit_pair(b: &BenefitBounds) -> Value {
    json!([b.lb, b.ub])
}

fn interval(f: &FeasibleInterval) -> Value {
    json!([f.lo, f.hi])
}

fn experimental_json(e: &ExperimentalDistribution) -> Value {
    json!({ "p_y_x": e.p_y_x(), "p_y_xp": e.p_y_xp() })
}

fn observational_json(o: &ObservationalDistribution) -> Value {
    json!({ "p_xy": o.p_xy(), "p_xpy": o.p_xpy(), "p_xyp": o.p_xyp(), "p_xpyp": o.p_xpyp() })
}

fn header(study: &Study) -> Map<String, Value> {
    let mut out = Map::new();
    if let Some(label) = &study.stratum {
        out.insert("stratum".into(), json!(label));
    }
    out.insert("experimental".into(), experimental_json(&study.experimental));
    if let Some(o) = &study.observational {
        out.insert("observational".into(), observational_json(o));
    }
    out
}

pub(crate) fn check_nonnegative(name: &str, value: f64) -> Result<(), CliError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{name} must be a finite nonnegative number, got {value}"
        )))
    }
}

/// PN/PS are reported as null, with a note, when their conditioning event
/// has probability zero.
fn conditional(result: pcause::Result<BoundInterval>, notes: &mut Vec<String>) -> Result<Value, CliError> {
    match result {
        Ok(b) => Ok(pair(&b)),
        Err(e @ Error::UndefinedConditional { .. }) => {
            notes.push(e.to_string());
            Ok(Value::Null)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn bounds(study: &Study, tolerance: f64) -> Result<Value, CliError> {
    check_nonnegative("tolerance", tolerance)?;
    let e = &study.experimental;
    let mut out = header(study);
    out.insert("pns_experimental".into(), pair(&pns_bounds_experimental(e)));
    out.insert("point_identified".into(), json!(pns_point_identification(e)));
    if let Some(o) = &study.observational {
        let report = check_consistency_with_tolerance(e, o, tolerance);
        if !report.consistent {
            return Err(CliError::Inconsistent(report));
        }
        let mut notes = Vec::new();
        out.insert("consistency".into(), json!(report));
        out.insert(
            "pns_combined".into(),
            pair(&pns_bounds_combined_with_tolerance(e, o, tolerance)?),
        );
        out.insert(
            "pn".into(),
            conditional(pn_bounds_with_tolerance(e, o, tolerance), &mut notes)?,
        );
        out.insert(
            "ps".into(),
            conditional(ps_bounds_with_tolerance(e, o, tolerance), &mut notes)?,
        );
        out.insert("notes".into(), json!(notes));
    }
    Ok(Value::Object(out))
}

pub fn improve(study: &Study, threshold: f64) -> Result<Value, CliError> {
    check_nonnegative("advisory threshold", threshold)?;
    let r = improvement_report(&study.experimental)?;
    let non_minor = r.e_lower_gain > threshold && r.e_upper_drop > threshold;
    let advisory = if non_minor {
        "non-minor expected improvement: an observational study is expected to tighten both PNS bounds"
    } else {
        "minor expected improvement: an observational study is unlikely to tighten the PNS bounds much"
    };
    let mut out = header(study);
    out.insert("e_lower_gain".into(), json!(r.e_lower_gain));
    out.insert("e_upper_drop".into(), json!(r.e_upper_drop));
    out.insert("d_interval".into(), interval(&r.d_interval));
    out.insert("d_prime_interval".into(), interval(&r.d_prime_interval));
    out.insert("advisory_threshold".into(), json!(threshold));
    out.insert("non_minor".into(), json!(non_minor));
    out.insert("advisory".into(), json!(advisory));
    Ok(Value::Object(out))
}

pub fn unit_select(study: &Study, tolerance: f64) -> Result<Value, CliError> {
    check_nonnegative("tolerance", tolerance)?;
    let b = study
        .benefit
        .ok_or_else(|| CliError::Usage("unit-select needs a \"benefit\" object".into()))?;
    let e = &study.experimental;
    let combined = match &study.observational {
        Some(o) => Some(benefit_bounds_combined_with_tolerance(&b, e, o, tolerance)?),
        None => None,
    };
    let imp = benefit_expected_improvement(&b, e)?;
    let experimental = benefit_bounds_experimental(&b, e);
    let mut out = header(study);
    out.insert("benefit".into(), json!(b));
    out.insert("w".into(), json!(experimental.w));
    out.insert("sigma".into(), json!(b.sigma()));
    out.insert("bounds_experimental".into(), benefit_pair(&experimental));
    out.insert("e_lb_gain".into(), json!(imp.e_lb_gain));
    out.insert("e_ub_drop".into(), json!(imp.e_ub_drop));
    if let Some(c) = &combined {
        out.insert("bounds_combined".into(), benefit_pair(c));
    }
    Ok(Value::Object(out))
}

fn cell(v: Option<f64>, round: Option<u32>) -> String {
    match v {
        Some(v) => crate::round_f64(v, round).to_string(),
        None => String::new(),
    }
}

/// CSV text for the grid, rows ordered by `p_y_xp` then `p_y_x`.
pub fn sweep(resolution: usize, which: Which, closed: bool, round: Option<u32>) -> Result<String, CliError> {
    if resolution > MAX_RESOLUTION {
        return Err(CliError::Usage(format!(
            "resolution must be at most {MAX_RESOLUTION}, got {resolution}"
        )));
    }
    let grid = sweep_grid(resolution, closed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Usage(e.to_string());
    w.write_record(["p_y_x", "p_y_xp", "e_lower_gain", "e_upper_drop"])
        .map_err(io)?;
    for r in &grid.records {
        let lower = if which == Which::Upper { None } else { r.e_lower_gain };
        let upper = if which == Which::Lower { None } else { r.e_upper_drop };
        w.write_record([
            cell(Some(r.p_y_x), round),
            cell(Some(r.p_y_xp), round),
            cell(lower, round),
            cell(upper, round),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Usage(e.to_string()))
}
