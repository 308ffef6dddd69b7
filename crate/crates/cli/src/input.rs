//! Study input: JSON documents or CSV count tables.
//!
//! JSON accepts either counts or probabilities for each kind of data:
//!
//! ```json
//! {
//!   "stratum": "female",
//!   "experimental_counts": {"treated": {"pos": 489, "neg": 511}, "control": {"pos": 210, "neg": 790}},
//!   "observational": {"p_xy": 0.19, "p_xpy": 0.112, "p_xyp": 0.111, "p_xpyp": 0.587},
//!   "benefit": {"beta": 1500, "gamma": -800, "theta": 0, "delta": -2000}
//! }
//! ```
//!
//! The CSV form carries counts only, one arm per row:
//!
//! ```text
//! table,arm,pos,neg
//! experimental,treated,489,511
//! experimental,control,210,790
//! observational,chose,378,1022
//! observational,declined,420,180
//! ```

use pcause::causal::{
    estimate_experimental, estimate_observational, CountTable2x2, ExperimentalDistribution, ObservationalDistribution,
};
use pcause::unit_selection::BenefitSpec;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub stratum: Option<String>,
    pub experimental: ExperimentalDistribution,
    pub observational: Option<ObservationalDistribution>,
    pub benefit: Option<BenefitSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct Arm {
    pos: u64,
    neg: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentalCounts {
    treated: Arm,
    control: Arm,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationalCounts {
    #[serde(alias = "treated")]
    chose: Arm,
    #[serde(alias = "control")]
    declined: Arm,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStudy {
    stratum: Option<String>,
    experimental_counts: Option<ExperimentalCounts>,
    experimental: Option<ExperimentalDistribution>,
    observational_counts: Option<ObservationalCounts>,
    observational: Option<ObservationalDistribution>,
    benefit: Option<BenefitSpec>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn experimental_from_counts(c: &ExperimentalCounts) -> Result<ExperimentalDistribution, CliError> {
    let table = CountTable2x2::experimental(c.treated.pos, c.treated.neg, c.control.pos, c.control.neg);
    Ok(estimate_experimental(&table)?)
}

fn observational_from_counts(c: &ObservationalCounts) -> Result<ObservationalDistribution, CliError> {
    let table = CountTable2x2::observational(c.chose.pos, c.chose.neg, c.declined.pos, c.declined.neg);
    Ok(estimate_observational(&table)?)
}

pub fn parse_json(text: &str) -> Result<Study, CliError> {
    let raw: RawStudy = serde_json::from_str(text).map_err(|e| schema(format!("invalid input: {e}")))?;
    let experimental = match (raw.experimental, raw.experimental_counts) {
        (Some(e), None) => e,
        (None, Some(c)) => experimental_from_counts(&c)?,
        (Some(_), Some(_)) => {
            return Err(schema(
                "give either \"experimental\" or \"experimental_counts\", not both",
            ))
        }
        (None, None) => return Err(schema("missing \"experimental\" or \"experimental_counts\"")),
    };
    let observational = match (raw.observational, raw.observational_counts) {
        (Some(o), None) => Some(o),
        (None, Some(c)) => Some(observational_from_counts(&c)?),
        (Some(_), Some(_)) => {
            return Err(schema(
                "give either \"observational\" or \"observational_counts\", not both",
            ))
        }
        (None, None) => None,
    };
    Ok(Study {
        stratum: raw.stratum,
        experimental,
        observational,
        benefit: raw.benefit,
    })
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    table: String,
    arm: String,
    pos: u64,
    neg: u64,
}

pub fn parse_csv(text: &str) -> Result<Study, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let (mut treated, mut control, mut chose, mut declined) = (None, None, None, None);
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| schema(format!("invalid CSV input: {e}")))?;
        let slot = match (row.table.as_str(), row.arm.as_str()) {
            ("experimental", "treated") => &mut treated,
            ("experimental", "control") => &mut control,
            ("observational", "chose" | "treated") => &mut chose,
            ("observational", "declined" | "control") => &mut declined,
            (t, a) => return Err(schema(format!("CSV row {}: unknown table/arm {t}/{a}", i + 1))),
        };
        if slot.is_some() {
            return Err(schema(format!(
                "CSV row {}: duplicate {}/{}",
                i + 1,
                row.table,
                row.arm
            )));
        }
        *slot = Some(Arm {
            pos: row.pos,
            neg: row.neg,
        });
    }
    let experimental = match (treated, control) {
        (Some(treated), Some(control)) => experimental_from_counts(&ExperimentalCounts { treated, control })?,
        _ => return Err(schema("CSV input needs experimental treated and control rows")),
    };
    let observational = match (chose, declined) {
        (Some(chose), Some(declined)) => Some(observational_from_counts(&ObservationalCounts { chose, declined })?),
        (None, None) => None,
        _ => return Err(schema("CSV input has only one observational arm")),
    };
    Ok(Study {
        stratum: None,
        experimental,
        observational,
        benefit: None,
    })
}
