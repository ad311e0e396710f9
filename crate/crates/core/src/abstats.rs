//! Two-proportion engagement statistics: relative rate difference, pooled
//! standard error, and 95% confidence interval.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const Z_95: f64 = 1.96;

/// One experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmCounts {
    pub interactions: u64,
    pub impressions: u64,
}

impl ArmCounts {
    pub fn new(interactions: u64, impressions: u64) -> Result<Self> {
        if impressions == 0 {
            return Err(Error::InvalidInput(
                "impressions must be positive".to_string(),
            ));
        }
        if interactions > impressions {
            return Err(Error::InvalidInput(format!(
                "interactions {interactions} exceed impressions {impressions}"
            )));
        }
        Ok(ArmCounts {
            interactions,
            impressions,
        })
    }
}

/// Relative engagement delta with pooled SE and CI. Percentage fields
/// (`pct_diff`, `ci_low`, `ci_high`) are in percentage points; the rest are
/// raw proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaReport<T> {
    pub rate_test: T,
    pub rate_control: T,
    pub pct_diff: T,
    pub pooled_rate: T,
    pub standard_error: T,
    pub ci_low: T,
    pub ci_high: T,
}

/// Relative difference in interaction rates between arms.
///
/// pct_diff = rate_test / rate_control - 1. SE assumes a binomial
/// distribution with the pooled rate, the whole expression under the root:
/// sqrt((1/n_test + 1/n_control) * p * (1 - p)). The CI is
/// pct_diff +- 1.96 * SE / pooled_rate, i.e. the absolute SE rescaled to the
/// relative-difference scale.
pub fn engagement_delta<T: Scalar>(test: ArmCounts, control: ArmCounts) -> Result<DeltaReport<T>> {
    if control.interactions == 0 {
        return Err(Error::UndefinedRatio);
    }
    let count = |v: u64| T::from_u64(v).expect("count representable");
    let hundred = T::from_config(100.0);
    let one = T::one();

    let rate_test = count(test.interactions) / count(test.impressions);
    let rate_control = count(control.interactions) / count(control.impressions);
    let pct_diff = (rate_test / rate_control - one) * hundred;

    let pooled_rate = count(test.interactions + control.interactions)
        / count(test.impressions + control.impressions);
    let inv_n = one / count(test.impressions) + one / count(control.impressions);
    let standard_error = (inv_n * pooled_rate * (one - pooled_rate)).sqrt();

    let half_width = T::from_config(Z_95) * standard_error / pooled_rate * hundred;
    Ok(DeltaReport {
        rate_test,
        rate_control,
        pct_diff,
        pooled_rate,
        standard_error,
        ci_low: pct_diff - half_width,
        ci_high: pct_diff + half_width,
    })
}

/// Labeled input row for the report TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AbInputRow {
    pub label: String,
    pub test: ArmCounts,
    pub control: ArmCounts,
}

pub const AB_INPUT_COLUMNS: [&str; 5] = [
    "label",
    "testCount",
    "testImpressions",
    "controlCount",
    "controlImpressions",
];

pub fn parse_ab_input<R: BufRead>(input: R) -> Result<Vec<AbInputRow>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or(Error::EmptyInput("A/B input stream has no header"))??;
    let names: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    for col in AB_INPUT_COLUMNS {
        if !names.contains(&col) {
            return Err(Error::MissingColumn(col.to_string()));
        }
    }
    let pos = |col: &str| names.iter().position(|n| *n == col).unwrap();
    let (li, tc, ti, cc, ci) = (
        pos("label"),
        pos("testCount"),
        pos("testImpressions"),
        pos("controlCount"),
        pos("controlImpressions"),
    );

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |idx: usize| -> Result<&str> {
            fields.get(idx).copied().ok_or_else(|| Error::Row {
                line: line_no,
                message: "row has too few fields".to_string(),
            })
        };
        let num = |idx: usize| -> Result<u64> {
            let token = get(idx)?;
            token.parse().map_err(|_| Error::Row {
                line: line_no,
                message: format!("unparseable count `{token}`"),
            })
        };
        let row = AbInputRow {
            label: get(li)?.to_string(),
            test: ArmCounts::new(num(tc)?, num(ti)?).map_err(|e| Error::Row {
                line: line_no,
                message: e.to_string(),
            })?,
            control: ArmCounts::new(num(cc)?, num(ci)?).map_err(|e| Error::Row {
                line: line_no,
                message: e.to_string(),
            })?,
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Report TSV mirroring the delta table: label, % difference, CI bounds,
/// plus the underlying rates and SE.
pub fn write_ab_report_tsv<T: Scalar, W: Write>(
    rows: &[(String, DeltaReport<T>)],
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "label\tpctDifference\tciLower\tciUpper\trateTest\trateControl\tstandardError"
    )?;
    for (label, d) in rows {
        writeln!(
            out,
            "{label}\t{:.2}\t{:.2}\t{:.2}\t{:.6}\t{:.6}\t{:.6}",
            d.pct_diff.as_f64(),
            d.ci_low.as_f64(),
            d.ci_high.as_f64(),
            d.rate_test.as_f64(),
            d.rate_control.as_f64(),
            d.standard_error.as_f64(),
        )?;
    }
    Ok(())
}
