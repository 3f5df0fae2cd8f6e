//! CSV output of sweep results.

use std::io::Write;

use crate::error::Result;
use crate::experiments::SweepResult;

pub const CSV_HEADER: [&str; 10] = [
    "sweep_id",
    "parameter",
    "value",
    "rule",
    "n_trials",
    "mean_relative_utility",
    "std_error",
    "accuracy",
    "fallback_count",
    "seed",
];

pub const DIAGNOSTICS_HEADER: [&str; 7] = [
    "sweep_id",
    "parameter",
    "value",
    "rule",
    "fallback_count",
    "negative_weight_count",
    "k_hat_histogram",
];

/// One row per (sweep point, rule). Floats use the shortest representation
/// that round-trips exactly.
pub fn write_csv<W: Write>(out: W, sweep_id: &str, results: &[SweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        for s in &r.summaries {
            w.write_record([
                sweep_id.to_owned(),
                r.parameter.clone(),
                r.value.clone(),
                s.rule.to_string(),
                s.n_trials.to_string(),
                s.mean_relative_utility.to_string(),
                s.std_error.to_string(),
                s.accuracy.to_string(),
                s.fallback_count.to_string(),
                r.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-rule diagnostic counters; the `k_hat` histogram is written as
/// `k:count` pairs separated by spaces.
pub fn write_diagnostics<W: Write>(out: W, sweep_id: &str, results: &[SweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIAGNOSTICS_HEADER)?;
    for r in results {
        for s in &r.summaries {
            let histogram: Vec<String> = s
                .k_hat_histogram
                .iter()
                .map(|(k, c)| format!("{k}:{c}"))
                .collect();
            w.write_record([
                sweep_id.to_owned(),
                r.parameter.clone(),
                r.value.clone(),
                s.rule.to_string(),
                s.fallback_count.to_string(),
                s.negative_weight_count.to_string(),
                histogram.join(" "),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table: one line per sweep point, one column per rule.
pub fn summary_table(results: &[SweepResult]) -> String {
    let mut out = String::new();
    let Some(first) = results.first() else {
        return out;
    };
    out.push_str(&format!("{:>16}", first.parameter));
    for s in &first.summaries {
        out.push_str(&format!(" {:>7}", s.rule.name()));
    }
    out.push('\n');
    for r in results {
        out.push_str(&format!("{:>16}", r.value));
        for s in &r.summaries {
            out.push_str(&format!(" {:>7.4}", s.mean_relative_utility));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::RuleSummary;
    use crate::rule::Rule;
    use std::collections::BTreeMap;

    fn result() -> SweepResult {
        SweepResult {
            parameter: "m".into(),
            value: "5".into(),
            seed: 7,
            summaries: vec![RuleSummary {
                rule: Rule::EmbeddedVotingTrained,
                n_trials: 3,
                mean_relative_utility: 0.1 + 0.2,
                std_error: 0.0,
                accuracy: 1.0 / 3.0,
                fallback_count: 0,
                negative_weight_count: 2,
                k_hat_histogram: BTreeMap::from([(1, 2), (3, 1)]),
            }],
        }
    }

    #[test]
    fn csv_rows_keep_full_precision() {
        let mut buf = Vec::new();
        write_csv(&mut buf, "demo", &[result()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "demo,m,5,ev+,3,0.30000000000000004,0,0.3333333333333333,0,7"
        );
        assert!(lines.next().is_none());
    }

    #[test]
    fn diagnostics_rows() {
        let mut buf = Vec::new();
        write_diagnostics(&mut buf, "demo", &[result()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "demo,m,5,ev+,0,2,1:2 3:1");
    }

    #[test]
    fn table_has_one_line_per_point() {
        let t = summary_table(&[result(), result()]);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("ev+"));
    }
}
