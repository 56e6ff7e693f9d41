//! CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{ExperimentResult, SummaryRow};
use crate::error::{Error, Result};

pub const CURVES_HEADER: [&str; 12] = [
    "trial",
    "seed",
    "protocol",
    "mode",
    "time",
    "rmse",
    "cv_rmse",
    "mass_s",
    "mass_w",
    "messages_cum",
    "buffer_max",
    "nodes_alive",
];

pub const SUMMARY_HEADER: [&str; 9] = [
    "protocol",
    "mode",
    "eps",
    "mean_time",
    "std_time",
    "mean_msgs",
    "std_msgs",
    "reach_rate",
    "trials",
];

/// Missing value marker.
pub const NA: &str = "NA";

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros removed,
/// exponent form below 1e-4 and from 1e9 up. Non-finite values become `NA`.
pub fn format_g9(x: f64) -> String {
    const P: i32 = 9;
    if !x.is_finite() {
        return NA.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), format_g9)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `curves.csv`: one row per sampled observation, in (trial, time)
/// order.
pub fn write_curves(path: &Path, result: &ExperimentResult) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(CURVES_HEADER).map_err(&err)?;
    let protocol = result.config.protocol.name();
    let mode = result.config.mode.name();
    for t in &result.trials {
        let trial = t.trial.to_string();
        let seed = t.seed.to_string();
        for r in &t.rows {
            w.write_record([
                trial.as_str(),
                seed.as_str(),
                protocol,
                mode,
                &format_g9(r.time),
                &format_g9(r.rmse),
                &format_g9(r.cv_rmse),
                &format_g9(r.mass_s),
                &format_g9(r.mass_w),
                &r.messages_cum.to_string(),
                &r.buffer_max.to_string(),
                &r.nodes_alive.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn summary_record(row: &SummaryRow) -> [String; 9] {
    [
        row.protocol.name().to_string(),
        row.mode.name().to_string(),
        format_g9(row.eps),
        opt(row.mean_time),
        opt(row.std_time),
        opt(row.mean_msgs),
        opt(row.std_msgs),
        format_g9(row.reach_rate),
        row.trials.to_string(),
    ]
}

/// Writes `summary.csv`: one row per eps target, in configuration order.
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(SUMMARY_HEADER).map_err(&err)?;
    for row in rows {
        w.write_record(summary_record(row)).map_err(&err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes both CSVs into `dir`, creating it if needed. Returns their paths.
pub fn write_results(dir: &Path, result: &ExperimentResult) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let curves = dir.join("curves.csv");
    let summary = dir.join("summary.csv");
    write_curves(&curves, result)?;
    write_summary(&summary, &result.summary)?;
    Ok((curves, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_c_printf() {
        // reference strings produced by printf("%.9g")
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (17.0, "17"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (1.5e-7, "1.5e-07"),
            (999999999.5, "1e+09"),
            (9.9999999996, "10"),
            (1e100, "1e+100"),
            (std::f64::consts::PI * 1e-3, "0.00314159265"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "{x}");
        }
        assert_eq!(format_g9(f64::NAN), "NA");
        assert_eq!(format_g9(f64::INFINITY), "NA");
    }
}
