use std::fmt::Write as _;

use qsh_bench::report::Comparison;
use qsh_bench::report::format_p;
use qsh_bench::{build_report, read_csv, render_table, write_report, BenchReport};

use crate::args::StatsArgs;
use crate::error::CliError;

fn render(report: &BenchReport, sided: Option<&str>) -> String {
    let Some(sided) = sided else {
        return render_table(report);
    };
    let full = render_table(report);
    let mut out: String = full.lines().take(1 + report.algorithms.len()).map(|l| format!("{l}\n")).collect();
    for c in &report.comparisons {
        let Comparison { algorithm, baseline, rank_sum_w, method, percent_diff, .. } = c;
        let (p, label) = match sided {
            "one" => (c.p_one_sided, format!("one-sided, {algorithm} faster")),
            _ => (c.p_two_sided, "two-sided".to_string()),
        };
        let _ = writeln!(out, "{algorithm} vs {baseline}: W={rank_sum_w} p({label})={} [{method}] diff={percent_diff:+.3}%", format_p(p));
    }
    out
}

pub fn stats(a: StatsArgs) -> Result<(), CliError> {
    let samples = read_csv(&a.csv).map_err(|e| match e {
        qsh_bench::BenchError::Io(io) => CliError::input(&a.csv, io),
        qsh_bench::BenchError::Csv(c) if c.is_io_error() => CliError::usage(format!("cannot read {}: {c}", a.csv.display())),
        other => CliError::crypto(format!("{}: {other}", a.csv.display())),
    })?;
    let (report, qq) = build_report(&samples, a.baseline.as_deref()).map_err(|e| CliError::crypto(e.to_string()))?;
    let report = match &a.report {
        Some(path) => write_report(&report, &qq, path).map_err(|e| CliError::crypto(e.to_string()))?,
        None => report,
    };
    crate::emit(&render(&report, a.sided.as_deref()));
    Ok(())
}
