//! CSV reports and two-column plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;
use crate::metrics::{irsa_asymptotic_throughput, saloha_theory, MetricsReport};
use crate::model::DegreeDistribution;

pub const CSV_COLUMNS: [&str; 15] = [
    "protocol",
    "G",
    "throughput_raf",
    "throughput_rapc",
    "pdr",
    "plr",
    "mean_delay_slots",
    "delay_per_active",
    "delay_p95_ms",
    "reliability",
    "acr",
    "realizations",
    "ci_throughput",
    "ci_plr",
    "ci_acr",
];

/// Fixed-point rendering with 6 significant digits and trailing zeros
/// removed.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn row(r: &MetricsReport) -> String {
    let values = [
        r.load,
        r.throughput_raf,
        r.throughput_rapc,
        r.pdr,
        r.plr,
        r.mean_delay_slots,
        r.delay_per_active,
        r.delay_p95_ms,
        r.reliability,
        r.acr,
    ];
    let mut line = r.protocol.clone();
    for v in values {
        let _ = write!(line, ",{}", format_number(v));
    }
    let _ = write!(line, ",{}", r.realizations);
    for v in [r.ci_throughput, r.ci_plr, r.ci_acr] {
        let _ = write!(line, ",{}", format_number(v));
    }
    line
}

/// Writes a header and one row per report. Nothing is written for an empty
/// slice.
pub fn write_csv(reports: &[MetricsReport], path: &Path) -> Result<(), HarnessError> {
    if reports.is_empty() {
        return Err(HarnessError::EmptyReports);
    }
    let mut text = CSV_COLUMNS.join(",");
    text.push('\n');
    for r in reports {
        text.push_str(&row(r));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a file produced by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<MetricsReport>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_COLUMNS.join(",") => {}
        _ => return Err(HarnessError::Csv { line: 1, message: "unexpected header".into() }),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |message: String| HarnessError::Csv { line: i + 1, message };
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != CSV_COLUMNS.len() {
            return Err(err(format!("expected {} fields, found {}", CSV_COLUMNS.len(), cells.len())));
        }
        let num = |k: usize| {
            cells[k]
                .parse::<f64>()
                .map_err(|_| err(format!("`{}` is not a number", cells[k])))
        };
        out.push(MetricsReport {
            protocol: cells[0].to_string(),
            load: num(1)?,
            throughput_raf: num(2)?,
            throughput_rapc: num(3)?,
            pdr: num(4)?,
            plr: num(5)?,
            mean_delay_slots: num(6)?,
            delay_per_active: num(7)?,
            delay_p95_ms: num(8)?,
            reliability: num(9)?,
            acr: num(10)?,
            realizations: cells[11]
                .parse()
                .map_err(|_| err(format!("`{}` is not a count", cells[11])))?,
            ci_throughput: num(12)?,
            ci_plr: num(13)?,
            ci_acr: num(14)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Throughput,
    Plr,
    Delay,
    Acr,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Throughput => "throughput",
            PlotKind::Plr => "plr",
            PlotKind::Delay => "delay",
            PlotKind::Acr => "acr",
        }
    }

    fn value(self, r: &MetricsReport) -> f64 {
        match self {
            PlotKind::Throughput => r.throughput_raf,
            PlotKind::Plr => r.plr,
            PlotKind::Delay => r.mean_delay_slots,
            PlotKind::Acr => r.acr,
        }
    }
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "throughput" => Ok(PlotKind::Throughput),
            "plr" => Ok(PlotKind::Plr),
            "delay" => Ok(PlotKind::Delay),
            "acr" => Ok(PlotKind::Acr),
            other => Err(HarnessError::UnknownPlotKind(other.to_string())),
        }
    }
}

/// Writes `{series}_{kind}.dat` files of `G value` pairs into `dir`, one per
/// protocol. Throughput plots also get the `saloha_theory` and
/// `irsa_asymptotic` reference curves for `dist`. Returns the written paths.
pub fn emit_plot_data(
    reports: &[MetricsReport],
    kind: PlotKind,
    dir: &Path,
    dist: &DegreeDistribution,
) -> Result<Vec<PathBuf>, HarnessError> {
    if reports.is_empty() {
        return Err(HarnessError::EmptyReports);
    }
    fs::create_dir_all(dir)?;
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in reports {
        series.entry(&r.protocol).or_default().push((r.load, kind.value(r)));
    }
    let mut owned: Vec<(String, Vec<(f64, f64)>)> = series
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            (k.to_string(), v)
        })
        .collect();

    if kind == PlotKind::Throughput {
        let g_max = reports.iter().map(|r| r.load).fold(2.0, f64::max);
        let grid: Vec<f64> = (1..=(g_max * 100.0).ceil() as usize).map(|i| i as f64 / 100.0).collect();
        owned.push(("saloha_theory".into(), grid.iter().map(|&g| (g, saloha_theory(g))).collect()));
        owned.push((
            "irsa_asymptotic".into(),
            grid.iter().map(|&g| (g, irsa_asymptotic_throughput(dist, g, 2000))).collect(),
        ));
    }

    let mut paths = Vec::new();
    for (name, points) in owned {
        let path = dir.join(format!("{name}_{}.dat", kind.name()));
        let mut text = String::new();
        for (g, v) in points {
            let _ = writeln!(text, "{} {}", format_number(g), format_number(v));
        }
        fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(protocol: &str, load: f64) -> MetricsReport {
        MetricsReport {
            protocol: protocol.into(),
            load,
            throughput_raf: 0.4,
            throughput_rapc: 0.35,
            pdr: 0.95,
            plr: 0.05,
            mean_delay_slots: 74.25,
            delay_per_active: 2.97,
            delay_p95_ms: 98.0,
            reliability: 0.95,
            acr: 0.9,
            realizations: 100,
            ci_throughput: 0.001234567,
            ci_plr: 0.0,
            ci_acr: 0.002,
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.05), "0.05");
        assert_eq!(format_number(0.0500000), "0.05");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333");
        assert_eq!(format_number(1234.56789), "1234.57");
        assert_eq!(format_number(0.000123456789), "0.000123457");
        assert_eq!(format_number(123456789.0), "123456789");
        assert_eq!(format_number(-2.5), "-2.5");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_csv(&[report("irsa", 0.5)], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(text.ends_with('\n'));
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines[1], "irsa,0.5,0.4,0.35,0.95,0.05,74.25,2.97,98,0.95,0.9,100,0.00123457,0,0.002");
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].plr, 0.05);
        assert_eq!(back[0].realizations, 100);
    }

    #[test]
    fn empty_reports_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(matches!(write_csv(&[], &path), Err(HarnessError::EmptyReports)));
        assert!(!path.exists());
    }

    #[test]
    fn plot_kinds() {
        assert_eq!("acr".parse::<PlotKind>().unwrap(), PlotKind::Acr);
        assert!(matches!("latency".parse::<PlotKind>(), Err(HarnessError::UnknownPlotKind(_))));
    }

    #[test]
    fn throughput_plot_has_reference_series() {
        let dir = tempfile::tempdir().unwrap();
        let reports = [report("irsa", 0.5), report("irsa", 0.2), report("saloha", 0.5)];
        let paths = emit_plot_data(&reports, PlotKind::Throughput, dir.path(), &DegreeDistribution::lambda8()).unwrap();
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            ["irsa_throughput.dat", "saloha_throughput.dat", "saloha_theory_throughput.dat", "irsa_asymptotic_throughput.dat"]
        );
        let irsa = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(irsa, "0.2 0.4\n0.5 0.4\n");
        let theory = fs::read_to_string(&paths[2]).unwrap();
        assert!(theory.lines().any(|l| l == "1 0.367879"));
    }

    #[test]
    fn acr_plot_stays_in_unit_interval() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_plot_data(&[report("irsa", 0.5)], PlotKind::Acr, dir.path(), &DegreeDistribution::lambda8()).unwrap();
        assert_eq!(paths.len(), 1);
        for line in fs::read_to_string(&paths[0]).unwrap().lines() {
            let v: f64 = line.split(' ').nth(1).unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
