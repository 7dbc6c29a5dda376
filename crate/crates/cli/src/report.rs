use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use petkin::imaging::{region_stats, ParametricMaps, PARAMETER_NAMES};
use petkin::phantom::GroundTruth;

use crate::{io_err, CliError};

/// One row of `evaluation.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub region: u8,
    pub parameter: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    pub truth: f64,
    /// `|mean − truth| / truth`.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodEvaluation {
    pub method: String,
    pub datasets: usize,
    /// Four regions times four parameters, region-major.
    pub rows: Vec<EvaluationRow>,
    /// Root-mean-square error per parameter over all non-infilled tissue pixels of
    /// all datasets; `None` when nothing was fitted.
    pub rmse: [Option<f64>; 4],
    pub rmse_n: usize,
}

pub fn evaluate_method(method: &str, maps: &[ParametricMaps], gt: &GroundTruth) -> Result<MethodEvaluation, CliError> {
    let stats = region_stats(maps, &gt.labels, false)?;
    let rows = stats
        .iter()
        .map(|s| {
            let truth = gt.regions[s.region as usize - 1].rates()[s.parameter];
            EvaluationRow {
                region: s.region,
                parameter: s.parameter,
                mean: s.mean,
                std: s.std,
                n: s.n,
                truth,
                rel_error: s.mean.map(|m| (m - truth).abs() / truth),
            }
        })
        .collect();

    let mut sq = [0.0f64; 4];
    let mut n = 0usize;
    let labels = gt.labels.as_slice();
    for m in maps {
        for (p, &label) in labels.iter().enumerate() {
            let Some(truth) = gt.params(label) else { continue };
            if m.infilled[p] {
                continue;
            }
            n += 1;
            for (j, t) in truth.rates().iter().enumerate() {
                sq[j] += (m.k[j][p] - t).powi(2);
            }
        }
    }
    let rmse = sq.map(|s| (n > 0).then(|| (s / n as f64).sqrt()));
    Ok(MethodEvaluation {
        method: method.to_string(),
        datasets: maps.len(),
        rows,
        rmse,
        rmse_n: n,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn evaluation_csv(evals: &[MethodEvaluation]) -> String {
    let mut s = String::from("method,region,parameter,mean,std,n,rel_error\n");
    for e in evals {
        for r in &e.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                e.method,
                r.region,
                PARAMETER_NAMES[r.parameter],
                opt(r.mean),
                opt(r.std),
                r.n,
                opt(r.rel_error)
            );
        }
    }
    s
}

pub fn rmse_csv(evals: &[MethodEvaluation]) -> String {
    let mut s = String::from("method,parameter,rmse,n\n");
    for e in evals {
        for (j, v) in e.rmse.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", e.method, PARAMETER_NAMES[j], opt(*v), e.rmse_n);
        }
    }
    s
}

pub fn text_report(evals: &[MethodEvaluation]) -> String {
    let mut s = String::new();
    for e in evals {
        let _ = writeln!(s, "method {} ({} datasets)", e.method, e.datasets);
        let _ = writeln!(s, "  region param       truth        mean         std   rel.err      n");
        for r in &e.rows {
            let _ = writeln!(
                s,
                "  {:>6} {:>5} {:>11.5} {:>11} {:>11} {:>9} {:>6}",
                r.region,
                PARAMETER_NAMES[r.parameter],
                r.truth,
                r.mean.map_or("-".into(), |v| format!("{v:.5}")),
                r.std.map_or("-".into(), |v| format!("{v:.5}")),
                r.rel_error.map_or("-".into(), |v| format!("{:.2}%", 100.0 * v)),
                r.n
            );
        }
        let rmse: Vec<String> = e
            .rmse
            .iter()
            .zip(PARAMETER_NAMES)
            .map(|(v, name)| format!("{name} {}", v.map_or("-".into(), |x| format!("{x:.5}"))))
            .collect();
        let _ = writeln!(s, "  rmse over {} pixels: {}\n", e.rmse_n, rmse.join(", "));
    }
    s
}

pub fn write_reports(out: &Path, evals: &[MethodEvaluation]) -> Result<(), CliError> {
    for (name, text) in [
        ("evaluation.csv", evaluation_csv(evals)),
        ("rmse.csv", rmse_csv(evals)),
        ("report.txt", text_report(evals)),
    ] {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use petkin::phantom::make_phantom;

    #[test]
    fn ground_truth_maps_have_zero_error() {
        let gt = GroundTruth::reference(make_phantom(32).unwrap());
        let maps = ParametricMaps::from_ground_truth(&gt);
        let e = evaluate_method("ground-truth", &[maps], &gt).unwrap();
        assert_eq!(e.rows.len(), 16);
        for r in &e.rows {
            assert_eq!(r.rel_error, Some(0.0));
        }
        assert!(e.rmse.iter().all(|v| *v == Some(0.0)));
        let csv = evaluation_csv(&[e]);
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with("method,region,parameter,mean,std,n,rel_error\n"));
    }
}
