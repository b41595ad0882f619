//! Plot-ready column files: `#` comment lines documenting units, one CSV
//! header line, then numeric rows. Missing values are empty cells.

use std::fs;
use std::path::{Path, PathBuf};

use onebit_core::mimo::linear_to_db;

use crate::bundle::ResultBundle;
use crate::error::{HarnessError, Result};
use crate::experiments::{ExperimentResult, HistogramArm};
use crate::spec::ExperimentKind;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl PlotData {
    fn new(comments: &[&str], columns: &[&str]) -> Self {
        Self {
            comments: comments.iter().map(|s| s.to_string()).collect(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: String| HarnessError::Parse {
            what: "plot data",
            reason,
        };
        let mut comments = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => comments.push(l.trim_start_matches('#').trim_start().to_string()),
                Some(l) => break l,
                None => return Err(bad("missing column header".into())),
            }
        };
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<Option<f64>> = line
                .split(',')
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|e| bad(format!("row {i}: {e}")))
                    }
                })
                .collect::<Result<_>>()?;
            if cells.len() != columns.len() {
                return Err(bad(format!(
                    "row {i} has {} cells, expected {}",
                    cells.len(),
                    columns.len()
                )));
            }
            rows.push(cells);
        }
        Ok(Self {
            comments,
            columns,
            rows,
        })
    }
}

fn histogram_plot(arm: &HistogramArm, label: &str) -> PlotData {
    let title = format!("solution histogram ({label}): rank by uncompanded QUBO energy");
    let mut p = PlotData::new(
        &[&title, "units: energy dimensionless, snr linear, probability linear"],
        &["rank", "energy", "snr", "probability"],
    );
    for r in &arm.rows {
        p.rows.push(vec![
            Some(r.rank as f64),
            Some(r.energy),
            Some(r.snr),
            Some(r.probability),
        ]);
    }
    p
}

/// Plot files for `bundle`, named `<file>.plot.csv`.
pub fn plot_data(bundle: &ResultBundle) -> Result<Vec<(String, PlotData)>> {
    Ok(match &bundle.result {
        ExperimentResult::SnrSweep(r) => {
            if r.rows.is_empty() || r.channels.is_empty() {
                return Err(HarnessError::Empty("snr sweep has no channels"));
            }
            let mut p = PlotData::new(
                &["mean SNR versus transmit power", "units: P_dB in dB, snr_* in dB"],
                &["P_dB", "snr_es", "snr_alg1", "snr_rq"],
            );
            for row in &r.rows {
                p.rows.push(vec![
                    Some(row.power_db),
                    row.snr_es.map(linear_to_db),
                    Some(linear_to_db(row.snr_alg1)),
                    Some(linear_to_db(row.snr_rq)),
                ]);
            }
            vec![("sweep".into(), p)]
        }
        ExperimentResult::SolutionHistogram(r) => {
            if r.plain.rows.is_empty() || r.companded.rows.is_empty() {
                return Err(HarnessError::Empty("histogram has no solutions"));
            }
            vec![
                ("histogram_plain".into(), histogram_plot(&r.plain, "plain")),
                ("histogram_companded".into(), histogram_plot(&r.companded, "companded")),
            ]
        }
        ExperimentResult::CompandingStudy(r) => {
            if r.rows.is_empty() {
                return Err(HarnessError::Empty("companding study has no instances"));
            }
            let mut p = PlotData::new(
                &[
                    "distinct solutions and ground-state probability per instance",
                    "units: sigma and probabilities linear",
                ],
                &[
                    "instance",
                    "sigma",
                    "distinct_plain",
                    "distinct_companded",
                    "p_plain",
                    "p_companded",
                ],
            );
            for row in &r.rows {
                p.rows.push(vec![
                    Some(row.instance as f64),
                    Some(row.sigma),
                    Some(row.distinct_plain as f64),
                    Some(row.distinct_companded as f64),
                    Some(row.p_plain),
                    Some(row.p_companded),
                ]);
            }
            vec![("companding".into(), p)]
        }
        ExperimentResult::GapStudy(r) => {
            if r.instances.is_empty() {
                return Err(HarnessError::Empty("gap study has no instances"));
            }
            let mut p = PlotData::new(
                &["minimum spectral gap per instance", "units: energy units of (h, J)"],
                &["instance", "gap_plain", "gap_companded"],
            );
            for (i, g) in r.instances.iter().enumerate() {
                p.rows.push(vec![Some(i as f64), Some(g.plain), Some(g.companded)]);
            }
            vec![("gaps".into(), p)]
        }
        ExperimentResult::TtsCurve(r) => {
            if r.rows.is_empty() {
                return Err(HarnessError::Empty("tts curve has no sizes"));
            }
            let mut p = PlotData::new(
                &[
                    "time to solution versus size",
                    "units: tts_us in microseconds, success probability linear",
                ],
                &["size", "mean_success", "tts_us"],
            );
            for row in &r.rows {
                p.rows
                    .push(vec![Some(row.size as f64), Some(row.mean_success), row.tts_us]);
            }
            vec![("tts".into(), p)]
        }
    })
}

/// Writes the plot files of a bundle whose result is of `kind`. Nothing is
/// written if the kind does not match or the result is empty.
pub fn emit_plot_data(bundle: &ResultBundle, kind: ExperimentKind, dir: &Path) -> Result<Vec<PathBuf>> {
    let found = bundle.result.kind();
    if found != kind {
        return Err(HarnessError::KindMismatch {
            expected: kind.name(),
            found: found.name(),
        });
    }
    let plots = plot_data(bundle)?;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    plots
        .into_iter()
        .map(|(name, p)| {
            let path = dir.join(format!("{name}.plot.csv"));
            fs::write(&path, p.to_text()).map_err(|e| HarnessError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
