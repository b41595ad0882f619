use std::fs;
use std::path::{Path, PathBuf};

use onebit_core::spectral::InstanceGaps;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiments::{self, ExperimentResult};
use crate::spec::ExperimentSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: String,
    pub version: String,
    pub seed: u64,
    /// Only present when the spec supplies one, so reruns stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub result: ExperimentResult,
}

/// Validates the spec, then runs the matching pipeline.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultBundle> {
    spec.validate()?;
    let result = experiments::run(spec)?;
    Ok(ResultBundle {
        spec: spec.clone(),
        provenance: Provenance {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: spec.seed,
            timestamp: spec.timestamp.clone(),
        },
        result,
    })
}

impl ResultBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse {
            what: "result bundle",
            reason: e.to_string(),
        })
    }
}

/// Per-instance row of a gap study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub instance: usize,
    pub plain: f64,
    pub companded: f64,
    pub plain_degenerate: bool,
    pub companded_degenerate: bool,
}

impl GapRow {
    fn new(instance: usize, g: &InstanceGaps) -> Self {
        Self {
            instance,
            plain: g.plain,
            companded: g.companded,
            plain_degenerate: g.plain_degenerate,
            companded_degenerate: g.companded_degenerate,
        }
    }
}

pub fn table_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Parse {
            what: "table row",
            reason: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Parse {
        what: "table",
        reason: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn table_from_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| HarnessError::Parse {
            what: "table",
            reason: e.to_string(),
        })
}

/// Named CSV tables of a bundle.
pub fn tables(bundle: &ResultBundle) -> Result<Vec<(&'static str, String)>> {
    Ok(match &bundle.result {
        ExperimentResult::SnrSweep(r) => vec![
            ("sweep.csv", table_to_csv(&r.rows)?),
            ("channels.csv", table_to_csv(&r.channels)?),
        ],
        ExperimentResult::SolutionHistogram(r) => vec![
            ("histogram_plain.csv", table_to_csv(&r.plain.rows)?),
            ("histogram_companded.csv", table_to_csv(&r.companded.rows)?),
        ],
        ExperimentResult::CompandingStudy(r) => vec![("companding.csv", table_to_csv(&r.rows)?)],
        ExperimentResult::GapStudy(r) => {
            let rows: Vec<GapRow> = r.instances.iter().enumerate().map(|(i, g)| GapRow::new(i, g)).collect();
            vec![("gaps.csv", table_to_csv(&rows)?)]
        }
        ExperimentResult::TtsCurve(r) => vec![("tts.csv", table_to_csv(&r.rows)?)],
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Writes `bundle.json` and the CSV tables into `dir`, returning the paths.
pub fn write_outputs(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = tables(bundle)?;
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut paths = vec![write(dir, "bundle.json", &bundle.to_json())?];
    for (name, text) in tables {
        paths.push(write(dir, name, &text)?);
    }
    Ok(paths)
}
