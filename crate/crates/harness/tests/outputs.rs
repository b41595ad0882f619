use std::fs;
use std::path::Path;

use onebit_harness::bundle::{table_from_csv, tables, GapRow};
use onebit_harness::experiments::{
    ChannelRow, CompandingRow, ExperimentResult, HistogramRow, SweepResult, SweepRow, TtsRow,
};
use onebit_harness::plot::PlotData;
use onebit_harness::spec::{ExperimentKind, ExperimentSpec};
use onebit_harness::{emit_plot_data, run_experiment, write_outputs, HarnessError, ResultBundle};

fn small(kind: ExperimentKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(kind, 7);
    match kind {
        ExperimentKind::SnrSweep => {
            spec.ensemble_size = Some(10);
            spec.powers_db = Some(vec![-3.5, 0.0, 12.25]);
        }
        ExperimentKind::SolutionHistogram => {
            spec.n_tx = Some(3);
            spec.solver.num_anneals = Some(100);
            spec.solver.noise_sigma = Some(0.2);
        }
        ExperimentKind::CompandingStudy => {
            spec.qubits = Some(8);
            spec.ensemble_size = Some(3);
            spec.min_distinct = Some(10);
            spec.solver.num_anneals = Some(100);
            spec.solver.sweeps_per_anneal = Some(20);
        }
        ExperimentKind::GapStudy => {
            spec.qubits = Some(3);
            spec.ensemble_size = Some(4);
            spec.grid_points = Some(9);
        }
        ExperimentKind::TtsCurve => {
            spec.sizes = Some(vec![2, 3]);
            spec.ensemble_size = Some(3);
            spec.solver.num_anneals = Some(100);
        }
    }
    spec
}

const KINDS: [ExperimentKind; 5] = [
    ExperimentKind::SnrSweep,
    ExperimentKind::SolutionHistogram,
    ExperimentKind::CompandingStudy,
    ExperimentKind::GapStudy,
    ExperimentKind::TtsCurve,
];

fn write_all(spec: &ExperimentSpec, dir: &Path) -> Vec<std::path::PathBuf> {
    let bundle = run_experiment(spec).unwrap();
    let mut files = write_outputs(&bundle, dir).unwrap();
    files.extend(emit_plot_data(&bundle, spec.kind, dir).unwrap());
    files
}

#[test]
fn reruns_are_byte_identical() {
    for kind in KINDS {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = write_all(&small(kind), a.path());
        let fb = write_all(&small(kind), b.path());
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(x.file_name(), y.file_name());
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{kind:?} {x:?}");
        }
    }
}

#[test]
fn every_output_round_trips() {
    for kind in KINDS {
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_experiment(&small(kind)).unwrap();
        write_outputs(&bundle, dir.path()).unwrap();
        let plots = emit_plot_data(&bundle, kind, dir.path()).unwrap();

        let text = fs::read_to_string(dir.path().join("bundle.json")).unwrap();
        let back = ResultBundle::from_json(&text).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(back.to_json(), text);

        for (name, csv) in tables(&bundle).unwrap() {
            let on_disk = fs::read_to_string(dir.path().join(name)).unwrap();
            assert_eq!(on_disk, csv);
            match &bundle.result {
                ExperimentResult::SnrSweep(r) if name == "sweep.csv" => {
                    assert_eq!(table_from_csv::<SweepRow>(&csv).unwrap(), r.rows)
                }
                ExperimentResult::SnrSweep(r) => assert_eq!(table_from_csv::<ChannelRow>(&csv).unwrap(), r.channels),
                ExperimentResult::SolutionHistogram(r) => {
                    let rows = table_from_csv::<HistogramRow>(&csv).unwrap();
                    let arm = if name.contains("plain") { &r.plain } else { &r.companded };
                    assert_eq!(rows, arm.rows);
                }
                ExperimentResult::CompandingStudy(r) => {
                    assert_eq!(table_from_csv::<CompandingRow>(&csv).unwrap(), r.rows)
                }
                ExperimentResult::GapStudy(r) => {
                    let rows = table_from_csv::<GapRow>(&csv).unwrap();
                    assert_eq!(rows.len(), r.instances.len());
                    for (row, g) in rows.iter().zip(&r.instances) {
                        assert_eq!((row.plain, row.companded), (g.plain, g.companded));
                    }
                }
                ExperimentResult::TtsCurve(r) => assert_eq!(table_from_csv::<TtsRow>(&csv).unwrap(), r.rows),
            }
        }

        for path in plots {
            let text = fs::read_to_string(&path).unwrap();
            let parsed = PlotData::parse(&text).unwrap();
            assert_eq!(parsed.to_text(), text);
            assert!(parsed.comments.iter().any(|c| c.starts_with("units:")));
        }
    }
}

#[test]
fn sweep_plot_columns_are_in_db() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&small(ExperimentKind::SnrSweep)).unwrap();
    let paths = emit_plot_data(&bundle, ExperimentKind::SnrSweep, dir.path()).unwrap();
    let plot = PlotData::parse(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
    assert_eq!(plot.columns, ["P_dB", "snr_es", "snr_alg1", "snr_rq"]);
    let ExperimentResult::SnrSweep(r) = &bundle.result else {
        unreachable!()
    };
    for (row, src) in plot.rows.iter().zip(&r.rows) {
        assert_eq!(row[0], Some(src.power_db));
        assert!((row[2].unwrap() - 10.0 * src.snr_alg1.log10()).abs() < 1e-12);
    }
}

#[test]
fn histogram_plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&small(ExperimentKind::SolutionHistogram)).unwrap();
    let paths = emit_plot_data(&bundle, ExperimentKind::SolutionHistogram, dir.path()).unwrap();
    assert_eq!(paths.len(), 2);
    let plot = PlotData::parse(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
    assert_eq!(plot.columns, ["rank", "energy", "snr", "probability"]);
}

#[test]
fn empty_ensemble_is_refused_before_writing() {
    let mut bundle = run_experiment(&small(ExperimentKind::SnrSweep)).unwrap();
    bundle.result = ExperimentResult::SnrSweep(SweepResult {
        rows: Vec::new(),
        channels: Vec::new(),
    });
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plots");
    let err = emit_plot_data(&bundle, ExperimentKind::SnrSweep, &out).unwrap_err();
    assert!(matches!(err, HarnessError::Empty(_)));
    assert!(!out.exists());
}

#[test]
fn kind_mismatch_is_refused() {
    let bundle = run_experiment(&small(ExperimentKind::GapStudy)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = emit_plot_data(&bundle, ExperimentKind::SnrSweep, dir.path()).unwrap_err();
    assert!(matches!(err, HarnessError::KindMismatch { .. }));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn timestamp_only_when_supplied() {
    let mut spec = small(ExperimentKind::GapStudy);
    let plain = run_experiment(&spec).unwrap();
    assert!(plain.provenance.timestamp.is_none());
    assert!(!plain.to_json().contains("timestamp"));
    spec.timestamp = Some("2026-01-01T00:00:00Z".into());
    let stamped = run_experiment(&spec).unwrap();
    assert_eq!(stamped.provenance.timestamp.as_deref(), Some("2026-01-01T00:00:00Z"));
    assert_eq!(stamped.result, plain.result);
}
