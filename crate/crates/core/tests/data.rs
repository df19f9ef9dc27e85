use spheroid_core::data::{
    self, load_dataset, parse_dataset, write_dataset, CellLine, DataError, LoadOptions, TimeWindow,
    ValueUnit,
};
use spheroid_core::inference::log_likelihood;
use spheroid_core::model::{DiscretizationConfig, ModelParams};
use spheroid_core::solver::{self, QuantileConfig};

fn cfg() -> DiscretizationConfig {
    DiscretizationConfig {
        n_particles: 60,
        r_max: 1.5,
        ..Default::default()
    }
}

fn truth(sigma_o: f64) -> ModelParams {
    ModelParams::from_natural(0.8, 0.1, sigma_o, 0.3).unwrap()
}

#[test]
fn written_datasets_load_back_exactly() {
    let times = [0.5, 1.0, 2.0, 3.0];
    let ds = data::synthesize(&truth(0.05), &cfg(), &QuantileConfig::default(), &times, 9, CellLine::B16).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    write_dataset(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_dataset(
        &path,
        &LoadOptions {
            unit: ValueUnit::Radius,
            cell_line: CellLine::B16,
            window: None,
        },
    )
    .unwrap();
    assert_eq!(back, ds);
}

#[test]
fn diameters_are_halved_and_window_filters() {
    let text = "# digitised\ntime_day,value_mm\n1,0.8\n\n5,1.2\n12,2.0\n";
    let opts = LoadOptions {
        window: Some(TimeWindow::new(2.0, 12.0).unwrap()),
        ..Default::default()
    };
    let ds = parse_dataset(text.as_bytes(), &opts).unwrap();
    assert_eq!(ds.times(), vec![5.0, 12.0]);
    assert_eq!(ds.radii(), vec![0.6, 1.0]);
}

#[test]
fn malformed_files_report_the_physical_line() {
    let opts = LoadOptions::default();
    let cases = [
        ("time_day,value_mm\n1,0.5\n# note\n1,0.6\n", 4),
        ("time_day,value_mm\n1,0.5\n2,-0.1\n", 3),
        ("time_day,value_mm\n\n1,abc\n", 3),
    ];
    for (text, expected) in cases {
        let line = match parse_dataset(text.as_bytes(), &opts) {
            Err(DataError::Parse { line, .. })
            | Err(DataError::NotIncreasing { line, .. })
            | Err(DataError::NonPositive { line, .. }) => line,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(line, expected, "{text:?}");
    }
    assert!(parse_dataset("t,v\n1,2\n".as_bytes(), &opts).is_err());
    assert!(matches!(
        parse_dataset("time_day,value_mm\n".as_bytes(), &opts),
        Err(DataError::Empty(_))
    ));
}

#[test]
fn synthetic_noise_has_the_requested_log_scale() {
    let sigma_o = 0.08;
    let theta = truth(sigma_o);
    let times = [1.5];
    let clean = solver::simulate(&theta, &cfg(), &QuantileConfig::default(), &times).unwrap().radii[0];
    let logs: Vec<f64> = (0..10_000)
        .map(|seed| {
            let ds = data::synthesize(&theta, &cfg(), &QuantileConfig::default(), &times, seed, CellLine::V79).unwrap();
            (ds.radii()[0] / clean).ln()
        })
        .collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let sd = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sigma_o / n.sqrt(), "mean {mean}");
    assert!((sd / sigma_o - 1.0).abs() < 0.03, "sd {sd}");
}

#[test]
fn synthesis_is_deterministic_per_seed() {
    let times = [1.0, 2.0, 3.0];
    let q = QuantileConfig::default();
    let a = data::synthesize(&truth(0.05), &cfg(), &q, &times, 5, CellLine::V79).unwrap();
    let b = data::synthesize(&truth(0.05), &cfg(), &q, &times, 5, CellLine::V79).unwrap();
    let c = data::synthesize(&truth(0.05), &cfg(), &q, &times, 6, CellLine::V79).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

/// With almost no observation noise the likelihood peaks at the generating
/// parameters.
#[test]
fn near_noiseless_data_peak_at_truth() {
    let theta = truth(1e-8);
    let q = QuantileConfig {
        regularize: true,
        epsilon: 0.01,
        ..Default::default()
    };
    let times = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let ds = data::synthesize(&theta, &cfg(), &q, &times, 1, CellLine::V79).unwrap();
    let at_truth = log_likelihood(&theta, &ds, &cfg(), &q).unwrap();
    let base = theta.to_log_array();
    for k in [0, 1, 3] {
        for delta in [-0.05, 0.05] {
            let mut v = base;
            v[k] += delta;
            let ll = log_likelihood(&ModelParams::from_log_array(v), &ds, &cfg(), &q).unwrap();
            assert!(ll < at_truth, "component {k}, shift {delta}");
        }
    }
}

#[test]
fn builtin_priors_match_cell_line_defaults() {
    let medians = |c: CellLine| data::builtin_priors(&c).unwrap().location.map(f64::exp);
    let close = |a: [f64; 4], b: [f64; 4]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(medians(CellLine::L5178Y), [1.4, 0.06, 1.0, 0.264]));
    assert!(close(medians(CellLine::V79), [1.04, 0.06, 1.0, 0.403]));
    assert!(close(medians(CellLine::B16), [0.9, 0.09, 1.0, 0.733]));
    assert_eq!(data::builtin_priors(&CellLine::V79).unwrap().scale, [1.0, 1.0, 5.0, 1.0]);
    assert!(data::builtin_priors(&CellLine::Custom("HeLa".into())).is_err());
    assert_eq!("v79".parse::<CellLine>().unwrap(), CellLine::V79);
    assert_eq!(CellLine::L5178Y.to_string(), "L-5178Y");
}
