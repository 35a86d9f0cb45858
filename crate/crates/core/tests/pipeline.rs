use e2c_core::dataset::{encode_features, split_in_out, E2C_COLUMN};
use e2c_core::forest::{fit_forest, ForestParams};
use e2c_core::metrics::{r_squared, rmse, PairedSeries};
use e2c_core::snapshot::complete_records;
use e2c_core::structural::ModelParams;
use e2c_core::synth::{generate, SynthConfig};

fn run(bayes_r2: f64, seed: u64) -> (f64, f64, f64) {
    let params = ModelParams::default();
    let cfg = SynthConfig {
        firms: 80,
        dates: 40,
        seed,
        bayes_r2,
        missing_rate: 0.0,
    };
    let panel = generate(&cfg, &params).unwrap();
    let (records, _) = complete_records(&panel.snapshots, &params).unwrap();
    let m = encode_features(&records).unwrap();
    let split = split_in_out(&m, 0.2, 0.2, seed).unwrap();
    let fp = ForestParams {
        n_trees: 30,
        seed,
        ..ForestParams::default()
    };
    let forest = fit_forest(&split.in_sample.view(), &fp, None).unwrap();
    let oos = &split.out_of_sample;
    let pred = forest.predict_rows(&oos.view()).unwrap();
    let e2c: Vec<f64> = (0..oos.n_rows()).map(|i| oos.row(i)[E2C_COLUMN]).collect();
    let series = |p: Vec<f64>| PairedSeries::new(oos.keys.clone(), oos.labels.clone(), p).unwrap();
    let forest_series = series(pred);
    let e2c_series = series(e2c);
    (
        r_squared(&forest_series).unwrap(),
        rmse(&forest_series),
        rmse(&e2c_series),
    )
}

#[test]
fn noiseless_panel_is_learned_out_of_sample() {
    let (r2, _, _) = run(1.0, 3);
    assert!(r2 >= 0.95, "R² {r2}");
}

#[test]
fn forest_beats_the_raw_e2c_spread() {
    for seed in [1, 2] {
        let (r2, forest, e2c) = run(0.9, seed);
        assert!(r2 > 0.7, "seed {seed}: R² {r2}");
        assert!(forest < e2c, "seed {seed}: forest rmse {forest} vs e2c {e2c}");
    }
}
