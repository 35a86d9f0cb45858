use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use e2c_core::config::RunConfig;
use e2c_core::dataset::{check_unique_keys, split_in_out, FeatureMatrix, FeatureSchema, RawRecord};
use e2c_core::evaluation::{evaluate as build_report, EvalRow};
use e2c_core::forest::{fit_forest, Forest};
use e2c_core::importance::{mdi_importance, permutation_importance, ImportanceReport, Permutation};
use e2c_core::metrics::{r_squared_of, rmse, PairedSeries};
use e2c_core::model_file::ModelBundle;
use e2c_core::snapshot::{augment_csv, complete_records, read_snapshots, write_snapshots, Snapshot};
use e2c_core::synth::{generate, SynthConfig};
use e2c_core::{Error, Result};

use crate::Common;

/// Features shown in the importance chart file.
const CHART_TOP: usize = 10;

/// Defaults, then the config file, then flags.
fn load_config(common: &Common, input: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if input.is_some() {
        cfg.input = input;
    }
    if common.out_dir.is_some() {
        cfg.out_dir = common.out_dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn input_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.input
        .as_deref()
        .ok_or_else(|| Error::Domain("no input file: pass --input or set `input` in the config".into()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Output> {
        let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(Output {
            dir,
            header: cfg.as_comment(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a CSV body preceded by the config comment block.
    fn csv(&self, name: &str, body: &str) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        w.write_all(self.header.as_bytes())?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn raw(&self, name: &str, body: &str) -> Result<()> {
        fs::write(self.path(name), body)?;
        Ok(())
    }

    /// The only file that carries timestamps.
    fn metadata(&self, command: &str, cfg: &RunConfig, started: &str, extra: &[(&str, String)]) -> Result<()> {
        let mut s = format!(
            "command = {command}\nversion = {}\nstarted = {started}\nfinished = {}\n",
            env!("CARGO_PKG_VERSION"),
            now()
        );
        for (k, v) in extra {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&cfg.to_text());
        self.raw("metadata.txt", &s)
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn load_records(path: &Path, cfg: &RunConfig) -> Result<(Vec<Snapshot>, Vec<RawRecord>)> {
    let snapshots = read_snapshots(open(path)?)?;
    let (records, dropped) = complete_records(&snapshots, &cfg.model)?;
    if dropped > 0 {
        log::warn!("dropped {dropped} incomplete rows of {}", snapshots.len());
    }
    Ok((snapshots, records))
}

fn load_bundle(path: &Path) -> Result<ModelBundle> {
    ModelBundle::parse(&fs::read_to_string(path)?)
}

pub fn spread(input: Option<PathBuf>, common: &Common) -> Result<()> {
    let started = now();
    let cfg = load_config(common, input)?;
    let out = Output::new(&cfg)?;
    let mut w = BufWriter::new(File::create(out.path("spreads.csv"))?);
    w.write_all(out.header.as_bytes())?;
    let failed = augment_csv(open(input_path(&cfg)?)?, &mut w, &cfg.model)?;
    w.flush()?;
    if failed > 0 {
        log::warn!("{failed} rows have no spreads; see the reason column");
    }
    out.metadata("spread", &cfg, &started, &[("failed_rows", failed.to_string())])
}

pub fn synth(firms: usize, dates: usize, bayes_r2: f64, missing_rate: f64, common: &Common) -> Result<()> {
    let started = now();
    let cfg = load_config(common, None)?;
    let synth_cfg = SynthConfig {
        firms,
        dates,
        seed: cfg.seed,
        bayes_r2,
        missing_rate,
    };
    let panel = generate(&synth_cfg, &cfg.model)?;
    let out = Output::new(&cfg)?;
    let mut body = Vec::new();
    write_snapshots(&mut body, &panel.snapshots)?;
    out.csv("synth.csv", &String::from_utf8(body).expect("csv output is utf-8"))?;
    out.metadata(
        "synth",
        &cfg,
        &started,
        &[
            ("firms", firms.to_string()),
            ("dates", dates.to_string()),
            ("bayes_r2", bayes_r2.to_string()),
            ("missing_rate", missing_rate.to_string()),
            ("noise_scale", panel.noise_scale.to_string()),
        ],
    )
}

fn fit_metrics(forest: &Forest, m: &FeatureMatrix) -> Result<(f64, f64)> {
    let pred = forest.predict_rows(&m.view())?;
    let r2 = r_squared_of(&m.labels, &pred)?;
    let series = PairedSeries::new(m.keys.clone(), m.labels.clone(), pred)?;
    Ok((r2, rmse(&series)))
}

pub fn train(input: Option<PathBuf>, common: &Common) -> Result<()> {
    let started = now();
    let cfg = load_config(common, input)?;
    let (_, records) = load_records(input_path(&cfg)?, &cfg)?;
    if records.is_empty() {
        return Err(Error::Domain("no complete rows to train on".into()));
    }
    let keys: Vec<_> = records.iter().map(|r| r.key.clone()).collect();
    check_unique_keys(&keys)?;

    let schema = FeatureSchema::fit(&records);
    let (matrix, _) = schema.transform(&records)?;
    let split = split_in_out(&matrix, cfg.firm_fraction, cfg.date_fraction, cfg.seed)?;
    if split.in_sample.is_empty() {
        return Err(Error::Domain("the split leaves no in-sample rows".into()));
    }
    if split.out_of_sample.is_empty() {
        return Err(Error::Domain(
            "the split leaves no out-of-sample rows; raise firm_fraction or date_fraction".into(),
        ));
    }

    let mut params = cfg.forest_params();
    let p = matrix.n_features();
    if params.features_per_node > p {
        log::warn!("features_per_node {} exceeds the {p} features; using {p}", params.features_per_node);
        params.features_per_node = p;
    }
    let forest = fit_forest(&split.in_sample.view(), &params, common.workers)?;
    let (r2_in, rmse_in) = fit_metrics(&forest, &split.in_sample)?;
    let (r2_out, rmse_out) = fit_metrics(&forest, &split.out_of_sample)?;

    let bundle = ModelBundle {
        model: cfg.model,
        schema,
        split: split.manifest,
        forest,
    };
    let out = Output::new(&cfg)?;
    out.raw("model.e2c", &bundle.to_text())?;
    out.csv("split.csv", &bundle.split.to_csv())?;
    out.csv(
        "train_metrics.csv",
        &format!(
            "sample,obs,r_squared,rmse\nin,{},{r2_in},{rmse_in}\nout,{},{r2_out},{rmse_out}\n",
            split.in_rows.len(),
            split.out_rows.len()
        ),
    )?;
    out.metadata("train", &cfg, &started, &[])?;
    println!("in-sample R² {r2_in:.4} ({} rows)", split.in_rows.len());
    println!("out-of-sample R² {r2_out:.4} ({} rows)", split.out_rows.len());
    Ok(())
}

/// Encodes `records` with the bundle's schema. Categories the model never
/// saw are an error unless `lenient`.
fn encode_for(bundle: &ModelBundle, records: &[RawRecord], lenient: bool) -> Result<FeatureMatrix> {
    let (matrix, warnings) = bundle.schema.transform(records)?;
    if !warnings.is_empty() && !lenient {
        return Err(Error::Incompatible(format!(
            "{}; pass --lenient to encode them as the reference category",
            warnings.join(", ")
        )));
    }
    Ok(matrix)
}

pub fn evaluate(model: &Path, input: Option<PathBuf>, lenient: bool, common: &Common) -> Result<()> {
    let started = now();
    let cfg = load_config(common, input)?;
    let bundle = load_bundle(model)?;
    let snapshots = read_snapshots(open(input_path(&cfg)?)?)?;

    let mut records = Vec::new();
    let mut creditgrades = Vec::new();
    for s in &snapshots {
        let rec = s.to_record(&bundle.model)?;
        if !rec.is_complete() {
            continue;
        }
        match s.derive(&bundle.model) {
            Ok(d) => {
                records.push(rec);
                creditgrades.push(d.creditgrades_bps);
            }
            Err(e) => log::warn!("line {}: skipped: {e}", s.line),
        }
    }
    let dropped = snapshots.len() - records.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} incomplete rows of {}", snapshots.len());
    }
    if records.is_empty() {
        return Err(Error::Domain("no complete rows to evaluate".into()));
    }
    let keys: Vec<_> = records.iter().map(|r| r.key.clone()).collect();
    check_unique_keys(&keys)?;

    let matrix = encode_for(&bundle, &records, lenient)?;
    let forest = bundle.forest.predict_rows(&matrix.view())?;
    let rows: Vec<EvalRow> = records
        .iter()
        .zip(creditgrades)
        .zip(forest)
        .map(|((r, cg), f)| EvalRow {
            key: r.key.clone(),
            cds: r.cds5y_bps.expect("complete record"),
            e2c: r.e2c_bps.expect("complete record"),
            creditgrades: cg,
            forest: f,
            rating: r.rating().expect("complete record"),
            sector: r.sector.clone().expect("complete record"),
            in_sample: bundle.split.is_in_sample(&r.key),
        })
        .collect();
    if rows.iter().all(|r| r.in_sample) {
        return Err(Error::Domain("no out-of-sample rows to evaluate against".into()));
    }

    let report = build_report(&rows)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let out = Output::new(&cfg)?;
    for (name, body) in report.files(&rows) {
        out.csv(name, &body)?;
    }
    out.metadata(
        "evaluate",
        &cfg,
        &started,
        &[("model", model.display().to_string()), ("rows", rows.len().to_string())],
    )
}

pub fn importance(model: &Path, input: Option<PathBuf>, common: &Common) -> Result<()> {
    let started = now();
    let cfg = load_config(common, input)?;
    let bundle = load_bundle(model)?;
    let (_, records) = load_records(input_path(&cfg)?, &cfg)?;
    let matrix = encode_for(&bundle, &records, false)?;
    let (in_rows, _) = bundle.split.partition(&matrix.keys);
    if in_rows.len() != bundle.forest.n_train() {
        return Err(Error::Incompatible(format!(
            "{} in-sample rows, but the forest was trained on {}; use the training file",
            in_rows.len(),
            bundle.forest.n_train()
        )));
    }
    let train = matrix.select(&in_rows);
    let view = train.view();
    let mdi = mdi_importance(&bundle.forest);
    let vi = permutation_importance(&bundle.forest, &view, Permutation::Shuffle { seed: cfg.seed })?;
    if vi.trees_skipped > 0 {
        log::warn!("{} trees skipped: out-of-bag R² not positive", vi.trees_skipped);
    }
    let report = ImportanceReport::new(train.column_names(), mdi, vi.scores)?;
    let out = Output::new(&cfg)?;
    out.csv("importance.csv", &report.to_csv())?;
    out.csv("importance_chart.csv", &report.chart_csv(CHART_TOP))?;
    out.metadata(
        "importance",
        &cfg,
        &started,
        &[
            ("model", model.display().to_string()),
            ("trees_used", vi.trees_used.to_string()),
            ("trees_skipped", vi.trees_skipped.to_string()),
        ],
    )
}
