use std::path::{Path, PathBuf};

use impact_core::cotm::CotmModel;
use impact_core::crossbar::{CrossbarTile, TileGrid};
use impact_core::data::LabeledSet;
use impact_core::mapper::{TuneReport, TuneSummary};
use impact_core::metrics::{area_mm2, throughput, EnergyLedger, LedgerSummary, Throughput};
use impact_core::model_file;
use impact_core::pipeline::{evaluate_golden, load_mapping, map_model, save_mapping, Evaluation, MANIFEST_FILE};
use impact_core::trainer::{train_with_progress, EpochLog};
use serde::Serialize;

use crate::config::{DeviceFile, ExperimentConfig, SweepParam};
use crate::error::{CliError, CliResult};
use crate::report::{digest_file, digest_files, write_report, write_text, InputDigest};

fn config_digest(path: Option<&Path>) -> CliResult<Vec<InputDigest>> {
    path.map(digest_file).into_iter().collect()
}

fn load_model(path: &Path) -> CliResult<CotmModel> {
    model_file::load(path).map_err(|e| CliError::Usage(format!("--model: {e}")))
}

fn csv_file(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(path).map_err(|e| CliError::Usage(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(f))
}

#[derive(Debug, Serialize)]
struct TrainResult {
    model: PathBuf,
    samples: usize,
    literals: usize,
    classes: usize,
    final_test_accuracy: Option<f64>,
    epochs: Vec<EpochLog>,
}

pub fn train(cfg: &ExperimentConfig, config_path: Option<&Path>, out: Option<PathBuf>) -> CliResult<()> {
    let train_set = cfg.load_split(true)?;
    let test_files = cfg.dataset_files(false).ok();
    let test_set = test_files.as_ref().map(|_| cfg.load_split(false)).transpose()?;
    let mut inputs = config_digest(config_path)?;
    inputs.extend(digest_files(cfg.dataset_files(true)?.iter().chain(test_files.iter().flatten()).map(PathBuf::as_path))?);

    let outcome = train_with_progress(&train_set, &cfg.train, test_set.as_ref(), |e| {
        let eval = e.eval_accuracy.map_or(String::new(), |a| format!(" test {a:.4}"));
        eprintln!("epoch {:>3}: train {:.4}{eval} include {:.4} ({:.1} s)", e.epoch, e.train_accuracy, e.include_fraction, e.seconds);
    })?;
    let model_path = out.unwrap_or_else(|| cfg.output_dir.join("model.cotm"));
    write_text(&model_path, &model_file::to_string(&outcome.model))?;

    let mut log = csv::Writer::from_writer(csv_file(&cfg.output_dir.join("train_log.csv"))?);
    log.write_record(["epoch", "train_accuracy", "test_accuracy", "include_fraction"])?;
    for e in &outcome.log.epochs {
        let test = e.eval_accuracy.map_or(String::new(), |a| a.to_string());
        log.write_record([e.epoch.to_string(), e.train_accuracy.to_string(), test, e.include_fraction.to_string()])?;
    }
    log.flush()?;

    let result = TrainResult {
        model: model_path.clone(),
        samples: outcome.log.samples,
        literals: outcome.log.literals,
        classes: outcome.log.classes,
        final_test_accuracy: outcome.log.epochs.last().and_then(|e| e.eval_accuracy),
        epochs: outcome.log.epochs,
    };
    write_report(&cfg.output_dir.join("train_report.json"), "train", cfg, inputs, result)?;
    println!("wrote {}", model_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct TileInfo {
    file: String,
    rows: usize,
    cols: usize,
    area_mm2: f64,
}

fn tile_infos(grid: &TileGrid<CrossbarTile>, files: &[Vec<String>], cfg: &ExperimentConfig) -> Vec<TileInfo> {
    grid.tiles
        .iter()
        .flatten()
        .zip(files.iter().flatten())
        .map(|(t, f)| TileInfo {
            file: f.clone(),
            rows: t.rows(),
            cols: t.cols(),
            area_mm2: area_mm2(t.rows(), t.cols(), &cfg.energy),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct MapResult {
    shift: i64,
    levels: usize,
    geometry_rows: usize,
    geometry_cols: usize,
    clause_tiles: Vec<TileInfo>,
    class_tiles: Vec<TileInfo>,
    stages: Vec<TuneSummary>,
    weight_cost: f64,
    programming: LedgerSummary,
}

fn write_stage(dir: &Path, report: &TuneReport) -> CliResult<()> {
    report.save(&dir.join(format!("{}.csv", report.stage)), &dir.join(format!("{}_summary.json", report.stage)))?;
    let program = report.histogram(|c| c.program);
    let erase = report.histogram(|c| c.erase);
    let mut w = csv::Writer::from_writer(csv_file(&dir.join(format!("{}_histogram.csv", report.stage)))?);
    w.write_record(["pulses", "program_cells", "erase_cells"])?;
    for n in 0..program.len().max(erase.len()) {
        let get = |h: &[usize]| h.get(n).copied().unwrap_or(0).to_string();
        w.write_record([n.to_string(), get(&program), get(&erase)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn map(cfg: &ExperimentConfig, config_path: Option<&Path>, model_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let model = load_model(model_path)?;
    let mut inputs = config_digest(config_path)?;
    inputs.push(digest_file(model_path)?);
    let device = cfg.device_model()?;
    let mapped = map_model(&model, &device, &cfg.map_options())?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.join("mapping"));
    save_mapping(&mapped, &dir)?;
    let saved = load_mapping(&dir)?;
    for r in mapped.reports() {
        write_stage(&dir, r)?;
    }
    let result = MapResult {
        shift: mapped.shift,
        levels: mapped.segments.levels,
        geometry_rows: cfg.mapping.geometry.max_rows,
        geometry_cols: cfg.mapping.geometry.max_cols,
        clause_tiles: tile_infos(&mapped.clause_tiles, &saved.manifest.clause_files, cfg),
        class_tiles: tile_infos(&mapped.class_tiles, &saved.manifest.class_files, cfg),
        stages: mapped.reports().map(TuneReport::summary).collect(),
        weight_cost: mapped.weight_cost(),
        programming: mapped.programming_ledger().summary(&cfg.energy),
    };
    let encode_cost = mapped.encode.cost();
    let weight_cost = result.weight_cost;
    write_report(&dir.join("map_report.json"), "map", cfg, inputs, result)?;
    println!("wrote {}", dir.join(MANIFEST_FILE).display());
    let ceiling = cfg.mapping.max_cost;
    if encode_cost > ceiling || weight_cost > ceiling {
        return Err(CliError::NonConvergence(format!(
            "tuning left {:.3}% of action cells and {:.3}% of weight cells outside tolerance (ceiling {:.3}%)",
            100.0 * encode_cost,
            100.0 * weight_cost,
            100.0 * ceiling
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct InferResult {
    mode: &'static str,
    samples: usize,
    accuracy: f64,
    golden_accuracy: Option<f64>,
    agreement_with_golden: Option<f64>,
    energy: Option<LedgerSummary>,
    throughput: Option<Throughput>,
}

fn agreement(a: &Evaluation, b: &Evaluation) -> f64 {
    let same = a.predictions.iter().zip(&b.predictions).filter(|(x, y)| x == y).count();
    same as f64 / a.samples.max(1) as f64
}

fn write_predictions(path: &Path, set: &LabeledSet, eval: &Evaluation) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(csv_file(path)?);
    w.write_record(["index", "label", "prediction"])?;
    for (i, (l, p)) in set.labels.iter().zip(&eval.predictions).enumerate() {
        w.write_record([i.to_string(), l.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn infer(
    cfg: &ExperimentConfig,
    config_path: Option<&Path>,
    model_path: Option<&Path>,
    tiles: Option<&Path>,
    golden_only: bool,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let set = cfg.load_split(false)?;
    let mut inputs = config_digest(config_path)?;
    inputs.extend(digest_files(cfg.dataset_files(false)?.iter().map(PathBuf::as_path))?);
    let model = model_path.map(load_model).transpose()?;
    if let Some(p) = model_path {
        inputs.push(digest_file(p)?);
    }
    let golden = model.as_ref().map(|m| evaluate_golden(m, &set)).transpose()?;
    let out = out.unwrap_or_else(|| cfg.output_dir.join("infer_report.json"));
    let predictions_path = out.with_file_name("predictions.csv");

    let result = if golden_only {
        let golden = golden.ok_or_else(|| CliError::Usage("--golden needs --model".into()))?;
        write_predictions(&predictions_path, &set, &golden)?;
        InferResult {
            mode: "golden",
            samples: golden.samples,
            accuracy: golden.accuracy,
            golden_accuracy: Some(golden.accuracy),
            agreement_with_golden: Some(1.0),
            energy: None,
            throughput: None,
        }
    } else {
        let dir = tiles.ok_or_else(|| CliError::Usage("--tiles is required unless --golden is given".into()))?;
        let saved = load_mapping(dir)?;
        inputs.push(digest_file(&dir.join(MANIFEST_FILE))?);
        let device = cfg.device_model()?;
        let engine = saved.engine(&device, &cfg.read, &cfg.energy)?;
        let mut ledger = EnergyLedger::new();
        let eval = engine.evaluate(&set, Some(&mut ledger))?;
        write_predictions(&predictions_path, &set, &eval)?;
        ledger.write_csv(csv_file(&out.with_file_name("energy_ledger.csv"))?, &cfg.energy)?;
        let area: f64 = saved
            .clause_tiles
            .iter()
            .chain(saved.class_tiles.iter())
            .map(|t| area_mm2(t.rows(), t.cols(), &cfg.energy))
            .sum();
        InferResult {
            mode: "analog",
            samples: eval.samples,
            accuracy: eval.accuracy,
            golden_accuracy: golden.as_ref().map(|g| g.accuracy),
            agreement_with_golden: golden.as_ref().map(|g| agreement(&eval, g)),
            energy: Some(ledger.summary(&cfg.energy)),
            throughput: Some(throughput(engine.columns(), area, &ledger, &cfg.read, &cfg.energy)),
        }
    };
    println!("{} accuracy {:.4} on {} samples", result.mode, result.accuracy, result.samples);
    write_report(&out, "infer", cfg, inputs, result)
}

fn apply_sweep(cfg: &mut ExperimentConfig, param: SweepParam, value: f64) -> CliResult<()> {
    let band = |v: f64| {
        if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
            Ok(v as u32)
        } else {
            Err(CliError::Usage(format!("tolerance band must be a non-negative integer, got {v}")))
        }
    };
    match param {
        SweepParam::C2cSigma => {
            let ratio = cfg.variability.c2c_sigma_hcs / cfg.variability.c2c_sigma_lcs;
            cfg.variability.c2c_sigma_lcs = value;
            cfg.variability.c2c_sigma_hcs = if ratio.is_finite() { value * ratio } else { value };
        }
        SweepParam::D2dSigma => cfg.variability.d2d_sigma = value,
        SweepParam::CsaOffset => cfg.read.csa_offset_sd = value,
        SweepParam::FinetuneBand => cfg.mapping.tune.finetune_band = band(value)?,
        SweepParam::PretuneBand => cfg.mapping.tune.pretune_band = band(value)?,
    }
    Ok(())
}

pub fn sweep(cfg: &ExperimentConfig, config_path: Option<&Path>, model_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let param = cfg.sweep.param.ok_or_else(|| CliError::Usage("--param is required".into()))?;
    if cfg.sweep.values.is_empty() || cfg.sweep.seeds.is_empty() {
        return Err(CliError::Usage("sweep grid is empty: give at least one --values entry and one --seeds entry".into()));
    }
    let model = load_model(model_path)?;
    let set = cfg.load_split(false)?;
    let golden = evaluate_golden(&model, &set)?;
    let mut inputs = config_digest(config_path)?;
    inputs.push(digest_file(model_path)?);
    inputs.extend(digest_files(cfg.dataset_files(false)?.iter().map(PathBuf::as_path))?);

    let out = out.unwrap_or_else(|| cfg.output_dir.join("sweep.csv"));
    let mut w = csv::Writer::from_writer(csv_file(&out)?);
    w.write_record([
        "param",
        "value",
        "seed",
        "accuracy",
        "golden_accuracy",
        "agreement",
        "clause_pj_per_datapoint",
        "class_pj_per_datapoint",
        "encode_cost",
        "weight_cost",
    ])?;
    let name = serde_json::to_value(param)?.as_str().unwrap_or_default().to_string();
    for &value in &cfg.sweep.values {
        for &seed in &cfg.sweep.seeds {
            let mut point = cfg.clone();
            point.seed = seed;
            apply_sweep(&mut point, param, value)?;
            let point = point.resolve()?;
            let device = point.device_model()?;
            let mapped = map_model(&model, &device, &point.map_options())?;
            let engine = impact_core::pipeline::AnalogEngine::new(&mapped, &device, &point.read, &point.energy)?;
            let mut ledger = EnergyLedger::new();
            let eval = engine.evaluate(&set, Some(&mut ledger))?;
            let (clause_pj, class_pj) = ledger.datapoint_energy_pj();
            w.write_record([
                name.clone(),
                value.to_string(),
                seed.to_string(),
                eval.accuracy.to_string(),
                golden.accuracy.to_string(),
                agreement(&eval, &golden).to_string(),
                clause_pj.to_string(),
                class_pj.to_string(),
                mapped.encode.cost().to_string(),
                mapped.weight_cost().to_string(),
            ])?;
            w.flush()?;
            eprintln!("{name}={value} seed={seed}: accuracy {:.4}", eval.accuracy);
        }
    }
    write_report(&out.with_extension("json"), "sweep", cfg, inputs, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    clause_tiles: Vec<TileInfo>,
    class_tiles: Vec<TileInfo>,
    clause_area_mm2: f64,
    class_area_mm2: f64,
    columns: usize,
    throughput: Throughput,
    clause_pj_per_datapoint: Option<f64>,
    class_pj_per_datapoint: Option<f64>,
    reference_clause_pj_per_datapoint: f64,
    reference_class_pj_per_datapoint: f64,
}

fn energy_from_report(path: &Path) -> CliResult<(f64, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("--infer-report: cannot read `{}`: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let energy = &v["result"]["energy"];
    match (energy["clause_pj_per_datapoint"].as_f64(), energy["class_pj_per_datapoint"].as_f64()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(CliError::Usage(format!("--infer-report: `{}` has no analog energy summary", path.display()))),
    }
}

pub fn report(cfg: &ExperimentConfig, tiles: &Path, infer_report: Option<&Path>, out: Option<PathBuf>) -> CliResult<()> {
    let saved = load_mapping(tiles)?;
    let mut inputs = vec![digest_file(&tiles.join(MANIFEST_FILE))?];
    let energy = infer_report.map(energy_from_report).transpose()?;
    if let Some(p) = infer_report {
        inputs.push(digest_file(p)?);
    }
    let clause_tiles = tile_infos(&saved.clause_tiles, &saved.manifest.clause_files, cfg);
    let class_tiles = tile_infos(&saved.class_tiles, &saved.manifest.class_files, cfg);
    let clause_area_mm2 = clause_tiles.iter().map(|t| t.area_mm2).sum();
    let class_area_mm2: f64 = class_tiles.iter().map(|t| t.area_mm2).sum();
    let columns = clause_tiles.iter().chain(&class_tiles).map(|t| t.cols).sum();
    let tp = throughput(columns, clause_area_mm2 + class_area_mm2, &EnergyLedger::new(), &cfg.read, &cfg.energy);
    let summary = Summary {
        clause_tiles,
        class_tiles,
        clause_area_mm2,
        class_area_mm2,
        columns,
        throughput: tp,
        clause_pj_per_datapoint: energy.map(|e| e.0),
        class_pj_per_datapoint: energy.map(|e| e.1),
        reference_clause_pj_per_datapoint: cfg.energy.reference_clause_pj_per_datapoint,
        reference_class_pj_per_datapoint: cfg.energy.reference_class_pj_per_datapoint,
    };
    let out = out.unwrap_or_else(|| cfg.output_dir.join("summary.json"));
    let mut w = csv::Writer::from_writer(csv_file(&out.with_extension("csv"))?);
    w.write_record(["metric", "value", "reference"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let rows = [
        ("clause_area_mm2", Some(summary.clause_area_mm2), None),
        ("class_area_mm2", Some(summary.class_area_mm2), None),
        ("gops", Some(summary.throughput.gops), Some(cfg.energy.reference_gops)),
        ("clause_pj_per_datapoint", summary.clause_pj_per_datapoint, Some(summary.reference_clause_pj_per_datapoint)),
        ("class_pj_per_datapoint", summary.class_pj_per_datapoint, Some(summary.reference_class_pj_per_datapoint)),
    ];
    for (name, value, reference) in rows {
        w.write_record([name.to_string(), opt(value), opt(reference)])?;
    }
    w.flush()?;
    write_report(&out, "report", cfg, inputs, summary)?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn dump_device_config(out: Option<&Path>) -> CliResult<()> {
    let text = toml::to_string_pretty(&DeviceFile::default()).expect("device file serializes to TOML");
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
