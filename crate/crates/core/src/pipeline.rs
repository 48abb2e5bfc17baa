//! Whole-model mapping and analog inference.

use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cotm::{argmax_lowest, ClassScores, ClauseVector, CotmModel, LiteralVector};
use crate::crossbar::{
    plan_tiling, tiled_class_compute_observed, tiled_clause_compute_observed, CrossbarTile, Digitizer, Geometry, PreparedTile,
    ReadConfig, TileGrid, TileMode, TilingPlan,
};
use crate::data::LabeledSet;
use crate::device::{DeviceModel, MICRO};
use crate::error::{Error, Result};
use crate::mapper::{
    encode_actions, finetune, pretune, shift_weights, write_actions_exact, write_weights_exact, CellTune, SegmentMap, TuneConfig,
    TuneReport, UnipolarWeights,
};
use crate::metrics::{EnergyConstants, EnergyLedger, EventKind, TileKind};
use crate::rng::{SeedTree, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapOptions {
    /// Write every cell straight to its target instead of pulsing.
    pub exact: bool,
    pub skip_finetune: bool,
    pub tune: TuneConfig,
    pub read: ReadConfig,
    pub geometry: Geometry,
    /// Root seed of the D2D populations.
    pub seed: u64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            exact: false,
            skip_finetune: false,
            tune: TuneConfig::default(),
            read: ReadConfig::default(),
            geometry: Geometry::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedModel {
    pub plan: TilingPlan,
    pub clause_tiles: TileGrid<CrossbarTile>,
    pub class_tiles: TileGrid<CrossbarTile>,
    pub segments: SegmentMap,
    pub weights: UnipolarWeights,
    pub shift: i64,
    pub encode: TuneReport,
    pub pretune: Option<TuneReport>,
    pub finetune: Option<TuneReport>,
}

impl MappedModel {
    pub fn reports(&self) -> impl Iterator<Item = &TuneReport> {
        std::iter::once(&self.encode).chain(&self.pretune).chain(&self.finetune)
    }

    /// Fraction of class cells outside tolerance after the last stage run.
    pub fn weight_cost(&self) -> f64 {
        self.finetune.as_ref().or(self.pretune.as_ref()).map_or(0.0, TuneReport::cost)
    }

    pub fn programming_ledger(&self) -> EnergyLedger {
        let mut l = EnergyLedger::new();
        for r in self.reports() {
            l.add(EventKind::ProgramPulse, r.program_pulses());
            l.add(EventKind::ErasePulse, r.erase_pulses());
        }
        l
    }
}

fn tile_seed(root: u64, tile: u64) -> u64 {
    SeedTree::new(root).key(Stream::D2d, tile)
}

fn blank_tile(mode: TileMode, rows: usize, cols: usize, device: &DeviceModel, exact: bool, seed: u64) -> Result<CrossbarTile> {
    if exact {
        CrossbarTile::uniform(mode, rows, cols, device.config.erase_rail)
    } else {
        CrossbarTile::from_population(mode, device.sample_population(rows, cols, seed)?)
    }
}

fn offset_cells(report: TuneReport, row0: usize, col0: usize, out: &mut Vec<CellTune>) {
    out.extend(report.cells.into_iter().map(|c| CellTune {
        row: c.row + row0 as u32,
        col: c.col + col0 as u32,
        ..c
    }));
}

/// Tiles the model, samples fresh (erased) device populations and programs
/// them: actions by Boolean encoding, weights by pre-tune then fine-tune.
pub fn map_model(model: &CotmModel, device: &DeviceModel, opts: &MapOptions) -> Result<MappedModel> {
    opts.tune.validate()?;
    opts.read.validate()?;
    let plan = plan_tiling(model.literals(), model.clauses(), model.classes(), opts.geometry)?;
    let (weights, shift) = shift_weights(&model.weights);
    let segments = SegmentMap::new(weights.levels(), device, opts.read.v_read)?;

    let mut encode_cells = Vec::new();
    let mut tiles = Vec::new();
    for (rp, rows) in plan.literal_parts.iter().enumerate() {
        let mut row = Vec::new();
        for (cp, cols) in plan.clause_col_parts.iter().enumerate() {
            let id = (rp * plan.clause_col_parts.len() + cp) as u64;
            let mut tile = blank_tile(TileMode::BooleanClause, rows.len(), cols.len(), device, opts.exact, tile_seed(opts.seed, id))?;
            let am = model.actions.row_slice(rows.start, rows.end);
            let am = crate::cotm::ActionMatrix::from_fn(rows.len(), cols.len(), |i, j| am.get(i, cols.start + j));
            if opts.exact {
                write_actions_exact(&mut tile, &am, &segments)?;
            } else {
                let rep = encode_actions(&mut tile, &am, device, &opts.tune)?;
                offset_cells(rep, rows.start, cols.start, &mut encode_cells);
            }
            row.push(tile);
        }
        tiles.push(row);
    }
    let clause_tiles = TileGrid {
        row_parts: plan.literal_parts.clone(),
        col_parts: plan.clause_col_parts.clone(),
        tiles,
    };

    let (mut pre_cells, mut fine_cells) = (Vec::new(), Vec::new());
    let mut tiles = Vec::new();
    for (rp, rows) in plan.clause_row_parts.iter().enumerate() {
        let mut row = Vec::new();
        for (cp, cols) in plan.class_parts.iter().enumerate() {
            let id = (1u64 << 32) | (rp * plan.class_parts.len() + cp) as u64;
            let mut tile = blank_tile(TileMode::AnalogClass, rows.len(), cols.len(), device, opts.exact, tile_seed(opts.seed, id))?;
            let part = UnipolarWeights {
                classes: cols.len(),
                clauses: rows.len(),
                values: cols
                    .clone()
                    .flat_map(|k| rows.clone().map(move |j| (k, j)))
                    .map(|(k, j)| weights.get(k, j))
                    .collect(),
            };
            if opts.exact {
                write_weights_exact(&mut tile, &part, &segments)?;
            } else {
                let pre = pretune(&mut tile, &part, &segments, device, &opts.tune)?;
                offset_cells(pre, rows.start, cols.start, &mut pre_cells);
                if !opts.skip_finetune {
                    let fine = finetune(&mut tile, &part, &segments, device, &opts.tune)?;
                    offset_cells(fine, rows.start, cols.start, &mut fine_cells);
                }
            }
            row.push(tile);
        }
        tiles.push(row);
    }
    let class_tiles = TileGrid {
        row_parts: plan.clause_row_parts.clone(),
        col_parts: plan.class_parts.clone(),
        tiles,
    };

    let report = |stage: &str, cells: Vec<CellTune>| TuneReport { stage: stage.into(), cells };
    Ok(MappedModel {
        plan,
        clause_tiles,
        class_tiles,
        segments,
        weights,
        shift,
        encode: report("encode", encode_cells),
        pretune: (!opts.exact).then(|| report("pretune", pre_cells)),
        finetune: (!opts.exact && !opts.skip_finetune).then(|| report("finetune", fine_cells)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub prediction: usize,
    pub clauses: ClauseVector,
    /// Digitized class sums of the shifted weights.
    pub scores: ClassScores,
    /// Raw class-column currents, summed over row parts.
    pub currents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Mapped tiles ready for repeated inference.
pub struct AnalogEngine {
    clause: TileGrid<PreparedTile>,
    class: TileGrid<PreparedTile>,
    /// Per clause tile, number of HCS cells in each row.
    hcs_per_row: Vec<Vec<Vec<u32>>>,
    /// Per class tile, read-back level of each cell (row-major).
    class_levels: Vec<Vec<Vec<u32>>>,
    digitizer: Digitizer,
    read: ReadConfig,
    consts: EnergyConstants,
}

impl AnalogEngine {
    pub fn new(mapped: &MappedModel, device: &DeviceModel, read: &ReadConfig, consts: &EnergyConstants) -> Result<Self> {
        Self::from_tiles(&mapped.clause_tiles, &mapped.class_tiles, &mapped.segments, device, read, consts)
    }

    pub fn from_tiles(
        clause_tiles: &TileGrid<CrossbarTile>,
        class_tiles: &TileGrid<CrossbarTile>,
        segments: &SegmentMap,
        device: &DeviceModel,
        read: &ReadConfig,
        consts: &EnergyConstants,
    ) -> Result<Self> {
        read.validate()?;
        consts.validate()?;
        if clause_tiles.cols() != class_tiles.rows() {
            return Err(Error::Partition(format!(
                "clause tiles produce {} clauses, class tiles take {}",
                clause_tiles.cols(),
                class_tiles.rows()
            )));
        }
        let v = read.v_read;
        let hcs_per_row = clause_tiles
            .tiles
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| {
                        (0..t.rows())
                            .map(|r| (0..t.cols()).filter(|&c| t.cell(r, c).g > MICRO).count() as u32)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let class_levels = class_tiles
            .tiles
            .iter()
            .map(|row| row.iter().map(|t| t.cells().iter().map(|c| segments.level(c.g, device) as u32).collect()).collect())
            .collect();
        Ok(Self {
            clause: clause_tiles.map(|t| t.prepare(device, v)),
            class: class_tiles.map(|t| t.prepare(device, v)),
            hcs_per_row,
            class_levels,
            digitizer: segments.digitizer(),
            read: read.clone(),
            consts: consts.clone(),
        })
    }

    pub fn clause_grid(&self) -> &TileGrid<PreparedTile> {
        &self.clause
    }

    pub fn class_grid(&self) -> &TileGrid<PreparedTile> {
        &self.class
    }

    pub fn digitizer(&self) -> &Digitizer {
        &self.digitizer
    }

    pub fn columns(&self) -> usize {
        self.clause.iter().map(PreparedTile::cols).sum::<usize>() + self.class.iter().map(PreparedTile::cols).sum::<usize>()
    }

    pub fn infer(&self, lit: &LiteralVector, event: u64) -> Result<Inference> {
        self.run(lit, event, None)
    }

    /// Inference that also charges every column read and cell event.
    pub fn infer_metered(&self, lit: &LiteralVector, event: u64, ledger: &mut EnergyLedger) -> Result<Inference> {
        self.run(lit, event, Some(ledger))
    }

    fn run(&self, lit: &LiteralVector, event: u64, mut ledger: Option<&mut EnergyLedger>) -> Result<Inference> {
        let (read, consts) = (&self.read, &self.consts);
        let clauses = tiled_clause_compute_observed(&self.clause, lit, read, event, |v| {
            if let Some(l) = ledger.as_deref_mut() {
                let cols = v.currents.len() as u64;
                let hcs: u64 = v.driven.iter().map(|&r| u64::from(self.hcs_per_row[v.row_part][v.col_part][r])).sum();
                l.add(EventKind::ReadCellHcs, hcs);
                l.add(EventKind::ReadCellLcs, v.driven.len() as u64 * cols - hcs);
                l.add(EventKind::CsaSense, cols);
                l.record_columns(TileKind::Clause, v.currents, read, consts);
            }
        })?;
        let mut currents = vec![0.0; self.class.cols()];
        let scores = tiled_class_compute_observed(&self.class, &clauses, &self.digitizer, |v| {
            let first = self.class.col_parts[v.col_part].start;
            for (acc, i) in currents[first..].iter_mut().zip(v.currents) {
                *acc += i;
            }
            if let Some(l) = ledger.as_deref_mut() {
                let levels = &self.class_levels[v.row_part][v.col_part];
                let cols = v.currents.len();
                for &r in v.driven {
                    for &lv in &levels[r * cols..(r + 1) * cols] {
                        l.add_analog_read(lv as usize, 1);
                    }
                }
                l.record_columns(TileKind::Class, v.currents, read, consts);
            }
        })?;
        if let Some(l) = ledger {
            l.finish_datapoint();
        }
        let prediction = argmax_lowest(&scores).ok_or(Error::Empty("class scores"))?;
        Ok(Inference {
            prediction,
            clauses,
            scores,
            currents,
        })
    }

    /// Runs every sample in parallel (event id = sample index). Predictions
    /// and ledger totals do not depend on the thread count.
    pub fn evaluate(&self, set: &LabeledSet, ledger: Option<&mut EnergyLedger>) -> Result<Evaluation> {
        let metered = ledger.is_some();
        let results = set
            .samples
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut local = EnergyLedger::new();
                let inf = if metered { self.infer_metered(x, i as u64, &mut local)? } else { self.infer(x, i as u64)? };
                Ok((inf.prediction, local))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut predictions = Vec::with_capacity(results.len());
        let mut total = EnergyLedger::new();
        for (p, l) in &results {
            predictions.push(*p);
            total.merge(l);
        }
        if let Some(ledger) = ledger {
            ledger.merge(&total);
        }
        Ok(score(predictions, &set.labels))
    }
}

pub fn score(predictions: Vec<usize>, labels: &[usize]) -> Evaluation {
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Evaluation {
        samples: predictions.len(),
        correct,
        accuracy: if predictions.is_empty() { 0.0 } else { correct as f64 / predictions.len() as f64 },
        predictions,
    }
}

/// Golden-model predictions for a whole set.
pub fn evaluate_golden(model: &CotmModel, set: &LabeledSet) -> Result<Evaluation> {
    let predictions = set.samples.par_iter().map(|x| model.predict(x)).collect::<Result<Vec<_>>>()?;
    Ok(score(predictions, &set.labels))
}

pub const MAPPING_FORMAT: &str = "impact-mapping/1";

/// Index of a saved mapping: partitions, segment map and tile file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingManifest {
    pub format: String,
    pub shift: i64,
    pub segments: SegmentMap,
    pub clause_row_parts: Vec<Range<usize>>,
    pub clause_col_parts: Vec<Range<usize>>,
    pub class_row_parts: Vec<Range<usize>>,
    pub class_col_parts: Vec<Range<usize>>,
    pub clause_files: Vec<Vec<String>>,
    pub class_files: Vec<Vec<String>>,
}

pub const MANIFEST_FILE: &str = "mapping.json";

fn save_grid(grid: &TileGrid<CrossbarTile>, dir: &Path, prefix: &str) -> Result<Vec<Vec<String>>> {
    grid.tiles
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, tile)| {
                    let name = format!("{prefix}_r{r}_c{c}.yfxt");
                    tile.save(&dir.join(&name))?;
                    Ok(name)
                })
                .collect()
        })
        .collect()
}

fn load_grid(dir: &Path, rows: &[Range<usize>], cols: &[Range<usize>], files: &[Vec<String>]) -> Result<TileGrid<CrossbarTile>> {
    let tiles = files
        .iter()
        .map(|row| row.iter().map(|name| CrossbarTile::load(&dir.join(name))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(TileGrid {
        row_parts: rows.to_vec(),
        col_parts: cols.to_vec(),
        tiles,
    })
}

/// Writes every tile snapshot and the manifest into `dir`.
pub fn save_mapping(mapped: &MappedModel, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = MappingManifest {
        format: MAPPING_FORMAT.into(),
        shift: mapped.shift,
        segments: mapped.segments.clone(),
        clause_row_parts: mapped.clause_tiles.row_parts.clone(),
        clause_col_parts: mapped.clause_tiles.col_parts.clone(),
        class_row_parts: mapped.class_tiles.row_parts.clone(),
        class_col_parts: mapped.class_tiles.col_parts.clone(),
        clause_files: save_grid(&mapped.clause_tiles, dir, "clause")?,
        class_files: save_grid(&mapped.class_tiles, dir, "class")?,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Tiles and manifest previously written by [`save_mapping`].
#[derive(Debug, Clone, PartialEq)]
pub struct SavedMapping {
    pub manifest: MappingManifest,
    pub clause_tiles: TileGrid<CrossbarTile>,
    pub class_tiles: TileGrid<CrossbarTile>,
}

pub fn load_mapping(dir: &Path) -> Result<SavedMapping> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: MappingManifest = serde_json::from_str(&text)?;
    if manifest.format != MAPPING_FORMAT {
        return Err(Error::Parse(format!("{}: unsupported format `{}`", path.display(), manifest.format)));
    }
    let clause_tiles = load_grid(dir, &manifest.clause_row_parts, &manifest.clause_col_parts, &manifest.clause_files)?;
    let class_tiles = load_grid(dir, &manifest.class_row_parts, &manifest.class_col_parts, &manifest.class_files)?;
    Ok(SavedMapping {
        manifest,
        clause_tiles,
        class_tiles,
    })
}

impl SavedMapping {
    pub fn engine(&self, device: &DeviceModel, read: &ReadConfig, consts: &EnergyConstants) -> Result<AnalogEngine> {
        AnalogEngine::from_tiles(&self.clause_tiles, &self.class_tiles, &self.manifest.segments, device, read, consts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cotm::{ActionMatrix, SignedWeightMatrix};
    use crate::device::{DeviceConfig, VariabilityConfig};
    use rand::{Rng, SeedableRng};

    fn random_model(k_features: usize, n: usize, m: usize, seed: u64) -> CotmModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let am = ActionMatrix::from_fn(2 * k_features, n, |_, _| rng.gen_bool(0.08));
        let rows: Vec<Vec<i32>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-30..60)).collect()).collect();
        CotmModel::new(am, SignedWeightMatrix::from_rows(&rows).unwrap(), 256).unwrap()
    }

    fn random_inputs(k_features: usize, count: usize, seed: u64) -> Vec<LiteralVector> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| LiteralVector::from_features(&(0..k_features).map(|_| rng.gen_bool(0.5)).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn exact_mapping_reproduces_golden_scores() {
        let device = DeviceModel::nominal();
        let model = random_model(40, 60, 5, 1);
        let mapped = map_model(&model, &device, &MapOptions { exact: true, ..Default::default() }).unwrap();
        let engine = AnalogEngine::new(&mapped, &device, &ReadConfig::default(), &EnergyConstants::default()).unwrap();
        for (i, x) in random_inputs(40, 200, 2).iter().enumerate() {
            let inf = engine.infer(x, i as u64).unwrap();
            let golden_c = crate::cotm::compute_clauses(&model.actions, x).unwrap();
            assert_eq!(inf.clauses, golden_c);
            let golden = model.scores(x).unwrap();
            let driven = golden_c.count_ones() as i64;
            let expect: Vec<i64> = golden.iter().map(|s| s + mapped.shift * driven).collect();
            assert_eq!(inf.scores.0, expect);
            assert_eq!(inf.prediction, model.predict(x).unwrap());
        }
    }

    #[test]
    fn tiled_exact_mapping_matches_untiled() {
        let device = DeviceModel::nominal();
        let model = random_model(50, 70, 4, 5);
        let small = Geometry { max_rows: 32, max_cols: 16 };
        let opts = MapOptions { exact: true, ..Default::default() };
        let one = map_model(&model, &device, &opts).unwrap();
        let many = map_model(&model, &device, &MapOptions { geometry: small, ..opts }).unwrap();
        assert!(many.plan.clause_tiles() > 1 && many.plan.class_tiles() > 1);
        let (cfg, k) = (ReadConfig::default(), EnergyConstants::default());
        let a = AnalogEngine::new(&one, &device, &cfg, &k).unwrap();
        let b = AnalogEngine::new(&many, &device, &cfg, &k).unwrap();
        for (i, x) in random_inputs(50, 100, 6).iter().enumerate() {
            let (ia, ib) = (a.infer(x, i as u64).unwrap(), b.infer(x, i as u64).unwrap());
            assert_eq!(ia.clauses, ib.clauses);
            assert_eq!(ia.scores, ib.scores);
        }
    }

    #[test]
    fn tuned_mapping_on_noisy_devices() {
        let device = DeviceModel::new(DeviceConfig::default(), VariabilityConfig::default().with_seed(9)).unwrap();
        let model = random_model(30, 40, 3, 3);
        let mapped = map_model(&model, &device, &MapOptions { seed: 4, ..Default::default() }).unwrap();
        assert_eq!(mapped.encode.cells.len(), 60 * 40);
        assert_eq!(mapped.encode.cost(), 0.0);
        let fine = mapped.finetune.as_ref().unwrap();
        assert!(fine.cells.iter().filter(|c| c.residual.abs() <= 5).count() as f64 >= 0.99 * fine.cells.len() as f64);
        let engine = AnalogEngine::new(&mapped, &device, &ReadConfig::default(), &EnergyConstants::default()).unwrap();
        for (i, x) in random_inputs(30, 50, 8).iter().enumerate() {
            let inf = engine.infer(x, i as u64).unwrap();
            assert_eq!(inf.clauses, crate::cotm::compute_clauses(&model.actions, x).unwrap());
        }
    }

    #[test]
    fn skip_finetune_omits_the_stage() {
        let device = DeviceModel::nominal();
        let model = random_model(10, 12, 2, 4);
        let mapped = map_model(&model, &device, &MapOptions { skip_finetune: true, ..Default::default() }).unwrap();
        assert!(mapped.pretune.is_some() && mapped.finetune.is_none());
    }

    #[test]
    fn metered_inference_counts_events() {
        let device = DeviceModel::nominal();
        let model = random_model(20, 30, 3, 7);
        let mapped = map_model(&model, &device, &MapOptions { exact: true, ..Default::default() }).unwrap();
        let engine = AnalogEngine::new(&mapped, &device, &ReadConfig::default(), &EnergyConstants::default()).unwrap();
        let x = &random_inputs(20, 1, 1)[0];
        let mut ledger = EnergyLedger::new();
        let inf = engine.infer_metered(x, 0, &mut ledger).unwrap();
        assert_eq!(ledger.count(EventKind::ColumnRead), 33);
        assert_eq!(ledger.count(EventKind::CsaSense), 30);
        let driven = x.count_zeros() as u64;
        assert_eq!(ledger.count(EventKind::ReadCellHcs) + ledger.count(EventKind::ReadCellLcs), driven * 30);
        assert_eq!(ledger.count(EventKind::ReadCellAnalog), inf.clauses.count_ones() as u64 * 3);
        assert_eq!(ledger.datapoints(), 1);
        assert!(ledger.read_pj() > 0.0);
    }

    #[test]
    fn parallel_evaluation_is_deterministic() {
        let device = DeviceModel::new(DeviceConfig::default(), VariabilityConfig::default().with_seed(3)).unwrap();
        let model = random_model(16, 20, 3, 11);
        let mapped = map_model(&model, &device, &MapOptions { seed: 2, ..Default::default() }).unwrap();
        let engine = AnalogEngine::new(&mapped, &device, &ReadConfig::default(), &EnergyConstants::default()).unwrap();
        let samples = random_inputs(16, 300, 4);
        let set = LabeledSet {
            labels: vec![0; samples.len()],
            samples,
            classes: 3,
        };
        let (mut a, mut b) = (EnergyLedger::new(), EnergyLedger::new());
        let ea = engine.evaluate(&set, Some(&mut a)).unwrap();
        let serial: Vec<usize> = set.samples.iter().enumerate().map(|(i, x)| engine.infer_metered(x, i as u64, &mut b).unwrap().prediction).collect();
        assert_eq!(ea.predictions, serial);
        assert_eq!(a, b);
    }

    #[test]
    fn saved_mapping_round_trips() {
        let device = DeviceModel::new(DeviceConfig::default(), VariabilityConfig::default().with_seed(8)).unwrap();
        let model = random_model(12, 10, 3, 2);
        let opts = MapOptions { geometry: Geometry { max_rows: 16, max_cols: 6 }, ..Default::default() };
        let mapped = map_model(&model, &device, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_mapping(&mapped, dir.path()).unwrap();
        let saved = load_mapping(dir.path()).unwrap();
        assert_eq!(saved.clause_tiles, mapped.clause_tiles);
        assert_eq!(saved.class_tiles, mapped.class_tiles);
        assert_eq!(saved.manifest.shift, mapped.shift);
        let (cfg, k) = (ReadConfig::default(), EnergyConstants::default());
        let a = AnalogEngine::new(&mapped, &device, &cfg, &k).unwrap();
        let b = saved.engine(&device, &cfg, &k).unwrap();
        for (i, x) in random_inputs(12, 20, 1).iter().enumerate() {
            assert_eq!(a.infer(x, i as u64).unwrap(), b.infer(x, i as u64).unwrap());
        }
    }
}
