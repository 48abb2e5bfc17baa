//! Lowering trained models onto tiles.
//!
//! Clause tiles store TA actions in Boolean mode: excluded cells are
//! programmed below the LCS verify level and included cells are erased above
//! the HCS verify level. Class tiles store shifted, non-negative weights as
//! analog levels. Levels are spaced uniformly in read current between the
//! LCS and HCS endpoints, so a column's current is affine in the weight sum
//! it carries; both tuning stages compare readings in those segment units.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cotm::{ActionMatrix, SignedWeightMatrix};
use crate::crossbar::{CrossbarTile, Digitizer, TileMode};
use crate::device::{mean_sd, DeviceModel, DeviceState, PulseKind, PulseSpec, MICRO, NANO};
use crate::error::{Error, Result};

/// Non-negative weights, `classes x clauses`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnipolarWeights {
    pub classes: usize,
    pub clauses: usize,
    pub values: Vec<u32>,
}

impl UnipolarWeights {
    pub fn get(&self, class: usize, clause: usize) -> u32 {
        self.values[class * self.clauses + clause]
    }

    pub fn max(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// Number of analog levels needed: `max + 1`, and at least two.
    pub fn levels(&self) -> usize {
        (self.max() as usize + 1).max(2)
    }
}

/// Subtracts the minimum weight so the smallest becomes 0. Returns the
/// shifted matrix and the amount added to every weight.
pub fn shift_weights(w: &SignedWeightMatrix) -> (UnipolarWeights, i64) {
    let shift = -i64::from(w.min());
    let values = w.values().iter().map(|&v| (i64::from(v) + shift) as u32).collect();
    (
        UnipolarWeights {
            classes: w.classes(),
            clauses: w.clauses(),
            values,
        },
        shift,
    )
}

/// Weight levels spaced uniformly in read current from `g_min` to `g_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMap {
    pub levels: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub v_read: f64,
    pub i_min: f64,
    pub i_max: f64,
    targets: Vec<f64>,
}

impl SegmentMap {
    pub const G_MIN: f64 = 1.0 * NANO;
    pub const G_MAX: f64 = 2.5 * MICRO;

    pub fn new(levels: usize, model: &DeviceModel, v_read: f64) -> Result<Self> {
        Self::with_range(levels, Self::G_MIN, Self::G_MAX, model, v_read)
    }

    pub fn with_range(levels: usize, g_min: f64, g_max: f64, model: &DeviceModel, v_read: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Config(format!("segment map needs at least 2 levels, got {levels}")));
        }
        if !(g_min > 0.0 && g_max > g_min) {
            return Err(Error::Config("segment map needs 0 < g_min < g_max".into()));
        }
        let i_min = model.read_current(g_min, v_read);
        let i_max = model.read_current(g_max, v_read);
        let step = (i_max - i_min) / (levels - 1) as f64;
        let targets = (0..levels)
            .map(|w| match w {
                0 => g_min,
                w if w == levels - 1 => g_max,
                w => model.conductance_for_current(i_min + w as f64 * step, v_read),
            })
            .collect();
        Ok(Self {
            levels,
            g_min,
            g_max,
            v_read,
            i_min,
            i_max,
            targets,
        })
    }

    pub fn step_current(&self) -> f64 {
        (self.i_max - self.i_min) / (self.levels - 1) as f64
    }

    /// Target conductance of weight level `w`.
    pub fn target(&self, w: usize) -> f64 {
        self.targets[w]
    }

    /// Position of `g` in segment units (fractional).
    pub fn position(&self, g: f64, model: &DeviceModel) -> f64 {
        (model.read_current(g, self.v_read) - self.i_min) / self.step_current()
    }

    /// Nearest level; exact half-way readings go to the lower level.
    pub fn level(&self, g: f64, model: &DeviceModel) -> usize {
        quantize(self.position(g, model), self.levels)
    }

    pub fn digitizer(&self) -> Digitizer {
        Digitizer {
            offset: self.i_min,
            step: self.step_current(),
        }
    }
}

/// Nearest of `levels` integer levels to position `p`, with half-way
/// positions going down.
pub fn quantize(p: f64, levels: usize) -> usize {
    (p - 0.5).ceil().clamp(0.0, (levels - 1) as f64) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub encode_width: f64,
    /// Exclude cells are programmed until `g` is below this.
    pub lcs_verify: f64,
    /// Include cells are erased until `g` is above this.
    pub hcs_verify: f64,
    pub pretune_width: f64,
    pub pretune_band: u32,
    pub finetune_width: f64,
    pub finetune_band: u32,
    /// Pulses allowed per cell per stage.
    pub pulse_cap: u32,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            encode_width: 1e-3,
            lcs_verify: 1.0 * NANO,
            hcs_verify: 2.4 * MICRO,
            pretune_width: 500e-6,
            pretune_band: 20,
            finetune_width: 50e-6,
            finetune_band: 5,
            pulse_cap: 64,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.encode_width, self.pretune_width, self.finetune_width];
        if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("tuning pulse widths must be positive".into()));
        }
        if !(self.lcs_verify > 0.0 && self.hcs_verify > self.lcs_verify) {
            return Err(Error::Config("need 0 < lcs_verify < hcs_verify".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellTune {
    pub row: u32,
    pub col: u32,
    pub program: u32,
    pub erase: u32,
    /// Final level minus target level (0 for Boolean cells that verified).
    pub residual: i32,
    pub flagged: bool,
}

impl CellTune {
    pub fn pulses(&self) -> u32 {
        self.program + self.erase
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub stage: String,
    pub cells: usize,
    pub pulses_mean: f64,
    pub pulses_sd: f64,
    pub pulses_max: u32,
    pub program_mean: f64,
    pub program_sd: f64,
    pub program_max: u32,
    pub erase_mean: f64,
    pub erase_sd: f64,
    pub erase_max: u32,
    pub flagged: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub stage: String,
    pub cells: Vec<CellTune>,
}

impl TuneReport {
    pub fn program_pulses(&self) -> u64 {
        self.cells.iter().map(|c| u64::from(c.program)).sum()
    }

    pub fn erase_pulses(&self) -> u64 {
        self.cells.iter().map(|c| u64::from(c.erase)).sum()
    }

    /// Fraction of cells left outside their tolerance.
    pub fn cost(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.flagged).count() as f64 / self.cells.len() as f64
    }

    pub fn summary(&self) -> TuneSummary {
        let stat = |f: &dyn Fn(&CellTune) -> u32| {
            let xs: Vec<f64> = self.cells.iter().map(|c| f64::from(f(c))).collect();
            let (m, sd) = if xs.is_empty() { (0.0, 0.0) } else { mean_sd(&xs) };
            (m, sd, self.cells.iter().map(f).max().unwrap_or(0))
        };
        let (pulses_mean, pulses_sd, pulses_max) = stat(&|c| c.pulses());
        let (program_mean, program_sd, program_max) = stat(&|c| c.program);
        let (erase_mean, erase_sd, erase_max) = stat(&|c| c.erase);
        TuneSummary {
            stage: self.stage.clone(),
            cells: self.cells.len(),
            pulses_mean,
            pulses_sd,
            pulses_max,
            program_mean,
            program_sd,
            program_max,
            erase_mean,
            erase_sd,
            erase_max,
            flagged: self.cells.iter().filter(|c| c.flagged).count(),
            cost: self.cost(),
        }
    }

    /// Pulse-count histogram: entry `k` counts cells that took `k` pulses.
    pub fn histogram(&self, f: impl Fn(&CellTune) -> u32) -> Vec<usize> {
        let max = self.cells.iter().map(&f).max().unwrap_or(0) as usize;
        let mut h = vec![0; max + 1];
        for c in &self.cells {
            h[f(c) as usize] += 1;
        }
        h
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "col", "program_pulses", "erase_pulses", "residual_segments", "flagged"])?;
        for c in &self.cells {
            wtr.serialize((c.row, c.col, c.program, c.erase, c.residual, u8::from(c.flagged)))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, summary_path: &Path) -> Result<()> {
        let f = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let json = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(summary_path, json + "\n").map_err(|e| Error::io(summary_path, e))
    }
}

/// Drives every cell to its own erase saturation level.
pub fn pre_erase(tile: &mut CrossbarTile, model: &DeviceModel) {
    let cfg = &model.config;
    for c in tile.cells_mut() {
        c.g = (cfg.erase_rail * c.d2d_factor).clamp(cfg.g_floor, cfg.g_ceiling);
    }
}

fn check_fit(tile: &CrossbarTile, rows: usize, cols: usize) -> Result<()> {
    if tile.rows() != rows || tile.cols() != cols {
        return Err(Error::Partition(format!(
            "tile is {}x{}, matrix is {rows}x{cols}",
            tile.rows(),
            tile.cols()
        )));
    }
    Ok(())
}

/// Boolean-mode encoding with verify after each pulse.
pub fn encode_actions(tile: &mut CrossbarTile, am: &ActionMatrix, model: &DeviceModel, cfg: &TuneConfig) -> Result<TuneReport> {
    if tile.mode != TileMode::BooleanClause {
        return Err(Error::Mode {
            expected: TileMode::BooleanClause.name(),
            actual: tile.mode.name(),
        });
    }
    check_fit(tile, am.literals(), am.clauses())?;
    let program = PulseSpec::program(&model.config, cfg.encode_width)?;
    let erase = PulseSpec::erase(&model.config, cfg.encode_width)?;
    let mut cells = Vec::with_capacity(tile.cells().len());
    for r in 0..tile.rows() {
        for c in 0..tile.cols() {
            let include = am.get(r, c);
            let (pulse, target) = if include { (&erase, cfg.hcs_verify) } else { (&program, cfg.lcs_verify) };
            let run = model.pulse_until(tile.cell(r, c), pulse, target, cfg.pulse_cap as usize);
            *tile.cell_mut(r, c) = run.state;
            let n = run.pulses as u32;
            cells.push(CellTune {
                row: r as u32,
                col: c as u32,
                program: if include { 0 } else { n },
                erase: if include { n } else { 0 },
                residual: 0,
                flagged: !run.reached,
            });
        }
    }
    Ok(TuneReport {
        stage: "encode".into(),
        cells,
    })
}

/// Program-and-verify on one cell until its level is within `band` of `target`.
#[allow(clippy::too_many_arguments)]
fn tune_cell(
    model: &DeviceModel,
    seg: &SegmentMap,
    state: &mut DeviceState,
    target: usize,
    band: u32,
    program: &PulseSpec,
    erase: &PulseSpec,
    cap: u32,
) -> (u32, u32, i32, bool) {
    let (mut np, mut ne) = (0u32, 0u32);
    loop {
        let diff = seg.level(state.g, model) as i64 - target as i64;
        if diff.unsigned_abs() <= u64::from(band) {
            return (np, ne, diff as i32, false);
        }
        if np + ne >= cap {
            return (np, ne, diff as i32, true);
        }
        let pulse = if diff > 0 { program } else { erase };
        *state = model.apply_pulse(state, pulse);
        match pulse.kind {
            PulseKind::Program => np += 1,
            PulseKind::Erase => ne += 1,
        }
    }
}

fn tune_stage(
    stage: &str,
    tile: &mut CrossbarTile,
    w: &UnipolarWeights,
    seg: &SegmentMap,
    model: &DeviceModel,
    width: f64,
    band: u32,
    cap: u32,
) -> Result<TuneReport> {
    if tile.mode != TileMode::AnalogClass {
        return Err(Error::Mode {
            expected: TileMode::AnalogClass.name(),
            actual: tile.mode.name(),
        });
    }
    check_fit(tile, w.clauses, w.classes)?;
    if w.max() as usize >= seg.levels {
        return Err(Error::Config(format!("weight {} exceeds the {} segment levels", w.max(), seg.levels)));
    }
    let program = PulseSpec::program(&model.config, width)?;
    let erase = PulseSpec::erase(&model.config, width)?;
    let mut cells = Vec::with_capacity(tile.cells().len());
    for r in 0..tile.rows() {
        for c in 0..tile.cols() {
            let target = w.get(c, r) as usize;
            let (p, e, residual, flagged) = tune_cell(model, seg, tile.cell_mut(r, c), target, band, &program, &erase, cap);
            cells.push(CellTune {
                row: r as u32,
                col: c as u32,
                program: p,
                erase: e,
                residual,
                flagged,
            });
        }
    }
    Ok(TuneReport {
        stage: stage.into(),
        cells,
    })
}

/// Coarse stage. Every cell must start erased (above 1 µS) unless it
/// already sits within the band of its target.
pub fn pretune(tile: &mut CrossbarTile, w: &UnipolarWeights, seg: &SegmentMap, model: &DeviceModel, cfg: &TuneConfig) -> Result<TuneReport> {
    check_fit(tile, w.clauses, w.classes)?;
    let band = i64::from(cfg.pretune_band);
    let unprepared = (0..tile.rows()).flat_map(|r| (0..tile.cols()).map(move |c| (r, c))).find(|&(r, c)| {
        let g = tile.cell(r, c).g;
        let off = seg.level(g, model) as i64 - i64::from(w.get(c, r));
        g <= MICRO && off.abs() > band
    });
    if let Some((r, c)) = unprepared {
        return Err(Error::Config(format!(
            "pretune needs an erased tile; cell ({r}, {c}) is at {:.3e} S",
            tile.cell(r, c).g
        )));
    }
    tune_stage("pretune", tile, w, seg, model, cfg.pretune_width, cfg.pretune_band, cfg.pulse_cap)
}

pub fn finetune(tile: &mut CrossbarTile, w: &UnipolarWeights, seg: &SegmentMap, model: &DeviceModel, cfg: &TuneConfig) -> Result<TuneReport> {
    tune_stage("finetune", tile, w, seg, model, cfg.finetune_width, cfg.finetune_band, cfg.pulse_cap)
}

/// Nearest-level estimate of each stored weight, `classes x clauses`.
pub fn readback(tile: &CrossbarTile, seg: &SegmentMap, model: &DeviceModel) -> Result<UnipolarWeights> {
    if tile.mode != TileMode::AnalogClass {
        return Err(Error::Mode {
            expected: TileMode::AnalogClass.name(),
            actual: tile.mode.name(),
        });
    }
    let (clauses, classes) = (tile.rows(), tile.cols());
    let values = (0..classes)
        .flat_map(|k| (0..clauses).map(move |j| (j, k)))
        .map(|(j, k)| seg.level(tile.cell(j, k).g, model) as u32)
        .collect();
    Ok(UnipolarWeights { classes, clauses, values })
}

/// Writes include cells at exactly `g_max` and exclude cells at exactly
/// `g_min`, bypassing the pulse model.
pub fn write_actions_exact(tile: &mut CrossbarTile, am: &ActionMatrix, seg: &SegmentMap) -> Result<()> {
    check_fit(tile, am.literals(), am.clauses())?;
    for r in 0..tile.rows() {
        for c in 0..tile.cols() {
            tile.cell_mut(r, c).g = if am.get(r, c) { seg.g_max } else { seg.g_min };
        }
    }
    Ok(())
}

/// Writes every class cell at exactly its level's target conductance.
pub fn write_weights_exact(tile: &mut CrossbarTile, w: &UnipolarWeights, seg: &SegmentMap) -> Result<()> {
    check_fit(tile, w.clauses, w.classes)?;
    for r in 0..tile.rows() {
        for c in 0..tile.cols() {
            tile.cell_mut(r, c).g = seg.target(w.get(c, r) as usize);
        }
    }
    Ok(())
}
