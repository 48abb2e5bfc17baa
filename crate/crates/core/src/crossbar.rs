//! Crossbar tiles: drive encoding, column currents, sensing and tiling.
//!
//! A clause tile has one row per literal and one column per clause. A row is
//! driven at `v_read` when its literal is 0 and left floating when it is 1,
//! so an included literal that is 0 puts an HCS cell on the column and pulls
//! the current above the sense threshold (clause 0). A class tile has one row
//! per clause and one column per class; rows are driven by the clauses that
//! fired and the column current is the analog class sum.
//!
//! Wires are ideal: no IR drop and no sneak paths.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cotm::{argmax_lowest, ClassScores, ClauseVector, LiteralVector};
use crate::device::{DeviceModel, DeviceState, Population};
use crate::error::{Error, Result};
use crate::rng::{SeedTree, Stream};

pub const MAX_ROWS: usize = 2048;
pub const MAX_COLS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TileMode {
    BooleanClause,
    AnalogClass,
}

impl TileMode {
    pub fn name(self) -> &'static str {
        match self {
            TileMode::BooleanClause => "boolean-clause",
            TileMode::AnalogClass => "analog-class",
        }
    }

    fn code(self) -> u8 {
        match self {
            TileMode::BooleanClause => 0,
            TileMode::AnalogClass => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(TileMode::BooleanClause),
            1 => Some(TileMode::AnalogClass),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub max_rows: usize,
    pub max_cols: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            max_rows: MAX_ROWS,
            max_cols: MAX_COLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadConfig {
    pub v_read: f64,
    pub t_read: f64,
    pub csa_threshold: f64,
    pub csa_offset_sd: f64,
    /// Root of the per-(sample, column) sense-offset streams.
    pub csa_seed: u64,
}

impl Default for ReadConfig {
    fn default() -> Self {
        Self {
            v_read: 2.0,
            t_read: 5e-9,
            csa_threshold: 4.1e-6,
            csa_offset_sd: 0.0,
            csa_seed: 0,
        }
    }
}

impl ReadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_read > 0.0) || !(self.csa_threshold > 0.0) || !(self.t_read > 0.0) {
            return Err(Error::Config("v_read, t_read and csa_threshold must be positive".into()));
        }
        if !(self.csa_offset_sd >= 0.0) {
            return Err(Error::Config("csa_offset_sd must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarTile {
    pub mode: TileMode,
    rows: usize,
    cols: usize,
    cells: Vec<DeviceState>,
}

impl CrossbarTile {
    pub fn new(mode: TileMode, rows: usize, cols: usize, cells: Vec<DeviceState>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("crossbar tile"));
        }
        if rows > MAX_ROWS || cols > MAX_COLS {
            return Err(Error::Config(format!("tile {rows}x{cols} exceeds {MAX_ROWS}x{MAX_COLS}")));
        }
        if cells.len() != rows * cols {
            return Err(Error::dim("tile cells", rows * cols, cells.len()));
        }
        Ok(Self { mode, rows, cols, cells })
    }

    pub fn from_population(mode: TileMode, pop: Population) -> Result<Self> {
        Self::new(mode, pop.rows, pop.cols, pop.cells)
    }

    /// Nominal devices, all at conductance `g`.
    pub fn uniform(mode: TileMode, rows: usize, cols: usize, g: f64) -> Result<Self> {
        let cells = (0..rows * cols)
            .map(|i| DeviceState {
                stream: i as u64,
                ..DeviceState::nominal(g)
            })
            .collect();
        Self::new(mode, rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell(&self, r: usize, c: usize) -> &DeviceState {
        &self.cells[r * self.cols + c]
    }

    pub fn cell_mut(&mut self, r: usize, c: usize) -> &mut DeviceState {
        &mut self.cells[r * self.cols + c]
    }

    pub fn cells(&self) -> &[DeviceState] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [DeviceState] {
        &mut self.cells
    }

    pub fn conductances(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.g)
    }

    fn expect_mode(&self, mode: TileMode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::Mode {
                expected: mode.name(),
                actual: self.mode.name(),
            });
        }
        Ok(())
    }

    /// Column currents with the given rows driven at `v`, rows in ascending order.
    pub fn column_currents(&self, model: &DeviceModel, driven: impl Iterator<Item = usize>, v: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.cols];
        for r in driven {
            let row = &self.cells[r * self.cols..(r + 1) * self.cols];
            for (a, cell) in acc.iter_mut().zip(row) {
                *a += model.read_current(cell.g, v);
            }
        }
        acc
    }

    /// Precomputes every cell's read current at `v` for repeated inference.
    pub fn prepare(&self, model: &DeviceModel, v: f64) -> PreparedTile {
        PreparedTile {
            mode: self.mode,
            rows: self.rows,
            cols: self.cols,
            currents: self.cells.iter().map(|c| model.read_current(c.g, v)).collect(),
        }
    }

    const MAGIC: u32 = 0x5946_5854; // "YFXT"
    const VERSION: u32 = 1;

    /// Binary snapshot: magic, version, mode, rows, cols, then the
    /// conductances (row-major, f64 little-endian), then per-cell D2D factors,
    /// stream ids and pulse counters.
    pub fn write_snapshot(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&Self::MAGIC.to_le_bytes())?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        w.write_all(&[self.mode.code()])?;
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        for c in &self.cells {
            w.write_all(&c.g.to_le_bytes())?;
        }
        for c in &self.cells {
            w.write_all(&c.d2d_factor.to_le_bytes())?;
            w.write_all(&c.rate_factor.to_le_bytes())?;
            w.write_all(&c.stream.to_le_bytes())?;
            w.write_all(&c.pulses.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot(bytes: &[u8], path: &Path) -> Result<Self> {
        let truncated = |detail: &str| Error::Truncated {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        };
        let mut r = bytes;
        let u32_ = |r: &mut &[u8]| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| truncated("header"))?;
            Ok(u32::from_le_bytes(b))
        };
        let magic = u32_(&mut r)?;
        if magic != Self::MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: Self::MAGIC,
                found: magic,
            });
        }
        let version = u32_(&mut r)?;
        if version != Self::VERSION {
            return Err(Error::Parse(format!("unsupported tile snapshot version {version}")));
        }
        let mut mode = [0u8; 1];
        r.read_exact(&mut mode).map_err(|_| truncated("header"))?;
        let mode = TileMode::from_code(mode[0]).ok_or_else(|| Error::Parse(format!("unknown tile mode {}", mode[0])))?;
        let rows = u32_(&mut r)? as usize;
        let cols = u32_(&mut r)? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Parse("tile geometry overflows".into()))?;
        if r.len() != n * 40 {
            return Err(truncated(&format!("expected {} payload bytes, found {}", n * 40, r.len())));
        }
        let (gs, rest) = r.split_at(n * 8);
        let word = |b: &[u8]| -> [u8; 8] { b.try_into().expect("8-byte chunk") };
        let cells = gs
            .chunks_exact(8)
            .zip(rest.chunks_exact(32))
            .map(|(g, p)| DeviceState {
                g: f64::from_le_bytes(word(g)),
                d2d_factor: f64::from_le_bytes(word(&p[0..8])),
                rate_factor: f64::from_le_bytes(word(&p[8..16])),
                stream: u64::from_le_bytes(word(&p[16..24])),
                pulses: u64::from_le_bytes(word(&p[24..32])),
            })
            .collect();
        Self::new(mode, rows, cols, cells)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(17 + self.cells.len() * 40);
        self.write_snapshot(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_snapshot(&bytes, path)
    }
}

/// A tile with every cell's read current cached. Column sums visit driven
/// rows in ascending order, exactly as [`CrossbarTile::column_currents`]
/// does, so both give bit-identical results.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTile {
    pub mode: TileMode,
    rows: usize,
    cols: usize,
    currents: Vec<f64>,
}

impl PreparedTile {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_current(&self, r: usize, c: usize) -> f64 {
        self.currents[r * self.cols + c]
    }

    pub fn column_currents(&self, driven: impl Iterator<Item = usize>) -> Vec<f64> {
        let mut acc = vec![0.0; self.cols];
        for r in driven {
            let row = &self.currents[r * self.cols..(r + 1) * self.cols];
            acc.iter_mut().zip(row).for_each(|(a, i)| *a += i);
        }
        acc
    }

    pub fn clause_currents(&self, lit: &LiteralVector) -> Result<Vec<f64>> {
        check_mode(self.mode, TileMode::BooleanClause)?;
        if lit.len() != self.rows {
            return Err(Error::dim("literal vector vs tile rows", self.rows, lit.len()));
        }
        Ok(self.column_currents(lit.zero_indices()))
    }

    pub fn class_currents(&self, c: &[bool]) -> Result<Vec<f64>> {
        check_mode(self.mode, TileMode::AnalogClass)?;
        if c.len() != self.rows {
            return Err(Error::dim("clause vector vs tile rows", self.rows, c.len()));
        }
        Ok(self.column_currents(ones(c)))
    }
}

fn check_mode(actual: TileMode, expected: TileMode) -> Result<()> {
    if actual != expected {
        return Err(Error::Mode {
            expected: expected.name(),
            actual: actual.name(),
        });
    }
    Ok(())
}

fn ones(c: &[bool]) -> impl Iterator<Item = usize> + '_ {
    c.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
}

/// Literal 0 rows are driven at `v_read`; literal 1 rows float.
pub fn drive_clause_read(tile: &CrossbarTile, lit: &LiteralVector, model: &DeviceModel, cfg: &ReadConfig) -> Result<Vec<f64>> {
    tile.expect_mode(TileMode::BooleanClause)?;
    if lit.len() != tile.rows {
        return Err(Error::dim("literal vector vs tile rows", tile.rows, lit.len()));
    }
    Ok(tile.column_currents(model, lit.zero_indices(), cfg.v_read))
}

/// Clause 1 rows are driven at `v_read`; clause 0 rows float.
pub fn drive_class_read(tile: &CrossbarTile, c: &ClauseVector, model: &DeviceModel, cfg: &ReadConfig) -> Result<Vec<f64>> {
    tile.expect_mode(TileMode::AnalogClass)?;
    if c.len() != tile.rows {
        return Err(Error::dim("clause vector vs tile rows", tile.rows, c.len()));
    }
    Ok(tile.column_currents(model, ones(c), cfg.v_read))
}

/// Clause bit per column: 1 iff the current (plus sense offset) is below the
/// threshold. `event` keys the offset draws, so a given (event, column)
/// always sees the same offset.
pub fn csa_sense(currents: &[f64], cfg: &ReadConfig, event: u64) -> ClauseVector {
    csa_sense_indexed(currents, cfg, event, 0)
}

/// As [`csa_sense`], with column `i` drawing from offset stream `first + i`.
pub fn csa_sense_indexed(currents: &[f64], cfg: &ReadConfig, event: u64, first: u64) -> ClauseVector {
    if cfg.csa_offset_sd == 0.0 {
        return ClauseVector(currents.iter().map(|&i| i < cfg.csa_threshold).collect());
    }
    let normal = Normal::new(0.0, cfg.csa_offset_sd).expect("offset sd validated");
    let tree = SeedTree::new(cfg.csa_seed);
    ClauseVector(
        currents
            .iter()
            .zip(first..)
            .map(|(&i, index)| {
                let offset: f64 = normal.sample(&mut tree.rng(Stream::Csa, event, index));
                i + offset < cfg.csa_threshold
            })
            .collect(),
    )
}

pub fn analog_predict(class_currents: &[f64]) -> Result<usize> {
    argmax_lowest(class_currents).ok_or(Error::Empty("class current vector"))
}

/// Uniform quantizer from column current to weight units: a column with
/// `n` driven rows reads `n * offset + w * step` when its driven cells sum to
/// weight `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Digitizer {
    pub offset: f64,
    pub step: f64,
}

impl Digitizer {
    pub fn digitize(&self, current: f64, driven: usize) -> i64 {
        ((current - driven as f64 * self.offset) / self.step).round() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingPlan {
    /// Partition of the literals (clause-tile rows).
    pub literal_parts: Vec<Range<usize>>,
    /// Partition of the clauses (clause-tile columns and class-tile rows).
    pub clause_col_parts: Vec<Range<usize>>,
    pub clause_row_parts: Vec<Range<usize>>,
    /// Partition of the classes (class-tile columns).
    pub class_parts: Vec<Range<usize>>,
}

fn split(len: usize, cap: usize) -> Vec<Range<usize>> {
    (0..len).step_by(cap).map(|s| s..(s + cap).min(len)).collect()
}

/// Fewest parts per dimension under the geometry caps, each part filled to
/// the cap except the last.
pub fn plan_tiling(literals: usize, clauses: usize, classes: usize, geometry: Geometry) -> Result<TilingPlan> {
    if literals == 0 || clauses == 0 || classes == 0 {
        return Err(Error::Empty("model dimension"));
    }
    if geometry.max_rows == 0 || geometry.max_cols == 0 {
        return Err(Error::Config("tile geometry caps must be positive".into()));
    }
    Ok(TilingPlan {
        literal_parts: split(literals, geometry.max_rows),
        clause_col_parts: split(clauses, geometry.max_cols),
        clause_row_parts: split(clauses, geometry.max_rows),
        class_parts: split(classes, geometry.max_cols),
    })
}

impl TilingPlan {
    pub fn clause_tiles(&self) -> usize {
        self.literal_parts.len() * self.clause_col_parts.len()
    }

    pub fn class_tiles(&self) -> usize {
        self.clause_row_parts.len() * self.class_parts.len()
    }
}

/// Tiles laid out as `tiles[row_part][col_part]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid<T> {
    pub row_parts: Vec<Range<usize>>,
    pub col_parts: Vec<Range<usize>>,
    pub tiles: Vec<Vec<T>>,
}

impl<T> TileGrid<T> {
    pub fn rows(&self) -> usize {
        self.row_parts.last().map_or(0, |r| r.end)
    }

    pub fn cols(&self) -> usize {
        self.col_parts.last().map_or(0, |r| r.end)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.tiles.iter().flatten()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> TileGrid<U> {
        let mut f = f;
        TileGrid {
            row_parts: self.row_parts.clone(),
            col_parts: self.col_parts.clone(),
            tiles: self.tiles.iter().map(|row| row.iter().map(&mut f).collect()).collect(),
        }
    }

    fn check(&self, dims: impl Fn(&T) -> (usize, usize), input: usize) -> Result<()> {
        if self.rows() != input {
            return Err(Error::Partition(format!("row parts cover {} inputs, got {input}", self.rows())));
        }
        if self.tiles.len() != self.row_parts.len() {
            return Err(Error::Partition("tile rows do not match the row partition".into()));
        }
        for (r, row) in self.row_parts.iter().zip(&self.tiles) {
            if row.len() != self.col_parts.len() {
                return Err(Error::Partition("tile columns do not match the column partition".into()));
            }
            for (c, tile) in self.col_parts.iter().zip(row) {
                if dims(tile) != (r.len(), c.len()) {
                    return Err(Error::Partition(format!(
                        "tile is {:?}, partition expects {}x{}",
                        dims(tile),
                        r.len(),
                        c.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One tile read during a tiled computation.
#[derive(Debug, Clone, Copy)]
pub struct TileVisit<'a> {
    pub row_part: usize,
    pub col_part: usize,
    /// Driven rows, local to the tile, ascending.
    pub driven: &'a [usize],
    pub currents: &'a [f64],
}

/// Partial clauses from each literal slice, combined by AND. Column parts are
/// concatenated.
pub fn tiled_clause_compute(grid: &TileGrid<PreparedTile>, lit: &LiteralVector, cfg: &ReadConfig, event: u64) -> Result<ClauseVector> {
    tiled_clause_compute_observed(grid, lit, cfg, event, |_| {})
}

pub fn tiled_clause_compute_observed(
    grid: &TileGrid<PreparedTile>,
    lit: &LiteralVector,
    cfg: &ReadConfig,
    event: u64,
    mut observe: impl FnMut(&TileVisit),
) -> Result<ClauseVector> {
    grid.check(|t| (t.rows, t.cols), lit.len())?;
    let mut zeros = lit.zero_indices().peekable();
    let mut out = vec![true; grid.cols()];
    let mut driven = Vec::new();
    for (rp, (rows, tiles)) in grid.row_parts.iter().zip(&grid.tiles).enumerate() {
        driven.clear();
        while let Some(&z) = zeros.peek() {
            if z >= rows.end {
                break;
            }
            driven.push(z - rows.start);
            zeros.next();
        }
        for (cp, (cols, tile)) in grid.col_parts.iter().zip(tiles).enumerate() {
            check_mode(tile.mode, TileMode::BooleanClause)?;
            let currents = tile.column_currents(driven.iter().copied());
            observe(&TileVisit {
                row_part: rp,
                col_part: cp,
                driven: &driven,
                currents: &currents,
            });
            let first = ((rp as u64) << 32) | cols.start as u64;
            let partial = csa_sense_indexed(&currents, cfg, event, first);
            for (o, p) in out[cols.clone()].iter_mut().zip(partial.iter()) {
                *o &= p;
            }
        }
    }
    Ok(ClauseVector(out))
}

/// Per class, the sum over row parts of each tile's digitized column current.
pub fn tiled_class_compute(grid: &TileGrid<PreparedTile>, c: &ClauseVector, dig: &Digitizer) -> Result<ClassScores> {
    tiled_class_compute_observed(grid, c, dig, |_| {})
}

pub fn tiled_class_compute_observed(
    grid: &TileGrid<PreparedTile>,
    c: &ClauseVector,
    dig: &Digitizer,
    mut observe: impl FnMut(&TileVisit),
) -> Result<ClassScores> {
    grid.check(|t| (t.rows, t.cols), c.len())?;
    let mut scores = vec![0i64; grid.cols()];
    let mut driven = Vec::new();
    for (rp, (rows, tiles)) in grid.row_parts.iter().zip(&grid.tiles).enumerate() {
        driven.clear();
        driven.extend(ones(&c[rows.clone()]));
        for (cp, (cols, tile)) in grid.col_parts.iter().zip(tiles).enumerate() {
            check_mode(tile.mode, TileMode::AnalogClass)?;
            let currents = tile.column_currents(driven.iter().copied());
            observe(&TileVisit {
                row_part: rp,
                col_part: cp,
                driven: &driven,
                currents: &currents,
            });
            for (s, i) in scores[cols.clone()].iter_mut().zip(&currents) {
                *s += dig.digitize(*i, driven.len());
            }
        }
    }
    Ok(ClassScores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{MICRO, NANO};

    /// Literal vector over 2048 rows: feature 0 is 0 and the rest are 1, so
    /// row 0 and rows 1025..2048 are driven.
    fn fig4_literals() -> LiteralVector {
        let mut f = vec![true; 1024];
        f[0] = false;
        LiteralVector::from_features(&f)
    }

    #[test]
    fn include_on_driven_row_exceeds_threshold() {
        let m = DeviceModel::nominal();
        let cfg = ReadConfig::default();
        let mut tile = CrossbarTile::uniform(TileMode::BooleanClause, 2048, 1, NANO).unwrap();
        tile.cell_mut(0, 0).g = 2.5 * MICRO;
        let i = drive_clause_read(&tile, &fig4_literals(), &m, &cfg).unwrap();
        let expected = 5.0 * MICRO + 1023.0 * 3.0 * NANO;
        assert!((i[0] - expected).abs() < 1e-15);
        assert!(!csa_sense(&i, &cfg, 0)[0]);
    }

    #[test]
    fn all_excluded_column_stays_below_threshold() {
        let m = DeviceModel::nominal();
        let cfg = ReadConfig::default();
        let tile = CrossbarTile::uniform(TileMode::BooleanClause, 2048, 1, NANO).unwrap();
        let lit = LiteralVector::from_features(&vec![false; 1024]);
        let i = drive_clause_read(&tile, &lit, &m, &cfg).unwrap();
        assert!((i[0] - 3.1 * MICRO).abs() <= 0.1 * 3.1 * MICRO);
        assert!(csa_sense(&i, &cfg, 0)[0]);
    }

    #[test]
    fn nothing_driven_gives_zero() {
        let m = DeviceModel::nominal();
        let tile = CrossbarTile::uniform(TileMode::BooleanClause, 4, 3, 2.5 * MICRO).unwrap();
        assert_eq!(tile.column_currents(&m, std::iter::empty(), 2.0), vec![0.0; 3]);
    }

    #[test]
    fn sense_rule() {
        let cfg = ReadConfig::default();
        assert_eq!(csa_sense(&[5e-6, 3.1e-6, 0.0, 4.1e-6], &cfg, 0).0, vec![false, true, true, false]);
    }

    #[test]
    fn sense_offset_is_keyed() {
        let cfg = ReadConfig {
            csa_offset_sd: 0.5e-6,
            csa_seed: 3,
            ..Default::default()
        };
        let currents = vec![4.1e-6; 64];
        let a = csa_sense(&currents, &cfg, 7);
        assert_eq!(a, csa_sense(&currents, &cfg, 7));
        assert_ne!(a, csa_sense(&currents, &cfg, 8));
        assert!(a.count_ones() > 10 && a.count_ones() < 54);
    }

    #[test]
    fn class_read() {
        let m = DeviceModel::nominal();
        let cfg = ReadConfig::default();
        let mut tile = CrossbarTile::uniform(TileMode::AnalogClass, 3, 2, NANO).unwrap();
        tile.cell_mut(1, 1).g = 1.0 * MICRO;
        let zero = drive_class_read(&tile, &ClauseVector(vec![false; 3]), &m, &cfg).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        let one = drive_class_read(&tile, &ClauseVector(vec![false, true, false]), &m, &cfg).unwrap();
        assert_eq!(one[1], m.read_current(1.0 * MICRO, 2.0));
        assert_eq!(analog_predict(&one).unwrap(), 1);
    }

    #[test]
    fn mode_and_dimension_errors() {
        let m = DeviceModel::nominal();
        let cfg = ReadConfig::default();
        let tile = CrossbarTile::uniform(TileMode::AnalogClass, 4, 2, NANO).unwrap();
        let lit = LiteralVector::from_features(&[true, false]);
        assert!(matches!(drive_clause_read(&tile, &lit, &m, &cfg), Err(Error::Mode { .. })));
        assert!(matches!(drive_class_read(&tile, &ClauseVector(vec![true; 3]), &m, &cfg), Err(Error::Dimension { .. })));
        assert!(CrossbarTile::uniform(TileMode::AnalogClass, 2049, 1, NANO).is_err());
        assert!(CrossbarTile::uniform(TileMode::AnalogClass, 1, 513, NANO).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(analog_predict(&[1e-6, 3e-6]).unwrap(), 1);
        assert_eq!(analog_predict(&[2e-6, 2e-6]).unwrap(), 0);
        assert!(analog_predict(&[]).is_err());
    }

    #[test]
    fn tiling_plans() {
        let g = Geometry::default();
        let p = plan_tiling(1568, 500, 10, g).unwrap();
        assert_eq!((p.clause_tiles(), p.class_tiles()), (1, 1));
        assert_eq!(plan_tiling(4096, 500, 10, g).unwrap().literal_parts.len(), 2);
        assert_eq!(plan_tiling(2049, 500, 10, g).unwrap().literal_parts, vec![0..2048, 2048..2049]);
        assert_eq!(plan_tiling(10, 1100, 10, g).unwrap().clause_col_parts, vec![0..512, 512..1024, 1024..1100]);
        assert!(plan_tiling(0, 1, 1, g).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let m = DeviceModel::new(Default::default(), Default::default()).unwrap();
        let pop = m.sample_population(3, 5, 2).unwrap();
        let tile = CrossbarTile::from_population(TileMode::AnalogClass, pop).unwrap();
        let mut buf = Vec::new();
        tile.write_snapshot(&mut buf).unwrap();
        let p = Path::new("mem");
        assert_eq!(CrossbarTile::read_snapshot(&buf, p).unwrap(), tile);
        assert!(matches!(CrossbarTile::read_snapshot(&buf[..buf.len() - 1], p), Err(Error::Truncated { .. })));
        let mut bad = buf.clone();
        bad[0] ^= 1;
        assert!(matches!(CrossbarTile::read_snapshot(&bad, p), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn prepared_matches_direct() {
        let m = DeviceModel::new(Default::default(), Default::default()).unwrap();
        let tile = CrossbarTile::from_population(TileMode::BooleanClause, m.sample_population(8, 4, 1).unwrap()).unwrap();
        let lit = LiteralVector::from_features(&[true, false, false, true]);
        let cfg = ReadConfig::default();
        let direct = drive_clause_read(&tile, &lit, &m, &cfg).unwrap();
        assert_eq!(tile.prepare(&m, cfg.v_read).clause_currents(&lit).unwrap(), direct);
    }
}
