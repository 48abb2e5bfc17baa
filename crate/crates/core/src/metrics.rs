//! Energy, area and throughput accounting.
//!
//! Reads are charged per column: `E = v_read * min(I_column, I_sat) * t_read`.
//! Column energies are accumulated as integers in units of 1e-27 J, so
//! ledgers can be merged in any order and give identical totals.

use serde::{Deserialize, Serialize};

use crate::crossbar::ReadConfig;
use crate::error::{Error, Result};

const UNIT_J: f64 = 1e-27;
const PJ: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConstants {
    pub read_hcs_pj: f64,
    pub read_lcs_pj: f64,
    pub program_pulse_pj: f64,
    pub erase_pulse_pj: f64,
    pub csa_sense_pj: f64,
    /// Column current at which read energy saturates (A).
    pub i_sat: f64,
    pub cell_area_um2: f64,
    pub reference_gops: f64,
    pub reference_tops_per_w: f64,
    pub reference_clause_pj_per_datapoint: f64,
    pub reference_class_pj_per_datapoint: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self {
            read_hcs_pj: 0.05,
            read_lcs_pj: 3.2e-5,
            program_pulse_pj: 139_000.0,
            erase_pulse_pj: 0.8,
            csa_sense_pj: 0.0,
            i_sat: 576e-6,
            cell_area_um2: 3.159,
            reference_gops: 413.6,
            reference_tops_per_w: 24.56,
            reference_clause_pj_per_datapoint: 67.99,
            reference_class_pj_per_datapoint: 16.22,
        }
    }
}

impl EnergyConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.read_hcs_pj,
            self.read_lcs_pj,
            self.program_pulse_pj,
            self.erase_pulse_pj,
            self.csa_sense_pj,
            self.i_sat,
            self.cell_area_um2,
        ];
        if all.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("energy and area constants must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Read energy (J) of one column carrying `current`.
pub fn column_energy(current: f64, cfg: &ReadConfig, consts: &EnergyConstants) -> f64 {
    cfg.v_read * current.min(consts.i_sat) * cfg.t_read
}

/// Read energy (J) of a column given the currents of its driven cells.
pub fn column_read_energy(driven_cells: &[f64], cfg: &ReadConfig, consts: &EnergyConstants) -> f64 {
    column_energy(driven_cells.iter().sum(), cfg, consts)
}

fn to_units(joules: f64) -> u128 {
    (joules / UNIT_J).round() as u128
}

fn units_to_pj(units: u128) -> f64 {
    units as f64 / (PJ / UNIT_J)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ProgramPulse,
    ErasePulse,
    ReadCellHcs,
    ReadCellLcs,
    ReadCellAnalog,
    ColumnRead,
    CsaSense,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::ProgramPulse,
        EventKind::ErasePulse,
        EventKind::ReadCellHcs,
        EventKind::ReadCellLcs,
        EventKind::ReadCellAnalog,
        EventKind::ColumnRead,
        EventKind::CsaSense,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::ProgramPulse => "program_pulse",
            EventKind::ErasePulse => "erase_pulse",
            EventKind::ReadCellHcs => "read_cell_hcs",
            EventKind::ReadCellLcs => "read_cell_lcs",
            EventKind::ReadCellAnalog => "read_cell_analog",
            EventKind::ColumnRead => "column_read",
            EventKind::CsaSense => "csa_sense",
        }
    }
}

/// Which tile type a column read belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileKind {
    Clause,
    Class,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    counts: [u64; 7],
    /// Analog cell reads by weight level.
    analog_levels: Vec<u64>,
    clause_units: u128,
    class_units: u128,
    datapoints: u64,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, kind: EventKind) -> u64 {
        self.counts[kind.index()]
    }

    pub fn add(&mut self, kind: EventKind, n: u64) {
        self.counts[kind.index()] += n;
    }

    pub fn add_analog_read(&mut self, level: usize, n: u64) {
        if self.analog_levels.len() <= level {
            self.analog_levels.resize(level + 1, 0);
        }
        self.analog_levels[level] += n;
        self.add(EventKind::ReadCellAnalog, n);
    }

    pub fn analog_levels(&self) -> &[u64] {
        &self.analog_levels
    }

    /// One column read at `current`.
    pub fn record_column(&mut self, tile: TileKind, current: f64, cfg: &ReadConfig, consts: &EnergyConstants) {
        let units = to_units(column_energy(current, cfg, consts));
        match tile {
            TileKind::Clause => self.clause_units += units,
            TileKind::Class => self.class_units += units,
        }
        self.add(EventKind::ColumnRead, 1);
    }

    pub fn record_columns(&mut self, tile: TileKind, currents: &[f64], cfg: &ReadConfig, consts: &EnergyConstants) {
        for &i in currents {
            self.record_column(tile, i, cfg, consts);
        }
    }

    pub fn finish_datapoint(&mut self) {
        self.datapoints += 1;
    }

    pub fn datapoints(&self) -> u64 {
        self.datapoints
    }

    pub fn clause_read_pj(&self) -> f64 {
        units_to_pj(self.clause_units)
    }

    pub fn class_read_pj(&self) -> f64 {
        units_to_pj(self.class_units)
    }

    pub fn read_pj(&self) -> f64 {
        units_to_pj(self.clause_units + self.class_units)
    }

    pub fn tuning_pj(&self, consts: &EnergyConstants) -> f64 {
        self.count(EventKind::ProgramPulse) as f64 * consts.program_pulse_pj
            + self.count(EventKind::ErasePulse) as f64 * consts.erase_pulse_pj
    }

    pub fn sense_pj(&self, consts: &EnergyConstants) -> f64 {
        self.count(EventKind::CsaSense) as f64 * consts.csa_sense_pj
    }

    /// Cell-level view of the reads: HCS and LCS cells at their constants.
    pub fn cell_read_pj(&self, consts: &EnergyConstants) -> f64 {
        self.count(EventKind::ReadCellHcs) as f64 * consts.read_hcs_pj
            + self.count(EventKind::ReadCellLcs) as f64 * consts.read_lcs_pj
    }

    pub fn merge(&mut self, other: &EnergyLedger) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        if self.analog_levels.len() < other.analog_levels.len() {
            self.analog_levels.resize(other.analog_levels.len(), 0);
        }
        for (a, b) in self.analog_levels.iter_mut().zip(&other.analog_levels) {
            *a += b;
        }
        self.clause_units += other.clause_units;
        self.class_units += other.class_units;
        self.datapoints += other.datapoints;
    }

    pub fn merged(mut self, other: &EnergyLedger) -> Self {
        self.merge(other);
        self
    }

    /// Mean clause-tile and class-tile read energy per datapoint (pJ).
    pub fn datapoint_energy_pj(&self) -> (f64, f64) {
        if self.datapoints == 0 {
            return (0.0, 0.0);
        }
        let n = self.datapoints as f64;
        (self.clause_read_pj() / n, self.class_read_pj() / n)
    }

    pub fn summary(&self, consts: &EnergyConstants) -> LedgerSummary {
        let (clause, class) = self.datapoint_energy_pj();
        LedgerSummary {
            counts: EventKind::ALL.iter().map(|k| (k.name().to_string(), self.count(*k))).collect(),
            datapoints: self.datapoints,
            clause_read_pj: self.clause_read_pj(),
            class_read_pj: self.class_read_pj(),
            clause_pj_per_datapoint: clause,
            class_pj_per_datapoint: class,
            reference_clause_pj_per_datapoint: consts.reference_clause_pj_per_datapoint,
            reference_class_pj_per_datapoint: consts.reference_class_pj_per_datapoint,
            tuning_pj: self.tuning_pj(consts),
            sense_pj: self.sense_pj(consts),
        }
    }

    pub fn write_csv(&self, w: impl std::io::Write, consts: &EnergyConstants) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["event", "count", "energy_pj"])?;
        let per_event = |k: EventKind| match k {
            EventKind::ProgramPulse => Some(consts.program_pulse_pj),
            EventKind::ErasePulse => Some(consts.erase_pulse_pj),
            EventKind::ReadCellHcs => Some(consts.read_hcs_pj),
            EventKind::ReadCellLcs => Some(consts.read_lcs_pj),
            EventKind::CsaSense => Some(consts.csa_sense_pj),
            EventKind::ReadCellAnalog | EventKind::ColumnRead => None,
        };
        for k in EventKind::ALL {
            let n = self.count(k);
            let e = match (k, per_event(k)) {
                (EventKind::ColumnRead, _) => self.read_pj(),
                (_, Some(pj)) => n as f64 * pj,
                (_, None) => f64::NAN,
            };
            let e = if e.is_nan() { String::new() } else { format!("{e:.6e}") };
            wtr.write_record([k.name().to_string(), n.to_string(), e])?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub counts: Vec<(String, u64)>,
    pub datapoints: u64,
    pub clause_read_pj: f64,
    pub class_read_pj: f64,
    pub clause_pj_per_datapoint: f64,
    pub class_pj_per_datapoint: f64,
    pub reference_clause_pj_per_datapoint: f64,
    pub reference_class_pj_per_datapoint: f64,
    pub tuning_pj: f64,
    pub sense_pj: f64,
}

/// Tile area in mm².
pub fn area_mm2(rows: usize, cols: usize, consts: &EnergyConstants) -> f64 {
    (rows * cols) as f64 * consts.cell_area_um2 * 1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub columns: usize,
    pub ops_per_s: f64,
    pub gops: f64,
    /// Column reads per joule of read energy in the ledger.
    pub ops_per_joule: f64,
    pub tops_per_w: f64,
    pub gops_per_mm2: f64,
    pub reference_gops: f64,
    pub reference_tops_per_w: f64,
}

/// One operation is one column read; every column of every tile reads in
/// parallel within `t_read`.
pub fn throughput(columns: usize, area_mm2: f64, ledger: &EnergyLedger, cfg: &ReadConfig, consts: &EnergyConstants) -> Throughput {
    let ops_per_s = columns as f64 / cfg.t_read;
    let joules = ledger.read_pj() * PJ;
    let ops_per_joule = if joules > 0.0 { ledger.count(EventKind::ColumnRead) as f64 / joules } else { 0.0 };
    Throughput {
        columns,
        ops_per_s,
        gops: ops_per_s / 1e9,
        ops_per_joule,
        tops_per_w: ops_per_joule / 1e12,
        gops_per_mm2: if area_mm2 > 0.0 { ops_per_s / 1e9 / area_mm2 } else { 0.0 },
        reference_gops: consts.reference_gops,
        reference_tops_per_w: consts.reference_tops_per_w,
    }
}
