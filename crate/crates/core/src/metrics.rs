//! Sidelobe levels of a designed code, absolute and relative to its start.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::af::{af_grid, eval_af, eval_objective, level_db, CodeSequence, RegionSpec, DB_FLOOR};
use crate::error::{Error, Result};

/// Levels are mainlobe-normalized dB, floored at -100 dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Region energy `C`.
    pub region_energy: f64,
    pub region_avg_db: f64,
    pub region_peak_db: f64,
    /// Highest level over the whole grid except the mainlobe.
    pub global_peak_sidelobe_db: f64,
}

pub fn report(x: &CodeSequence, region: &RegionSpec) -> Result<RegionReport> {
    let region_energy = eval_objective(x, region)?;
    let n = x.len();
    let mut sum = 0.0;
    let mut peak = DB_FLOOR;
    for (k, p) in region.cells() {
        let db = level_db(eval_af(x, k, p)?.norm(), n);
        sum += db;
        peak = peak.max(db);
    }
    let grid = af_grid(x);
    let mut global = DB_FLOOR;
    for (row, &k) in grid.lags.iter().enumerate() {
        for (col, &p) in grid.bins.iter().enumerate() {
            if (k, p) != (0, 0) {
                global = global.max(level_db(grid.magnitude[row][col], n));
            }
        }
    }
    // region bins outside the grid's bin set (p = -ceil(N/2) for odd N)
    global = global.max(peak);
    Ok(RegionReport {
        region_energy,
        region_avg_db: sum / region.size() as f64,
        region_peak_db: peak,
        global_peak_sidelobe_db: global,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLevels {
    pub k: i64,
    pub p: i64,
    pub before_db: f64,
    pub after_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub before: RegionReport,
    pub after: RegionReport,
    /// `before.region_avg_db - after.region_avg_db`
    pub suppression_db: f64,
    pub cells: Vec<CellLevels>,
}

pub fn compare(
    before: &CodeSequence,
    after: &CodeSequence,
    region: &RegionSpec,
) -> Result<Comparison> {
    if before.len() != after.len() {
        return Err(Error::LengthMismatch(before.len(), after.len()));
    }
    let b = report(before, region)?;
    let a = report(after, region)?;
    let n = before.len();
    let cells = region
        .cells()
        .map(|(k, p)| {
            Ok(CellLevels {
                k,
                p,
                before_db: level_db(eval_af(before, k, p)?.norm(), n),
                after_db: level_db(eval_af(after, k, p)?.norm(), n),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        suppression_db: b.region_avg_db - a.region_avg_db,
        before: b,
        after: a,
        cells,
    })
}

impl Comparison {
    /// Per-cell levels, columns `k,p,before_db,after_db`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for cell in &self.cells {
            w.serialize(cell)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::af::grid_bins;
    use crate::solver::init_random_code;

    #[test]
    fn energy_is_the_objective_bit_for_bit() {
        let region = RegionSpec::new(31, [5, 6, 7], [-15, -14, -13, 11, 12, 13, 14]).unwrap();
        let x = init_random_code(31, 0).unwrap();
        let r = report(&x, &region).unwrap();
        assert_eq!(
            r.region_energy.to_bits(),
            eval_objective(&x, &region).unwrap().to_bits()
        );
        assert!(r.region_peak_db >= r.region_avg_db);
        assert!(r.global_peak_sidelobe_db >= r.region_peak_db);
        assert!(r.global_peak_sidelobe_db <= 0.0);
    }

    #[test]
    fn fields_rederived_from_grid_scan() {
        let region = RegionSpec::new(8, [1, -3, 5], [-4, 2, 3]).unwrap();
        let x = init_random_code(8, 31).unwrap();
        let r = report(&x, &region).unwrap();
        let grid = af_grid(&x);
        let db = grid.magnitude_db();
        let mut levels = Vec::new();
        let mut energy = 0.0;
        let mut global = f64::NEG_INFINITY;
        for (i, &k) in grid.lags.iter().enumerate() {
            for (j, &p) in grid.bins.iter().enumerate() {
                if region.contains(k, p) {
                    levels.push(db[i][j]);
                    energy += grid.magnitude[i][j].powi(2);
                }
                if (k, p) != (0, 0) {
                    global = global.max(db[i][j]);
                }
            }
        }
        assert_eq!(levels.len(), 9);
        let avg = levels.iter().sum::<f64>() / 9.0;
        let peak = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((r.region_energy - energy).abs() < 1e-10);
        assert!((r.region_avg_db - avg).abs() < 1e-10);
        assert!((r.region_peak_db - peak).abs() < 1e-10);
        assert!((r.global_peak_sidelobe_db - global).abs() < 1e-10);
        assert_eq!(grid.bins, grid_bins(8));
    }

    #[test]
    fn compare_same_code_is_zero() {
        let region = RegionSpec::new(8, [1], [2]).unwrap();
        let x = init_random_code(8, 1).unwrap();
        let c = compare(&x, &x, &region).unwrap();
        assert_eq!(c.suppression_db, 0.0);
        assert_eq!(c.cells.len(), 1);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("k,p,before_db,after_db\n1,2,"));
    }

    #[test]
    fn compare_rejects_length_mismatch() {
        let region = RegionSpec::new(8, [1], [2]).unwrap();
        let a = init_random_code(8, 1).unwrap();
        let b = init_random_code(9, 1).unwrap();
        assert!(matches!(
            compare(&a, &b, &region),
            Err(Error::LengthMismatch(8, 9))
        ));
    }
}
