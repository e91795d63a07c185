//! Tabulated pressures in the published layout: rows are positions, columns
//! are offsets `a` after the closure instant, values in `10^4 Pa`.

use std::io::Write;

use super::model::{Section, TransientModel};
use crate::error::{Error, Result};

const PUBLISHED_TABLES: &str = include_str!("../../fixtures/published_tables.csv");

/// Offsets after `t1` used by the published tables, s.
pub const TABLE_OFFSETS: [f64; 6] = [0.0, 120.0, 240.0, 360.0, 480.0, 600.0];

/// Tabulated positions of each section, m.
pub fn published_positions(section: Section) -> [f64; 3] {
    match section {
        Section::Inlet => [0.0, 5_000.0, 10_000.0],
        Section::Isolated => [10_000.0, 14_500.0, 20_000.0],
        Section::Outlet => [20_000.0, 25_000.0, 30_000.0],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureTable {
    pub section: Section,
    /// Row positions, m.
    pub xs: Vec<f64>,
    /// Column offsets after `t1`, s.
    pub offsets: Vec<f64>,
    /// `values[row][column]`, Pa.
    pub values: Vec<Vec<f64>>,
}

/// Evaluates `section` at every `(x, t1 + a)`.
pub fn emit_table(
    model: &TransientModel,
    section: Section,
    offsets: &[f64],
    xs: &[f64],
) -> Result<PressureTable> {
    let t1 = model.params().t1;
    let (lo, hi) = model.params().bounds(section);
    if let Some(&x) = xs.iter().find(|&&x| x < lo || x > hi) {
        return Err(Error::Domain {
            quantity: "x",
            value: x,
            lo,
            hi,
        });
    }
    let values = xs
        .iter()
        .map(|&x| {
            offsets
                .iter()
                .map(|&a| model.pressure(section, x, t1 + a).map(|e| e.pressure))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PressureTable {
        section,
        xs: xs.to_vec(),
        offsets: offsets.to_vec(),
        values,
    })
}

/// Formats metres as kilometres without trailing zeros (`14.5`, `10`).
pub fn km_label(x_m: f64) -> String {
    let km = x_m / 1000.0;
    let s = format!("{km:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn offset_label(a: f64) -> String {
    format!("a{}", km_label(a * 1000.0))
}

/// Two-decimal `10^4 Pa` rendering used by every table export.
pub fn e4(p: f64) -> String {
    format!("{:.2}", p / 1e4)
}

impl PressureTable {
    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty() || self.xs.is_empty()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["x_km".to_string()];
        h.extend(self.offsets.iter().map(|&a| offset_label(a)));
        h
    }

    /// CSV, pressures in `10^4 Pa` with two decimals. An empty time list
    /// yields the header line only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        if !self.offsets.is_empty() {
            for (x, row) in self.xs.iter().zip(&self.values) {
                let mut rec = vec![km_label(*x)];
                rec.extend(row.iter().map(|&p| e4(p)));
                w.write_record(rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn value(&self, x: f64, a: f64) -> Option<f64> {
        let i = self.xs.iter().position(|&v| v == x)?;
        let j = self.offsets.iter().position(|&v| v == a)?;
        Some(self.values[i][j])
    }
}

/// The published tables, embedded as a versioned fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedTables {
    /// `(section, x [m], offset [s], pressure [Pa])`.
    pub cells: Vec<(Section, f64, f64, f64)>,
}

impl PublishedTables {
    pub fn load() -> Self {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(PUBLISHED_TABLES.as_bytes());
        let mut cells = Vec::new();
        for rec in rdr.records() {
            let rec = rec.expect("fixture parses");
            let section = Section::from_id(rec[0].parse().expect("table id")).expect("table 1..3");
            let x = rec[1].parse::<f64>().expect("x_km") * 1000.0;
            for (j, &a) in TABLE_OFFSETS.iter().enumerate() {
                let p = rec[2 + j].parse::<f64>().expect("pressure") * 1e4;
                cells.push((section, x, a, p));
            }
        }
        Self { cells }
    }

    pub fn value(&self, section: Section, x: f64, a: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.0 == section && c.1 == x && c.2 == a)
            .map(|c| c.3)
    }

    pub fn section(&self, section: Section) -> impl Iterator<Item = &(Section, f64, f64, f64)> {
        self.cells.iter().filter(move |c| c.0 == section)
    }
}

/// Long-format comparison `x_km,a_s,model,published,delta` (all in `10^4 Pa`).
/// Cells without a published counterpart leave `published` and `delta` empty.
pub fn write_comparison_csv<W: Write>(
    table: &PressureTable,
    tables: &PublishedTables,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_km", "a_s", "model", "published", "delta"])?;
    for (x, row) in table.xs.iter().zip(&table.values) {
        for (a, p) in table.offsets.iter().zip(row) {
            let published = tables.value(table.section, *x, *a);
            w.write_record([
                km_label(*x),
                km_label(a * 1000.0),
                e4(*p),
                published.map(e4).unwrap_or_default(),
                published
                    .map(|q| format!("{:.2}", (p - q) / 1e4))
                    .unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioDocument;

    fn model() -> TransientModel {
        let doc = ScenarioDocument::published();
        TransientModel::new(doc.spec, doc.leak_scenario()).unwrap()
    }

    #[test]
    fn first_columns_equal_the_snapshot() {
        let m = model();
        let t1 = emit_table(
            &m,
            Section::Inlet,
            &TABLE_OFFSETS,
            &published_positions(Section::Inlet),
        )
        .unwrap();
        let col: Vec<String> = t1.values.iter().map(|r| e4(r[0])).collect();
        assert_eq!(col, ["13.36", "12.82", "12.19"]);
        let t2 = emit_table(
            &m,
            Section::Isolated,
            &TABLE_OFFSETS,
            &published_positions(Section::Isolated),
        )
        .unwrap();
        let col: Vec<String> = t2.values.iter().map(|r| e4(r[0])).collect();
        assert_eq!(col, ["12.19", "11.56", "11.24"]);
    }

    #[test]
    fn header_matches_published_layout() {
        let m = model();
        let t = emit_table(
            &m,
            Section::Outlet,
            &TABLE_OFFSETS,
            &published_positions(Section::Outlet),
        )
        .unwrap();
        let csv = t.to_csv_string();
        assert!(
            csv.starts_with("x_km,a0,a120,a240,a360,a480,a600\n"),
            "{csv}"
        );
        assert!(csv.contains("\n25,10.86,"), "{csv}");
    }

    #[test]
    fn empty_time_list_gives_header_only() {
        let m = model();
        let t = emit_table(
            &m,
            Section::Inlet,
            &[],
            &published_positions(Section::Inlet),
        )
        .unwrap();
        assert!(t.is_empty());
        assert_eq!(t.to_csv_string(), "x_km\n");
    }

    #[test]
    fn out_of_section_rows_are_rejected() {
        let m = model();
        let err = emit_table(&m, Section::Inlet, &TABLE_OFFSETS, &[15_000.0]);
        assert!(matches!(err, Err(Error::Domain { .. })));
    }

    #[test]
    fn fixture_holds_all_published_cells() {
        let p = PublishedTables::load();
        assert_eq!(p.cells.len(), 54);
        assert_eq!(p.value(Section::Isolated, 20_000.0, 600.0), Some(6.46e4));
        assert_eq!(p.value(Section::Outlet, 20_000.0, 120.0), Some(10.52e4));
        assert_eq!(p.value(Section::Inlet, 0.0, 120.0), Some(14.58e4));
    }

    #[test]
    fn comparison_lists_published_values_and_deltas() {
        let m = model();
        let t = emit_table(
            &m,
            Section::Isolated,
            &TABLE_OFFSETS,
            &published_positions(Section::Isolated),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_comparison_csv(&t, &PublishedTables::load(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().find(|l| l.starts_with("20,600,")).unwrap();
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], "6.46");
        let model: f64 = cols[2].parse().unwrap();
        let delta: f64 = cols[4].parse().unwrap();
        assert!((model - 6.46 - delta).abs() < 0.011);
    }

    #[test]
    fn km_labels() {
        assert_eq!(km_label(0.0), "0");
        assert_eq!(km_label(14_500.0), "14.5");
        assert_eq!(km_label(30_000.0), "30");
    }
}
