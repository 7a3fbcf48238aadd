//! CSV import/export for the distribution types.
//!
//! | type                | columns                              |
//! |---------------------|--------------------------------------|
//! | [`Marginal`]        | `bin_lo,bin_hi,mass`                 |
//! | [`SelectionFunction`] | `bin_lo,bin_hi,category,prob`      |
//! | [`BinnedJoint`]     | `bin_lo,bin_hi,category,mass`        |
//!
//! A header row is required. Bins must be contiguous and listed in
//! increasing order; every (bin, category) cell must appear exactly once.
//! Floats are written in shortest round-trip form, so export followed by
//! import is lossless.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{BinnedJoint, Grid, Marginal, SelectionFunction};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct MarginalRow {
    bin_lo: f64,
    bin_hi: f64,
    mass: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionRow {
    bin_lo: f64,
    bin_hi: f64,
    category: usize,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JointRow {
    bin_lo: f64,
    bin_hi: f64,
    category: usize,
    mass: f64,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Collects distinct bins (in order of first appearance) into an edge list.
fn edges_from_bins(bins: &[(f64, f64)]) -> Result<Vec<f64>> {
    let first = bins.first().ok_or_else(|| Error::Parse("no data rows".into()))?;
    let mut edges = vec![first.0, first.1];
    for w in bins.windows(2) {
        if w[1].0 != w[0].1 {
            return Err(Error::Parse(format!(
                "bins not contiguous: [{}, {}] followed by [{}, {}]",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        edges.push(w[1].1);
    }
    Ok(edges)
}

fn cells_to_grid<T>(rows: Vec<(f64, f64, usize, T)>) -> Result<(Grid, Vec<T>)> {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    for (lo, hi, _, _) in &rows {
        if bins.last() != Some(&(*lo, *hi)) {
            if bins.contains(&(*lo, *hi)) {
                return Err(Error::Parse(format!("rows for bin [{lo}, {hi}] are not consecutive")));
            }
            bins.push((*lo, *hi));
        }
    }
    let edges = edges_from_bins(&bins)?;
    let categories = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
    let grid = Grid::new(edges, categories)?;
    let mut values: Vec<Option<T>> = (0..grid.cells()).map(|_| None).collect();
    let mut bin = 0;
    for (lo, hi, cat, v) in rows {
        while bins[bin] != (lo, hi) {
            bin += 1;
        }
        let slot = &mut values[grid.cell(bin, cat)];
        if slot.is_some() {
            return Err(Error::Parse(format!(
                "duplicate cell (bin [{lo}, {hi}], category {cat})"
            )));
        }
        *slot = Some(v);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::Parse(format!(
                    "missing cell (bin {}, category {})",
                    i / grid.categories(),
                    i % grid.categories()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, values))
}

pub fn read_marginal<R: Read>(r: R) -> Result<Marginal> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["bin_lo", "bin_hi", "mass"])?;
    let rows: Vec<MarginalRow> = rdr.deserialize().collect::<Result<_, _>>()?;
    let bins: Vec<(f64, f64)> = rows.iter().map(|r| (r.bin_lo, r.bin_hi)).collect();
    let edges = edges_from_bins(&bins)?;
    Marginal::new(edges, rows.iter().map(|r| r.mass).collect())
}

pub fn write_marginal<W: Write>(w: W, m: &Marginal) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (i, mass) in m.mass().iter().enumerate() {
        wtr.serialize(MarginalRow {
            bin_lo: m.edges()[i],
            bin_hi: m.edges()[i + 1],
            mass: *mass,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_selection<R: Read>(r: R) -> Result<SelectionFunction> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["bin_lo", "bin_hi", "category", "prob"])?;
    let rows = rdr
        .deserialize::<SelectionRow>()
        .map(|r| r.map(|r| (r.bin_lo, r.bin_hi, r.category, r.prob)))
        .collect::<Result<Vec<_>, _>>()?;
    let (grid, prob) = cells_to_grid(rows)?;
    SelectionFunction::new(grid, prob)
}

pub fn write_selection<W: Write>(w: W, sel: &SelectionFunction) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let g = sel.grid();
    for bin in 0..g.bins() {
        for category in 0..g.categories() {
            wtr.serialize(SelectionRow {
                bin_lo: g.edges()[bin],
                bin_hi: g.edges()[bin + 1],
                category,
                prob: sel.at(bin, category),
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_joint<R: Read>(r: R) -> Result<BinnedJoint> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["bin_lo", "bin_hi", "category", "mass"])?;
    let rows = rdr
        .deserialize::<JointRow>()
        .map(|r| r.map(|r| (r.bin_lo, r.bin_hi, r.category, r.mass)))
        .collect::<Result<Vec<_>, _>>()?;
    let (grid, mass) = cells_to_grid(rows)?;
    BinnedJoint::new(grid, mass)
}

pub fn write_joint<W: Write>(w: W, joint: &BinnedJoint) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let g = joint.grid();
    for bin in 0..g.bins() {
        for category in 0..g.categories() {
            wtr.serialize(JointRow {
                bin_lo: g.edges()[bin],
                bin_hi: g.edges()[bin + 1],
                category,
                mass: joint.at(bin, category),
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_marginal(path: impl AsRef<Path>) -> Result<Marginal> {
    read_marginal(std::fs::File::open(path)?)
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<SelectionFunction> {
    read_selection(std::fs::File::open(path)?)
}

pub fn load_joint(path: impl AsRef<Path>) -> Result<BinnedJoint> {
    read_joint(std::fs::File::open(path)?)
}

pub fn save_marginal(path: impl AsRef<Path>, m: &Marginal) -> Result<()> {
    write_marginal(std::io::BufWriter::new(std::fs::File::create(path)?), m)
}

pub fn save_selection(path: impl AsRef<Path>, sel: &SelectionFunction) -> Result<()> {
    write_selection(std::io::BufWriter::new(std::fs::File::create(path)?), sel)
}

pub fn save_joint(path: impl AsRef<Path>, joint: &BinnedJoint) -> Result<()> {
    write_joint(std::io::BufWriter::new(std::fs::File::create(path)?), joint)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_roundtrip_is_exact() {
        let m = Marginal::from_weights(vec![-1.0, -0.3, 0.1, 2.0 / 3.0], vec![0.1, 0.7, 0.2]).unwrap();
        let mut buf = Vec::new();
        write_marginal(&mut buf, &m).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("bin_lo,bin_hi,mass\n"));
        let back = read_marginal(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn selection_and_joint_roundtrip() {
        let g = Grid::uniform(0.0, 3.0, 3, 2).unwrap();
        let sel = SelectionFunction::new(g.clone(), vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_selection(&mut buf, &sel).unwrap();
        assert_eq!(read_selection(buf.as_slice()).unwrap(), sel);

        let joint = BinnedJoint::from_weights(g, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mut buf = Vec::new();
        write_joint(&mut buf, &joint).unwrap();
        assert_eq!(read_joint(buf.as_slice()).unwrap(), joint);
    }

    #[test]
    fn rejects_missing_header_gap_and_missing_cell() {
        assert!(read_marginal("0,1,0.5\n1,2,0.5\n".as_bytes()).is_err());
        assert!(read_marginal("bin_lo,bin_hi,mass\n0,1,0.5\n1.5,2,0.5\n".as_bytes()).is_err());
        let missing = "bin_lo,bin_hi,category,prob\n0,1,0,0.5\n0,1,1,0.5\n1,2,0,0.5\n";
        assert!(read_selection(missing.as_bytes()).is_err());
        let dup = "bin_lo,bin_hi,category,prob\n0,1,0,0.5\n0,1,0,0.5\n";
        assert!(read_selection(dup.as_bytes()).is_err());
    }

    #[test]
    fn accepts_unordered_categories_within_bin() {
        let text = "bin_lo,bin_hi,category,prob\n0,1,1,0.25\n0,1,0,1\n1,2,0,0\n1,2,1,0.5\n";
        let sel = read_selection(text.as_bytes()).unwrap();
        assert_eq!(sel.prob(), &[1.0, 0.25, 0.0, 0.5]);
    }
}
