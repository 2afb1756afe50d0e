use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::jenks::{discretize, jenks_breaks};
use super::spec::{VarKind, VariableSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// 0-based category indices.
    Discrete(Vec<usize>),
    Continuous(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Discrete(v) => v.len(),
            Column::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Discrete(v) => Column::Discrete(rows.iter().map(|&r| v[r]).collect()),
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Cat(usize),
    Real(f64),
}

/// Column-major observations with one [`VariableSpec`] per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    specs: Vec<VariableSpec>,
    columns: Vec<Column>,
    n: usize,
    /// Free-text notes on where the data came from and how it was transformed.
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

impl Dataset {
    pub fn new(specs: Vec<VariableSpec>, columns: Vec<Column>) -> Result<Self> {
        if specs.len() != columns.len() {
            return Err(Error::Structural(format!(
                "{} specs for {} columns",
                specs.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Column::len);
        for (spec, col) in specs.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Structural(format!(
                    "column `{}` has {} rows, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            match (spec.is_discrete(), col) {
                (true, Column::Discrete(v)) => {
                    let k = spec.cardinality();
                    if let Some(bad) = v.iter().find(|&&c| c >= k) {
                        return Err(Error::Structural(format!(
                            "column `{}` holds category {bad} outside 0..{k}",
                            spec.name
                        )));
                    }
                }
                (false, Column::Continuous(_)) => {}
                _ => {
                    return Err(Error::Type(format!(
                        "column `{}` storage does not match its kind",
                        spec.name
                    )))
                }
            }
        }
        Ok(Self {
            specs,
            columns,
            n,
            provenance: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn spec(&self, col: usize) -> &VariableSpec {
        &self.specs[col]
    }

    pub fn names(&self) -> Vec<&str> {
        self.specs.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, col: usize) -> &Column {
        &self.columns[col]
    }

    pub fn discrete(&self, col: usize) -> Result<&[usize]> {
        match &self.columns[col] {
            Column::Discrete(v) => Ok(v),
            Column::Continuous(_) => Err(Error::Type(format!(
                "column `{}` is continuous",
                self.specs[col].name
            ))),
        }
    }

    pub fn continuous(&self, col: usize) -> Result<&[f64]> {
        match &self.columns[col] {
            Column::Continuous(v) => Ok(v),
            Column::Discrete(_) => Err(Error::Type(format!(
                "column `{}` is discrete",
                self.specs[col].name
            ))),
        }
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        match &self.columns[col] {
            Column::Discrete(v) => Value::Cat(v[row]),
            Column::Continuous(v) => Value::Real(v[row]),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            specs: self.specs.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n: rows.len(),
            provenance: self.provenance.clone(),
        }
    }

    /// Copy with one continuous column overwritten by a constant.
    pub fn with_constant(&self, col: usize, value: f64) -> Result<Dataset> {
        self.continuous(col)?;
        let mut out = self.clone();
        out.columns[col] = Column::Continuous(vec![value; self.n]);
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.specs.iter().map(|s| s.name.as_str()))?;
        for r in 0..self.n {
            let rec: Vec<String> = (0..self.n_cols())
                .map(|c| match self.value(r, c) {
                    Value::Cat(k) => self.specs[c].label(k).to_string(),
                    Value::Real(x) => x.to_string(),
                })
                .collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Read a CSV whose header names the columns declared in `specs` (any order;
/// extra columns are ignored). Rows with an empty cell in a declared column
/// are dropped and counted.
pub fn read_csv<R: Read>(reader: R, specs: &[VariableSpec]) -> Result<(Dataset, LoadReport)> {
    let specs: Vec<VariableSpec> = specs
        .iter()
        .cloned()
        .map(VariableSpec::normalized)
        .collect::<Result<_>>()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let positions: Vec<usize> = specs
        .iter()
        .map(|s| {
            header.iter().position(|h| h == s.name).ok_or_else(|| {
                Error::format("CSV", format!("declared column `{}` missing from header", s.name))
            })
        })
        .collect::<Result<_>>()?;

    enum Raw {
        Cat(Vec<usize>),
        Num(Vec<f64>),
    }
    let mut raws: Vec<Raw> = specs
        .iter()
        .map(|s| {
            if s.kind == VarKind::Continuous || s.breaks.is_some() || s.jenks.is_some() {
                Raw::Num(Vec::new())
            } else {
                Raw::Cat(Vec::new())
            }
        })
        .collect();
    let mut report = LoadReport::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        report.rows_read += 1;
        if positions.iter().any(|&p| rec.get(p).is_none_or(str::is_empty)) {
            report.rows_dropped += 1;
            continue;
        }
        for ((spec, &p), raw) in specs.iter().zip(&positions).zip(raws.iter_mut()) {
            let cell = &rec[p];
            match raw {
                Raw::Num(v) => {
                    let x: f64 = cell.parse().map_err(|_| Error::Ingest {
                        row,
                        column: spec.name.clone(),
                        message: format!("`{cell}` is not a number"),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::Ingest {
                            row,
                            column: spec.name.clone(),
                            message: format!("non-finite value `{cell}`"),
                        });
                    }
                    v.push(x);
                }
                Raw::Cat(v) => {
                    let k = spec.category_of(cell).ok_or_else(|| Error::Ingest {
                        row,
                        column: spec.name.clone(),
                        message: format!("unknown category label `{cell}`"),
                    })?;
                    v.push(k);
                }
            }
        }
    }

    let mut provenance = Vec::new();
    let mut columns = Vec::with_capacity(specs.len());
    for (spec, raw) in specs.iter().zip(raws) {
        let col = match raw {
            Raw::Cat(v) => Column::Discrete(v),
            Raw::Num(v) if spec.kind == VarKind::Continuous => Column::Continuous(v),
            Raw::Num(v) => {
                let breaks = match (&spec.breaks, spec.jenks) {
                    (Some(b), _) => b.clone(),
                    (None, Some(k)) => jenks_breaks(&v, k)?,
                    (None, None) => unreachable!(),
                };
                provenance.push(format!(
                    "{} discretised at {:?}{}",
                    spec.name,
                    breaks,
                    if spec.jenks.is_some() { " (Jenks natural breaks)" } else { "" }
                ));
                Column::Discrete(discretize(&v, &breaks))
            }
        };
        columns.push(col);
    }
    let mut data = Dataset::new(specs, columns)?;
    if report.rows_dropped > 0 {
        provenance.push(format!(
            "{} of {} rows dropped for missing values",
            report.rows_dropped, report.rows_read
        ));
    }
    data.provenance = provenance;
    Ok((data, report))
}

pub fn load_csv(path: &Path, specs: &[VariableSpec]) -> Result<(Dataset, LoadReport)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (mut data, report) = read_csv(std::io::BufReader::new(f), specs)?;
    data.provenance.insert(0, format!("loaded from {}", path.display()));
    Ok((data, report))
}

/// Seeded shuffle of `0..n` cut into `⌈ratio·n⌉` training and the rest.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // 0.7 * 10 is 7.000000000000001 in binary floating point.
    let n_train = ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let val = idx.split_off(n_train.min(n));
    Ok((idx, val))
}

pub fn split(data: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tr, va) = split_indices(data.n_rows(), ratio, seed)?;
    Ok((data.select_rows(&tr), data.select_rows(&va)))
}
