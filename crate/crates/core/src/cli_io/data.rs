//! CSV ingestion.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{IbrError, Result};
use crate::smoother::DesignMatrix;

/// Which column holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseSelector {
    Name(String),
    /// 1-based column position.
    Index(usize),
}

impl ResponseSelector {
    /// Header names win over positions when both could apply.
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            Self::Name(name) => {
                if let Some(pos) = header.iter().position(|h| h == name) {
                    return Ok(pos);
                }
                match name.parse::<usize>() {
                    Ok(i) => Self::Index(i).resolve(header),
                    Err(_) => Err(IbrError::Data(format!(
                        "no column named '{name}' (columns: {})",
                        header.join(", ")
                    ))),
                }
            }
            Self::Index(i) if *i >= 1 && *i <= header.len() => Ok(i - 1),
            Self::Index(i) => Err(IbrError::Data(format!("column index {i} outside 1..={}", header.len()))),
        }
    }
}

impl std::str::FromStr for ResponseSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(Self::Name(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub design: DesignMatrix,
    pub response: DVector<f64>,
    pub response_name: String,
    pub source: PathBuf,
}

/// Parsed numeric table with its header.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Reads a comma-separated numeric table with a header row.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(IbrError::Data(format!("{}: missing header row", path.display())));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h) {
            return Err(IbrError::Data(format!("duplicate column name '{h}'")));
        }
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        if record.len() != header.len() {
            return Err(IbrError::Data(format!(
                "row {row_no}: expected {} cells, found {}",
                header.len(),
                record.len()
            )));
        }
        let row = record
            .iter()
            .zip(&header)
            .map(|(cell, name)| {
                if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    return Err(IbrError::Data(format!("row {row_no}: missing value in column '{name}'")));
                }
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    IbrError::Data(format!("row {row_no}, column '{name}': cannot parse '{cell}'"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn matrix_from(rows: &[Vec<f64>], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| rows[i][cols[j]])
}

/// Loads a dataset, splitting off the response column.
pub fn load_csv(path: &Path, response: &ResponseSelector) -> Result<Dataset> {
    let table = read_table(path)?;
    let target = response.resolve(&table.header)?;
    let cols: Vec<usize> = (0..table.header.len()).filter(|&j| j != target).collect();
    if cols.is_empty() {
        return Err(IbrError::Data("no covariate columns besides the response".into()));
    }
    let names = cols.iter().map(|&j| table.header[j].clone()).collect();
    let design = DesignMatrix::new(matrix_from(&table.rows, &cols), names)?;
    Ok(Dataset {
        design,
        response: DVector::from_vec(table.column(target)),
        response_name: table.header[target].clone(),
        source: path.to_path_buf(),
    })
}

/// Loads covariates for prediction. Columns are matched by name when all
/// expected names are present, otherwise by position.
pub fn load_covariates(path: &Path, expected: &[String]) -> Result<(Vec<String>, DMatrix<f64>)> {
    let table = read_table(path)?;
    let by_name: Option<Vec<usize>> =
        expected.iter().map(|name| table.header.iter().position(|h| h == name)).collect();
    let cols = match by_name {
        Some(c) => c,
        None if table.header.len() == expected.len() => (0..expected.len()).collect(),
        None => {
            return Err(IbrError::Data(format!(
                "new data has columns [{}], model expects [{}]",
                table.header.join(", "),
                expected.join(", ")
            )))
        }
    };
    let names = cols.iter().map(|&j| table.header[j].clone()).collect();
    Ok((names, matrix_from(&table.rows, &cols)))
}

/// Checks the ozone table layout: 330 rows, 9 numeric columns, response
/// first.
pub fn validate_ozone(dataset: &Dataset) -> Result<()> {
    let (n, d) = (dataset.design.n(), dataset.design.d());
    if n != 330 || d != 8 {
        return Err(IbrError::Data(format!(
            "ozone data must have 330 rows and 9 columns (response first); found {n} rows and {} columns",
            d + 1
        )));
    }
    Ok(())
}
