//! JSON schemas for data and inputs, number formatting and atomic output.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::datum::BLDatum;
use crate::error::{Error, Result};
use crate::functional::{BoxDomain, GaussianFn, InputFn, InputTuple, SampledFn};

/// An exponent given as a number or as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Number(f64),
    Fraction { num: i64, den: i64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumFile {
    pub n: usize,
    /// Row-major matrices.
    pub maps: Vec<Vec<Vec<f64>>>,
    pub exponents: Vec<Exponent>,
}

impl DatumFile {
    pub fn from_datum(d: &BLDatum) -> Self {
        let maps = d.maps.iter().map(crate::linalg::rows_of).collect();
        let exponents = match &d.exact_exponents {
            Some(r) => r.iter().map(|q| Exponent::Fraction { num: *q.numer(), den: *q.denom() }).collect(),
            None => d.exponents.iter().map(|&p| Exponent::Number(p)).collect(),
        };
        DatumFile { n: d.n, maps, exponents }
    }

    pub fn into_datum(self) -> Result<BLDatum> {
        let mut exact = Vec::with_capacity(self.exponents.len());
        let mut all_exact = true;
        let mut p = Vec::with_capacity(self.exponents.len());
        for (j, e) in self.exponents.iter().enumerate() {
            match *e {
                Exponent::Number(v) => {
                    all_exact = false;
                    p.push(v);
                }
                Exponent::Fraction { num, den } => {
                    if den == 0 {
                        return Err(Error::ZeroDenominator { index: j });
                    }
                    let q = Ratio::new(num, den);
                    exact.push(q);
                    p.push(num as f64 / den as f64);
                }
            }
        }
        let mut maps = Vec::with_capacity(self.maps.len());
        for (j, rows) in self.maps.iter().enumerate() {
            let cols = rows.first().map_or(self.n, Vec::len);
            if rows.iter().any(|r| r.len() != cols) {
                return Err(Error::InvalidParameters(format!("map {} has rows of unequal length", j + 1)));
            }
            let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
            maps.push(DMatrix::from_row_slice(rows.len(), cols, &flat));
        }
        let mut d = BLDatum::new(self.n, maps, p);
        if all_exact && !exact.is_empty() {
            d.exact_exponents = Some(exact);
        }
        Ok(d)
    }
}

pub fn parse_datum(text: &str) -> Result<BLDatum> {
    let f: DatumFile = serde_json::from_str(text)?;
    f.into_datum()
}

pub fn read_datum(path: &Path) -> Result<BLDatum> {
    parse_datum(&std::fs::read_to_string(path)?)
}

/// One input function in JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSpec {
    /// c·exp(−π⟨A(x − m), x − m⟩); unit mass when `c` is omitted.
    Gaussian { a: Vec<Vec<f64>>, center: Vec<f64>, c: Option<f64> },
    Indicator { lo: Vec<f64>, hi: Vec<f64> },
    Sampled { lo: Vec<f64>, step: Vec<f64>, shape: Vec<usize>, values: Vec<f64> },
}

impl InputSpec {
    pub fn build(&self) -> Result<InputFn> {
        match self {
            InputSpec::Gaussian { a, center, c } => {
                let k = center.len();
                if a.len() != k || a.iter().any(|r| r.len() != k) {
                    return Err(Error::DimensionMismatch { what: "gaussian precision", expected: k, found: a.len() });
                }
                let flat: Vec<f64> = a.iter().flatten().cloned().collect();
                let m = DMatrix::from_row_slice(k, k, &flat);
                let g = GaussianFn::normalized(m, center.clone())?;
                Ok(InputFn::Gaussian(match c {
                    Some(c) => GaussianFn { c: *c, ..g },
                    None => g,
                }))
            }
            InputSpec::Indicator { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch { what: "indicator box", expected: lo.len(), found: hi.len() });
                }
                Ok(InputFn::Indicator(BoxDomain::new(lo.clone(), hi.clone())))
            }
            InputSpec::Sampled { lo, step, shape, values } => Ok(InputFn::Sampled(Arc::new(SampledFn::new(
                lo.clone(),
                step.clone(),
                shape.clone(),
                values.clone(),
            )?))),
        }
    }
}

/// Inputs for `functional` and `ball-check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsFile {
    pub f: Vec<InputSpec>,
    #[serde(default)]
    pub g: Option<Vec<InputSpec>>,
    #[serde(default)]
    pub x_grid: Option<Vec<Vec<f64>>>,
}

pub fn build_tuple(specs: &[InputSpec]) -> Result<InputTuple> {
    Ok(InputTuple::new(specs.iter().map(InputSpec::build).collect::<Result<_>>()?))
}

pub fn parse_inputs(text: &str) -> Result<InputsFile> {
    Ok(serde_json::from_str(text)?)
}

/// Fixed scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Comment header lines followed by a CSV table.
pub fn csv_table(header: &[(&str, String)], columns: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut out = String::new();
    for (k, v) in header {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

/// Write via a temporary file in the target directory and rename; stdout when `path` is None.
pub fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(contents.as_bytes())?;
            s.flush()?;
            Ok(())
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(contents.as_bytes())?;
            tmp.flush()?;
            tmp.persist(p).map_err(|e| Error::Io(e.error))?;
            Ok(())
        }
    }
}
