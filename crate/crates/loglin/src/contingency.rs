//! Immutable multiway contingency tables.
//!
//! A [`Table`] stores one cell per element of the cross-product of its
//! factors' levels, in row-major order (the last factor varies fastest).
//! Integer tables ([`ContingencyTable`]) hold observed counts; real tables
//! ([`RealTable`]) hold fitted means and reuse the same shape logic.

use std::collections::HashSet;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named categorical variable with an explicit, stable level order.
///
/// The first level is the conventional default baseline for treatment
/// coding; the design module lets callers override that per factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    name: String,
    levels: Vec<String>,
}

impl Factor {
    /// Builds a factor, rejecting duplicate level labels and fewer than
    /// two levels.
    pub fn new<N, L, S>(name: N, levels: L) -> Result<Self>
    where
        N: Into<String>,
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.len() < 2 {
            return Err(Error::TooFewLevels(name));
        }
        let mut seen = HashSet::new();
        for level in &levels {
            if !seen.insert(level.as_str()) {
                return Err(Error::DuplicateLevel {
                    factor: name,
                    level: level.clone(),
                });
            }
        }
        Ok(Self { name, levels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    /// Position of `level` in this factor's declared order.
    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

/// Cell value: counts (`u64`) or nonnegative reals (`f64`).
pub trait Cell: Copy + Default + PartialEq + std::ops::AddAssign + std::fmt::Debug {
    fn to_f64(self) -> f64;
    /// Round-trippable text form (integers plain, floats shortest-exact).
    fn format(self) -> String;
    fn parse(text: &str) -> Option<Self>;
}

impl Cell for u64 {
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn format(self) -> String {
        self.to_string()
    }
    fn parse(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

impl Cell for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn format(self) -> String {
        // `Display` for f64 emits the shortest string that parses back to
        // the same bits, which is what the round-trip guarantee needs.
        format!("{self}")
    }
    fn parse(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

/// Multiway table over a fixed cross-classification.
///
/// Cells are immutable after construction; every operation returns a new
/// table. Cell storage order is row-major over the factors as declared,
/// so serialized forms are stable.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<C> {
    factors: Vec<Factor>,
    cells: Vec<C>,
}

/// Observed integer counts.
pub type ContingencyTable = Table<u64>;
/// Fitted (or otherwise real-valued) cells over the same shapes.
pub type RealTable = Table<f64>;

#[derive(Serialize, Deserialize)]
struct TableDoc<C> {
    factors: Vec<Factor>,
    cells: Vec<C>,
}

impl<C: Cell> Table<C> {
    /// Builds a table directly from a full cell vector in storage order.
    pub fn from_cells(factors: Vec<Factor>, cells: Vec<C>) -> Result<Self> {
        Self::check_factors(&factors)?;
        let want: usize = factors.iter().map(|f| f.levels.len()).product();
        if cells.len() != want {
            return Err(Error::CellArity {
                got: cells.len(),
                want,
            });
        }
        Ok(Self { factors, cells })
    }

    /// Builds a table from sparse `(level tuple, value)` entries; cells not
    /// mentioned are zero. Rejects unknown levels and duplicate tuples.
    pub fn build<S: AsRef<str>>(factors: Vec<Factor>, entries: &[(Vec<S>, C)]) -> Result<Self> {
        Self::check_factors(&factors)?;
        let size: usize = factors.iter().map(|f| f.levels.len()).product();
        let mut cells = vec![C::default(); size];
        let mut filled = vec![false; size];
        let table = Self { factors, cells: Vec::new() };
        for (labels, value) in entries {
            let idx = table.index_of(labels)?;
            if filled[idx] {
                let tuple: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
                return Err(Error::DuplicateCell(tuple.join(", ")));
            }
            filled[idx] = true;
            cells[idx] = *value;
        }
        Ok(Self { factors: table.factors, cells })
    }

    fn check_factors(factors: &[Factor]) -> Result<()> {
        let mut seen = HashSet::new();
        for f in factors {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateFactor(f.name.clone()));
            }
        }
        Ok(())
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Cells in storage order (row-major, last factor fastest).
    pub fn cells(&self) -> &[C] {
        &self.cells
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.levels.len()).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Sum of all cells.
    pub fn total(&self) -> C {
        let mut acc = C::default();
        for &c in &self.cells {
            acc += c;
        }
        acc
    }

    /// Axis index of a factor by name.
    pub fn axis(&self, factor: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == factor)
            .ok_or_else(|| Error::UnknownFactor(factor.to_string()))
    }

    fn strides(&self) -> Vec<usize> {
        let shape = self.shape();
        let mut strides = vec![1usize; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        strides
    }

    fn index_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<usize> {
        if labels.len() != self.factors.len() {
            return Err(Error::CellArity {
                got: labels.len(),
                want: self.factors.len(),
            });
        }
        let strides = self.strides();
        let mut idx = 0;
        for (axis, label) in labels.iter().enumerate() {
            let label = label.as_ref();
            let li = self.factors[axis].level_index(label).ok_or_else(|| {
                Error::UnknownLevel {
                    factor: self.factors[axis].name.clone(),
                    level: label.to_string(),
                }
            })?;
            idx += li * strides[axis];
        }
        Ok(idx)
    }

    /// Cell value addressed by one level label per factor, in factor order.
    pub fn cell<S: AsRef<str>>(&self, labels: &[S]) -> Result<C> {
        Ok(self.cells[self.index_of(labels)?])
    }

    /// Level indices of a flat cell position, one per axis.
    pub fn coords(&self, flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let shape = self.shape();
        (0..shape.len())
            .map(|a| (flat / strides[a]) % shape[a])
            .collect()
    }

    /// Sums out every factor not named in `keep`. Kept factors stay in the
    /// table's declared order; the total is preserved.
    pub fn margin(&self, keep: &[&str]) -> Result<Table<C>> {
        if keep.is_empty() {
            return Err(Error::EmptyMargin);
        }
        let mut keep_axes = Vec::new();
        for name in keep {
            let axis = self.axis(name)?;
            if !keep_axes.contains(&axis) {
                keep_axes.push(axis);
            }
        }
        keep_axes.sort_unstable();
        let out_factors: Vec<Factor> = keep_axes.iter().map(|&a| self.factors[a].clone()).collect();
        let out_shape: Vec<usize> = keep_axes.iter().map(|&a| self.factors[a].levels.len()).collect();
        let mut out_strides = vec![1usize; out_shape.len()];
        for i in (0..out_shape.len().saturating_sub(1)).rev() {
            out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
        }
        let mut out_cells = vec![C::default(); out_shape.iter().product()];
        for (flat, &value) in self.cells.iter().enumerate() {
            let coords = self.coords(flat);
            let out_idx: usize = keep_axes
                .iter()
                .enumerate()
                .map(|(k, &a)| coords[a] * out_strides[k])
                .sum();
            out_cells[out_idx] += value;
        }
        Table::from_cells(out_factors, out_cells)
    }

    /// Merges levels of one factor. `mapping` must cover every old level;
    /// the merged factor's level order follows first occurrence of each new
    /// label in the mapping.
    pub fn collapse(&self, factor: &str, mapping: &[(String, String)]) -> Result<Table<C>> {
        let axis = self.axis(factor)?;
        let old = &self.factors[axis];
        // Validate mapping keys and build old-level -> new-level lookup.
        let mut new_levels: Vec<String> = Vec::new();
        let mut old_to_new = vec![usize::MAX; old.levels.len()];
        for (from, to) in mapping {
            let oi = old.level_index(from).ok_or_else(|| Error::UnknownLevel {
                factor: factor.to_string(),
                level: from.clone(),
            })?;
            let ni = match new_levels.iter().position(|l| l == to) {
                Some(i) => i,
                None => {
                    new_levels.push(to.clone());
                    new_levels.len() - 1
                }
            };
            old_to_new[oi] = ni;
        }
        if let Some(missing) = old_to_new.iter().position(|&n| n == usize::MAX) {
            return Err(Error::UnmappedLevel(old.levels[missing].clone()));
        }
        let mut out_factors = self.factors.clone();
        out_factors[axis] = Factor::new(factor, new_levels.clone())?;
        let out_shape: Vec<usize> = out_factors.iter().map(|f| f.levels.len()).collect();
        let mut out_strides = vec![1usize; out_shape.len()];
        for i in (0..out_shape.len() - 1).rev() {
            out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
        }
        let mut out_cells = vec![C::default(); out_shape.iter().product()];
        for (flat, &value) in self.cells.iter().enumerate() {
            let mut coords = self.coords(flat);
            coords[axis] = old_to_new[coords[axis]];
            let out_idx: usize = coords
                .iter()
                .zip(&out_strides)
                .map(|(c, s)| c * s)
                .sum();
            out_cells[out_idx] += value;
        }
        Table::from_cells(out_factors, out_cells)
    }

    /// Conditional odds ratios of `pair` within each stratum of `given`.
    ///
    /// For each level of the conditioning factor this returns the set of
    /// baseline-referenced 2×2 odds ratios
    /// `(c[0][0]·c[i][j]) / (c[0][j]·c[i][0])` for `i, j ≥ 1`, flattened
    /// row-major. The table must consist of exactly these three factors.
    /// Any zero cell is an error rather than an infinite ratio.
    pub fn conditional_odds_ratios(
        &self,
        pair: (&str, &str),
        given: &str,
    ) -> Result<Vec<Vec<f64>>> {
        let (ra, ca) = (self.axis(pair.0)?, self.axis(pair.1)?);
        let ga = self.axis(given)?;
        if ra == ca || ra == ga || ca == ga || self.factors.len() != 3 {
            return Err(Error::BadOddsRatioRequest);
        }
        let strides = self.strides();
        let (ni, nj, nk) = (
            self.factors[ra].levels.len(),
            self.factors[ca].levels.len(),
            self.factors[ga].levels.len(),
        );
        let at = |i: usize, j: usize, k: usize| -> Result<f64> {
            let v = self.cells[i * strides[ra] + j * strides[ca] + k * strides[ga]].to_f64();
            if v == 0.0 {
                return Err(Error::ZeroCell(format!(
                    "{}={}, {}={}, {}={}",
                    pair.0,
                    self.factors[ra].levels[i],
                    pair.1,
                    self.factors[ca].levels[j],
                    given,
                    self.factors[ga].levels[k]
                )));
            }
            Ok(v)
        };
        let mut strata = Vec::with_capacity(nk);
        for k in 0..nk {
            let mut ors = Vec::with_capacity((ni - 1) * (nj - 1));
            for i in 1..ni {
                for j in 1..nj {
                    ors.push(at(0, 0, k)? * at(i, j, k)? / (at(0, j, k)? * at(i, 0, k)?));
                }
            }
            strata.push(ors);
        }
        Ok(strata)
    }

    /// Writes the table as flat CSV: one row per cell (level labels then the
    /// cell value), in storage order.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        header.push("count");
        w.write_record(&header)?;
        for (flat, &value) in self.cells.iter().enumerate() {
            let coords = self.coords(flat);
            let mut row: Vec<String> = coords
                .iter()
                .enumerate()
                .map(|(a, &c)| self.factors[a].levels[c].clone())
                .collect();
            row.push(value.format());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Rebuilds a table from the flat CSV form. Factor names come from the
    /// header (all columns before the final `count` column); level order is
    /// order of first appearance, which round-trips `write_csv` exactly.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Table<C>> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[header.len() - 1] != "count" {
            return Err(Error::MissingColumn("count".to_string()));
        }
        let names: Vec<String> = header.iter().take(header.len() - 1).map(String::from).collect();
        let mut levels: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        let mut entries: Vec<(Vec<String>, C)> = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record?;
            let mut labels = Vec::with_capacity(names.len());
            for (a, label) in record.iter().take(names.len()).enumerate() {
                if !levels[a].iter().any(|l| l == label) {
                    levels[a].push(label.to_string());
                }
                labels.push(label.to_string());
            }
            let raw = record.get(names.len()).unwrap_or("");
            let value = C::parse(raw).ok_or_else(|| Error::InvalidValue {
                what: "cell count",
                value: format!("{raw} (row {})", i + 2),
            })?;
            entries.push((labels, value));
        }
        let factors: Result<Vec<Factor>> = names
            .into_iter()
            .zip(levels)
            .map(|(n, ls)| Factor::new(n, ls))
            .collect();
        Table::build(factors?, &entries)
    }

    pub fn from_csv_str(text: &str) -> Result<Table<C>> {
        Self::read_csv(text.as_bytes())
    }
}

impl<C: Cell + Serialize + for<'de> Deserialize<'de>> Table<C> {
    /// JSON document form: factor list plus the flat cell vector.
    pub fn to_json(&self) -> Result<String> {
        let doc = TableDoc {
            factors: self.factors.clone(),
            cells: self.cells.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Table<C>> {
        let doc: TableDoc<C> = serde_json::from_str(text)?;
        Table::from_cells(doc.factors, doc.cells)
    }
}

impl ContingencyTable {
    /// A real-valued table with the same factors (e.g. to hold fitted means).
    pub fn with_real_cells(&self, cells: Vec<f64>) -> Result<RealTable> {
        Table::from_cells(self.factors.clone(), cells)
    }

    /// Cells as `f64`, in storage order (the response vector for fitting).
    pub fn counts_f64(&self) -> Vec<f64> {
        self.cells.iter().map(|&c| c as f64).collect()
    }
}
