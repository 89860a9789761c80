//! Hierarchical model specifications and treatment-coded design matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::contingency::{ContingencyTable, Factor};
use crate::error::{Error, Result};

/// A hierarchical log-linear model: main effects plus interaction terms.
///
/// Terms keep their declared order (it fixes design-matrix column order),
/// but equality is set-based, so `"性別+年齡+年齡*性別"` equals
/// `"年齡+性別+性別*年齡"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    mains: Vec<String>,
    interactions: Vec<Vec<String>>,
}

impl ModelSpec {
    /// Validates hierarchy: interaction factors must be distinct, present
    /// as main effects, and every two-factor subset of a three-way term
    /// must itself be a term.
    pub fn new(mains: Vec<String>, interactions: Vec<Vec<String>>) -> Result<Self> {
        let mut seen_mains = BTreeSet::new();
        for m in &mains {
            if m.is_empty() {
                return Err(Error::BadModelTerm(String::new()));
            }
            if !seen_mains.insert(m.as_str()) {
                return Err(Error::BadModelTerm(m.clone()));
            }
        }
        let mut seen_terms: BTreeSet<BTreeSet<&str>> = BTreeSet::new();
        for term in &interactions {
            let text = term.join("*");
            if term.len() < 2 || term.len() > 3 {
                return Err(Error::BadModelTerm(text));
            }
            let set: BTreeSet<&str> = term.iter().map(String::as_str).collect();
            if set.len() != term.len() || !seen_terms.insert(set) {
                return Err(Error::BadModelTerm(text));
            }
            for f in term {
                if !seen_mains.contains(f.as_str()) {
                    return Err(Error::NonHierarchical {
                        term: text,
                        missing: f.clone(),
                    });
                }
            }
        }
        // every pair inside a 3-way term must appear as a 2-way term
        for term in &interactions {
            if term.len() == 3 {
                for skip in 0..3 {
                    let pair: BTreeSet<&str> = term
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, f)| f.as_str())
                        .collect();
                    let present = interactions.iter().any(|t| {
                        t.len() == 2 && t.iter().map(String::as_str).collect::<BTreeSet<_>>() == pair
                    });
                    if !present {
                        return Err(Error::NonHierarchical {
                            term: term.join("*"),
                            missing: pair.into_iter().collect::<Vec<_>>().join("*"),
                        });
                    }
                }
            }
        }
        Ok(Self { mains, interactions })
    }

    pub fn mains(&self) -> &[String] {
        &self.mains
    }

    pub fn interactions(&self) -> &[Vec<String>] {
        &self.interactions
    }

    /// All terms, mains first: the margins these name are the model's
    /// sufficient statistics.
    pub fn terms(&self) -> Vec<Vec<&str>> {
        self.mains
            .iter()
            .map(|m| vec![m.as_str()])
            .chain(
                self.interactions
                    .iter()
                    .map(|t| t.iter().map(String::as_str).collect()),
            )
            .collect()
    }

    /// True when the spec contains an interaction over all of `factors`
    /// (with the full hierarchy below it), i.e. it fits the data exactly.
    pub fn is_saturated(&self, factors: &[Factor]) -> bool {
        let all: BTreeSet<&str> = factors.iter().map(Factor::name).collect();
        self.interactions
            .iter()
            .any(|t| t.iter().map(String::as_str).collect::<BTreeSet<_>>() == all)
    }

    fn normalized(&self) -> (BTreeSet<&str>, BTreeSet<BTreeSet<&str>>) {
        (
            self.mains.iter().map(String::as_str).collect(),
            self.interactions
                .iter()
                .map(|t| t.iter().map(String::as_str).collect())
                .collect(),
        )
    }
}

impl PartialEq for ModelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.normalized() == other.normalized()
    }
}

impl Eq for ModelSpec {}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .mains
            .iter()
            .cloned()
            .chain(self.interactions.iter().map(|t| t.join("*")))
            .collect();
        f.write_str(&terms.join("+"))
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Parses the textual form, e.g.
    /// `"年齡+性別+縣市+年齡*性別+年齡*縣市+性別*縣市"`.
    fn from_str(text: &str) -> Result<Self> {
        let mut mains = Vec::new();
        let mut interactions = Vec::new();
        for term in text.split('+') {
            let parts: Vec<String> = term.split('*').map(|p| p.trim().to_string()).collect();
            if parts.iter().any(String::is_empty) {
                return Err(Error::BadModelTerm(term.trim().to_string()));
            }
            match parts.len() {
                1 => mains.push(parts.into_iter().next().unwrap()),
                2 | 3 => interactions.push(parts),
                _ => return Err(Error::BadModelTerm(term.trim().to_string())),
            }
        }
        Self::new(mains, interactions)
    }
}

/// The nine hierarchical models over three factors, in lattice order:
/// main effects; one pairwise added (three variants); two pairwise
/// (three variants); all three pairwise; saturated.
///
/// For factors (a, b, c) the pairwise terms are ordered a*b, a*c, b*c
/// within each spec, and the single/double-interaction variants are
/// ordered a*c, a*b, b*c and then {a*b,b*c}, {a*b,a*c}, {a*c,b*c}.
pub fn enumerate_lattice(factors: &[&str]) -> Result<Vec<ModelSpec>> {
    if factors.len() != 3 {
        return Err(Error::LatticeArity(factors.len()));
    }
    let (a, b, c) = (factors[0], factors[1], factors[2]);
    let mains: Vec<String> = factors.iter().map(|s| s.to_string()).collect();
    let pair = |x: &str, y: &str| vec![x.to_string(), y.to_string()];
    let ab = || pair(a, b);
    let ac = || pair(a, c);
    let bc = || pair(b, c);
    let specs = vec![
        ModelSpec::new(mains.clone(), vec![])?,
        ModelSpec::new(mains.clone(), vec![ac()])?,
        ModelSpec::new(mains.clone(), vec![ab()])?,
        ModelSpec::new(mains.clone(), vec![bc()])?,
        ModelSpec::new(mains.clone(), vec![ab(), bc()])?,
        ModelSpec::new(mains.clone(), vec![ab(), ac()])?,
        ModelSpec::new(mains.clone(), vec![ac(), bc()])?,
        ModelSpec::new(mains.clone(), vec![ab(), ac(), bc()])?,
        ModelSpec::new(
            mains,
            vec![ab(), ac(), bc(), vec![a.to_string(), b.to_string(), c.to_string()]],
        )?,
    ];
    Ok(specs)
}

/// Baseline level per factor for treatment coding. Factors without an
/// entry default to their first level.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baselines(BTreeMap<String, String>);

impl Baselines {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insertion.
    pub fn with(mut self, factor: impl Into<String>, level: impl Into<String>) -> Self {
        self.0.insert(factor.into(), level.into());
        self
    }

    pub fn get(&self, factor: &str) -> Option<&str> {
        self.0.get(factor).map(String::as_str)
    }

    /// The baseline's level index in `factor`, defaulting to 0 when the
    /// factor has no explicit entry.
    pub fn index_in(&self, factor: &Factor) -> Result<usize> {
        match self.0.get(factor.name()) {
            None => Ok(0),
            Some(level) => factor.level_index(level).ok_or_else(|| Error::UnknownLevel {
                factor: factor.name().to_string(),
                level: level.clone(),
            }),
        }
    }

    /// A copy with `factor`'s baseline moved to `new_baseline`, validated
    /// against the given factor definitions.
    pub fn rebased(&self, factors: &[Factor], factor: &str, new_baseline: &str) -> Result<Self> {
        let def = factors
            .iter()
            .find(|f| f.name() == factor)
            .ok_or_else(|| Error::UnknownFactor(factor.to_string()))?;
        if def.level_index(new_baseline).is_none() {
            return Err(Error::UnknownLevel {
                factor: factor.to_string(),
                level: new_baseline.to_string(),
            });
        }
        let mut map = self.0.clone();
        map.insert(factor.to_string(), new_baseline.to_string());
        Ok(Self(map))
    }

    /// `factor=level` pairs in map order (for display and serialization).
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(f, l)| (f.as_str(), l.as_str()))
    }
}

/// Treatment-coded design matrix: one row per table cell in storage
/// order, labeled columns, 0/1 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    /// Assembles a design from a raw matrix and its column labels, for
    /// callers building custom (non-factorial) designs.
    pub fn from_parts(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.ncols() {
            return Err(Error::DesignShape {
                rows: labels.len(),
                cells: matrix.ncols(),
            });
        }
        Ok(Self { matrix, labels })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Column labels: `Intercept`, `因子[level]` for dummies, and
    /// `因子[level]*因子[level]` products for interactions.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Builds the treatment-coded design for `spec` over `table`'s cells.
///
/// Column order is deterministic: intercept; then each main effect in
/// spec order contributing one dummy per non-baseline level in factor
/// order; then each interaction in spec order contributing the products
/// of its parents' dummies, earlier factors varying slowest.
pub fn build_design(
    table: &ContingencyTable,
    spec: &ModelSpec,
    baselines: &Baselines,
) -> Result<DesignMatrix> {
    let n = table.n_cells();
    // per-factor dummies: (axis, non-baseline level indices)
    struct FactorDummies {
        axis: usize,
        levels: Vec<usize>,
        labels: Vec<String>,
    }
    let mut dummy_info: BTreeMap<&str, FactorDummies> = BTreeMap::new();
    for name in spec.mains() {
        let axis = table.axis(name)?;
        let factor = &table.factors()[axis];
        let base = baselines.index_in(factor)?;
        let levels: Vec<usize> = (0..factor.levels().len()).filter(|&i| i != base).collect();
        let labels = levels
            .iter()
            .map(|&i| format!("{}[{}]", name, factor.levels()[i]))
            .collect();
        dummy_info.insert(name.as_str(), FactorDummies { axis, levels, labels });
    }

    let coords: Vec<Vec<usize>> = (0..n).map(|i| table.coords(i)).collect();
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut labels: Vec<String> = vec!["Intercept".to_string()];

    let dummy_column = |axis: usize, level: usize| -> Vec<f64> {
        coords
            .iter()
            .map(|c| if c[axis] == level { 1.0 } else { 0.0 })
            .collect()
    };

    for name in spec.mains() {
        let info = &dummy_info[name.as_str()];
        for (k, &level) in info.levels.iter().enumerate() {
            columns.push(dummy_column(info.axis, level));
            labels.push(info.labels[k].clone());
        }
    }

    for term in spec.interactions() {
        let parents: Vec<&FactorDummies> = term
            .iter()
            .map(|f| {
                dummy_info
                    .get(f.as_str())
                    .ok_or_else(|| Error::UnknownFactor(f.clone()))
            })
            .collect::<Result<_>>()?;
        // odometer over parent dummy indices, first factor slowest
        let sizes: Vec<usize> = parents.iter().map(|p| p.levels.len()).collect();
        let combos: usize = sizes.iter().product();
        for combo in 0..combos {
            let mut rem = combo;
            let mut picks = vec![0usize; parents.len()];
            for i in (0..parents.len()).rev() {
                picks[i] = rem % sizes[i];
                rem /= sizes[i];
            }
            let mut col = vec![1.0; n];
            let mut label_parts = Vec::with_capacity(parents.len());
            for (p, &pick) in parents.iter().zip(&picks) {
                let level = p.levels[pick];
                for (v, c) in col.iter_mut().zip(&coords) {
                    if c[p.axis] != level {
                        *v = 0.0;
                    }
                }
                label_parts.push(p.labels[pick].clone());
            }
            columns.push(col);
            labels.push(label_parts.join("*"));
        }
    }

    let matrix = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
    Ok(DesignMatrix { matrix, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::Table;

    fn three_factor_table(regions: usize) -> ContingencyTable {
        let region_names: Vec<String> = (0..regions).map(|i| format!("r{i}")).collect();
        let factors = vec![
            Factor::new("性別", ["女性", "男性"]).unwrap(),
            Factor::new("年齡", ["0-29", "30-59", "60+"]).unwrap(),
            Factor::new("縣市", region_names).unwrap(),
        ];
        let cells = vec![1u64; 2 * 3 * regions];
        Table::from_cells(factors, cells).unwrap()
    }

    #[test]
    fn parse_and_print_round_trip() {
        let text = "年齡+性別+縣市+年齡*性別+年齡*縣市+性別*縣市";
        let spec: ModelSpec = text.parse().unwrap();
        assert_eq!(spec.to_string(), text);
        assert_eq!(spec.mains().len(), 3);
        assert_eq!(spec.interactions().len(), 3);
        // equality is set-based
        let reordered: ModelSpec = "縣市+性別+年齡+性別*縣市+年齡*縣市+性別*年齡"
            .parse()
            .unwrap();
        assert_eq!(spec, reordered);
    }

    #[test]
    fn rejects_non_hierarchical_and_malformed_specs() {
        assert!(matches!(
            "年齡+年齡*性別".parse::<ModelSpec>(),
            Err(Error::NonHierarchical { .. })
        ));
        assert!(matches!(
            "年齡+性別+縣市+年齡*性別*縣市".parse::<ModelSpec>(),
            Err(Error::NonHierarchical { .. })
        ));
        assert!(matches!(
            "年齡++性別".parse::<ModelSpec>(),
            Err(Error::BadModelTerm(_))
        ));
        assert!(matches!(
            "年齡+年齡".parse::<ModelSpec>(),
            Err(Error::BadModelTerm(_))
        ));
        assert!(matches!(
            "年齡+性別+年齡*年齡".parse::<ModelSpec>(),
            Err(Error::BadModelTerm(_))
        ));
    }

    #[test]
    fn lattice_has_nine_models_in_order() {
        let lattice = enumerate_lattice(&["年齡", "性別", "縣市"]).unwrap();
        let printed: Vec<String> = lattice.iter().map(ModelSpec::to_string).collect();
        assert_eq!(
            printed,
            [
                "年齡+性別+縣市",
                "年齡+性別+縣市+年齡*縣市",
                "年齡+性別+縣市+年齡*性別",
                "年齡+性別+縣市+性別*縣市",
                "年齡+性別+縣市+年齡*性別+性別*縣市",
                "年齡+性別+縣市+年齡*性別+年齡*縣市",
                "年齡+性別+縣市+年齡*縣市+性別*縣市",
                "年齡+性別+縣市+年齡*性別+年齡*縣市+性別*縣市",
                "年齡+性別+縣市+年齡*性別+年齡*縣市+性別*縣市+年齡*性別*縣市",
            ]
        );
        assert!(lattice[8].is_saturated(three_factor_table(2).factors()));
        assert!(matches!(
            enumerate_lattice(&["a", "b"]),
            Err(Error::LatticeArity(2))
        ));
    }

    #[test]
    fn lattice_residual_df_matches_both_table_shapes() {
        let baselines = Baselines::new();
        // 42-cell table: residual df per lattice row
        let t7 = three_factor_table(7);
        let want7 = [32, 20, 30, 26, 24, 18, 14, 12, 0];
        for (spec, want) in enumerate_lattice(&["年齡", "性別", "縣市"])
            .unwrap()
            .iter()
            .zip(want7)
        {
            let design = build_design(&t7, spec, &baselines).unwrap();
            assert_eq!(t7.n_cells() - design.n_cols(), want, "spec {spec}");
        }
        // 72-cell table: main-effects model leaves 57 df
        let t12 = three_factor_table(12);
        let mains: ModelSpec = "年齡+性別+縣市".parse().unwrap();
        let design = build_design(&t12, &mains, &baselines).unwrap();
        assert_eq!(t12.n_cells() - design.n_cols(), 57);
    }

    #[test]
    fn treatment_coding_zeroes_the_baseline_row() {
        let table = three_factor_table(2);
        let spec: ModelSpec = "年齡+性別+縣市".parse().unwrap();
        let baselines = Baselines::new()
            .with("性別", "男性")
            .with("年齡", "0-29")
            .with("縣市", "r0");
        let design = build_design(&table, &spec, &baselines).unwrap();
        assert_eq!(
            design.labels(),
            &[
                "Intercept",
                "年齡[30-59]",
                "年齡[60+]",
                "性別[女性]",
                "縣市[r1]"
            ]
        );
        // the all-baseline cell (男性, 0-29, r0) has only the intercept set
        let idx = 3 * 2; // coords (男性=1, 0-29=0, r0=0) in row-major order
        let r = design.matrix().row(idx);
        assert_eq!(r[0], 1.0);
        assert!(r.iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn interaction_columns_are_products_of_parent_dummies() {
        let table = three_factor_table(2);
        let spec: ModelSpec = "年齡+性別+縣市+年齡*縣市".parse().unwrap();
        let design = build_design(&table, &spec, &Baselines::new()).unwrap();
        let m = design.matrix();
        let ia = design.column_index("年齡[30-59]*縣市[r1]").unwrap();
        let a = design.column_index("年齡[30-59]").unwrap();
        let r = design.column_index("縣市[r1]").unwrap();
        for i in 0..m.nrows() {
            assert_eq!(m[(i, ia)], m[(i, a)] * m[(i, r)]);
        }
    }

    #[test]
    fn saturated_design_is_square_and_invertible() {
        let table = three_factor_table(2);
        let lattice = enumerate_lattice(&["年齡", "性別", "縣市"]).unwrap();
        let design = build_design(&table, &lattice[8], &Baselines::new()).unwrap();
        assert_eq!(design.n_rows(), design.n_cols());
        assert!(design.matrix().clone().lu().is_invertible());
    }

    #[test]
    fn rebase_validates_and_is_idempotent_for_same_level() {
        let table = three_factor_table(2);
        let spec: ModelSpec = "年齡+性別+縣市".parse().unwrap();
        let base = Baselines::new().with("年齡", "0-29");
        let same = base.rebased(table.factors(), "年齡", "0-29").unwrap();
        let d1 = build_design(&table, &spec, &base).unwrap();
        let d2 = build_design(&table, &spec, &same).unwrap();
        assert_eq!(d1, d2);
        assert!(matches!(
            base.rebased(table.factors(), "年齡", "9000+"),
            Err(Error::UnknownLevel { .. })
        ));
        assert!(matches!(
            base.rebased(table.factors(), "血型", "A"),
            Err(Error::UnknownFactor(_))
        ));
    }
}
