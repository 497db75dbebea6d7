//! CSV ingestion and the rule-based preprocessing pipeline that turns a raw
//! table into a model-ready dataset: ordered bin/binarize/remap/filter/keep
//! rules, dummy coding of categoricals, and label/sensitive extraction.
//!
//! Built-in specs `adult` and `compas` encode the standard recipes for those
//! two benchmarks (education-years binned at <6 / 6-12 / >12, age binarized
//! at 70, race collapsed to white/non-white; the COMPAS row filters on
//! screening-arrest gap, recidivism flag, charge degree, and score text).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use fairrep_core::dataset::Dataset;
use fairrep_core::matrix::Matrix;
use serde::Deserialize;

use crate::{CliError, CliResult};

/// Cell values that mark a missing observation; rows containing any are
/// dropped before type inference.
const MISSING_MARKERS: &[&str] = &["?", ""];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// A parsed CSV: header, cells as trimmed strings, inferred column kinds.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    /// Row-major cells, `rows x columns`.
    pub cells: Vec<Vec<String>>,
}

#[derive(Debug)]
pub enum TableError {
    Io(std::io::Error),
    Ragged { line: usize, got: usize, want: usize },
    UnknownColumn(String),
    Rule(String),
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableError::Io(e) => write!(f, "io: {e}"),
            TableError::Ragged { line, got, want } => {
                write!(f, "line {line}: {got} fields, header has {want}")
            }
            TableError::UnknownColumn(c) => write!(f, "rule references unknown column `{c}`"),
            TableError::Rule(s) => write!(f, "{s}"),
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::user(format!("table: {e}"))
    }
}

/// RFC-4180-ish field splitting: quotes, escaped quotes, commas and
/// newlines inside quotes.
fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut row: Vec<String> = Vec::new();
    let mut field = String::new();
    let mut in_quotes = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if in_quotes {
            match c {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        field.push('"');
                        chars.next();
                    } else {
                        in_quotes = false;
                    }
                }
                other => field.push(other),
            }
            continue;
        }
        match c {
            '"' => in_quotes = true,
            ',' => {
                row.push(field.trim().to_string());
                field = String::new();
            }
            '\n' => {
                row.push(field.trim().to_string());
                field = String::new();
                if !(row.len() == 1 && row[0].is_empty()) {
                    rows.push(row);
                }
                row = Vec::new();
            }
            '\r' => {}
            other => field.push(other),
        }
    }
    if !field.is_empty() || !row.is_empty() {
        row.push(field.trim().to_string());
        if !(row.len() == 1 && row[0].is_empty()) {
            rows.push(row);
        }
    }
    rows
}

fn infer_kinds(columns: usize, cells: &[Vec<String>]) -> Vec<ColumnKind> {
    (0..columns)
        .map(|j| {
            let numeric = cells.iter().all(|row| row[j].parse::<f64>().is_ok());
            if numeric {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            }
        })
        .collect()
}

/// Load a CSV with a header row. Columns where every cell parses as a float
/// are numeric; everything else is categorical.
pub fn load_csv(path: &Path) -> Result<RawTable, TableError> {
    let text = std::fs::read_to_string(path).map_err(TableError::Io)?;
    from_csv_text(&text)
}

pub fn from_csv_text(text: &str) -> Result<RawTable, TableError> {
    let mut rows = parse_csv(text);
    if rows.is_empty() {
        return Err(TableError::Rule("empty file".into()));
    }
    let columns = rows.remove(0);
    let want = columns.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != want {
            return Err(TableError::Ragged {
                line: i + 2,
                got: row.len(),
                want,
            });
        }
    }
    let kinds = infer_kinds(want, &rows);
    Ok(RawTable {
        columns,
        kinds,
        cells: rows,
    })
}

impl RawTable {
    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize, TableError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }
}

/// Row predicate of a filter rule.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    Eq { value: String },
    Ne { value: String },
    Le { value: f64 },
    Ge { value: f64 },
    Lt { value: f64 },
    Gt { value: f64 },
    Between { lo: f64, hi: f64 },
}

impl Predicate {
    fn keep(&self, cell: &str) -> bool {
        let num = || cell.parse::<f64>().ok();
        match self {
            Predicate::Eq { value } => cell == value,
            Predicate::Ne { value } => cell != value,
            Predicate::Le { value } => num().is_some_and(|v| v <= *value),
            Predicate::Ge { value } => num().is_some_and(|v| v >= *value),
            Predicate::Lt { value } => num().is_some_and(|v| v < *value),
            Predicate::Gt { value } => num().is_some_and(|v| v > *value),
            Predicate::Between { lo, hi } => num().is_some_and(|v| v >= *lo && v <= *hi),
        }
    }
}

/// One ordered preprocessing rule.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// Numeric column into labeled intervals: `labels[i]` covers values in
    /// `(cuts[i-1], cuts[i]]`, with open ends outside.
    Bin {
        column: String,
        cuts: Vec<f64>,
        labels: Vec<String>,
    },
    /// Numeric column to `I(value >= threshold)`.
    Binarize { column: String, threshold: f64 },
    /// Categorical values through a mapping; unmapped values go to
    /// `default` when given, otherwise stay.
    Remap {
        column: String,
        map: BTreeMap<String, String>,
        #[serde(default)]
        default: Option<String>,
    },
    /// Keep only rows satisfying the predicate.
    Filter {
        column: String,
        #[serde(flatten)]
        predicate: Predicate,
    },
    /// Keep only these columns (label/sensitive columns must be included).
    Keep { columns: Vec<String> },
    /// One-hot every categorical column (sorted level order).
    Dummy,
    /// Extract the label and sensitive columns; both must be binary after
    /// the optional positive-value mapping.
    Select {
        label: String,
        #[serde(default)]
        label_positive: Option<String>,
        sensitive: String,
        #[serde(default)]
        sensitive_positive: Option<String>,
    },
}

/// An ordered rule list; apply with [`preprocess`].
#[derive(Debug, Clone, Deserialize)]
pub struct PreprocessSpec {
    pub rules: Vec<Rule>,
}

impl PreprocessSpec {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::user(format!("preprocess spec: {e}")))
    }

    /// `adult`, `compas`, or a path to a TOML spec.
    pub fn resolve(name: &str) -> CliResult<Self> {
        match name {
            "adult" => Ok(adult_spec()),
            "compas" => Ok(compas_spec()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::user(format!("preprocess spec `{path}`: {e}"))
                })?;
                PreprocessSpec::from_toml(&text)
            }
        }
    }
}

/// What preprocessing did to the table; the feature count is the
/// conformance value to compare against published dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessReport {
    pub dropped_missing_rows: usize,
    pub filtered_rows: usize,
    pub feature_columns: Vec<String>,
    /// Original row indices that survived the missing-value drop and the
    /// filter rules, in order.
    pub surviving_rows: Vec<usize>,
}

/// Apply the rules in order and assemble the dataset (unsplit).
pub fn preprocess(
    table: &RawTable,
    spec: &PreprocessSpec,
) -> Result<(Dataset, PreprocessReport), TableError> {
    let mut columns = table.columns.clone();
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut origin: Vec<usize> = Vec::new();
    let mut dropped_missing = 0usize;
    'rows: for (ri, row) in table.cells.iter().enumerate() {
        for cell in row {
            if MISSING_MARKERS.contains(&cell.as_str()) {
                dropped_missing += 1;
                continue 'rows;
            }
        }
        cells.push(row.clone());
        origin.push(ri);
    }
    let rows_after_missing = cells.len();

    let find = |columns: &[String], name: &str| -> Result<usize, TableError> {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    };

    let mut label: Option<(String, Option<String>)> = None;
    let mut sensitive: Option<(String, Option<String>)> = None;
    let mut dummied = false;

    for rule in &spec.rules {
        match rule {
            Rule::Bin {
                column,
                cuts,
                labels,
            } => {
                if labels.len() != cuts.len() + 1 {
                    return Err(TableError::Rule(format!(
                        "bin {column}: {} labels for {} cuts",
                        labels.len(),
                        cuts.len()
                    )));
                }
                let j = find(&columns, column)?;
                for row in cells.iter_mut() {
                    let v: f64 = row[j].parse().map_err(|_| {
                        TableError::Rule(format!("bin {column}: non-numeric cell `{}`", row[j]))
                    })?;
                    let mut k = 0;
                    while k < cuts.len() && v > cuts[k] {
                        k += 1;
                    }
                    row[j] = labels[k].clone();
                }
            }
            Rule::Binarize { column, threshold } => {
                let j = find(&columns, column)?;
                for row in cells.iter_mut() {
                    let v: f64 = row[j].parse().map_err(|_| {
                        TableError::Rule(format!(
                            "binarize {column}: non-numeric cell `{}`",
                            row[j]
                        ))
                    })?;
                    row[j] = if v >= *threshold { "1" } else { "0" }.to_string();
                }
            }
            Rule::Remap {
                column,
                map,
                default,
            } => {
                let j = find(&columns, column)?;
                for row in cells.iter_mut() {
                    if let Some(mapped) = map.get(&row[j]) {
                        row[j] = mapped.clone();
                    } else if let Some(d) = default {
                        row[j] = d.clone();
                    }
                }
            }
            Rule::Filter { column, predicate } => {
                let j = find(&columns, column)?;
                let mut kept_origin = Vec::with_capacity(origin.len());
                let mut kept_cells = Vec::with_capacity(cells.len());
                for (row, &o) in cells.iter().zip(&origin) {
                    if predicate.keep(&row[j]) {
                        kept_cells.push(row.clone());
                        kept_origin.push(o);
                    }
                }
                cells = kept_cells;
                origin = kept_origin;
            }
            Rule::Keep { columns: keep } => {
                let idx: Vec<usize> = keep
                    .iter()
                    .map(|c| find(&columns, c))
                    .collect::<Result<_, _>>()?;
                columns = idx.iter().map(|&j| columns[j].clone()).collect();
                for row in cells.iter_mut() {
                    *row = idx.iter().map(|&j| row[j].clone()).collect();
                }
            }
            Rule::Dummy => dummied = true,
            Rule::Select {
                label: l,
                label_positive,
                sensitive: s,
                sensitive_positive,
            } => {
                find(&columns, l)?;
                find(&columns, s)?;
                label = Some((l.clone(), label_positive.clone()));
                sensitive = Some((s.clone(), sensitive_positive.clone()));
            }
        }
    }

    let (label_col, label_pos) =
        label.ok_or_else(|| TableError::Rule("spec has no select rule".into()))?;
    let (sens_col, sens_pos) =
        sensitive.ok_or_else(|| TableError::Rule("spec has no select rule".into()))?;

    // re-infer kinds on the transformed cells
    let kinds = infer_kinds(columns.len(), &cells);
    let li = find(&columns, &label_col)?;
    let si = find(&columns, &sens_col)?;

    let binary = |j: usize, positive: &Option<String>, name: &str| -> Result<Vec<u8>, TableError> {
        let mut out = Vec::with_capacity(cells.len());
        for row in &cells {
            let cell = row[j].as_str();
            let v = match positive {
                Some(p) => u8::from(cell == p),
                None => match cell {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(TableError::Rule(format!(
                            "{name} column `{}` has non-binary value `{other}`; give a positive value",
                            columns[j]
                        )))
                    }
                },
            };
            out.push(v);
        }
        Ok(out)
    };
    let y = binary(li, &label_pos, "label")?;
    let s = binary(si, &sens_pos, "sensitive")?;

    // feature columns: everything but label and sensitive, dummy-coding the
    // categoricals in sorted level order when a dummy rule was given
    let mut feature_names = Vec::new();
    let mut feature_values: Vec<Vec<f64>> = Vec::new();
    for j in 0..columns.len() {
        if j == li || j == si {
            continue;
        }
        match kinds[j] {
            ColumnKind::Numeric => {
                feature_names.push(columns[j].clone());
                feature_values.push(
                    cells
                        .iter()
                        .map(|row| row[j].parse::<f64>().unwrap())
                        .collect(),
                );
            }
            ColumnKind::Categorical => {
                if !dummied {
                    return Err(TableError::Rule(format!(
                        "categorical column `{}` left in features without a dummy rule",
                        columns[j]
                    )));
                }
                let mut levels: Vec<&str> =
                    cells.iter().map(|row| row[j].as_str()).collect();
                levels.sort_unstable();
                levels.dedup();
                for level in levels {
                    feature_names.push(format!("{}={}", columns[j], level));
                    feature_values.push(
                        cells
                            .iter()
                            .map(|row| f64::from(row[j] == level))
                            .collect(),
                    );
                }
            }
        }
    }

    let n = cells.len();
    let d = feature_values.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for col in &feature_values {
            data.push(col[i]);
        }
    }
    let dataset = Dataset::new(Matrix::from_vec(n, d, data).unwrap(), s, y)
        .map_err(|e| TableError::Rule(format!("{e}")))?;
    Ok((
        dataset,
        PreprocessReport {
            dropped_missing_rows: dropped_missing,
            filtered_rows: rows_after_missing - n,
            feature_columns: feature_names,
            surviving_rows: origin,
        },
    ))
}

fn remap(column: &str, pairs: &[(&str, &str)], default: Option<&str>) -> Rule {
    Rule::Remap {
        column: column.to_string(),
        map: pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        default: default.map(str::to_string),
    }
}

/// The census-income recipe: education years binned (<6, 6-12, >12), age
/// binarized at 70, race collapsed to white/non-white, all categoricals
/// dummy-coded; label income>50K, sensitive attribute sex.
pub fn adult_spec() -> PreprocessSpec {
    PreprocessSpec {
        rules: vec![
            Rule::Bin {
                column: "education-num".into(),
                cuts: vec![5.0, 12.0],
                labels: vec!["lt6".into(), "6to12".into(), "gt12".into()],
            },
            Rule::Binarize {
                column: "age".into(),
                threshold: 70.0,
            },
            remap("race", &[("White", "white")], Some("nonwhite")),
            // the census test file suffixes income labels with a period
            remap(
                "income",
                &[(">50K.", ">50K"), ("<=50K.", "<=50K")],
                None,
            ),
            Rule::Dummy,
            Rule::Select {
                label: "income".into(),
                label_positive: Some(">50K".into()),
                sensitive: "sex".into(),
                sensitive_positive: Some("Male".into()),
            },
        ],
    }
}

/// The recidivism recipe: the standard row filters (screening-arrest gap in
/// [-30, 30], recidivism flag present, charge degree not "O", score text
/// present), a 10-feature column set, race collapsed to a binary attribute;
/// label two-year recidivism.
pub fn compas_spec() -> PreprocessSpec {
    PreprocessSpec {
        rules: vec![
            Rule::Filter {
                column: "days_b_screening_arrest".into(),
                predicate: Predicate::Between { lo: -30.0, hi: 30.0 },
            },
            Rule::Filter {
                column: "is_recid".into(),
                predicate: Predicate::Ne { value: "-1".into() },
            },
            Rule::Filter {
                column: "c_charge_degree".into(),
                predicate: Predicate::Ne { value: "O".into() },
            },
            Rule::Filter {
                column: "score_text".into(),
                predicate: Predicate::Ne { value: "N/A".into() },
            },
            remap("race", &[("Caucasian", "1")], Some("0")),
            Rule::Keep {
                columns: vec![
                    "age".into(),
                    "priors_count".into(),
                    "decile_score".into(),
                    "age_cat".into(),
                    "c_charge_degree".into(),
                    "sex".into(),
                    "race".into(),
                    "two_year_recid".into(),
                ],
            },
            Rule::Dummy,
            Rule::Select {
                label: "two_year_recid".into(),
                label_positive: None,
                sensitive: "race".into(),
                sensitive_positive: None,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_infers_kinds() {
        let t = from_csv_text("a,b\n1,x\n2,y\n").unwrap();
        assert_eq!(t.rows(), 2);
        assert_eq!(t.kinds, vec![ColumnKind::Numeric, ColumnKind::Categorical]);
        // one non-numeric cell makes the whole column categorical
        let t2 = from_csv_text("a\n1\noops\n").unwrap();
        assert_eq!(t2.kinds, vec![ColumnKind::Categorical]);
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let err = from_csv_text("a,b\n1,2\n3\n").unwrap_err();
        match err {
            TableError::Ragged { line, got, want } => {
                assert_eq!((line, got, want), (3, 1, 2));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn quoted_fields_with_commas() {
        let t = from_csv_text("a,b\n\"x, y\",2\n").unwrap();
        assert_eq!(t.cells[0][0], "x, y");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv(Path::new("/nonexistent/file.csv")).unwrap_err();
        assert!(matches!(err, TableError::Io(_)));
    }

    fn toy_spec() -> PreprocessSpec {
        PreprocessSpec {
            rules: vec![
                Rule::Binarize {
                    column: "age".into(),
                    threshold: 70.0,
                },
                Rule::Dummy,
                Rule::Select {
                    label: "y".into(),
                    label_positive: None,
                    sensitive: "s".into(),
                    sensitive_positive: None,
                },
            ],
        }
    }

    #[test]
    fn binarize_boundary() {
        let t = from_csv_text("age,s,y\n69,0,1\n71,1,0\n70,0,0\n").unwrap();
        let (ds, _) = preprocess(&t, &toy_spec()).unwrap();
        // column order: age only (s, y extracted)
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.x.data(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn dummy_columns_sum_to_one() {
        let t = from_csv_text("color,s,y\nred,0,1\nblue,1,0\ngreen,0,0\nred,1,1\n").unwrap();
        let spec = PreprocessSpec {
            rules: vec![
                Rule::Dummy,
                Rule::Select {
                    label: "y".into(),
                    label_positive: None,
                    sensitive: "s".into(),
                    sensitive_positive: None,
                },
            ],
        };
        let (ds, report) = preprocess(&t, &spec).unwrap();
        assert_eq!(ds.dim(), 3);
        assert_eq!(
            report.feature_columns,
            vec!["color=blue", "color=green", "color=red"]
        );
        for i in 0..ds.len() {
            let sum: f64 = ds.x.row(i).iter().sum();
            assert_eq!(sum, 1.0);
        }
    }

    #[test]
    fn missing_rows_dropped_and_counted() {
        let t = from_csv_text("a,s,y\n1,0,1\n?,1,0\n3,1,1\n").unwrap();
        let spec = PreprocessSpec {
            rules: vec![
                Rule::Dummy,
                Rule::Select {
                    label: "y".into(),
                    label_positive: None,
                    sensitive: "s".into(),
                    sensitive_positive: None,
                },
            ],
        };
        let (ds, report) = preprocess(&t, &spec).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(report.dropped_missing_rows, 1);
    }

    #[test]
    fn filters_only_remove_rows_and_order_matters() {
        let text = "v,s,y\n4,0,1\n8,1,0\n12,0,1\n";
        let t = from_csv_text(text).unwrap();
        // bin first, then filter on the label: no rows pass the numeric
        // filter because the column is categorical by then
        let bin_then_filter = PreprocessSpec {
            rules: vec![
                Rule::Bin {
                    column: "v".into(),
                    cuts: vec![6.0],
                    labels: vec!["lo".into(), "hi".into()],
                },
                Rule::Filter {
                    column: "v".into(),
                    predicate: Predicate::Gt { value: 5.0 },
                },
                Rule::Dummy,
                Rule::Select {
                    label: "y".into(),
                    label_positive: None,
                    sensitive: "s".into(),
                    sensitive_positive: None,
                },
            ],
        };
        // numeric filter before binning keeps two rows
        let filter_then_bin = PreprocessSpec {
            rules: {
                let mut r = bin_then_filter.rules.clone();
                r.swap(0, 1);
                r
            },
        };
        let (a, _) = preprocess(&t, &bin_then_filter).unwrap();
        let (b, _) = preprocess(&t, &filter_then_bin).unwrap();
        assert_eq!(a.len(), 0);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn unknown_column_is_named() {
        let t = from_csv_text("a,s,y\n1,0,1\n").unwrap();
        let spec = PreprocessSpec {
            rules: vec![Rule::Binarize {
                column: "nope".into(),
                threshold: 1.0,
            }],
        };
        let err = preprocess(&t, &spec).unwrap_err();
        assert!(format!("{err}").contains("nope"));
    }

    #[test]
    fn compas_style_fixture() {
        let text = "age,priors_count,decile_score,age_cat,c_charge_degree,sex,race,two_year_recid,days_b_screening_arrest,is_recid,score_text\n\
            25,0,3,Less than 25,F,Male,Caucasian,1,0,1,Low\n\
            40,2,7,25 - 45,M,Female,African-American,0,10,0,High\n\
            33,1,5,25 - 45,F,Male,Other,1,-60,1,Low\n\
            51,3,2,Greater than 45,O,Male,Caucasian,0,5,0,Low\n\
            29,0,1,Less than 25,M,Female,Caucasian,1,3,-1,Low\n";
        let t = from_csv_text(text).unwrap();
        let (ds, report) = preprocess(&t, &compas_spec()).unwrap();
        // row 3 filtered by screening gap, row 4 by charge degree, row 5 by
        // is_recid
        assert_eq!(ds.len(), 2);
        assert_eq!(report.filtered_rows, 3);
        // 3 numeric + age_cat(2) + c_charge_degree(2) + sex(2)
        assert_eq!(ds.dim(), 9);
        assert_eq!(ds.s, vec![1, 0]);
        assert_eq!(ds.y, vec![1, 0]);
    }

    #[test]
    fn adult_style_fixture() {
        let header = "age,workclass,fnlwgt,education,education-num,marital-status,occupation,\
                      relationship,race,sex,capital-gain,capital-loss,hours-per-week,\
                      native-country,income";
        let rows = [
            // young white man, many school years, earns more (test-file style label)
            "39,State-gov,77516,Bachelors,13,Never-married,Adm-clerical,Not-in-family,White,Male,2174,0,40,United-States,>50K.",
            // older non-white woman, few school years
            "72,Private,83311,1st-4th,2,Married-civ-spouse,Exec-managerial,Husband,Black,Female,0,0,13,United-States,<=50K",
            // mid everything
            "50,Self-emp-not-inc,215646,HS-grad,9,Divorced,Handlers-cleaners,Not-in-family,Asian-Pac-Islander,Male,0,0,40,India,<=50K",
            // a row with a missing cell, dropped
            "38,?,234721,11th,7,Married-civ-spouse,Handlers-cleaners,Husband,White,Male,0,0,50,United-States,>50K",
        ];
        let text = format!("{header}\n{}\n", rows.join("\n"));
        let t = from_csv_text(&text).unwrap();
        let (ds, report) = preprocess(&t, &adult_spec()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(report.dropped_missing_rows, 1);
        assert_eq!(ds.y, vec![1, 0, 0], "income labels, trailing period handled");
        assert_eq!(ds.s, vec![1, 0, 1], "sex is the sensitive attribute");
        // age binarized at 70, education years binned, race collapsed
        let cols = &report.feature_columns;
        let col = |name: &str| cols.iter().position(|c| c == name).expect(name);
        assert_eq!(ds.x.at(0, col("age")), 0.0);
        assert_eq!(ds.x.at(1, col("age")), 1.0);
        assert_eq!(ds.x.at(0, col("education-num=gt12")), 1.0);
        assert_eq!(ds.x.at(1, col("education-num=lt6")), 1.0);
        assert_eq!(ds.x.at(2, col("education-num=6to12")), 1.0);
        assert_eq!(ds.x.at(0, col("race=white")), 1.0);
        assert_eq!(ds.x.at(1, col("race=nonwhite")), 1.0);
        assert_eq!(ds.x.at(2, col("race=nonwhite")), 1.0);
        // numerics carried through untouched
        assert_eq!(ds.x.at(0, col("fnlwgt")), 77516.0);
        assert_eq!(ds.x.at(0, col("capital-gain")), 2174.0);
    }

    #[test]
    fn shipped_specs_match_builtins() {
        let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../..");
        for (file, builtin) in [
            ("specs/adult.toml", adult_spec()),
            ("specs/compas.toml", compas_spec()),
        ] {
            let text = std::fs::read_to_string(format!("{root}/{file}")).unwrap();
            let parsed = PreprocessSpec::from_toml(&text).unwrap();
            assert_eq!(
                format!("{:?}", parsed.rules),
                format!("{:?}", builtin.rules),
                "{file} drifted from the built-in spec"
            );
        }
    }

    #[test]
    fn toml_spec_round_trip() {
        let text = r#"
            [[rules]]
            rule = "binarize"
            column = "age"
            threshold = 70.0

            [[rules]]
            rule = "filter"
            column = "v"
            op = "between"
            lo = -30.0
            hi = 30.0

            [[rules]]
            rule = "dummy"

            [[rules]]
            rule = "select"
            label = "y"
            sensitive = "s"
        "#;
        let spec = PreprocessSpec::from_toml(text).unwrap();
        assert_eq!(spec.rules.len(), 4);
        let t = from_csv_text("age,v,s,y\n80,0,0,1\n60,50,1,0\n50,-3,1,1\n").unwrap();
        let (ds, _) = preprocess(&t, &spec).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.x.data(), &[1.0, 0.0, 0.0, -3.0]);
    }
}
