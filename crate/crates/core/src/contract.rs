//! Governance contracts: the closed predicate vocabulary, syntactic
//! entailment between predicates, and checking predicates against data.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::table::{cell_text, conforms, is_missing, CoarseType, DataFormat, Table};

/// Regex behind the `ISO-8601` named format: a calendar date optionally
/// followed by a time and zone.
pub const ISO_8601_PATTERN: &str =
    r"^\d{4}-\d{2}-\d{2}(T\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?$";

const NAMED_FORMATS: &[(&str, &str)] = &[
    ("ISO-8601", ISO_8601_PATTERN),
    ("YYYY-MM-DD", r"^\d{4}-\d{2}-\d{2}$"),
    ("email", r"^[^@\s]+@[^@\s]+\.[^@\s]+$"),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    ColumnExists {
        column: String,
    },
    TypeIs {
        column: String,
        #[serde(rename = "type")]
        ty: CoarseType,
    },
    NoNulls {
        column: String,
    },
    UniqueKey {
        column: String,
    },
    /// `format` is a named format (`ISO-8601`, `YYYY-MM-DD`, `email`) or a
    /// regular expression matched against the whole cell.
    ValueFormat {
        column: String,
        format: String,
    },
    RowCountMin {
        min: u64,
    },
    FileFormat {
        format: DataFormat,
    },
}

/// Discriminant of [`Predicate`], used as a key by the repair registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredicateKind {
    ColumnExists,
    TypeIs,
    NoNulls,
    UniqueKey,
    ValueFormat,
    RowCountMin,
    FileFormat,
}

impl Predicate {
    pub fn kind(&self) -> PredicateKind {
        match self {
            Predicate::ColumnExists { .. } => PredicateKind::ColumnExists,
            Predicate::TypeIs { .. } => PredicateKind::TypeIs,
            Predicate::NoNulls { .. } => PredicateKind::NoNulls,
            Predicate::UniqueKey { .. } => PredicateKind::UniqueKey,
            Predicate::ValueFormat { .. } => PredicateKind::ValueFormat,
            Predicate::RowCountMin { .. } => PredicateKind::RowCountMin,
            Predicate::FileFormat { .. } => PredicateKind::FileFormat,
        }
    }

    pub fn column(&self) -> Option<&str> {
        match self {
            Predicate::ColumnExists { column }
            | Predicate::TypeIs { column, .. }
            | Predicate::NoNulls { column }
            | Predicate::UniqueKey { column }
            | Predicate::ValueFormat { column, .. } => Some(column),
            Predicate::RowCountMin { .. } | Predicate::FileFormat { .. } => None,
        }
    }

    /// Checks that the arguments are usable: non-empty column names and a
    /// format that is either named or a valid regex.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(column) = self.column() {
            if column.trim().is_empty() {
                return Err(format!("{}: empty column name", self.kind_name()));
            }
        }
        if let Predicate::ValueFormat { format, .. } = self {
            format_regex(format)?;
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind() {
            PredicateKind::ColumnExists => "column_exists",
            PredicateKind::TypeIs => "type_is",
            PredicateKind::NoNulls => "no_nulls",
            PredicateKind::UniqueKey => "unique_key",
            PredicateKind::ValueFormat => "value_format",
            PredicateKind::RowCountMin => "row_count_min",
            PredicateKind::FileFormat => "file_format",
        }
    }

    /// Syntactic entailment: `self` guarantees `other`.
    ///
    /// Identity, plus two rules: a value format on a column implies the column
    /// holds strings, and a larger row-count floor implies a smaller one.
    /// `unique_key(c)` does not imply `no_nulls(c)`.
    pub fn entails(&self, other: &Predicate) -> bool {
        if self == other {
            return true;
        }
        match (self, other) {
            (
                Predicate::ValueFormat { column: a, .. },
                Predicate::TypeIs {
                    column: b,
                    ty: CoarseType::String,
                },
            ) => a == b,
            (Predicate::RowCountMin { min: n }, Predicate::RowCountMin { min: m }) => m <= n,
            _ => false,
        }
    }

    /// Evaluates the predicate against a produced table.
    pub fn holds(&self, table: &Table) -> bool {
        match self {
            Predicate::ColumnExists { column } => table.has_column(column),
            Predicate::TypeIs { column, ty } => {
                table.has_column(column)
                    && table
                        .column(column)
                        .filter(|v| !is_missing(*v))
                        .all(|v| v.is_some_and(|v| conforms(v, *ty)))
            }
            Predicate::NoNulls { column } => {
                table.has_column(column) && table.column(column).all(|v| !is_missing(v))
            }
            Predicate::UniqueKey { column } => {
                if !table.has_column(column) {
                    return false;
                }
                let mut seen = HashSet::new();
                table
                    .column(column)
                    .filter(|v| !is_missing(*v))
                    .all(|v| seen.insert(cell_text(v)))
            }
            Predicate::ValueFormat { column, format } => {
                let Ok(re) = format_regex(format) else {
                    return false;
                };
                table.has_column(column)
                    && table
                        .column(column)
                        .filter(|v| !is_missing(*v))
                        .all(|v| re.is_match(&cell_text(v)))
            }
            Predicate::RowCountMin { min } => table.rows.len() as u64 >= *min,
            Predicate::FileFormat { format } => table.format == *format,
        }
    }

    /// One-line assertion text used in prompts.
    pub fn assertion(&self) -> String {
        match self {
            Predicate::ColumnExists { column } => format!("column `{column}` exists"),
            Predicate::TypeIs { column, ty } => {
                format!("every present value of column `{column}` is of type {ty}")
            }
            Predicate::NoNulls { column } => {
                format!("column `{column}` has no null or empty values")
            }
            Predicate::UniqueKey { column } => {
                format!("values of column `{column}` are unique")
            }
            Predicate::ValueFormat { column, format } => {
                format!("every present value of column `{column}` matches format {format}")
            }
            Predicate::RowCountMin { min } => format!("the table has at least {min} rows"),
            Predicate::FileFormat { format } => format!("the file is written as {format}"),
        }
    }

    /// Targeted revision advice for a violated predicate.
    pub fn advice(&self) -> String {
        match self {
            Predicate::ColumnExists { column } => format!(
                "Please make sure the output keeps (or creates) the `{column}` column with exactly that name."
            ),
            Predicate::TypeIs { column, ty } => format!(
                "Please cast the values of the `{column}` column to {ty} before writing the output, and handle values that cannot be converted."
            ),
            Predicate::NoNulls { column } => format!(
                "Please add a check to handle potential null values in the `{column}` column before applying the transformation, so that no value is left empty."
            ),
            Predicate::UniqueKey { column } => format!(
                "Please remove duplicate rows so that every value of the `{column}` column appears only once."
            ),
            Predicate::ValueFormat { column, format } => format!(
                "Please normalize every value of the `{column}` column so that it matches the format {format}; values in other layouts must be converted, not copied."
            ),
            Predicate::RowCountMin { min } => format!(
                "The output must keep at least {min} rows; please check that the filtering condition is not too aggressive."
            ),
            Predicate::FileFormat { format } => {
                format!("Please write the output file as {format}.")
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::ColumnExists { column } => write!(f, "column_exists({column})"),
            Predicate::TypeIs { column, ty } => write!(f, "type_is({column}, {ty})"),
            Predicate::NoNulls { column } => write!(f, "no_nulls({column})"),
            Predicate::UniqueKey { column } => write!(f, "unique_key({column})"),
            Predicate::ValueFormat { column, format } => {
                write!(f, "value_format({column}, {format})")
            }
            Predicate::RowCountMin { min } => write!(f, "row_count_min({min})"),
            Predicate::FileFormat { format } => write!(f, "file_format({format})"),
        }
    }
}

/// Resolves a named format or compiles the string as an anchored regex.
pub fn format_regex(format: &str) -> Result<regex::Regex, String> {
    let pattern = NAMED_FORMATS
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(format))
        .map(|(_, p)| (*p).to_string())
        .unwrap_or_else(|| {
            let core = format.trim_start_matches('^').trim_end_matches('$');
            format!("^(?:{core})$")
        });
    regex::Regex::new(&pattern).map_err(|e| format!("format `{format}` is not a valid regex: {e}"))
}

/// `(pre, post)` predicate lists attached to an operator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernanceContract {
    #[serde(default)]
    pub pre: Vec<Predicate>,
    #[serde(default)]
    pub post: Vec<Predicate>,
}

impl GovernanceContract {
    pub fn new(pre: Vec<Predicate>, post: Vec<Predicate>) -> Result<Self, String> {
        let contract = GovernanceContract { pre, post };
        contract.validate()?;
        Ok(contract)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (side, list) in [("pre", &self.pre), ("post", &self.post)] {
            let mut seen = HashSet::new();
            for p in list {
                p.validate()?;
                if !seen.insert(p) {
                    return Err(format!("duplicate {side} predicate {p}"));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty() && self.post.is_empty()
    }
}

/// True when some fact entails `goal`.
pub fn entailed_by(facts: &[Predicate], goal: &Predicate) -> bool {
    facts.iter().any(|f| f.entails(goal))
}
