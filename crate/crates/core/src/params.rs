//! Built-in `(mu, lambda)` defaults, keyed by task, task parameter and
//! exponent `p`.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{RestoreError, Result};
use crate::task::TaskKind;

const BUILTIN: &str = include_str!("../resources/params.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TableKey {
    Value(f64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TableRow {
    pub key: TableKey,
    /// `(mu, lambda)` for `p = 1/2`.
    pub half: [f64; 2],
    /// `(mu, lambda)` for `p = 2/3`.
    pub two_thirds: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ParamTables {
    pub version: u32,
    pub cs: Vec<TableRow>,
    pub inpaint: Vec<TableRow>,
    pub textremove: Vec<TableRow>,
    pub deblur: Vec<TableRow>,
    pub spn: Vec<TableRow>,
    pub denoise: Vec<TableRow>,
}

/// Selected defaults plus the table row actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defaults {
    pub mu: f64,
    pub lambda: f64,
    /// True when the requested parameter had no row and the nearest one was
    /// used.
    pub nearest: bool,
}

/// Snap `0.6667`-style inputs to `2/3` and `0.5` to exactly one half.
pub fn canonical_p(p: f64) -> f64 {
    if (p - 2.0 / 3.0).abs() < 1e-3 {
        2.0 / 3.0
    } else if (p - 0.5).abs() < 1e-9 {
        0.5
    } else {
        p
    }
}

impl ParamTables {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RestoreError::InvalidParameter(format!("parameter table: {}", e)))
    }

    pub fn builtin() -> &'static Self {
        static TABLES: OnceLock<ParamTables> = OnceLock::new();
        TABLES.get_or_init(|| Self::parse(BUILTIN).expect("built-in parameter table parses"))
    }

    pub fn rows(&self, task: TaskKind) -> &[TableRow] {
        match task {
            TaskKind::Cs => &self.cs,
            TaskKind::Inpaint => &self.inpaint,
            TaskKind::TextRemove => &self.textremove,
            TaskKind::Deblur => &self.deblur,
            TaskKind::Spn => &self.spn,
            TaskKind::Denoise => &self.denoise,
        }
    }

    /// Look up `(mu, lambda)`. Numeric keys fall back to the nearest row;
    /// named keys must match. Exponents other than 2/3 use the `p = 1/2`
    /// column.
    pub fn lookup(&self, task: TaskKind, key: &TableKey, p: f64) -> Result<Defaults> {
        let rows = self.rows(task);
        let missing = || RestoreError::InvalidParameter(format!("no default parameters for {} {:?}", task, key));
        let (row, nearest) = match key {
            TableKey::Value(v) => {
                let row = rows
                    .iter()
                    .filter_map(|r| match r.key {
                        TableKey::Value(k) => Some((r, (k - v).abs())),
                        TableKey::Name(_) => None,
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .ok_or_else(missing)?;
                (row.0, row.1 > 1e-9)
            }
            TableKey::Name(name) => (
                rows.iter()
                    .find(|r| matches!(&r.key, TableKey::Name(n) if n.eq_ignore_ascii_case(name)))
                    .ok_or_else(missing)?,
                false,
            ),
        };
        let [mu, lambda] = if canonical_p(p) == 2.0 / 3.0 { row.two_thirds } else { row.half };
        Ok(Defaults { mu, lambda, nearest })
    }
}
