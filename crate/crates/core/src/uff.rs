//! Universal force field Lennard-Jones parameters.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use thiserror::Error;

const BUNDLED: &str = include_str!("../data/uff_lj.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UffParams {
    /// Well depth, kcal/mol.
    pub epsilon: f64,
    /// Van der Waals distance, Å.
    pub sigma: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum UffTableError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: parameters for {uff_type} must be positive")]
    NonPositive { line: usize, uff_type: String },
}

/// Per-atom-type parameter lookup.
#[derive(Debug, Clone, Default)]
pub struct UffTable {
    entries: BTreeMap<String, UffParams>,
}

impl UffTable {
    /// The parameter table shipped with the crate.
    pub fn bundled() -> &'static UffTable {
        static TABLE: OnceLock<UffTable> = OnceLock::new();
        TABLE.get_or_init(|| UffTable::parse(BUNDLED).expect("bundled UFF table is well formed"))
    }

    /// Parses `<uff_type> <epsilon_kcal_mol> <sigma_angstrom>` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, UffTableError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(UffTableError::Syntax {
                    line: n + 1,
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| UffTableError::Syntax { line: n + 1, msg: format!("bad number {s:?}: {e}") })
            };
            let epsilon = parse(fields[1])?;
            let sigma = parse(fields[2])?;
            if !(epsilon > 0.0 && sigma > 0.0 && epsilon.is_finite() && sigma.is_finite()) {
                return Err(UffTableError::NonPositive { line: n + 1, uff_type: fields[0].to_string() });
            }
            entries.insert(fields[0].to_string(), UffParams { epsilon, sigma });
        }
        Ok(UffTable { entries })
    }

    pub fn get(&self, uff_type: &str) -> Option<UffParams> {
        self.entries.get(uff_type).copied()
    }

    pub fn contains(&self, uff_type: &str) -> bool {
        self.entries.contains_key(uff_type)
    }

    /// True when some atom type in the table belongs to `element`.
    pub fn knows_element(&self, element: &str) -> bool {
        self.entries.keys().any(|k| element_of_type(k) == element)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Element symbol encoded in a UFF type label (`C_3` -> `C`, `Cl` -> `Cl`, `Ru6+2` -> `Ru`).
pub fn element_of_type(uff_type: &str) -> &str {
    let mut chars = uff_type.char_indices();
    match (chars.next(), chars.next()) {
        (Some(_), Some((i, c))) if c.is_ascii_lowercase() => &uff_type[..i + c.len_utf8()],
        (Some((_, c)), _) => &uff_type[..c.len_utf8()],
        _ => uff_type,
    }
}

/// Geometric combination of two atom types.
pub fn mix(a: UffParams, b: UffParams) -> UffParams {
    UffParams { epsilon: (a.epsilon * b.epsilon).sqrt(), sigma: (a.sigma * b.sigma).sqrt() }
}
