use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Contracted s-function: `(exponent, coefficient)` pairs over normalized
/// primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    pub primitives: Vec<(f64, f64)>,
}

/// Contracted functions keyed by element symbol.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BasisLibrary {
    pub elements: BTreeMap<String, Vec<Contraction>>,
}

const SYMBOLS: [&str; 2] = ["H", "He"];

/// Element symbol for an integral nuclear charge the Gaussian backend supports.
pub(crate) fn element_symbol(charge: f64) -> Option<&'static str> {
    let z = charge.round();
    if (charge - z).abs() > 1e-12 || z < 1.0 {
        return None;
    }
    SYMBOLS.get(z as usize - 1).copied()
}

impl BasisLibrary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|reason| Error::BasisFile {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Lines are `element exponent coefficient`. Consecutive lines for one
    /// element form a contraction; a blank line or a change of element
    /// starts a new one. `#` begins a comment.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lib = BasisLibrary::default();
        let mut current: Option<(String, Contraction)> = None;
        let flush = |lib: &mut BasisLibrary, cur: &mut Option<(String, Contraction)>| {
            if let Some((el, c)) = cur.take() {
                lib.elements.entry(el).or_default().push(c);
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                if raw.trim().is_empty() {
                    flush(&mut lib, &mut current);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(format!(
                    "line {}: expected `element exponent coefficient`, found {} fields",
                    lineno + 1,
                    fields.len()
                ));
            }
            let element = fields[0].to_string();
            let number = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| format!("line {}: cannot parse {what} `{s}`", lineno + 1))
            };
            let exponent = number(fields[1], "exponent")?;
            let coefficient = number(fields[2], "coefficient")?;
            if !(exponent > 0.0) || !exponent.is_finite() {
                return Err(format!("line {}: exponent must be positive", lineno + 1));
            }
            if !coefficient.is_finite() {
                return Err(format!("line {}: coefficient is not finite", lineno + 1));
            }
            if current.as_ref().is_some_and(|(el, _)| *el != element) {
                flush(&mut lib, &mut current);
            }
            current
                .get_or_insert_with(|| (element, Contraction { primitives: Vec::new() }))
                .1
                .primitives
                .push((exponent, coefficient));
        }
        flush(&mut lib, &mut current);
        if lib.elements.is_empty() {
            return Err("no contractions found".into());
        }
        Ok(lib)
    }

    /// The contractions for each nucleus, in geometry order.
    pub fn shells_for(&self, charges: &[f64]) -> Result<Vec<Vec<Contraction>>> {
        charges
            .iter()
            .map(|&z| {
                let symbol = element_symbol(z).ok_or_else(|| {
                    Error::InvalidGeometry(format!(
                        "the gaussian backend supports H and He only, got charge {z}"
                    ))
                })?;
                self.elements
                    .get(symbol)
                    .cloned()
                    .ok_or_else(|| Error::InvalidGeometry(format!("basis has no functions for {symbol}")))
            })
            .collect()
    }
}
