//! Shared CSV / JSON export envelopes.

use ndarray::Array2;
use serde::Serialize;

/// Row-major CSV with 17 significant digits per entry.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// JSON envelope for an exported matrix.
#[derive(Serialize)]
pub struct MatrixEnvelope<'a> {
    pub model: &'a str,
    pub regime: &'a str,
    pub coupling: f64,
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl<'a> MatrixEnvelope<'a> {
    pub fn new(model: &'a str, regime: &'a str, coupling: f64, n: usize, m: &Array2<f64>) -> Self {
        MatrixEnvelope {
            model,
            regime,
            coupling,
            n,
            matrix: m.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}
