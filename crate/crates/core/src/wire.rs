//! JSON wire helpers: complex numbers are `[re, im]`, matrices are lists of rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

pub type WireComplex = [f64; 2];
pub type WireMatrix = Vec<Vec<WireComplex>>;

pub fn mat_to_wire(m: &CMat) -> WireMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Parses a row list. `expect` pins the shape when the caller knows it.
pub fn wire_to_mat(w: &WireMatrix, expect: Option<(usize, usize)>, path: &str) -> Result<CMat> {
    let rows = w.len();
    let cols = w.first().map_or(0, |r| r.len());
    if let Some((er, ec)) = expect {
        if rows != er || (rows > 0 && cols != ec) {
            return Err(Error::Schema {
                path: path.to_string(),
                message: format!("expected {er}x{ec} matrix, got {rows}x{cols}"),
            });
        }
    }
    let mut m = CMat::zeros(rows, cols);
    for (i, row) in w.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Schema {
                path: format!("{path}[{i}]"),
                message: format!("ragged row: {} entries, expected {cols}", row.len()),
            });
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(Error::Schema {
                    path: format!("{path}[{i}][{j}]"),
                    message: "non-finite entry".into(),
                });
            }
            m[(i, j)] = c(z[0], z[1]);
        }
    }
    Ok(m)
}

/// `{"blocks": [...]}`, the serialized form of an algebra element and of a
/// matrix over the algebra (whose blocks are the flattened per-block matrices).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireBlocks {
    pub blocks: Vec<WireMatrix>,
}
