//! CSV/JSON serialization of field realizations.
//!
//! A realization is exported as a CSV with header `row,col,x,y,value` plus
//! a JSON sidecar describing the lattice (core domain, core vertex counts,
//! margin cells), so a file pair reconstructs the realization exactly.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::mesh::{Mesh, Rect};
use crate::field::FieldRealization;

/// Lattice description stored alongside exported field values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshSidecar {
    pub domain: Rect,
    pub rows: usize,
    pub cols: usize,
    pub margin_cells: usize,
}

impl MeshSidecar {
    pub fn of(mesh: &Mesh) -> MeshSidecar {
        MeshSidecar {
            domain: mesh.core(),
            rows: mesh.rows() - 2 * mesh.margin_cells(),
            cols: mesh.cols() - 2 * mesh.margin_cells(),
            margin_cells: mesh.margin_cells(),
        }
    }

    pub fn build(&self) -> Result<Mesh> {
        Mesh::lattice_with_margin_cells(self.domain, self.rows, self.cols, self.margin_cells)
    }
}

/// Writes `<base>.csv` and `<base>.mesh.json`.
pub fn export_realization(real: &FieldRealization, base: &Path) -> Result<()> {
    let mesh = real.mesh();
    let csv_path = base.with_extension("csv");
    let json_path = base.with_extension("mesh.json");

    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["row", "col", "x", "y", "value"])?;
    for i in 0..mesh.n_vertices() {
        let (x, y) = mesh.vertex(i);
        let r = i / mesh.cols();
        let c = i % mesh.cols();
        w.write_record(&[
            r.to_string(),
            c.to_string(),
            x.to_string(),
            y.to_string(),
            real.values()[i].to_string(),
        ])?;
    }
    w.flush()?;

    let sidecar = MeshSidecar::of(mesh);
    std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a `<base>.csv` / `<base>.mesh.json` pair.
pub fn import_realization(base: &Path) -> Result<FieldRealization> {
    let csv_path = base.with_extension("csv");
    let json_path = base.with_extension("mesh.json");
    let sidecar: MeshSidecar = serde_json::from_str(&std::fs::read_to_string(&json_path)?)?;
    let mesh = Arc::new(sidecar.build()?);

    let mut values = vec![f64::NAN; mesh.n_vertices()];
    let mut reader = csv::Reader::from_path(&csv_path)?;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::data_at(line + 2, format!("missing column {name}")))?
                .parse::<f64>()
                .map_err(|e| Error::data_at(line + 2, format!("bad {name}: {e}")))
        };
        let r = parse(0, "row")? as usize;
        let c = parse(1, "col")? as usize;
        if r >= mesh.rows() || c >= mesh.cols() {
            return Err(Error::data_at(line + 2, format!("vertex ({r}, {c}) outside lattice")));
        }
        values[mesh.vertex_index(r, c)] = parse(4, "value")?;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::data("field CSV does not cover every lattice vertex"));
    }
    FieldRealization::new(mesh, values)
}
