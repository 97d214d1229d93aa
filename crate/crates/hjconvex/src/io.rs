//! Deterministic file artifacts: field dumps, result tables, and run
//! metadata sidecars.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a value
//! re-read from a dump is bit-identical to the value computed. Timing columns
//! exist in the schemas but are stamped to 0 unless explicitly requested;
//! repeated runs with the same arguments then produce byte-identical files
//! (wall-clock times go to the log instead).

use crate::grid::{Grid, ScalarField};
use serde::Serialize;
use std::io;
use std::path::Path;

/// Field dump with columns (i, j, x, z, value); i, j are 1-based.
pub fn field_csv(grid: &Grid, field: &ScalarField) -> String {
    assert_eq!(grid.n(), field.n(), "field does not match grid");
    let n = grid.n();
    let mut out = String::with_capacity(n * n * 32);
    out.push_str("i,j,x,z,value\n");
    for j in 0..n {
        for i in 0..n {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                j + 1,
                grid.x(i),
                grid.z(j),
                field.get(i, j)
            ));
        }
    }
    out
}

pub fn write_field_csv(path: &Path, grid: &Grid, field: &ScalarField) -> io::Result<()> {
    std::fs::write(path, field_csv(grid, field))
}

/// One row of the benchmark results table.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub test: u32,
    pub delta: f64,
    pub seed: u64,
    pub err_linf_rel: Option<f64>,
    pub iters: usize,
    pub seconds: f64,
    pub final_j: f64,
}

/// Results table with columns (test, delta, seed, err_linf_rel, iters,
/// seconds, final_J). `timing` gates the seconds column as for traces.
pub fn results_csv(rows: &[ResultRow], timing: bool) -> String {
    let mut out = String::from("test,delta,seed,err_linf_rel,iters,seconds,final_J\n");
    for r in rows {
        let err = r.err_linf_rel.map(|e| e.to_string()).unwrap_or_default();
        let seconds = if timing { r.seconds } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.test, r.delta, r.seed, err, r.iters, seconds, r.final_j
        ));
    }
    out
}

/// JSON sidecar describing one benchmark run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub test: u32,
    pub problem: String,
    pub delta: f64,
    pub seed: u64,
    pub n: usize,
    pub half_width: f64,
    pub epsilon0: f64,
    pub eta: f64,
    pub lambda: f64,
    pub beta: f64,
    pub b: f64,
    pub r: f64,
    pub neumann: bool,
    pub noise_generator: String,
    pub iterations: usize,
    pub status: String,
    pub final_j: f64,
    pub err_linf_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

pub fn write_meta_json(path: &Path, meta: &RunMeta) -> io::Result<()> {
    let mut body = serde_json::to_string_pretty(meta).expect("meta serializes");
    body.push('\n');
    std::fs::write(path, body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_csv_layout() {
        let grid = Grid::new(2.0, 5).unwrap();
        let field = ScalarField::from_fn(&grid, |x, z| x + 10.0 * z);
        let csv = field_csv(&grid, &field);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i,j,x,z,value");
        assert_eq!(lines.len(), 1 + 25);
        assert_eq!(lines[1], "1,1,-2,-2,-22");
        // row-major: second line is i=2, j=1
        assert_eq!(lines[2], "2,1,-1,-2,-21");
    }

    #[test]
    fn results_csv_gates_timing() {
        let rows = vec![ResultRow {
            test: 1,
            delta: 0.05,
            seed: 7,
            err_linf_rel: Some(0.0123),
            iters: 42,
            seconds: 3.25,
            final_j: 1e-4,
        }];
        let silent = results_csv(&rows, false);
        assert!(silent.contains("1,0.05,7,0.0123,42,0,0.0001"), "{silent}");
        let timed = results_csv(&rows, true);
        assert!(timed.contains(",3.25,"), "{timed}");
        let missing_err = vec![ResultRow { err_linf_rel: None, ..rows[0].clone() }];
        assert!(results_csv(&missing_err, false).contains("1,0.05,7,,42,0,"), "empty err field");
    }
}
