//! CSV writers and the gnuplot script.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so reruns are
//! byte-identical and values round-trip exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::discretization::Mesh1D;
use crate::stepper::SimState;
use crate::weights::WeightTable;

pub const SNAPSHOT_HEADER: &str = "z,e_x,h_y,p_x";
pub const ENERGY_HEADER: &str = "n,t,E,D,residual";
pub const COMPARISON_HEADER: &str = "n,t,diff_e,diff_h,diff_p";

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:06}.csv"))
}

/// One row per node. `h_y` is the value at the integer time level, averaged
/// over the two cells sharing the node.
pub fn write_snapshot<W: Write>(mut out: W, mesh: &Mesh1D, state: &SimState) -> io::Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    let h = state.h_at_step();
    let n = mesh.n_nodes();
    for k in 0..n {
        let h_node = 0.5 * (h[(k + n - 1) % n] + h[k]);
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            mesh.node(k),
            state.e[k],
            h_node,
            state.p_total[k]
        )?;
    }
    Ok(())
}

pub fn save_snapshot(path: &Path, mesh: &Mesh1D, state: &SimState) -> io::Result<()> {
    let mut out = create(path)?;
    write_snapshot(&mut out, mesh, state)?;
    out.flush()
}

/// Row-per-step CSV writer with a fixed header.
pub struct CsvSeries {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvSeries {
    pub fn create(path: &Path, header: &str) -> io::Result<Self> {
        let mut out = create(path)?;
        writeln!(out, "{header}")?;
        Ok(Self {
            out,
            columns: header.split(',').count(),
        })
    }

    pub fn row(&mut self, step: usize, values: &[f64]) -> io::Result<()> {
        debug_assert_eq!(values.len() + 1, self.columns);
        write!(self.out, "{step}")?;
        for v in values {
            write!(self.out, ",{v:.16e}")?;
        }
        writeln!(self.out)
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Writes `weights_<material>.csv` per table into `dir`.
pub fn dump_weights(dir: &Path, tables: &BTreeMap<String, WeightTable>) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(tables.len());
    for (name, table) in tables {
        let path = dir.join(format!("weights_{name}.csv"));
        let mut out = create(&path)?;
        table.write_csv(&mut out)?;
        out.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Gnuplot commands plotting `h_y` snapshots, the energy history and the scheme differences.
pub fn plot_script(snapshots: &[(usize, f64, PathBuf)], energy: Option<&Path>, comparison: Option<&Path>) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key outside right\nset grid\n");
    s.push_str("set terminal pngcairo size 1000,600\n");
    if !snapshots.is_empty() {
        s.push_str("set output 'h_y.png'\nset xlabel 'z [m]'\nset ylabel 'h_y [A/m]'\n");
        let curves: Vec<String> = snapshots
            .iter()
            .map(|(_, t, p)| format!("'{}' using 1:3 with lines title 't = {:.3e} s'", p.display(), t))
            .collect();
        let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    }
    if let Some(path) = energy {
        let _ = writeln!(
            s,
            "set output 'energy.png'\nset xlabel 't [s]'\nset ylabel 'E [J/m^2]'\nplot '{}' using 2:3 with lines title 'E'",
            path.display()
        );
    }
    if let Some(path) = comparison {
        let _ = writeln!(
            s,
            "set output 'comparison.png'\nset logscale y\nset xlabel 't [s]'\nset ylabel 'max |difference|'\n\
             plot '{0}' using 2:3 with lines title 'e_x', '{0}' using 2:4 with lines title 'h_y', '{0}' using 2:5 with lines title 'p_x'",
            path.display()
        );
    }
    s
}

pub fn save_plot_script(path: &Path, script: &str) -> io::Result<()> {
    let mut out = create(path)?;
    out.write_all(script.as_bytes())?;
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_columns() {
        let mesh = Mesh1D {
            z_min: 0.0,
            z_max: 1.0,
            n_cells: 4,
        };
        let state = SimState {
            step: 3,
            h_half: vec![1.0, 2.0, 3.0, 4.0],
            h_half_prev: vec![1.0, 2.0, 3.0, 4.0],
            e: vec![0.5; 4],
            p_total: vec![0.0; 4],
            poles: None,
        };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &mesh, &state).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SNAPSHOT_HEADER);
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e0,0.0000000000000000e0"
        );
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn series_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/energy.csv");
        let mut series = CsvSeries::create(&path, ENERGY_HEADER).unwrap();
        series.row(0, &[0.0, 1.0 / 3.0, 0.0, 0.0]).unwrap();
        series.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "n,t,E,D,residual\n0,0.0000000000000000e0,3.3333333333333331e-1,0.0000000000000000e0,0.0000000000000000e0\n"
        );
        let parsed: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }

    #[test]
    fn plot_references_files() {
        let script = plot_script(
            &[(0, 0.0, PathBuf::from("snap/snapshot_000000.csv"))],
            Some(Path::new("energy.csv")),
            None,
        );
        assert!(script.contains("snap/snapshot_000000.csv"));
        assert!(script.contains("'energy.csv' using 2:3"));
        assert!(!script.contains("comparison"));
    }
}
