use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::eval::{Cell, EvalMatrix};
use super::run::{ModelRow, RunRecord, RESULTS_FILE};
use crate::{Error, Result};

fn fmt_cell(c: &Cell) -> (String, String) {
    (
        format!("{:.4} ± {:.1}%", c.time, c.time_std_pct),
        format!("{:.1} ± {:.1}%", c.nodes, c.nodes_std_pct),
    )
}

fn table(header: &[String], body: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut w: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in body {
        for (k, c) in r.iter().enumerate().take(cols) {
            w[k] = w[k].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (k, c) in cells.iter().enumerate() {
            let pad = w[k] - c.chars().count();
            if k == 0 {
                s += c;
                s.extend(std::iter::repeat_n(' ', pad));
            } else {
                s += "  ";
                s.extend(std::iter::repeat_n(' ', pad));
                s += c;
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let total: usize = w.iter().sum::<usize>() + 2 * (cols - 1);
    out += &"-".repeat(total);
    out += "\n";
    for r in body {
        out += &line(r);
    }
    out
}

/// Two aligned tables (node and time geomeans), rows = checkpoints.
pub fn render_matrix(m: &EvalMatrix) -> String {
    let mut header = vec![format!("[{}] after", m.strategy)];
    header.extend(m.tasks.iter().cloned());
    let mut nodes = Vec::new();
    let mut times = Vec::new();
    for (i, row) in m.rows.iter().enumerate() {
        let mut n = vec![m.tasks[i].clone()];
        let mut t = vec![m.tasks[i].clone()];
        for c in row {
            let (ts, ns) = fmt_cell(c);
            n.push(ns);
            t.push(ts);
        }
        nodes.push(n);
        times.push(t);
    }
    let caps: usize = m.rows.iter().flatten().map(|c| c.cap_hits).sum();
    let mut s = String::from("nodes (shifted geomean ± per-instance std)\n");
    s += &table(&header, &nodes);
    s += "\ntime in seconds (shifted geomean ± per-instance std)\n";
    s += &table(&header, &times);
    let _ = writeln!(s, "\nsolves stopped at a cap: {caps}");
    s
}

/// Per-model comparison, one line per (task, model).
pub fn render_models(rows: &[ModelRow]) -> String {
    let header: Vec<String> = ["task", "model", "time", "nodes", "top1", "caps"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (t, n) = fmt_cell(&r.cell);
            vec![
                r.task.clone(),
                r.model.clone(),
                t,
                n,
                r.top1.map_or("-".into(), |a| format!("{:.3}", a)),
                r.cell.cap_hits.to_string(),
            ]
        })
        .collect();
    table(&header, &body)
}

/// Writes `matrix.csv`, `report.txt` and one curve CSV per task.
pub fn write_tables(out: &Path, m: &EvalMatrix) -> Result<()> {
    fs::create_dir_all(out.join("curves"))?;
    fs::write(out.join("matrix.csv"), m.to_csv())?;
    fs::write(out.join("report.txt"), render_matrix(m))?;
    for (j, name) in m.tasks.iter().enumerate() {
        fs::write(out.join("curves").join(format!("{name}.csv")), m.curve_csv(j))?;
    }
    Ok(())
}

pub fn load_record(run_dir: &Path) -> Result<RunRecord> {
    let path = run_dir.join(RESULTS_FILE);
    let data = fs::read(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&data)?)
}

/// Re-renders the tables of a finished run and returns the text report.
pub fn report(run_dir: &Path) -> Result<String> {
    let rec = load_record(run_dir)?;
    write_tables(run_dir, &rec.matrix)?;
    Ok(render_matrix(&rec.matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let cell = |n: f64| Cell {
            time: 0.01,
            nodes: n,
            time_std_pct: 0.0,
            nodes_std_pct: 3.0,
            cap_hits: 0,
            runs: 5,
        };
        let mut m = EvalMatrix::new("ft", vec!["sc_0.1".into(), "sc_0.15".into()]);
        m.rows.push(vec![cell(5.0), cell(123.4)]);
        m.rows.push(vec![cell(7.0), cell(9.0)]);
        let s = render_matrix(&m);
        let lines: Vec<&str> = s.lines().skip(1).take(4).collect();
        let widths: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
        assert!(widths.iter().all(|&w| w == widths[1]), "{s}");
        assert!(s.contains("123.4 ± 3.0%"));
    }
}
