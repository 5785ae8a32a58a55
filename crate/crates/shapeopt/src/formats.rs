//! Artifact formats: CSV histories and meshes, the JSON summary and the
//! Matrix Market operator dump.

use std::io::Write;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use shapeopt_core::geometry::VolumeMesh;
use shapeopt_core::linalg::{Mat, SymSparse};
use shapeopt_core::optim::{OptHistory, PiggybackRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub objective: f64,
    #[serde(rename = "E_max")]
    pub e_max: f64,
    #[serde(rename = "C_min")]
    pub c_min: Option<f64>,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub step_scale: f64,
    pub time_s: f64,
}

pub fn history_rows(h: &OptHistory) -> Vec<HistoryRow> {
    h.records
        .iter()
        .map(|r| HistoryRow {
            iter: r.iter,
            objective: r.objective,
            e_max: r.e_max,
            c_min: r.c_min,
            grad_norm: r.grad_norm,
            step_norm: r.step_norm,
            step_scale: r.step_scale,
            time_s: r.time_s,
        })
        .collect()
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_history<W: Write>(w: W, h: &OptHistory) -> Result<()> {
    write_rows(w, history_rows(h))
}

pub fn read_history(text: &str) -> Result<Vec<HistoryRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Serialize)]
struct PiggybackRow {
    outer: usize,
    inner: usize,
    primal: f64,
    adjoint: f64,
}

pub fn write_piggyback<W: Write>(w: W, trace: &[PiggybackRecord]) -> Result<()> {
    write_rows(
        w,
        trace.iter().map(|r| PiggybackRow {
            outer: r.outer,
            inner: r.inner,
            primal: r.primal,
            adjoint: r.adjoint,
        }),
    )
}

#[derive(Serialize)]
struct SurfaceRow {
    index: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct VolumeRow {
    index: usize,
    x: f64,
    y: f64,
    layer: usize,
}

pub fn write_surface<W: Write>(w: W, nodes: &[[f64; 2]]) -> Result<()> {
    write_rows(w, nodes.iter().enumerate().map(|(index, p)| SurfaceRow { index, x: p[0], y: p[1] }))
}

pub fn write_volume<W: Write>(w: W, volume: &VolumeMesh) -> Result<()> {
    write_rows(
        w,
        volume.nodes().iter().enumerate().map(|(index, p)| VolumeRow {
            index,
            x: p[0],
            y: p[1],
            layer: volume.layer_of(index),
        }),
    )
}

/// Symmetric coordinate format; the lower triangle, one-based indices.
pub fn write_matrix_market_dense<W: Write>(mut w: W, a: &Mat, comment: &str) -> Result<()> {
    let entries: Vec<(usize, usize, f64)> = (0..a.rows())
        .flat_map(|i| (0..=i).map(move |j| (i, j)))
        .filter(|&(i, j)| a[(i, j)] != 0.0).map(|(i, j)| (i, j, a[(i, j)]))
        .collect();
    write_mm(&mut w, a.rows(), &entries, comment)
}

pub fn write_matrix_market_sparse<W: Write>(mut w: W, a: &SymSparse, comment: &str) -> Result<()> {
    let mut entries: Vec<_> = a.lower_entries().collect();
    entries.sort_by_key(|&(i, j, _)| (j, i));
    write_mm(&mut w, a.dim(), &entries, comment)
}

fn write_mm<W: Write>(w: &mut W, n: usize, entries: &[(usize, usize, f64)], comment: &str) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    for line in comment.lines() {
        writeln!(w, "% {line}")?;
    }
    writeln!(w, "{n} {n} {}", entries.len())?;
    for &(i, j, v) in entries {
        writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
    }
    Ok(())
}

/// Parses the symmetric coordinate format back into a dense matrix.
pub fn read_matrix_market(text: &str) -> Result<Mat> {
    let mut lines = text.lines().filter(|l| !l.starts_with('%'));
    let header = lines.next().ok_or_else(|| anyhow::anyhow!("missing size line"))?;
    let dims: Vec<usize> = header.split_whitespace().map(str::parse).collect::<Result<_, _>>()?;
    let [n, _, nnz] = dims[..] else {
        anyhow::bail!("malformed size line `{header}`");
    };
    let mut a = Mat::zeros(n, n);
    let mut count = 0;
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let [i, j, v] = f[..] else {
            anyhow::bail!("malformed entry `{line}`");
        };
        let (i, j, v): (usize, usize, f64) = (i.parse()?, j.parse()?, v.parse()?);
        a[(i - 1, j - 1)] = v;
        a[(j - 1, i - 1)] = v;
        count += 1;
    }
    anyhow::ensure!(count == nnz, "expected {nnz} entries, found {count}");
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_market_round_trip() {
        let a = Mat::from_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 2.0, 0.5], &[0.0, 0.5, 1e-17]]);
        let mut buf = Vec::new();
        write_matrix_market_dense(&mut buf, &a, "test matrix").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n% test matrix\n3 3 5\n"));
        assert_eq!(read_matrix_market(&text).unwrap(), a);
    }

    #[test]
    fn history_round_trip_with_missing_inequalities() {
        let rows = vec![HistoryRow {
            iter: 0,
            objective: 0.1,
            e_max: 0.0,
            c_min: None,
            grad_norm: 1e-3,
            step_norm: 0.0,
            step_scale: 1.0,
            time_s: 0.0,
        }];
        let mut buf = Vec::new();
        write_rows(&mut buf, rows.clone()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,objective,E_max,C_min,grad_norm,step_norm,step_scale,time_s\n"));
        assert_eq!(read_history(&text).unwrap(), rows);
    }
}
