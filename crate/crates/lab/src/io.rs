use std::{fs::File, io::BufWriter, path::Path};

use anyhow::{bail, Context};
use emstable::{EmpiricalMeasure, Provenance};
use serde::Serialize;

/// Writes one row per point with header `x1..xd`.
pub fn write_points(path: &Path, m: &EmpiricalMeasure) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record((1..=m.dim()).map(|i| format!("x{i}")))?;
    for p in m.points() {
        w.write_record(p.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a points file written by [`write_points`] (any header is accepted).
pub fn read_points(path: &Path) -> anyhow::Result<EmpiricalMeasure> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let dim = r.headers()?.len();
    if dim == 0 {
        bail!("{} has an empty header", path.display());
    }
    let mut flat = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim {
            bail!("{} row {} has {} columns, expected {dim}", path.display(), i + 1, rec.len());
        }
        for f in rec.iter() {
            flat.push(f.trim().parse::<f64>().with_context(|| format!("{} row {}: bad number {f:?}", path.display(), i + 1))?);
        }
    }
    let meta = Provenance {
        n_points: flat.len() / dim,
        ..Default::default()
    };
    Ok(EmpiricalMeasure::new(dim, flat, meta)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `points.csv` → `points.provenance.json`.
pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    out.with_extension("provenance.json")
}
