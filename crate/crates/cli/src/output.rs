//! CSV writers and readers. Reals are written with 17 significant digits
//! so that reading a file back reproduces the in-memory values exactly.

use std::fs::File;
use std::path::Path;

use maskcfg::{DenseDistribution, SampleBatch, StateSpace, TVCurve};

use crate::error::{CliError, CliResult};

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn coord_headers(dims: usize) -> Vec<String> {
    (1..=dims).map(|d| format!("x{d}")).collect()
}

/// One density row: 1-based coordinates, guidance, time and probability.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub coords: Vec<usize>,
    pub w: f64,
    pub t: f64,
    pub prob: f64,
}

pub fn density_rows(d: &DenseDistribution, w: f64, t: f64) -> Vec<DensityRow> {
    let space = d.space();
    (0..space.total_states())
        .map(|x| DensityRow {
            coords: space.state_of(x),
            w,
            t,
            prob: d.prob(x),
        })
        .collect()
}

pub fn write_densities(path: &Path, dims: usize, rows: &[DensityRow]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(File::create(path)?);
    let mut header = coord_headers(dims);
    header.extend(["w", "t", "prob"].map(String::from));
    out.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.coords.iter().map(|c| c.to_string()).collect();
        rec.extend([fmt_real(r.w), fmt_real(r.t), fmt_real(r.prob)]);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_real(s: &str) -> CliResult<f64> {
    s.trim().parse().map_err(|_| CliError::Config(format!("bad number {s:?}")))
}

fn parse_index(s: &str) -> CliResult<usize> {
    s.trim().parse().map_err(|_| CliError::Config(format!("bad index {s:?}")))
}

pub fn read_densities(path: &Path) -> CliResult<Vec<DensityRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let dims = rdr.headers()?.len().saturating_sub(3);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let coords = (0..dims).map(|d| parse_index(&rec[d])).collect::<CliResult<Vec<_>>>()?;
        rows.push(DensityRow {
            coords,
            w: parse_real(&rec[dims])?,
            t: parse_real(&rec[dims + 1])?,
            prob: parse_real(&rec[dims + 2])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvRow {
    pub w: f64,
    pub t: f64,
    pub tv: f64,
    pub log_tv: f64,
}

pub fn tv_rows(curve: &TVCurve) -> Vec<TvRow> {
    curve
        .times
        .iter()
        .zip(&curve.values)
        .zip(&curve.log_values)
        .map(|((&t, &tv), &log_tv)| TvRow { w: curve.w, t, tv, log_tv })
        .collect()
}

pub fn write_tv(path: &Path, rows: &[TvRow]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(File::create(path)?);
    out.write_record(["w", "t", "tv", "log_tv"])?;
    for r in rows {
        out.write_record([fmt_real(r.w), fmt_real(r.t), fmt_real(r.tv), fmt_real(r.log_tv)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_tv(path: &Path) -> CliResult<Vec<TvRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TvRow {
                w: parse_real(&rec[0])?,
                t: parse_real(&rec[1])?,
                tv: parse_real(&rec[2])?,
                log_tv: parse_real(&rec[3])?,
            })
        })
        .collect()
}

/// Rows of `x1..xD, scheme, seed`.
pub fn write_samples(path: &Path, batch: &SampleBatch) -> CliResult<()> {
    let space = batch.space;
    let mut out = csv::Writer::from_writer(File::create(path)?);
    let mut header = coord_headers(space.dims());
    header.extend(["scheme", "seed"].map(String::from));
    out.write_record(&header)?;
    let scheme = batch.scheme.name();
    let seed = batch.seed.to_string();
    for &x in &batch.samples {
        let mut rec: Vec<String> = space.state_of(x).iter().map(|c| c.to_string()).collect();
        rec.push(scheme.to_string());
        rec.push(seed.clone());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Flat indices of the samples in a sample CSV.
pub fn read_samples(path: &Path, space: StateSpace) -> CliResult<Vec<usize>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let dims = space.dims();
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let coords = (0..dims).map(|d| parse_index(&rec[d])).collect::<CliResult<Vec<_>>>()?;
            Ok(space.index_of(&coords)?)
        })
        .collect()
}

/// Rows of `x1, x2, prob` over the non-zero entries of a 2D law.
pub fn write_limit(path: &Path, d: &DenseDistribution) -> CliResult<()> {
    let space = d.space();
    let mut out = csv::Writer::from_writer(File::create(path)?);
    out.write_record(["x1", "x2", "prob"])?;
    for x in 0..space.total_states() {
        if d.prob(x) > 0.0 {
            let c = space.state_of(x);
            out.write_record([c[0].to_string(), c[1].to_string(), fmt_real(d.prob(x))])?;
        }
    }
    out.flush()?;
    Ok(())
}
