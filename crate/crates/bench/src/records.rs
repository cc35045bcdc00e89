use std::io::{Read, Write};

use anyhow::{bail, Context, Result};

/// Round-trip exact: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str) -> Result<f64> {
    Ok(match s {
        "NaN" => f64::NAN,
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().with_context(|| format!("bad number `{s}`"))?,
    })
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

/// One evaluation of one BO run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    /// Empty for methods without a size parameter.
    pub size_param: Option<usize>,
    pub dim: usize,
    pub seed: u64,
    pub run_seed: u64,
    pub iteration: usize,
    pub initial: bool,
    pub x: Vec<f64>,
    pub y: f64,
    pub oc: f64,
    pub acq_value: Option<f64>,
    pub fallback: bool,
    /// First acquisition call of the run.
    pub cold_start: bool,
    pub acq_wall_time_s: f64,
    pub iter_wall_time_s: f64,
}

pub const RESULT_HEADER: [&str; 15] = [
    "method",
    "size_param",
    "dim",
    "seed",
    "run_seed",
    "iteration",
    "initial",
    "x",
    "y",
    "oc",
    "acq_value",
    "fallback",
    "cold_start",
    "acq_wall_time_s",
    "iter_wall_time_s",
];

impl ResultRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.size_param.map(|s| s.to_string()).unwrap_or_default(),
            self.dim.to_string(),
            self.seed.to_string(),
            self.run_seed.to_string(),
            self.iteration.to_string(),
            self.initial.to_string(),
            self.x.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(";"),
            fmt_f64(self.y),
            fmt_f64(self.oc),
            fmt_opt(self.acq_value),
            self.fallback.to_string(),
            self.cold_start.to_string(),
            fmt_f64(self.acq_wall_time_s),
            fmt_f64(self.iter_wall_time_s),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != RESULT_HEADER.len() {
            bail!("expected {} fields, found {}", RESULT_HEADER.len(), r.len());
        }
        let size_param = if r[1].is_empty() { None } else { Some(r[1].parse()?) };
        let x = if r[7].is_empty() {
            Vec::new()
        } else {
            r[7].split(';').map(parse_f64).collect::<Result<_>>()?
        };
        Ok(Self {
            method: r[0].to_string(),
            size_param,
            dim: r[2].parse()?,
            seed: r[3].parse()?,
            run_seed: r[4].parse()?,
            iteration: r[5].parse()?,
            initial: r[6].parse()?,
            x,
            y: parse_f64(&r[8])?,
            oc: parse_f64(&r[9])?,
            acq_value: parse_opt(&r[10])?,
            fallback: r[11].parse()?,
            cold_start: r[12].parse()?,
            acq_wall_time_s: parse_f64(&r[13])?,
            iter_wall_time_s: parse_f64(&r[14])?,
        })
    }

    /// Canonical output order.
    pub fn sort_key(&self) -> (String, Option<usize>, usize, u64, usize) {
        (self.method.clone(), self.size_param, self.dim, self.seed, self.iteration)
    }
}

pub fn write_results<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(RESULT_HEADER)?;
    for r in rows {
        out.write_record(r.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(RESULT_HEADER) {
        bail!("unexpected results header: {:?}", header.iter().collect::<Vec<_>>());
    }
    rd.records()
        .enumerate()
        .map(|(i, rec)| ResultRow::from_record(&rec?).with_context(|| format!("results row {}", i + 1)))
        .collect()
}
