//! CSV files. Floats are written with Rust's shortest round-trip formatting,
//! so re-reading a file recovers the exact values.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::Result;

use super::cell::CellResult;

pub const EPISODES_HEADER: [&str; 8] =
    ["cell_id", "bs_density", "build_density", "policy", "variant", "seed", "episode", "throughput_bits_hz"];

pub const STEPS_HEADER: [&str; 14] = [
    "cell_id",
    "bs_density",
    "build_density",
    "policy",
    "variant",
    "seed",
    "episode",
    "throughput_bits_hz",
    "step",
    "x_m",
    "h_m",
    "action",
    "sinr_db",
    "se_bits_hz",
];

pub const SUMMARY_HEADER: [&str; 12] = [
    "cell_id",
    "bs_density",
    "build_density",
    "policy",
    "variant",
    "seed",
    "window_start",
    "window_end",
    "episodes_in_window",
    "mean_throughput_bits_hz",
    "sd_throughput_bits_hz",
    "mean_height_m",
];

fn cell_fields(c: &CellResult) -> [String; 6] {
    [
        c.cell_id.clone(),
        c.spec.bs_density_km2.to_string(),
        c.spec.build_density_km2.to_string(),
        c.spec.policy.to_string(),
        c.spec.variant_name().to_string(),
        c.seed.to_string(),
    ]
}

pub fn write_episodes_csv<W: Write>(cells: &[CellResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EPISODES_HEADER)?;
    for c in cells {
        let head = cell_fields(c);
        for e in &c.episodes {
            let mut rec: Vec<String> = head.to_vec();
            rec.push(e.episode.to_string());
            rec.push(e.throughput_bits_hz.to_string());
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_steps_csv<W: Write>(cells: &[CellResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(STEPS_HEADER)?;
    for c in cells {
        let head = cell_fields(c);
        for (episode, steps) in &c.step_logs {
            let throughput = c.episodes[episode - 1].throughput_bits_hz;
            for s in steps {
                let mut rec: Vec<String> = head.to_vec();
                rec.extend([
                    episode.to_string(),
                    throughput.to_string(),
                    s.step.to_string(),
                    s.x_m.to_string(),
                    s.h_m.to_string(),
                    s.action.index().to_string(),
                    s.sinr_db.to_string(),
                    s.se_bits_hz.to_string(),
                ]);
                out.write_record(&rec)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell_id: String,
    pub bs_density: f64,
    pub build_density: f64,
    pub policy: String,
    pub variant: String,
    pub seed: u64,
    pub window: (usize, usize),
    pub episodes_in_window: usize,
    pub mean_throughput: f64,
    /// Sample standard deviation (n − 1); zero for a single episode.
    pub sd_throughput: f64,
    pub mean_height_m: f64,
}

pub fn summarize(cells: &[CellResult], window: (usize, usize)) -> Vec<SummaryRow> {
    let (lo, hi) = window;
    cells
        .iter()
        .map(|c| {
            let in_win: Vec<_> = c.episodes.iter().filter(|e| (lo..=hi).contains(&e.episode)).collect();
            let n = in_win.len();
            let mean = in_win.iter().map(|e| e.throughput_bits_hz).sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (in_win.iter().map(|e| (e.throughput_bits_hz - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let mean_height_m = in_win.iter().map(|e| e.mean_height_m).sum::<f64>() / n as f64;
            SummaryRow {
                cell_id: c.cell_id.clone(),
                bs_density: c.spec.bs_density_km2,
                build_density: c.spec.build_density_km2,
                policy: c.spec.policy.to_string(),
                variant: c.spec.variant_name().to_string(),
                seed: c.seed,
                window,
                episodes_in_window: n,
                mean_throughput: mean,
                sd_throughput: sd,
                mean_height_m,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.cell_id.clone(),
            r.bs_density.to_string(),
            r.build_density.to_string(),
            r.policy.clone(),
            r.variant.clone(),
            r.seed.to_string(),
            r.window.0.to_string(),
            r.window.1.to_string(),
            r.episodes_in_window.to_string(),
            r.mean_throughput.to_string(),
            r.sd_throughput.to_string(),
            r.mean_height_m.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EpisodeRow {
    pub cell_id: String,
    pub bs_density: f64,
    pub build_density: f64,
    pub policy: String,
    pub variant: String,
    pub seed: u64,
    pub episode: usize,
    pub throughput_bits_hz: f64,
}

pub fn read_episodes_csv<R: Read>(r: R) -> Result<Vec<EpisodeRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<EpisodeRow>, _>>()?;
    Ok(rows)
}

/// One row of `steps.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub(crate) struct StepRow {
    pub cell_id: String,
    pub bs_density: f64,
    pub build_density: f64,
    #[allow(dead_code)]
    pub policy: String,
    #[allow(dead_code)]
    pub variant: String,
    #[allow(dead_code)]
    pub seed: u64,
    pub episode: usize,
    pub throughput_bits_hz: f64,
    pub step: usize,
    pub x_m: f64,
    pub h_m: f64,
    #[allow(dead_code)]
    pub action: u8,
    #[allow(dead_code)]
    pub sinr_db: f64,
    pub se_bits_hz: f64,
}
