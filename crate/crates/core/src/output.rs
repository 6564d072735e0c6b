//! CSV emission. All files are comma-separated with a header row, LF line
//! endings and decimal-dot reals.
//!
//! | file                | columns                                   |
//! |---------------------|-------------------------------------------|
//! | `trace.csv`         | every [`TraceRecord`] field               |
//! | `success_rate.csv`  | `run_index,P_mj_percent`                  |
//! | `conflicts.csv`     | `timeslot,cumulative_conflicts`           |
//! | `modes.csv`         | `timeslot,mode_code`                      |
//! | `episodes.csv`      | per-episode summary                       |
//!
//! `run_index` is the episode index; `P_mj_percent` is the share of won
//! confrontations in that episode and is left empty when the episode had
//! none.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::{RunTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Success,
    Conflicts,
    Modes,
}

impl Figure {
    pub fn file_name(self) -> &'static str {
        match self {
            Figure::Success => "success_rate.csv",
            Figure::Conflicts => "conflicts.csv",
            Figure::Modes => "modes.csv",
        }
    }

    pub fn header(self) -> [&'static str; 2] {
        match self {
            Figure::Success => ["run_index", "P_mj_percent"],
            Figure::Conflicts => ["timeslot", "cumulative_conflicts"],
            Figure::Modes => ["timeslot", "mode_code"],
        }
    }

    pub const ALL: [Figure; 3] = [Figure::Success, Figure::Conflicts, Figure::Modes];
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "success" => Ok(Figure::Success),
            "conflicts" => Ok(Figure::Conflicts),
            "modes" => Ok(Figure::Modes),
            other => Err(format!("unknown figure `{other}` (success, conflicts, modes)")),
        }
    }
}

fn writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Trace(e.to_string())
}

/// Rows of one figure, already formatted.
pub fn figure_rows(trace: &RunTrace, figure: Figure) -> Vec<[String; 2]> {
    match figure {
        Figure::Success => trace
            .episodes()
            .iter()
            .map(|e| {
                [
                    e.episode.to_string(),
                    e.success_percent().map(|p| p.to_string()).unwrap_or_default(),
                ]
            })
            .collect(),
        Figure::Conflicts => trace
            .cumulative_conflicts()
            .into_iter()
            .map(|(t, c)| [t.to_string(), c.to_string()])
            .collect(),
        Figure::Modes => trace
            .modes()
            .into_iter()
            .map(|(t, m)| [t.to_string(), m.to_string()])
            .collect(),
    }
}

pub fn write_figure<W: std::io::Write>(w: W, trace: &RunTrace, figure: Figure) -> Result<()> {
    let mut out = writer(w);
    out.write_record(figure.header()).map_err(csv_err)?;
    for row in figure_rows(trace, figure) {
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Write `figure` into `dir` under its fixed file name.
pub fn emit(trace: &RunTrace, figure: Figure, dir: impl AsRef<Path>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.as_ref())?;
    let path = dir.as_ref().join(figure.file_name());
    write_figure(std::fs::File::create(&path)?, trace, figure)?;
    Ok(path)
}

pub fn write_trace<W: std::io::Write>(w: W, trace: &RunTrace) -> Result<()> {
    let mut out = writer(w);
    for rec in &trace.records {
        out.serialize(rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: std::io::Read>(r: R) -> Result<RunTrace> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut trace = RunTrace::default();
    for rec in rdr.deserialize::<TraceRecord>() {
        trace.push(rec.map_err(csv_err)?);
    }
    Ok(trace)
}

pub fn save_trace(trace: &RunTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace(std::fs::File::create(path)?, trace)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<RunTrace> {
    read_trace(std::fs::File::open(path)?)
}

pub fn write_episodes<W: std::io::Write>(w: W, trace: &RunTrace) -> Result<()> {
    let mut out = writer(w);
    out.write_record([
        "episode",
        "timeslots",
        "conflicts",
        "corrections",
        "confrontations",
        "wins",
        "success_percent",
        "final_mode",
        "total_reward",
    ])
    .map_err(csv_err)?;
    for e in trace.episodes() {
        out.write_record([
            e.episode.to_string(),
            e.timeslots.to_string(),
            e.conflicts.to_string(),
            e.corrections.to_string(),
            e.confrontations.to_string(),
            e.wins.to_string(),
            e.success_percent().map(|p| p.to_string()).unwrap_or_default(),
            e.final_mode.to_string(),
            e.total_reward.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
