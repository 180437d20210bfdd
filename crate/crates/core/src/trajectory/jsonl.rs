use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::Trajectory;
use crate::error::{Error, Result};

const REQUIRED: [&str; 4] = ["frames", "id", "task", "success"];
const REQUIRED_FRAME: [&str; 2] = ["i", "obs"];

/// Writes one JSON object per line; returns the number of records written.
pub fn write_records<T: Serialize>(records: &[T], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(records.len())
}

fn for_each_line(path: &Path, mut f: impl FnMut(usize, Value) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|source| Error::Parse { line: n + 1, source })?;
        f(n + 1, value)?;
    }
    Ok(())
}

/// Reads line-delimited JSON records of any deserialisable type. Schema
/// failures report the line number and serde's description of the field.
pub fn read_records<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for_each_line(path.as_ref(), |line, value| {
        let rec = serde_json::from_value(value).map_err(|e| Error::Schema {
            line,
            field: field_from_serde(&e),
        })?;
        out.push(rec);
        Ok(())
    })?;
    Ok(out)
}

fn field_from_serde(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    msg.split('`').nth(1).map_or(msg.clone(), str::to_string)
}

pub fn write_jsonl(trajectories: &[Trajectory], path: impl AsRef<Path>) -> Result<usize> {
    write_records(trajectories, path)
}

/// Reads a trajectory file, checking required fields and trajectory
/// invariants line by line.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for_each_line(path.as_ref(), |line, value| {
        let schema = |field: &str| Error::Schema {
            line,
            field: field.to_string(),
        };
        let obj = value.as_object().ok_or_else(|| schema("<object>"))?;
        if let Some(missing) = REQUIRED.iter().find(|k| !obj.contains_key(**k)) {
            return Err(schema(missing));
        }
        let frames = obj["frames"].as_array().ok_or_else(|| schema("frames"))?;
        for frame in frames {
            let fo = frame.as_object().ok_or_else(|| schema("frames"))?;
            if let Some(missing) = REQUIRED_FRAME.iter().find(|k| !fo.contains_key(**k)) {
                return Err(schema(&format!("frames.{missing}")));
            }
        }
        let traj: Trajectory = serde_json::from_value(value).map_err(|e| schema(&field_from_serde(&e)))?;
        traj.validate().map_err(|f| schema(&f))?;
        out.push(traj);
        Ok(())
    })?;
    Ok(out)
}
