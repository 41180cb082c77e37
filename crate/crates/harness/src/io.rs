//! Instance JSON, schedule CSV, reference files and format-by-extension loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use jssp_core::instance::validate;
use jssp_core::metrics::ReferenceMakespan;
use jssp_core::simulator::Schedule;
use jssp_core::{JsspInstance, Job, Operation, Time};
use serde::{Deserialize, Serialize};

use crate::format::{parse_standard, serialize_standard, FormatError, ParseOptions};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: invalid instance: {detail}")]
    Invalid { path: PathBuf, detail: String },
    #[error("{path}: no instance files found")]
    Empty { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct OpJson {
    pub machine: usize,
    pub time: Time,
}

/// `{name, m, n, jobs: [[{machine, time}, ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InstanceJson {
    pub name: Option<String>,
    pub m: usize,
    pub n: usize,
    pub jobs: Vec<Vec<OpJson>>,
}

impl From<&JsspInstance> for InstanceJson {
    fn from(i: &JsspInstance) -> Self {
        InstanceJson {
            name: i.name.clone(),
            m: i.num_machines,
            n: i.num_jobs,
            jobs: i
                .jobs
                .iter()
                .map(|j| j.operations.iter().map(|o| OpJson { machine: o.machine_id, time: o.processing_time }).collect())
                .collect(),
        }
    }
}

impl InstanceJson {
    /// Converts and validates; the first violation is returned as text.
    pub fn into_instance(self) -> Result<JsspInstance, String> {
        let jobs = self
            .jobs
            .into_iter()
            .enumerate()
            .map(|(j, ops)| Job {
                operations: ops
                    .into_iter()
                    .enumerate()
                    .map(|(s, o)| Operation { job_id: j, step_index: s, machine_id: o.machine, processing_time: o.time })
                    .collect(),
            })
            .collect();
        let inst = JsspInstance { num_machines: self.m, num_jobs: self.n, jobs, name: self.name };
        match validate(&inst).first() {
            Some(v) => Err(v.to_string()),
            None => Ok(inst),
        }
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a `.json` instance or a standard text file. Unnamed instances take
/// the file stem as their name.
pub fn load_instance(path: &Path, options: ParseOptions) -> Result<JsspInstance, IoError> {
    let text = read(path)?;
    let mut inst = if is_json(path) {
        let j: InstanceJson =
            serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
        j.into_instance().map_err(|detail| IoError::Invalid { path: path.to_path_buf(), detail })?
    } else {
        parse_standard(&text, options).map_err(|source| IoError::Format { path: path.to_path_buf(), source })?
    };
    if inst.name.is_none() {
        inst.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(inst)
}

pub fn save_instance(path: &Path, instance: &JsspInstance) -> Result<(), IoError> {
    let body = if is_json(path) {
        serde_json::to_string_pretty(&InstanceJson::from(instance)).expect("plain data serializes")
    } else {
        serialize_standard(instance)
    };
    write_file(path, body)
}

/// A file, or every regular file in a directory (sorted by name, hidden
/// files skipped).
pub fn load_instances(path: &Path, options: ParseOptions) -> Result<Vec<JsspInstance>, IoError> {
    let meta = fs::metadata(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    if !meta.is_dir() {
        return Ok(vec![load_instance(path, options)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|source| IoError::Io { path: path.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(IoError::Empty { path: path.to_path_buf() });
    }
    files.iter().map(|p| load_instance(p, options)).collect()
}

/// `job,step,machine,start,finish`, rows sorted by start then job.
pub fn schedule_csv(schedule: &Schedule) -> String {
    let mut rows = schedule.rows.clone();
    rows.sort_by_key(|r| (r.start, r.job, r.step));
    let mut s = String::from("job,step,machine,start,finish\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.job, r.step, r.machine, r.start, r.finish));
    }
    s
}

/// Instance name to reference makespan: `{"ft06": {"optimum": 55}, "la21": {"lb": 1040, "ub": 1046}}`.
pub type References = BTreeMap<String, ReferenceMakespan>;

pub fn load_references(path: &Path) -> Result<References, IoError> {
    let text = read(path)?;
    let refs: References =
        serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    for (name, r) in &refs {
        if let ReferenceMakespan::Bounds { lb, ub } = *r {
            if lb > ub || lb == 0 {
                return Err(IoError::Invalid { path: path.to_path_buf(), detail: format!("{name}: bad bounds") });
            }
        }
    }
    Ok(refs)
}

pub fn save_references(path: &Path, refs: &References) -> Result<(), IoError> {
    write_file(path, serde_json::to_string_pretty(refs).expect("plain data serializes"))
}
