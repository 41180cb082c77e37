//! The standard job-shop text format.
//!
//! ```text
//! # comment
//! <jobs> <machines>
//! <machine> <time> <machine> <time> ...   one line per job, in route order
//! ```
//!
//! Machine ids are 0-based unless [`ParseOptions::one_based`] is set. Blank
//! lines and lines starting with `#` are skipped anywhere in the file; a
//! `# name: <text>` comment before the header names the instance.

use std::fmt::Write as _;

use jssp_core::instance::{validate, Violation};
use jssp_core::{JsspInstance, Job, Operation, Time};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: expected a header `<jobs> <machines>` of two positive integers")]
    MalformedHeader { line: usize },
    #[error("line {line}: `{token}` is not an integer")]
    InvalidNumber { line: usize, token: String },
    #[error("expected {expected} job lines, found {found}")]
    MissingJobs { expected: usize, found: usize },
    #[error("job {job}: expected {expected} operations, found {found}")]
    WrongOperationCount { job: usize, expected: usize, found: usize },
    #[error("job {job} step {step}: machine {machine} out of range")]
    MachineIdOutOfRange { job: usize, step: usize, machine: i64 },
    #[error("job {job}: machines are not a permutation of 0..m")]
    NonPermutationMachines { job: usize },
    #[error("job {job} step {step}: processing time must be positive")]
    NonPositiveTime { job: usize, step: usize },
    #[error("line {line}: unexpected trailing content")]
    TrailingTokens { line: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Machine ids in the file start at 1.
    pub one_based: bool,
    /// Reject extra tokens on a job line and extra lines after the last job.
    pub strict: bool,
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn numbers(line: usize, s: &str) -> Result<Vec<i64>, FormatError> {
    s.split_whitespace()
        .map(|t| t.parse::<i64>().map_err(|_| FormatError::InvalidNumber { line, token: t.to_string() }))
        .collect()
}

const NAME_TAG: &str = "# name:";

fn declared_name(text: &str) -> Option<String> {
    text.lines()
        .map(str::trim)
        .take_while(|l| l.is_empty() || l.starts_with('#'))
        .find_map(|l| l.strip_prefix(NAME_TAG))
        .map(|n| n.trim().to_string())
}

pub fn parse_standard(text: &str, options: ParseOptions) -> Result<JsspInstance, FormatError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(FormatError::MalformedHeader { line: 1 })?;
    let head = numbers(hline, header).map_err(|_| FormatError::MalformedHeader { line: hline })?;
    let (n, m) = match head[..] {
        [n, m] if n > 0 && m > 0 => (n as usize, m as usize),
        [n, m, ..] if !options.strict && n > 0 && m > 0 => (n as usize, m as usize),
        _ => return Err(FormatError::MalformedHeader { line: hline }),
    };
    let offset = options.one_based as i64;
    let mut jobs = Vec::with_capacity(n);
    for job in 0..n {
        let Some((line, body)) = lines.next() else {
            return Err(FormatError::MissingJobs { expected: n, found: job });
        };
        let nums = numbers(line, body)?;
        if nums.len() < 2 * m || nums.len() % 2 == 1 {
            return Err(FormatError::WrongOperationCount { job, expected: m, found: nums.len() / 2 });
        }
        if options.strict && nums.len() > 2 * m {
            return Err(FormatError::TrailingTokens { line });
        }
        let mut seen = vec![false; m];
        let mut ops = Vec::with_capacity(m);
        for step in 0..m {
            let raw = nums[2 * step];
            let machine = raw - offset;
            if machine < 0 || machine >= m as i64 {
                return Err(FormatError::MachineIdOutOfRange { job, step, machine: raw });
            }
            let machine = machine as usize;
            if std::mem::replace(&mut seen[machine], true) {
                return Err(FormatError::NonPermutationMachines { job });
            }
            let time = nums[2 * step + 1];
            if time <= 0 || time > Time::MAX as i64 {
                return Err(FormatError::NonPositiveTime { job, step });
            }
            ops.push(Operation { job_id: job, step_index: step, machine_id: machine, processing_time: time as Time });
        }
        jobs.push(Job { operations: ops });
    }
    if options.strict {
        if let Some((line, _)) = lines.next() {
            return Err(FormatError::TrailingTokens { line });
        }
    }
    let inst = JsspInstance { num_machines: m, num_jobs: n, jobs, name: declared_name(text) };
    // The checks above cover every invariant; keep the core validator as the
    // final word so the two can never drift apart.
    if let Some(v) = validate(&inst).into_iter().next() {
        return Err(match v {
            Violation::NonPermutationMachines { job } => FormatError::NonPermutationMachines { job },
            Violation::NonPositiveTime { job, step } => FormatError::NonPositiveTime { job, step },
            Violation::WrongOperationCount { job, expected, found } => {
                FormatError::WrongOperationCount { job, expected, found }
            }
            Violation::MachineIdOutOfRange { job, step, machine, .. } => {
                FormatError::MachineIdOutOfRange { job, step, machine: machine as i64 }
            }
            Violation::Empty | Violation::JobCountMismatch { .. } | Violation::InconsistentIndex { .. } => {
                FormatError::MalformedHeader { line: hline }
            }
        });
    }
    Ok(inst)
}

/// Writes `<jobs> <machines>` then one line per job, 0-based, `\n` endings.
/// A name must fit on one line to survive the round trip.
pub fn serialize_standard(instance: &JsspInstance) -> String {
    let mut s = String::new();
    if let Some(name) = &instance.name {
        let _ = writeln!(s, "{NAME_TAG} {}", name.trim());
    }
    let _ = writeln!(s, "{} {}", instance.num_jobs, instance.num_machines);
    for job in &instance.jobs {
        let line: Vec<String> =
            job.operations.iter().map(|o| format!("{} {}", o.machine_id, o.processing_time)).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<JsspInstance, FormatError> {
        parse_standard(s, ParseOptions::default())
    }

    #[test]
    fn minimal_and_two_by_two() {
        let one = parse("1 1\n0 5").unwrap();
        assert_eq!((one.num_jobs, one.num_machines), (1, 1));
        assert_eq!(one.operation(0).processing_time, 5);
        assert_eq!(serialize_standard(&one), "1 1\n0 5\n");

        let two = parse("2 2\n0 3 1 2\n1 4 0 6").unwrap();
        let expected = JsspInstance::from_routes(2, &[vec![(0, 3), (1, 2)], vec![(1, 4), (0, 6)]], None).unwrap();
        assert_eq!(two, expected);
        assert_eq!(serialize_standard(&two), "2 2\n0 3 1 2\n1 4 0 6\n");
    }

    #[test]
    fn errors_name_the_culprit() {
        assert_eq!(parse("2 2\n0 3 0 2\n1 4 0 6"), Err(FormatError::NonPermutationMachines { job: 0 }));
        assert_eq!(parse("x 2\n0 1 1 1"), Err(FormatError::MalformedHeader { line: 1 }));
        assert_eq!(parse(""), Err(FormatError::MalformedHeader { line: 1 }));
        assert_eq!(parse("0 2\n"), Err(FormatError::MalformedHeader { line: 1 }));
        assert_eq!(
            parse("1 2\n0 1"),
            Err(FormatError::WrongOperationCount { job: 0, expected: 2, found: 1 })
        );
        assert_eq!(parse("1 2\n0 1 2 1"), Err(FormatError::MachineIdOutOfRange { job: 0, step: 1, machine: 2 }));
        assert_eq!(parse("1 2\n0 1 1 0"), Err(FormatError::NonPositiveTime { job: 0, step: 1 }));
        assert_eq!(parse("2 1\n0 1"), Err(FormatError::MissingJobs { expected: 2, found: 1 }));
        assert!(matches!(parse("1 1\n0 -5"), Err(FormatError::NonPositiveTime { .. })));
    }

    #[test]
    fn comments_one_based_and_strictness() {
        let text = "# ft-like\n\n2 2\n# job lines follow\n1 3 2 2\n2 4 1 6\n";
        let i = parse_standard(text, ParseOptions { one_based: true, strict: true }).unwrap();
        assert_eq!(i.operation(0).machine_id, 0);
        assert_eq!(i.operation(2).machine_id, 1);
        assert!(parse(text).is_err());

        let trailing = "1 1\n0 5 9 9\n";
        assert_eq!(parse(trailing).unwrap().num_operations(), 1);
        assert_eq!(
            parse_standard(trailing, ParseOptions { strict: true, ..Default::default() }),
            Err(FormatError::TrailingTokens { line: 2 })
        );
        let extra_line = "1 1\n0 5\n7 7\n";
        assert!(parse(extra_line).is_ok());
        assert!(parse_standard(extra_line, ParseOptions { strict: true, ..Default::default() }).is_err());
    }

    #[test]
    fn names_survive_as_comments() {
        let i = parse("1 1\n0 5").unwrap().with_name("ft06");
        let text = serialize_standard(&i);
        assert_eq!(text, "# name: ft06\n1 1\n0 5\n");
        assert_eq!(parse(&text).unwrap(), i);
        // Only comments ahead of the header can carry the name.
        assert_eq!(parse("1 1\n# name: late\n0 5").unwrap().name, None);
    }
}
