//! Line-delimited trace files.
//!
//! One JSON object per step, fields always in this order:
//! `{"step":0,"point":[i,...],"valency":v,"reactions":[{"point":[...],"from":"Potential","to":"ForbiddenAlgorithmic"},...]}`

use std::io::{BufRead, Write};

use metasynth_core::engine::{PointId, PointState, Reaction, StepRecord, Trace};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct TraceLine {
    step: usize,
    point: Vec<usize>,
    valency: Option<f64>,
    reactions: Vec<ReactionLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReactionLine {
    point: Vec<usize>,
    from: String,
    to: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: not valid JSON")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_trace<W: Write>(mut out: W, trace: &Trace) -> std::io::Result<()> {
    for step in &trace.steps {
        let line = TraceLine {
            step: step.step_index,
            point: step.transition.coords().to_vec(),
            valency: step.valency,
            reactions: step
                .reactions
                .iter()
                .map(|r| ReactionLine {
                    point: r.point.coords().to_vec(),
                    from: r.from.name().to_string(),
                    to: r.to.name().to_string(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Trace, TraceError> {
    let mut trace = Trace::default();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = k + 1;
        let parsed: TraceLine =
            serde_json::from_str(&line).map_err(|source| TraceError::Json { line: n, source })?;
        let invalid = |message: String| TraceError::Invalid { line: n, message };
        let point = |coords: &[usize]| PointId::new(coords).map_err(|e| invalid(e.to_string()));
        let state = |name: &str| {
            PointState::from_name(name).ok_or_else(|| invalid(format!("unknown state `{name}`")))
        };
        let reactions = parsed
            .reactions
            .iter()
            .map(|r| {
                Ok(Reaction {
                    point: point(&r.point)?,
                    from: state(&r.from)?,
                    to: state(&r.to)?,
                })
            })
            .collect::<Result<Vec<_>, TraceError>>()?;
        trace.steps.push(StepRecord {
            step_index: parsed.step,
            transition: point(&parsed.point)?,
            valency: parsed.valency,
            reactions,
        });
    }
    Ok(trace)
}
