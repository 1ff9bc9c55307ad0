//! Trace files: newline-delimited JSON, one header record per episode
//! followed by one record per step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::session::{Episode, EpisodeStatus, TraceStep};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Episode {
        module_id: String,
        episode: u32,
        seed: u64,
        status: Option<EpisodeStatus>,
        steps: usize,
    },
    Step(TraceStep),
}

pub fn write_episodes<W: Write>(mut out: W, episodes: &[Episode]) -> Result<()> {
    for ep in episodes {
        let header = Record::Episode {
            module_id: ep.module_id.clone(),
            episode: ep.episode,
            seed: ep.seed,
            status: ep.status,
            steps: ep.steps.len(),
        };
        writeln!(out, "{}", canonical::to_string(&header))?;
        for step in &ep.steps {
            writeln!(out, "{}", canonical::to_string(&Record::Step(step.clone())))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn episodes_to_string(episodes: &[Episode]) -> String {
    let mut buf = Vec::new();
    write_episodes(&mut buf, episodes).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_episodes<R: BufRead>(input: R) -> Result<Vec<Episode>> {
    let mut episodes: Vec<Episode> = Vec::new();
    let mut expected = 0usize;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| Error::CorruptTrace {
            line: line_no,
            reason,
        };
        let record: Record = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        match record {
            Record::Episode {
                module_id,
                episode,
                seed,
                status,
                steps,
            } => {
                if let Some(prev) = episodes.last() {
                    if prev.steps.len() != expected {
                        return Err(corrupt(format!(
                            "episode {} declared {expected} steps, found {}",
                            prev.episode,
                            prev.steps.len()
                        )));
                    }
                }
                expected = steps;
                episodes.push(Episode {
                    module_id,
                    episode,
                    seed,
                    status,
                    steps: Vec::with_capacity(steps),
                });
            }
            Record::Step(step) => match episodes.last_mut() {
                Some(ep) => ep.steps.push(step),
                None => return Err(corrupt("step before any episode header".into())),
            },
        }
    }
    if let Some(last) = episodes.last() {
        if last.steps.len() != expected {
            return Err(Error::CorruptTrace {
                line: 0,
                reason: format!(
                    "episode {} declared {expected} steps, found {}",
                    last.episode,
                    last.steps.len()
                ),
            });
        }
    }
    Ok(episodes)
}
