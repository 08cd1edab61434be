use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Trajectory, Transition};
use crate::error::{check_len, Error, Result};

pub const BUFFER_SCHEMA: &str = "v1";

/// One recorded episode: `T + 1` states and the `T` actions between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EpisodeLine {
    schema: String,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

impl Episode {
    pub fn new(initial_state: Vec<f64>) -> Self {
        Self {
            states: vec![initial_state],
            actions: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Vec<f64>, next_state: Vec<f64>) {
        self.actions.push(action);
        self.states.push(next_state);
    }

    pub fn validate(&self) -> Result<()> {
        check_len("episode states", self.actions.len() + 1, self.states.len())?;
        let s = self.states[0].len();
        for st in &self.states {
            check_len("episode state", s, st.len())?;
        }
        if let Some(a0) = self.actions.first() {
            for a in &self.actions {
                check_len("episode action", a0.len(), a.len())?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.actions.iter().enumerate().map(|(t, a)| Transition {
            state: self.states[t].clone(),
            action: a.clone(),
            next_state: self.states[t + 1].clone(),
        })
    }

    /// Stride-1 windows with `context` past states and `horizon` steps,
    /// all lying inside this episode.
    pub fn windows(&self, context: usize, horizon: usize) -> Vec<Trajectory> {
        if context == 0 || horizon == 0 {
            return Vec::new();
        }
        let t_len = self.actions.len();
        let mut out = Vec::new();
        let mut t = context - 1;
        while t + horizon <= t_len {
            out.push(Trajectory {
                context: self.states[t + 1 - context..=t].to_vec(),
                actions: self.actions[t..t + horizon].to_vec(),
                future: self.states[t + 1..=t + horizon].to_vec(),
            });
            t += 1;
        }
        out
    }
}

/// Writes one episode per line.
pub fn write_episodes_jsonl<W: Write>(mut w: W, episodes: &[Episode]) -> Result<()> {
    for e in episodes {
        let line = EpisodeLine {
            schema: BUFFER_SCHEMA.to_string(),
            states: e.states.clone(),
            actions: e.actions.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_episodes_jsonl<R: BufRead>(r: R) -> Result<Vec<Episode>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EpisodeLine = serde_json::from_str(&line)?;
        if parsed.schema != BUFFER_SCHEMA {
            return Err(Error::Invalid(format!(
                "unsupported buffer schema {:?}",
                parsed.schema
            )));
        }
        let e = Episode {
            states: parsed.states,
            actions: parsed.actions,
        };
        e.validate()?;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counting_episode(t: usize) -> Episode {
        let mut e = Episode::new(vec![0.0, 0.0]);
        for i in 0..t {
            let x = (i + 1) as f64;
            e.push(vec![x * 0.1], vec![x, -x]);
        }
        e
    }

    #[test]
    fn windows_stay_inside_episode() {
        let e = counting_episode(10);
        let w = e.windows(2, 3);
        // t ranges over 1..=7
        assert_eq!(w.len(), 7);
        for win in &w {
            assert_eq!(win.context.len(), 2);
            assert_eq!(win.actions.len(), 3);
            // future[0] follows the last context state
            assert_eq!(win.future[0][0], win.context[1][0] + 1.0);
        }
        assert!(e.windows(1, 11).is_empty());
        assert_eq!(e.windows(1, 10).len(), 1);
    }

    #[test]
    fn transitions_pair_consecutive_states() {
        let e = counting_episode(4);
        let ts: Vec<_> = e.transitions().collect();
        assert_eq!(ts.len(), 4);
        assert_eq!(ts[2].state, vec![2.0, -2.0]);
        assert_eq!(ts[2].next_state, vec![3.0, -3.0]);
    }

    #[test]
    fn jsonl_round_trip_and_schema_check() {
        let eps = vec![counting_episode(3), counting_episode(5)];
        let mut buf = Vec::new();
        write_episodes_jsonl(&mut buf, &eps).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.contains("\"schema\":\"v1\"")));
        assert_eq!(read_episodes_jsonl(&buf[..]).unwrap(), eps);

        let bad = text.replace("\"v1\"", "\"v0\"");
        assert!(read_episodes_jsonl(bad.as_bytes()).is_err());
        let ragged = r#"{"schema":"v1","states":[[0.0]],"actions":[[1.0]]}"#;
        assert!(read_episodes_jsonl(ragged.as_bytes()).is_err());
    }
}
