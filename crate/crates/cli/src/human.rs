//! Terminal-driven agents: a human takes one side and is prompted for an
//! action each stage. Pure input loop, no rendering beyond text.

use std::io::{BufRead, Write};
use std::sync::Arc;

use osp_core::agents::{Agent1, Agent2};
use osp_core::hsvi::SolverError;
use osp_core::model::{A1Id, A2Id, AgentState, GameModel, PointId};

fn read_action(
    input: &mut dyn BufRead,
    output: &mut dyn Write,
    names: &[String],
    prompt: &str,
) -> Result<usize, SolverError> {
    let io_err = |e: std::io::Error| SolverError::Internal(format!("console error: {e}"));
    loop {
        write!(output, "{prompt} [").map_err(io_err)?;
        for (i, n) in names.iter().enumerate() {
            let sep = if i + 1 == names.len() { "" } else { ", " };
            write!(output, "{i}={n}{sep}").map_err(io_err)?;
        }
        writeln!(output, "]: ").map_err(io_err)?;
        output.flush().map_err(io_err)?;
        let mut line = String::new();
        let n = input.read_line(&mut line).map_err(io_err)?;
        if n == 0 {
            return Err(SolverError::Internal("input closed".into()));
        }
        let token = line.trim();
        if let Ok(i) = token.parse::<usize>() {
            if i < names.len() {
                return Ok(i);
            }
        }
        if let Some(i) = names.iter().position(|x| x == token) {
            return Ok(i);
        }
        writeln!(output, "unrecognized action '{token}'").map_err(io_err)?;
    }
}

/// A human playing the partially informed side.
pub struct HumanAgent1<R, W> {
    model: Arc<GameModel>,
    input: R,
    output: W,
    names: Vec<String>,
}

impl<R: BufRead, W: Write> HumanAgent1<R, W> {
    pub fn new(model: Arc<GameModel>, input: R, output: W) -> Self {
        let names = model.a1_ids().map(|a| model.a1_name(a).to_string()).collect();
        HumanAgent1 {
            model,
            input,
            output,
            names,
        }
    }
}

impl<R: BufRead, W: Write> Agent1 for HumanAgent1<R, W> {
    fn act(&mut self) -> Result<A1Id, SolverError> {
        let i = read_action(&mut self.input, &mut self.output, &self.names, "your move")?;
        Ok(A1Id(i))
    }

    fn observe(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError> {
        writeln!(
            self.output,
            "played {}; now at local state {}, percept {}",
            self.model.a1_name(a1),
            self.model.loc1_name(s1_next.loc1),
            self.model.per1_name(s1_next.per1),
        )
        .map_err(|e| SolverError::Internal(format!("console error: {e}")))
    }
}

/// A human playing the fully informed side.
pub struct HumanAgent2<R, W> {
    model: Arc<GameModel>,
    input: R,
    output: W,
    names: Vec<String>,
}

impl<R: BufRead, W: Write> HumanAgent2<R, W> {
    pub fn new(model: Arc<GameModel>, input: R, output: W) -> Self {
        let names = model.a2_ids().map(|a| model.a2_name(a).to_string()).collect();
        HumanAgent2 {
            model,
            input,
            output,
            names,
        }
    }
}

impl<R: BufRead, W: Write> Agent2 for HumanAgent2<R, W> {
    fn act(&mut self, observed: (AgentState, PointId)) -> Result<A2Id, SolverError> {
        let io_err = |e: std::io::Error| SolverError::Internal(format!("console error: {e}"));
        writeln!(
            self.output,
            "true state: point {}, opponent at local state {} with percept {}",
            self.model.point_name(observed.1),
            self.model.loc1_name(observed.0.loc1),
            self.model.per1_name(observed.0.per1),
        )
        .map_err(io_err)?;
        let i = read_action(&mut self.input, &mut self.output, &self.names, "your move")?;
        Ok(A2Id(i))
    }

    fn observe(
        &mut self,
        a1: A1Id,
        _s1_next: AgentState,
        true_next: (AgentState, PointId),
    ) -> Result<(), SolverError> {
        writeln!(
            self.output,
            "opponent played {}; environment now at {}",
            self.model.a1_name(a1),
            self.model.point_name(true_next.1),
        )
        .map_err(|e| SolverError::Internal(format!("console error: {e}")))
    }
}
