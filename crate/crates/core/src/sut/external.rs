use std::io::Write;
use std::process::{Command, Stdio};

use crate::trace::Trace;

use super::SutError;

/// A simulator run as a child process: the input trace is written to its
/// standard input as CSV and the output trace read back from standard output
/// in the same format. Initial-state values are appended to the arguments.
/// A non-zero exit status is a simulation failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCommand {
    program: String,
    args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(mut command: Vec<String>) -> Result<Self, SutError> {
        if command.is_empty() {
            return Err(SutError::Config("external model command is empty".into()));
        }
        let program = command.remove(0);
        Ok(ExternalCommand {
            program,
            args: command,
        })
    }

    pub fn simulate(&self, inputs: &Trace, init: &[f64]) -> Result<Trace, SutError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .args(init.iter().map(f64::to_string))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| SutError::External(format!("cannot start `{}`: {e}", self.program)))?;
        let mut csv = Vec::new();
        inputs.to_csv(&mut csv)?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            // the child may exit without reading everything; its status decides
            let _ = stdin.write_all(&csv);
        }
        let out = child
            .wait_with_output()
            .map_err(|e| SutError::External(e.to_string()))?;
        if !out.status.success() {
            return Err(SutError::External(format!(
                "`{}` exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let outputs = Trace::from_csv(out.stdout.as_slice())?;
        if outputs.times() != inputs.times() {
            return Err(SutError::External(
                "output time stamps differ from the input trace".into(),
            ));
        }
        Ok(inputs.merged(&outputs)?)
    }
}
