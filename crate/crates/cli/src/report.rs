use serde::Serialize;
use serde_json::Value;

/// Result envelope of every JSON-producing command. Keys are emitted sorted.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub seed: u64,
    pub tool_version: String,
}

impl RunReport {
    pub fn new(command: &str, inputs: Value, outputs: Value, seed: u64) -> Self {
        RunReport {
            command: command.to_string(),
            inputs,
            outputs,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        // Round-tripping through Value sorts every object's keys.
        let value = serde_json::to_value(self).expect("plain data");
        serde_json::to_string_pretty(&value).expect("plain data")
    }
}
