//! Online control plane: loads encoded entries, consumes digests off the
//! packet path, and keeps the classified-flow rule table and collision
//! log. Strictly a consumer in this version - decisions already live in
//! the data-plane registers, so nothing here can stall or alter the
//! per-packet path.

use std::collections::HashMap;
use std::sync::mpsc::Receiver;
use std::thread::JoinHandle;

use crate::dataplane::{Digest, DigestKind, Pipeline};
use crate::encoder::EncodedModel;
use crate::flow::{FiveTuple, TrafficClass};
use crate::Result;

/// Skip-inference rule recorded for a classified flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowRule {
    pub tuple: FiveTuple,
    pub label: TrafficClass,
    /// Trace time of the decision packet that produced the rule.
    pub installed_at_us: u64,
}

/// Record of one model load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelLoadRecord {
    pub trees: usize,
    pub feature_entries: usize,
    pub leaf_entries: usize,
}

/// Append-only account of everything the controller saw.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControllerLog {
    pub classified: Vec<FlowRule>,
    pub collisions: Vec<Digest>,
    pub model_loads: Vec<ModelLoadRecord>,
    /// Duplicate classified digests for an already-ruled tuple.
    pub anomalies: u64,
    /// Producer-side drops, copied from pipeline stats at shutdown.
    pub dropped_digests: u64,
}

/// Digest consumer. [`Controller::on_digest`] is a pure fold over the
/// digest stream, so replaying a recorded log reproduces the state
/// exactly.
#[derive(Debug, Default)]
pub struct Controller {
    log: ControllerLog,
    ruled: HashMap<FiveTuple, TrafficClass>,
}

impl Controller {
    /// Validate and load the encoded model into the pipeline, then hand
    /// back a controller ready to consume its digests. A rejected model
    /// leaves the pipeline in pass-through mode.
    pub fn start(pipeline: &mut Pipeline, encoded: EncodedModel) -> Result<Controller> {
        let record = ModelLoadRecord {
            trees: encoded.num_trees(),
            feature_entries: encoded.feature_tables.iter().map(|t| t.entries.len()).sum(),
            leaf_entries: encoded.trees.iter().map(|t| t.len()).sum(),
        };
        pipeline.load_entries(encoded)?;
        let mut controller = Controller::default();
        controller.log.model_loads.push(record);
        Ok(controller)
    }

    pub fn on_digest(&mut self, digest: &Digest) {
        match digest.kind {
            DigestKind::Classified => {
                let label = digest.label.expect("classified digests carry a label");
                if self.ruled.contains_key(&digest.tuple) {
                    self.log.anomalies += 1;
                    return;
                }
                self.ruled.insert(digest.tuple, label);
                self.log.classified.push(FlowRule {
                    tuple: digest.tuple,
                    label,
                    installed_at_us: digest.emitted_at_us,
                });
            }
            DigestKind::Collision => {
                self.log.collisions.push(digest.clone());
            }
        }
    }

    pub fn rule_for(&self, tuple: &FiveTuple) -> Option<TrafficClass> {
        self.ruled.get(tuple).copied()
    }

    pub fn log(&self) -> &ControllerLog {
        &self.log
    }

    pub fn into_log(mut self, dropped_digests: u64) -> ControllerLog {
        self.log.dropped_digests = dropped_digests;
        self.log
    }
}

/// Controller running on its own thread, fed by the pipeline's bounded
/// digest queue.
pub struct ControllerHandle {
    join: JoinHandle<Controller>,
}

/// Consume digests until the pipeline drops its sender.
pub fn spawn(mut controller: Controller, rx: Receiver<Digest>) -> ControllerHandle {
    let join = std::thread::spawn(move || {
        while let Ok(digest) = rx.recv() {
            controller.on_digest(&digest);
        }
        controller
    });
    ControllerHandle { join }
}

impl ControllerHandle {
    pub fn finish(self) -> Controller {
        self.join.join().expect("controller thread panicked")
    }
}
