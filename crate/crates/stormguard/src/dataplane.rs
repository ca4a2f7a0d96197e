//! Deterministic emulation of the switch pipeline.
//!
//! Every packet walks the same fixed stage sequence — filter, hash, slot,
//! decided-check, feature update, code lookups, per-tree match, vote,
//! threshold, mitigate — with no loops and a hard bound on stages per
//! packet. Per-flow state lives in a hash-indexed register array; slot
//! conflicts are surfaced as collision digests and fail open. Decisions
//! are stored back into the slot, so packets of a decided flow skip the
//! inference stages entirely.

use std::sync::mpsc::{Receiver, SyncSender, TrySendError};
use std::time::Instant;

use arrayvec::ArrayVec;

use crate::encoder::EncodedModel;
use crate::flow::{flow_hash, flow_id, FiveTuple, FlowFeatures, MsgKind, PacketRecord, TrafficClass};
use crate::{Error, Result};

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stage {
    Filter = 0,
    Hash,
    Slot,
    DecidedCheck,
    Update,
    Code,
    Trees,
    Vote,
    Threshold,
    Mitigate,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Filter,
        Stage::Hash,
        Stage::Slot,
        Stage::DecidedCheck,
        Stage::Update,
        Stage::Code,
        Stage::Trees,
        Stage::Vote,
        Stage::Threshold,
        Stage::Mitigate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Filter => "filter",
            Stage::Hash => "hash",
            Stage::Slot => "slot",
            Stage::DecidedCheck => "decided_check",
            Stage::Update => "update",
            Stage::Code => "code",
            Stage::Trees => "trees",
            Stage::Vote => "vote",
            Stage::Threshold => "threshold",
            Stage::Mitigate => "mitigate",
        }
    }
}

/// Hard ceiling on stages any packet may execute.
pub const MAX_STAGES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Forward,
    Drop,
    /// Forwarded without classification because of a slot collision.
    ForwardBypass,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::Drop => "drop",
            Action::ForwardBypass => "forward_bypass",
        }
    }
}

/// Outcome of one packet's walk through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketVerdict {
    pub action: Action,
    pub stages: ArrayVec<Stage, MAX_STAGES>,
    /// Best-effort class for packets between the second and the decision
    /// packet; never actuates drops.
    pub provisional_label: Option<TrafficClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlotStatus {
    #[default]
    Collecting,
    Decided(TrafficClass),
}

/// One register slot: the per-flow state the switch keeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowSlot {
    pub occupied: bool,
    pub stored_flow_id: u32,
    pub features: FlowFeatures,
    pub first_ts_us: u64,
    pub last_ts_us: u64,
    pub status: SlotStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DigestKind {
    Classified,
    Collision,
}

impl DigestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DigestKind::Classified => "classified",
            DigestKind::Collision => "collision",
        }
    }
}

/// Report exported to the controller: a final classification, or a hash
/// collision observed on the arriving packet's slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digest {
    pub kind: DigestKind,
    /// The arriving packet's tuple (for collisions: the bypassed flow).
    pub tuple: FiveTuple,
    /// CRC of `tuple`; for collisions the slot holds the other party's ID.
    pub flow_id: u32,
    pub label: Option<TrafficClass>,
    /// Occupying flow's packet count at emission.
    pub pkt_count: u32,
    /// Trace time from the flow's first packet to the decision packet.
    pub inference_duration_us: Option<u64>,
    /// Trace timestamp of the packet that triggered the digest.
    pub emitted_at_us: u64,
    /// Wall-clock pipeline time for the triggering packet. Excluded from
    /// every deterministic output format.
    pub processing_ns: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    /// Register array holds `2^table_bits` slots.
    pub table_bits: u8,
    /// Packet count at which the final decision is taken.
    pub t_star: u32,
    pub provisional_enabled: bool,
    /// Vote-tie policy: forward (true) or drop (false). Unreachable with
    /// an odd tree count.
    pub fail_open: bool,
    pub digest_queue_capacity: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            table_bits: 16,
            t_star: 6,
            provisional_enabled: true,
            fail_open: true,
            digest_queue_capacity: 65_536,
        }
    }
}

/// Deterministic counters kept by the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub packets: u64,
    pub forwarded: u64,
    pub dropped: u64,
    pub bypassed: u64,
    pub collisions: u64,
    pub classified: u64,
    pub decided_skips: u64,
    /// Forwarded packets of flows later decided malicious (packets
    /// 1..T-1 were already through when the decision landed).
    pub pre_decision_leakage: u64,
    pub digests_emitted: u64,
    pub digests_dropped: u64,
    pub stage_counts: [u64; Stage::ALL.len()],
    pub max_stages_per_packet: usize,
}

/// The emulated switch: register slots plus the loaded match-action
/// tables. Single logical packet stream; digests go to an optional
/// bounded queue that is never blocked on.
pub struct Pipeline {
    config: PipelineConfig,
    slots: Vec<FlowSlot>,
    model: Option<EncodedModel>,
    digest_tx: Option<SyncSender<Digest>>,
    pub stats: PipelineStats,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        if !(1..=24).contains(&config.table_bits) {
            return Err(Error::config(format!(
                "table_bits must be in 1..=24, got {}",
                config.table_bits
            )));
        }
        if config.t_star < 2 {
            return Err(Error::config("t_star must be at least 2"));
        }
        Ok(Pipeline {
            config,
            slots: vec![FlowSlot::default(); 1usize << config.table_bits],
            model: None,
            digest_tx: None,
            stats: PipelineStats::default(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn model(&self) -> Option<&EncodedModel> {
        self.model.as_ref()
    }

    pub fn slot(&self, index: usize) -> &FlowSlot {
        &self.slots[index]
    }

    /// Swap in new match-action tables. Validation happens first; a
    /// rejected load leaves the previous tables (and all per-flow state,
    /// including decisions) untouched.
    pub fn load_entries(&mut self, encoded: EncodedModel) -> Result<()> {
        encoded.validate()?;
        let mut encoded = encoded;
        let n = encoded.trees.len();
        if !self.config.fail_open && n % 2 == 0 {
            // Tie row exists only for even tree counts.
            encoded.vote_table[n / 2] = TrafficClass::Malicious;
        }
        self.model = Some(encoded);
        Ok(())
    }

    /// Bounded digest stream for a controller. The pipeline only ever
    /// `try_send`s: when the queue is full (or the consumer is gone) the
    /// digest is counted as dropped, never blocked on.
    pub fn attach_digest_queue(&mut self) -> Receiver<Digest> {
        let (tx, rx) = std::sync::mpsc::sync_channel(self.config.digest_queue_capacity);
        self.digest_tx = Some(tx);
        rx
    }

    pub fn detach_digest_queue(&mut self) {
        self.digest_tx = None;
    }

    fn publish(&mut self, digest: &Digest) {
        self.stats.digests_emitted += 1;
        if let Some(tx) = &self.digest_tx {
            match tx.try_send(digest.clone()) {
                Ok(()) => {}
                Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                    self.stats.digests_dropped += 1;
                }
            }
        }
    }

    /// Walk one packet through the fixed stage sequence.
    ///
    /// Packets must be presented in trace order; [`run_trace`] enforces
    /// that for whole traces.
    pub fn process_packet(&mut self, pkt: &PacketRecord) -> (PacketVerdict, Option<Digest>) {
        let started = Instant::now();
        self.stats.packets += 1;
        let mut stages: ArrayVec<Stage, MAX_STAGES> = ArrayVec::new();
        let push = |stats: &mut PipelineStats, stages: &mut ArrayVec<Stage, MAX_STAGES>, s: Stage| {
            stages.push(s);
            stats.stage_counts[s as usize] += 1;
        };

        // 1. FILTER: everything that is not an RRC connection request is
        // forwarded untouched.
        push(&mut self.stats, &mut stages, Stage::Filter);
        if pkt.msg_kind != MsgKind::RrcConnectionRequest {
            return self.finish(stages, Action::Forward, None, None, started);
        }

        // 2. HASH
        push(&mut self.stats, &mut stages, Stage::Hash);
        let index = flow_hash(&pkt.tuple, self.config.table_bits) as usize;
        let fid = flow_id(&pkt.tuple);

        // 3. SLOT: claim, or report a collision and bypass.
        push(&mut self.stats, &mut stages, Stage::Slot);
        if !self.slots[index].occupied {
            self.slots[index] = FlowSlot {
                occupied: true,
                stored_flow_id: fid,
                features: FlowFeatures::zeroed(),
                first_ts_us: pkt.timestamp_us,
                last_ts_us: pkt.timestamp_us,
                status: SlotStatus::Collecting,
            };
        } else if self.slots[index].stored_flow_id != fid {
            self.stats.collisions += 1;
            let digest = Digest {
                kind: DigestKind::Collision,
                tuple: pkt.tuple,
                flow_id: fid,
                label: None,
                pkt_count: self.slots[index].features.pkt_count,
                inference_duration_us: None,
                emitted_at_us: pkt.timestamp_us,
                processing_ns: started.elapsed().as_nanos() as u64,
            };
            return self.finish(stages, Action::ForwardBypass, None, Some(digest), started);
        }

        // 4. DECIDED-CHECK: cached decision short-circuits inference.
        push(&mut self.stats, &mut stages, Stage::DecidedCheck);
        if let SlotStatus::Decided(class) = self.slots[index].status {
            self.stats.decided_skips += 1;
            let action = if class == TrafficClass::Malicious { Action::Drop } else { Action::Forward };
            return self.finish(stages, action, None, None, started);
        }

        // 5. UPDATE: fold the packet into the feature vector.
        push(&mut self.stats, &mut stages, Stage::Update);
        let slot = &mut self.slots[index];
        let ipd = if slot.features.pkt_count == 0 {
            None
        } else {
            Some(FlowFeatures::ipd_from_timestamps(slot.last_ts_us, pkt.timestamp_us))
        };
        slot.features.record_packet(pkt.length_bytes, ipd);
        slot.last_ts_us = pkt.timestamp_us;
        let pkt_count = slot.features.pkt_count;
        let first_ts = slot.first_ts_us;
        let vector = slot.features.as_vector();

        // Without loaded tables the pipeline is in pass-through mode.
        let Some(model) = &self.model else {
            return self.finish(stages, Action::Forward, None, None, started);
        };

        // 6-8. CODE, TREES, VOTE
        push(&mut self.stats, &mut stages, Stage::Code);
        let codes = model.codes(&vector);
        push(&mut self.stats, &mut stages, Stage::Trees);
        let malicious_votes = model
            .trees
            .iter()
            .filter(|t| {
                t.iter()
                    .find(|leaf| {
                        leaf.intervals
                            .iter()
                            .zip(codes.iter())
                            .all(|(iv, &c)| iv.lo <= c && c <= iv.hi)
                    })
                    .map(|leaf| leaf.label)
                    .unwrap_or(TrafficClass::Benign)
                    == TrafficClass::Malicious
            })
            .count();
        push(&mut self.stats, &mut stages, Stage::Vote);
        let class = model.vote_table[malicious_votes];

        // 9. THRESHOLD: finalize at exactly t_star packets.
        push(&mut self.stats, &mut stages, Stage::Threshold);
        if pkt_count == self.config.t_star {
            self.slots[index].status = SlotStatus::Decided(class);
            self.stats.classified += 1;
            if class == TrafficClass::Malicious {
                self.stats.pre_decision_leakage += (pkt_count - 1) as u64;
            }
            let digest = Digest {
                kind: DigestKind::Classified,
                tuple: pkt.tuple,
                flow_id: fid,
                label: Some(class),
                pkt_count,
                inference_duration_us: Some(pkt.timestamp_us - first_ts),
                emitted_at_us: pkt.timestamp_us,
                processing_ns: 0, // stamped in finish()
            };
            // 10. MITIGATE: the decision applies to this very packet.
            push(&mut self.stats, &mut stages, Stage::Mitigate);
            let action = if class == TrafficClass::Malicious { Action::Drop } else { Action::Forward };
            return self.finish(stages, action, None, Some(digest), started);
        }

        // Best-effort provisional class; needs at least one observed IPD.
        let provisional = if self.config.provisional_enabled && pkt_count >= 2 {
            Some(class)
        } else {
            None
        };
        self.finish(stages, Action::Forward, provisional, None, started)
    }

    fn finish(
        &mut self,
        stages: ArrayVec<Stage, MAX_STAGES>,
        action: Action,
        provisional_label: Option<TrafficClass>,
        digest: Option<Digest>,
        started: Instant,
    ) -> (PacketVerdict, Option<Digest>) {
        match action {
            Action::Forward => self.stats.forwarded += 1,
            Action::Drop => self.stats.dropped += 1,
            Action::ForwardBypass => {
                self.stats.forwarded += 1;
                self.stats.bypassed += 1;
            }
        }
        self.stats.max_stages_per_packet = self.stats.max_stages_per_packet.max(stages.len());
        let digest = digest.map(|mut d| {
            d.processing_ns = started.elapsed().as_nanos() as u64;
            self.publish(&d);
            d
        });
        (
            PacketVerdict {
                action,
                stages,
                provisional_label,
            },
            digest,
        )
    }
}

/// Per-flow summary assembled while driving a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowReportEntry {
    pub tuple: FiveTuple,
    pub flow_id: u32,
    pub rrc_packets: u32,
    pub final_label: Option<TrafficClass>,
    pub provisional: Vec<TrafficClass>,
    pub inference_duration_us: Option<u64>,
    pub collisions: u32,
    pub forwarded: u32,
    pub dropped: u32,
}

/// Wall-clock per-packet latency distribution. Kept apart from the
/// deterministic outputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimingStats {
    pub samples: u64,
    pub median_ns: u64,
    pub p99_ns: u64,
    pub p999_ns: u64,
    pub max_ns: u64,
}

/// Nearest-rank percentile over a sorted slice; `q` in permille.
pub fn percentile_permille(sorted: &[u64], q: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as u64).div_ceil(1000).max(1) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn timing_from_samples(mut samples: Vec<u64>) -> TimingStats {
    samples.sort_unstable();
    TimingStats {
        samples: samples.len() as u64,
        median_ns: percentile_permille(&samples, 500),
        p99_ns: percentile_permille(&samples, 990),
        p999_ns: percentile_permille(&samples, 999),
        max_ns: samples.last().copied().unwrap_or(0),
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub verdicts: Vec<PacketVerdict>,
    pub digests: Vec<Digest>,
    pub flow_report: Vec<FlowReportEntry>,
    pub stats: PipelineStats,
    pub timing: TimingStats,
}

/// Drive a whole trace through the pipeline, assembling the per-flow
/// report and stats. Rejects out-of-order traces.
pub fn run_trace(pipeline: &mut Pipeline, trace: &[PacketRecord]) -> Result<RunOutput> {
    use std::collections::HashMap;

    let mut verdicts = Vec::with_capacity(trace.len());
    let mut digests = Vec::new();
    let mut report: Vec<FlowReportEntry> = Vec::new();
    let mut by_tuple: HashMap<FiveTuple, usize> = HashMap::new();
    let mut latencies = Vec::with_capacity(trace.len());
    let mut last_ts = 0u64;

    for pkt in trace {
        if pkt.timestamp_us < last_ts {
            return Err(Error::contract(format!(
                "trace timestamps decrease at t={}",
                pkt.timestamp_us
            )));
        }
        last_ts = pkt.timestamp_us;

        let started = Instant::now();
        let (verdict, digest) = pipeline.process_packet(pkt);
        latencies.push(started.elapsed().as_nanos() as u64);

        if pkt.msg_kind == MsgKind::RrcConnectionRequest {
            let idx = *by_tuple.entry(pkt.tuple).or_insert_with(|| {
                report.push(FlowReportEntry {
                    tuple: pkt.tuple,
                    flow_id: flow_id(&pkt.tuple),
                    rrc_packets: 0,
                    final_label: None,
                    provisional: Vec::new(),
                    inference_duration_us: None,
                    collisions: 0,
                    forwarded: 0,
                    dropped: 0,
                });
                report.len() - 1
            });
            let entry = &mut report[idx];
            entry.rrc_packets += 1;
            match verdict.action {
                Action::Drop => entry.dropped += 1,
                Action::Forward => entry.forwarded += 1,
                Action::ForwardBypass => {
                    entry.forwarded += 1;
                    entry.collisions += 1;
                }
            }
            if let Some(label) = verdict.provisional_label {
                entry.provisional.push(label);
            }
            if let Some(d) = &digest {
                if d.kind == DigestKind::Classified {
                    entry.final_label = d.label;
                    entry.inference_duration_us = d.inference_duration_us;
                }
            }
        }

        verdicts.push(verdict);
        if let Some(d) = digest {
            digests.push(d);
        }
    }

    Ok(RunOutput {
        verdicts,
        digests,
        flow_report: report,
        stats: pipeline.stats.clone(),
        timing: timing_from_samples(latencies),
    })
}
