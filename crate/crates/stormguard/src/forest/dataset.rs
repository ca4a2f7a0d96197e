//! Offline flow-feature dataset construction from labeled traces.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flow::{flow_id, FiveTuple, FlowFeatures, MsgKind, PacketRecord, TrafficClass};
use crate::{Error, Result};

/// Per-flow feature snapshots: element `i` is the state after packet
/// `i + 2`, i.e. snapshots exist for thresholds `2..=max_t`.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub tuple: FiveTuple,
    pub flow_id: u32,
    pub truth: TrafficClass,
    /// Total RRC packets the flow produced in the trace.
    pub flow_len: u32,
    snapshots: Vec<FlowFeatures>,
}

impl FlowSample {
    /// Feature state after the `t`-th packet, if the flow got that far
    /// (and `t` was within the extraction bound).
    pub fn features_at(&self, t: u32) -> Option<&FlowFeatures> {
        if t < 2 {
            return None;
        }
        self.snapshots.get((t - 2) as usize)
    }

    /// Largest threshold this sample has a snapshot for.
    pub fn max_t(&self) -> u32 {
        self.snapshots.len() as u32 + 1
    }
}

/// Extraction output plus bookkeeping about what was left out.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<FlowSample>,
    /// Flows with exactly one RRC packet: nothing to infer from.
    pub skipped_short: usize,
    /// Flows without a usable ground-truth label.
    pub skipped_unlabeled: usize,
}

struct FlowAccum {
    features: FlowFeatures,
    last_ts: u64,
    truth: Option<TrafficClass>,
    snapshots: Vec<FlowFeatures>,
}

/// Build one [`FlowSample`] per flow with at least two RRC packets,
/// snapshotting the feature state after packets `2..=t_max`.
///
/// Updates use the exact integer rule the data plane applies
/// ([`FlowFeatures::record_packet`]), so offline training sees precisely
/// what the switch would.
pub fn extract_dataset(trace: &[PacketRecord], t_max: u32) -> Result<Dataset> {
    if t_max < 2 {
        return Err(Error::config("t_max must be at least 2"));
    }
    let mut flows: HashMap<FiveTuple, FlowAccum> = HashMap::new();
    let mut order: Vec<FiveTuple> = Vec::new();
    let mut last_ts = 0u64;
    for pkt in trace {
        if pkt.timestamp_us < last_ts {
            return Err(Error::contract(format!(
                "trace timestamps decrease at t={}",
                pkt.timestamp_us
            )));
        }
        last_ts = pkt.timestamp_us;
        if pkt.msg_kind != MsgKind::RrcConnectionRequest {
            continue;
        }
        let accum = flows.entry(pkt.tuple).or_insert_with(|| {
            order.push(pkt.tuple);
            FlowAccum {
                features: FlowFeatures::zeroed(),
                last_ts: 0,
                truth: pkt.truth_label.as_class(),
                snapshots: Vec::new(),
            }
        });
        if accum.truth != pkt.truth_label.as_class() {
            return Err(Error::contract(format!(
                "flow {} changes truth label mid-trace",
                pkt.tuple
            )));
        }
        let ipd = if accum.features.pkt_count == 0 {
            None
        } else {
            Some(FlowFeatures::ipd_from_timestamps(accum.last_ts, pkt.timestamp_us))
        };
        accum.features.record_packet(pkt.length_bytes, ipd);
        accum.last_ts = pkt.timestamp_us;
        if (2..=t_max).contains(&accum.features.pkt_count) {
            accum.snapshots.push(accum.features);
        }
    }

    let mut samples = Vec::new();
    let mut skipped_short = 0usize;
    let mut skipped_unlabeled = 0usize;
    for tuple in order {
        let accum = flows.remove(&tuple).expect("flow recorded in order list");
        if accum.features.pkt_count < 2 {
            skipped_short += 1;
            continue;
        }
        let Some(truth) = accum.truth else {
            skipped_unlabeled += 1;
            continue;
        };
        samples.push(FlowSample {
            tuple,
            flow_id: flow_id(&tuple),
            truth,
            flow_len: accum.features.pkt_count,
            snapshots: accum.snapshots,
        });
    }
    Ok(Dataset {
        samples,
        skipped_short,
        skipped_unlabeled,
    })
}

/// Deterministic stratified split by flow: `train_pct` percent of each
/// class goes to the training side.
pub fn split_dataset(
    samples: &[FlowSample],
    train_pct: u32,
    seed: u64,
) -> (Vec<&FlowSample>, Vec<&FlowSample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [TrafficClass::Benign, TrafficClass::Malicious] {
        let mut members: Vec<&FlowSample> = samples.iter().filter(|s| s.truth == class).collect();
        members.shuffle(&mut rng);
        let cut = (members.len() * train_pct as usize) / 100;
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    (train, test)
}
