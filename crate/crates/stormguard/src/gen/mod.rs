//! Synthetic labeled traces: benign random-access traffic interleaved with
//! MSG3 signaling storms.
//!
//! Every UE and attacker owns one 5-tuple (source IP shared per DU, source
//! port unique within it) aimed at a fixed CU endpoint. Benign UEs start
//! sessions as a Poisson process; each session carries a handful of
//! requests at tens-of-milliseconds spacing, occasionally followed by short
//! retransmission chains. Attackers emit dense bursts with uniform gaps.
//! Message length ranges overlap across classes on purpose, so timing - not
//! size - carries the learnable signal.

pub mod arrivals;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flow::{flow_id, FiveTuple, MsgKind, PacketRecord, TruthLabel};
use crate::{Error, Result};
use arrivals::{derive_seed, geometric_gap_us, Rate};

type R = num::rational::Ratio<u128>;

/// Inclusive uniform integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueRange {
    pub min: u64,
    pub max: u64,
}

impl ValueRange {
    pub fn new(min: u64, max: u64) -> Self {
        ValueRange { min, max }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        rng.gen_range(self.min..=self.max)
    }

    fn mean(&self) -> R {
        R::new(self.min as u128 + self.max as u128, 2)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.min > self.max {
            return Err(Error::config(format!("{what}: min {} > max {}", self.min, self.max)));
        }
        Ok(())
    }
}

/// Synthetic stand-in for the benign random-access mix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenignProfile {
    pub num_ues: u32,
    /// Mean session arrivals per second per UE.
    pub session_rate: Rate,
    pub msgs_per_session: ValueRange,
    pub msg_len_bytes: ValueRange,
    pub intra_session_gap_us: ValueRange,
    /// Chance (percent) that a request is followed by a retransmission.
    pub retx_start_pct: u8,
    /// Chance (percent) that a retransmission is followed by another.
    pub retx_continue_pct: u8,
    /// Hard cap on consecutive retransmissions.
    pub retx_max_chain: u8,
    pub retx_gap_us: ValueRange,
}

/// Storm traffic shape: burst size, in-burst pacing, pause between bursts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackProfile {
    pub num_attackers: u32,
    pub burst_size: ValueRange,
    pub intra_burst_gap_us: ValueRange,
    pub inter_burst_gap_us: ValueRange,
    pub msg_len_bytes: ValueRange,
}

/// Complete description of one generated trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub duration_us: u64,
    pub benign: BenignProfile,
    pub attack: AttackProfile,
    /// When set, the profiles must imply this aggregate rate (within 3%);
    /// configs that miss it are rejected rather than silently reshaped.
    pub target_aggregate_pps: Option<u64>,
    /// Distinct source-IP groups (one per emulated DU).
    pub num_dus: u32,
    /// Percent of all packets that are non-RA background traffic.
    pub background_pct: u8,
    pub seed: u64,
}

// Fixed endpoint layout. The CU terminates every RA flow; each DU
// contributes one source address; background user-plane traffic runs to a
// separate port so it never aliases an RA 5-tuple.
const CU_IP: u32 = 0x0A3C_0001; // 10.60.0.1
const CU_PORT: u16 = 38472;
const SCTP_PROTO: u8 = 132;
const DU_IP_BASE: u32 = 0x0A3C_0100; // 10.60.1.0 + 1 + du
const ACTOR_PORT_BASE: u16 = 1024;
const BG_PORT_BASE: u16 = 900;
const BG_DST_PORT: u16 = 2152;
const UDP_PROTO: u8 = 17;

// Seed-stream namespaces, decoupled so changing one population does not
// reshuffle another.
const STREAM_BENIGN: u64 = 0;
const STREAM_ATTACK: u64 = 1 << 32;
const STREAM_BACKGROUND: u64 = 2 << 32;

/// Expected mean rates implied by a config, before any packet is drawn.
#[derive(Debug, Clone, Copy)]
pub struct ExpectedRates {
    pub benign_pps: f64,
    pub attack_pps: f64,
    pub background_pps: f64,
    pub total_pps: f64,
}

fn ratio_f64(r: R) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Mean packets contributed per request once retransmissions are counted:
/// `1 + start * (1 + c + c^2 + ...)` up to the chain cap.
fn retx_multiplier(p: &BenignProfile) -> R {
    let start = R::new(p.retx_start_pct as u128, 100);
    let cont = R::new(p.retx_continue_pct as u128, 100);
    let mut chain_mean = R::from_integer(0);
    let mut term = R::from_integer(1);
    for _ in 0..p.retx_max_chain {
        chain_mean += term;
        term *= cont;
    }
    R::from_integer(1) + start * chain_mean
}

fn benign_pps(p: &BenignProfile) -> R {
    if p.num_ues == 0 || p.session_rate.is_zero() {
        return R::from_integer(0);
    }
    R::from_integer(p.num_ues as u128)
        * R::new(p.session_rate.num as u128, p.session_rate.den as u128)
        * p.msgs_per_session.mean()
        * retx_multiplier(p)
}

fn attack_pps_per_source(a: &AttackProfile) -> Result<R> {
    let burst = a.burst_size.mean();
    let cycle_us =
        (burst - R::from_integer(1)) * a.intra_burst_gap_us.mean() + a.inter_burst_gap_us.mean();
    if cycle_us == R::from_integer(0) {
        return Err(Error::config("attack profile implies a zero-length burst cycle"));
    }
    Ok(burst * R::from_integer(1_000_000) / cycle_us)
}

fn attack_pps(a: &AttackProfile) -> Result<R> {
    if a.num_attackers == 0 {
        return Ok(R::from_integer(0));
    }
    Ok(R::from_integer(a.num_attackers as u128) * attack_pps_per_source(a)?)
}

/// Validate a config and report the rates it implies.
pub fn expected_rates(config: &ScenarioConfig) -> Result<ExpectedRates> {
    if config.duration_us == 0 {
        return Err(Error::config("duration_us must be positive"));
    }
    if config.num_dus == 0 {
        return Err(Error::config("num_dus must be at least 1"));
    }
    if config.background_pct >= 100 {
        return Err(Error::config("background_pct must be below 100"));
    }
    let b = &config.benign;
    let a = &config.attack;
    b.msgs_per_session.validate("benign.msgs_per_session")?;
    b.msg_len_bytes.validate("benign.msg_len_bytes")?;
    b.intra_session_gap_us.validate("benign.intra_session_gap_us")?;
    b.retx_gap_us.validate("benign.retx_gap_us")?;
    a.burst_size.validate("attack.burst_size")?;
    a.intra_burst_gap_us.validate("attack.intra_burst_gap_us")?;
    a.inter_burst_gap_us.validate("attack.inter_burst_gap_us")?;
    a.msg_len_bytes.validate("attack.msg_len_bytes")?;
    for (range, what) in [(&b.msg_len_bytes, "benign.msg_len_bytes"), (&a.msg_len_bytes, "attack.msg_len_bytes")] {
        if range.max > u16::MAX as u64 {
            return Err(Error::config(format!("{what}: lengths must fit 16 bits")));
        }
        if range.min == 0 {
            return Err(Error::config(format!("{what}: zero-length packets not allowed")));
        }
    }
    if a.burst_size.min == 0 {
        return Err(Error::config("attack.burst_size must be at least 1"));
    }
    if b.num_ues > 0 && !b.session_rate.is_zero() && b.session_rate.survival_q64().is_none() {
        return Err(Error::config("benign.session_rate is not representable at microsecond resolution"));
    }
    let actors = b.num_ues as u64 + a.num_attackers as u64;
    let ports_per_du = (u16::MAX - ACTOR_PORT_BASE + 1) as u64;
    if actors > ports_per_du * config.num_dus as u64 {
        return Err(Error::config(format!(
            "{actors} actors exceed the source-port space of {} DUs",
            config.num_dus
        )));
    }

    let benign = benign_pps(b);
    let attack = attack_pps(a)?;
    let nonbg = benign + attack;
    let background = if config.background_pct == 0 {
        R::from_integer(0)
    } else {
        nonbg * R::new(config.background_pct as u128, (100 - config.background_pct) as u128)
    };
    let total = nonbg + background;

    if total > R::from_integer(1_000_000) {
        return Err(Error::config(format!(
            "implied aggregate rate {:.0} pps exceeds 1 packet per microsecond",
            ratio_f64(total)
        )));
    }
    if let Some(target) = config.target_aggregate_pps {
        let target_r = R::from_integer(target as u128);
        let tolerance = target_r * R::new(3, 100);
        let gap = if total > target_r { total - target_r } else { target_r - total };
        if gap > tolerance {
            return Err(Error::config(format!(
                "profiles imply {:.0} pps but target_aggregate_pps is {target} (over 3% off)",
                ratio_f64(total)
            )));
        }
    }

    Ok(ExpectedRates {
        benign_pps: ratio_f64(benign),
        attack_pps: ratio_f64(attack),
        background_pps: ratio_f64(background),
        total_pps: ratio_f64(total),
    })
}

fn du_tuple(du: u32, src_port: u16) -> FiveTuple {
    FiveTuple::new(DU_IP_BASE + 1 + du, CU_IP, src_port, CU_PORT, SCTP_PROTO)
}

fn actor_tuple(actor_index: u32, num_dus: u32) -> FiveTuple {
    let du = actor_index % num_dus;
    let port = ACTOR_PORT_BASE + (actor_index / num_dus) as u16;
    du_tuple(du, port)
}

fn push_packet(
    out: &mut Vec<PacketRecord>,
    ts: u64,
    tuple: FiveTuple,
    len: u64,
    kind: MsgKind,
    label: TruthLabel,
) {
    out.push(PacketRecord {
        timestamp_us: ts,
        tuple,
        length_bytes: len as u16,
        msg_kind: kind,
        truth_label: label,
    });
}

fn benign_flow(config: &ScenarioConfig, tuple: FiveTuple, rng: &mut ChaCha8Rng) -> Vec<PacketRecord> {
    let p = &config.benign;
    let mut out = Vec::new();
    let Some(q64) = p.session_rate.survival_q64() else {
        return out;
    };
    let duration = config.duration_us;
    let mut session_start = geometric_gap_us(rng, q64);
    while session_start < duration {
        let msgs = p.msgs_per_session.sample(rng);
        let mut msg_ts = session_start;
        for m in 0..msgs {
            if m > 0 {
                msg_ts += p.intra_session_gap_us.sample(rng);
            }
            if msg_ts >= duration {
                break;
            }
            let len = p.msg_len_bytes.sample(rng);
            push_packet(&mut out, msg_ts, tuple, len, MsgKind::RrcConnectionRequest, TruthLabel::Benign);
            // Retransmission chain hanging off this request.
            let mut retx_ts = msg_ts;
            for chain in 0..p.retx_max_chain {
                let pct = if chain == 0 { p.retx_start_pct } else { p.retx_continue_pct };
                if rng.gen_range(0..100u8) >= pct {
                    break;
                }
                retx_ts += p.retx_gap_us.sample(rng);
                if retx_ts >= duration {
                    break;
                }
                let len = p.msg_len_bytes.sample(rng);
                push_packet(&mut out, retx_ts, tuple, len, MsgKind::RrcConnectionRequest, TruthLabel::Benign);
            }
        }
        session_start += geometric_gap_us(rng, q64);
    }
    out
}

fn attack_flow(config: &ScenarioConfig, tuple: FiveTuple, rng: &mut ChaCha8Rng) -> Vec<PacketRecord> {
    let a = &config.attack;
    let mut out = Vec::new();
    let duration = config.duration_us;
    // Random phase so attackers do not fire in lockstep.
    let phase_span = a.inter_burst_gap_us.max.min(duration.saturating_sub(1));
    let mut t = rng.gen_range(0..=phase_span);
    'bursts: loop {
        let burst = a.burst_size.sample(rng);
        for p in 0..burst {
            if p > 0 {
                t += a.intra_burst_gap_us.sample(rng);
            }
            if t >= duration {
                break 'bursts;
            }
            let len = a.msg_len_bytes.sample(rng);
            push_packet(&mut out, t, tuple, len, MsgKind::RrcConnectionRequest, TruthLabel::Malicious);
        }
        t += a.inter_burst_gap_us.sample(rng);
        if t >= duration {
            break;
        }
    }
    out
}

fn background_flow(
    config: &ScenarioConfig,
    tuple: FiveTuple,
    rate: Rate,
    rng: &mut ChaCha8Rng,
) -> Vec<PacketRecord> {
    let mut out = Vec::new();
    let Some(q64) = rate.survival_q64() else {
        return out;
    };
    let mut t = geometric_gap_us(rng, q64);
    while t < config.duration_us {
        let len = rng.gen_range(100..=1400u64);
        push_packet(&mut out, t, tuple, len, MsgKind::Other, TruthLabel::Benign);
        t += geometric_gap_us(rng, q64);
    }
    out
}

/// Synthesize the trace a config describes.
///
/// Deterministic in `config.seed`: every flow draws from its own derived
/// stream, and the merged trace is ordered by timestamp with ties broken
/// by flow ID.
pub fn generate_trace(config: &ScenarioConfig) -> Result<Vec<PacketRecord>> {
    let rates = expected_rates(config)?;
    let mut packets = Vec::new();

    for ue in 0..config.benign.num_ues {
        let tuple = actor_tuple(ue, config.num_dus);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_BENIGN | ue as u64));
        packets.extend(benign_flow(config, tuple, &mut rng));
    }
    for atk in 0..config.attack.num_attackers {
        let tuple = actor_tuple(config.benign.num_ues + atk, config.num_dus);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_ATTACK | atk as u64));
        packets.extend(attack_flow(config, tuple, &mut rng));
    }
    if config.background_pct > 0 && rates.background_pps > 0.0 {
        let num_bg_flows = 2 * config.num_dus;
        let per_flow_num = (rates.background_pps * 1000.0).round() as u64;
        let rate = Rate::per_second(per_flow_num, 1000 * num_bg_flows as u64);
        for k in 0..num_bg_flows {
            let du = k % config.num_dus;
            let port = BG_PORT_BASE + (k / config.num_dus) as u16;
            let tuple = FiveTuple::new(DU_IP_BASE + 1 + du, CU_IP, port, BG_DST_PORT, UDP_PROTO);
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_BACKGROUND | k as u64));
            packets.extend(background_flow(config, tuple, rate, &mut rng));
        }
    }

    packets.sort_by_cached_key(|p| (p.timestamp_us, flow_id(&p.tuple), p.tuple.to_bytes()));
    Ok(packets)
}

/// Aggregate facts about a generated trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceSummary {
    pub packets: usize,
    pub rrc_packets: usize,
    pub other_packets: usize,
    pub benign_flows: usize,
    pub malicious_flows: usize,
    pub realized_pps: u64,
}

pub fn summarize(trace: &[PacketRecord], duration_us: u64) -> TraceSummary {
    use std::collections::HashSet;
    let mut benign = HashSet::new();
    let mut malicious = HashSet::new();
    let mut rrc = 0usize;
    for p in trace {
        if p.msg_kind == MsgKind::RrcConnectionRequest {
            rrc += 1;
            match p.truth_label {
                TruthLabel::Malicious => {
                    malicious.insert(p.tuple);
                }
                _ => {
                    benign.insert(p.tuple);
                }
            }
        }
    }
    TraceSummary {
        packets: trace.len(),
        rrc_packets: rrc,
        other_packets: trace.len() - rrc,
        benign_flows: benign.len(),
        malicious_flows: malicious.len(),
        realized_pps: if duration_us == 0 {
            0
        } else {
            (trace.len() as u128 * 1_000_000 / duration_us as u128) as u64
        },
    }
}

/// Shared shape of the three load presets; only population sizes, session
/// rates, and the seed differ between them.
fn preset_base(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        duration_us: 10_000_000,
        benign: BenignProfile {
            num_ues: 0,
            session_rate: Rate::per_second(1, 5),
            msgs_per_session: ValueRange::new(4, 8),
            msg_len_bytes: ValueRange::new(60, 120),
            intra_session_gap_us: ValueRange::new(20_000, 60_000),
            retx_start_pct: 35,
            retx_continue_pct: 22,
            retx_max_chain: 4,
            retx_gap_us: ValueRange::new(400, 3_000),
        },
        attack: AttackProfile {
            num_attackers: 0,
            burst_size: ValueRange::new(25, 55),
            intra_burst_gap_us: ValueRange::new(300, 1_500),
            inter_burst_gap_us: ValueRange::new(500_000, 860_000),
            msg_len_bytes: ValueRange::new(60, 80),
        },
        target_aggregate_pps: None,
        num_dus: 5,
        background_pct: 10,
        seed,
    }
}

/// Solve the attacker count that lands the aggregate rate on target.
fn solve_attackers(config: &ScenarioConfig, target_pps: u64) -> Result<u32> {
    let nonbg_target = R::from_integer(target_pps as u128)
        * R::new((100 - config.background_pct) as u128, 100);
    let benign = benign_pps(&config.benign);
    if nonbg_target <= benign {
        return Ok(0);
    }
    let per_attacker = attack_pps_per_source(&config.attack)?;
    let needed = (nonbg_target - benign) / per_attacker;
    Ok(needed.round().to_integer() as u32)
}

fn build_preset(target_pps: u64, num_ues: u32, session_rate: Rate, seed: u64) -> ScenarioConfig {
    let mut config = preset_base(seed);
    config.benign.num_ues = num_ues;
    config.benign.session_rate = session_rate;
    config.attack.num_attackers =
        solve_attackers(&config, target_pps).expect("preset profile is well-formed");
    config.target_aggregate_pps = Some(target_pps);
    config
}

pub const PRESET_NAMES: [&str; 3] = ["low", "moderate", "high"];

/// The three standard load points: 10K, 30K, and 50K packets per second.
pub fn scenario_presets() -> Vec<(&'static str, ScenarioConfig)> {
    vec![
        ("low", build_preset(10_000, 400, Rate::per_second(1, 5), 1010)),
        ("moderate", build_preset(30_000, 400, Rate::per_second(3, 10), 3030)),
        ("high", build_preset(50_000, 200, Rate::per_second(1, 2), 5050)),
    ]
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    scenario_presets()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn small_config() -> ScenarioConfig {
        let mut config = preset_base(99);
        config.duration_us = 2_000_000;
        config.benign.num_ues = 40;
        config.benign.session_rate = Rate::per_second(1, 1);
        config.attack.num_attackers = 10;
        config.target_aggregate_pps = None;
        config.background_pct = 10;
        config
    }

    #[test]
    fn deterministic_given_seed() {
        let config = small_config();
        let a = generate_trace(&config).unwrap();
        let b = generate_trace(&config).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn no_attackers_means_all_benign() {
        let mut config = small_config();
        config.attack.num_attackers = 0;
        let trace = generate_trace(&config).unwrap();
        assert!(trace.iter().all(|p| p.truth_label == TruthLabel::Benign));
    }

    #[test]
    fn timestamps_non_decreasing_and_tiebreak_by_flow_id() {
        let trace = generate_trace(&small_config()).unwrap();
        for w in trace.windows(2) {
            assert!(w[0].timestamp_us <= w[1].timestamp_us);
            if w[0].timestamp_us == w[1].timestamp_us {
                assert!(flow_id(&w[0].tuple) <= flow_id(&w[1].tuple));
            }
        }
    }

    #[test]
    fn labels_constant_per_flow() {
        let trace = generate_trace(&small_config()).unwrap();
        let mut seen: HashMap<FiveTuple, TruthLabel> = HashMap::new();
        for p in &trace {
            let prev = seen.insert(p.tuple, p.truth_label);
            if let Some(prev) = prev {
                assert_eq!(prev, p.truth_label, "label flip on {}", p.tuple);
            }
        }
    }

    #[test]
    fn each_actor_owns_a_unique_tuple() {
        let config = small_config();
        let trace = generate_trace(&config).unwrap();
        let rrc_tuples: std::collections::HashSet<_> = trace
            .iter()
            .filter(|p| p.msg_kind == MsgKind::RrcConnectionRequest)
            .map(|p| p.tuple)
            .collect();
        // Tuples are actor-indexed, so none may repeat across actors.
        assert!(rrc_tuples.len() <= (config.benign.num_ues + config.attack.num_attackers) as usize);
        for t in &rrc_tuples {
            assert_eq!(t.dst_ip, CU_IP);
            assert_eq!(t.dst_port, CU_PORT);
            assert_eq!(t.protocol, SCTP_PROTO);
        }
    }

    #[test]
    fn background_traffic_is_other_kind() {
        let trace = generate_trace(&small_config()).unwrap();
        let other: Vec<_> = trace.iter().filter(|p| p.msg_kind == MsgKind::Other).collect();
        assert!(!other.is_empty());
        assert!(other.iter().all(|p| p.tuple.dst_port == BG_DST_PORT));
        assert!(other.iter().all(|p| p.truth_label == TruthLabel::Benign));
    }

    #[test]
    fn rejects_peak_rate_beyond_resolution() {
        let mut config = small_config();
        config.attack.num_attackers = 60_000;
        config.attack.burst_size = ValueRange::new(1000, 1000);
        config.attack.intra_burst_gap_us = ValueRange::new(0, 1);
        config.attack.inter_burst_gap_us = ValueRange::new(1, 1);
        config.num_dus = 5;
        assert!(matches!(generate_trace(&config), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_exhausted_port_space() {
        let mut config = small_config();
        config.num_dus = 1;
        config.benign.num_ues = 65_000;
        assert!(matches!(expected_rates(&config), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_target_far_from_profiles() {
        let mut config = small_config();
        config.target_aggregate_pps = Some(500_000);
        assert!(matches!(expected_rates(&config), Err(Error::Config(_))));
    }

    #[test]
    fn presets_have_expected_shape() {
        let presets = scenario_presets();
        assert_eq!(presets.len(), 3);
        let targets: Vec<u64> = presets
            .iter()
            .map(|(_, c)| c.target_aggregate_pps.unwrap())
            .collect();
        assert_eq!(targets, vec![10_000, 30_000, 50_000]);
        for (name, config) in &presets {
            assert!(config.benign.num_ues >= 100, "{name}: too few benign flows");
            assert!(config.attack.num_attackers >= 100, "{name}: too few attackers");
            // The solved profile must pass its own target validation.
            expected_rates(config).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn preset_realized_rate_within_five_percent() {
        // One preset here to keep unit tests quick; the acceptance suite
        // covers all three.
        let config = preset("low").unwrap();
        let trace = generate_trace(&config).unwrap();
        let summary = summarize(&trace, config.duration_us);
        let target = config.target_aggregate_pps.unwrap();
        let gap = summary.realized_pps.abs_diff(target);
        assert!(
            gap * 20 <= target,
            "realized {} vs target {target}",
            summary.realized_pps
        );
    }

    #[test]
    fn malicious_min_ipd_median_below_benign() {
        let config = preset("low").unwrap();
        let trace = generate_trace(&config).unwrap();
        use std::collections::hash_map::Entry;
        let mut per_flow: HashMap<FiveTuple, (TruthLabel, u64, Option<u64>)> = HashMap::new();
        for p in trace.iter().filter(|p| p.msg_kind == MsgKind::RrcConnectionRequest) {
            match per_flow.entry(p.tuple) {
                Entry::Vacant(v) => {
                    v.insert((p.truth_label, p.timestamp_us, None));
                }
                Entry::Occupied(mut o) => {
                    let (_, last, min_ipd) = o.get_mut();
                    let gap = p.timestamp_us - *last;
                    *min_ipd = Some(min_ipd.map_or(gap, |m| m.min(gap)));
                    *last = p.timestamp_us;
                }
            }
        }
        let mut benign: Vec<u64> = Vec::new();
        let mut malicious: Vec<u64> = Vec::new();
        for (_, (label, _, min_ipd)) in per_flow {
            if let Some(m) = min_ipd {
                match label {
                    TruthLabel::Malicious => malicious.push(m),
                    _ => benign.push(m),
                }
            }
        }
        benign.sort_unstable();
        malicious.sort_unstable();
        assert!(!benign.is_empty() && !malicious.is_empty());
        let med_b = benign[benign.len() / 2];
        let med_m = malicious[malicious.len() / 2];
        assert!(med_m < med_b, "malicious median {med_m} vs benign {med_b}");
    }
}
