//! Flow identity, packet records, and the per-flow integer feature vector.
//!
//! Everything here obeys the switch discipline: fixed-width unsigned
//! integers, no floating point, and a canonical byte layout for anything
//! that gets hashed or written to a file.

use std::fmt;

/// Number of per-flow features the classifier consumes.
pub const FEATURE_COUNT: usize = 6;

/// Feature names, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "pkt_count",
    "total_len",
    "max_len",
    "min_len",
    "min_ipd_us",
    "max_ipd_us",
];

/// Unidirectional flow identity: the DU-to-CU 5-tuple.
///
/// Equality is field-wise; there is no direction folding. The canonical
/// serialization is exactly 13 bytes, each field big-endian, in field
/// order — flow IDs are CRCs over these bytes, so the layout is a
/// compatibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiveTuple {
    pub src_ip: u32,
    pub dst_ip: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

impl FiveTuple {
    pub const WIRE_LEN: usize = 13;

    pub fn new(src_ip: u32, dst_ip: u32, src_port: u16, dst_port: u16, protocol: u8) -> Self {
        FiveTuple {
            src_ip,
            dst_ip,
            src_port,
            dst_port,
            protocol,
        }
    }

    /// Canonical 13-byte serialization.
    pub fn to_bytes(&self) -> [u8; Self::WIRE_LEN] {
        let mut out = [0u8; Self::WIRE_LEN];
        out[0..4].copy_from_slice(&self.src_ip.to_be_bytes());
        out[4..8].copy_from_slice(&self.dst_ip.to_be_bytes());
        out[8..10].copy_from_slice(&self.src_port.to_be_bytes());
        out[10..12].copy_from_slice(&self.dst_port.to_be_bytes());
        out[12] = self.protocol;
        out
    }

    pub fn from_bytes(bytes: &[u8; Self::WIRE_LEN]) -> Self {
        FiveTuple {
            src_ip: u32::from_be_bytes(bytes[0..4].try_into().unwrap()),
            dst_ip: u32::from_be_bytes(bytes[4..8].try_into().unwrap()),
            src_port: u16::from_be_bytes(bytes[8..10].try_into().unwrap()),
            dst_port: u16::from_be_bytes(bytes[10..12].try_into().unwrap()),
            protocol: bytes[12],
        }
    }
}

impl fmt::Display for FiveTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}/{}",
            Ipv4(self.src_ip),
            self.src_port,
            Ipv4(self.dst_ip),
            self.dst_port,
            self.protocol
        )
    }
}

/// Dotted-quad rendering helper for host-order IPv4 addresses.
pub struct Ipv4(pub u32);

impl fmt::Display for Ipv4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(f, "{}.{}.{}.{}", b[0], b[1], b[2], b[3])
    }
}

/// What the parser saw in the packet: an RRC connection request or
/// anything else. Stands in for wire-format inspection in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MsgKind {
    RrcConnectionRequest,
    Other,
}

impl MsgKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MsgKind::RrcConnectionRequest => "rrc",
            MsgKind::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rrc" => Some(MsgKind::RrcConnectionRequest),
            "other" => Some(MsgKind::Other),
            _ => None,
        }
    }
}

/// Ground-truth label carried by generated traces. A flow property:
/// constant across all packets of one 5-tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruthLabel {
    Benign,
    Malicious,
    Unknown,
}

impl TruthLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::Benign => "benign",
            TruthLabel::Malicious => "malicious",
            TruthLabel::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "benign" => Some(TruthLabel::Benign),
            "malicious" => Some(TruthLabel::Malicious),
            "unknown" => Some(TruthLabel::Unknown),
            _ => None,
        }
    }

    pub fn as_class(self) -> Option<TrafficClass> {
        match self {
            TruthLabel::Benign => Some(TrafficClass::Benign),
            TruthLabel::Malicious => Some(TrafficClass::Malicious),
            TruthLabel::Unknown => None,
        }
    }
}

/// The two classes the detector decides between. Malicious is the
/// positive class everywhere metrics are involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    Benign,
    Malicious,
}

impl TrafficClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Benign => "benign",
            TrafficClass::Malicious => "malicious",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "benign" => Some(TrafficClass::Benign),
            "malicious" => Some(TrafficClass::Malicious),
            _ => None,
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One packet of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    /// Microseconds since trace epoch; non-decreasing within a trace.
    pub timestamp_us: u64,
    pub tuple: FiveTuple,
    pub length_bytes: u16,
    pub msg_kind: MsgKind,
    pub truth_label: TruthLabel,
}

/// The six per-flow statistics, updated per packet with integer and
/// bit-wise operations only.
///
/// Inter-packet delays are undefined until the second packet; until then
/// both IPD fields hold [`FlowFeatures::IPD_UNSET`] (all-ones), which never
/// participates in min/max comparisons. All-ones rather than zero so a
/// genuine 0 µs delay stays representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowFeatures {
    pub pkt_count: u32,
    pub total_len: u32,
    pub max_len: u16,
    pub min_len: u16,
    pub min_ipd_us: u32,
    pub max_ipd_us: u32,
}

impl Default for FlowFeatures {
    fn default() -> Self {
        FlowFeatures::zeroed()
    }
}

impl FlowFeatures {
    /// Sentinel for "no inter-packet delay observed yet".
    pub const IPD_UNSET: u32 = u32::MAX;

    /// State before any packet has been recorded.
    pub fn zeroed() -> Self {
        FlowFeatures {
            pkt_count: 0,
            total_len: 0,
            max_len: 0,
            min_len: 0,
            min_ipd_us: Self::IPD_UNSET,
            max_ipd_us: Self::IPD_UNSET,
        }
    }

    /// Fold one packet into the statistics.
    ///
    /// `ipd_us` is the delay since the previous packet of this flow, or
    /// `None` for the first packet. The caller owns last-timestamp
    /// bookkeeping (the register slot in the data plane, a scratch map in
    /// the offline extractor) so both paths share this exact rule.
    pub fn record_packet(&mut self, length_bytes: u16, ipd_us: Option<u32>) {
        if self.pkt_count == 0 {
            self.max_len = length_bytes;
            self.min_len = length_bytes;
        } else {
            self.max_len = self.max_len.max(length_bytes);
            self.min_len = self.min_len.min(length_bytes);
        }
        self.pkt_count = self.pkt_count.saturating_add(1);
        self.total_len = self.total_len.saturating_add(length_bytes as u32);
        if let Some(ipd) = ipd_us {
            // UNSET acts as +inf for min and -inf for max.
            self.min_ipd_us = if self.min_ipd_us == Self::IPD_UNSET {
                ipd
            } else {
                self.min_ipd_us.min(ipd)
            };
            self.max_ipd_us = if self.max_ipd_us == Self::IPD_UNSET {
                ipd
            } else {
                self.max_ipd_us.max(ipd)
            };
        }
    }

    /// Delay between consecutive packets, clamped to the 32-bit feature
    /// width.
    pub fn ipd_from_timestamps(prev_us: u64, now_us: u64) -> u32 {
        debug_assert!(now_us >= prev_us);
        (now_us - prev_us).min(u32::MAX as u64) as u32
    }

    /// The feature vector in canonical order, widened to the 32-bit
    /// lookup width used by the match-action tables.
    pub fn as_vector(&self) -> [u32; FEATURE_COUNT] {
        [
            self.pkt_count,
            self.total_len,
            self.max_len as u32,
            self.min_len as u32,
            self.min_ipd_us,
            self.max_ipd_us,
        ]
    }
}

// CRC-32 (IEEE 802.3, reflected, init 0xFFFFFFFF, final xor 0xFFFFFFFF),
// the stock hash primitive of programmable-switch pipelines.
const CRC32_POLY_REFLECTED: u32 = 0xEDB8_8320;

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut bit = 0;
        while bit < 8 {
            c = if c & 1 != 0 {
                CRC32_POLY_REFLECTED ^ (c >> 1)
            } else {
                c >> 1
            };
            bit += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

static CRC32_TABLE: [u32; 256] = crc32_table();

/// CRC-32 over arbitrary bytes.
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = u32::MAX;
    for &b in bytes {
        crc = CRC32_TABLE[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ u32::MAX
}

/// Full 32-bit flow identifier: CRC-32 of the canonical 13-byte tuple
/// serialization. Disambiguates slot occupancy from the masked index.
pub fn flow_id(tuple: &FiveTuple) -> u32 {
    crc32(&tuple.to_bytes())
}

/// Register index for a flow: the low `table_bits` bits of its flow ID.
///
/// `table_bits` must be in `1..=24`.
pub fn flow_hash(tuple: &FiveTuple, table_bits: u8) -> u32 {
    assert!(
        (1..=24).contains(&table_bits),
        "table_bits out of range: {table_bits}"
    );
    flow_id(tuple) & ((1u32 << table_bits) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bitwise CRC-32, no table: the independent reference the table
    /// implementation is checked against.
    fn crc32_bitwise_reference(bytes: &[u8]) -> u32 {
        let mut crc = u32::MAX;
        for &b in bytes {
            crc ^= b as u32;
            for _ in 0..8 {
                if crc & 1 != 0 {
                    crc = (crc >> 1) ^ CRC32_POLY_REFLECTED;
                } else {
                    crc >>= 1;
                }
            }
        }
        crc ^ u32::MAX
    }

    fn sample_tuple() -> FiveTuple {
        // 10.0.0.1 -> 10.0.0.2, SCTP port pair from an F1-C deployment.
        FiveTuple::new(0x0A00_0001, 0x0A00_0002, 38412, 38472, 132)
    }

    #[test]
    fn canonical_serialization_is_13_big_endian_bytes() {
        let bytes = sample_tuple().to_bytes();
        assert_eq!(
            bytes,
            [
                0x0A, 0x00, 0x00, 0x01, // src_ip
                0x0A, 0x00, 0x00, 0x02, // dst_ip
                0x96, 0x0C, // src_port 38412
                0x96, 0x48, // dst_port 38472
                0x84, // protocol 132
            ]
        );
        assert_eq!(FiveTuple::from_bytes(&bytes), sample_tuple());
    }

    #[test]
    fn crc32_matches_check_value() {
        // The classic check vector for this CRC parameterization.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn table_crc_matches_bitwise_reference() {
        let inputs: [&[u8]; 5] = [b"", b"a", b"123456789", &sample_tuple().to_bytes(), &[0xFF; 13]];
        for input in inputs {
            assert_eq!(crc32(input), crc32_bitwise_reference(input));
        }
    }

    #[test]
    fn flow_hash_is_reference_crc_masked() {
        let t = sample_tuple();
        let reference = crc32_bitwise_reference(&t.to_bytes());
        assert_eq!(flow_hash(&t, 16), reference & 0xFFFF);
        assert_eq!(flow_id(&t), reference);
    }

    #[test]
    fn flow_hash_determinism_and_mask_bound() {
        let t = sample_tuple();
        assert_eq!(flow_hash(&t, 16), flow_hash(&t, 16));
        for port in 0..64u16 {
            let t = FiveTuple { src_port: port, ..sample_tuple() };
            assert!(flow_hash(&t, 1) < 2);
        }
    }

    #[test]
    fn flow_hash_equals_flow_id_mod_table_size() {
        for bits in 1..=24u8 {
            for port in [0u16, 1, 7, 38412, 65535] {
                let t = FiveTuple { src_port: port, ..sample_tuple() };
                assert_eq!(flow_hash(&t, bits), flow_id(&t) & ((1 << bits) - 1));
            }
        }
    }

    #[test]
    fn port_change_changes_flow_id() {
        let a = sample_tuple();
        let b = FiveTuple { src_port: a.src_port + 1, ..a };
        assert_ne!(flow_id(&a), flow_id(&b));
    }

    #[test]
    fn feature_update_initialization() {
        let mut f = FlowFeatures::zeroed();
        f.record_packet(80, None);
        assert_eq!(
            f,
            FlowFeatures {
                pkt_count: 1,
                total_len: 80,
                max_len: 80,
                min_len: 80,
                min_ipd_us: FlowFeatures::IPD_UNSET,
                max_ipd_us: FlowFeatures::IPD_UNSET,
            }
        );
    }

    #[test]
    fn feature_update_second_packet() {
        let mut f = FlowFeatures::zeroed();
        f.record_packet(80, None);
        f.record_packet(120, Some(100));
        assert_eq!(
            f,
            FlowFeatures {
                pkt_count: 2,
                total_len: 200,
                max_len: 120,
                min_len: 80,
                min_ipd_us: 100,
                max_ipd_us: 100,
            }
        );
    }

    #[test]
    fn zero_gap_is_distinct_from_unset() {
        let mut f = FlowFeatures::zeroed();
        f.record_packet(60, None);
        f.record_packet(60, Some(0));
        assert_eq!(f.min_ipd_us, 0);
        assert_eq!(f.max_ipd_us, 0);
    }

    #[test]
    fn total_len_saturates() {
        let mut f = FlowFeatures::zeroed();
        f.pkt_count = 1;
        f.total_len = u32::MAX - 10;
        f.record_packet(100, Some(5));
        assert_eq!(f.total_len, u32::MAX);
    }

    #[test]
    fn ipd_clamps_to_32_bits() {
        assert_eq!(FlowFeatures::ipd_from_timestamps(0, 1 << 40), u32::MAX);
        assert_eq!(FlowFeatures::ipd_from_timestamps(10, 110), 100);
    }
}
