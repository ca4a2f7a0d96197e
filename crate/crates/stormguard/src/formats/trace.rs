//! Trace files: one packet per line.
//!
//! ```text
//! stormguard-trace v1
//! <timestamp_us>,<src_ip>,<dst_ip>,<src_port>,<dst_port>,<protocol>,<length>,<kind>,<label>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::flow::{Ipv4, MsgKind, PacketRecord, TruthLabel};
use crate::formats::{atomic_write, expect_header, parse_err, parse_tuple_fields};
use crate::Result;

pub const HEADER: &str = "stormguard-trace v1";

pub fn render(trace: &[PacketRecord]) -> String {
    let mut out = String::with_capacity(trace.len() * 48 + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for p in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.timestamp_us,
            Ipv4(p.tuple.src_ip),
            Ipv4(p.tuple.dst_ip),
            p.tuple.src_port,
            p.tuple.dst_port,
            p.tuple.protocol,
            p.length_bytes,
            p.msg_kind.as_str(),
            p.truth_label.as_str(),
        );
    }
    out
}

pub fn write_trace(path: &Path, trace: &[PacketRecord]) -> Result<()> {
    atomic_write(path, &render(trace))
}

pub fn parse(path: &Path, text: &str) -> Result<Vec<PacketRecord>> {
    let body = expect_header(path, text, HEADER)?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let bad = |msg: &str| parse_err(path, line_no, msg);
        let timestamp_us = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("bad timestamp"))?;
        let tuple =
            parse_tuple_fields(&mut fields).ok_or_else(|| bad("bad 5-tuple fields"))?;
        let length_bytes = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("bad length"))?;
        let msg_kind = fields
            .next()
            .and_then(MsgKind::parse)
            .ok_or_else(|| bad("bad message kind"))?;
        let truth_label = fields
            .next()
            .and_then(TruthLabel::parse)
            .ok_or_else(|| bad("bad truth label"))?;
        if fields.next().is_some() {
            return Err(bad("trailing fields"));
        }
        out.push(PacketRecord {
            timestamp_us,
            tuple,
            length_bytes,
            msg_kind,
            truth_label,
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<PacketRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse(path, &text)
}
