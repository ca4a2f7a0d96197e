//! Versioned text file formats shared across subcommands.
//!
//! Every format starts with a `stormguard-<name> v<version>` header line
//! and is line-oriented ASCII. Writers are deterministic byte-for-byte;
//! anything wall-clock lives in its own file so reruns of the same inputs
//! diff clean.

pub mod config;
pub mod entries;
pub mod manifest;
pub mod model;
pub mod report;
pub mod trace;

use std::fs;
use std::path::Path;

use crate::flow::{FiveTuple, Ipv4};
use crate::{Error, Result};

pub(crate) fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Write a whole file via a temp sibling and rename, so consumers never
/// observe partial output.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}tmp",
        path.extension().map(|e| format!("{}.", e.to_string_lossy())).unwrap_or_default()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Check and strip the expected header line.
pub(crate) fn expect_header<'a>(path: &Path, text: &'a str, header: &str) -> Result<&'a str> {
    match text.split_once('\n') {
        Some((first, rest)) if first.trim_end() == header => Ok(rest),
        Some((first, _)) => Err(parse_err(
            path,
            1,
            format!("expected header '{header}', found '{}'", first.trim_end()),
        )),
        None => Err(parse_err(path, 1, format!("missing header '{header}'"))),
    }
}

pub(crate) fn parse_ipv4(s: &str) -> Option<u32> {
    let mut parts = s.split('.');
    let mut out = 0u32;
    for _ in 0..4 {
        let octet: u32 = parts.next()?.parse().ok()?;
        if octet > 255 {
            return None;
        }
        out = (out << 8) | octet;
    }
    if parts.next().is_some() {
        return None;
    }
    Some(out)
}

pub(crate) fn format_tuple_csv(t: &FiveTuple) -> String {
    format!(
        "{},{},{},{},{}",
        Ipv4(t.src_ip),
        Ipv4(t.dst_ip),
        t.src_port,
        t.dst_port,
        t.protocol
    )
}

/// Parse five comma-separated tuple fields out of an iterator of fields.
pub(crate) fn parse_tuple_fields<'a>(
    mut fields: impl Iterator<Item = &'a str>,
) -> Option<FiveTuple> {
    let src_ip = parse_ipv4(fields.next()?)?;
    let dst_ip = parse_ipv4(fields.next()?)?;
    let src_port = fields.next()?.parse().ok()?;
    let dst_port = fields.next()?.parse().ok()?;
    let protocol = fields.next()?.parse().ok()?;
    Some(FiveTuple::new(src_ip, dst_ip, src_port, dst_port, protocol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipv4_parse_and_format() {
        assert_eq!(parse_ipv4("10.60.0.1"), Some(0x0A3C_0001));
        assert_eq!(parse_ipv4("255.255.255.255"), Some(u32::MAX));
        assert_eq!(parse_ipv4("10.60.0"), None);
        assert_eq!(parse_ipv4("10.60.0.256"), None);
        assert_eq!(parse_ipv4("10.60.0.1.2"), None);
        assert_eq!(format!("{}", Ipv4(0x0A3C_0001)), "10.60.0.1");
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = std::env::temp_dir().join("sg-atomic-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.txt");
        atomic_write(&path, "hello\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "hello\n");
        let leftovers: Vec<_> = std::fs::read_dir(&dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
        std::fs::remove_dir_all(&dir).ok();
    }
}
