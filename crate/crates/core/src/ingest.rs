//! Capture parsing: classic pcap containers, UDP/DNS dissection, and QNAME
//! wire-format decoding into normalized [`QueryRecord`]s.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::{Ipv4Addr, Ipv6Addr};

/// Default port for the capture filter.
pub const DNS_PORT: u16 = 53;

const MAX_LABEL_LEN: usize = 63;
/// RFC 1035: a name occupies at most 255 octets on the wire.
const MAX_NAME_WIRE_LEN: usize = 255;
const MAX_POINTER_HOPS: usize = 127;
const DNS_HEADER_LEN: usize = 12;
/// Sanity cap on a single pcap record; larger lengths mean a corrupt file.
const MAX_SNAP_LEN: usize = 256 * 1024;

// ── Records ─────────────────────────────────────────────────────────

/// One observed DNS query.
///
/// `qname` is normalized: lowercase ASCII, no trailing dot, labels joined by
/// '.'; bytes outside printable ASCII (and literal dots inside a label) are
/// percent-escaped so the character length is always well defined.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueryRecord {
    /// Microseconds since the Unix epoch.
    pub timestamp_us: i64,
    pub qname: String,
    /// Character count of the normalized qname, dots included.
    pub qname_len: u32,
    /// DNS query-type code (A = 1, TXT = 16, ...).
    pub qtype: u16,
    /// Source address, when the input format carries one.
    pub src: Option<String>,
}

impl QueryRecord {
    /// Builds a record, normalizing `raw_name`.
    pub fn new(timestamp_us: i64, raw_name: &str, qtype: u16, src: Option<String>) -> Self {
        let qname = normalize_qname(raw_name);
        let qname_len = qname.len() as u32; // ASCII after normalization
        QueryRecord { timestamp_us, qname, qname_len, qtype, src }
    }
}

/// Counters accumulated while parsing a capture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IngestStats {
    pub packets_seen: u64,
    pub dns_messages: u64,
    pub queries_emitted: u64,
    pub malformed_skipped: u64,
}

// ── Name normalization ──────────────────────────────────────────────

fn push_escaped(out: &mut String, label: &[u8]) {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    for &b in label {
        let b = b.to_ascii_lowercase();
        if (0x21..=0x7e).contains(&b) && b != b'.' {
            out.push(b as char);
        } else {
            out.push('%');
            out.push(HEX[(b >> 4) as usize] as char);
            out.push(HEX[(b & 0xf) as usize] as char);
        }
    }
}

/// Normalizes a dotted name: lowercase, trailing root dot removed, non-printable
/// bytes percent-escaped. Idempotent ('%' itself passes through verbatim).
pub fn normalize_qname(raw: &str) -> String {
    let trimmed = raw.strip_suffix('.').unwrap_or(raw);
    let mut out = String::with_capacity(trimmed.len());
    for (i, label) in trimmed.split('.').enumerate() {
        if i > 0 {
            out.push('.');
        }
        push_escaped(&mut out, label.as_bytes());
    }
    out
}

// ── QNAME wire format ───────────────────────────────────────────────

/// Why a wire-format name could not be decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedName {
    OutOfBounds,
    LabelTooLong,
    NameTooLong,
    PointerLoop,
}

impl fmt::Display for MalformedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MalformedName::OutOfBounds => write!(f, "label runs past the end of the message"),
            MalformedName::LabelTooLong => write!(f, "label longer than 63 bytes"),
            MalformedName::NameTooLong => write!(f, "name longer than 255 wire bytes"),
            MalformedName::PointerLoop => write!(f, "compression pointer loop"),
        }
    }
}

impl core::error::Error for MalformedName {}

/// Decodes an RFC 1035 name starting at `offset`, following compression
/// pointers (at most 127 hops). Returns the normalized name and the offset
/// just past the name at its original location.
pub fn decode_qname(message: &[u8], offset: usize) -> Result<(String, usize), MalformedName> {
    let mut name = String::new();
    let mut pos = offset;
    let mut next_offset = None;
    let mut hops = 0usize;
    let mut wire_len = 0usize; // length octets + label bytes
    let mut first = true;

    loop {
        let len_byte = *message.get(pos).ok_or(MalformedName::OutOfBounds)?;
        if len_byte == 0 {
            if next_offset.is_none() {
                next_offset = Some(pos + 1);
            }
            break;
        }
        if len_byte & 0xc0 == 0xc0 {
            let lo = *message.get(pos + 1).ok_or(MalformedName::OutOfBounds)?;
            if next_offset.is_none() {
                next_offset = Some(pos + 2);
            }
            hops += 1;
            if hops > MAX_POINTER_HOPS {
                return Err(MalformedName::PointerLoop);
            }
            pos = (((len_byte & 0x3f) as usize) << 8) | lo as usize;
            if pos >= message.len() {
                return Err(MalformedName::OutOfBounds);
            }
            continue;
        }
        if len_byte & 0xc0 != 0 {
            // 0x40/0x80 label types were never standardized: syntactically a
            // length over 63
            return Err(MalformedName::LabelTooLong);
        }
        let len = len_byte as usize;
        wire_len += 1 + len;
        if wire_len + 1 > MAX_NAME_WIRE_LEN {
            return Err(MalformedName::NameTooLong);
        }
        let label = message
            .get(pos + 1..pos + 1 + len)
            .ok_or(MalformedName::OutOfBounds)?;
        if !first {
            name.push('.');
        }
        push_escaped(&mut name, label);
        first = false;
        pos += 1 + len;
    }

    Ok((name, next_offset.unwrap_or(pos + 1)))
}

/// Encodes a normalized dotted name as wire-format labels (the inverse of
/// [`decode_qname`] for names without escapes). Labels longer than 63 bytes
/// are truncated; intended for fixtures and tests.
pub fn encode_qname(name: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(name.len() + 2);
    if !name.is_empty() {
        for label in name.split('.') {
            let bytes = label.as_bytes();
            let take = bytes.len().min(MAX_LABEL_LEN);
            out.push(take as u8);
            out.extend_from_slice(&bytes[..take]);
        }
    }
    out.push(0);
    out
}

// ── DNS message scan ────────────────────────────────────────────────

enum MessageKind {
    Response,
    /// Question entries decoded so far, plus whether decoding broke early.
    Query(Vec<(String, u16)>, bool),
}

fn scan_message(msg: &[u8]) -> Option<MessageKind> {
    if msg.len() < DNS_HEADER_LEN {
        return None;
    }
    let flags = u16::from_be_bytes([msg[2], msg[3]]);
    if flags & 0x8000 != 0 {
        return Some(MessageKind::Response);
    }
    let qdcount = u16::from_be_bytes([msg[4], msg[5]]);
    let mut questions = Vec::with_capacity(qdcount.min(4) as usize);
    let mut pos = DNS_HEADER_LEN;
    let mut broke = false;
    for _ in 0..qdcount {
        match decode_qname(msg, pos) {
            Ok((name, next)) => {
                if next + 4 > msg.len() {
                    broke = true;
                    break;
                }
                let qtype = u16::from_be_bytes([msg[next], msg[next + 1]]);
                questions.push((name, qtype));
                pos = next + 4;
            }
            Err(_) => {
                broke = true;
                break;
            }
        }
    }
    Some(MessageKind::Query(questions, broke))
}

// ── pcap container ──────────────────────────────────────────────────

/// The capture does not start with a recognized pcap global header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureError {
    BadMagic(u32),
    TruncatedHeader,
}

impl fmt::Display for CaptureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaptureError::BadMagic(m) => write!(f, "unrecognized capture magic 0x{m:08X}"),
            CaptureError::TruncatedHeader => write!(f, "capture shorter than a pcap global header"),
        }
    }
}

impl core::error::Error for CaptureError {}

const LINKTYPE_ETHERNET: u32 = 1;
const LINKTYPE_LINUX_SLL: u32 = 113;
const LINKTYPE_LINUX_SLL2: u32 = 276;

/// Streaming parser over an in-memory classic pcap capture.
///
/// Yields one [`QueryRecord`] per DNS question in each UDP datagram on the
/// filtered port (query messages only; responses are counted and skipped).
/// Malformed packets increment [`IngestStats::malformed_skipped`] and never
/// abort the stream.
pub struct CaptureParser<'a> {
    data: &'a [u8],
    pos: usize,
    swapped: bool,
    nanos: bool,
    linktype: u32,
    port_filter: u16,
    stats: IngestStats,
    pending: VecDeque<QueryRecord>,
}

impl<'a> CaptureParser<'a> {
    /// Validates the global header; filter defaults to port 53.
    pub fn new(data: &'a [u8]) -> Result<Self, CaptureError> {
        Self::with_port_filter(data, DNS_PORT)
    }

    pub fn with_port_filter(data: &'a [u8], port_filter: u16) -> Result<Self, CaptureError> {
        if data.len() < 24 {
            return Err(CaptureError::TruncatedHeader);
        }
        let magic = u32::from_le_bytes([data[0], data[1], data[2], data[3]]);
        let (swapped, nanos) = match magic {
            0xa1b2c3d4 => (false, false),
            0xd4c3b2a1 => (true, false),
            0xa1b23c4d => (false, true),
            0x4d3cb2a1 => (true, true),
            other => return Err(CaptureError::BadMagic(other)),
        };
        let linktype = read_u32(&data[20..24], swapped);
        Ok(CaptureParser {
            data,
            pos: 24,
            swapped,
            nanos,
            linktype,
            port_filter,
            stats: IngestStats::default(),
            pending: VecDeque::new(),
        })
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Drains the stream into a vector.
    pub fn collect_records(mut self) -> (Vec<QueryRecord>, IngestStats) {
        let mut out = Vec::new();
        for rec in &mut self {
            out.push(rec);
        }
        (out, self.stats)
    }

    fn next_packet(&mut self) -> Option<(i64, &'a [u8])> {
        if self.pos + 16 > self.data.len() {
            self.pos = self.data.len();
            return None;
        }
        let h = &self.data[self.pos..self.pos + 16];
        let ts_sec = read_u32(&h[0..4], self.swapped) as i64;
        let ts_frac = read_u32(&h[4..8], self.swapped) as i64;
        let incl_len = read_u32(&h[8..12], self.swapped) as usize;
        if incl_len > MAX_SNAP_LEN || self.pos + 16 + incl_len > self.data.len() {
            // corrupt length or truncated tail: stop the stream
            self.pos = self.data.len();
            return None;
        }
        let frame = &self.data[self.pos + 16..self.pos + 16 + incl_len];
        self.pos += 16 + incl_len;
        let micros = if self.nanos { ts_frac / 1000 } else { ts_frac };
        Some((ts_sec * 1_000_000 + micros, frame))
    }

    fn handle_packet(&mut self, ts_us: i64, frame: &[u8]) {
        let Some((ip, _)) = strip_link_layer(self.linktype, frame) else {
            return;
        };
        let Some(udp) = strip_ip_header(ip) else {
            return;
        };
        if udp.data.len() < 8 {
            return;
        }
        let sport = u16::from_be_bytes([udp.data[0], udp.data[1]]);
        let dport = u16::from_be_bytes([udp.data[2], udp.data[3]]);
        if sport != self.port_filter && dport != self.port_filter {
            return;
        }
        let payload = &udp.data[8..];
        match scan_message(payload) {
            None => {
                self.stats.malformed_skipped += 1;
            }
            Some(MessageKind::Response) => {
                self.stats.dns_messages += 1;
            }
            Some(MessageKind::Query(questions, broke)) => {
                self.stats.dns_messages += 1;
                if broke {
                    self.stats.malformed_skipped += 1;
                }
                for (name, qtype) in questions {
                    self.stats.queries_emitted += 1;
                    self.pending.push_back(QueryRecord::new(
                        ts_us,
                        &name,
                        qtype,
                        Some(udp.src.clone()),
                    ));
                }
            }
        }
    }
}

impl Iterator for CaptureParser<'_> {
    type Item = QueryRecord;

    fn next(&mut self) -> Option<QueryRecord> {
        loop {
            if let Some(rec) = self.pending.pop_front() {
                return Some(rec);
            }
            let (ts, frame) = self.next_packet()?;
            self.stats.packets_seen += 1;
            self.handle_packet(ts, frame);
        }
    }
}

fn read_u32(b: &[u8], swapped: bool) -> u32 {
    let arr = [b[0], b[1], b[2], b[3]];
    if swapped {
        u32::from_be_bytes(arr)
    } else {
        u32::from_le_bytes(arr)
    }
}

/// Returns the network-layer slice and the ethertype-equivalent protocol.
fn strip_link_layer(linktype: u32, frame: &[u8]) -> Option<(&[u8], u16)> {
    match linktype {
        LINKTYPE_ETHERNET => {
            let mut off = 12;
            let mut ethertype = u16::from_be_bytes([*frame.get(off)?, *frame.get(off + 1)?]);
            // up to two VLAN tags
            for _ in 0..2 {
                if ethertype == 0x8100 || ethertype == 0x88a8 {
                    off += 4;
                    ethertype = u16::from_be_bytes([*frame.get(off)?, *frame.get(off + 1)?]);
                } else {
                    break;
                }
            }
            Some((frame.get(off + 2..)?, ethertype))
        }
        LINKTYPE_LINUX_SLL => {
            let ethertype = u16::from_be_bytes([*frame.get(14)?, *frame.get(15)?]);
            Some((frame.get(16..)?, ethertype))
        }
        LINKTYPE_LINUX_SLL2 => {
            let ethertype = u16::from_be_bytes([*frame.get(0)?, *frame.get(1)?]);
            Some((frame.get(20..)?, ethertype))
        }
        _ => None,
    }
    .filter(|(_, et)| *et == 0x0800 || *et == 0x86dd)
}

struct UdpDatagram<'a> {
    data: &'a [u8],
    src: String,
}

fn strip_ip_header(packet: &[u8]) -> Option<UdpDatagram<'_>> {
    let first = *packet.first()?;
    match first >> 4 {
        4 => {
            let ihl = ((first & 0xf) as usize) * 4;
            if ihl < 20 || packet.len() < ihl {
                return None;
            }
            if packet[9] != 17 {
                return None; // not UDP (DNS over TCP is out of scope)
            }
            let frag = u16::from_be_bytes([packet[6], packet[7]]);
            if frag & 0x1fff != 0 {
                return None; // non-first fragment
            }
            let src = Ipv4Addr::new(packet[12], packet[13], packet[14], packet[15]);
            Some(UdpDatagram { data: &packet[ihl..], src: alloc::format!("{src}") })
        }
        6 => {
            if packet.len() < 40 || packet[6] != 17 {
                return None; // extension-header chains are skipped
            }
            let mut oct = [0u8; 16];
            oct.copy_from_slice(&packet[8..24]);
            let src = Ipv6Addr::from(oct);
            Some(UdpDatagram { data: &packet[40..], src: alloc::format!("{src}") })
        }
        _ => None,
    }
}

// ── Fixture builders ────────────────────────────────────────────────

/// Minimal capture encoder for fixtures and tests: the inverse of the parse
/// path (classic pcap, Ethernet/IPv4/UDP).
pub mod build {
    use super::*;

    pub struct CaptureBuilder {
        bytes: Vec<u8>,
        nanos: bool,
    }

    impl CaptureBuilder {
        /// Little-endian, microsecond, Ethernet capture.
        pub fn new() -> Self {
            Self::with_options(false, LINKTYPE_ETHERNET)
        }

        pub fn with_options(nanos: bool, linktype: u32) -> Self {
            let mut bytes = Vec::new();
            let magic: u32 = if nanos { 0xa1b23c4d } else { 0xa1b2c3d4 };
            bytes.extend_from_slice(&magic.to_le_bytes());
            bytes.extend_from_slice(&2u16.to_le_bytes()); // major
            bytes.extend_from_slice(&4u16.to_le_bytes()); // minor
            bytes.extend_from_slice(&0u32.to_le_bytes()); // thiszone
            bytes.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
            bytes.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
            bytes.extend_from_slice(&linktype.to_le_bytes());
            CaptureBuilder { bytes, nanos }
        }

        pub fn push_frame(&mut self, ts_us: i64, frame: &[u8]) -> &mut Self {
            let sec = (ts_us / 1_000_000) as u32;
            let frac = if self.nanos {
                ((ts_us % 1_000_000) * 1000) as u32
            } else {
                (ts_us % 1_000_000) as u32
            };
            self.bytes.extend_from_slice(&sec.to_le_bytes());
            self.bytes.extend_from_slice(&frac.to_le_bytes());
            self.bytes.extend_from_slice(&(frame.len() as u32).to_le_bytes());
            self.bytes.extend_from_slice(&(frame.len() as u32).to_le_bytes());
            self.bytes.extend_from_slice(frame);
            self
        }

        /// Ethernet/IPv4/UDP frame around `payload`.
        pub fn push_udp(
            &mut self,
            ts_us: i64,
            src: [u8; 4],
            dst: [u8; 4],
            sport: u16,
            dport: u16,
            payload: &[u8],
        ) -> &mut Self {
            let mut frame = Vec::with_capacity(42 + payload.len());
            frame.extend_from_slice(&[0u8; 12]); // MACs
            frame.extend_from_slice(&0x0800u16.to_be_bytes());
            let total = 20 + 8 + payload.len();
            frame.push(0x45);
            frame.push(0);
            frame.extend_from_slice(&(total as u16).to_be_bytes());
            frame.extend_from_slice(&[0, 0, 0, 0]); // id + frag
            frame.push(64); // ttl
            frame.push(17); // udp
            frame.extend_from_slice(&[0, 0]); // checksum (unchecked)
            frame.extend_from_slice(&src);
            frame.extend_from_slice(&dst);
            frame.extend_from_slice(&sport.to_be_bytes());
            frame.extend_from_slice(&dport.to_be_bytes());
            frame.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
            frame.extend_from_slice(&[0, 0]); // checksum
            frame.extend_from_slice(payload);
            self.push_frame(ts_us, &frame)
        }

        /// DNS query message with a single question.
        pub fn push_dns_query(
            &mut self,
            ts_us: i64,
            src: [u8; 4],
            name: &str,
            qtype: u16,
        ) -> &mut Self {
            let payload = dns_query_message(0x1234, name, qtype);
            self.push_udp(ts_us, src, [10, 0, 0, 53], 40000, DNS_PORT, &payload)
        }

        pub fn finish(&self) -> Vec<u8> {
            self.bytes.clone()
        }
    }

    impl Default for CaptureBuilder {
        fn default() -> Self {
            Self::new()
        }
    }

    /// DNS message bytes for a single-question query.
    pub fn dns_query_message(id: u16, name: &str, qtype: u16) -> Vec<u8> {
        let mut msg = Vec::new();
        msg.extend_from_slice(&id.to_be_bytes());
        msg.extend_from_slice(&0x0100u16.to_be_bytes()); // RD, QR=0
        msg.extend_from_slice(&1u16.to_be_bytes()); // qdcount
        msg.extend_from_slice(&[0; 6]); // an/ns/ar
        msg.extend_from_slice(&encode_qname(name));
        msg.extend_from_slice(&qtype.to_be_bytes());
        msg.extend_from_slice(&1u16.to_be_bytes()); // IN
        msg
    }

    /// DNS response bytes (QR=1) for a single question, no answers.
    pub fn dns_response_message(id: u16, name: &str, qtype: u16) -> Vec<u8> {
        let mut msg = dns_query_message(id, name, qtype);
        msg[2] = 0x81; // QR=1
        msg
    }
}

// ── Tests ───────────────────────────────────────────────────────────
