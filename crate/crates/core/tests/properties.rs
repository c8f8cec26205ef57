//! Property tests over the wire codecs, normalization, and the sample-space
//! bookkeeping.

use burrscan_core::ingest::build::CaptureBuilder;
use burrscan_core::*;
use proptest::prelude::*;

fn label_strategy() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-z0-9]([a-z0-9-]{0,20})").unwrap()
}

fn name_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(label_strategy(), 1..5).prop_map(|labels| labels.join("."))
}

proptest! {
    #[test]
    fn encode_decode_roundtrip(name in name_strategy()) {
        let wire = encode_qname(&name);
        let (decoded, next) = decode_qname(&wire, 0).unwrap();
        prop_assert_eq!(decoded, name);
        prop_assert_eq!(next, wire.len());
    }

    #[test]
    fn normalization_is_idempotent(raw in "\\PC{0,40}") {
        let once = normalize_qname(&raw);
        let twice = normalize_qname(&once);
        prop_assert_eq!(&once, &twice);
        // every record built from it satisfies the length invariant
        let rec = QueryRecord::new(0, &raw, 1, None);
        prop_assert_eq!(rec.qname_len as usize, rec.qname.chars().count());
        prop_assert!(!rec.qname.ends_with('.') || rec.qname.is_empty() || raw.ends_with(".."));
    }

    #[test]
    fn decoder_never_panics_on_garbage(bytes in proptest::collection::vec(any::<u8>(), 0..300),
                                       offset in 0usize..300) {
        let _ = decode_qname(&bytes, offset);
    }

    #[test]
    fn capture_parser_never_panics(tail in proptest::collection::vec(any::<u8>(), 0..600)) {
        let mut data = CaptureBuilder::new().finish();
        data.extend_from_slice(&tail);
        if let Ok(parser) = CaptureParser::with_port_filter(&data, 53) {
            let (records, stats) = parser.collect_records();
            prop_assert!(stats.queries_emitted >= records.len() as u64);
            prop_assert!(stats.dns_messages <= stats.packets_seen);
            for r in &records {
                prop_assert_eq!(r.qname_len as usize, r.qname.len());
                prop_assert_eq!(&QueryRecord::new(0, &r.qname, r.qtype, None).qname, &r.qname);
            }
        }
    }

    #[test]
    fn space_capacities(names in proptest::collection::vec(name_strategy(), 1..60)) {
        let records: Vec<QueryRecord> =
            names.iter().map(|n| QueryRecord::new(0, n, 1, None)).collect();
        let dnss = build_space(records.iter(), SpaceKind::Dnss);
        let adnss = build_space(records.iter(), SpaceKind::Adnss);
        prop_assert!(adnss.capacity() >= dnss.capacity());
        let all_distinct = dnss.distinct() == records.len() as u64;
        prop_assert_eq!(adnss.capacity() == dnss.capacity(), all_distinct);
        prop_assert_eq!(length_histogram(&dnss).n() <= dnss.capacity(), true);
        prop_assert_eq!(length_histogram(&adnss).n() <= adnss.capacity(), true);
    }

    #[test]
    fn cdf_times_n_integral(counts in proptest::collection::btree_map(1u32..80, 1u64..50, 1..20)) {
        let hist = LengthHistogram::from_counts(counts);
        let cdf = empirical_cdf(&hist).unwrap();
        let (lo, hi) = hist.hull().unwrap();
        for x in lo.saturating_sub(2)..=hi + 2 {
            let v = cdf.eval(x) * hist.n() as f64;
            prop_assert!((v - v.round()).abs() < 1e-9);
        }
        prop_assert_eq!(cdf.eval(hi), 1.0);
    }

    #[test]
    fn burrs_depend_only_on_the_histogram(counts in proptest::collection::btree_map(4u32..40, 1u64..2000, 6..20)) {
        // two spaces with different names but the same length multiset
        // produce identical bands and burr sets
        let hist = LengthHistogram::from_counts(counts);
        if let Ok(fit) = fit_gaussian(&hist) {
            if let Ok(band) = delineation_band(&hist, &fit, 0.05) {
                let a = detect_burrs(&hist, &band, BurrMode::UpperOnly);
                let b = detect_burrs(&hist.clone(), &band, BurrMode::UpperOnly);
                prop_assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn stats_reconcile_on_single_question_traffic() {
    // query-only captures with qdcount = 1: every DNS message either emits
    // one record or counts as malformed
    let mut b = CaptureBuilder::new();
    for i in 0..40i64 {
        b.push_dns_query(i * 1_000, [10, 0, 0, 1], "host.example.com", 1);
    }
    let msg = burrscan_core::ingest::build::dns_query_message(9, "broken.example.org", 1);
    b.push_udp(99_000, [10, 0, 0, 2], [10, 0, 0, 53], 4000, 53, &msg[..msg.len() - 5]);
    let data = b.finish();
    let (records, stats) = CaptureParser::new(&data).unwrap().collect_records();
    assert_eq!(stats.packets_seen, 41);
    assert_eq!(stats.queries_emitted + stats.malformed_skipped, stats.dns_messages);
    assert_eq!(records.len() as u64, stats.queries_emitted);
    assert!(stats.queries_emitted <= stats.dns_messages);
}
