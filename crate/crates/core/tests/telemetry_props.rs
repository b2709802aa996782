use optolink_core::analog::Edge;
use optolink_core::telemetry::{
    ask_modulate, crc8, decode_edges, frame_decode_bits, frame_encode_bits, manchester_encode, pack_bits, scan_frames,
    unpack_bits, AskParams, BitStream, CdrConfig, Frame,
};
use proptest::prelude::*;

/// Bitwise CRC-8, polynomial x^8 + x^2 + x + 1, zero init, no reflection.
fn crc8_bitwise(bytes: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &b in bytes {
        crc ^= b;
        for _ in 0..8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
        }
    }
    crc
}

fn frame_strategy() -> impl Strategy<Value = Frame> {
    (any::<u8>(), prop::collection::vec(any::<u8>(), 0..=32)).prop_map(|(op, p)| Frame::new(op, p).unwrap())
}

/// Level transitions of a Manchester chip stream at `bit_ns` per bit.
fn chip_edges(chips: &[bool], bit_ns: f64) -> Vec<Edge> {
    chips
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(k, w)| Edge {
            time_ns: (k + 1) as f64 * bit_ns / 2.0,
            rising: w[1],
        })
        .collect()
}

proptest! {
    #[test]
    fn crc_matches_bitwise_reference(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        prop_assert_eq!(crc8(&bytes), crc8_bitwise(&bytes));
    }

    #[test]
    fn frame_round_trip(f in frame_strategy()) {
        let bits = frame_encode_bits(&f);
        prop_assert_eq!(bits.len(), f.bit_len());
        prop_assert_eq!(frame_decode_bits(&bits).unwrap(), f.clone());
        let text = BitStream::new(bits, 600.0).unwrap().to_hex_text();
        let back = BitStream::from_hex_text(&text).unwrap();
        prop_assert_eq!(frame_decode_bits(&back.bits).unwrap(), f);
    }

    #[test]
    fn pack_unpack_round_trip(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        prop_assert_eq!(pack_bits(&unpack_bits(&bytes)), bytes);
    }

    #[test]
    fn manchester_is_dc_balanced(bits in prop::collection::vec(any::<bool>(), 1..512)) {
        let chips = manchester_encode(&bits).unwrap();
        prop_assert_eq!(chips.len(), 2 * bits.len());
        let mut disparity = 0i32;
        for c in &chips {
            disparity += if *c { 1 } else { -1 };
            prop_assert!(disparity.abs() <= 1);
        }
        prop_assert_eq!(disparity, 0);
    }

    #[test]
    fn manchester_edges_decode_to_source(bits in prop::collection::vec(any::<bool>(), 16..400)) {
        // the CDR locks on an alternating lead-in, as on a frame preamble
        let mut tx: Vec<bool> = (0..16).map(|k| k % 2 == 0).collect();
        tx.extend(&bits);
        let chips = manchester_encode(&tx).unwrap();
        let t = 1e6 / 600.0;
        let d = decode_edges(&chip_edges(&chips, t), 600.0, &CdrConfig::default()).unwrap();
        let n = d.bits.len();
        prop_assert!(n >= bits.len());
        prop_assert_eq!(&d.bits[n - bits.len()..], &bits[..]);
    }

    #[test]
    fn ask_mean_matches_level_average(bits in prop::collection::vec(any::<bool>(), 100..300), hi in 20.0f64..40.0, lo in 0.0f64..20.0) {
        let params = AskParams { p_high_mw: hi, p_low_mw: lo, ..AskParams::default() };
        let chips = manchester_encode(&bits).unwrap();
        let w = ask_modulate(&chips, 600.0, &params).unwrap();
        let want = (hi + lo) / 2.0;
        prop_assert!((w.mean() - want).abs() < 0.005 * want);
    }

    #[test]
    fn clock_recovery_locks_within_preamble(offset in -0.2f64..0.2, f in frame_strategy()) {
        let tx = frame_encode_bits(&f);
        let chips = manchester_encode(&tx).unwrap();
        let t = 1e6 / (600.0 * (1.0 + offset));
        let d = decode_edges(&chip_edges(&chips, t), 600.0, &CdrConfig::default()).unwrap();
        prop_assert!(d.lock_times_ns[0] <= 16.0 * t);
        let found: Vec<_> = scan_frames(&d.bits).into_iter().filter_map(|s| s.result.ok()).collect();
        prop_assert_eq!(found, vec![f]);
    }
}
