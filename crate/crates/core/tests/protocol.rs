use handshake_core::profile::{HandshakeProfile, RepeatingProfile};
use handshake_core::protocol::harness::{run_pair, LinkImpairment, PairConfig};
use handshake_core::protocol::*;
use handshake_core::recording::{replay, NoPacing, NullSink, RecordingHeader, SessionRecording};
use proptest::prelude::*;
use rand::SeedableRng;

fn arb_sample() -> impl Strategy<Value = SensorSample> {
    (any::<u32>(), any::<u64>(), any::<i16>(), any::<i16>(), 0u16..=1000, any::<[i32; 3]>(), 0u8..=2).prop_map(
        |(seq, t_send_us, thumb_cdeg, middle_cdeg, grip_milli, wrist_mm, phase)| SensorSample {
            seq,
            t_send_us,
            thumb_cdeg,
            middle_cdeg,
            grip_milli,
            wrist_mm,
            phase,
        },
    )
}

fn arb_message() -> impl Strategy<Value = WireMessage> {
    prop_oneof![
        arb_sample().prop_map(WireMessage::Sensor),
        (any::<u32>(), any::<u64>()).prop_map(|(nonce, t1)| WireMessage::ClockPing { nonce, t1 }),
        (any::<u32>(), any::<u64>(), any::<u64>(), any::<u64>())
            .prop_map(|(nonce, t1, t2, t3)| WireMessage::ClockPong { nonce, t1, t2, t3 }),
        (any::<u32>(), any::<u16>()).prop_map(|(peer_id, tick_hz)| WireMessage::Hello { peer_id, tick_hz }),
        Just(WireMessage::Bye),
    ]
}

proptest! {
    #[test]
    fn wire_round_trip(msg in arb_message()) {
        let bytes = encode_message(&msg);
        prop_assert!(bytes.len() <= MAX_DATAGRAM);
        prop_assert_eq!(decode_message(&bytes).unwrap(), msg);
    }

    #[test]
    fn decoding_garbage_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..600)) {
        let _ = decode_message(&bytes);
    }

    #[test]
    fn decoding_mutated_frames_never_panics(msg in arb_message(), pos in any::<prop::sample::Index>(), b in any::<u8>(), cut in any::<prop::sample::Index>()) {
        let mut bytes = encode_message(&msg);
        let i = pos.index(bytes.len());
        bytes[i] = b;
        let _ = decode_message(&bytes);
        let k = cut.index(bytes.len() + 1);
        if let Ok(m) = decode_message(&bytes[..k]) {
            // a truncated datagram only decodes if nothing was cut
            prop_assert_eq!(k, bytes.len());
            prop_assert_eq!(m.type_byte(), bytes[3]);
        }
    }

    #[test]
    fn ingest_keeps_the_newest_sequence(seqs in proptest::collection::vec(any::<u32>(), 1..100)) {
        let mut r = RemoteState::default();
        let mut best: Option<u32> = None;
        for (t, seq) in seqs.iter().enumerate() {
            let s = SensorSample { seq: *seq, ..SensorSample::default() };
            let outcome = r.ingest(s, t as u64);
            let newer = best.is_none_or(|b| *seq > b);
            prop_assert_eq!(outcome == Ingest::Accepted, newer);
            if newer {
                best = Some(*seq);
            }
            prop_assert_eq!(r.latest.map(|l| l.seq), best);
        }
        prop_assert_eq!(r.accepted + r.dropped, seqs.len() as u64);
    }

    #[test]
    fn fade_is_monotone(milli in 0u16..=1000, a in 0u64..1_000_000, b in 0u64..1_000_000) {
        let p = LossPolicy::default();
        let g = handshake_core::Grip::from_milli(milli);
        let (ga, _) = p.apply(g, a.min(b));
        let (gb, stale) = p.apply(g, a.max(b));
        prop_assert!(gb.value() <= ga.value());
        prop_assert_eq!(stale, a.max(b) > p.hold_us);
        if a.max(b) >= p.fade_us {
            prop_assert_eq!(gb.value(), 0.0);
        }
    }

    #[test]
    fn clock_offset_symmetric_path(t1 in 0u64..1u64 << 40, delay in 0u64..1_000_000, offset in -1_000_000_000i64..1_000_000_000, proc_us in 0u64..10_000) {
        // remote clock = local + offset, symmetric one-way delay
        let t2 = (t1 as i64 + delay as i64 + offset).max(0) as u64;
        prop_assume!(t2 as i64 == t1 as i64 + delay as i64 + offset);
        let t3 = t2 + proc_us;
        let t4 = t1 + 2 * delay + proc_us;
        prop_assert_eq!(clock_offset(t1, t2, t3, t4).unwrap(), offset);
    }
}

#[test]
fn clock_offset_examples() {
    assert_eq!(clock_offset(1000, 1600, 1600, 1200).unwrap(), 500);
    assert_eq!(clock_offset(0, 0, 0, 3).unwrap(), -1);
    assert!(clock_offset(10, 0, 0, 5).is_err());
}

#[test]
fn loopback_replay_is_byte_identical_for_random_counterparts() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let own = RepeatingProfile { profile: HandshakeProfile::default(), period_s: 4.0 };
    for i in 0..20 {
        let mut cfg = PairConfig::loopback(own, RepeatingProfile::random(&mut rng), 5_000_000);
        cfg.seed = i;
        let mut rec = SessionRecording::new(RecordingHeader::new("lb", "p", SessionSettings::default()));
        run_pair(&cfg, Some(&mut rec), &mut NoPacing).unwrap();
        let text = rec.to_text();
        let loaded = SessionRecording::parse(&text).unwrap();
        let report = replay(&loaded, &mut NullSink, &mut NoPacing, 1.0).unwrap();
        assert!(report.is_consistent(), "run {i}: {:?}", report.mismatches.first());
        assert_eq!(loaded.to_text(), text);
    }
}

#[test]
fn impaired_link_sixty_seconds() {
    let own = RepeatingProfile { profile: HandshakeProfile::default(), period_s: 4.0 };
    let other = RepeatingProfile { profile: HandshakeProfile { hold_s: 1.5, ..HandshakeProfile::default() }, period_s: 4.0 };
    let mut cfg = PairConfig::loopback(own, other, 61_000_000);
    cfg.link = LinkImpairment { loss: 0.1, delay_us: 50_000, jitter_us: 20_000, corrupt: 0.0 };
    cfg.silence_at_us = Some(60_000_000);
    cfg.seed = 99;
    let report = run_pair(&cfg, None, &mut NoPacing).unwrap();
    assert!(report.stale_fraction() < 0.05, "{report:?}");
    let zero_after = report.zero_after_last_receipt_us.expect("distribution settles to zero");
    assert!(zero_after <= 500_000, "{report:?}");
    assert!(report.datagrams_lost > 0);
    assert!(report.clasp_episodes_a >= 10);
}

#[test]
fn corrupted_datagrams_are_counted_not_fatal() {
    let own = RepeatingProfile { profile: HandshakeProfile::default(), period_s: 4.0 };
    let mut cfg = PairConfig::loopback(own, own, 10_000_000);
    cfg.link = LinkImpairment { loss: 0.0, delay_us: 5_000, jitter_us: 2_000, corrupt: 0.05 };
    cfg.seed = 5;
    let report = run_pair(&cfg, None, &mut NoPacing).unwrap();
    assert!(report.datagrams_corrupted > 0);
    let rejected: u64 = report.decode_errors.values().sum();
    assert!(rejected > 0 && rejected <= report.datagrams_corrupted, "{report:?}");
}
