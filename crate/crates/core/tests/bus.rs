use handshake_core::bus::*;
use handshake_core::model::{SiteId, StimulusDistribution};
use handshake_oracles::{crc16_bitwise, goal_exact};
use proptest::prelude::*;

proptest! {
    #[test]
    fn crc_matches_bitwise_reference(data in proptest::collection::vec(any::<u8>(), 0..400)) {
        prop_assert_eq!(crc16(&data), crc16_bitwise(&data));
    }

    #[test]
    fn crc_update_is_incremental(data in proptest::collection::vec(any::<u8>(), 0..200), split in 0usize..200) {
        let k = split.min(data.len());
        prop_assert_eq!(crc16_update(crc16(&data[..k]), &data[k..]), crc16(&data));
    }

    #[test]
    fn stuffing_is_invertible(data in proptest::collection::vec(prop_oneof![Just(0xFFu8), Just(0xFD), any::<u8>()], 0..64)) {
        let s = stuff(&data);
        prop_assert_eq!(unstuff(&s).unwrap(), data);
        // every FF FF FD inside the body is followed by the FD escape
        for i in 0..s.len().saturating_sub(2) {
            if s[i..i + 3] == [0xFF, 0xFF, 0xFD] {
                prop_assert_eq!(s.get(i + 3), Some(&0xFD));
            }
        }
    }

    #[test]
    fn goal_write_round_trip(id in 0u8..=252, goal in any::<i32>()) {
        let frame = encode_goal_write(id, goal).unwrap();
        prop_assert!(frame.crc_ok());
        prop_assert_eq!(decode_goal_write(&frame).unwrap(), GoalWrite { id, goal });
    }

    #[test]
    fn any_single_byte_flip_is_caught(id in 0u8..=252, goal in any::<i32>(), pos in any::<prop::sample::Index>(), mask in 1u8..=255) {
        let mut bytes = encode_goal_write(id, goal).unwrap().into_bytes();
        let i = pos.index(bytes.len());
        bytes[i] ^= mask;
        let damaged = BusFrame::from_raw(bytes);
        // a flip inside one byte is a burst of at most 8 bits, always caught
        prop_assert!(decode_goal_write(&damaged).is_err());
    }

    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_packet(&bytes);
        let _ = decode_goal_write(&BusFrame::from_raw(bytes));
    }

    #[test]
    fn goal_matches_exact_rational(
        intensity in prop_oneof![0.0f64..=1.0, Just(0.5), Just(1.0), Just(0.0), Just(f64::MIN_POSITIVE)],
        rest in -1_000_000i32..1_000_000,
        span in prop_oneof![-1_000_000i32..1_000_000, Just(3), Just(-3), Just(1)],
    ) {
        prop_assume!(span != 0);
        let ch = ChannelConfig { motor_id: 1, rest_ticks: rest, span_ticks: span, max_ticks_per_s: 100 };
        let want = goal_exact(rest, span, intensity).unwrap();
        prop_assert_eq!(i64::from(intensity_to_goal(intensity, &ch).unwrap()), want);
    }

    #[test]
    fn motor_never_exceeds_rate(
        goals in proptest::collection::vec((-5000i32..5000, 1u64..50_000), 1..20),
        rate in 1u32..20_000,
    ) {
        let ch = ChannelConfig { motor_id: 3, rest_ticks: 0, span_ticks: 100, max_ticks_per_s: rate };
        let mut m = SimMotor::new(ch, 0);
        let mut t = 0;
        let mut last_pos = 0i64;
        let mut last_t = 0u64;
        for (goal, dt) in goals {
            t += dt;
            m = sim_step(&m, &encode_goal_write(3, goal).unwrap(), t).unwrap();
            let pos = i64::from(m.state.position_ticks);
            // cumulative travel bounded by rate times elapsed time since start
            let moved = (pos - last_pos).unsigned_abs() as u128;
            prop_assert!(moved <= u128::from(rate) * u128::from(t - last_t) / 1_000_000 + 1);
            last_pos = pos;
            last_t = t;
        }
    }
}

#[test]
fn ping_frame_matches_vendor_example() {
    let f = encode_packet(1, INST_PING, &[]).unwrap();
    assert_eq!(f.as_bytes(), &[0xFF, 0xFF, 0xFD, 0x00, 0x01, 0x03, 0x00, 0x01, 0x19, 0x4E]);
}

#[test]
fn ten_thousand_goal_round_trips() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let id = rng.random_range(0..=MAX_MOTOR_ID);
        let goal: i32 = rng.random();
        let f = encode_goal_write(id, goal).unwrap();
        assert_eq!(decode_goal_write(&f).unwrap(), GoalWrite { id, goal });
    }
}

#[test]
fn schedule_frames_and_motion() {
    let channels = default_channels();
    let mut dist = StimulusDistribution::ZERO;
    dist.intensity[SiteId::PalmLateral.index()] = 1.0;
    let frames = schedule(&dist, &channels).unwrap();
    let mut dev = SimDevice::new(&channels, 0);
    for f in &frames {
        dev.send(f, 0).unwrap();
    }
    dev.advance(1_000_000);
    let pos = dev.positions();
    for (i, p) in pos.iter().enumerate() {
        let want = if i == SiteId::PalmLateral.index() { 2048 + 512 } else { 2048 };
        assert_eq!(*p, want);
    }
    // slew limit: 4096 ticks/s means 512 ticks take 125 ms
    let mut dev = SimDevice::new(&channels, 0);
    for f in &frames {
        dev.send(f, 0).unwrap();
    }
    dev.advance(62_500);
    assert_eq!(dev.positions()[SiteId::PalmLateral.index()], 2048 + 256);
}

#[test]
fn rejects_out_of_range() {
    assert!(matches!(encode_goal_write(253, 0), Err(BusError::InvalidId(253))));
    let ch = default_channels()[0];
    assert!(intensity_to_goal(1.5, &ch).is_err());
    assert!(intensity_to_goal(f64::NAN, &ch).is_err());
    let mut dup = default_channels();
    dup[1].motor_id = dup[0].motor_id;
    assert!(schedule(&StimulusDistribution::ZERO, &dup).is_err());
}

#[test]
fn capture_log_round_trip() {
    let frames: Vec<BusFrame> = (0..5).map(|i| encode_goal_write(i, i32::from(i) * 1000 - 2).unwrap()).collect();
    let mut log = CaptureLog::new(Vec::new());
    for f in &frames {
        log.send(f, 0).unwrap();
    }
    let bytes = log.into_inner().unwrap();
    assert_eq!(read_capture(&bytes[..]).unwrap(), frames);
}
