use handshake_core::analysis::*;
use handshake_core::console::*;
use handshake_core::model::ContactPhase;
use handshake_core::protocol::SessionSettings;
use handshake_core::recording::{EVENT_CLASP, EVENT_RELEASE, MEDIA_START};

fn join(hub: &mut ConsoleHub, id: ClientId, role: Role) {
    let r = hub.handle(
        id,
        ConsoleMessage::Join { session: "room".into(), role, replay: None },
        0,
    );
    assert!(matches!(r[..], [ConsoleMessage::Joined { version: PROTOCOL_VERSION, .. }]), "{r:?}");
}

fn input(hub: &mut ConsoleHub, id: ClientId, grip: f64) {
    assert!(hub.handle(id, ConsoleMessage::Input { grip, wrist_mm: [0; 3] }, 0).is_empty());
}

fn pair() -> (ConsoleHub, ClientId, ClientId) {
    let mut hub = ConsoleHub::new(SessionSettings::default(), None);
    let (a, b) = (hub.connect(), hub.connect());
    join(&mut hub, a, Role::A);
    join(&mut hub, b, Role::B);
    (hub, a, b)
}

#[test]
fn firm_grips_clasp_both_seats() {
    let (mut hub, a, b) = pair();
    input(&mut hub, a, 0.5);
    input(&mut hub, b, 0.6);
    let mut clasp = Vec::new();
    let mut last = None;
    for k in 0..10 {
        for (id, m) in hub.tick(k * TICK_US) {
            match m {
                ConsoleMessage::Event { ref name, .. } if name == EVENT_CLASP => clasp.push(id),
                ConsoleMessage::State { phase, dist, .. } if id == a => last = Some((phase, dist)),
                _ => {}
            }
        }
    }
    clasp.sort();
    assert_eq!(clasp, vec![a, b]);
    let (phase, dist) = last.unwrap();
    assert_eq!(phase, ContactPhase::Clasped);
    // fingers follow own grip, palm follows the partner
    assert!((dist[0] - 0.5).abs() < 0.01 && (dist[6] - 0.6).abs() < 0.01, "{dist:?}");
}

#[test]
fn lost_partner_fades_to_zero() {
    let (mut hub, a, b) = pair();
    input(&mut hub, a, 0.8);
    input(&mut hub, b, 0.8);
    let mut t = 0;
    while t < 500_000 {
        hub.tick(t);
        t += TICK_US;
    }
    let gone = t;
    hub.disconnect(b);
    let mut stale_seen = false;
    let mut zero_at = None;
    while t < gone + 1_000_000 {
        for (id, m) in hub.tick(t) {
            assert_eq!(id, a);
            if let ConsoleMessage::State { stale, dist, .. } = m {
                stale_seen |= stale;
                if dist.iter().all(|&d| d == 0.0) && zero_at.is_none() {
                    zero_at = Some(t);
                }
            }
        }
        t += TICK_US;
    }
    assert!(stale_seen);
    // one state interval of slack for the throttled stream
    assert!(zero_at.unwrap() <= gone + 500_000 + STATE_INTERVAL_US, "{zero_at:?}");
}

#[test]
fn replay_join_streams_recorded_events() {
    let recs = synth_dataset(3, &default_synth_spec()).unwrap();
    let rec = recs[0].clone();
    let id = rec.header.recording_id.clone();
    let want: Vec<(String, u64)> = rec
        .events()
        .into_iter()
        .map(|e| (e.name, e.t_us))
        .collect();
    let mut hub = ConsoleHub::new(SessionSettings::default(), None);
    hub.add_recording(rec.clone());
    assert_eq!(hub.recording_ids().collect::<Vec<_>>(), vec![id.as_str()]);
    let c = hub.connect();
    let start = 1_000_000;
    let r = hub.handle(
        c,
        ConsoleMessage::Join { session: "r".into(), role: Role::A, replay: Some(id) },
        start,
    );
    assert!(matches!(r[..], [ConsoleMessage::Joined { .. }]));
    let mut got = Vec::new();
    let mut states = 0;
    let end = rec.last_t_us().unwrap();
    let mut t = start;
    while t <= start + end + TICK_US {
        for (_, m) in hub.tick(t) {
            match m {
                ConsoleMessage::Event { name, t_us } => {
                    // delivered no earlier than its timestamp, within one tick
                    assert!(t - start >= t_us && t - start < t_us + TICK_US);
                    got.push((name, t_us));
                }
                ConsoleMessage::State { .. } => states += 1,
                other => panic!("{other:?}"),
            }
        }
        t += TICK_US;
    }
    assert_eq!(got, want);
    assert_eq!(got[0], (MEDIA_START.to_string(), 0));
    let secs = end as f64 / 1e6;
    assert!(states as f64 <= secs * 30.0 + 2.0);
}

#[test]
fn release_with_a_map_classifies() {
    let spec = default_synth_spec();
    let map = build_emotion_map(&synth_dataset(42, &spec).unwrap(), &MapConfig::default()).unwrap();
    let mode = spec.modes.iter().find(|m| m.emotion == Emotion::Happy && m.subtendency == 1).unwrap();
    let profile = profile_for_features(&HandshakeFeatures::from_array(mode.mean), &spec.settings.mapping).unwrap();

    let mut hub = ConsoleHub::new(SessionSettings::default(), Some(map));
    let (a, b) = (hub.connect(), hub.connect());
    join(&mut hub, a, Role::A);
    join(&mut hub, b, Role::B);
    let mut events = Vec::new();
    let mut classified = Vec::new();
    let mut t = 0;
    while (t as f64) < profile.total_s() * 1e6 {
        let s = t as f64 / 1e6;
        for id in [a, b] {
            let m = ConsoleMessage::Input { grip: profile.grip_at(s).value(), wrist_mm: profile.wrist_mm_at(s) };
            assert!(hub.handle(id, m, t).is_empty());
        }
        for (id, m) in hub.tick(t) {
            match m {
                ConsoleMessage::Event { name, .. } if id == a => events.push(name),
                ConsoleMessage::Classified { emotion, subtendency, .. } => classified.push((id, emotion, subtendency)),
                ConsoleMessage::Error { reason } => panic!("{reason}"),
                _ => {}
            }
        }
        t += TICK_US;
    }
    assert_eq!(events, vec![EVENT_CLASP.to_string(), EVENT_RELEASE.to_string()]);
    assert_eq!(classified.len(), 2, "{classified:?}");
    for (_, emotion, subtendency) in classified {
        assert_eq!((emotion.as_str(), subtendency), ("happy", 1));
    }
}

#[test]
fn bad_messages_get_errors() {
    let mut hub = ConsoleHub::new(SessionSettings::default(), None);
    let c = hub.connect();
    assert!(matches!(hub.handle_text(c, "not json", 0)[..], [ConsoleMessage::Error { .. }]));
    assert!(matches!(
        hub.handle_text(c, r#"{"type":"input","grip":0.5,"wrist_mm":[0,0,0]}"#, 0)[..],
        [ConsoleMessage::Error { .. }]
    ));
    join(&mut hub, c, Role::A);
    assert!(matches!(
        hub.handle_text(c, r#"{"type":"input","grip":1.5,"wrist_mm":[0,0,0]}"#, 0)[..],
        [ConsoleMessage::Error { .. }]
    ));
    let r = hub.handle(c, ConsoleMessage::Join { session: "x".into(), role: Role::B, replay: Some("nope".into()) }, 0);
    assert!(matches!(r[..], [ConsoleMessage::Error { .. }]));
}
