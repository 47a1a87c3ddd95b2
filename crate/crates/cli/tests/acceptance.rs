//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use handshake_core::analysis::{
    extract_features, pca_fit_components, session_from_profile, standardize, ward_linkage,
};
use handshake_core::bus::{crc16, decode_packet, encode_packet, stuff, unstuff, Packet};
use handshake_core::model::{stimulus_distribution, ContactPhase, Grip, MappingParams, SiteGroup, SiteId};
use handshake_core::profile::HandshakeProfile;
use handshake_core::protocol::SessionSettings;
use handshake_oracles::{covariance_naive, crc16_bitwise, jacobi_eigen, sign_normalized, ward_direct};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_handshake"));
    c.env_remove("HANDSHAKE_CONFIG");
    c
}

fn run_json(args: &[&str]) -> Result<Vec<Value>, String> {
    let o = bin().arg("--format").arg("json-lines").args(args).output().map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "`handshake {}` exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ));
    }
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| format!("{l:?}: {e}")))
        .collect()
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn emotion_map_recovery(tmp: &Path) -> Verdict {
    let ds = tmp.join("ds42");
    let map = tmp.join("ds42.hsmap");
    let start = Instant::now();
    run_json(&["synth", "--seed", "42", "--out", ds.to_str().unwrap()])?;
    let lines = run_json(&["analyze", ds.to_str().unwrap(), "--out", map.to_str().unwrap()])?;
    let secs = start.elapsed().as_secs_f64();
    let recordings = std::fs::read_dir(&ds).map_err(|e| e.to_string())?.count();
    let clusters: Vec<&Value> = lines.iter().filter(|v| v["kind"] == "cluster").collect();
    let per_emotion: Vec<usize> = ["angry", "happy", "relaxed", "sad"]
        .iter()
        .map(|e| clusters.iter().filter(|c| c["emotion"] == *e).count())
        .collect();
    let min_purity = clusters
        .iter()
        .filter_map(|c| c["purity"].as_f64())
        .fold(f64::INFINITY, f64::min);
    check(
        recordings == 80 && clusters.len() == 8 && per_emotion == [2; 4] && min_purity >= 0.9 && secs < 5.0,
        format!(
            "{recordings} recordings, {} clusters, per emotion {per_emotion:?}, min purity {min_purity:.3}, {secs:.2} s",
            clusters.len()
        ),
    )
}

fn pca_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ca);
    let mut worst_val = 0.0f64;
    let mut worst_vec = 0.0f64;
    for _ in 0..100 {
        // random mixing gives correlated columns
        let mix: Vec<[f64; 5]> = (0..5).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let x: Vec<[f64; 5]> = (0..80)
            .map(|_| {
                let s: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                std::array::from_fn(|j| (0..5).map(|k| s[k] * mix[k][j]).sum())
            })
            .collect();
        let (z, _) = standardize(&x).map_err(|e| e.to_string())?;
        let m = pca_fit_components(&z, 5).map_err(|e| e.to_string())?;
        let rows: Vec<Vec<f64>> = z.iter().map(|r| r.to_vec()).collect();
        let (vals, vecs) = jacobi_eigen(&covariance_naive(&rows));
        for k in 0..5 {
            worst_val = worst_val.max((m.explained_variance[k] - vals[k]).abs());
            let want = sign_normalized(&vecs[k]);
            for (got, want) in m.loadings[k].iter().zip(&want) {
                worst_vec = worst_vec.max((got - want).abs());
            }
        }
    }
    check(
        worst_val <= 1e-9 && worst_vec <= 1e-9,
        format!("100 matrices 80x5, max eigenvalue error {worst_val:.2e}, max loading error {worst_vec:.2e} (tol 1e-9)"),
    )
}

fn ward_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3a4d);
    let mut worst = 0.0f64;
    for set in 0..25 {
        let pts: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let d = ward_linkage(&pts).map_err(|e| e.to_string())?;
        let want = ward_direct(&pts);
        for (s, (m, (l, r, h, size))) in d.merges.iter().zip(&want).enumerate() {
            if (m.left, m.right, m.size) != (*l, *r, *size) {
                return Err(format!("set {set} merge {s}: ({}, {}) vs oracle ({l}, {r})", m.left, m.right));
            }
            worst = worst.max((m.height - h).abs());
        }
        if d.merges.windows(2).any(|w| w[1].height < w[0].height) {
            return Err(format!("set {set}: heights decrease"));
        }
    }
    check(
        worst <= 1e-9,
        format!("25 sets n=80 3-D, identical merge order, max height error {worst:.2e} (tol 1e-9), heights non-decreasing"),
    )
}

fn end_to_end_determinism(tmp: &Path) -> Verdict {
    for seed in 0..20u64 {
        let rec = tmp.join(format!("lb{seed}.hsrec"));
        let trace = tmp.join(format!("lb{seed}.trace"));
        let s = seed.to_string();
        run_json(&["session", "--loopback", "--fast", "--duration", "5", "--seed", &s, "--record", rec.to_str().unwrap()])?;
        run_json(&["replay", rec.to_str().unwrap(), "--instant", "--trace-out", trace.to_str().unwrap()])?;
        let stored: String = std::fs::read_to_string(&rec)
            .map_err(|e| e.to_string())?
            .lines()
            .filter_map(|l| l.split_once(" stim ").map(|(t, rest)| format!("{t} {rest}\n")))
            .collect();
        let recomputed = std::fs::read_to_string(&trace).map_err(|e| e.to_string())?;
        if stored.is_empty() || stored != recomputed {
            return Err(format!("counterpart seed {seed}: recomputed trace differs from the stored one"));
        }
    }
    Ok("20 randomized counterparts, recomputed traces byte-identical".into())
}

fn protocol_robustness() -> Verdict {
    let lines = run_json(&["simulate-net", "--loss", "0.1", "--jitter", "50±20ms", "--duration", "60", "--tick-hz", "100"])?;
    let v = &lines[0];
    let stale = v["stale_fraction"].as_f64().unwrap_or(1.0);
    let zero = v["zero_after_silence_us"].as_u64();
    let decode: u64 = v["decode_errors"].as_object().map_or(0, |m| m.values().filter_map(Value::as_u64).sum());
    check(
        stale < 0.05 && zero.is_some_and(|z| z <= 500_000) && v["ticks"].as_u64() == Some(6100),
        format!(
            "ticks {}, stale {:.3}%, zero after silence {} ms, lost {}, decode errors {decode}",
            v["ticks"],
            100.0 * stale,
            zero.map_or("never".into(), |z| format!("{:.0}", z as f64 / 1000.0)),
            v["datagrams_lost"]
        ),
    )
}

fn mapping_law() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a3);
    let p = MappingParams::default();
    let c = ContactPhase::Clasped;
    let group = |s: SiteId| s.group(p.thumb_base_group);
    let g = |v: f64| Grip::new(v).unwrap();
    for i in 0..100_000 {
        let (own, opp, own2, opp2): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let base = stimulus_distribution(g(own), g(opp), c, &p);
        let own_moved = stimulus_distribution(g(own2), g(opp), c, &p);
        let opp_moved = stimulus_distribution(g(own), g(opp2), c, &p);
        for s in SiteId::ALL {
            let (b, o, q) = (base.get(s), own_moved.get(s), opp_moved.get(s));
            if ![b, o, q].iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(format!("pair {i}: intensity outside [0, 1]"));
            }
            // (value with the other party's grip moved, value with the driving grip moved, driving before, after)
            let (fixed, moved, from, to) = match group(s) {
                SiteGroup::Palm => (o, q, opp, opp2),
                SiteGroup::Finger => (q, o, own, own2),
            };
            let monotone = (to >= from || moved <= b) && (to <= from || moved >= b);
            let ok = fixed == b && monotone;
            if !ok {
                return Err(format!("pair {i}: site {s:?} breaks the group law"));
            }
        }
    }
    Ok("100000 random grip pairs: palm invariant in own and monotone in opponent, finger the converse, all in [0, 1]".into())
}

fn bus_codec() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb05);
    for i in 0..10_000 {
        let id = rng.random_range(0..=252u8);
        let instruction = rng.random::<u8>();
        let n = rng.random_range(0..48);
        let mut params: Vec<u8> = (0..n).map(|_| rng.random()).collect();
        // plant the header pattern in half the frames
        if n >= 3 && rng.random_bool(0.5) {
            let at = rng.random_range(0..=n - 3);
            params[at..at + 3].copy_from_slice(&[0xFF, 0xFF, 0xFD]);
        }
        let frame = encode_packet(id, instruction, &params).map_err(|e| format!("frame {i}: {e}"))?;
        let back = decode_packet(frame.as_bytes()).map_err(|e| format!("frame {i}: {e}"))?;
        if back != (Packet { id, instruction, params }) {
            return Err(format!("frame {i} did not round-trip"));
        }
    }
    for i in 0..10_000 {
        let n = rng.random_range(0..300);
        let bytes: Vec<u8> = (0..n).map(|_| rng.random()).collect();
        if crc16(&bytes) != crc16_bitwise(&bytes) {
            return Err(format!("string {i}: table crc differs from bitwise"));
        }
    }
    let mut adversarial = 0;
    for i in 0..10_000 {
        let n = rng.random_range(0..64);
        let bytes: Vec<u8> = (0..n).map(|_| [0xFF, 0xFD, 0x00, rng.random()][rng.random_range(0..4)]).collect();
        adversarial += usize::from(bytes.windows(3).any(|w| w == [0xFF, 0xFF, 0xFD]));
        let stuffed = stuff(&bytes);
        let unescaped = (0..stuffed.len().saturating_sub(2))
            .any(|k| stuffed[k..k + 3] == [0xFF, 0xFF, 0xFD] && stuffed.get(k + 3) != Some(&0xFD));
        if unescaped {
            return Err(format!("pattern {i}: header sequence survives stuffing"));
        }
        if unstuff(&stuffed).ok().as_deref() != Some(&bytes[..]) {
            return Err(format!("pattern {i}: unstuff(stuff(x)) != x"));
        }
    }
    Ok(format!(
        "10000 frames round-trip, 10000 crc strings agree, stuffing inverse on 10000 patterns ({adversarial} containing FF FF FD)"
    ))
}

fn feature_analytic() -> Verdict {
    let p = HandshakeProfile::default();
    let rec = session_from_profile(&p, "analytic", "p", None, SessionSettings::default()).map_err(|e| e.to_string())?;
    let f = extract_features(&rec).map_err(|e| e.to_string())?;
    check(
        (f.grip_strength - 1.0).abs() <= 0.01
            && (f.grip_speed - 2.0).abs() <= 0.1
            && (f.swing_range - 0.10).abs() <= 0.002
            && (f.swing_speed - 0.40).abs() <= 0.01,
        format!(
            "grip_strength {:.4}, grip_speed {:.4}/s, swing_range {:.5} m, swing_speed {:.4} m/s",
            f.grip_strength, f.grip_speed, f.swing_range, f.swing_speed
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("emotion map recovery (seed 42)", Box::new(|| emotion_map_recovery(tmp.path()))),
        ("PCA oracle equivalence", Box::new(pca_oracle)),
        ("Ward oracle equivalence", Box::new(ward_oracle)),
        ("end-to-end record/replay determinism", Box::new(|| end_to_end_determinism(tmp.path()))),
        ("protocol robustness (loss 0.1, 50±20 ms)", Box::new(protocol_robustness)),
        ("mapping law", Box::new(mapping_law)),
        ("bus codec", Box::new(bus_codec)),
        ("feature extractor analytic check", Box::new(feature_analytic)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        match f() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
