use std::time::Instant;

use anyhow::Context as _;
use handshake_core::analysis::{
    build_emotion_map, classify as classify_recording, default_synth_spec, load_dataset,
    synth_dataset, write_dataset, EmotionMap, MapConfig,
};
use handshake_core::recording::SessionRecording;
use serde_json::json;

use crate::args::{AnalyzeArgs, ClassifyArgs, SynthArgs};
use crate::{usage, CmdResult, Context};

pub fn synth(ctx: &Context, a: SynthArgs) -> CmdResult {
    let start = Instant::now();
    let mut spec = default_synth_spec();
    spec.settings = ctx.settings();
    let recs = synth_dataset(a.seed, &spec)?;
    write_dataset(&a.out, &recs).with_context(|| format!("writing {}", a.out.display()))?;
    let elapsed = start.elapsed().as_secs_f64();
    ctx.out.emit(
        "synth",
        json!({
            "seed": a.seed,
            "recordings": recs.len(),
            "dir": a.out.display().to_string(),
            "elapsed_s": elapsed,
        }),
        format!(
            "wrote {} recordings (seed {}) to {} in {elapsed:.2} s",
            recs.len(),
            a.seed,
            a.out.display()
        ),
    );
    Ok(())
}

pub fn analyze(ctx: &Context, a: AnalyzeArgs) -> CmdResult {
    let k = a.k.unwrap_or(ctx.config.clusters);
    if k == 0 {
        return Err(usage("--k must be positive"));
    }
    let start = Instant::now();
    let recs = load_dataset(&a.dir).with_context(|| format!("reading {}", a.dir.display()))?;
    if recs.is_empty() {
        return Err(anyhow::anyhow!("no .hsrec files in {}", a.dir.display()).into());
    }
    let map = build_emotion_map(&recs, &MapConfig { k })?;
    map.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let elapsed = start.elapsed().as_secs_f64();

    if ctx.out.is_text() {
        print!("{}", map.purity_table());
    } else {
        for c in &map.clusters {
            ctx.out.emit(
                "cluster",
                json!({
                    "cluster": c.number,
                    "emotion": c.emotion.name(),
                    "subtendency": c.subtendency,
                    "members": c.members,
                    "purity": c.purity,
                    "label_counts": {
                        "angry": c.label_counts[0],
                        "happy": c.label_counts[1],
                        "relaxed": c.label_counts[2],
                        "sad": c.label_counts[3],
                    },
                    "tied": c.tied,
                    "centroid": c.centroid,
                }),
                "",
            );
        }
    }
    ctx.out.emit(
        "map",
        json!({
            "path": a.out.display().to_string(),
            "recordings": recs.len(),
            "clusters": map.k(),
            "min_purity": map.min_purity(),
            "explained_variance": map.pca.explained_variance,
            "elapsed_s": elapsed,
        }),
        format!(
            "wrote {} ({} recordings, {} clusters, min purity {:.3}) in {elapsed:.2} s",
            a.out.display(),
            recs.len(),
            map.k(),
            map.min_purity()
        ),
    );
    Ok(())
}

pub fn classify(ctx: &Context, a: ClassifyArgs) -> CmdResult {
    let map = EmotionMap::load(&a.map).with_context(|| format!("loading {}", a.map.display()))?;
    let rec = SessionRecording::load(&a.file).with_context(|| format!("loading {}", a.file.display()))?;
    let c = classify_recording(&map, &rec)?;
    let member = map.member(&rec.header.recording_id).map(|m| m.cluster);
    ctx.out.emit(
        "classification",
        json!({
            "recording": rec.header.recording_id,
            "emotion": c.emotion.name(),
            "subtendency": c.subtendency,
            "cluster": c.cluster,
            "distance": c.distance,
            "scores": c.scores,
            "member_cluster": member,
        }),
        format!(
            "{}: {}, subtendency {}, cluster {}, distance {:.4}{}",
            rec.header.recording_id,
            c.emotion.name(),
            c.subtendency,
            c.cluster,
            c.distance,
            member.map_or(String::new(), |m| format!(", training member of cluster {m}"))
        ),
    );
    Ok(())
}
