//! The emotion map: standardization, PCA loadings and labeled Ward
//! clusters learned from a labeled dataset, plus nearest-centroid lookup.
//!
//! Serialized as line-oriented `.hsmap` text. The first line is
//! `#hsmap version=1 clusters=K features=...`; other `#` lines are
//! comments. Then, one per line:
//!
//! ```text
//! standardize mean=m1,..,m5 std=s1,..,s5 degenerate=0,0,0,0,0
//! pca sign=max-abs-positive variance=v1,v2,v3
//! loading <k> values=l1,..,l5
//! cluster <n> emotion=<e> subtendency=<i> members=<c> purity=<p> tied=<0|1> counts=a,h,r,s centroid=x,y,z
//! member <recording-id> label=<e> cluster=<n>
//! ```
//!
//! Floats use the shortest representation that parses back to the same
//! value, so a save/load round trip is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::features::{extract_features, HandshakeFeatures};
use super::pca::{pca_fit, standardize, PcaModel, StandardizationParams, SIGN_CONVENTION};
use super::ward::{cut, ward_linkage};
use super::{AnalysisError, Emotion, FEATURE_COUNT, FEATURE_NAMES};
use crate::recording::SessionRecording;

pub const MAP_EXTENSION: &str = "hsmap";
const MAP_VERSION: u32 = 1;
const MAP_COMPONENTS: usize = 3;

const FEATURE_DEFINITIONS: [&str; FEATURE_COUNT] = [
    "peak own grip over the clasp",
    "max forward difference of 5-sample trailing mean of own grip over the closing ramp, 1/s",
    "peak-to-peak wrist position along the principal axis during the clasp, m",
    "mean absolute wrist velocity along the principal axis during the clasp, m/s",
    "first released tick minus first clasped tick, s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapConfig {
    /// Number of clusters to cut the dendrogram into.
    pub k: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { k: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInfo {
    pub number: usize,
    /// Majority emotion of the members.
    pub emotion: Emotion,
    /// 1-based rank of this cluster among those of the same emotion.
    pub subtendency: u8,
    pub members: usize,
    /// Share of members carrying the majority label.
    pub purity: f64,
    /// Member count per emotion, in `Emotion::ALL` order.
    pub label_counts: [usize; 4],
    /// Set when two emotions tied for the majority.
    pub tied: bool,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberAssignment {
    pub recording_id: String,
    pub label: Emotion,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionMap {
    pub standardization: StandardizationParams,
    pub pca: PcaModel,
    pub clusters: Vec<ClusterInfo>,
    pub members: Vec<MemberAssignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub cluster: usize,
    pub emotion: Emotion,
    pub subtendency: u8,
    pub distance: f64,
    pub scores: Vec<f64>,
}

pub fn build_emotion_map(
    recordings: &[SessionRecording],
    cfg: &MapConfig,
) -> Result<EmotionMap, AnalysisError> {
    let rows: Vec<(String, Emotion, HandshakeFeatures)> = recordings
        .par_iter()
        .map(|rec| {
            let id = rec.header.recording_id.clone();
            let label = rec.header.label.ok_or_else(|| {
                AnalysisError::InvalidInput(format!("recording {id} has no emotion label"))
            })?;
            let f = extract_features(rec).map_err(|e| AnalysisError::Map(format!("{id}: {e}")))?;
            Ok((id, label, f))
        })
        .collect::<Result<_, AnalysisError>>()?;
    build_emotion_map_from_features(&rows, cfg)
}

pub fn build_emotion_map_from_features(
    rows: &[(String, Emotion, HandshakeFeatures)],
    cfg: &MapConfig,
) -> Result<EmotionMap, AnalysisError> {
    let x: Vec<[f64; FEATURE_COUNT]> = rows.iter().map(|r| r.2.to_array()).collect();
    let (z, standardization) = standardize(&x)?;
    let pca = pca_fit(&z)?;
    let scores: Vec<Vec<f64>> = z.iter().map(|v| pca.project(v)).collect();
    if cfg.k == 0 || cfg.k > scores.len() {
        return Err(AnalysisError::InvalidInput(format!(
            "cluster count {} outside 1..={}",
            cfg.k,
            scores.len()
        )));
    }
    let labels = cut(&ward_linkage(&scores)?, cfg.k)?;

    let mut clusters: Vec<ClusterInfo> = (0..cfg.k)
        .map(|number| ClusterInfo {
            number,
            emotion: Emotion::Angry,
            subtendency: 0,
            members: 0,
            purity: 0.0,
            label_counts: [0; 4],
            tied: false,
            centroid: vec![0.0; MAP_COMPONENTS],
        })
        .collect();
    for ((_, emotion, _), (&c, s)) in rows.iter().zip(labels.iter().zip(&scores)) {
        let info = &mut clusters[c];
        info.members += 1;
        info.label_counts[emotion.index()] += 1;
        for (acc, v) in info.centroid.iter_mut().zip(s) {
            *acc += v;
        }
    }
    let mut per_emotion = [0u8; 4];
    for info in &mut clusters {
        let n = info.members as f64;
        info.centroid.iter_mut().for_each(|v| *v /= n);
        let best = *info.label_counts.iter().max().expect("four labels");
        // first maximum in Emotion::ALL order breaks ties
        let idx = info.label_counts.iter().position(|&c| c == best).expect("present");
        info.tied = info.label_counts.iter().filter(|&&c| c == best).count() > 1;
        info.emotion = Emotion::ALL[idx];
        info.purity = best as f64 / n;
        per_emotion[idx] += 1;
        info.subtendency = per_emotion[idx];
    }
    if let Some(missing) = Emotion::ALL.iter().find(|e| per_emotion[e.index()] == 0) {
        return Err(AnalysisError::Map(format!(
            "no cluster has {missing} as its majority label"
        )));
    }
    let members = rows
        .iter()
        .zip(&labels)
        .map(|((id, label, _), &cluster)| MemberAssignment {
            recording_id: id.clone(),
            label: *label,
            cluster,
        })
        .collect();
    Ok(EmotionMap {
        standardization,
        pca,
        clusters,
        members,
    })
}

/// Nearest centroid in score space; equal distances go to the lower
/// cluster number.
pub fn classify_features(map: &EmotionMap, f: &HandshakeFeatures) -> Classification {
    let scores = map.pca.project(&map.standardization.apply(&f.to_array()));
    let mut best: Option<(f64, &ClusterInfo)> = None;
    for c in &map.clusters {
        let d = c
            .centroid
            .iter()
            .zip(&scores)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    let (distance, c) = best.expect("map has clusters");
    Classification {
        cluster: c.number,
        emotion: c.emotion,
        subtendency: c.subtendency,
        distance,
        scores,
    }
}

pub fn classify(map: &EmotionMap, rec: &SessionRecording) -> Result<Classification, AnalysisError> {
    Ok(classify_features(map, &extract_features(rec)?))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad number {t:?}"))
        })
        .collect()
}

fn fixed<const N: usize>(v: Vec<f64>, what: &str) -> Result<[f64; N], String> {
    v.try_into().map_err(|v: Vec<f64>| format!("{what}: expected {N} values, got {}", v.len()))
}

impl EmotionMap {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn min_purity(&self) -> f64 {
        self.clusters.iter().map(|c| c.purity).fold(f64::INFINITY, f64::min)
    }

    pub fn member(&self, recording_id: &str) -> Option<&MemberAssignment> {
        self.members.iter().find(|m| m.recording_id == recording_id)
    }

    pub fn clusters_of(&self, e: Emotion) -> usize {
        self.clusters.iter().filter(|c| c.emotion == e).count()
    }

    /// Human-readable cluster summary.
    pub fn purity_table(&self) -> String {
        let mut out = String::from("cluster  emotion  sub  members  purity  angry happy relaxed sad\n");
        for c in &self.clusters {
            let _ = writeln!(
                out,
                "{:>7}  {:<7}  {:>3}  {:>7}  {:>6.3}  {:>5} {:>5} {:>7} {:>3}{}",
                c.number,
                c.emotion.name(),
                c.subtendency,
                c.members,
                c.purity,
                c.label_counts[0],
                c.label_counts[1],
                c.label_counts[2],
                c.label_counts[3],
                if c.tied { "  (tie)" } else { "" }
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let s = &self.standardization;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "#hsmap version={MAP_VERSION} clusters={} features={}",
            self.k(),
            FEATURE_NAMES.join(",")
        );
        for (name, def) in FEATURE_NAMES.iter().zip(FEATURE_DEFINITIONS) {
            let _ = writeln!(out, "# {name}: {def}");
        }
        let degenerate: Vec<&str> = s.degenerate.iter().map(|&d| if d { "1" } else { "0" }).collect();
        let _ = writeln!(
            out,
            "standardize mean={} std={} degenerate={}",
            join(&s.mean),
            join(&s.std),
            degenerate.join(",")
        );
        let _ = writeln!(
            out,
            "pca sign={} variance={}",
            if self.pca.sign_normalized { SIGN_CONVENTION } else { "none" },
            join(&self.pca.explained_variance)
        );
        for (k, l) in self.pca.loadings.iter().enumerate() {
            let _ = writeln!(out, "loading {k} values={}", join(l));
        }
        for c in &self.clusters {
            let counts: Vec<String> = c.label_counts.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(
                out,
                "cluster {} emotion={} subtendency={} members={} purity={} tied={} counts={} centroid={}",
                c.number,
                c.emotion,
                c.subtendency,
                c.members,
                c.purity,
                u8::from(c.tied),
                counts.join(","),
                join(&c.centroid)
            );
        }
        for m in &self.members {
            let _ = writeln!(out, "member {} label={} cluster={}", m.recording_id, m.label, m.cluster);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AnalysisError> {
        Self::parse_inner(text).map_err(AnalysisError::Map)
    }

    fn parse_inner(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or("empty map file")?;
        let mut head = header.split_whitespace();
        if head.next() != Some("#hsmap") {
            return Err("not an emotion map (missing #hsmap header)".into());
        }
        let mut k = None;
        for tok in head {
            match tok.split_once('=') {
                Some(("version", v)) if v == MAP_VERSION.to_string() => {}
                Some(("version", v)) => return Err(format!("unsupported map version {v}")),
                Some(("clusters", v)) => k = Some(v.parse::<usize>().map_err(|_| "bad cluster count")?),
                Some(("features", v)) if v == FEATURE_NAMES.join(",") => {}
                Some(("features", v)) => return Err(format!("unexpected feature list {v}")),
                _ => return Err(format!("bad header token {tok:?}")),
            }
        }
        let k = k.ok_or("header lacks clusters=")?;

        let mut standardization = None;
        let mut variance = None;
        let mut sign_normalized = true;
        let mut loadings: Vec<[f64; FEATURE_COUNT]> = Vec::new();
        let mut clusters: Vec<ClusterInfo> = Vec::new();
        let mut members = Vec::new();
        for (idx, line) in lines {
            let ctx = |e: String| format!("line {}: {e}", idx + 1);
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace();
            let kind = toks.next().expect("non-empty line");
            let positional: Vec<&str> = toks.clone().take_while(|t| !t.contains('=')).collect();
            let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
            for t in toks.skip(positional.len()) {
                let (key, v) = t.split_once('=').ok_or_else(|| ctx(format!("expected key=value, got {t:?}")))?;
                if kv.insert(key, v).is_some() {
                    return Err(ctx(format!("duplicate key {key}")));
                }
            }
            let get = |key: &str| kv.get(key).copied().ok_or_else(|| ctx(format!("missing {key}=")));
            let index = |what: &str| -> Result<usize, String> {
                positional
                    .first()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| ctx(format!("{what} needs an index")))
            };
            match kind {
                "standardize" => {
                    let degenerate: Vec<bool> = get("degenerate")?
                        .split(',')
                        .map(|t| match t {
                            "0" => Ok(false),
                            "1" => Ok(true),
                            _ => Err(ctx(format!("bad flag {t:?}"))),
                        })
                        .collect::<Result<_, _>>()?;
                    standardization = Some(StandardizationParams {
                        mean: fixed(parse_list(get("mean")?).map_err(ctx)?, "mean").map_err(ctx)?,
                        std: fixed(parse_list(get("std")?).map_err(ctx)?, "std").map_err(ctx)?,
                        degenerate: degenerate
                            .try_into()
                            .map_err(|_| ctx("degenerate: expected 5 flags".into()))?,
                    });
                }
                "pca" => {
                    sign_normalized = match get("sign")? {
                        SIGN_CONVENTION => true,
                        "none" => false,
                        other => return Err(ctx(format!("unknown sign convention {other}"))),
                    };
                    variance = Some(parse_list(get("variance")?).map_err(ctx)?);
                }
                "loading" => {
                    if index("loading")? != loadings.len() {
                        return Err(ctx("loadings out of order".into()));
                    }
                    loadings.push(fixed(parse_list(get("values")?).map_err(ctx)?, "loading").map_err(ctx)?);
                }
                "cluster" => {
                    let number = index("cluster")?;
                    if number != clusters.len() {
                        return Err(ctx("clusters out of order".into()));
                    }
                    let int = |key: &str| -> Result<usize, String> {
                        get(key)?.parse().map_err(|_| ctx(format!("bad {key}")))
                    };
                    let counts: Vec<usize> = get("counts")?
                        .split(',')
                        .map(|t| t.parse().map_err(|_| ctx(format!("bad count {t:?}"))))
                        .collect::<Result<_, _>>()?;
                    let purity = parse_list(get("purity")?).map_err(ctx)?;
                    clusters.push(ClusterInfo {
                        number,
                        emotion: get("emotion")?.parse().map_err(|e| ctx(format!("{e}")))?,
                        subtendency: u8::try_from(int("subtendency")?).map_err(|_| ctx("bad subtendency".into()))?,
                        members: int("members")?,
                        purity: *purity.first().filter(|_| purity.len() == 1).ok_or_else(|| ctx("bad purity".into()))?,
                        label_counts: counts.try_into().map_err(|_| ctx("counts: expected 4 values".into()))?,
                        tied: match get("tied")? {
                            "0" => false,
                            "1" => true,
                            t => return Err(ctx(format!("bad tied flag {t:?}"))),
                        },
                        centroid: parse_list(get("centroid")?).map_err(ctx)?,
                    });
                }
                "member" => {
                    let id = positional.first().ok_or_else(|| ctx("member needs a recording id".into()))?;
                    members.push(MemberAssignment {
                        recording_id: id.to_string(),
                        label: get("label")?.parse().map_err(|e| ctx(format!("{e}")))?,
                        cluster: get("cluster")?.parse().map_err(|_| ctx("bad cluster".into()))?,
                    });
                }
                other => return Err(ctx(format!("unknown line kind {other:?}"))),
            }
        }
        let map = EmotionMap {
            standardization: standardization.ok_or("missing standardize line")?,
            pca: PcaModel {
                loadings,
                explained_variance: variance.ok_or("missing pca line")?,
                sign_normalized,
            },
            clusters,
            members,
        };
        map.check(k)?;
        Ok(map)
    }

    fn check(&self, k: usize) -> Result<(), String> {
        let comps = self.pca.loadings.len();
        if comps == 0 || self.pca.explained_variance.len() != comps {
            return Err("loadings and variances disagree".into());
        }
        if self.clusters.len() != k {
            return Err(format!("header promises {k} clusters, found {}", self.clusters.len()));
        }
        for c in &self.clusters {
            if c.centroid.len() != comps {
                return Err(format!("cluster {} centroid has wrong dimension", c.number));
            }
            if c.label_counts.iter().sum::<usize>() != c.members {
                return Err(format!("cluster {} counts do not sum to members", c.number));
            }
        }
        if let Some(e) = Emotion::ALL.iter().find(|&&e| self.clusters_of(e) == 0) {
            return Err(format!("no cluster labeled {e}"));
        }
        if let Some(m) = self.members.iter().find(|m| m.cluster >= k) {
            return Err(format!("member {} refers to cluster {}", m.recording_id, m.cluster));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), AnalysisError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_rows() -> Vec<(String, Emotion, HandshakeFeatures)> {
        // four well-separated groups, one per emotion, three members each
        let centers = [
            [0.9, 5.0, 0.2, 1.0, 1.5],
            [0.6, 3.0, 0.3, 1.4, 3.0],
            [0.4, 1.5, 0.1, 0.3, 4.0],
            [0.25, 1.0, 0.08, 0.1, 6.0],
        ];
        let mut rows = Vec::new();
        for (e, c) in Emotion::ALL.iter().zip(centers) {
            for i in 0..3 {
                let jitter = 1.0 + 0.01 * i as f64 - 0.007 * (e.index() as f64);
                let f = HandshakeFeatures::from_array(std::array::from_fn(|j| {
                    c[j] * if j % 2 == 0 { jitter } else { 2.0 - jitter }
                }));
                rows.push((format!("{e}_{i}"), *e, f));
            }
        }
        rows
    }

    #[test]
    fn four_groups_four_clusters() {
        let map = build_emotion_map_from_features(&toy_rows(), &MapConfig { k: 4 }).unwrap();
        assert_eq!(map.k(), 4);
        assert_eq!(map.min_purity(), 1.0);
        for (c, e) in map.clusters.iter().zip(Emotion::ALL) {
            assert_eq!(c.emotion, e);
            assert_eq!(c.subtendency, 1);
            assert_eq!(c.members, 3);
        }
        let parsed = EmotionMap::parse(&map.to_text()).unwrap();
        assert_eq!(parsed, map);
        assert_eq!(parsed.to_text(), map.to_text());
    }

    #[test]
    fn too_few_clusters_for_four_emotions() {
        let err = build_emotion_map_from_features(&toy_rows(), &MapConfig { k: 3 }).unwrap_err();
        assert!(matches!(err, AnalysisError::Map(_)), "{err:?}");
        assert!(build_emotion_map_from_features(&toy_rows(), &MapConfig { k: 13 }).is_err());
    }

    #[test]
    fn members_classify_to_their_cluster() {
        let rows = toy_rows();
        let map = build_emotion_map_from_features(&rows, &MapConfig { k: 4 }).unwrap();
        for (id, _, f) in &rows {
            let c = classify_features(&map, f);
            assert_eq!(c.cluster, map.member(id).unwrap().cluster);
        }
    }

    #[test]
    fn parse_rejects_damage() {
        let map = build_emotion_map_from_features(&toy_rows(), &MapConfig { k: 4 }).unwrap();
        let text = map.to_text();
        assert!(EmotionMap::parse("").is_err());
        assert!(EmotionMap::parse(&text.replace("#hsmap version=1", "#hsmap version=9")).is_err());
        assert!(EmotionMap::parse(&text.replace("clusters=4", "clusters=5")).is_err());
        assert!(EmotionMap::parse(&text.replace("emotion=sad", "emotion=angry")).is_err());
        let no_loading: String = text.lines().filter(|l| !l.starts_with("loading 2")).map(|l| format!("{l}\n")).collect();
        assert!(EmotionMap::parse(&no_loading).is_err());
    }
}
