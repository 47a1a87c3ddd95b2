//! Reference implementations written independently of `handshake-core`,
//! used only to check it. Each favors the most literal algorithm over speed.

#![allow(clippy::needless_range_loop)]

use num::bigint::BigInt;
use num::rational::BigRational;
use num::ToPrimitive;

/// CRC-16 (poly 0x8005, init 0, no reflection), one bit at a time.
pub fn crc16_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0;
    for &byte in data {
        for bit in (0..8).rev() {
            let in_bit = (byte >> bit) & 1 == 1;
            let top = crc & 0x8000 != 0;
            crc <<= 1;
            if top != in_bit {
                crc ^= 0x8005;
            }
        }
    }
    crc
}

/// `rest + round_half_away_from_zero(intensity * span)` in exact rational
/// arithmetic; `None` if the input is not a finite float.
pub fn goal_exact(rest: i32, span: i32, intensity: f64) -> Option<i64> {
    let x = BigRational::from_float(intensity)?;
    let product = x * BigRational::from_integer(BigInt::from(span));
    let rounded = product.round().to_integer();
    (rounded + BigInt::from(rest)).to_i64()
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. `vectors[k]` pairs with `values[k]`.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // m <- Jᵀ m J with J the rotation in the (p, q) plane
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance of the rows, written out longhand.
pub fn covariance_naive(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let p = x[0].len();
    let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| x.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0))
                .collect()
        })
        .collect()
}

/// Flips a vector so its largest-magnitude entry (first on ties) is positive.
pub fn sign_normalized(v: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j].abs() > v[best].abs() {
            best = j;
        }
    }
    if v[best] < 0.0 {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

fn ess(points: &[Vec<f64>], members: &[usize]) -> f64 {
    let dim = points[0].len();
    let n = members.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|d| members.iter().map(|&i| points[i][d]).sum::<f64>() / n)
        .collect();
    members
        .iter()
        .map(|&i| (0..dim).map(|d| (points[i][d] - mean[d]).powi(2)).sum::<f64>())
        .sum()
}

/// One merge of the reference clustering: `(left, right, height, size)`
/// with the same id convention as the implementation under test.
pub type OracleMerge = (usize, usize, f64, usize);

/// Ward clustering that recomputes every candidate's increase in total
/// within-cluster sum of squares from the raw members at every step.
pub fn ward_direct(points: &[Vec<f64>]) -> Vec<OracleMerge> {
    let n = points.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut union = clusters[a].1.clone();
                union.extend(&clusters[b].1);
                let delta = ess(points, &union) - ess(points, &clusters[a].1) - ess(points, &clusters[b].1);
                let (ia, ib) = (clusters[a].0, clusters[b].0);
                let key = (ia.min(ib), ia.max(ib));
                let better = match best {
                    None => true,
                    Some((d, l, r, _, _)) => delta < d || (delta == d && key < (l, r)),
                };
                if better {
                    best = Some((delta, key.0, key.1, a, b));
                }
            }
        }
        let (delta, left, right, a, b) = best.expect("two clusters remain");
        let (_, mb) = clusters.remove(b);
        let (_, ma) = clusters.remove(a);
        let mut members = ma;
        members.extend(mb);
        merges.push((left, right, delta, members.len()));
        clusters.push((n + step, members));
    }
    merges
}
