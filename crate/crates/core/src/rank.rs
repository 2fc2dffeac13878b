//! Rankings by score, Kendall rank correlation, and calibration of the
//! combination weight against human judgements.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::ScoreReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    SRf,
    SB,
    SAlpha,
    D2,
}

impl RankKey {
    pub const ALL: [RankKey; 4] = [RankKey::SRf, RankKey::SB, RankKey::SAlpha, RankKey::D2];

    pub fn name(self) -> &'static str {
        match self {
            RankKey::SRf => "s_rf",
            RankKey::SB => "s_b",
            RankKey::SAlpha => "s_alpha",
            RankKey::D2 => "d2",
        }
    }

    /// Higher values mean better camouflage for the scores; a lower distance does.
    pub fn descending(self) -> bool {
        self != RankKey::D2
    }

    pub fn value(self, r: &ScoreReport) -> Option<f64> {
        match self {
            RankKey::SRf => Some(r.s_rf),
            RankKey::SB => Some(r.s_b),
            RankKey::SAlpha => Some(r.s_alpha),
            RankKey::D2 => r.d2,
        }
    }

    /// Value oriented so that higher means better camouflage.
    pub fn camouflage_value(self, r: &ScoreReport) -> Option<f64> {
        self.value(r).map(|v| if self.descending() { v } else { -v })
    }
}

impl std::fmt::Display for RankKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RankKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown rank key {s:?}; expected s_rf, s_b, s_alpha or d2")))
    }
}

/// Example ids from best to worst camouflage under `key`. Equal values are
/// ordered by id; examples without a value (no `d2`) come last.
pub fn rank(reports: &[ScoreReport], key: RankKey) -> Result<Vec<String>> {
    if reports.is_empty() {
        return Err(Error::Parameter("nothing to rank".into()));
    }
    let mut rows: Vec<(Option<f64>, &str)> = reports
        .iter()
        .map(|r| (key.camouflage_value(r), r.example_id.as_str()))
        .collect();
    rows.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.1.cmp(b.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(b.1),
    });
    Ok(rows.into_iter().map(|r| r.1.to_string()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauVariant {
    A,
    #[default]
    B,
}

/// Pair counts over `n` paired observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub pairs: u64,
    /// Pairs tied in the first variable (including joint ties).
    pub ties_a: u64,
    /// Pairs tied in the second variable (including joint ties).
    pub ties_b: u64,
    pub ties_joint: u64,
    pub discordant: u64,
}

impl PairCounts {
    pub fn concordant(&self) -> u64 {
        self.pairs + self.ties_joint - self.ties_a - self.ties_b - self.discordant
    }

    pub fn tau(&self, variant: TauVariant) -> Result<f64> {
        let num = self.concordant() as f64 - self.discordant as f64;
        let den = match variant {
            TauVariant::A => self.pairs as f64,
            TauVariant::B => (((self.pairs - self.ties_a) as f64) * ((self.pairs - self.ties_b) as f64)).sqrt(),
        };
        if den == 0.0 {
            return Err(Error::Degenerate("a ranking is entirely tied; Kendall tau is undefined".into()));
        }
        Ok(num / den)
    }
}

/// O(n^2) pair enumeration.
pub fn pair_counts_brute(a: &[f64], b: &[f64]) -> PairCounts {
    assert_eq!(a.len(), b.len());
    let n = a.len() as u64;
    let mut c = PairCounts {
        pairs: n * n.saturating_sub(1) / 2,
        ties_a: 0,
        ties_b: 0,
        ties_joint: 0,
        discordant: 0,
    };
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let ta = a[i] == a[j];
            let tb = b[i] == b[j];
            c.ties_a += ta as u64;
            c.ties_b += tb as u64;
            c.ties_joint += (ta && tb) as u64;
            if !ta && !tb && ((a[i] < a[j]) != (b[i] < b[j])) {
                c.discordant += 1;
            }
        }
    }
    c
}

/// O(n log n) counts: sort by `(a, b)`, then count inversions of `b` with a
/// merge sort.
pub fn pair_counts_fast(a: &[f64], b: &[f64]) -> PairCounts {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let tie_pairs = |eq: &dyn Fn(usize, usize) -> bool, order: &[usize]| -> u64 {
        let mut total = 0u64;
        let mut run = 1u64;
        for k in 1..=order.len() {
            if k < order.len() && eq(order[k - 1], order[k]) {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total
    };
    let ties_a = tie_pairs(&|i, j| a[i] == a[j], &idx);
    let ties_joint = tie_pairs(&|i, j| a[i] == a[j] && b[i] == b[j], &idx);

    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut seq, &mut buf);
    let sorted_idx: Vec<usize> = (0..n).collect();
    let ties_b = tie_pairs(&|i, j| seq[i] == seq[j], &sorted_idx);

    PairCounts {
        pairs: (n as u64) * (n as u64).saturating_sub(1) / 2,
        ties_a,
        ties_b,
        ties_joint,
        discordant,
    }
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau between paired value sequences (higher = better in both).
pub fn kendall_tau_values(a: &[f64], b: &[f64], variant: TauVariant) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} observations", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Degenerate("Kendall tau needs at least 2 observations".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Parameter("ranking values contain NaN".into()));
    }
    pair_counts_fast(a, b).tau(variant)
}

/// Kendall tau between two `(id, value)` lists over the same id set.
pub fn kendall_tau(a: &[(String, f64)], b: &[(String, f64)], variant: TauVariant) -> Result<f64> {
    let ma = id_map(a)?;
    let mb = id_map(b)?;
    let ka: BTreeSet<&str> = ma.keys().copied().collect();
    let kb: BTreeSet<&str> = mb.keys().copied().collect();
    if ka != kb {
        return Err(Error::IdMismatch {
            only_first: ka.difference(&kb).map(|s| s.to_string()).collect(),
            only_second: kb.difference(&ka).map(|s| s.to_string()).collect(),
        });
    }
    let va: Vec<f64> = ka.iter().map(|k| ma[k]).collect();
    let vb: Vec<f64> = ka.iter().map(|k| mb[k]).collect();
    kendall_tau_values(&va, &vb, variant)
}

fn id_map(v: &[(String, f64)]) -> Result<HashMap<&str, f64>> {
    let mut m = HashMap::with_capacity(v.len());
    for (id, x) in v {
        if m.insert(id.as_str(), *x).is_some() {
            return Err(Error::Consistency(format!("duplicate id {id}")));
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanMeasure {
    /// A rating where higher means better camouflage.
    Score,
    /// Time needed to find the object; longer means better camouflage.
    TimeSeconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRanking {
    pub measure: HumanMeasure,
    pub entries: Vec<(String, f64)>,
}

impl HumanRanking {
    /// Reads a CSV with header `id,score` or `id,time_seconds`.
    pub fn load(path: impl AsRef<Path>) -> Result<HumanRanking> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
        let measure = match (header.get(0).map(str::trim), header.get(1).map(str::trim), header.len()) {
            (Some("id"), Some("score"), 2) => HumanMeasure::Score,
            (Some("id"), Some("time_seconds"), 2) => HumanMeasure::TimeSeconds,
            _ => {
                return Err(Error::format(
                    path,
                    format!("header must be `id,score` or `id,time_seconds`, found {:?}", header.iter().collect::<Vec<_>>()),
                ))
            }
        };
        let mut entries = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let id = rec.get(0).unwrap_or("").trim().to_string();
            let v: f64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::format(path, format!("row {}: value is not a finite number", line + 2)))?;
            entries.push((id, v));
        }
        Ok(HumanRanking { measure, entries })
    }

    /// Values where higher means better camouflage.
    pub fn camouflage_values(&self) -> Vec<(String, f64)> {
        self.entries.clone()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
            Error::io(path, io)
        }
        _ => Error::format(path, e.to_string()),
    }
}

/// Tau of each key's ranking against the human ranking.
pub fn compare_with_human(
    reports: &[ScoreReport],
    human: &HumanRanking,
    variant: TauVariant,
) -> Result<Vec<(RankKey, Result<f64>)>> {
    let h = human.camouflage_values();
    let ids: BTreeSet<&str> = reports.iter().map(|r| r.example_id.as_str()).collect();
    let hids: BTreeSet<&str> = h.iter().map(|e| e.0.as_str()).collect();
    if ids != hids {
        return Err(Error::IdMismatch {
            only_first: ids.difference(&hids).map(|s| s.to_string()).collect(),
            only_second: hids.difference(&ids).map(|s| s.to_string()).collect(),
        });
    }
    Ok(RankKey::ALL
        .into_iter()
        .map(|k| {
            let vals: Option<Vec<(String, f64)>> = reports
                .iter()
                .map(|r| k.camouflage_value(r).map(|v| (r.example_id.clone(), v)))
                .collect();
            let tau = match vals {
                Some(v) => kendall_tau(&v, &h, variant),
                None => Err(Error::Degenerate(format!("some examples have no {k}"))),
            };
            (k, tau)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub tau: f64,
    /// `(alpha, tau)` for every grid point where tau is defined.
    pub grid: Vec<(f64, f64)>,
}

/// The grid `0.00, 0.05, ..., 1.00`.
pub fn alpha_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

/// Grid search for the weight whose combined-score ranking best agrees with
/// the human ranking. Ties go to the smallest weight.
pub fn calibrate_alpha(
    reports: &[ScoreReport],
    human: &HumanRanking,
    variant: TauVariant,
) -> Result<Calibration> {
    if reports.len() < 3 {
        return Err(Error::Parameter(format!(
            "calibration needs at least 3 examples, got {}",
            reports.len()
        )));
    }
    let h = human.camouflage_values();
    if h.iter().all(|e| e.1 == h[0].1) {
        return Err(Error::Degenerate("human ranking is entirely tied".into()));
    }
    let mut grid = Vec::new();
    for alpha in alpha_grid() {
        let vals: Vec<(String, f64)> = reports
            .iter()
            .map(|r| (r.example_id.clone(), (1.0 - alpha) * r.s_rf + alpha * r.s_b))
            .collect();
        match kendall_tau(&vals, &h, variant) {
            Ok(t) => grid.push((alpha, t)),
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let best = grid
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, p| match best {
            Some(b) if b.1 >= p.1 => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| Error::Degenerate("combined scores are tied for every weight".into()))?;
    Ok(Calibration {
        alpha: best.0,
        tau: best.1,
        grid,
    })
}
