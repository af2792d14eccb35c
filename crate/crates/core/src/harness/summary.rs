//! Per-scheme episode statistics and their JSON / CSV renderings.

use std::collections::BTreeMap;

use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::controller::{EpisodeRecord, EpisodeStatus, Scheme};
use crate::error::{DrpiError, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Arrive-time statistics over the successful episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArriveStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Nearest-rank 95th percentile.
    pub p95: f64,
}

/// `None` for an empty sample.
pub fn arrive_stats(times: &[f64]) -> Option<ArriveStats> {
    if times.is_empty() {
        return None;
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (0.95 * n).ceil() as usize;
    Some(ArriveStats {
        mean,
        std: var.sqrt(),
        p95: sorted[rank.clamp(1, sorted.len()) - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSummary {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    /// Percent of episodes that reached the goal.
    pub success_rate: f64,
    pub arrive: Option<ArriveStats>,
}

impl SchemeSummary {
    pub fn arrive_mean(&self) -> Option<f64> {
        self.arrive.map(|a| a.mean)
    }
}

/// Summary keyed by scheme name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSummary {
    pub schemes: BTreeMap<Scheme, SchemeSummary>,
}

impl ExperimentSummary {
    pub fn get(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.schemes.get(&scheme)
    }

    /// Pretty JSON with every float in 17 significant digits and `null` for
    /// undefined arrive statistics.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }
}

/// Summarizes the records of a single scheme.
pub fn summarize_scheme(records: &[&EpisodeRecord]) -> Result<SchemeSummary> {
    if records.is_empty() {
        return Err(DrpiError::Empty("episode records"));
    }
    let count = |s: EpisodeStatus| records.iter().filter(|r| r.status == s).count();
    let times: Vec<f64> = records.iter().filter_map(|r| r.arrive_time).collect();
    let successes = count(EpisodeStatus::Success);
    Ok(SchemeSummary {
        episodes: records.len(),
        successes,
        collisions: count(EpisodeStatus::Collision),
        timeouts: count(EpisodeStatus::Timeout),
        success_rate: 100.0 * successes as f64 / records.len() as f64,
        arrive: arrive_stats(&times),
    })
}

/// Groups records by scheme and summarizes each group.
pub fn summarize(records: &[EpisodeRecord]) -> Result<ExperimentSummary> {
    if records.is_empty() {
        return Err(DrpiError::Empty("episode records"));
    }
    let mut groups: BTreeMap<Scheme, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.scheme).or_default().push(r);
    }
    let mut schemes = BTreeMap::new();
    for (scheme, group) in groups {
        schemes.insert(scheme, summarize_scheme(&group)?);
    }
    Ok(ExperimentSummary { schemes })
}

struct Float(f64);

impl Serialize for Float {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(fmt_f64(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl Serialize for SchemeSummary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SchemeSummary", 9)?;
        st.serialize_field("success_rate", &Float(self.success_rate))?;
        st.serialize_field("arrive_mean", &self.arrive.map(|a| Float(a.mean)))?;
        st.serialize_field("arrive_std", &self.arrive.map(|a| Float(a.std)))?;
        st.serialize_field("arrive_p95", &self.arrive.map(|a| Float(a.p95)))?;
        st.serialize_field("episodes", &self.episodes)?;
        st.serialize_field("successes", &self.successes)?;
        st.serialize_field("collisions", &self.collisions)?;
        st.serialize_field("timeouts", &self.timeouts)?;
        st.end()
    }
}

impl Serialize for ExperimentSummary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.schemes.len()))?;
        for (scheme, summary) in &self.schemes {
            map.serialize_entry(scheme.as_str(), summary)?;
        }
        map.end()
    }
}

pub const EPISODES_HEADER: &str =
    "episode,scheme,status,arrive_time_s,realized_state_cost,realized_total_cost";

/// `episodes.csv` body for records tagged with their episode index.
pub fn episodes_csv(rows: &[(u64, &EpisodeRecord)]) -> String {
    let mut out = String::from(EPISODES_HEADER);
    out.push('\n');
    for (episode, r) in rows {
        let arrive = r.arrive_time.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{episode},{},{},{arrive},{},{}\n",
            r.scheme,
            r.status,
            fmt_f64(r.realized_state_cost),
            fmt_f64(r.realized_total_cost)
        ));
    }
    out
}

/// Per-step trajectory table; the final state has empty control columns.
pub fn trajectory_csv(record: &EpisodeRecord, dt: f64) -> String {
    let n = record.states.first().map_or(0, Vec::len);
    let k = record.controls.first().map_or(0, Vec::len);
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..k).map(|i| format!("u{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for (step, x) in record.states.iter().enumerate() {
        let mut cells = vec![step.to_string(), fmt_f64(step as f64 * dt)];
        cells.extend(x.iter().map(|v| fmt_f64(*v)));
        match record.controls.get(step) {
            Some(u) => cells.extend(u.iter().map(|v| fmt_f64(*v))),
            None => cells.extend(std::iter::repeat_n(String::new(), k)),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
