//! JSON and tabular renderings of an election trace.

use serde::Serialize;

use election_core::protocol::{ChannelFeedback, ElectionStatus, ElectionTrace, StationId};

use crate::table::{Meta, Table};

pub const TRACE_SCHEMA: u32 = 1;

/// Display name of a station: `A`, `B`, ... for up to 26 stations, else the id.
pub fn station_label(id: StationId, n: u32) -> String {
    if n <= 26 {
        char::from(b'A' + id as u8).to_string()
    } else {
        id.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeedbackRecord {
    Silence,
    Success { station: StationId },
    Collision,
}

impl From<ChannelFeedback> for FeedbackRecord {
    fn from(f: ChannelFeedback) -> Self {
        match f {
            ChannelFeedback::Silence => FeedbackRecord::Silence,
            ChannelFeedback::Success(station) => FeedbackRecord::Success { station },
            ChannelFeedback::Collision => FeedbackRecord::Collision,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub time_unit: usize,
    pub active: Vec<StationId>,
    pub non_active: Vec<StationId>,
    pub eliminated: Vec<StationId>,
    pub feedback: FeedbackRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub schema: u32,
    pub meta: Meta,
    pub n: u32,
    pub labels: Vec<String>,
    pub leader: Option<StationId>,
    pub coin_flip_rounds: u64,
    pub time_units: u64,
    pub truncated: bool,
    pub rounds: Vec<RoundRecord>,
}

impl TraceRecord {
    pub fn new(trace: &ElectionTrace, meta: Meta) -> Self {
        Self {
            schema: TRACE_SCHEMA,
            meta,
            n: trace.n,
            labels: (0..trace.n).map(|id| station_label(id, trace.n)).collect(),
            leader: trace.leader,
            coin_flip_rounds: trace.coin_flip_rounds,
            time_units: trace.time_units,
            truncated: trace.status == ElectionStatus::Truncated,
            rounds: trace
                .rounds
                .iter()
                .enumerate()
                .map(|(t, r)| RoundRecord {
                    time_unit: t,
                    active: r.active.clone(),
                    non_active: r.non_active.clone(),
                    eliminated: r.eliminated.clone(),
                    feedback: r.feedback.into(),
                })
                .collect(),
        }
    }
}

fn labels(ids: &[StationId], n: u32) -> String {
    ids.iter().map(|&id| station_label(id, n)).collect::<Vec<_>>().join(if n <= 26 { "" } else { " " })
}

/// One row per time unit, stations shown by label.
pub fn trace_table(trace: &ElectionTrace, meta: Meta) -> Table {
    let mut t = Table::new(meta, &["time_unit", "active", "non_active", "eliminated", "feedback"]);
    let n = trace.n;
    for (i, r) in trace.rounds.iter().enumerate() {
        let fb = match r.feedback {
            ChannelFeedback::Silence => "silence".to_string(),
            ChannelFeedback::Collision => "collision".to_string(),
            ChannelFeedback::Success(id) => format!("success {}", station_label(id, n)),
        };
        t.push(vec![
            i.into(),
            labels(&r.active, n).as_str().into(),
            labels(&r.non_active, n).as_str().into(),
            labels(&r.eliminated, n).as_str().into(),
            fb.as_str().into(),
        ]);
    }
    let leader = trace.leader.map_or("none".to_string(), |id| station_label(id, n));
    t.note(format!(
        "leader={leader} coin_flip_rounds={} time_units={}",
        trace.coin_flip_rounds, trace.time_units
    ));
    t
}
