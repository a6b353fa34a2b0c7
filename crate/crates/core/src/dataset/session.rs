use serde::{Deserialize, Serialize};

use super::{InteractionRecord, Session, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionRule {
    /// One session per UTC day.
    #[default]
    CalendarDay,
    /// New session when the inter-arrival time exceeds `minutes`.
    Gap { minutes: u64 },
}

impl SessionRule {
    pub fn describe(&self) -> String {
        match self {
            SessionRule::CalendarDay => "calendar_day".into(),
            SessionRule::Gap { minutes } => format!("gap({minutes}m)"),
        }
    }
}

/// Splits one user's time-sorted records into sessions.
pub fn sessionize(records: &[InteractionRecord], rule: SessionRule) -> Vec<Session> {
    let mut sessions = Vec::new();
    let mut current: Vec<InteractionRecord> = Vec::new();
    for r in records {
        let split = match current.last() {
            None => false,
            Some(prev) => match rule {
                SessionRule::CalendarDay => {
                    prev.timestamp.div_euclid(SECONDS_PER_DAY)
                        != r.timestamp.div_euclid(SECONDS_PER_DAY)
                }
                SessionRule::Gap { minutes } => r.timestamp - prev.timestamp > minutes as i64 * 60,
            },
        };
        if split {
            sessions.push(Session::from_records(std::mem::take(&mut current)));
        }
        current.push(r.clone());
    }
    if !current.is_empty() {
        sessions.push(Session::from_records(current));
    }
    sessions
}
