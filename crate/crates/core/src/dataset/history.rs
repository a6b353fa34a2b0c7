use serde::{Deserialize, Serialize};

use super::{InteractionRecord, Session};
use crate::simplex::ClusterSpace;

/// Line format for one interaction in a rendered history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HistoryStyle {
    /// `Time {t}: rated "{title}" {r}/5 ({clusters})`
    #[default]
    Rating,
    /// `Time {t}: watched item in ({clusters}) for {d}s`
    Duration,
}

fn number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn line(t: usize, r: &InteractionRecord, space: &ClusterSpace, style: HistoryStyle) -> String {
    let clusters = r
        .clusters
        .iter()
        .map(|&c| space.labels()[c].as_str())
        .collect::<Vec<_>>()
        .join(", ");
    match style {
        HistoryStyle::Rating => format!(
            "Time {t}: rated \"{}\" {}/5 ({clusters})",
            r.title.as_deref().unwrap_or(&r.item_id),
            number(r.weight)
        ),
        HistoryStyle::Duration => format!(
            "Time {t}: watched item in ({clusters}) for {}s",
            number(r.weight)
        ),
    }
}

/// Numbers every record in the sessions from 1 and joins the lines with
/// `";\n"`.
pub fn render_history(sessions: &[Session], space: &ClusterSpace, style: HistoryStyle) -> String {
    sessions
        .iter()
        .flat_map(|s| &s.records)
        .enumerate()
        .map(|(i, r)| line(i + 1, r, space, style))
        .collect::<Vec<_>>()
        .join(";\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_lines() {
        let space = ClusterSpace::new(["Action", "Sci-Fi", "Crime", "Drama"]).unwrap();
        let mk = |title: &str, r: f64, cl: Vec<usize>, t| InteractionRecord {
            user_id: "u".into(),
            item_id: "x".into(),
            timestamp: t,
            clusters: cl,
            weight: r,
            title: Some(title.into()),
        };
        let s = Session::from_records(vec![
            mk("Inception", 5.0, vec![0, 1], 1),
            mk("The Godfather", 4.5, vec![2, 3], 2),
        ]);
        assert_eq!(
            render_history(std::slice::from_ref(&s), &space, HistoryStyle::Rating),
            "Time 1: rated \"Inception\" 5/5 (Action, Sci-Fi);\nTime 2: rated \"The Godfather\" 4.5/5 (Crime, Drama)"
        );
        assert_eq!(
            render_history(&[s], &space, HistoryStyle::Duration),
            "Time 1: watched item in (Action, Sci-Fi) for 5s;\nTime 2: watched item in (Crime, Drama) for 4.5s"
        );
    }
}
