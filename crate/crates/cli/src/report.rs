//! Aggregate evaluation reports: per-scenario means and the success-rate
//! column, rendered as CSV and as an aligned text table.

use wisd_core::sim::Outcome;

use crate::metrics::EpisodeMetrics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub mean_pp: f64,
    pub mean_as: f64,
    pub mean_pe: f64,
    pub successes: usize,
    pub attempts: usize,
}

impl MetricsSummary {
    pub fn from_episodes(episodes: &[EpisodeMetrics]) -> Self {
        assert!(!episodes.is_empty(), "need at least one episode");
        let n = episodes.len() as f64;
        Self {
            mean_pp: episodes.iter().map(|m| m.pp).sum::<f64>() / n,
            mean_as: episodes.iter().map(|m| m.avg_speed).sum::<f64>() / n,
            mean_pe: episodes.iter().map(|m| m.path_efficiency).sum::<f64>() / n,
            successes: episodes
                .iter()
                .filter(|m| m.outcome == Outcome::Success)
                .count(),
            attempts: episodes.len(),
        }
    }

    /// Success-rate cell, e.g. `96.7(29/30)`.
    pub fn sr_string(&self) -> String {
        format!(
            "{:.1}({}/{})",
            100.0 * self.successes as f64 / self.attempts.max(1) as f64,
            self.successes,
            self.attempts
        )
    }
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub env: String,
    pub method: String,
    pub summary: MetricsSummary,
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("env,method,pp_m,as_mps,pe_pct,sr_pct,successes,attempts\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.3},{:.3},{:.1},{:.1},{},{}\n",
            r.env,
            r.method,
            r.summary.mean_pp,
            r.summary.mean_as,
            r.summary.mean_pe,
            100.0 * r.summary.successes as f64 / r.summary.attempts.max(1) as f64,
            r.summary.successes,
            r.summary.attempts
        ));
    }
    out
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let header = ["Env", "Method", "PP (m)", "AS (m/s)", "PE (%)", "SR (%)"];
    let mut cells: Vec<[String; 6]> = Vec::with_capacity(rows.len());
    for r in rows {
        cells.push([
            r.env.clone(),
            r.method.clone(),
            format!("{:.3}", r.summary.mean_pp),
            format!("{:.3}", r.summary.mean_as),
            format!("{:.1}", r.summary.mean_pe),
            r.summary.sr_string(),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (i, c) in row.iter().enumerate() {
            widths[i] = widths[i].max(c.len());
        }
    }
    let rule: String = widths
        .iter()
        .map(|w| "-".repeat(w + 2))
        .collect::<Vec<_>>()
        .join("+");
    let fmt_row = |cols: &[String]| {
        cols.iter()
            .enumerate()
            .map(|(i, c)| format!(" {:<w$} ", c, w = widths[i]))
            .collect::<Vec<_>>()
            .join("|")
    };
    let mut out = String::new();
    out.push_str(&fmt_row(&header.map(String::from)));
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for row in &cells {
        out.push_str(&fmt_row(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pp: f64, ok: bool) -> EpisodeMetrics {
        EpisodeMetrics {
            pp,
            avg_speed: 0.5,
            path_efficiency: 90.0,
            outcome: if ok { Outcome::Success } else { Outcome::Timeout },
        }
    }

    #[test]
    fn sr_formatting_matches_target_pattern() {
        let episodes: Vec<EpisodeMetrics> =
            (0..30).map(|i| m(0.1, i != 13)).collect();
        let s = MetricsSummary::from_episodes(&episodes);
        assert_eq!(s.successes, 29);
        assert_eq!(s.sr_string(), "96.7(29/30)");
    }

    #[test]
    fn zero_successes() {
        let episodes: Vec<EpisodeMetrics> = (0..5).map(|_| m(2.0, false)).collect();
        let s = MetricsSummary::from_episodes(&episodes);
        assert_eq!(s.sr_string(), "0.0(0/5)");
    }

    #[test]
    fn single_episode_means_equal_its_values() {
        let episodes = vec![m(0.25, true)];
        let s = MetricsSummary::from_episodes(&episodes);
        assert_eq!(s.mean_pp, 0.25);
        assert_eq!(s.mean_as, 0.5);
        assert_eq!(s.mean_pe, 90.0);
        assert_eq!(s.sr_string(), "100.0(1/1)");
    }

    #[test]
    fn table_contains_all_columns() {
        let rows = vec![ReportRow {
            env: "S1".into(),
            method: "proposed".into(),
            summary: MetricsSummary::from_episodes(&[m(0.2, true)]),
        }];
        let table = render_table(&rows);
        for col in ["Env", "Method", "PP (m)", "AS (m/s)", "PE (%)", "SR (%)", "100.0(1/1)"] {
            assert!(table.contains(col), "missing {col} in:\n{table}");
        }
        let csv = render_csv(&rows);
        assert!(csv.starts_with("env,method,"));
        assert!(csv.contains("S1,proposed,0.200,0.500,90.0,100.0,1,1"));
    }
}
