//! Retrieval latency benchmark: runs a query set against a graph and
//! reports per-stage latency percentiles.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tkg_core::{Graph, RerankConfig, RetrieveError};

use crate::config::SearchDefaults;

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub p50: f64,
    pub p95: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub mean: f64,
    pub max: f64,
}

impl StageStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        StageStats {
            p50: quantile(&v, 0.5),
            p95: quantile(&v, 0.95),
            q1,
            q3,
            iqr: q3 - q1,
            mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stages {
    pub search: StageStats,
    pub rerank: StageStats,
    pub construct: StageStats,
    pub total: StageStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSize {
    pub episodes: usize,
    pub entities: usize,
    pub edges: usize,
    pub communities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub graph: GraphSize,
    pub queries: usize,
    pub rerank: RerankConfig,
    /// Milliseconds, measured inside the engine.
    pub latency_ms: Stages,
    pub context_tokens: StageStats,
}

/// Runs every query once after `warmup` untimed passes over the first few.
pub fn run(graph: &Graph, queries: &[String], defaults: &SearchDefaults, warmup: usize) -> Result<BenchReport, RetrieveError> {
    let rerank = defaults.rerank.clone();
    for q in queries.iter().take(warmup) {
        graph.retrieve(&defaults.query(q.as_str()), &rerank)?;
    }
    let mut samples: [Vec<f64>; 5] = Default::default();
    for q in queries {
        let r = graph.retrieve(&defaults.query(q.as_str()), &rerank)?;
        let t = r.timings;
        for (slot, v) in samples
            .iter_mut()
            .zip([t.search_ms, t.rerank_ms, t.construct_ms, t.total_ms, r.context_tokens as f64])
        {
            slot.push(v);
        }
    }
    let s = graph.snapshot();
    Ok(BenchReport {
        graph: GraphSize {
            episodes: s.episode_count(),
            entities: s.entity_count(),
            edges: s.edge_count(),
            communities: s.community_count(),
        },
        queries: queries.len(),
        rerank,
        latency_ms: Stages {
            search: StageStats::from_samples(&samples[0]),
            rerank: StageStats::from_samples(&samples[1]),
            construct: StageStats::from_samples(&samples[2]),
            total: StageStats::from_samples(&samples[3]),
        },
        context_tokens: StageStats::from_samples(&samples[4]),
    })
}

pub fn render_table(r: &BenchReport) -> String {
    let mut out = String::new();
    let g = &r.graph;
    let _ = writeln!(
        out,
        "graph: {} episodes, {} entities, {} edges, {} communities; {} queries, rerank {:?}",
        g.episodes, g.entities, g.edges, g.communities, r.queries, r.rerank.method
    );
    let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "stage (ms)", "p50", "p95", "q1", "q3", "iqr", "max");
    let l = &r.latency_ms;
    for (name, s) in [("search", &l.search), ("rerank", &l.rerank), ("construct", &l.construct), ("total", &l.total)] {
        let _ = writeln!(
            out,
            "{name:<10} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            s.p50, s.p95, s.q1, s.q3, s.iqr, s.max
        );
    }
    let t = &r.context_tokens;
    let _ = writeln!(out, "context tokens: mean {:.0}, p95 {:.0}, max {:.0}", t.mean, t.p95, t.max);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.95), 4.8);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
        let s = StageStats::from_samples(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.q1, s.q3, s.iqr, s.mean, s.max), (2.0, 4.0, 2.0, 3.0, 5.0));
    }
}
