use serde::{Deserialize, Serialize};

use crate::attack::{CertificateKind, SearchStats};
use crate::data::Label;

pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to six significant digits. Reports store rounded values so that
/// printing and parsing them back is lossless.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_index: usize,
    pub true_label: Label,
    pub predicted_label: Label,
    /// `None` when an attack found no label-changing perturbation.
    pub epsilon: Option<f64>,
    pub kind: CertificateKind,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    /// Verifier only: the `(same-class, other-class)` pair attaining the bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding_pair: Option<(usize, usize)>,
    pub misclassified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub stats: SearchStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Over correctly classified queries with a result; `None` when there
    /// are none.
    pub mean_epsilon: Option<f64>,
    pub count: usize,
    pub correctly_classified: usize,
    pub attack_failures: usize,
    pub total_wall_time: f64,
    pub mean_subproblems_solved: f64,
    pub mean_subproblems_screened: f64,
}

impl Aggregates {
    pub fn from_records(records: &[QueryRecord], total_wall_time: f64) -> Self {
        let correct: Vec<&QueryRecord> = records.iter().filter(|r| !r.misclassified).collect();
        let solved: Vec<f64> = correct.iter().filter_map(|r| r.epsilon).collect();
        let n = correct.len();
        let mean = |f: &dyn Fn(&QueryRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                round_sig(correct.iter().map(|r| f(r)).sum::<f64>() / n as f64)
            }
        };
        Self {
            mean_epsilon: (!solved.is_empty()).then(|| round_sig(solved.iter().sum::<f64>() / solved.len() as f64)),
            count: records.len(),
            correctly_classified: n,
            attack_failures: n - solved.len(),
            total_wall_time: round_sig(total_wall_time),
            mean_subproblems_solved: mean(&|r| r.stats.subproblems_solved as f64),
            mean_subproblems_screened: mean(&|r| r.stats.subproblems_screened as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub schema_version: u32,
    pub command: String,
    pub method: String,
    pub k: usize,
    pub norm: String,
    pub records: Vec<QueryRecord>,
    pub aggregates: Aggregates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub kind: CertificateKind,
    /// Over queries where the method produced a value.
    pub mean_epsilon: Option<f64>,
    pub failures: usize,
    /// Mean over repeats of the total runtime across all queries, seconds.
    pub runtime: f64,
    pub mean_subproblems_solved: f64,
    pub mean_subproblems_screened: f64,
}

/// Exact-search statistics under one screening / sorting setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchProfile {
    pub n_scr: usize,
    pub sorted: bool,
    pub mean_subproblems_solved: f64,
    pub mean_subproblems_screened: f64,
    pub mean_subproblems_pruned: f64,
    pub runtime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub k: usize,
    pub seed: u64,
    pub query_indices: Vec<usize>,
    pub rows: Vec<BenchRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_scr_sweep: Vec<SearchProfile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sort_ablation: Vec<SearchProfile>,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "K={}  queries={}\n{:<12} {:>14} {:>12} {:>10} {:>10}\n",
            self.k,
            self.query_indices.len(),
            "method",
            "perturbation",
            "runtime(s)",
            "solved",
            "screened"
        );
        for r in &self.rows {
            let eps = r.mean_epsilon.map_or("-".to_string(), |v| format!("{v:.6}"));
            let failed = if r.failures > 0 { format!("  ({} failed)", r.failures) } else { String::new() };
            out.push_str(&format!(
                "{:<12} {:>14} {:>12.3} {:>10.3} {:>10.3}{failed}\n",
                r.method, eps, r.runtime, r.mean_subproblems_solved, r.mean_subproblems_screened
            ));
        }
        for (title, profiles) in [("n_scr sweep", &self.n_scr_sweep), ("sorting", &self.sort_ablation)] {
            if profiles.is_empty() {
                continue;
            }
            out.push_str(&format!(
                "\n{title}\n{:<8} {:<7} {:>10} {:>10} {:>10} {:>12}\n",
                "n_scr", "sorted", "solved", "screened", "pruned", "runtime(s)"
            ));
            for p in profiles {
                out.push_str(&format!(
                    "{:<8} {:<7} {:>10.3} {:>10.3} {:>10.3} {:>12.3}\n",
                    p.n_scr, p.sorted, p.mean_subproblems_solved, p.mean_subproblems_screened, p.mean_subproblems_pruned, p.runtime
                ));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,kind,mean_epsilon,failures,runtime,mean_subproblems_solved,mean_subproblems_screened\n");
        for r in &self.rows {
            let eps = r.mean_epsilon.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{:?},{eps},{},{},{},{}\n",
                r.method, r.kind, r.failures, r.runtime, r.mean_subproblems_solved, r.mean_subproblems_screened
            ));
        }
        out
    }

    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("n_scr,sorted,mean_subproblems_solved,mean_subproblems_screened,mean_subproblems_pruned,runtime\n");
        for p in self.n_scr_sweep.iter().chain(&self.sort_ablation) {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.n_scr, p.sorted, p.mean_subproblems_solved, p.mean_subproblems_screened, p.mean_subproblems_pruned, p.runtime
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn rounding() {
        assert_eq!(round_sig(0.70710678), 0.707107);
        assert_eq!(round_sig(1234567.0), 1234570.0);
        assert_eq!(round_sig(0.0), 0.0);
        let x = round_sig(std::f64::consts::PI * 1e-7);
        let back: f64 = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn aggregates_skip_misclassified() {
        let rec = |eps: f64, mis: bool| QueryRecord {
            query_index: 0,
            true_label: 1,
            predicted_label: if mis { 2 } else { 1 },
            epsilon: Some(eps),
            kind: CertificateKind::Exact,
            method: "exact".into(),
            delta: None,
            binding_pair: None,
            misclassified: mis,
            failure: None,
            stats: SearchStats::default(),
        };
        let a = Aggregates::from_records(&[rec(1.0, false), rec(0.0, true), rec(2.0, false)], 0.0);
        assert_eq!(a.mean_epsilon, Some(1.5));
        assert_eq!((a.count, a.correctly_classified), (3, 2));
        assert_eq!(Aggregates::from_records(&[rec(0.0, true)], 0.0).mean_epsilon, None);
    }
}
