//! Report document types and the human-readable table rendering.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanRow {
    pub defense: String,
    pub accuracy_pct: f64,
    pub f1_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub attack: String,
    pub mode: String,
    pub strategy: String,
    pub defense: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub evaluated: usize,
    pub successes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub robustness_pct: f64,
    pub clean_accuracy_pct: f64,
    pub clean_f1_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Adversarial target labels used by targeted cells.
    pub targets: Vec<String>,
    pub clean: Vec<CleanRow>,
    pub cells: Vec<CellRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
}

impl RobustnessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(json: &str) -> Result<RobustnessReport, serde_json::Error> {
        serde_json::from_str(json)
    }

    /// Aligned-text rendering of the same content.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.targets.is_empty() {
            out.push_str(&format!("targets: {}\n\n", self.targets.join(", ")));
        }
        out.push_str("== Clean performance (not under attack) ==\n");
        let w = self
            .clean
            .iter()
            .map(|r| r.defense.len())
            .chain(self.cells.iter().map(|c| c.defense.len()))
            .max()
            .unwrap_or(10)
            .max("defense".len());
        out.push_str(&format!("{:w$}  {:>9}  {:>7}\n", "defense", "accuracy%", "F1%"));
        for row in &self.clean {
            out.push_str(&format!(
                "{:w$}  {:>9.2}  {:>7.2}\n",
                row.defense, row.accuracy_pct, row.f1_pct
            ));
        }
        out.push_str("\n== Attacks ==\n");
        let aw = self
            .cells
            .iter()
            .map(|c| c.attack.len())
            .max()
            .unwrap_or(6)
            .max("attack".len());
        let tw = self
            .cells
            .iter()
            .filter_map(|c| c.target.as_ref().map(|t| t.len()))
            .max()
            .unwrap_or(1)
            .max("target".len());
        out.push_str(&format!(
            "{:aw$}  {:12}  {:9}  {:w$}  {:tw$}  {:>5}  {:>8}  {:>11}\n",
            "attack", "mode", "strategy", "defense", "target", "n", "success%", "robustness%"
        ));
        for c in &self.cells {
            out.push_str(&format!(
                "{:aw$}  {:12}  {:9}  {:w$}  {:tw$}  {:>5}  {:>8}  {:>11}\n",
                c.attack,
                c.mode,
                c.strategy,
                c.defense,
                c.target.as_deref().unwrap_or("-"),
                c.evaluated,
                c.success_pct
                    .map(|p| format!("{p:.1}"))
                    .unwrap_or_else(|| "-".into()),
                c.robustness_pct
                    .map(|p| format!("{p:.1}"))
                    .unwrap_or_else(|| "-".into()),
            ));
        }
        if !self.sweep.is_empty() {
            out.push_str("\n== Outlier-detection sigma sweep ==\n");
            out.push_str(&format!(
                "{:>8}  {:>11}  {:>9}  {:>7}\n",
                "sigma", "robustness%", "accuracy%", "F1%"
            ));
            for s in &self.sweep {
                out.push_str(&format!(
                    "{:>8.3}  {:>11.1}  {:>9.2}  {:>7.2}\n",
                    s.sigma, s.robustness_pct, s.clean_accuracy_pct, s.clean_f1_pct
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let report = RobustnessReport {
            targets: vec!["sum".into()],
            clean: vec![CleanRow {
                defense: "no_defense".into(),
                accuracy_pct: 95.5,
                f1_pct: 97.25,
            }],
            cells: vec![CellRow {
                attack: "damp".into(),
                mode: "targeted".into(),
                strategy: "var_name".into(),
                defense: "no_defense".into(),
                target: Some("sum".into()),
                evaluated: 40,
                successes: 13,
                robustness_pct: Some(67.5),
                success_pct: Some(32.5),
            }],
            sweep: vec![],
        };
        let back = RobustnessReport::from_json(&report.to_json()).unwrap();
        assert_eq!(report, back);
        let text = report.to_text();
        assert!(text.contains("no_defense"));
        assert!(text.contains("67.5"));
    }
}
