use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FocalLocalization,
    TestLocalization,
    ActionPlusGenerate,
    ExtraVariants,
}

impl Stage {
    pub const ALL: [Stage; 4] =
        [Stage::FocalLocalization, Stage::TestLocalization, Stage::ActionPlusGenerate, Stage::ExtraVariants];

    pub fn label(self) -> &'static str {
        match self {
            Stage::FocalLocalization => "Focal Localization",
            Stage::TestLocalization => "Test Localization",
            Stage::ActionPlusGenerate => "Action + Generate",
            Stage::ExtraVariants => "Additional Tests (T2-T5)",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Dollar prices per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceConfig {
    pub per_1k_prompt: f64,
    pub per_1k_completion: f64,
}

impl Default for PriceConfig {
    /// GPT-4o list prices ($2.50 / $10 per million tokens).
    fn default() -> Self {
        PriceConfig { per_1k_prompt: 0.0025, per_1k_completion: 0.01 }
    }
}

impl PriceConfig {
    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        (prompt_tokens as f64 * self.per_1k_prompt + completion_tokens as f64 * self.per_1k_completion) / 1000.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: f64,
}

impl StageTotals {
    fn absorb(&mut self, other: &StageTotals) {
        self.calls += other.calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.cost += other.cost;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub prices: PriceConfig,
    stages: [StageTotals; 4],
}

impl CostLedger {
    pub fn new(prices: PriceConfig) -> Self {
        CostLedger { prices, stages: Default::default() }
    }

    pub fn record(&mut self, stage: Stage, prompt_tokens: u64, completion_tokens: u64) {
        let cost = self.prices.cost(prompt_tokens, completion_tokens);
        let s = &mut self.stages[stage.index()];
        s.calls += 1;
        s.prompt_tokens += prompt_tokens;
        s.completion_tokens += completion_tokens;
        s.cost += cost;
    }

    /// Add a pre-computed stage entry, e.g. figures carried over from another run.
    pub fn inject(&mut self, stage: Stage, totals: StageTotals) {
        self.stages[stage.index()].absorb(&totals);
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for stage in Stage::ALL {
            self.stages[stage.index()].absorb(&other.stages[stage.index()]);
        }
    }

    pub fn stage(&self, stage: Stage) -> &StageTotals {
        &self.stages[stage.index()]
    }

    pub fn total(&self) -> StageTotals {
        let mut t = StageTotals::default();
        for s in &self.stages {
            t.absorb(s);
        }
        t
    }

    pub fn total_calls(&self) -> u64 {
        self.stages.iter().map(|s| s.calls).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub component: String,
    #[serde(flatten)]
    pub totals: StageTotals,
    pub cost_per_sample: Option<f64>,
}

/// Per-stage rows plus the single-pipeline (T1) and ensemble (T1-T5) totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub samples: Option<u64>,
    pub rows: Vec<CostRow>,
}

fn row(component: &str, totals: StageTotals, samples: Option<u64>) -> CostRow {
    let cost_per_sample = samples.filter(|n| *n > 0).map(|n| totals.cost / n as f64);
    CostRow { component: component.to_string(), totals, cost_per_sample }
}

pub fn cost_report(ledger: &CostLedger, samples: Option<u64>) -> CostReport {
    let mut pipeline = StageTotals::default();
    for stage in [Stage::FocalLocalization, Stage::TestLocalization, Stage::ActionPlusGenerate] {
        pipeline.absorb(ledger.stage(stage));
    }
    let mut ensemble = pipeline.clone();
    ensemble.absorb(ledger.stage(Stage::ExtraVariants));
    CostReport {
        samples,
        rows: vec![
            row(Stage::FocalLocalization.label(), ledger.stage(Stage::FocalLocalization).clone(), samples),
            row(Stage::TestLocalization.label(), ledger.stage(Stage::TestLocalization).clone(), samples),
            row(Stage::ActionPlusGenerate.label(), ledger.stage(Stage::ActionPlusGenerate).clone(), samples),
            row("Total (T1)", pipeline, samples),
            row(Stage::ExtraVariants.label(), ledger.stage(Stage::ExtraVariants).clone(), samples),
            row("Total (T1-T5)", ensemble, samples),
        ],
    }
}

impl CostReport {
    pub fn row(&self, component: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.component == component)
    }

    /// Plain-text table with dollar amounts at two decimals.
    pub fn render(&self) -> String {
        let mut out = format!("{:<26} {:>6} {:>12} {:>12} {:>10} {:>12}\n", "Component", "Calls", "Prompt tok", "Compl tok", "Cost", "Cost/Sample");
        for r in &self.rows {
            let per = r.cost_per_sample.map_or("-".to_string(), |c| format!("${c:.2}"));
            out.push_str(&format!(
                "{:<26} {:>6} {:>12} {:>12} {:>10} {:>12}\n",
                r.component,
                r.totals.calls,
                r.totals.prompt_tokens,
                r.totals.completion_tokens,
                format!("${:.2}", r.totals.cost),
                per
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_reports_zeros() {
        let report = cost_report(&CostLedger::default(), Some(10));
        assert_eq!(report.rows.len(), 6);
        for r in &report.rows {
            assert_eq!(r.totals, StageTotals::default());
            assert_eq!(r.cost_per_sample, Some(0.0));
        }
    }

    #[test]
    fn two_calls_at_list_prices() {
        let mut ledger = CostLedger::new(PriceConfig { per_1k_prompt: 2.5e-3, per_1k_completion: 10e-3 });
        ledger.record(Stage::TestLocalization, 500, 100);
        ledger.record(Stage::TestLocalization, 500, 100);
        let expected = 2.0 * (500.0 * 2.5 + 100.0 * 10.0) / 1e6;
        assert!((ledger.total().cost - expected).abs() < 1e-15);
        assert!((expected - 0.0045).abs() < 1e-15);
        assert_eq!(ledger.total_calls(), 2);
    }
}
