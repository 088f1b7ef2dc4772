use serde::{Deserialize, Serialize};

/// One long-format observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run_id: String,
    pub trial: usize,
    /// Epoch, season, population or episode index, depending on the metric.
    pub epoch: usize,
    pub metric: String,
    pub value: f64,
}

/// Append-only table of metric rows belonging to one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsTable {
    run_id: String,
    rows: Vec<MetricRow>,
}

impl MetricsTable {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            rows: Vec::new(),
        }
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn push(&mut self, trial: usize, epoch: usize, metric: impl Into<String>, value: f64) {
        self.rows.push(MetricRow {
            run_id: self.run_id.clone(),
            trial,
            epoch,
            metric: metric.into(),
            value,
        });
    }

    /// Appends another table's rows, re-labelled with this table's run id.
    pub fn extend(&mut self, other: MetricsTable) {
        for mut row in other.rows {
            row.run_id = self.run_id.clone();
            self.rows.push(row);
        }
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn from_rows(run_id: impl Into<String>, rows: Vec<MetricRow>) -> Self {
        Self {
            run_id: run_id.into(),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of `metric` in row order.
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// Values of `metric` for one trial, in row order.
    pub fn trial_values(&self, trial: usize, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.trial == trial && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// The single value of `metric` for `trial`, if recorded.
    pub fn get(&self, trial: usize, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.trial == trial && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn trials(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.rows.iter().map(|r| r.trial).collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}
