//! Units of prompt context shared by retrieval, walks and synthesis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextType {
    SummaryDesign,
    SummaryRtl,
    SummarySignals,
    SummaryPatterns,
    SignalDesc,
    Rag,
    KgPath,
}

impl ContextType {
    pub const ALL: [ContextType; 7] = [
        ContextType::SummaryDesign,
        ContextType::SummaryRtl,
        ContextType::SummarySignals,
        ContextType::SummaryPatterns,
        ContextType::SignalDesc,
        ContextType::Rag,
        ContextType::KgPath,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextType::SummaryDesign => "summary_design",
            ContextType::SummaryRtl => "summary_rtl",
            ContextType::SummarySignals => "summary_signals",
            ContextType::SummaryPatterns => "summary_patterns",
            ContextType::SignalDesc => "signal_desc",
            ContextType::Rag => "rag",
            ContextType::KgPath => "kg_path",
        }
    }

    pub fn is_global_summary(self) -> bool {
        matches!(
            self,
            ContextType::SummaryDesign
                | ContextType::SummaryRtl
                | ContextType::SummarySignals
                | ContextType::SummaryPatterns
        )
    }
}

impl fmt::Display for ContextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContextType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown context type {s}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextItem {
    pub ctx_type: ContextType,
    pub text: String,
    pub score: f64,
    pub provenance: String,
    pub signal: String,
    /// Walk ordinal for `kg_path` items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<usize>,
    /// Placeholder standing in for content the provider failed to produce.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

impl ContextItem {
    pub fn new(ctx_type: ContextType, signal: &str, text: impl Into<String>) -> Self {
        ContextItem {
            ctx_type,
            text: text.into(),
            score: 0.0,
            provenance: String::new(),
            signal: signal.to_string(),
            ordinal: None,
            degraded: false,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn mark_degraded(mut self) -> Self {
        self.degraded = true;
        self
    }

    pub fn with_ordinal(mut self, ordinal: usize) -> Self {
        self.ordinal = Some(ordinal);
        self
    }
}
