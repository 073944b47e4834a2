//! Reference library of beauty-tech application types, each with the
//! enforcement case reviewers usually compare against.

use serde::{Deserialize, Serialize};

const SHIPPED: &str = include_str!("../resources/cases.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseLibraryEntry {
    pub application_type: String,
    pub key_features: String,
    pub primary_concerns: String,
    pub representative_penalty: String,
    pub source_url: String,
}

pub fn shipped_cases() -> Vec<CaseLibraryEntry> {
    serde_json::from_str(SHIPPED).expect("shipped case library is valid")
}
