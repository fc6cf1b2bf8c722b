use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

const DEFAULT_TYPES: [&str; 20] = [
    "Menu",
    "Card",
    "Statistic",
    "Table",
    "Chart",
    "Form",
    "Button",
    "Input",
    "Tabs",
    "Breadcrumb",
    "List",
    "Avatar",
    "Badge",
    "Banner",
    "Sidebar",
    "Header",
    "Footer",
    "SearchBar",
    "Pagination",
    "Modal",
];

/// Closed set of component types a document may use.
///
/// Order is preserved because the retrieval featurizer lays out its
/// histogram in vocabulary order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentVocabulary {
    types: Vec<String>,
}

impl Default for ComponentVocabulary {
    fn default() -> Self {
        Self {
            types: DEFAULT_TYPES.iter().map(|t| t.to_string()).collect(),
        }
    }
}

impl ComponentVocabulary {
    /// Builds a vocabulary from the given names; duplicates are dropped,
    /// first occurrence wins.
    pub fn new<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = BTreeSet::new();
        let types = types
            .into_iter()
            .map(Into::into)
            .filter(|t| seen.insert(t.clone()))
            .collect();
        Self { types }
    }

    /// The default set extended with extra types.
    pub fn extended<I, S>(extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = DEFAULT_TYPES.iter().map(|t| t.to_string()).collect();
        all.extend(extra.into_iter().map(Into::into));
        Self::new(all)
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.types.iter().any(|t| t == kind)
    }

    pub fn position(&self, kind: &str) -> Option<usize> {
        self.types.iter().position(|t| t == kind)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(String::as_str)
    }

    /// Maps a near-miss spelling (`"card"`, `"search_bar"`, `"Search Bar"`)
    /// onto its vocabulary entry.
    pub fn fold(&self, kind: &str) -> Option<&str> {
        if let Some(exact) = self.types.iter().find(|t| *t == kind) {
            return Some(exact);
        }
        let key = fold_key(kind);
        self.types
            .iter()
            .find(|t| fold_key(t) == key)
            .map(String::as_str)
    }
}

fn fold_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}
