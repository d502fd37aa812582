//! Sample bookkeeping: identity and clothes-group labels, query/gallery
//! roles, and the pairing of a record with its embedding.

use crate::error::{Error, Result};
use crate::tensor::Embedding;

/// Retrieval role of a sample. Training-split samples carry `Gallery` since
/// they are consumed with their own detected clothes patch, like targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Query,
    Gallery,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Query => "query",
            Role::Gallery => "gallery",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "query" => Some(Role::Query),
            "gallery" => Some(Role::Gallery),
            _ => None,
        }
    }
}

/// Where the clothes-branch input for a sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClothesSource {
    /// Catalog-style clothes image supplied with a query.
    Template,
    /// Patch detected on the person image itself.
    DetectedPatch,
}

impl ClothesSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ClothesSource::Template => "template",
            ClothesSource::DetectedPatch => "detected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "template" => Some(ClothesSource::Template),
            "detected" => Some(ClothesSource::DetectedPatch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One person observation: identity, clothes group, and how it participates
/// in the retrieval protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub person_id: u32,
    /// Clothes-type label scoped within the identity (0, 1, 2, ...).
    pub clothes_group_id: u32,
    pub role: Role,
    pub clothes_source: ClothesSource,
    pub split: Split,
}

impl SampleRecord {
    /// Checks the role/source coupling: queries carry templates, gallery
    /// samples carry detected patches.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.role {
            Role::Query => self.clothes_source == ClothesSource::Template,
            Role::Gallery => self.clothes_source == ClothesSource::DetectedPatch,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "sample '{}': role {} incompatible with clothes source {}",
                self.sample_id,
                self.role.as_str(),
                self.clothes_source.as_str()
            )))
        }
    }
}

/// A record together with its feature vector.
#[derive(Debug, Clone)]
pub struct LabeledEmbedding {
    pub record: SampleRecord,
    pub vector: Embedding,
}

/// Verifies that every vector in a collection has the same dimension.
pub fn check_uniform_dim(items: &[LabeledEmbedding]) -> Result<usize> {
    let dim = items.first().map(|e| e.vector.dim()).unwrap_or(0);
    for item in items {
        if item.vector.dim() != dim {
            return Err(Error::shape(format!(
                "embedding for '{}' has dim {}, expected {}",
                item.record.sample_id,
                item.vector.dim(),
                dim
            )));
        }
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(role: Role, source: ClothesSource) -> SampleRecord {
        SampleRecord {
            sample_id: "s0".into(),
            person_id: 1,
            clothes_group_id: 0,
            role,
            clothes_source: source,
            split: Split::Test,
        }
    }

    #[test]
    fn query_requires_template() {
        assert!(record(Role::Query, ClothesSource::Template).validate().is_ok());
        assert!(record(Role::Query, ClothesSource::DetectedPatch).validate().is_err());
    }

    #[test]
    fn gallery_requires_detected() {
        assert!(record(Role::Gallery, ClothesSource::DetectedPatch).validate().is_ok());
        assert!(record(Role::Gallery, ClothesSource::Template).validate().is_err());
    }

    #[test]
    fn enum_round_trips() {
        for role in [Role::Query, Role::Gallery] {
            assert_eq!(Role::parse(role.as_str()), Some(role));
        }
        for src in [ClothesSource::Template, ClothesSource::DetectedPatch] {
            assert_eq!(ClothesSource::parse(src.as_str()), Some(src));
        }
        for split in [Split::Train, Split::Test] {
            assert_eq!(Split::parse(split.as_str()), Some(split));
        }
    }
}
