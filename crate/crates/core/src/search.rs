//! Query-by-example ranking with min-over-queries aggregation.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::features::{combine, l2, Descriptor, WeightProfile};
use crate::id::ImageId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("unknown image id {0}")]
    UnknownId(ImageId),
    #[error("query set would be empty")]
    EmptyQuerySet,
}

/// Query images plus the candidate scope. Queries are always ranked, even
/// when they are not members of the scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    query_ids: Vec<ImageId>,
    scope_ids: BTreeSet<ImageId>,
    profile: WeightProfile,
}

impl QuerySet {
    pub fn new(
        queries: impl IntoIterator<Item = ImageId>,
        scope: impl IntoIterator<Item = ImageId>,
        profile: WeightProfile,
    ) -> Result<Self, SearchError> {
        let mut query_ids = Vec::new();
        for q in queries {
            if !query_ids.contains(&q) {
                query_ids.push(q);
            }
        }
        if query_ids.is_empty() {
            return Err(SearchError::EmptyQuerySet);
        }
        Ok(QuerySet {
            query_ids,
            scope_ids: scope.into_iter().collect(),
            profile,
        })
    }

    pub fn query_ids(&self) -> &[ImageId] {
        &self.query_ids
    }

    pub fn scope_ids(&self) -> &BTreeSet<ImageId> {
        &self.scope_ids
    }

    pub fn profile(&self) -> &WeightProfile {
        &self.profile
    }

    /// Scope plus queries.
    pub fn candidates(&self) -> BTreeSet<ImageId> {
        let mut all = self.scope_ids.clone();
        all.extend(self.query_ids.iter().copied());
        all
    }

    /// Replaces the candidate scope, keeping queries and profile.
    pub fn with_scope(&self, scope: impl IntoIterator<Item = ImageId>) -> Self {
        QuerySet {
            scope_ids: scope.into_iter().collect(),
            ..self.clone()
        }
    }

    /// Query ids without a descriptor in `descriptors`.
    pub fn unresolved(&self, descriptors: &HashMap<ImageId, Descriptor>) -> Vec<ImageId> {
        self.query_ids
            .iter()
            .filter(|id| !descriptors.contains_key(id))
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub id: ImageId,
    pub distance: f64,
}

/// Ranks every candidate by its smallest combined-descriptor L2 distance to
/// any query. Ascending distance, ties by id.
pub fn rank(queries: &QuerySet, descriptors: &HashMap<ImageId, Descriptor>) -> Result<Vec<Ranked>, SearchError> {
    let resolve = |id: &ImageId| descriptors.get(id).ok_or(SearchError::UnknownId(*id));
    let query_vectors = queries
        .query_ids
        .iter()
        .map(|id| resolve(id).map(|d| combine(d, &queries.profile)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ranked = queries
        .candidates()
        .into_iter()
        .map(|id| {
            let v = combine(resolve(&id)?, &queries.profile);
            let distance = query_vectors.iter().map(|q| l2(&v, q)).fold(f64::INFINITY, f64::min);
            Ok(Ranked { id, distance })
        })
        .collect::<Result<Vec<_>, SearchError>>()?;
    ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    Ok(ranked)
}

/// Adds and removes query ids. Adding an existing id is a no-op; removals
/// apply after additions.
pub fn iterate(previous: &QuerySet, add_ids: &[ImageId], remove_ids: &[ImageId]) -> Result<QuerySet, SearchError> {
    let mut query_ids = previous.query_ids.clone();
    for id in add_ids {
        if !query_ids.contains(id) {
            query_ids.push(*id);
        }
    }
    query_ids.retain(|id| !remove_ids.contains(id));
    if query_ids.is_empty() {
        return Err(SearchError::EmptyQuerySet);
    }
    Ok(QuerySet {
        query_ids,
        ..previous.clone()
    })
}
