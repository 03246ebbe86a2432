//! Labeled feature collections, optionally projected to stub embeddings on
//! access so that only the compact base features stay in memory.

use std::borrow::Cow;

use crate::features::{FeatureMatrix, StubProjector};
use crate::neural::{Dataset, Sample, Target};

#[derive(Debug, Clone)]
pub struct FeatureSet<L> {
    items: Vec<(FeatureMatrix, L)>,
    projector: Option<StubProjector>,
}

impl<L> FeatureSet<L> {
    pub fn new(items: Vec<(FeatureMatrix, L)>) -> Self {
        Self { items, projector: None }
    }

    /// Items hold base features; [`features`](Self::features) returns their
    /// projection.
    pub fn projected(items: Vec<(FeatureMatrix, L)>, projector: StubProjector) -> Self {
        Self {
            items,
            projector: Some(projector),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Dimension of the features handed to a model.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.projector {
            Some(p) => Some(p.dim()),
            None => self.items.first().map(|(f, _)| f.dim()),
        }
    }

    pub fn features(&self, i: usize) -> Cow<'_, FeatureMatrix> {
        match &self.projector {
            Some(p) => Cow::Owned(p.project(&self.items[i].0)),
            None => Cow::Borrowed(&self.items[i].0),
        }
    }

    pub fn label(&self, i: usize) -> &L {
        &self.items[i].1
    }

    pub fn labels(&self) -> impl Iterator<Item = &L> {
        self.items.iter().map(|(_, l)| l)
    }

    /// Same projection over a subset of items.
    pub fn subset(&self, idx: &[usize]) -> Self
    where
        L: Clone,
    {
        Self {
            items: idx.iter().map(|&i| self.items[i].clone()).collect(),
            projector: self.projector.clone(),
        }
    }

    /// Views the set as training data with targets derived from labels.
    pub fn with_targets<F: Fn(&L) -> Target>(&self, to_target: F) -> Targeted<'_, L, F> {
        Targeted { set: self, to_target }
    }
}

/// A [`FeatureSet`] seen through a label-to-target mapping.
pub struct Targeted<'a, L, F> {
    set: &'a FeatureSet<L>,
    to_target: F,
}

impl<L, F: Fn(&L) -> Target> Dataset for Targeted<'_, L, F> {
    fn len(&self) -> usize {
        self.set.len()
    }

    fn get(&self, i: usize) -> Sample<'_> {
        Sample {
            features: self.set.features(i),
            target: Cow::Owned((self.to_target)(self.set.label(i))),
        }
    }
}
