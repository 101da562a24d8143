//! Vocabulary and inverted file.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeoObject, ObjectId, TermId};

/// Case-folded, whitespace-separated tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

/// Bidirectional term string <-> term id mapping.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    lookup: HashMap<String, TermId>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(terms: Vec<String>) -> Self {
        let lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        Self { terms, lookup }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.terms
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of `term` (case-folded), inserting it if unseen.
    pub fn intern(&mut self, term: &str) -> TermId {
        let key = term.to_lowercase();
        if let Some(&id) = self.lookup.get(&key) {
            return id;
        }
        let id = self.terms.len() as TermId;
        self.terms.push(key.clone());
        self.lookup.insert(key, id);
        id
    }

    pub fn get(&self, term: &str) -> Option<TermId> {
        self.lookup.get(&term.to_lowercase()).copied()
    }

    pub fn term(&self, id: TermId) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, &str)> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| (i as TermId, t.as_str()))
    }

    /// Resolve a list of keyword strings. Unknown keywords are dropped.
    pub fn resolve<'a>(&self, keywords: impl IntoIterator<Item = &'a str>) -> Vec<TermId> {
        let mut ids: Vec<TermId> = keywords.into_iter().filter_map(|k| self.get(k)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

impl FromIterator<String> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut v = Vocabulary::new();
        for t in iter {
            v.intern(&t);
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostingEntry {
    pub object_id: ObjectId,
    pub weight: f64,
}

/// Posting lists indexed by term id, each ordered by descending weight then ascending id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvertedFile {
    postings: Vec<Vec<PostingEntry>>,
}

impl InvertedFile {
    pub fn build(objects: &[GeoObject], vocabulary_len: usize) -> Result<Self> {
        let mut seen = vec![false; objects.len()];
        let mut postings: Vec<Vec<PostingEntry>> = vec![Vec::new(); vocabulary_len];
        for obj in objects {
            let slot = obj.id as usize;
            if slot >= seen.len() {
                seen.resize(slot + 1, false);
            }
            if std::mem::replace(&mut seen[slot], true) {
                return Err(Error::DuplicateObjectId(obj.id as u64));
            }
            for &(term, weight) in obj.doc.entries() {
                let list = postings
                    .get_mut(term as usize)
                    .ok_or(Error::UnknownTerm(term))?;
                list.push(PostingEntry {
                    object_id: obj.id,
                    weight,
                });
            }
        }
        for list in &mut postings {
            list.sort_by(|a, b| {
                b.weight
                    .total_cmp(&a.weight)
                    .then(a.object_id.cmp(&b.object_id))
            });
        }
        Ok(Self { postings })
    }

    pub fn postings(&self, term: TermId) -> &[PostingEntry] {
        self.postings
            .get(term as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    /// Union of the posting lists of `terms`, sorted ascending by id.
    pub fn relevant_objects(&self, terms: &[TermId]) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = terms
            .iter()
            .flat_map(|&t| self.postings(t).iter().map(|p| p.object_id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}
