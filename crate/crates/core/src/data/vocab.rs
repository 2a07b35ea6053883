use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";

/// Insertion-ordered string table with a reserved unknown entry.
///
/// Serialized as the plain list of entries, so a dump is stable and
/// human-readable.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    entries: Vec<String>,
    index: HashMap<String, u32>,
    unk: u32,
}

impl Vocab {
    /// Word table: `<pad>` = 0, `<unk>` = 1.
    pub fn words() -> Self {
        Self::with_reserved(&[PAD, UNK], 1)
    }

    /// Label table: `<unk>` = 0.
    pub fn labels() -> Self {
        Self::with_reserved(&[UNK], 0)
    }

    fn with_reserved(reserved: &[&str], unk: u32) -> Self {
        let mut v = Self { unk, ..Self::default() };
        for r in reserved {
            v.insert(r);
        }
        v
    }

    pub fn insert(&mut self, entry: &str) -> u32 {
        if let Some(&id) = self.index.get(entry) {
            return id;
        }
        let id = self.entries.len() as u32;
        self.entries.push(entry.to_string());
        self.index.insert(entry.to_string(), id);
        id
    }

    /// Id of `entry`, or the unknown id.
    pub fn id(&self, entry: &str) -> u32 {
        self.index.get(entry).copied().unwrap_or(self.unk)
    }

    pub fn get(&self, entry: &str) -> Option<u32> {
        self.index.get(entry).copied()
    }

    pub fn entry(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn ids<'a>(&self, tokens: impl IntoIterator<Item = &'a String>) -> Vec<u32> {
        tokens.into_iter().map(|t| self.id(t)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    unk: u32,
    entries: Vec<String>,
}

impl Serialize for Vocab {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        VocabRepr {
            unk: self.unk,
            entries: self.entries.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocab {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = VocabRepr::deserialize(d)?;
        if repr.unk as usize >= repr.entries.len() {
            return Err(serde::de::Error::custom("unknown id out of range"));
        }
        let mut v = Vocab {
            unk: repr.unk,
            ..Vocab::default()
        };
        for e in &repr.entries {
            if v.index.contains_key(e) {
                return Err(serde::de::Error::custom(format!("duplicate entry {e:?}")));
            }
            v.insert(e);
        }
        Ok(v)
    }
}

/// The word and graph-label tables a model is built against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub words: Vocab,
    pub labels: Vocab,
}

impl Default for Vocabularies {
    fn default() -> Self {
        Self {
            words: Vocab::words(),
            labels: Vocab::labels(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids() {
        let mut w = Vocab::words();
        assert_eq!((w.id(PAD), w.id(UNK)), (0, 1));
        assert_eq!(w.insert("apple"), 2);
        assert_eq!(w.insert("apple"), 2);
        assert_eq!(w.id("pear"), 1);
        let l = Vocab::labels();
        assert_eq!(l.id("anything"), 0);
    }

    #[test]
    fn serde_round_trip() {
        let mut v = Vocab::labels();
        v.insert("on");
        v.insert("table");
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("table"), 2);
        assert!(serde_json::from_str::<Vocab>(r#"{"unk":0,"entries":["a","a"]}"#).is_err());
    }
}
