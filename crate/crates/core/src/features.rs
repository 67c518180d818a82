//! Per-country word counts, top-K selection, the union vocabulary and the
//! country × word feature matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indices::CountryClass;
use crate::meta::sha256_hex;

pub const DEFAULT_TOP_K: usize = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqTable {
    pub country: String,
    pub counts: BTreeMap<String, u64>,
    pub total_words: u64,
}

impl FreqTable {
    /// Exact multiset count of a lemma stream.
    pub fn count<S: AsRef<str>>(country: &str, lemmas: &[S]) -> Result<Self> {
        if lemmas.is_empty() {
            return Err(Error::invalid(format!("no words to count for {country}")));
        }
        let mut table = FreqTable {
            country: country.to_string(),
            counts: BTreeMap::new(),
            total_words: 0,
        };
        table.add(lemmas);
        Ok(table)
    }

    /// Adds a further shard of lemmas.
    pub fn add<S: AsRef<str>>(&mut self, lemmas: &[S]) {
        for l in lemmas {
            let l = l.as_ref();
            match self.counts.get_mut(l) {
                Some(c) => *c += 1,
                None => {
                    self.counts.insert(l.to_string(), 1);
                }
            }
        }
        self.total_words += lemmas.len() as u64;
    }

    pub fn merge(&mut self, other: &FreqTable) {
        for (w, c) in &other.counts {
            *self.counts.entry(w.clone()).or_default() += c;
        }
        self.total_words += other.total_words;
    }

    /// Builds a table from externally supplied counts. When `total_words` is
    /// `None` the sum of the counts is used.
    pub fn from_counts(
        country: &str,
        counts: BTreeMap<String, u64>,
        total_words: Option<u64>,
    ) -> Result<Self> {
        if counts.values().any(|&c| c == 0) {
            return Err(Error::invalid(format!(
                "{country}: zero count in frequency table"
            )));
        }
        let sum: u64 = counts.values().sum();
        let total = total_words.unwrap_or(sum);
        if total == 0 || sum > total {
            return Err(Error::invalid(format!(
                "{country}: total words {total} inconsistent with counted {sum}"
            )));
        }
        Ok(FreqTable {
            country: country.to_string(),
            counts,
            total_words: total,
        })
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// Words sorted by count descending, then lexicographically.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.counts.iter().map(|(w, &c)| (w.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// `word,count` CSV in rank order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["word", "count"])?;
        for (word, count) in self.ranked() {
            w.write_record([word, &count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(country: &str, input: R, total_words: Option<u64>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            word: String,
            count: u64,
        }
        let mut counts = BTreeMap::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: Row = row?;
            if counts.insert(row.word.clone(), row.count).is_some() {
                return Err(Error::invalid(format!(
                    "{country}: duplicate word {:?}",
                    row.word
                )));
            }
        }
        Self::from_counts(country, counts, total_words)
    }
}

pub fn count_words<S: AsRef<str>>(country: &str, lemmas: &[S]) -> Result<FreqTable> {
    FreqTable::count(country, lemmas)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopK {
    pub words: Vec<String>,
    /// Fewer than `k` distinct words were available.
    pub short: bool,
}

/// The `k` most frequent words, ties broken lexicographically ascending.
pub fn top_k(table: &FreqTable, k: usize) -> Result<TopK> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let ranked = table.ranked();
    let short = ranked.len() < k;
    if short {
        log::warn!(
            "{}: only {} distinct words, fewer than k = {k}",
            table.country,
            ranked.len()
        );
    }
    Ok(TopK {
        words: ranked
            .into_iter()
            .take(k)
            .map(|(w, _)| w.to_string())
            .collect(),
        short,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Lexicographically ordered, unique.
    pub words: Vec<String>,
    /// Countries whose top-K list contained each word.
    pub provenance: BTreeMap<String, BTreeSet<String>>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).ok()
    }

    /// SHA-256 over the newline-joined word list.
    pub fn hash(&self) -> String {
        sha256_hex(self.words.join("\n").as_bytes())
    }

    /// Vocabulary without provenance, e.g. rebuilt from a matrix header.
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut sorted = words.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != words {
            return Err(Error::invalid("vocabulary words must be unique and sorted"));
        }
        Ok(Vocabulary {
            words,
            provenance: BTreeMap::new(),
        })
    }
}

/// Union of per-country top-K lists, given as `(country, words)`.
pub fn build_vocabulary(lists: &[(String, Vec<String>)]) -> Result<Vocabulary> {
    if lists.is_empty() {
        return Err(Error::invalid("no top-k lists"));
    }
    let mut provenance: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (country, words) in lists {
        for w in words {
            provenance
                .entry(w.clone())
                .or_default()
                .insert(country.clone());
        }
    }
    Ok(Vocabulary {
        words: provenance.keys().cloned().collect(),
        provenance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    RawCount,
    /// Occurrences per million retained words.
    #[default]
    PerMillion,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw_count" | "raw" => Ok(Normalization::RawCount),
            "per_million" => Ok(Normalization::PerMillion),
            other => Err(Error::invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::RawCount => "raw_count",
            Normalization::PerMillion => "per_million",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub vocab: Vocabulary,
    pub countries: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub normalization: Normalization,
    pub labels: Option<Vec<CountryClass>>,
}

/// Sidecar describing how a matrix CSV was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub normalization: Normalization,
    pub vocab_size: usize,
    pub vocab_hash: String,
}

impl FeatureMatrix {
    pub fn row(&self, country: &str) -> Option<&[f64]> {
        self.countries
            .iter()
            .position(|c| c == country)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn info(&self) -> MatrixInfo {
        MatrixInfo {
            normalization: self.normalization,
            vocab_size: self.vocab.len(),
            vocab_hash: self.vocab.hash(),
        }
    }

    /// Header `country,<word>...`, one row per country, shortest round-trip
    /// float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["country".to_string()];
        header.extend(self.vocab.words.iter().cloned());
        w.write_record(&header)?;
        for (country, row) in self.countries.iter().zip(&self.rows) {
            let mut rec = vec![country.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, normalization: Normalization) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("country") {
            return Err(Error::invalid(
                "feature matrix header must start with `country`",
            ));
        }
        let vocab = Vocabulary::from_words(header.iter().skip(1).map(String::from).collect())?;
        let mut countries = Vec::new();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            countries.push(rec[0].to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad feature value {v:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != vocab.len() {
                return Err(Error::LengthMismatch {
                    expected: vocab.len(),
                    actual: row.len(),
                });
            }
            rows.push(row);
        }
        Ok(FeatureMatrix {
            vocab,
            countries,
            rows,
            normalization,
            labels: None,
        })
    }
}

/// One feature row per table, aligned to `vocab`. Words a country never used
/// get 0.
pub fn featurize(
    tables: &[FreqTable],
    vocab: &Vocabulary,
    normalization: Normalization,
) -> Result<FeatureMatrix> {
    let mut seen = BTreeSet::new();
    for t in tables {
        if !seen.insert(t.country.as_str()) {
            return Err(Error::invalid(format!("duplicate country {}", t.country)));
        }
    }
    let rows = tables
        .iter()
        .map(|t| {
            vocab
                .words
                .iter()
                .map(|w| {
                    let c = t.get(w) as f64;
                    match normalization {
                        Normalization::RawCount => c,
                        Normalization::PerMillion => 1e6 * c / t.total_words as f64,
                    }
                })
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        vocab: vocab.clone(),
        countries: tables.iter().map(|t| t.country.clone()).collect(),
        rows,
        normalization,
        labels: None,
    })
}

/// Top-`k` per table, union vocabulary, then the aligned matrix.
pub fn matrix_from_tables(
    tables: &[FreqTable],
    k: usize,
    normalization: Normalization,
) -> Result<FeatureMatrix> {
    let lists = tables
        .iter()
        .map(|t| Ok((t.country.clone(), top_k(t, k)?.words)))
        .collect::<Result<Vec<_>>>()?;
    featurize(tables, &build_vocabulary(&lists)?, normalization)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(country: &str, counts: &[(&str, u64)], total: u64) -> FreqTable {
        FreqTable::from_counts(
            country,
            counts.iter().map(|(w, c)| (w.to_string(), *c)).collect(),
            Some(total),
        )
        .unwrap()
    }

    #[test]
    fn counts_words() {
        let t = count_words("AU", &["time", "time", "people"]).unwrap();
        assert_eq!(t.get("time"), 2);
        assert_eq!(t.get("people"), 1);
        assert_eq!(t.total_words, 3);
        assert!(count_words::<&str>("AU", &[]).is_err());
    }

    #[test]
    fn shard_merge_matches_single_pass() {
        let all = ["a", "b", "a", "c", "a", "b"];
        let whole = count_words("X", &all).unwrap();
        let mut left = count_words("X", &all[..2]).unwrap();
        let right = count_words("X", &all[2..]).unwrap();
        left.merge(&right);
        assert_eq!(left, whole);
    }

    #[test]
    fn top_k_orders_and_breaks_ties() {
        let t = table("X", &[("a", 3), ("b", 1), ("c", 2)], 6);
        assert_eq!(top_k(&t, 2).unwrap().words, ["a", "c"]);
        let tie = table("X", &[("b", 2), ("a", 2)], 4);
        assert_eq!(top_k(&tie, 1).unwrap().words, ["a"]);
        let all = top_k(&t, 10).unwrap();
        assert!(all.short);
        assert_eq!(all.words.len(), 3);
        assert!(top_k(&t, 0).is_err());
    }

    #[test]
    fn vocabulary_unions() {
        let same = vec![
            ("A".to_string(), vec!["x".to_string(), "y".to_string()]),
            ("B".to_string(), vec!["y".to_string(), "x".to_string()]),
        ];
        let v = build_vocabulary(&same).unwrap();
        assert_eq!(v.words, ["x", "y"]);
        assert_eq!(v.provenance["x"].len(), 2);

        let disjoint = vec![
            (
                "A".to_string(),
                vec!["a", "b", "c"].into_iter().map(String::from).collect(),
            ),
            (
                "B".to_string(),
                vec!["d", "e", "f", "g"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
        ];
        assert_eq!(build_vocabulary(&disjoint).unwrap().len(), 7);
        assert!(build_vocabulary(&[]).is_err());
    }

    #[test]
    fn per_million_arithmetic() {
        let t = table("X", &[("time", 410)], 1_000_000);
        let v = build_vocabulary(&[("X".into(), vec!["time".into(), "zebra".into()])]).unwrap();
        let m = featurize(&[t], &v, Normalization::PerMillion).unwrap();
        assert_eq!(m.rows[0], [410.0, 0.0]);
    }

    #[test]
    fn raw_and_relative_rows_are_proportional() {
        let tables = [
            table("A", &[("x", 5), ("y", 7)], 40),
            table("B", &[("x", 1), ("z", 9)], 25),
        ];
        let v = build_vocabulary(&[
            ("A".into(), vec!["x".into(), "y".into()]),
            ("B".into(), vec!["x".into(), "z".into()]),
        ])
        .unwrap();
        let raw = featurize(&tables, &v, Normalization::RawCount).unwrap();
        let rel = featurize(&tables, &v, Normalization::PerMillion).unwrap();
        for (i, t) in tables.iter().enumerate() {
            let factor = 1e6 / t.total_words as f64;
            for j in 0..v.len() {
                assert!((raw.rows[i][j] * factor - rel.rows[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unknown_normalization() {
        assert!("tfidf".parse::<Normalization>().is_err());
        assert_eq!(
            "per_million".parse::<Normalization>().unwrap(),
            Normalization::PerMillion
        );
    }

    #[test]
    fn duplicate_country_rejected() {
        let t = table("A", &[("x", 1)], 1);
        let v = Vocabulary::from_words(vec!["x".into()]).unwrap();
        assert!(featurize(&[t.clone(), t], &v, Normalization::RawCount).is_err());
    }

    #[test]
    fn csv_round_trips() {
        let t = table("A", &[("b", 2), ("a", 2), ("c", 5)], 20);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "word,count\nc,5\na,2\nb,2\n"
        );
        assert_eq!(FreqTable::read_csv("A", &buf[..], Some(20)).unwrap(), t);

        let v = build_vocabulary(&[("A".into(), vec!["a".into(), "c".into()])]).unwrap();
        let m = featurize(&[t], &v, Normalization::PerMillion).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(&buf[..], Normalization::PerMillion).unwrap();
        assert_eq!(back.rows, m.rows);
        assert_eq!(back.vocab.words, m.vocab.words);
    }
}
