//! Article cleaning: tokenization, boilerplate stripping, stopword and
//! named-entity removal, and lemmatization.
//!
//! Every step is a pure function of its inputs. The composition is
//! idempotent: feeding the joined output lemmas back through
//! [`preprocess_text`] returns the same lemmas.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::error::{Error, Result};

pub const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords.txt");
pub const DEFAULT_GAZETTEER: &str = include_str!("../resources/gazetteer.txt");
pub const DEFAULT_LEMMAS: &str = include_str!("../resources/lemmas.tsv");

pub const DEFAULT_BOILERPLATE_THRESHOLD: f64 = 0.5;

const MIN_TOKEN_CHARS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    /// Index among the tokens emitted for the article.
    pub position: usize,
    /// First word of the text or first word after `.`, `!`, `?` or a line break.
    pub sentence_initial: bool,
}

/// Splits on non-alphanumeric characters and keeps purely alphabetic words of
/// at least two letters. Lemmas start out as the lowercase surface.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut at_sentence_start = true;
    let mut word_start: Option<usize> = None;

    let emit = |word: &str, initial: bool, tokens: &mut Vec<Token>| {
        if word.chars().any(|c| !c.is_alphabetic()) || word.chars().count() < MIN_TOKEN_CHARS {
            return;
        }
        let lemma = word.to_lowercase();
        if lemma.chars().any(|c| !c.is_alphabetic()) {
            return;
        }
        let position = tokens.len();
        tokens.push(Token {
            surface: word.to_string(),
            lemma,
            position,
            sentence_initial: initial,
        });
    };

    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(start) = word_start.take() {
            emit(&text[start..i], at_sentence_start, &mut tokens);
            at_sentence_start = false;
        }
        if matches!(c, '.' | '!' | '?' | '\n') {
            at_sentence_start = true;
        }
    }
    if let Some(start) = word_start {
        emit(&text[start..], at_sentence_start, &mut tokens);
    }
    tokens
}

/// Word filters and lemma table applied after tokenization.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    stopwords: HashSet<String>,
    gazetteer: HashSet<String>,
    lemma_map: HashMap<String, String>,
    boilerplate_threshold: f64,
    entity_heuristic: bool,
}

impl FilterConfig {
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        gazetteer: impl IntoIterator<Item = String>,
        lemma_map: impl IntoIterator<Item = (String, String)>,
        boilerplate_threshold: f64,
        entity_heuristic: bool,
    ) -> Result<Self> {
        if !(boilerplate_threshold > 0.0 && boilerplate_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "boilerplate threshold {boilerplate_threshold} outside (0, 1]"
            )));
        }
        let stopwords = stopwords.into_iter().map(|w| w.to_lowercase()).collect();
        let gazetteer = gazetteer.into_iter().map(|w| w.to_lowercase()).collect();
        let lemma_map = close_lemma_map(lemma_map.into_iter().collect())?;
        Ok(FilterConfig {
            stopwords,
            gazetteer,
            lemma_map,
            boilerplate_threshold,
            entity_heuristic,
        })
    }

    /// The shipped word lists with the default threshold and heuristic on.
    pub fn builtin() -> Self {
        Self::from_sources(
            DEFAULT_STOPWORDS,
            DEFAULT_GAZETTEER,
            DEFAULT_LEMMAS,
            DEFAULT_BOILERPLATE_THRESHOLD,
            true,
        )
        .expect("bundled resources are valid")
    }

    pub fn from_sources(
        stopwords: &str,
        gazetteer: &str,
        lemmas: &str,
        boilerplate_threshold: f64,
        entity_heuristic: bool,
    ) -> Result<Self> {
        let origin = Path::new("<lemmas>");
        Self::new(
            parse_word_list(stopwords),
            parse_word_list(gazetteer),
            parse_lemma_map(lemmas, origin)?,
            boilerplate_threshold,
            entity_heuristic,
        )
    }

    /// Loads the three word files from disk.
    pub fn from_files(
        stopwords: &Path,
        gazetteer: &Path,
        lemmas: &Path,
        boilerplate_threshold: f64,
        entity_heuristic: bool,
    ) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::new(
            parse_word_list(&read(stopwords)?),
            parse_word_list(&read(gazetteer)?),
            parse_lemma_map(&read(lemmas)?, lemmas)?,
            boilerplate_threshold,
            entity_heuristic,
        )
    }

    pub fn boilerplate_threshold(&self) -> f64 {
        self.boilerplate_threshold
    }

    pub fn entity_heuristic(&self) -> bool {
        self.entity_heuristic
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn is_gazetteer(&self, word: &str) -> bool {
        self.gazetteer.contains(word)
    }

    /// Dictionary lookup, then suffix rules. Always returns a fixed point.
    pub fn lemmatize(&self, word: &str) -> String {
        if let Some(lemma) = self.lemma_map.get(word) {
            return lemma.clone();
        }
        let stem = strip_plural(word);
        match self.lemma_map.get(&stem) {
            Some(lemma) => lemma.clone(),
            None => stem,
        }
    }
}

/// One lowercase entry per line; blank lines and `#` comments skipped.
/// Multi-word entries cannot match single tokens and are skipped.
fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter(|l| {
            let single = !l.contains(char::is_whitespace);
            if !single {
                log::warn!("skipping multi-word list entry {l:?}");
            }
            single
        })
        .map(str::to_lowercase)
        .collect()
}

fn parse_lemma_map(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(surface), Some(lemma), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: "expected `surface<TAB>lemma`".into(),
            });
        };
        out.push((surface.trim().to_lowercase(), lemma.trim().to_lowercase()));
    }
    Ok(out)
}

/// Resolves chains (`a→b`, `b→c` becomes `a→c`) and makes every lemma map to
/// itself, so that lemmatizing a lemma is a no-op.
fn close_lemma_map(raw: Vec<(String, String)>) -> Result<HashMap<String, String>> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (surface, lemma) in raw {
        for w in [&surface, &lemma] {
            if w.chars().count() < MIN_TOKEN_CHARS || !w.chars().all(char::is_alphabetic) {
                return Err(Error::invalid(format!(
                    "lemma map entry {w:?} is not a word"
                )));
            }
        }
        map.insert(surface, lemma);
    }
    let mut closed = HashMap::with_capacity(map.len() * 2);
    for (surface, lemma) in &map {
        let mut target = lemma.clone();
        let mut hops = 0;
        while let Some(next) = map.get(&target) {
            if *next == target {
                break;
            }
            hops += 1;
            if hops > map.len() {
                return Err(Error::invalid(format!(
                    "lemma map cycle through {surface:?}"
                )));
            }
            target = next.clone();
        }
        closed.insert(surface.clone(), target);
    }
    let targets: Vec<String> = closed.values().cloned().collect();
    for t in targets {
        closed.entry(t.clone()).or_insert(t);
    }
    Ok(closed)
}

/// Plural suffix rules. Each output is left unchanged by a second application.
fn strip_plural(word: &str) -> String {
    let n = word.chars().count();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..word.len() - 3]);
    }
    if n > 4 && word.ends_with("es") {
        let stem = &word[..word.len() - 2];
        if ["ss", "x", "z", "ch", "sh"]
            .iter()
            .any(|s| stem.ends_with(s))
        {
            return stem.to_string();
        }
    }
    if n > 3 && word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

/// Removes stopwords and named entities and lemmatizes the survivors.
pub fn filter_tokens(tokens: Vec<Token>, config: &FilterConfig) -> Vec<Token> {
    tokens
        .into_iter()
        .filter_map(|mut tok| {
            if config.is_stopword(&tok.lemma) || config.is_gazetteer(&tok.lemma) {
                return None;
            }
            if config.entity_heuristic
                && !tok.sentence_initial
                && tok.surface.chars().next().is_some_and(char::is_uppercase)
            {
                return None;
            }
            let lemma = config.lemmatize(&tok.lemma);
            if config.is_stopword(&lemma) || config.is_gazetteer(&lemma) {
                return None;
            }
            tok.lemma = lemma;
            Some(tok)
        })
        .collect()
}

/// Drops every exact paragraph (trimmed line) that occurs in more than
/// `threshold` of the given articles. Articles with nothing to drop are
/// returned untouched.
pub fn strip_boilerplate(texts: &[String], threshold: f64) -> Vec<String> {
    if texts.len() < 2 {
        return texts.to_vec();
    }
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    for text in texts {
        let unique: HashSet<&str> = paragraphs(text).collect();
        for p in unique {
            *doc_freq.entry(p).or_default() += 1;
        }
    }
    let n = texts.len() as f64;
    let boiler: HashSet<&str> = doc_freq
        .into_iter()
        .filter(|&(_, df)| df as f64 / n > threshold)
        .map(|(p, _)| p)
        .collect();
    if boiler.is_empty() {
        return texts.to_vec();
    }
    texts
        .iter()
        .map(|text| {
            if !paragraphs(text).any(|p| boiler.contains(p)) {
                return text.clone();
            }
            text.lines()
                .filter(|l| !boiler.contains(l.trim()))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect()
}

fn paragraphs(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty())
}

/// Tokenize and filter one text; returns lemmas in text order.
pub fn preprocess_text(text: &str, config: &FilterConfig) -> Vec<String> {
    filter_tokens(tokenize(text), config)
        .into_iter()
        .map(|t| t.lemma)
        .collect()
}

/// Single-article preprocessing. Boilerplate removal needs the other articles
/// of the same source; see [`preprocess_articles`].
pub fn preprocess(article: &Article, config: &FilterConfig) -> Vec<String> {
    preprocess_text(&article.text, config)
}

/// Corpus-level preprocessing of one country's articles: boilerplate is
/// stripped per source, then every article is cleaned. Output is aligned with
/// the input order regardless of thread count.
pub fn preprocess_articles(articles: &[Article], config: &FilterConfig) -> Vec<Vec<String>> {
    let mut by_source: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in articles.iter().enumerate() {
        by_source
            .entry(a.source.as_deref().unwrap_or(""))
            .or_default()
            .push(i);
    }
    let mut cleaned: Vec<Option<String>> = vec![None; articles.len()];
    for idxs in by_source.values() {
        let texts: Vec<String> = idxs.iter().map(|&i| articles[i].text.clone()).collect();
        let stripped = strip_boilerplate(&texts, config.boilerplate_threshold);
        for (&i, t) in idxs.iter().zip(stripped) {
            cleaned[i] = Some(t);
        }
    }
    cleaned
        .par_iter()
        .map(|t| preprocess_text(t.as_deref().unwrap_or_default(), config))
        .collect()
}
