//! Country-labelled article corpus: manifest loading, article streaming and
//! per-country corpus statistics.
//!
//! Layout on disk is a manifest (`country<TAB>path` per line, paths relative
//! to the manifest) pointing at JSON Lines article files.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Lines, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum number of articles a country needs to stay in the analysis.
pub const DEFAULT_MIN_ARTICLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub country: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub country: String,
    pub path: PathBuf,
    /// Number of non-blank lines in the file at load time.
    pub articles: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    /// Unique countries in first-seen order.
    pub countries: Vec<String>,
}

/// A country dropped for having too few articles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excluded {
    pub country: String,
    pub articles: usize,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, base, path)
    }

    fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut countries: Vec<String> = Vec::new();
        let mut seen = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected `country<TAB>path`, found {} field(s)",
                    fields.len()
                )));
            }
            let country = fields[0].trim();
            let rel = fields[1].trim();
            if country.is_empty() || rel.is_empty() {
                return Err(parse_err("empty country or path".into()));
            }
            let file = base.join(rel);
            if !seen.insert((country.to_string(), file.clone())) {
                return Err(Error::DuplicateEntry {
                    country: country.to_string(),
                    path: file,
                });
            }
            if !file.is_file() {
                return Err(parse_err(format!("no such file {}", file.display())));
            }
            let articles = count_nonblank_lines(&file)?;
            if !countries.iter().any(|c| c == country) {
                countries.push(country.to_string());
            }
            entries.push(ManifestEntry {
                country: country.to_string(),
                path: file,
                articles,
            });
        }

        if entries.is_empty() {
            return Err(Error::EmptyManifest);
        }
        Ok(CorpusManifest { entries, countries })
    }

    pub fn contains(&self, country: &str) -> bool {
        self.countries.iter().any(|c| c == country)
    }

    pub fn articles(&self, country: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.country == country)
            .map(|e| e.articles)
            .sum()
    }

    /// Drops countries with fewer than `min_articles` articles and reports them.
    pub fn exclude_small(&self, min_articles: usize) -> (CorpusManifest, Vec<Excluded>) {
        let mut excluded = Vec::new();
        let mut kept = Vec::new();
        for country in &self.countries {
            let n = self.articles(country);
            if n < min_articles {
                log::warn!("excluding {country}: {n} articles < minimum {min_articles}");
                excluded.push(Excluded {
                    country: country.clone(),
                    articles: n,
                });
            } else {
                kept.push(country.clone());
            }
        }
        let entries = self
            .entries
            .iter()
            .filter(|e| kept.contains(&e.country))
            .cloned()
            .collect();
        (
            CorpusManifest {
                entries,
                countries: kept,
            },
            excluded,
        )
    }

    /// Articles of one country, in manifest then file order.
    pub fn stream(&self, country: &str) -> Result<ArticleStream> {
        if !self.contains(country) {
            return Err(Error::UnknownCountry(country.to_string()));
        }
        let files = self
            .entries
            .iter()
            .filter(|e| e.country == country)
            .map(|e| e.path.clone())
            .collect::<Vec<_>>();
        Ok(ArticleStream {
            country: country.to_string(),
            files: files.into_iter(),
            current: None,
        })
    }
}

fn count_nonblank_lines(path: &Path) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut n = 0;
    for line in BufReader::new(file).lines() {
        if !line.map_err(|e| Error::io(path, e))?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    CorpusManifest::load(path)
}

pub fn stream_articles(manifest: &CorpusManifest, country: &str) -> Result<ArticleStream> {
    manifest.stream(country)
}

struct OpenFile {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
}

/// Iterator over one country's articles. Stops at the first error.
pub struct ArticleStream {
    country: String,
    files: std::vec::IntoIter<PathBuf>,
    current: Option<OpenFile>,
}

impl ArticleStream {
    fn parse_line(&self, file: &OpenFile, line: &str) -> Result<Article> {
        let parse_err = |message: String| Error::Parse {
            path: file.path.clone(),
            line: file.line_no,
            message,
        };
        let article: Article = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if article.country != self.country {
            return Err(parse_err(format!(
                "article labelled {:?} in a file listed for {:?}",
                article.country, self.country
            )));
        }
        if article.text.trim().is_empty() {
            return Err(parse_err("empty article text".into()));
        }
        Ok(article)
    }
}

impl Iterator for ArticleStream {
    type Item = Result<Article>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                let path = self.files.next()?;
                match File::open(&path) {
                    Ok(f) => {
                        self.current = Some(OpenFile {
                            path,
                            lines: BufReader::new(f).lines(),
                            line_no: 0,
                        })
                    }
                    Err(e) => {
                        self.files = Vec::new().into_iter();
                        return Some(Err(Error::io(path, e)));
                    }
                }
            }
            let file = self.current.as_mut().expect("file opened above");
            match file.lines.next() {
                None => self.current = None,
                Some(Err(e)) => {
                    let path = file.path.clone();
                    self.current = None;
                    self.files = Vec::new().into_iter();
                    return Some(Err(Error::io(path, e)));
                }
                Some(Ok(line)) => {
                    file.line_no += 1;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let file = self.current.as_ref().expect("file opened above");
                    let item = self.parse_line(file, &line);
                    if item.is_err() {
                        self.current = None;
                        self.files = Vec::new().into_iter();
                    }
                    return Some(item);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryStats {
    pub country: String,
    pub articles: u64,
    pub words: u64,
    pub pct_articles: f64,
    pub pct_words: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<CountryStats>,
}

impl CorpusStats {
    /// Builds statistics from `(country, articles, words)` triples.
    pub fn from_counts(counts: &[(String, u64, u64)]) -> Result<Self> {
        let total_articles: u64 = counts.iter().map(|c| c.1).sum();
        let total_words: u64 = counts.iter().map(|c| c.2).sum();
        if total_words == 0 {
            return Err(Error::invalid("zero total words"));
        }
        let pct = |part: u64, total: u64| {
            if total == 0 {
                0.0
            } else {
                100.0 * part as f64 / total as f64
            }
        };
        let rows = counts
            .iter()
            .map(|(country, articles, words)| CountryStats {
                country: country.clone(),
                articles: *articles,
                words: *words,
                pct_articles: pct(*articles, total_articles),
                pct_words: pct(*words, total_words),
            })
            .collect();
        Ok(CorpusStats { rows })
    }

    pub fn total_articles(&self) -> u64 {
        self.rows.iter().map(|r| r.articles).sum()
    }

    pub fn total_words(&self) -> u64 {
        self.rows.iter().map(|r| r.words).sum()
    }

    /// CSV with the percentage columns rounded to two decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["country", "articles", "words", "pct_articles", "pct_words"])?;
        for r in &self.rows {
            w.write_record([
                r.country.clone(),
                r.articles.to_string(),
                r.words.to_string(),
                format!("{:.2}", r.pct_articles),
                format!("{:.2}", r.pct_words),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Statistics for every manifest country; `words` maps country to its
/// post-tokenization word count.
pub fn corpus_stats(
    manifest: &CorpusManifest,
    words: &BTreeMap<String, u64>,
) -> Result<CorpusStats> {
    let mut counts = Vec::with_capacity(manifest.countries.len());
    for country in &manifest.countries {
        let w = words
            .get(country)
            .ok_or_else(|| Error::invalid(format!("no token count for {country}")))?;
        counts.push((country.clone(), manifest.articles(country) as u64, *w));
    }
    CorpusStats::from_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn article_line(country: &str, text: &str) -> String {
        serde_json::to_string(&Article {
            country: country.into(),
            text: text.into(),
            source: None,
            date: None,
        })
        .unwrap()
    }

    #[test]
    fn manifest_keeps_first_seen_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = String::new();
        for i in 0..18 {
            let name = format!("c{i:02}.jsonl");
            write(
                dir.path(),
                &name,
                &article_line(&format!("C{i:02}"), "text"),
            );
            lines.push_str(&format!("C{i:02}\t{name}\n"));
        }
        let m = write(dir.path(), "manifest.tsv", &lines);
        let manifest = load_manifest(&m).unwrap();
        assert_eq!(manifest.countries.len(), 18);
        assert_eq!(manifest.countries[0], "C00");
        assert_eq!(manifest.countries[17], "C17");
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(dir.path(), "manifest.tsv", "\n# only a comment\n");
        let err = load_manifest(&m).unwrap_err();
        assert_eq!(err.to_string(), "empty manifest");
    }

    #[test]
    fn duplicate_entry_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", &article_line("KE", "x"));
        let m = write(dir.path(), "manifest.tsv", "KE\ta.jsonl\nKE\ta.jsonl\n");
        match load_manifest(&m).unwrap_err() {
            Error::DuplicateEntry { country, path } => {
                assert_eq!(country, "KE");
                assert!(path.ends_with("a.jsonl"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", &article_line("KE", "x"));
        let m = write(
            dir.path(),
            "manifest.tsv",
            "KE\ta.jsonl\nKE\ta.jsonl\textra\n",
        );
        match load_manifest(&m).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_article_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(dir.path(), "manifest.tsv", "KE\tnope.jsonl\n");
        assert!(matches!(
            load_manifest(&m).unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn streams_in_file_order_and_concatenates_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = format!(
            "{}\n{}\n",
            article_line("KE", "first"),
            article_line("KE", "second")
        );
        let b = format!("{}\n\n", article_line("KE", "third"));
        write(dir.path(), "a.jsonl", &a);
        write(dir.path(), "b.jsonl", &b);
        let m = write(dir.path(), "manifest.tsv", "KE\ta.jsonl\nKE\tb.jsonl\n");
        let manifest = load_manifest(&m).unwrap();
        assert_eq!(manifest.articles("KE"), 3);
        let texts: Vec<String> = stream_articles(&manifest, "KE")
            .unwrap()
            .map(|a| a.unwrap().text)
            .collect();
        assert_eq!(texts, ["first", "second", "third"]);
    }

    #[test]
    fn unknown_country_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", &article_line("KE", "x"));
        let m = write(dir.path(), "manifest.tsv", "KE\ta.jsonl\n");
        let manifest = load_manifest(&m).unwrap();
        assert!(matches!(
            stream_articles(&manifest, "XX"),
            Err(Error::UnknownCountry(_))
        ));
    }

    #[test]
    fn mislabelled_article_aborts_stream() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{}\n{}\n",
            article_line("KE", "ok"),
            article_line("NG", "bad")
        );
        write(dir.path(), "a.jsonl", &body);
        let m = write(dir.path(), "manifest.tsv", "KE\ta.jsonl\n");
        let manifest = load_manifest(&m).unwrap();
        let items: Vec<_> = stream_articles(&manifest, "KE").unwrap().collect();
        assert_eq!(items.len(), 2);
        assert!(items[0].is_ok());
        assert!(matches!(items[1], Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn small_countries_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", &article_line("KE", "x"));
        let two = format!("{}\n{}\n", article_line("NG", "x"), article_line("NG", "y"));
        write(dir.path(), "b.jsonl", &two);
        let m = write(dir.path(), "manifest.tsv", "KE\ta.jsonl\nNG\tb.jsonl\n");
        let (kept, excluded) = load_manifest(&m).unwrap().exclude_small(2);
        assert_eq!(kept.countries, ["NG"]);
        assert_eq!(
            excluded,
            [Excluded {
                country: "KE".into(),
                articles: 1
            }]
        );
    }

    #[test]
    fn published_two_class_share() {
        // Article counts of the ten two-class countries.
        let counts = [
            ("Bangladesh", 15_245),
            ("Kenya", 30_694),
            ("Nigeria", 52_895),
            ("Tanzania", 6_164),
            ("Australia", 62_683),
            ("Canada", 73_869),
            ("Ireland", 60_190),
            ("New Zealand", 56_483),
            ("Singapore", 20_195),
            ("United Kingdom", 39_513),
        ];
        let rows: Vec<_> = counts
            .iter()
            .map(|(c, a)| (c.to_string(), *a as u64, 1))
            .collect();
        let stats = CorpusStats::from_counts(&rows).unwrap();
        assert_eq!(stats.total_articles(), 417_931);
        assert_eq!(format!("{:.2}", stats.rows[0].pct_articles), "3.65");
    }

    #[test]
    fn symmetric_percentages() {
        let one = CorpusStats::from_counts(&[("A".into(), 3, 10)]).unwrap();
        assert_eq!(one.rows[0].pct_articles, 100.0);
        assert_eq!(one.rows[0].pct_words, 100.0);
        let two = CorpusStats::from_counts(&[("A".into(), 3, 10), ("B".into(), 3, 10)]).unwrap();
        assert_eq!(two.rows[1].pct_words, 50.0);
    }

    #[test]
    fn zero_words_is_an_error() {
        assert!(CorpusStats::from_counts(&[("A".into(), 3, 0)]).is_err());
    }

    #[test]
    fn stats_require_every_country() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", &article_line("KE", "x"));
        let m = write(dir.path(), "manifest.tsv", "KE\ta.jsonl\n");
        let manifest = load_manifest(&m).unwrap();
        assert!(corpus_stats(&manifest, &BTreeMap::new()).is_err());
        let words = BTreeMap::from([("KE".to_string(), 7)]);
        let stats = corpus_stats(&manifest, &words).unwrap();
        assert_eq!(stats.rows[0].articles, 1);
    }
}
