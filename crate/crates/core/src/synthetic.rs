//! Deterministic two-class synthetic corpora with planted discriminative
//! words, used by tests, benchmarks and the `synth` subcommand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Article;
use crate::error::{Error, Result};
use crate::features::FreqTable;
use crate::indices::{write_labels, CountryClass};
use crate::seed;
use crate::text::{preprocess_articles, FilterConfig};

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aeiou";
const FILLERS: &[&str] = &["the", "and", "of", "in", "with", "for", "was"];
const BOILERPLATE: &str = "Subscribe to our newsletter for daily updates.";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_higher: usize,
    pub n_lower: usize,
    pub articles_per_country: usize,
    pub words_per_article: usize,
    pub background_words: usize,
    pub planted_per_class: usize,
    /// Fraction of content words drawn from the country's planted set.
    pub planted_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_higher: 6,
            n_lower: 4,
            articles_per_country: 30,
            words_per_article: 150,
            background_words: 40,
            planted_per_class: 10,
            planted_share: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCountry {
    pub name: String,
    pub class: CountryClass,
    pub articles: Vec<Article>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub countries: Vec<SynthCountry>,
    pub background: Vec<String>,
    pub planted_higher: Vec<String>,
    pub planted_lower: Vec<String>,
}

impl SynthCorpus {
    pub fn planted(&self) -> Vec<String> {
        let mut v = self.planted_higher.clone();
        v.extend(self.planted_lower.iter().cloned());
        v.sort();
        v
    }

    pub fn labels(&self) -> Vec<(String, CountryClass)> {
        self.countries
            .iter()
            .map(|c| (c.name.clone(), c.class))
            .collect()
    }

    /// One frequency table per country after full preprocessing.
    pub fn freq_tables(&self, filter: &FilterConfig) -> Result<Vec<FreqTable>> {
        self.countries
            .iter()
            .map(|c| FreqTable::count(&c.name, &preprocess_articles(&c.articles, filter).concat()))
            .collect()
    }

    /// Writes one JSONL file per country, `manifest.tsv` and `labels.csv`
    /// into `dir`; returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("# country\tpath\n");
        for c in &self.countries {
            let file = format!("{}.jsonl", c.name);
            let path = dir.join(&file);
            let mut out = Vec::new();
            for a in &c.articles {
                serde_json::to_writer(&mut out, a)?;
                out.push(b'\n');
            }
            fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
            manifest.push_str(&format!("{}\t{}\n", c.name, file));
        }
        let manifest_path = dir.join("manifest.tsv");
        fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
        let labels_path = dir.join("labels.csv");
        let mut buf = Vec::new();
        write_labels(&mut buf, &self.labels())?;
        let mut f = fs::File::create(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(&labels_path, e))?;
        Ok(manifest_path)
    }
}

/// Pronounceable CVCV words that survive the given filter unchanged.
fn pseudo_words(n: usize, filter: &FilterConfig, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut all = Vec::new();
    for &a in CONSONANTS {
        for &b in VOWELS {
            for &c in CONSONANTS {
                for &d in VOWELS {
                    let w = String::from_utf8(vec![a, b, c, d]).expect("ascii");
                    if !filter.is_stopword(&w)
                        && !filter.is_gazetteer(&w)
                        && filter.lemmatize(&w) == w
                    {
                        all.push(w);
                    }
                }
            }
        }
    }
    all.shuffle(rng);
    all.truncate(n);
    all
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn generate(config: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    if config.n_higher == 0 || config.n_lower == 0 {
        return Err(Error::invalid("both classes need at least one country"));
    }
    if config.background_words == 0
        || config.planted_per_class == 0
        || config.words_per_article == 0
    {
        return Err(Error::invalid("word counts must be positive"));
    }
    if !(0.0..=1.0).contains(&config.planted_share) {
        return Err(Error::invalid("planted_share must lie in [0, 1]"));
    }
    let filter = FilterConfig::builtin();
    let mut rng = seed::rng(seed);
    let mut words = pseudo_words(
        config.background_words + 2 * config.planted_per_class,
        &filter,
        &mut rng,
    );
    let planted_lower = words.split_off(config.background_words + config.planted_per_class);
    let planted_higher = words.split_off(config.background_words);
    let background = words;

    let classes = std::iter::repeat_n(CountryClass::Higher, config.n_higher)
        .chain(std::iter::repeat_n(CountryClass::Lower, config.n_lower));
    let mut countries = Vec::new();
    let (mut hi, mut lo) = (0, 0);
    for (i, class) in classes.enumerate() {
        let name = match class {
            CountryClass::Higher => {
                hi += 1;
                format!("higher{hi:02}")
            }
            _ => {
                lo += 1;
                format!("lower{lo:02}")
            }
        };
        let planted = if class == CountryClass::Higher {
            &planted_higher
        } else {
            &planted_lower
        };
        let mut crng = seed::rng(seed::derive(seed, i as u64));
        // Zipf-like background with a mild per-country tilt.
        let weights: Vec<f64> = (0..background.len())
            .map(|r| crng.random_range(0.9..1.1) / (r + 1) as f64)
            .collect();
        let zipf = WeightedIndex::new(&weights).map_err(|e| Error::Numeric(e.to_string()))?;
        let articles = (0..config.articles_per_country)
            .map(|_| {
                let mut text = String::new();
                let mut sentence = 0usize;
                for j in 0..config.words_per_article {
                    let w = if crng.random_bool(config.planted_share) {
                        planted[crng.random_range(0..planted.len())].as_str()
                    } else {
                        background[zipf.sample(&mut crng)].as_str()
                    };
                    if sentence == 0 {
                        text.push_str(&capitalize(w));
                    } else {
                        text.push(' ');
                        text.push_str(w);
                    }
                    sentence += 1;
                    if crng.random_bool(0.2) {
                        text.push(' ');
                        text.push_str(FILLERS[crng.random_range(0..FILLERS.len())]);
                    }
                    if sentence >= 10 || j + 1 == config.words_per_article {
                        text.push_str(". ");
                        sentence = 0;
                    }
                }
                text.push('\n');
                text.push_str(BOILERPLATE);
                Article {
                    country: name.clone(),
                    text,
                    source: Some(format!("{name}-wire")),
                    date: None,
                }
            })
            .collect();
        countries.push(SynthCountry {
            name,
            class,
            articles,
        });
    }
    Ok(SynthCorpus {
        countries,
        background,
        planted_higher,
        planted_lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_disjoint() {
        let cfg = SynthConfig {
            articles_per_country: 3,
            ..SynthConfig::default()
        };
        let a = generate(&cfg, 5).unwrap();
        assert_eq!(a, generate(&cfg, 5).unwrap());
        assert_eq!(a.countries.len(), 10);
        let mut all = a.background.clone();
        all.extend(a.planted());
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }

    #[test]
    fn planted_words_stay_in_class() {
        let cfg = SynthConfig {
            articles_per_country: 4,
            ..SynthConfig::default()
        };
        let corpus = generate(&cfg, 1).unwrap();
        let filter = FilterConfig::builtin();
        for c in &corpus.countries {
            let lemmas: Vec<String> = preprocess_articles(&c.articles, &filter).concat();
            let foreign = if c.class == CountryClass::Higher {
                &corpus.planted_lower
            } else {
                &corpus.planted_higher
            };
            assert!(lemmas.iter().all(|l| !foreign.contains(l)));
            assert!(!lemmas.iter().any(|l| l == "subscribe" || l == "the"));
            assert_eq!(
                lemmas.len(),
                cfg.articles_per_country * cfg.words_per_article
            );
        }
    }
}
