//! The machine-learning peace index, country ranking, per-class word reports
//! and word-cloud data.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FreqTable, Vocabulary};
use crate::indices::{CountryClass, IndexName, ScaledIndexTable};
use crate::learners::{ImportanceVector, LrModel};

pub const DEFAULT_TOP_N: usize = 100;
pub const DEFAULT_FLAG_N: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeaceScore {
    pub country: String,
    /// Probability of the higher-peace class.
    pub p: f64,
    pub index: f64,
    pub classified_as: CountryClass,
}

pub fn ml_peace_index(model: &LrModel, country: &str, row: &[f64]) -> Result<PeaceScore> {
    if model.classes != [0, 1] {
        return Err(Error::invalid(format!(
            "peace index needs a model over classes [0, 1], got {:?}",
            model.classes
        )));
    }
    let p = model.probability_of(row, 1)?;
    Ok(PeaceScore {
        country: country.to_string(),
        p,
        index: 100.0 * p,
        classified_as: if p >= 0.5 {
            CountryClass::Higher
        } else {
            CountryClass::Lower
        },
    })
}

/// Scores every row of a feature matrix.
pub fn score_matrix(model: &LrModel, matrix: &FeatureMatrix) -> Result<Vec<PeaceScore>> {
    matrix
        .countries
        .iter()
        .zip(&matrix.rows)
        .map(|(c, row)| ml_peace_index(model, c, row))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCountry {
    pub rank: usize,
    pub score: PeaceScore,
    /// Scaled reference indices in GPI, PPI, WHI, FSI, HDI order.
    pub reference: [Option<f64>; 5],
}

/// Ascending by index, ties by country name.
pub fn rank_countries(scores: &[PeaceScore], reference: &ScaledIndexTable) -> Vec<RankedCountry> {
    let mut sorted: Vec<&PeaceScore> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        a.index
            .total_cmp(&b.index)
            .then_with(|| a.country.cmp(&b.country))
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| RankedCountry {
            rank: i + 1,
            score: s.clone(),
            reference: reference
                .get(&s.country)
                .map(|r| r.values)
                .unwrap_or([None; 5]),
        })
        .collect()
}

/// `rank,country,ml_index,GPI,PPI,WHI,FSI,HDI` with two decimals.
pub fn write_ranking_csv<W: Write>(out: W, ranking: &[RankedCountry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rank", "country", "ml_index"];
    header.extend(IndexName::ALL.iter().map(|n| n.as_str()));
    w.write_record(&header)?;
    for r in ranking {
        let mut rec = vec![
            r.rank.to_string(),
            r.score.country.clone(),
            format!("{:.2}", r.score.index),
        ];
        rec.extend(
            r.reference
                .iter()
                .map(|v| v.map(|x| format!("{x:.2}")).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Sums country tables into one table per class.
pub fn class_tables(
    tables: &[FreqTable],
    labels: &BTreeMap<String, CountryClass>,
) -> BTreeMap<CountryClass, FreqTable> {
    let mut out: BTreeMap<CountryClass, FreqTable> = BTreeMap::new();
    for t in tables {
        let Some(&class) = labels.get(&t.country) else {
            continue;
        };
        out.entry(class)
            .or_insert_with(|| FreqTable {
                country: class.name().to_string(),
                counts: BTreeMap::new(),
                total_words: 0,
            })
            .merge(t);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordReportRow {
    pub class: CountryClass,
    pub rank: usize,
    pub word: String,
    pub count: u64,
    pub important: bool,
}

/// The `top_n` most frequent words of each class, flagged when the word is
/// among the `flag_n` most important features overall.
pub fn word_report(
    tables: &BTreeMap<CountryClass, FreqTable>,
    importance: &ImportanceVector,
    vocab: &Vocabulary,
    top_n: usize,
    flag_n: usize,
) -> Result<Vec<WordReportRow>> {
    if importance.len() != vocab.len() {
        return Err(Error::LengthMismatch {
            expected: vocab.len(),
            actual: importance.len(),
        });
    }
    let flagged: Vec<&str> = importance
        .top(flag_n)
        .into_iter()
        .map(|i| vocab.words[i].as_str())
        .collect();
    let mut rows = Vec::new();
    for (&class, table) in tables {
        for (i, (word, count)) in table.ranked().into_iter().take(top_n).enumerate() {
            rows.push(WordReportRow {
                class,
                rank: i + 1,
                word: word.to_string(),
                count,
                important: flagged.contains(&word),
            });
        }
    }
    Ok(rows)
}

pub fn write_word_report_csv<W: Write>(out: W, rows: &[WordReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "rank", "word", "count", "important"])?;
    for r in rows {
        w.write_record([
            r.class.name(),
            &r.rank.to_string(),
            &r.word,
            &r.count.to_string(),
            if r.important { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordcloudRow {
    pub word: String,
    pub frequency: u64,
    pub class: CountryClass,
    pub important: bool,
}

pub fn wordcloud_rows(rows: &[WordReportRow], important_only: bool) -> Vec<WordcloudRow> {
    rows.iter()
        .filter(|r| r.important || !important_only)
        .map(|r| WordcloudRow {
            word: r.word.clone(),
            frequency: r.count,
            class: r.class,
            important: r.important,
        })
        .collect()
}

/// CSV `word,frequency,class,important`.
pub fn wordcloud_export<W: Write>(out: W, rows: &[WordcloudRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["word", "frequency", "class", "important"])?;
    for r in rows {
        w.write_record([
            r.word.as_str(),
            &r.frequency.to_string(),
            r.class.name(),
            if r.important { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn wordcloud_import<R: Read>(input: R) -> Result<Vec<WordcloudRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::invalid("word-cloud rows need 4 fields"));
        }
        rows.push(WordcloudRow {
            word: rec[0].to_string(),
            frequency: rec[1]
                .parse()
                .map_err(|_| Error::invalid(format!("bad frequency {:?}", &rec[1])))?,
            class: rec[2].parse()?,
            important: match &rec[3] {
                "1" => true,
                "0" => false,
                other => return Err(Error::invalid(format!("bad flag {other:?}"))),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{train_logistic, LrHyper};

    fn binary_model() -> LrModel {
        let x = vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]];
        train_logistic(&x, &[0, 0, 1, 1], &LrHyper::default()).unwrap()
    }

    #[test]
    fn threshold_boundary() {
        let mut m = binary_model();
        let zeros = vec![0.0; m.params().len()];
        m.set_params(&zeros).unwrap();
        let s = ml_peace_index(&m, "X", &[2.0]).unwrap();
        assert_eq!(s.p, 0.5);
        assert_eq!(s.index, 50.0);
        assert_eq!(s.classified_as, CountryClass::Higher);
    }

    #[test]
    fn three_class_model_rejected() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = train_logistic(&x, &[0, 1, 2], &LrHyper::default()).unwrap();
        assert!(ml_peace_index(&m, "X", &[1.0]).is_err());
    }

    #[test]
    fn index_agrees_with_prediction() {
        let m = binary_model();
        for v in [-2.0, 0.5, 1.9, 2.0, 2.1, 6.0] {
            let s = ml_peace_index(&m, "X", &[v]).unwrap();
            assert_eq!(s.index, 100.0 * s.p);
            assert_eq!(s.index >= 50.0, m.predict(&[v]).unwrap() == 1);
        }
    }

    fn score(country: &str, p: f64) -> PeaceScore {
        PeaceScore {
            country: country.into(),
            p,
            index: 100.0 * p,
            classified_as: if p >= 0.5 {
                CountryClass::Higher
            } else {
                CountryClass::Lower
            },
        }
    }

    #[test]
    fn ranking_ties_and_singletons() {
        let empty = ScaledIndexTable { rows: vec![] };
        let r = rank_countries(&[score("B", 0.3), score("A", 0.3), score("C", 0.1)], &empty);
        let names: Vec<&str> = r.iter().map(|x| x.score.country.as_str()).collect();
        assert_eq!(names, ["C", "A", "B"]);
        assert_eq!(rank_countries(&[score("A", 0.9)], &empty)[0].rank, 1);
    }

    #[test]
    fn ranking_csv_has_two_decimals() {
        let reference = ScaledIndexTable {
            rows: vec![crate::indices::IndexRow {
                country: "A".into(),
                values: [Some(12.345), None, None, None, Some(99.0)],
            }],
        };
        let mut buf = Vec::new();
        write_ranking_csv(
            &mut buf,
            &rank_countries(&[score("A", 0.062_23)], &reference),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "1,A,6.22,12.35,,,,99.00");
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(vec!["army".into(), "music".into(), "time".into()]).unwrap()
    }

    fn tables() -> BTreeMap<CountryClass, FreqTable> {
        let t = |name: &str, words: &[(&str, u64)]| {
            let counts = words.iter().map(|(w, c)| (w.to_string(), *c)).collect();
            FreqTable::from_counts(name, counts, None).unwrap()
        };
        let a = t("A", &[("time", 10), ("music", 4), ("army", 1)]);
        let b = t("B", &[("time", 5), ("army", 9)]);
        let labels: BTreeMap<String, CountryClass> = [
            ("A".to_string(), CountryClass::Higher),
            ("B".to_string(), CountryClass::Lower),
        ]
        .into();
        class_tables(&[a, b], &labels)
    }

    #[test]
    fn word_report_flags_are_global() {
        let imp = ImportanceVector(vec![0.7, 0.3, 0.0]);
        let rows = word_report(&tables(), &imp, &vocab(), 100, 1).unwrap();
        for r in &rows {
            assert_eq!(r.important, r.word == "army", "{r:?}");
        }
        let higher: Vec<&str> = rows
            .iter()
            .filter(|r| r.class == CountryClass::Higher)
            .map(|r| r.word.as_str())
            .collect();
        assert_eq!(higher, ["time", "music", "army"]);
        let none = word_report(
            &tables(),
            &ImportanceVector(vec![0.0; 3]),
            &vocab(),
            100,
            50,
        )
        .unwrap();
        assert!(none.iter().all(|r| !r.important));
        assert!(word_report(&tables(), &ImportanceVector(vec![1.0]), &vocab(), 100, 1).is_err());
    }

    #[test]
    fn wordcloud_round_trip() {
        let imp = ImportanceVector(vec![0.7, 0.3, 0.0]);
        let rows = word_report(&tables(), &imp, &vocab(), 100, 2).unwrap();
        let cloud = wordcloud_rows(&rows, false);
        let mut buf = Vec::new();
        wordcloud_export(&mut buf, &cloud).unwrap();
        assert_eq!(wordcloud_import(buf.as_slice()).unwrap(), cloud);

        assert!(wordcloud_rows(&rows, true).iter().all(|r| r.important));
        let mut empty = Vec::new();
        wordcloud_export(&mut empty, &[]).unwrap();
        assert_eq!(
            String::from_utf8(empty).unwrap(),
            "word,frequency,class,important\n"
        );
    }
}
