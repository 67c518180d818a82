use std::collections::BTreeMap;
use std::fs;

use peace_core::corpus::{corpus_stats, load_manifest, stream_articles};
use peace_core::features::{matrix_from_tables, FreqTable, Normalization};
use peace_core::indices::read_labels;
use peace_core::learners::{gini_importance, train_forest, train_logistic, ModelArtifact};
use peace_core::scoring::{class_tables, score_matrix, word_report, wordcloud_rows};
use peace_core::synthetic::{generate, SynthConfig};
use peace_core::text::{preprocess_articles, FilterConfig};
use peace_core::{CountryClass, LrHyper, RfHyper};

#[test]
fn corpus_on_disk_to_word_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(
        &SynthConfig {
            articles_per_country: 12,
            ..SynthConfig::default()
        },
        21,
    )
    .unwrap();
    let manifest_path = corpus.write(dir.path()).unwrap();

    let manifest = load_manifest(&manifest_path).unwrap();
    assert_eq!(manifest.countries.len(), 10);
    let filter = FilterConfig::builtin();
    let mut tables = Vec::new();
    let mut words = BTreeMap::new();
    for country in &manifest.countries {
        let articles: Vec<_> = stream_articles(&manifest, country)
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(articles.len(), 12);
        let lemmas = preprocess_articles(&articles, &filter).concat();
        words.insert(country.clone(), lemmas.len() as u64);
        tables.push(FreqTable::count(country, &lemmas).unwrap());
    }
    let stats = corpus_stats(&manifest, &words).unwrap();
    assert_eq!(stats.total_articles(), 120);

    let labels: BTreeMap<String, CountryClass> =
        read_labels(fs::File::open(dir.path().join("labels.csv")).unwrap())
            .unwrap()
            .into_iter()
            .collect();
    let matrix = matrix_from_tables(&tables, 300, Normalization::PerMillion).unwrap();
    let y: Vec<usize> = matrix.countries.iter().map(|c| labels[c].label()).collect();

    let forest = train_forest(&matrix.rows, &y, &RfHyper::default(), 3).unwrap();
    let importance = gini_importance(&forest);
    let by_class = class_tables(&tables, &labels);
    let planted = corpus.planted();
    let rows = word_report(&by_class, &importance, &matrix.vocab, 100, 50).unwrap();
    let flagged: Vec<&str> = rows
        .iter()
        .filter(|r| r.important)
        .map(|r| r.word.as_str())
        .collect();
    assert!(flagged.iter().all(|w| matrix.vocab.index_of(w).is_some()));
    // Planted words are redundant perfect separators; split ties go to the
    // lower feature index, so a few of them may never win a split.
    let planted_mass: f64 = planted
        .iter()
        .map(|w| importance.0[matrix.vocab.index_of(w).unwrap()])
        .sum();
    assert!(planted_mass >= 0.8, "{planted_mass}");
    let hits = planted
        .iter()
        .filter(|w| flagged.contains(&w.as_str()))
        .count();
    assert!(
        hits * 10 >= planted.len() * 8,
        "{hits} of {} planted words flagged",
        planted.len()
    );
    assert!(wordcloud_rows(&rows, true).iter().all(|r| r.important));

    let model = train_logistic(&matrix.rows, &y, &LrHyper::default()).unwrap();
    for s in score_matrix(&model, &matrix).unwrap() {
        assert_eq!(s.classified_as, labels[&s.country], "{}", s.country);
    }

    let path = dir.path().join("model.json");
    let mut artifact = ModelArtifact::new(&matrix.vocab, matrix.normalization, 3);
    artifact.logistic = Some(model);
    artifact.forest = Some(forest);
    artifact.save(&path).unwrap();
    let loaded = ModelArtifact::load(&path).unwrap();
    assert_eq!(loaded, artifact);
    loaded.check_vocabulary(&matrix.vocab).unwrap();
}

#[test]
fn unknown_country_and_bad_lines_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("a.jsonl"),
        "{\"country\":\"A\",\"text\":\"peace talks\"}\nnot json\n",
    )
    .unwrap();
    fs::write(dir.path().join("m.tsv"), "A\ta.jsonl\n").unwrap();
    let manifest = load_manifest(&dir.path().join("m.tsv")).unwrap();
    assert!(stream_articles(&manifest, "B").is_err());
    let items: Vec<_> = stream_articles(&manifest, "A").unwrap().collect();
    assert!(items[0].is_ok());
    let err = items[1].as_ref().unwrap_err().to_string();
    assert!(err.contains("a.jsonl") && err.contains('2'), "{err}");
}
