//! Pipeline stages. Each reads its inputs from the output directory (or the
//! configured sources), writes its outputs there, and leaves a
//! `<file>.meta.json` sidecar next to every output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use log::{info, warn};
use peace_core::corpus::{corpus_stats, CorpusManifest};
use peace_core::evaluation::{
    evaluate, random_baseline, write_fold_log, write_report_csv, z_test, Averaging, Evaluation,
    ReportRow, Scheme,
};
use peace_core::features::{build_vocabulary, featurize, top_k, FeatureMatrix, FreqTable};
use peace_core::indices::{
    assign_classes, divergences, group_table, read_labels, write_groups_csv, write_labels,
    IndexDescriptor, PeaceIndexTable, ScaledIndexTable,
};
use peace_core::learners::{
    gini_importance, train_forest, train_logistic, LearnerSpec, ModelArtifact,
};
use peace_core::meta::{read_json, sidecar_path, write_json, OutputMeta};
use peace_core::scoring::{
    class_tables, rank_countries, score_matrix, word_report, wordcloud_export, wordcloud_rows,
    write_ranking_csv, write_word_report_csv,
};
use peace_core::synthetic::{generate, SynthConfig};
use peace_core::text::{
    preprocess_articles, FilterConfig, DEFAULT_GAZETTEER, DEFAULT_LEMMAS, DEFAULT_STOPWORDS,
};
use peace_core::{CountryClass, Normalization};

use crate::config::RunConfig;
use crate::UsageError;

const TOTALS: &str = "totals.csv";

pub struct Context {
    cfg: RunConfig,
    hash: String,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(anyhow!(msg.into())).into()
}

/// Countries become file names, so they must be plain names.
fn check_country_name(country: &str) -> anyhow::Result<()> {
    if country.is_empty() || country.starts_with('.') || country.contains(['/', '\\', '\0']) {
        bail!("country name {country:?} cannot be used as a file name");
    }
    Ok(())
}

fn read_file(path: &Path) -> anyhow::Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

impl Context {
    pub fn new(cfg: RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&cfg.out)
            .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
        let hash = cfg.hash();
        Ok(Context { cfg, hash })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn meta(&self, stage: &str) -> OutputMeta {
        OutputMeta::new(stage, &self.hash).with_seed("master", self.cfg.seed)
    }

    /// Renders into memory, writes the file, then its sidecar.
    fn emit(
        &self,
        path: &Path,
        meta: &OutputMeta,
        render: impl FnOnce(&mut Vec<u8>) -> peace_core::Result<()>,
    ) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
        meta.write_sidecar(path)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn filter(&self) -> anyhow::Result<FilterConfig> {
        let f = &self.cfg.filter;
        let load = |p: &Option<PathBuf>, fallback: &str| -> anyhow::Result<String> {
            match p {
                Some(path) => fs::read_to_string(path)
                    .with_context(|| format!("reading word list {}", path.display())),
                None => Ok(fallback.to_string()),
            }
        };
        Ok(FilterConfig::from_sources(
            &load(&f.stopwords, DEFAULT_STOPWORDS)?,
            &load(&f.gazetteer, DEFAULT_GAZETTEER)?,
            &load(&f.lemmas, DEFAULT_LEMMAS)?,
            f.boilerplate_threshold,
            f.entity_heuristic,
        )
        .map_err(|e| UsageError(e.into()))?)
    }

    pub fn preprocess(&self) -> anyhow::Result<()> {
        let filter = self.filter()?;
        let manifest = CorpusManifest::load(self.cfg.require_manifest()?)?;
        let (kept, excluded) = manifest.exclude_small(self.cfg.min_articles);
        if kept.countries.is_empty() {
            bail!(
                "every country has fewer than {} articles; nothing to process",
                self.cfg.min_articles
            );
        }
        let token_dir = self.path("tokens");
        let freq_dir = self.path("freq");
        for dir in [&token_dir, &freq_dir] {
            if dir.exists() {
                fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
            }
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }

        let mut words = BTreeMap::new();
        let mut totals = String::from("country,total_words\n");
        for country in &kept.countries {
            check_country_name(country)?;
            let articles = kept
                .stream(country)?
                .collect::<peace_core::Result<Vec<_>>>()?;
            let lemmas = preprocess_articles(&articles, &filter);
            let mut text = String::new();
            for article in &lemmas {
                text.push_str(&article.join(" "));
                text.push('\n');
            }
            let path = token_dir.join(format!("{country}.txt"));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;

            let table = FreqTable::count(country, &lemmas.concat())?;
            let path = freq_dir.join(format!("{country}.csv"));
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
            totals.push_str(&format!("{},{}\n", csv_field(country), table.total_words));
            words.insert(country.clone(), table.total_words);
        }
        let path = freq_dir.join(TOTALS);
        fs::write(&path, totals).with_context(|| format!("writing {}", path.display()))?;

        let excluded_names: Vec<&str> = excluded.iter().map(|e| e.country.as_str()).collect();
        let meta = self
            .meta("preprocess")
            .with_extra("countries", &kept.countries)
            .with_extra("excluded", &excluded_names);
        meta.write_sidecar(&token_dir)?;
        meta.write_sidecar(&freq_dir)?;
        let stats = corpus_stats(&kept, &words)?;
        self.emit(&self.path("corpus_stats.csv"), &meta, |w| {
            stats.write_csv(w)
        })
    }

    fn freq_source(&self) -> PathBuf {
        self.cfg
            .freq_dir
            .clone()
            .unwrap_or_else(|| self.path("freq"))
    }

    /// Frequency tables in country order, from `totals.csv` when present or
    /// else every `<country>.csv` in the directory.
    fn load_tables(&self) -> anyhow::Result<Vec<FreqTable>> {
        let dir = self.freq_source();
        if !dir.is_dir() {
            bail!(
                "frequency tables not found at {} (run `preprocess` first)",
                dir.display()
            );
        }
        let totals_path = dir.join(TOTALS);
        let mut order: Vec<(String, Option<u64>)> = Vec::new();
        if totals_path.exists() {
            let text = fs::read_to_string(&totals_path)
                .with_context(|| format!("reading {}", totals_path.display()))?;
            for (i, line) in text.lines().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let (country, total) = line.rsplit_once(',').ok_or_else(|| {
                    anyhow!(
                        "{}:{}: expected `country,total_words`",
                        totals_path.display(),
                        i + 1
                    )
                })?;
                let total: u64 = total.trim().parse().with_context(|| {
                    format!("{}:{}: bad total {total:?}", totals_path.display(), i + 1)
                })?;
                order.push((unquote(country), Some(total)));
            }
        } else {
            let mut names: Vec<String> = fs::read_dir(&dir)
                .with_context(|| format!("listing {}", dir.display()))?
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    name.strip_suffix(".csv").map(str::to_string)
                })
                .collect();
            names.sort();
            order = names.into_iter().map(|n| (n, None)).collect();
        }
        if order.is_empty() {
            bail!("no frequency tables in {}", dir.display());
        }
        order
            .into_iter()
            .map(|(country, total)| {
                check_country_name(&country)?;
                let path = dir.join(format!("{country}.csv"));
                FreqTable::read_csv(&country, read_file(&path)?, total)
                    .with_context(|| format!("reading {}", path.display()))
            })
            .collect()
    }

    pub fn featurize(&self) -> anyhow::Result<()> {
        let tables = self.load_tables()?;
        let mut lists = Vec::new();
        let mut short = Vec::new();
        for t in &tables {
            let top = top_k(t, self.cfg.k)?;
            if top.short {
                short.push(t.country.clone());
            }
            lists.push((t.country.clone(), top.words));
        }
        let vocab = build_vocabulary(&lists)?;
        let matrix = featurize(&tables, &vocab, self.cfg.normalization)?;
        let info = matrix.info();
        let meta = self
            .meta("featurize")
            .with_extra("k", self.cfg.k)
            .with_extra("normalization", info.normalization)
            .with_extra("vocab_size", info.vocab_size)
            .with_extra("vocab_hash", &info.vocab_hash)
            .with_extra("short_countries", &short);

        let mut vocab_csv = String::from("word,countries\n");
        for w in &vocab.words {
            let from: Vec<&str> = vocab.provenance[w].iter().map(String::as_str).collect();
            vocab_csv.push_str(&format!("{w},{}\n", csv_field(&from.join(";"))));
        }
        self.emit(&self.path("vocabulary.csv"), &meta, |w| {
            w.extend_from_slice(vocab_csv.as_bytes());
            Ok(())
        })?;
        self.emit(&self.path("feature_matrix.csv"), &meta, |w| {
            matrix.write_csv(w)
        })
    }

    fn load_matrix(&self, path: &Path) -> anyhow::Result<FeatureMatrix> {
        let sidecar = sidecar_path(path);
        let normalization = if sidecar.exists() {
            let meta: OutputMeta = read_json(&sidecar)?;
            match meta.extra.get("normalization") {
                Some(v) => serde_json::from_value::<Normalization>(v.clone())?,
                None => self.cfg.normalization,
            }
        } else {
            self.cfg.normalization
        };
        let file = read_file(path).context("feature matrix missing (run `featurize` first)")?;
        FeatureMatrix::read_csv(file, normalization)
            .with_context(|| format!("reading {}", path.display()))
    }

    pub fn classify_countries(&self) -> anyhow::Result<()> {
        let meta = self
            .meta("classify-countries")
            .with_extra("tertile", self.cfg.tertile);
        let computed = match &self.cfg.indices {
            Some(path) => {
                let raw = PeaceIndexTable::read_csv(read_file(path)?)
                    .with_context(|| format!("reading {}", path.display()))?;
                let (scaled, skipped) = raw.scale(&IndexDescriptor::defaults())?;
                let meta = meta.clone().with_extra("skipped_indices", &skipped);
                self.emit(&self.path("scaled_indices.csv"), &meta, |w| {
                    scaled.write_csv(w)
                })?;
                let groups = group_table(&scaled, self.cfg.tertile);
                let countries = raw.countries();
                let classes = assign_classes(&groups, &countries);
                self.emit(&self.path("class_groups.csv"), &meta, |w| {
                    write_groups_csv(w, &countries, &groups, &classes)
                })?;
                Some((countries, classes))
            }
            None => None,
        };

        let out = self.path("classes.csv");
        match (&self.cfg.labels_file, computed) {
            (Some(path), computed) => {
                let bytes =
                    fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let labels = read_labels(bytes.as_slice())
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut meta = meta.with_extra("source", "labels_file");
                if let Some((_, classes)) = computed {
                    let diff: Vec<String> = divergences(&classes, &labels)
                        .into_iter()
                        .map(|(c, got, want)| {
                            warn!("{c}: tertile vote gives {got}, labels file says {want}");
                            format!("{c}: {got} -> {want}")
                        })
                        .collect();
                    meta = meta.with_extra("tertile_divergences", diff);
                }
                self.emit(&out, &meta, |w| {
                    w.extend_from_slice(&bytes);
                    Ok(())
                })
            }
            (None, Some((countries, classes))) => {
                let labels: Vec<(String, CountryClass)> =
                    countries.iter().map(|c| (c.clone(), classes[c])).collect();
                let meta = meta.with_extra("source", "tertile_vote");
                self.emit(&out, &meta, |w| write_labels(w, &labels))
            }
            (None, None) => Err(usage("classify-countries needs `indices` or `labels_file`")),
        }
    }

    fn load_labels(&self) -> anyhow::Result<BTreeMap<String, CountryClass>> {
        let path = self.path("classes.csv");
        let file =
            read_file(&path).context("country classes missing (run `classify-countries` first)")?;
        Ok(read_labels(file)?.into_iter().collect())
    }

    /// Rows and labels of the matrix countries whose class is in `keep`.
    fn training_set(
        matrix: &FeatureMatrix,
        labels: &BTreeMap<String, CountryClass>,
        keep: &[CountryClass],
    ) -> (Vec<String>, Vec<Vec<f64>>, Vec<usize>) {
        let mut names = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, row) in matrix.countries.iter().zip(&matrix.rows) {
            if let Some(class) = labels.get(c).filter(|k| keep.contains(k)) {
                names.push(c.clone());
                x.push(row.clone());
                y.push(class.label());
            }
        }
        (names, x, y)
    }

    pub fn train(&self) -> anyhow::Result<()> {
        let matrix = self.load_matrix(&self.path("feature_matrix.csv"))?;
        let labels = self.load_labels()?;
        let (names, x, y) = Self::training_set(
            &matrix,
            &labels,
            &[CountryClass::Lower, CountryClass::Higher],
        );
        if !y.contains(&0) || !y.contains(&1) {
            bail!("training needs countries of both the lower and the higher class");
        }
        let mut artifact = ModelArtifact::new(&matrix.vocab, matrix.normalization, self.cfg.seed);
        artifact.logistic = Some(train_logistic(&x, &y, &self.cfg.logistic)?);
        artifact.forest = Some(train_forest(&x, &y, &self.cfg.forest, self.cfg.seed)?);
        let meta = self.meta("train").with_extra("training_countries", &names);
        let path = self.path("model.json");
        write_json(&path, &artifact)?;
        meta.write_sidecar(&path)?;
        Ok(())
    }

    pub fn evaluate(&self) -> anyhow::Result<()> {
        let matrix = self.load_matrix(&self.path("feature_matrix.csv"))?;
        let labels = self.load_labels()?;
        let sets = [
            (2, vec![CountryClass::Lower, CountryClass::Higher]),
            (
                3,
                vec![
                    CountryClass::Lower,
                    CountryClass::Higher,
                    CountryClass::Intermediate,
                ],
            ),
        ];
        let learners = [
            LearnerSpec::Logistic(self.cfg.logistic),
            LearnerSpec::Forest(self.cfg.forest),
        ];
        let mut rows = Vec::new();
        let mut significance = String::from("model,scheme,z,p_value,sem_choice\n");
        let mut folds: Vec<(String, Vec<String>, Evaluation)> = Vec::new();
        for (k, keep) in &sets {
            let (names, x, y) = Self::training_set(&matrix, &labels, keep);
            let present: std::collections::BTreeSet<usize> = y.iter().copied().collect();
            if present.len() != *k {
                warn!(
                    "{k}-class evaluation skipped: only {} class(es) present",
                    present.len()
                );
                continue;
            }
            let baseline = random_baseline(&y, self.cfg.n_runs, self.cfg.seed)?;
            rows.push(ReportRow {
                model: "random_guess".into(),
                scheme: format!("{k}-class"),
                aggregate: baseline,
            });
            for spec in &learners {
                for scheme in [Scheme::Loocv, Scheme::Holdout8020] {
                    if scheme == Scheme::Holdout8020 && y.len() < 5 {
                        warn!("{k}-class 80/20 split skipped: {} countries", y.len());
                        continue;
                    }
                    let ev = evaluate(
                        &x,
                        &y,
                        spec,
                        scheme,
                        self.cfg.n_runs,
                        self.cfg.seed,
                        Averaging::Weighted,
                    )?;
                    let label = format!("{k}-class {}", scheme.as_str());
                    let z = z_test(
                        &ev.aggregate.accuracy,
                        &baseline.accuracy,
                        self.cfg.sem_choice,
                    );
                    significance.push_str(&format!(
                        "{},{},{},{},{}\n",
                        spec.name(),
                        label,
                        z.z,
                        z.p_value,
                        serde_json::to_value(z.sem_choice)?
                            .as_str()
                            .unwrap_or_default()
                    ));
                    rows.push(ReportRow {
                        model: spec.name().into(),
                        scheme: label,
                        aggregate: ev.aggregate,
                    });
                    let tag = match scheme {
                        Scheme::Loocv => "loocv",
                        Scheme::Holdout8020 => "holdout",
                    };
                    folds.push((format!("{}_{k}class_{tag}", spec.name()), names.clone(), ev));
                }
            }
        }
        if rows.is_empty() {
            bail!("no class set could be evaluated");
        }
        let meta = self
            .meta("evaluate")
            .with_extra("n_runs", self.cfg.n_runs)
            .with_extra("averaging", Averaging::Weighted)
            .with_extra("sem_choice", self.cfg.sem_choice);
        self.emit(&self.path("evaluation.csv"), &meta, |w| {
            write_report_csv(w, &rows)
        })?;
        self.emit(&self.path("significance.csv"), &meta, |w| {
            w.extend_from_slice(significance.as_bytes());
            Ok(())
        })?;
        let fold_dir = self.path("folds");
        for (name, countries, ev) in &folds {
            self.emit(&fold_dir.join(format!("{name}.csv")), &meta, |w| {
                write_fold_log(w, ev, countries)
            })?;
        }
        Ok(())
    }

    fn load_artifact(&self, matrix: &FeatureMatrix) -> anyhow::Result<ModelArtifact> {
        let path = self.path("model.json");
        if !path.exists() {
            bail!(
                "model artifact missing at {} (run `train` first)",
                path.display()
            );
        }
        let artifact = ModelArtifact::load(&path)?;
        artifact.check_vocabulary(&matrix.vocab)?;
        Ok(artifact)
    }

    pub fn importance(&self) -> anyhow::Result<()> {
        let matrix = self.load_matrix(&self.path("feature_matrix.csv"))?;
        let artifact = self.load_artifact(&matrix)?;
        let forest = artifact
            .forest
            .ok_or_else(|| anyhow!("model artifact has no forest"))?;
        let importance = gini_importance(&forest);
        let meta = self
            .meta("importance")
            .with_extra("top_n", self.cfg.top_n)
            .with_extra("flag_n", self.cfg.flag_n);

        let mut ranked: Vec<usize> = (0..importance.len()).collect();
        ranked.sort_by(|&a, &b| importance.0[b].total_cmp(&importance.0[a]).then(a.cmp(&b)));
        let mut imp_csv = String::from("rank,word,importance\n");
        for (r, &i) in ranked.iter().enumerate() {
            imp_csv.push_str(&format!(
                "{},{},{}\n",
                r + 1,
                matrix.vocab.words[i],
                importance.0[i]
            ));
        }
        self.emit(&self.path("importance.csv"), &meta, |w| {
            w.extend_from_slice(imp_csv.as_bytes());
            Ok(())
        })?;

        let labels: BTreeMap<String, CountryClass> = self
            .load_labels()?
            .into_iter()
            .filter(|(_, c)| *c != CountryClass::Intermediate)
            .collect();
        let tables = self.load_tables()?;
        let by_class = class_tables(&tables, &labels);
        let rows = word_report(
            &by_class,
            &importance,
            &matrix.vocab,
            self.cfg.top_n,
            self.cfg.flag_n,
        )?;
        self.emit(&self.path("word_report.csv"), &meta, |w| {
            write_word_report_csv(w, &rows)
        })?;
        for class in [CountryClass::Higher, CountryClass::Lower] {
            let subset: Vec<_> = rows.iter().filter(|r| r.class == class).cloned().collect();
            let cloud = wordcloud_rows(&subset, true);
            let path = self.path(&format!("wordcloud_{}.csv", class.name()));
            self.emit(&path, &meta, |w| wordcloud_export(w, &cloud))?;
        }
        Ok(())
    }

    pub fn score(&self, matrix_path: Option<&Path>) -> anyhow::Result<()> {
        let default_path = self.path("feature_matrix.csv");
        let matrix = self.load_matrix(matrix_path.unwrap_or(&default_path))?;
        let artifact = self.load_artifact(&matrix)?;
        let model = artifact
            .logistic
            .ok_or_else(|| anyhow!("model artifact has no logistic regression"))?;
        let scores = score_matrix(&model, &matrix)?;
        let scaled_path = self.path("scaled_indices.csv");
        let reference = if scaled_path.exists() {
            ScaledIndexTable::read_csv(read_file(&scaled_path)?)?
        } else {
            ScaledIndexTable { rows: Vec::new() }
        };
        let ranking = rank_countries(&scores, &reference);
        let meta = self.meta("score");
        self.emit(&self.path("ranking.csv"), &meta, |w| {
            write_ranking_csv(w, &ranking)
        })?;
        let json = self.path("ranking.json");
        write_json(&json, &ranking)?;
        meta.write_sidecar(&json)?;
        Ok(())
    }

    pub fn report(&self) -> anyhow::Result<()> {
        if self.cfg.freq_dir.is_none() {
            self.preprocess()?;
        }
        self.featurize()?;
        self.classify_countries()?;
        self.train()?;
        self.evaluate()?;
        self.importance()?;
        self.score(None)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    match s.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        Some(inner) => inner.replace("\"\"", "\""),
        None => s.to_string(),
    }
}

/// Writes a synthetic corpus plus `config.toml` pointing at it.
pub fn synth(
    dir: &Path,
    higher: usize,
    lower: usize,
    articles: usize,
    seed: u64,
) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_higher: higher,
        n_lower: lower,
        articles_per_country: articles,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg, seed).map_err(|e| UsageError(e.into()))?;
    let manifest = corpus.write(dir)?;
    let config = format!(
        "manifest = \"{}\"\nlabels_file = \"labels.csv\"\nout = \"out\"\nseed = {seed}\nmin_articles = 1\n",
        manifest.file_name().and_then(|n| n.to_str()).unwrap_or("manifest.tsv"),
    );
    let path = dir.join("config.toml");
    fs::write(&path, config).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}
