//! The five external peace indices: 0-100 scaling, tertile grouping and the
//! majority-vote class assignment.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IndexName {
    Gpi,
    Ppi,
    Whi,
    Fsi,
    Hdi,
}

impl IndexName {
    pub const ALL: [IndexName; 5] = [
        IndexName::Gpi,
        IndexName::Ppi,
        IndexName::Whi,
        IndexName::Fsi,
        IndexName::Hdi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexName::Gpi => "GPI",
            IndexName::Ppi => "PPI",
            IndexName::Whi => "WHI",
            IndexName::Fsi => "FSI",
            IndexName::Hdi => "HDI",
        }
    }

    fn column(self) -> usize {
        self as usize
    }
}

impl fmt::Display for IndexName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexName::ALL
            .into_iter()
            .find(|n| n.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown index {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherRawIsMorePeaceful,
    LowerRawIsMorePeaceful,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexDescriptor {
    pub name: IndexName,
    pub raw_range: (f64, f64),
    pub direction: Direction,
}

impl IndexDescriptor {
    /// Published scales: GPI and PPI run 5 (least peaceful) to 1, WHI 0 to
    /// 10, FSI 120 (most fragile) to 0, HDI 0 to 1.
    pub fn defaults() -> [IndexDescriptor; 5] {
        use Direction::*;
        let d = |name, lo, hi, direction| IndexDescriptor {
            name,
            raw_range: (lo, hi),
            direction,
        };
        [
            d(IndexName::Gpi, 1.0, 5.0, LowerRawIsMorePeaceful),
            d(IndexName::Ppi, 1.0, 5.0, LowerRawIsMorePeaceful),
            d(IndexName::Whi, 0.0, 10.0, HigherRawIsMorePeaceful),
            d(IndexName::Fsi, 0.0, 120.0, LowerRawIsMorePeaceful),
            d(IndexName::Hdi, 0.0, 1.0, HigherRawIsMorePeaceful),
        ]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.raw_range.0 && x <= self.raw_range.1
    }
}

/// Lower = 0, Higher = 1, Intermediate = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum CountryClass {
    Lower = 0,
    Higher = 1,
    Intermediate = 2,
}

impl CountryClass {
    pub fn label(self) -> usize {
        self as usize
    }

    pub fn from_label(label: usize) -> Result<Self> {
        match label {
            0 => Ok(CountryClass::Lower),
            1 => Ok(CountryClass::Higher),
            2 => Ok(CountryClass::Intermediate),
            other => Err(Error::invalid(format!(
                "class label {other} not in {{0,1,2}}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CountryClass::Lower => "lower",
            CountryClass::Higher => "higher",
            CountryClass::Intermediate => "intermediate",
        }
    }
}

impl From<CountryClass> for u8 {
    fn from(c: CountryClass) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for CountryClass {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        CountryClass::from_label(v as usize)
    }
}

impl fmt::Display for CountryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CountryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "lower" => Ok(CountryClass::Lower),
            "1" | "higher" => Ok(CountryClass::Higher),
            "2" | "intermediate" => Ok(CountryClass::Intermediate),
            other => Err(Error::invalid(format!("unknown class {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub country: String,
    pub values: [Option<f64>; 5],
}

impl IndexRow {
    pub fn get(&self, name: IndexName) -> Option<f64> {
        self.values[name.column()]
    }
}

fn column_of(rows: &[IndexRow], name: IndexName) -> BTreeMap<String, f64> {
    rows.iter()
        .filter_map(|r| r.get(name).map(|v| (r.country.clone(), v)))
        .collect()
}

fn read_index_csv<R: Read>(input: R) -> Result<Vec<IndexRow>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0).map(|h| h.eq_ignore_ascii_case("country")) != Some(true) {
        return Err(Error::invalid(
            "index CSV must start with a `country` column",
        ));
    }
    let mut cols = [None; 5];
    for (i, h) in header.iter().enumerate().skip(1) {
        let name: IndexName = h.parse()?;
        cols[name.column()] = Some(i);
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut values = [None; 5];
        for (slot, col) in values.iter_mut().zip(cols) {
            if let Some(field) = col.and_then(|c| rec.get(c)).filter(|f| !f.is_empty()) {
                *slot = Some(field.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("{}: bad index value {field:?}", &rec[0]))
                })?);
            }
        }
        rows.push(IndexRow {
            country: rec[0].to_string(),
            values,
        });
    }
    Ok(rows)
}

/// Raw index averages per country, blank where an index does not cover a
/// country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeaceIndexTable {
    pub rows: Vec<IndexRow>,
}

impl PeaceIndexTable {
    /// CSV `country,GPI,PPI,WHI,FSI,HDI`; blanks are missing values.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        Ok(PeaceIndexTable {
            rows: read_index_csv(input)?,
        })
    }

    pub fn countries(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.country.clone()).collect()
    }

    pub fn column(&self, name: IndexName) -> BTreeMap<String, f64> {
        column_of(&self.rows, name)
    }

    /// Scales every index that has at least two distinct values. Indices that
    /// cannot be scaled are reported and left blank.
    pub fn scale(
        &self,
        descriptors: &[IndexDescriptor; 5],
    ) -> Result<(ScaledIndexTable, Vec<IndexName>)> {
        let mut rows: Vec<IndexRow> = self
            .rows
            .iter()
            .map(|r| IndexRow {
                country: r.country.clone(),
                values: [None; 5],
            })
            .collect();
        let mut skipped = Vec::new();
        for desc in descriptors {
            let column = self.column(desc.name);
            if column.len() < 2 {
                log::warn!("{}: {} value(s), column skipped", desc.name, column.len());
                skipped.push(desc.name);
                continue;
            }
            let scaled = scale_index(&column, desc)?;
            for row in &mut rows {
                row.values[desc.name.column()] = scaled.get(&row.country).copied();
            }
        }
        Ok((ScaledIndexTable { rows }, skipped))
    }
}

/// Linear map onto 0 (least peaceful) .. 100 (most peaceful) using the
/// minimum and maximum over the supplied countries.
pub fn scale_index(
    values: &BTreeMap<String, f64>,
    desc: &IndexDescriptor,
) -> Result<BTreeMap<String, f64>> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "{}: need at least 2 values",
            desc.name
        )));
    }
    for (country, &x) in values {
        if !x.is_finite() || !desc.contains(x) {
            return Err(Error::invalid(format!(
                "{} value {x} for {country} outside {:?}",
                desc.name, desc.raw_range
            )));
        }
    }
    let min = values.values().copied().fold(f64::INFINITY, f64::min);
    let max = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::invalid(format!("{}: all values equal", desc.name)));
    }
    let span = max - min;
    Ok(values
        .iter()
        .map(|(c, &x)| {
            let s = match desc.direction {
                Direction::HigherRawIsMorePeaceful => 100.0 * ((x - min) / span),
                Direction::LowerRawIsMorePeaceful => 100.0 * ((max - x) / span),
            };
            (c.clone(), s)
        })
        .collect())
}

/// Index values on the common 0-100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledIndexTable {
    pub rows: Vec<IndexRow>,
}

impl ScaledIndexTable {
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        Ok(ScaledIndexTable {
            rows: read_index_csv(input)?,
        })
    }

    pub fn column(&self, name: IndexName) -> BTreeMap<String, f64> {
        column_of(&self.rows, name)
    }

    pub fn get(&self, country: &str) -> Option<&IndexRow> {
        self.rows.iter().find(|r| r.country == country)
    }

    /// Two-decimal CSV, blanks for missing values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["country"];
        header.extend(IndexName::ALL.iter().map(|n| n.as_str()));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.country.clone()];
            rec.extend(
                r.values
                    .iter()
                    .map(|v| v.map(|x| format!("{x:.2}")).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Low,
    Middle,
    High,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Low => "low",
            Group::Middle => "mid",
            Group::High => "high",
        }
    }
}

/// How many countries the two outer thirds receive when `n` is not a
/// multiple of three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TertileConvention {
    /// `ceil(n/3)` each: 17 countries split 6/5/6.
    #[default]
    CeilOuter,
    /// `floor(n/3)` each: 17 countries split 5/7/5.
    FloorOuter,
}

impl TertileConvention {
    pub fn outer_size(self, n: usize) -> usize {
        match self {
            TertileConvention::CeilOuter => n.div_ceil(3),
            TertileConvention::FloorOuter => n / 3,
        }
    }
}

impl FromStr for TertileConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ceil_outer" => Ok(TertileConvention::CeilOuter),
            "floor_outer" => Ok(TertileConvention::FloorOuter),
            other => Err(Error::invalid(format!(
                "unknown tertile convention {other:?}"
            ))),
        }
    }
}

/// Sorts ascending (ties by country) and cuts into low / middle / high.
pub fn tertile_groups(
    scaled: &BTreeMap<String, f64>,
    convention: TertileConvention,
) -> Result<BTreeMap<String, Group>> {
    let n = scaled.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 values for tertiles, got {n}"
        )));
    }
    let mut order: Vec<(&String, f64)> = scaled.iter().map(|(c, &v)| (c, v)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let outer = convention.outer_size(n);
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, (c, _))| {
            let g = if i < outer {
                Group::Low
            } else if i >= n - outer {
                Group::High
            } else {
                Group::Middle
            };
            (c.clone(), g)
        })
        .collect())
}

/// Tertile membership of every country under every index.
pub type IndexGroups = BTreeMap<IndexName, BTreeMap<String, Group>>;

pub fn group_table(table: &ScaledIndexTable, convention: TertileConvention) -> IndexGroups {
    let mut groups = IndexGroups::new();
    for name in IndexName::ALL {
        let column = table.column(name);
        match tertile_groups(&column, convention) {
            Ok(g) => {
                groups.insert(name, g);
            }
            Err(e) => log::warn!("{name}: no tertiles ({e})"),
        }
    }
    groups
}

/// Lower with 3+ indices in the low third, Higher with 3+ in the high third,
/// otherwise Intermediate. Missing indices count toward neither.
pub fn assign_classes(
    groups: &IndexGroups,
    countries: &[String],
) -> BTreeMap<String, CountryClass> {
    countries
        .iter()
        .map(|c| {
            let count = |target: Group| {
                groups
                    .values()
                    .filter(|g| g.get(c) == Some(&target))
                    .count()
            };
            let class = if count(Group::Low) >= 3 {
                CountryClass::Lower
            } else if count(Group::High) >= 3 {
                CountryClass::Higher
            } else {
                CountryClass::Intermediate
            };
            (c.clone(), class)
        })
        .collect()
}

/// Table-4 style CSV: per-index group (`low`/`mid`/`high`, blank when
/// missing) plus the final class label.
pub fn write_groups_csv<W: Write>(
    out: W,
    countries: &[String],
    groups: &IndexGroups,
    classes: &BTreeMap<String, CountryClass>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["country"];
    header.extend(IndexName::ALL.iter().map(|n| n.as_str()));
    header.push("class");
    w.write_record(&header)?;
    for c in countries {
        let mut rec = vec![c.clone()];
        for name in IndexName::ALL {
            let g = groups.get(&name).and_then(|g| g.get(c));
            rec.push(g.map(|g| g.as_str().to_string()).unwrap_or_default());
        }
        rec.push(
            classes
                .get(c)
                .map(|k| k.label().to_string())
                .unwrap_or_default(),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Labels CSV `country,class`; class as 0/1/2 or lower/higher/intermediate.
pub fn read_labels<R: Read>(input: R) -> Result<Vec<(String, CountryClass)>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out: Vec<(String, CountryClass)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::invalid("labels rows need `country,class`"));
        }
        let country = rec[0].to_string();
        if out.iter().any(|(c, _)| *c == country) {
            return Err(Error::invalid(format!("duplicate label for {country}")));
        }
        out.push((country, rec[1].parse()?));
    }
    Ok(out)
}

pub fn write_labels<W: Write>(out: W, labels: &[(String, CountryClass)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["country", "class"])?;
    for (c, k) in labels {
        w.write_record([c.as_str(), &k.label().to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Countries whose computed class differs from a reference assignment, as
/// `(country, computed, reference)`.
pub fn divergences(
    computed: &BTreeMap<String, CountryClass>,
    reference: &[(String, CountryClass)],
) -> Vec<(String, CountryClass, CountryClass)> {
    reference
        .iter()
        .filter_map(|(c, r)| match computed.get(c) {
            Some(k) if k != r => Some((c.clone(), *k, *r)),
            _ => None,
        })
        .collect()
}
