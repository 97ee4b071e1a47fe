//! Human failure labels and "if A disagrees then B disagrees" rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RulesError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("query {0:?}: successful_alternative cannot be combined with other labels")]
    ExclusiveAlternative(String),
    #[error("query {query_id:?}: rating {rating} outside 1..=10")]
    RatingOutOfRange { query_id: String, rating: i64 },
    #[error("no label records")]
    EmptyInput,
    #[error("minimum support must be in (0, 100] (got {0})")]
    InvalidSupport(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    ObjectClass,
    ObjectColor,
    ObjectEnumeration,
    Action,
    Size,
    Details,
    SuccessfulAlternative,
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::ObjectClass,
        Label::ObjectColor,
        Label::ObjectEnumeration,
        Label::Action,
        Label::Size,
        Label::Details,
        Label::SuccessfulAlternative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::ObjectClass => "object_class",
            Label::ObjectColor => "object_color",
            Label::ObjectEnumeration => "object_enumeration",
            Label::Action => "action",
            Label::Size => "size",
            Label::Details => "details",
            Label::SuccessfulAlternative => "successful_alternative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label {s:?}"))
    }
}

/// One annotator verdict on a failed query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanLabelRecord {
    pub query_id: String,
    pub labels: BTreeSet<Label>,
    pub rating: u8,
}

impl HumanLabelRecord {
    pub fn new(query_id: impl Into<String>, labels: BTreeSet<Label>, rating: i64) -> Result<Self, RulesError> {
        let query_id = query_id.into();
        if labels.contains(&Label::SuccessfulAlternative) && labels.len() > 1 {
            return Err(RulesError::ExclusiveAlternative(query_id));
        }
        if !(1..=10).contains(&rating) {
            return Err(RulesError::RatingOutOfRange { query_id, rating });
        }
        Ok(Self {
            query_id,
            labels,
            rating: rating as u8,
        })
    }
}

#[derive(Deserialize)]
struct LabelRow {
    query_id: String,
    labels: String,
    rating: i64,
}

/// `query_id,labels,rating` with `;`-joined labels; an empty label field is allowed.
pub fn read_labels_from(reader: impl Read) -> Result<Vec<HumanLabelRecord>, RulesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| RulesError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        let labels = row
            .labels
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|reason| RulesError::Parse { line, reason }))
            .collect::<Result<BTreeSet<Label>, _>>()?;
        out.push(HumanLabelRecord::new(row.query_id, labels, row.rating)?);
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<HumanLabelRecord>, RulesError> {
    read_labels_from(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub n_records: usize,
    /// Percentage of records carrying each label; every label is present.
    pub pct: BTreeMap<Label, f64>,
    pub mean_rating: f64,
}

pub fn label_distribution(records: &[HumanLabelRecord]) -> Result<LabelDistribution, RulesError> {
    if records.is_empty() {
        return Err(RulesError::EmptyInput);
    }
    let n = records.len() as f64;
    let pct = Label::ALL
        .into_iter()
        .map(|l| {
            let c = records.iter().filter(|r| r.labels.contains(&l)).count();
            (l, c as f64 / n * 100.0)
        })
        .collect();
    let mean_rating = records.iter().map(|r| f64::from(r.rating)).sum::<f64>() / n;
    Ok(LabelDistribution {
        n_records: records.len(),
        pct,
        mean_rating,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: Label,
    pub consequent: Label,
    /// Records with both labels over records with the antecedent, in percent.
    pub pct: f64,
    pub support: usize,
}

/// All `A -> B` rules reaching `min_support_pct`, strongest first; ties
/// follow label order.
pub fn mine_rules(records: &[HumanLabelRecord], min_support_pct: f64) -> Result<Vec<Rule>, RulesError> {
    if !(min_support_pct > 0.0 && min_support_pct <= 100.0) {
        return Err(RulesError::InvalidSupport(min_support_pct));
    }
    let mut rules = Vec::new();
    for a in Label::ALL {
        let with_a: Vec<&HumanLabelRecord> = records.iter().filter(|r| r.labels.contains(&a)).collect();
        if with_a.is_empty() {
            continue;
        }
        for b in Label::ALL.into_iter().filter(|&b| b != a) {
            let support = with_a.iter().filter(|r| r.labels.contains(&b)).count();
            let pct = support as f64 / with_a.len() as f64 * 100.0;
            if pct >= min_support_pct {
                rules.push(Rule {
                    antecedent: a,
                    consequent: b,
                    pct,
                    support,
                });
            }
        }
    }
    rules.sort_by(|x, y| {
        y.pct
            .total_cmp(&x.pct)
            .then(x.antecedent.cmp(&y.antecedent))
            .then(x.consequent.cmp(&y.consequent))
    });
    Ok(rules)
}
