use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::stable_hash;

/// Bucket count for hashed fields when the schema line leaves it out.
pub const DEFAULT_HASH_BUCKETS: usize = 64;

/// Raw attribute values of one entity: field name → values. Multi-hot fields
/// carry several values, every other kind exactly one.
pub type RawFeatures = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    /// One indicator per category plus a trailing "other" slot for unseen values.
    OneHot {
        categories: Vec<String>,
    },
    MultiHot {
        categories: Vec<String>,
    },
    /// Open vocabularies (titles, authors): values hashed into `buckets` slots.
    OneHotHashed {
        buckets: usize,
    },
    MultiHotHashed {
        buckets: usize,
    },
    /// Min-max scaled to [0, 1], clamped outside the range.
    Numeric {
        min: f64,
        max: f64,
    },
    /// Like numeric, in days since 1970-01-01. Values may be `YYYY-MM-DD` or integer days.
    Date {
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSchema {
    fields: Vec<FieldSpec>,
}

/// Something [`FeatureSchema::encode`] had to work around.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodeWarning {
    UnknownCategory { field: String, value: String },
    Clamped { field: String, value: f64 },
    MissingField { field: String },
    UnknownField { field: String },
}

impl fmt::Display for EncodeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncodeWarning::UnknownCategory { field, value } => {
                write!(f, "field `{field}`: unknown category `{value}` mapped to other")
            }
            EncodeWarning::Clamped { field, value } => {
                write!(f, "field `{field}`: value {value} outside range, clamped")
            }
            EncodeWarning::MissingField { field } => write!(f, "field `{field}` missing"),
            EncodeWarning::UnknownField { field } => {
                write!(f, "field `{field}` not in schema, ignored")
            }
        }
    }
}

impl FieldKind {
    /// Width of this field's block in the encoded vector.
    pub fn width(&self) -> usize {
        match self {
            FieldKind::OneHot { categories } => categories.len() + 1,
            FieldKind::MultiHot { categories } => categories.len(),
            FieldKind::OneHotHashed { buckets } | FieldKind::MultiHotHashed { buckets } => *buckets,
            FieldKind::Numeric { .. } | FieldKind::Date { .. } => 1,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            FieldKind::OneHot { .. } => "one-hot",
            FieldKind::MultiHot { .. } => "multi-hot",
            FieldKind::OneHotHashed { .. } => "one-hot-hashed",
            FieldKind::MultiHotHashed { .. } => "multi-hot-hashed",
            FieldKind::Numeric { .. } => "numeric",
            FieldKind::Date { .. } => "date",
        }
    }
}

impl FeatureSchema {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &fields {
            if f.name.is_empty() || !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate or empty field name `{}`", f.name)));
            }
            match &f.kind {
                FieldKind::OneHot { categories } | FieldKind::MultiHot { categories } => {
                    if categories.is_empty() {
                        return Err(Error::Schema(format!("field `{}`: cardinality must be >= 1", f.name)));
                    }
                    let distinct: std::collections::BTreeSet<_> = categories.iter().collect();
                    if distinct.len() != categories.len() {
                        return Err(Error::Schema(format!("field `{}`: repeated category", f.name)));
                    }
                }
                FieldKind::OneHotHashed { buckets } | FieldKind::MultiHotHashed { buckets } => {
                    if *buckets == 0 {
                        return Err(Error::Schema(format!("field `{}`: bucket count must be >= 1", f.name)));
                    }
                }
                FieldKind::Numeric { min, max } | FieldKind::Date { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        return Err(Error::Schema(format!(
                            "field `{}`: need min < max, got {min}..{max}",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(FeatureSchema { fields })
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Total encoded length; fixed regardless of input.
    pub fn width(&self) -> usize {
        self.fields.iter().map(|f| f.kind.width()).sum()
    }

    /// Parses the line format `field,kind,cardinality_or_range`.
    ///
    /// `cardinality_or_range` is an integer cardinality (categories `0..n`), a
    /// `|`-separated category list, a bucket count for hashed kinds (optional),
    /// or `min:max` for numeric and date fields. Blank lines, `#` comments and a
    /// leading header line are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if fields.is_empty() && line.starts_with("field,kind") {
                continue;
            }
            let parts: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
            let bad = |msg: String| Error::Schema(format!("line {}: {msg}", no + 1));
            if parts.len() < 2 {
                return Err(bad(format!("expected `field,kind,cardinality_or_range`, got `{line}`")));
            }
            let arg = parts.get(2).copied().unwrap_or("");
            let kind = match parts[1] {
                "one-hot" => FieldKind::OneHot {
                    categories: parse_categories(arg).map_err(bad)?,
                },
                "multi-hot" => FieldKind::MultiHot {
                    categories: parse_categories(arg).map_err(bad)?,
                },
                "one-hot-hashed" => FieldKind::OneHotHashed {
                    buckets: parse_buckets(arg).map_err(bad)?,
                },
                "multi-hot-hashed" => FieldKind::MultiHotHashed {
                    buckets: parse_buckets(arg).map_err(bad)?,
                },
                "numeric" => {
                    let (min, max) = parse_range(arg, parse_number).map_err(bad)?;
                    FieldKind::Numeric { min, max }
                }
                "date" => {
                    let (min, max) = parse_range(arg, parse_date).map_err(bad)?;
                    FieldKind::Date { min, max }
                }
                other => return Err(bad(format!("unknown kind `{other}`"))),
            };
            fields.push(FieldSpec {
                name: parts[0].to_string(),
                kind,
            });
        }
        FeatureSchema::new(fields)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureSchema::parse(&text).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Inverse of [`FeatureSchema::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("field,kind,cardinality_or_range\n");
        for f in &self.fields {
            let arg = match &f.kind {
                FieldKind::OneHot { categories } | FieldKind::MultiHot { categories } => categories.join("|"),
                FieldKind::OneHotHashed { buckets } | FieldKind::MultiHotHashed { buckets } => buckets.to_string(),
                FieldKind::Numeric { min, max } | FieldKind::Date { min, max } => {
                    format!("{min}:{max}")
                }
            };
            out.push_str(&format!("{},{},{}\n", f.name, f.kind.tag(), arg));
        }
        out
    }

    /// Encodes raw values into the fixed-length feature vector.
    pub fn encode(&self, raw: &RawFeatures) -> Result<(Vec<f64>, Vec<EncodeWarning>)> {
        let mut out = Vec::with_capacity(self.width());
        let mut warnings = Vec::new();
        for field in &self.fields {
            let values = raw.get(&field.name).map(Vec::as_slice).unwrap_or(&[]);
            let name = &field.name;
            match &field.kind {
                FieldKind::OneHot { categories } => {
                    let mut block = vec![0.0; categories.len() + 1];
                    match values.first() {
                        Some(v) => match categories.iter().position(|c| c == v) {
                            Some(i) => block[i] = 1.0,
                            None => {
                                warnings.push(EncodeWarning::UnknownCategory {
                                    field: name.clone(),
                                    value: v.clone(),
                                });
                                block[categories.len()] = 1.0;
                            }
                        },
                        None => {
                            warnings.push(EncodeWarning::MissingField { field: name.clone() });
                            block[categories.len()] = 1.0;
                        }
                    }
                    out.extend(block);
                }
                FieldKind::MultiHot { categories } => {
                    let mut block = vec![0.0; categories.len()];
                    for v in values {
                        match categories.iter().position(|c| c == v) {
                            Some(i) => block[i] = 1.0,
                            None => warnings.push(EncodeWarning::UnknownCategory {
                                field: name.clone(),
                                value: v.clone(),
                            }),
                        }
                    }
                    out.extend(block);
                }
                FieldKind::OneHotHashed { buckets } | FieldKind::MultiHotHashed { buckets } => {
                    let mut block = vec![0.0; *buckets];
                    let take = if matches!(field.kind, FieldKind::OneHotHashed { .. }) {
                        values.len().min(1)
                    } else {
                        values.len()
                    };
                    for v in &values[..take] {
                        block[bucket_of(v, *buckets)] = 1.0;
                    }
                    out.extend(block);
                }
                FieldKind::Numeric { min, max } | FieldKind::Date { min, max } => {
                    let Some(v) = values.first() else {
                        return Err(Error::Schema(format!("numeric field `{name}` has no value")));
                    };
                    let parsed = if matches!(field.kind, FieldKind::Date { .. }) {
                        parse_date(v)
                    } else {
                        parse_number(v)
                    }
                    .map_err(|e| Error::Schema(format!("field `{name}`: {e}")))?;
                    let scaled = (parsed - min) / (max - min);
                    if !(0.0..=1.0).contains(&scaled) {
                        warnings.push(EncodeWarning::Clamped {
                            field: name.clone(),
                            value: parsed,
                        });
                    }
                    out.push(scaled.clamp(0.0, 1.0));
                }
            }
        }
        for key in raw.keys() {
            if self.field(key).is_none() {
                warnings.push(EncodeWarning::UnknownField { field: key.clone() });
            }
        }
        Ok((out, warnings))
    }
}

pub fn bucket_of(value: &str, buckets: usize) -> usize {
    (stable_hash(value.as_bytes()) % buckets as u64) as usize
}

fn parse_categories(arg: &str) -> std::result::Result<Vec<String>, String> {
    if arg.is_empty() {
        return Err("missing cardinality".into());
    }
    if let Ok(n) = arg.parse::<usize>() {
        if n == 0 {
            return Err("cardinality must be >= 1".into());
        }
        return Ok((0..n).map(|i| i.to_string()).collect());
    }
    Ok(arg.split('|').map(|c| c.trim().to_string()).collect())
}

fn parse_buckets(arg: &str) -> std::result::Result<usize, String> {
    if arg.is_empty() {
        return Ok(DEFAULT_HASH_BUCKETS);
    }
    arg.parse().map_err(|_| format!("bad bucket count `{arg}`"))
}

fn parse_range(
    arg: &str,
    parse: fn(&str) -> std::result::Result<f64, String>,
) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = arg
        .split_once(':')
        .ok_or_else(|| format!("expected `min:max`, got `{arg}`"))?;
    Ok((parse(lo.trim())?, parse(hi.trim())?))
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("not a number: `{s}`")),
    }
}

/// `YYYY-MM-DD` or integer days since 1970-01-01.
pub fn parse_date(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        return Ok((d - epoch).num_days() as f64);
    }
    s.parse::<i64>()
        .map(|d| d as f64)
        .map_err(|_| format!("not a date: `{s}`"))
}

pub fn format_date(days: i64) -> String {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    (epoch + chrono::Duration::days(days)).format("%Y-%m-%d").to_string()
}
