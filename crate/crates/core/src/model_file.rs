//! The trained-model bundle: feature schema, spread-model parameters, split
//! manifest and forest in one text file.
//!
//! ```text
//! e2c-model 1
//! model <recovery> <global_recovery> <lambda> <maturity>
//! columns <n>
//! column <kind> <name>
//! country_reference <name or empty>
//! sector_reference <name or empty>
//! split <firm_fraction> <date_fraction> <seed>
//! removed_firms <k>
//! firm <id>
//! removed_dates <k>
//! date <yyyy-mm-dd>
//! forest
//! e2c-forest 1
//! ...
//! ```
//!
//! Floats are hex bit patterns, as in the forest format. Names run to the
//! end of the line so they may contain spaces.

use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::dataset::{Column, ColumnKind, FeatureSchema, SplitManifest};
use crate::error::{Error, Result};
use crate::forest::format::read_forest_section;
use crate::forest::{write_forest, Forest};
use crate::structural::ModelParams;

pub const MODEL_HEADER: &str = "e2c-model 1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: ModelParams,
    pub schema: FeatureSchema,
    pub split: SplitManifest,
    pub forest: Forest,
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

impl ModelBundle {
    pub fn columns(&self) -> Vec<Column> {
        self.schema.columns()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "{MODEL_HEADER}");
        let _ = writeln!(
            s,
            "model {} {} {} {}",
            hex(m.recovery),
            hex(m.global_recovery),
            hex(m.recovery_std),
            hex(m.maturity)
        );
        let cols = self.schema.columns();
        let _ = writeln!(s, "columns {}", cols.len());
        for c in &cols {
            let _ = writeln!(s, "column {} {}", c.kind.as_str(), c.name);
        }
        let _ = writeln!(
            s,
            "country_reference {}",
            self.schema.country_reference.as_deref().unwrap_or("")
        );
        let _ = writeln!(
            s,
            "sector_reference {}",
            self.schema.sector_reference.as_deref().unwrap_or("")
        );
        let sp = &self.split;
        let _ = writeln!(
            s,
            "split {} {} {}",
            hex(sp.firm_fraction),
            hex(sp.date_fraction),
            sp.seed
        );
        let _ = writeln!(s, "removed_firms {}", sp.removed_firms.len());
        for f in &sp.removed_firms {
            let _ = writeln!(s, "firm {f}");
        }
        let _ = writeln!(s, "removed_dates {}", sp.removed_dates.len());
        for d in &sp.removed_dates {
            let _ = writeln!(s, "date {d}");
        }
        s.push_str("forest\n");
        s.push_str(&write_forest(&self.forest));
        s
    }

    pub fn parse(text: &str) -> Result<ModelBundle> {
        let lines: Vec<&str> = text.lines().collect();
        let mut cur = Cursor { lines: &lines, pos: 0 };

        let (n, header) = cur.next()?;
        if header.trim_end() != MODEL_HEADER {
            return match header.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["e2c-model", v] => Err(Error::Incompatible(format!(
                    "model format version {v} is not supported (expected 1)"
                ))),
                _ => Err(bad(n, format!("expected `{MODEL_HEADER}`"))),
            };
        }

        let (n, rest) = cur.keyed("model")?;
        let f: Vec<&str> = rest.split_whitespace().collect();
        if f.len() != 4 {
            return Err(bad(n, "expected four model parameters"));
        }
        let model = ModelParams {
            recovery: bits(n, f[0])?,
            global_recovery: bits(n, f[1])?,
            recovery_std: bits(n, f[2])?,
            maturity: bits(n, f[3])?,
        };
        model.validate().map_err(|e| bad(n, e.to_string()))?;

        let count = cur.count("columns")?;
        let mut columns = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, rest) = cur.keyed("column")?;
            let (kind, name) = rest
                .split_once(' ')
                .ok_or_else(|| bad(n, "expected `column <kind> <name>`"))?;
            let kind = ColumnKind::parse(kind).ok_or_else(|| bad(n, format!("unknown kind `{kind}`")))?;
            columns.push(Column {
                name: name.to_string(),
                kind,
            });
        }
        let mut schema = FeatureSchema::from_columns(&columns)?;
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        schema.country_reference = opt(cur.keyed("country_reference")?.1);
        schema.sector_reference = opt(cur.keyed("sector_reference")?.1);

        let (n, rest) = cur.keyed("split")?;
        let f: Vec<&str> = rest.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(n, "expected `split <firm> <date> <seed>`"));
        }
        let firm_fraction = bits(n, f[0])?;
        let date_fraction = bits(n, f[1])?;
        let seed = f[2].parse().map_err(|_| bad(n, "invalid seed"))?;

        let k = cur.count("removed_firms")?;
        let mut removed_firms = Vec::with_capacity(k);
        for _ in 0..k {
            removed_firms.push(cur.keyed("firm")?.1.to_string());
        }
        let k = cur.count("removed_dates")?;
        let mut removed_dates = Vec::with_capacity(k);
        for _ in 0..k {
            let (n, d) = cur.keyed("date")?;
            removed_dates.push(
                NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|_| bad(n, format!("invalid date `{d}`")))?,
            );
        }
        if !removed_firms.windows(2).all(|w| w[0] < w[1]) || !removed_dates.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad(n, "removed firms and dates must be sorted and unique"));
        }

        let (n, tag) = cur.next()?;
        if tag.trim_end() != "forest" {
            return Err(bad(n, "expected `forest`"));
        }
        let body: String = lines[cur.pos..].iter().map(|l| format!("{l}\n")).collect();
        let forest = read_forest_section(&body, cur.pos + 1)?;
        if forest.n_features() != schema.n_features() {
            return Err(Error::Incompatible(format!(
                "forest expects {} features, schema has {}",
                forest.n_features(),
                schema.n_features()
            )));
        }
        Ok(ModelBundle {
            model,
            schema,
            split: SplitManifest {
                firm_fraction,
                date_fraction,
                seed,
                removed_firms,
                removed_dates,
            },
            forest,
        })
    }
}

struct Cursor<'a> {
    lines: &'a [&'a str],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| bad(self.pos + 1, "unexpected end of model file"))?;
        self.pos += 1;
        Ok((self.pos, line))
    }

    /// `key rest`, returning the rest of the line (possibly empty).
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next()?;
        match line.strip_prefix(key) {
            Some("") => Ok((n, "")),
            Some(rest) if rest.starts_with(' ') => Ok((n, &rest[1..])),
            _ => Err(bad(n, format!("expected `{key}`"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (n, v) = self.keyed(key)?;
        v.trim().parse().map_err(|_| bad(n, format!("invalid count for `{key}`")))
    }
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn bits(line: usize, s: &str) -> Result<f64> {
    if s.len() != 16 {
        return Err(bad(line, format!("`{s}` is not a 16-digit hex float")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| bad(line, format!("`{s}` is not a 16-digit hex float")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestParams, SampleView};

    fn bundle() -> ModelBundle {
        let schema = FeatureSchema {
            countries: vec!["United States".into()],
            sectors: vec!["Energy".into(), "Tech".into()],
            country_reference: Some("Japan".into()),
            sector_reference: None,
        };
        let p = schema.n_features();
        let n = 40;
        let x: Vec<f64> = (0..n * p).map(|k| ((k * 13) % 17) as f64 / 3.0).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i * p] * 2.0 + 0.1).collect();
        let view = SampleView::new(&x, p, &y).unwrap();
        let forest = fit_forest(
            &view,
            &ForestParams {
                n_trees: 3,
                features_per_node: 3,
                max_depth: 4,
                seed: 5,
                ..ForestParams::default()
            },
            Some(1),
        )
        .unwrap();
        ModelBundle {
            model: ModelParams {
                recovery: 0.1 + 0.2,
                ..ModelParams::default()
            },
            schema,
            split: SplitManifest {
                firm_fraction: 0.2,
                date_fraction: 0.2,
                seed: 11,
                removed_firms: vec!["A 1".into(), "B".into()],
                removed_dates: vec![NaiveDate::from_ymd_opt(2020, 3, 31).unwrap()],
            },
            forest,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let b = bundle();
        let text = b.to_text();
        let back = ModelBundle::parse(&text).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn version_and_shape_errors() {
        let text = bundle().to_text();
        assert!(matches!(
            ModelBundle::parse(&text.replacen("e2c-model 1", "e2c-model 3", 1)),
            Err(Error::Incompatible(_))
        ));
        assert!(matches!(
            ModelBundle::parse(&text.replacen("e2c-forest 1", "e2c-forest 2", 1)),
            Err(Error::Incompatible(_))
        ));
        let garbled = text.replacen("\nL ", "\nL x", 1);
        match ModelBundle::parse(&garbled) {
            Err(Error::Format { line, .. }) => {
                let expect = text.lines().position(|l| l.starts_with("L ")).unwrap() + 1;
                assert_eq!(line, expect);
            }
            other => panic!("{other:?}"),
        }
    }
}
