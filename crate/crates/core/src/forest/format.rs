//! Line-oriented text format for fitted forests.
//!
//! ```text
//! e2c-forest 1
//! trees <B>
//! features_per_node <m>
//! max_depth <depth>
//! seed <u64>
//! sampling bootstrap|identity
//! n_features <p>
//! n_train <n>
//! tree <b> <node count>
//! S <feature> <threshold> <left> <right> <samples> <improvement>
//! L <value> <samples>
//! ...
//! end
//! ```
//!
//! Floating-point fields are the IEEE-754 bit patterns as 16 lowercase hex
//! digits, so a forest survives a write/read cycle bit for bit. Nodes are
//! listed in pre-order. Bags are not stored: they are regenerated from the
//! seed, the sampling mode and `n_train` (see the module docs of
//! [`crate::forest`]).

use std::fmt::Write as _;

use super::tree::{Node, RegressionTree};
use super::{Forest, ForestParams, RowSampling};
use crate::error::{Error, Result};

pub const FORMAT_HEADER: &str = "e2c-forest 1";

pub fn write_forest(forest: &Forest) -> String {
    let p = forest.params();
    let mut out = String::new();
    let sampling = match p.sampling {
        RowSampling::Bootstrap => "bootstrap",
        RowSampling::Identity => "identity",
    };
    // writing to a String cannot fail
    let _ = writeln!(out, "{FORMAT_HEADER}");
    let _ = writeln!(out, "trees {}", p.n_trees);
    let _ = writeln!(out, "features_per_node {}", p.features_per_node);
    let _ = writeln!(out, "max_depth {}", p.max_depth);
    let _ = writeln!(out, "seed {}", p.seed);
    let _ = writeln!(out, "sampling {sampling}");
    let _ = writeln!(out, "n_features {}", forest.n_features());
    let _ = writeln!(out, "n_train {}", forest.n_train());
    for (b, tree) in forest.trees().iter().enumerate() {
        let _ = writeln!(out, "tree {b} {}", tree.nodes().len());
        for node in tree.nodes() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    samples,
                    improvement,
                } => {
                    let _ = writeln!(
                        out,
                        "S {feature} {:016x} {left} {right} {samples} {:016x}",
                        threshold.to_bits(),
                        improvement.to_bits()
                    );
                }
                Node::Leaf { value, samples } => {
                    let _ = writeln!(out, "L {:016x} {samples}", value.to_bits());
                }
            }
        }
    }
    out.push_str("end\n");
    out
}

/// Parses a forest written by [`write_forest`].
pub fn read_forest(text: &str) -> Result<Forest> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        offset: 0,
    };
    parse(&mut lines)
}

/// Parses a forest section starting at 1-based line `first_line` of a larger
/// file, for error messages.
pub(crate) fn read_forest_section(text: &str, first_line: usize) -> Result<Forest> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        offset: first_line - 1,
    };
    parse(&mut lines)
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    offset: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        match self.inner.next() {
            Some((i, line)) => Ok((i + 1 + self.offset, line.split_whitespace().collect())),
            None => Err(Error::Format {
                line: 0,
                message: "unexpected end of forest data".into(),
            }),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (line, fields) = self.next()?;
        match fields.as_slice() {
            [k, v] if *k == key => Ok((line, v)),
            _ => Err(bad(line, format!("expected `{key} <value>`"))),
        }
    }
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn int<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| bad(line, format!("`{s}` is not a valid integer")))
}

fn bits(line: usize, s: &str) -> Result<f64> {
    if s.len() != 16 {
        return Err(bad(line, format!("`{s}` is not a 16-digit hex float")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| bad(line, format!("`{s}` is not a 16-digit hex float")))
}

fn parse<'a, I: Iterator<Item = (usize, &'a str)>>(lines: &mut Lines<'a, I>) -> Result<Forest> {
    let (line, header) = lines.next()?;
    match header.as_slice() {
        ["e2c-forest", "1"] => {}
        ["e2c-forest", v] => {
            return Err(Error::Incompatible(format!(
                "forest format version {v} is not supported (expected 1)"
            )))
        }
        _ => return Err(bad(line, format!("expected `{FORMAT_HEADER}`"))),
    }
    let (l, v) = lines.keyed("trees")?;
    let n_trees: usize = int(l, v)?;
    let (l, v) = lines.keyed("features_per_node")?;
    let features_per_node: usize = int(l, v)?;
    let (l, v) = lines.keyed("max_depth")?;
    let max_depth: usize = int(l, v)?;
    let (l, v) = lines.keyed("seed")?;
    let seed: u64 = int(l, v)?;
    let (l, v) = lines.keyed("sampling")?;
    let sampling = match v {
        "bootstrap" => RowSampling::Bootstrap,
        "identity" => RowSampling::Identity,
        other => return Err(bad(l, format!("unknown sampling `{other}`"))),
    };
    let (l, v) = lines.keyed("n_features")?;
    let n_features: usize = int(l, v)?;
    let (l, v) = lines.keyed("n_train")?;
    let n_train: usize = int(l, v)?;

    let mut trees = Vec::with_capacity(n_trees);
    for b in 0..n_trees {
        let (line, fields) = lines.next()?;
        let count: usize = match fields.as_slice() {
            ["tree", idx, count] if int::<usize>(line, idx)? == b => int(line, count)?,
            _ => return Err(bad(line, format!("expected `tree {b} <node count>`"))),
        };
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, f) = lines.next()?;
            let node = match f.as_slice() {
                ["S", feature, threshold, left, right, samples, improvement] => {
                    let feature: usize = int(line, feature)?;
                    if feature >= n_features {
                        return Err(bad(line, format!("feature {feature} out of range")));
                    }
                    Node::Split {
                        feature,
                        threshold: bits(line, threshold)?,
                        left: int(line, left)?,
                        right: int(line, right)?,
                        samples: int(line, samples)?,
                        improvement: bits(line, improvement)?,
                    }
                }
                ["L", value, samples] => Node::Leaf {
                    value: bits(line, value)?,
                    samples: int(line, samples)?,
                },
                _ => return Err(bad(line, "expected a node line")),
            };
            nodes.push(node);
        }
        let tree = RegressionTree::from_nodes(nodes, max_depth)
            .map_err(|e| bad(line, format!("tree {b}: {e}")))?;
        trees.push(tree);
    }
    let (line, fields) = lines.next()?;
    if fields.as_slice() != ["end"] {
        return Err(bad(line, "expected `end`"));
    }

    let params = ForestParams {
        n_trees,
        features_per_node,
        max_depth,
        seed,
        sampling,
    };
    Forest::from_parts(params, n_features, n_train, trees)
}
