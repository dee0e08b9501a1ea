//! CSV and JSON loaders for relevance matrices, group partitions, controller
//! streams and creator markets. Item, user and group indices are 0-based.

use std::io::Read;
use std::path::Path;

use crate::creators::{CreatorMarket, MarketSpec};
use crate::error::{invalid, Result};
use crate::types::{GroupPartition, RelevanceMatrix};

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .or_else(|_| invalid(format!("line {line}: '{field}' is not a number")))
}

fn parse_index(field: &str, line: u64) -> Result<usize> {
    field
        .trim()
        .parse()
        .or_else(|_| invalid(format!("line {line}: '{field}' is not a non-negative integer")))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, leading: &[&str]) -> Result<usize> {
    let header = rdr.headers()?.clone();
    let found: Vec<&str> = header.iter().take(leading.len()).collect();
    if found != leading {
        return invalid(format!("header must start with {}", leading.join(",")));
    }
    Ok(header.len() - leading.len())
}

/// `user,<item columns>`: one row per user, in file order.
pub fn read_relevance(r: impl Read) -> Result<RelevanceMatrix> {
    let mut rdr = reader(r);
    let n_items = check_header(&mut rdr, &["user"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(
            rec.iter()
                .skip(1)
                .map(|f| parse_f64(f, line))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() || n_items == 0 {
        return invalid("relevance file has no users or no items");
    }
    RelevanceMatrix::from_rows(&rows)
}

/// `item,group`: every item `0..n` exactly once, in any order.
pub fn read_groups(r: impl Read) -> Result<GroupPartition> {
    let mut rdr = reader(r);
    if check_header(&mut rdr, &["item", "group"])? != 0 {
        return invalid("groups file has extra columns");
    }
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        pairs.push((parse_index(&rec[0], line)?, parse_index(&rec[1], line)?));
    }
    let n = pairs.len();
    let mut labels = vec![None; n];
    for (item, group) in pairs {
        match labels.get_mut(item) {
            Some(slot @ None) => *slot = Some(group),
            Some(Some(_)) => return invalid(format!("item {item} listed twice")),
            None => return invalid(format!("item {item} out of range for {n} items")),
        }
    }
    GroupPartition::from_labels(labels.into_iter().map(|g| g.expect("all items seen")).collect())
}

/// `step,user,<item columns>`: rows grouped by step, steps ascending.
pub fn read_stream(r: impl Read) -> Result<Vec<RelevanceMatrix>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["step", "user"])?;
    let mut steps: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let step = parse_index(&rec[0], line)?;
        let row = rec.iter().skip(2).map(|f| parse_f64(f, line)).collect::<Result<Vec<_>>>()?;
        match steps.last_mut() {
            Some((s, rows)) if *s == step => rows.push(row),
            Some((s, _)) if *s > step => return invalid(format!("line {line}: steps must be ascending")),
            _ => steps.push((step, vec![row])),
        }
    }
    if steps.is_empty() {
        return invalid("stream file has no rows");
    }
    steps.iter().map(|(_, rows)| RelevanceMatrix::from_rows(rows)).collect()
}

pub fn read_market(r: impl Read) -> Result<CreatorMarket> {
    let spec: MarketSpec = serde_json::from_reader(r)?;
    spec.build()
}

fn open(path: &Path) -> Result<std::fs::File> {
    Ok(std::fs::File::open(path)?)
}

pub fn load_relevance(path: impl AsRef<Path>) -> Result<RelevanceMatrix> {
    read_relevance(open(path.as_ref())?)
}

pub fn load_groups(path: impl AsRef<Path>) -> Result<GroupPartition> {
    read_groups(open(path.as_ref())?)
}

pub fn load_stream(path: impl AsRef<Path>) -> Result<Vec<RelevanceMatrix>> {
    read_stream(open(path.as_ref())?)
}

pub fn load_market(path: impl AsRef<Path>) -> Result<CreatorMarket> {
    read_market(open(path.as_ref())?)
}
