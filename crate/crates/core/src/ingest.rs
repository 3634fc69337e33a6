//! Check-in and social-edge parsing, the canonical in-memory dataset, and
//! corpus statistics.
//!
//! User and POI ids are interned into dense indices. Index order equals the
//! lexicographic order of the original string ids, so "ascending index" and
//! "ascending id" are interchangeable everywhere downstream.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type UserIx = usize;
pub type PoiIx = usize;

/// Distinct-POI count below which a user counts as cold-start.
pub const COLD_START_POIS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawCheckIn {
    pub user_id: String,
    pub poi_id: String,
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckIn {
    pub user: UserIx,
    pub poi: PoiIx,
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

/// Column positions of the five check-in fields in a tab-separated line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckInFormat {
    pub user: usize,
    pub time: usize,
    pub lat: usize,
    pub lon: usize,
    pub poi: usize,
}

impl Default for CheckInFormat {
    fn default() -> Self {
        CheckInFormat {
            user: 0,
            time: 1,
            lat: 2,
            lon: 3,
            poi: 4,
        }
    }
}

impl CheckInFormat {
    /// Parses a comma-separated column order such as `user,time,lat,lon,poi`.
    pub fn from_order(order: &str) -> Result<Self> {
        let names: Vec<&str> = order.split(',').map(str::trim).collect();
        let find = |name: &str| {
            names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| Error::config("ingest.columns", format!("missing column `{name}`")))
        };
        if names.len() != 5 {
            return Err(Error::config(
                "ingest.columns",
                "expected exactly five comma-separated columns",
            ));
        }
        let format = CheckInFormat {
            user: find("user")?,
            time: find("time")?,
            lat: find("lat")?,
            lon: find("lon")?,
            poi: find("poi")?,
        };
        Ok(format)
    }

    fn width(&self) -> usize {
        [self.user, self.time, self.lat, self.lon, self.poi]
            .into_iter()
            .max()
            .unwrap_or(0)
            + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnLineError {
    #[default]
    Abort,
    Skip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedCheckIns {
    pub records: Vec<RawCheckIn>,
    pub skipped: Vec<LineError>,
}

pub fn parse_timestamp(field: &str) -> std::result::Result<i64, String> {
    let field = field.trim();
    if !field.is_empty() && field.bytes().all(|b| b.is_ascii_digit()) {
        return field.parse::<i64>().map_err(|e| format!("bad epoch timestamp: {e}"));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(ndt) = NaiveDateTime::parse_from_str(field, fmt) {
            return Ok(ndt.and_utc().timestamp());
        }
    }
    Err(format!("malformed timestamp `{field}`"))
}

pub fn format_timestamp(ts: i64) -> String {
    match DateTime::<Utc>::from_timestamp(ts, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => ts.to_string(),
    }
}

fn parse_line(line: &str, format: &CheckInFormat) -> std::result::Result<RawCheckIn, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < format.width() {
        return Err(format!(
            "expected {} tab-separated fields, found {}",
            format.width(),
            fields.len()
        ));
    }
    let user_id = fields[format.user].trim();
    let poi_id = fields[format.poi].trim();
    if user_id.is_empty() || poi_id.is_empty() {
        return Err("empty id".into());
    }
    let timestamp = parse_timestamp(fields[format.time])?;
    if timestamp <= 0 {
        return Err("timestamp must be positive".into());
    }
    let lat: f64 = fields[format.lat]
        .trim()
        .parse()
        .map_err(|_| format!("malformed latitude `{}`", fields[format.lat]))?;
    let lon: f64 = fields[format.lon]
        .trim()
        .parse()
        .map_err(|_| format!("malformed longitude `{}`", fields[format.lon]))?;
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err("coordinate out of range".into());
    }
    Ok(RawCheckIn {
        user_id: user_id.to_string(),
        poi_id: poi_id.to_string(),
        timestamp,
        lat,
        lon,
    })
}

/// Parses tab-separated check-in lines. Blank lines are ignored.
pub fn parse_checkins<R: BufRead>(
    reader: R,
    format: &CheckInFormat,
    on_error: OnLineError,
) -> Result<ParsedCheckIns> {
    let mut out = ParsedCheckIns::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        match parse_line(trimmed, format) {
            Ok(rec) => out.records.push(rec),
            Err(message) => match on_error {
                OnLineError::Abort => {
                    return Err(Error::Parse {
                        line: line_no,
                        message,
                    })
                }
                OnLineError::Skip => out.skipped.push(LineError {
                    line: line_no,
                    message,
                }),
            },
        }
    }
    Ok(out)
}

/// Undirected, deduplicated social edges stored as `(min, max)` id pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SocialEdges {
    pub edges: BTreeSet<(String, String)>,
    pub self_loops: usize,
}

impl SocialEdges {
    pub fn insert(&mut self, a: &str, b: &str) -> bool {
        if a == b {
            self.self_loops += 1;
            return false;
        }
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.edges.insert(key)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

pub fn parse_social<R: BufRead>(reader: R) -> Result<SocialEdges> {
    let mut edges = SocialEdges::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split('\t').map(str::trim);
        match (parts.next(), parts.next()) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
                edges.insert(a, b);
            }
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `user_a<TAB>user_b`".into(),
                })
            }
        }
    }
    Ok(edges)
}

/// The canonical dataset: interned check-ins, per-user histories and the
/// social graph. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckInLog {
    users: Vec<String>,
    pois: Vec<String>,
    user_lookup: HashMap<String, UserIx>,
    poi_lookup: HashMap<String, PoiIx>,
    poi_coords: Vec<(f64, f64)>,
    checkins: Vec<CheckIn>,
    history: Vec<Vec<usize>>,
    poi_visits: Vec<Vec<usize>>,
    social: SocialEdges,
    friends: Vec<Vec<UserIx>>,
}

fn coord_key_cmp(a: &RawCheckIn, b: &RawCheckIn) -> Ordering {
    a.timestamp
        .cmp(&b.timestamp)
        .then_with(|| a.user_id.cmp(&b.user_id))
        .then_with(|| a.lat.total_cmp(&b.lat))
        .then_with(|| a.lon.total_cmp(&b.lon))
}

impl CheckInLog {
    pub fn new(records: Vec<RawCheckIn>, social: SocialEdges) -> Self {
        let users: Vec<String> = records
            .iter()
            .map(|r| r.user_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pois: Vec<String> = records
            .iter()
            .map(|r| r.poi_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let user_lookup: HashMap<String, UserIx> =
            users.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
        let poi_lookup: HashMap<String, PoiIx> =
            pois.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();

        // A POI's coordinate is taken from its earliest check-in so that the
        // choice does not depend on input line order.
        let mut coord_source: Vec<Option<&RawCheckIn>> = vec![None; pois.len()];
        let checkins: Vec<CheckIn> = records
            .iter()
            .map(|r| {
                let poi = poi_lookup[&r.poi_id];
                let slot = &mut coord_source[poi];
                if slot.is_none_or(|cur| coord_key_cmp(r, cur) == Ordering::Less) {
                    *slot = Some(r);
                }
                CheckIn {
                    user: user_lookup[&r.user_id],
                    poi,
                    timestamp: r.timestamp,
                    lat: r.lat,
                    lon: r.lon,
                }
            })
            .collect();
        let poi_coords = coord_source
            .into_iter()
            .map(|r| r.map(|r| (r.lat, r.lon)).unwrap_or((0.0, 0.0)))
            .collect();

        let mut log = CheckInLog {
            users,
            pois,
            user_lookup,
            poi_lookup,
            poi_coords,
            checkins,
            history: Vec::new(),
            poi_visits: Vec::new(),
            social,
            friends: Vec::new(),
        };
        log.rebuild_groupings();
        log
    }

    fn rebuild_groupings(&mut self) {
        let mut history = vec![Vec::new(); self.users.len()];
        let mut poi_visits = vec![Vec::new(); self.pois.len()];
        for (i, c) in self.checkins.iter().enumerate() {
            history[c.user].push(i);
            poi_visits[c.poi].push(i);
        }
        let mut friends = vec![Vec::new(); self.users.len()];
        for (a, b) in &self.social.edges {
            if let (Some(&ia), Some(&ib)) = (self.user_lookup.get(a), self.user_lookup.get(b)) {
                friends[ia].push(ib);
                friends[ib].push(ia);
            }
        }
        for f in &mut friends {
            f.sort_unstable();
            f.dedup();
        }
        self.history = history;
        self.poi_visits = poi_visits;
        self.friends = friends;
    }

    /// A view of the same dataset keeping only the check-ins for which
    /// `keep` returns true. Id tables, coordinates and social edges are
    /// unchanged, so indices stay valid across views.
    pub fn restrict(&self, mut keep: impl FnMut(&CheckIn) -> bool) -> CheckInLog {
        let mut view = CheckInLog {
            users: self.users.clone(),
            pois: self.pois.clone(),
            user_lookup: self.user_lookup.clone(),
            poi_lookup: self.poi_lookup.clone(),
            poi_coords: self.poi_coords.clone(),
            checkins: self.checkins.iter().filter(|c| keep(c)).copied().collect(),
            history: Vec::new(),
            poi_visits: Vec::new(),
            social: self.social.clone(),
            friends: Vec::new(),
        };
        view.rebuild_groupings();
        view
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_pois(&self) -> usize {
        self.pois.len()
    }

    pub fn checkins(&self) -> &[CheckIn] {
        &self.checkins
    }

    pub fn user_id(&self, u: UserIx) -> &str {
        &self.users[u]
    }

    pub fn poi_id(&self, p: PoiIx) -> &str {
        &self.pois[p]
    }

    pub fn user_index(&self, id: &str) -> Option<UserIx> {
        self.user_lookup.get(id).copied()
    }

    pub fn poi_index(&self, id: &str) -> Option<PoiIx> {
        self.poi_lookup.get(id).copied()
    }

    pub fn poi_coord(&self, p: PoiIx) -> (f64, f64) {
        self.poi_coords[p]
    }

    pub fn social(&self) -> &SocialEdges {
        &self.social
    }

    /// Friends of `u` among users that have check-ins in this dataset.
    pub fn friends(&self, u: UserIx) -> &[UserIx] {
        &self.friends[u]
    }

    /// Check-ins of a user in input order.
    pub fn history(&self, u: UserIx) -> impl Iterator<Item = &CheckIn> + '_ {
        self.history[u].iter().map(move |&i| &self.checkins[i])
    }

    pub fn history_len(&self, u: UserIx) -> usize {
        self.history[u].len()
    }

    pub fn poi_checkins(&self, p: PoiIx) -> impl Iterator<Item = &CheckIn> + '_ {
        self.poi_visits[p].iter().map(move |&i| &self.checkins[i])
    }

    pub fn poi_visit_count(&self, p: PoiIx) -> usize {
        self.poi_visits[p].len()
    }

    /// Sorted distinct POIs visited by `u`.
    pub fn distinct_pois(&self, u: UserIx) -> Vec<PoiIx> {
        let mut v: Vec<PoiIx> = self.history(u).map(|c| c.poi).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Sorted distinct visitors of `p`.
    pub fn visitors(&self, p: PoiIx) -> Vec<UserIx> {
        let mut v: Vec<UserIx> = self.poi_checkins(p).map(|c| c.user).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Records sorted by (user id, timestamp); stable for equal keys.
    pub fn canonical_records(&self) -> Vec<RawCheckIn> {
        let mut order: Vec<usize> = (0..self.checkins.len()).collect();
        order.sort_by_key(|&i| (self.checkins[i].user, self.checkins[i].timestamp));
        order
            .into_iter()
            .map(|i| {
                let c = &self.checkins[i];
                RawCheckIn {
                    user_id: self.users[c.user].clone(),
                    poi_id: self.pois[c.poi].clone(),
                    timestamp: c.timestamp,
                    lat: c.lat,
                    lon: c.lon,
                }
            })
            .collect()
    }

    /// Canonical cache format: the input TSV layout sorted by (user, timestamp).
    pub fn to_canonical_tsv(&self) -> String {
        let mut out = String::new();
        for r in self.canonical_records() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.user_id,
                format_timestamp(r.timestamp),
                r.lat,
                r.lon,
                r.poi_id
            );
        }
        out
    }

    /// sha256 over the canonical check-in and social TSVs.
    pub fn data_checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_canonical_tsv().as_bytes());
        h.update(b"\n--\n");
        h.update(self.social_tsv().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn social_tsv(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.social.edges {
            let _ = writeln!(out, "{a}\t{b}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_pois: usize,
    pub n_checkins: usize,
    pub n_social_links: usize,
    pub cold_start_ratio: f64,
    pub avg_pois_per_user: f64,
    pub density: f64,
}

/// Corpus statistics. Users are counted over check-ins and social edges
/// together, so members of the social graph without check-ins count as
/// users with zero POIs. POIs are counted over the whole catalogue, which
/// in a restricted view may include POIs whose visits were all removed.
pub fn dataset_stats(log: &CheckInLog) -> Result<DatasetStats> {
    if log.checkins.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let social_only: BTreeSet<&str> = log
        .social
        .edges
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .filter(|id| log.user_index(id).is_none())
        .collect();
    let active_users: Vec<UserIx> = (0..log.n_users())
        .filter(|&u| log.history_len(u) > 0)
        .collect();
    let n_users = active_users.len() + social_only.len();
    let n_pois = log.n_pois();
    let per_user: Vec<usize> = active_users
        .iter()
        .map(|&u| log.distinct_pois(u).len())
        .collect();
    let pairs: usize = per_user.iter().sum();
    let cold = per_user.iter().filter(|&&n| n < COLD_START_POIS).count() + social_only.len();
    Ok(DatasetStats {
        n_users,
        n_pois,
        n_checkins: log.checkins.len(),
        n_social_links: log.social.len(),
        cold_start_ratio: cold as f64 / n_users as f64,
        avg_pois_per_user: pairs as f64 / n_users as f64,
        density: pairs as f64 / (n_users as f64 * n_pois as f64),
    })
}

impl DatasetStats {
    /// Flat `key = value` report.
    pub fn to_report(&self) -> String {
        format!(
            "n_users = {}\nn_pois = {}\nn_checkins = {}\nn_social_links = {}\n\
             cold_start_ratio = {}\navg_pois_per_user = {}\ndensity = {:e}\n",
            self.n_users,
            self.n_pois,
            self.n_checkins,
            self.n_social_links,
            self.cold_start_ratio,
            self.avg_pois_per_user,
            self.density
        )
    }
}
