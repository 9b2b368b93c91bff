//! TSV ingestion and emission.
//!
//! Schemas:
//!   interactions.tsv: `user_id<TAB>track_id<TAB>playcount` (header required)
//!   tracks.tsv:       `track_id<TAB>artist_id<TAB>track_playcount`
//!   users.tsv:        `user_id<TAB>gender<TAB>country<TAB>playcount`
//!
//! Ids are remapped to dense indices: items in tracks-file order, users in
//! first-appearance order of the interactions file. Users left with fewer
//! than 2 distinct items are dropped so leave-one-out never empties a row.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Catalog, CatalogItem, Dataset, Gender, Interactions, UserMeta, UserRecord};
use crate::{Error, Result};

fn split_fields<'a>(path: &str, lineno: usize, line: &'a str, want: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != want {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {want} tab-separated fields, got {}", fields.len()),
        ));
    }
    Ok(fields)
}

fn parse_count(path: &str, lineno: usize, s: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::parse(path, lineno, format!("bad count `{s}`")))
}

pub fn load_dataset(
    interactions_path: &Path,
    tracks_path: &Path,
    users_path: &Path,
) -> Result<Dataset> {
    // tracks first: item index = tracks-file order
    let tpath = tracks_path.display().to_string();
    let tracks_text = fs::read_to_string(tracks_path)?;
    let mut item_index: HashMap<String, u32> = HashMap::new();
    let mut items: Vec<CatalogItem> = Vec::new();
    for (lineno, line) in tracks_text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f = split_fields(&tpath, lineno + 1, line, 3)?;
        let playcount = parse_count(&tpath, lineno + 1, f[2])?;
        if item_index.contains_key(f[0]) {
            return Err(Error::parse(&tpath, lineno + 1, format!("duplicate track `{}`", f[0])));
        }
        item_index.insert(f[0].to_string(), items.len() as u32);
        items.push(CatalogItem {
            item_id: f[0].to_string(),
            artist_id: f[1].to_string(),
            track_playcount: playcount,
            artist_playcount: 0,
        });
    }
    let mut artist_totals: HashMap<String, u64> = HashMap::new();
    for it in &items {
        *artist_totals.entry(it.artist_id.clone()).or_insert(0) += it.track_playcount;
    }
    for it in &mut items {
        it.artist_playcount = artist_totals[&it.artist_id];
    }

    // user metadata keyed by external id
    let upath = users_path.display().to_string();
    let users_text = fs::read_to_string(users_path)?;
    let mut meta_by_id: HashMap<String, (Gender, Option<String>, u64)> = HashMap::new();
    for (lineno, line) in users_text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f = split_fields(&upath, lineno + 1, line, 4)?;
        let playcount = parse_count(&upath, lineno + 1, f[3])?;
        let country = normalize_country(f[2]);
        meta_by_id.insert(f[0].to_string(), (Gender::parse(f[1]), country, playcount));
    }

    // interactions: users in first-appearance order
    let ipath = interactions_path.display().to_string();
    let inter_text = fs::read_to_string(interactions_path)?;
    let mut lines = inter_text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.starts_with("user_id") => {}
        _ => return Err(Error::parse(&ipath, 1, "missing header line")),
    }
    let mut user_index: HashMap<String, u32> = HashMap::new();
    let mut user_ids: Vec<String> = Vec::new();
    let mut raw_rows: Vec<Vec<u32>> = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f = split_fields(&ipath, lineno + 1, line, 3)?;
        parse_count(&ipath, lineno + 1, f[2])?;
        let &item = item_index.get(f[1]).ok_or_else(|| {
            Error::parse(&ipath, lineno + 1, format!("track `{}` missing from tracks file", f[1]))
        })?;
        let u = *user_index.entry(f[0].to_string()).or_insert_with(|| {
            user_ids.push(f[0].to_string());
            raw_rows.push(Vec::new());
            (user_ids.len() - 1) as u32
        });
        raw_rows[u as usize].push(item);
    }

    // sort, dedupe, drop <2-item users
    let mut kept_rows = Vec::new();
    let mut kept_users = Vec::new();
    for (u, mut row) in raw_rows.into_iter().enumerate() {
        row.sort_unstable();
        row.dedup();
        if row.len() >= 2 {
            kept_rows.push(row);
            kept_users.push(user_ids[u].clone());
        }
    }

    let users = UserMeta {
        users: kept_users
            .iter()
            .map(|id| {
                let (gender, country, playcount) = meta_by_id
                    .get(id)
                    .cloned()
                    .unwrap_or((Gender::Unknown, None, 0));
                UserRecord {
                    user_id: id.clone(),
                    gender,
                    country,
                    activity_playcount: playcount,
                }
            })
            .collect(),
    };

    let interactions = Interactions::new(kept_rows.len(), items.len(), kept_rows)?;
    Ok(Dataset {
        interactions,
        catalog: Catalog { items },
        users,
    })
}

fn normalize_country(s: &str) -> Option<String> {
    let s = s.trim().to_ascii_lowercase();
    if s.len() == 2 && s.chars().all(|c| c.is_ascii_alphabetic()) {
        Some(s)
    } else {
        None
    }
}

/// Writes the three TSVs. Inverse of [`load_dataset`] up to index remapping.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut inter = fs::File::create(dir.join("interactions.tsv"))?;
    writeln!(inter, "user_id\ttrack_id\tplaycount")?;
    for (u, row) in data.interactions.rows().iter().enumerate() {
        let uid = &data.users.users[u].user_id;
        for &i in row {
            writeln!(inter, "{uid}\t{}\t1", data.catalog.items[i as usize].item_id)?;
        }
    }

    let mut tracks = fs::File::create(dir.join("tracks.tsv"))?;
    writeln!(tracks, "track_id\tartist_id\ttrack_playcount")?;
    for it in &data.catalog.items {
        writeln!(tracks, "{}\t{}\t{}", it.item_id, it.artist_id, it.track_playcount)?;
    }

    let mut users = fs::File::create(dir.join("users.tsv"))?;
    writeln!(users, "user_id\tgender\tcountry\tplaycount")?;
    for u in &data.users.users {
        writeln!(
            users,
            "{}\t{}\t{}\t{}",
            u.user_id,
            u.gender.code(),
            u.country.as_deref().unwrap_or("??"),
            u.activity_playcount
        )?;
    }
    Ok(())
}
