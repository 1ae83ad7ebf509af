//! Track CSV ingestion, projection, and subsampling.
//!
//! Raw records carry `track_id,timestamp,longitude,latitude,response`.
//! Records are grouped by track, sorted by timestamp (duplicate stamps
//! within a track are dropped with a warning), projected, and assembled
//! into [`Track`]s. Exported/imported projected tracks use the schema
//! `track_id,t,x,y,response`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::project::Projection;
use crate::movement::Track;

/// One row of an ingested observation file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub track_id: String,
    pub timestamp: f64,
    pub longitude: f64,
    pub latitude: f64,
    pub response: f64,
}

/// Result of ingestion: tracks in abstract coordinates plus any warnings.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub track_ids: Vec<String>,
    pub tracks: Vec<Track>,
    pub warnings: Vec<String>,
}

pub fn read_raw_records(path: &Path) -> Result<Vec<RawRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    {
        let headers = reader.headers()?;
        let expected = ["track_id", "timestamp", "longitude", "latitude", "response"];
        if headers.len() < 5 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::data_at(
                1,
                format!("expected header {:?}, found {:?}", expected.join(","), headers),
            ));
        }
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let field = |idx: usize, name: &str| -> Result<f64> {
            row.get(idx)
                .ok_or_else(|| Error::data_at(line, format!("missing {name}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::data_at(line, format!("bad {name}: {e}")))
        };
        out.push(RawRecord {
            track_id: row
                .get(0)
                .ok_or_else(|| Error::data_at(line, "missing track_id".to_string()))?
                .to_string(),
            timestamp: field(1, "timestamp")?,
            longitude: field(2, "longitude")?,
            latitude: field(3, "latitude")?,
            response: field(4, "response")?,
        });
    }
    Ok(out)
}

/// Projects raw records into tracks with abstract coordinates.
pub fn project_records(records: &[RawRecord], projection: &Projection) -> Result<Ingested> {
    // validate latitudes up front so the error can list every offender
    let bad: Vec<String> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !(-80.0..=84.0).contains(&r.latitude))
        .map(|(i, r)| format!("record {} (track {}, lat {})", i + 1, r.track_id, r.latitude))
        .collect();
    if !bad.is_empty() {
        return Err(Error::data(format!(
            "latitude outside the projection validity band for: {}",
            bad.join("; ")
        )));
    }

    let mut groups: BTreeMap<String, Vec<&RawRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.track_id.clone()).or_default().push(r);
    }

    let mut warnings = Vec::new();
    let mut track_ids = Vec::new();
    let mut tracks = Vec::new();
    for (id, mut rows) in groups {
        rows.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).expect("NaN timestamp"));
        let mut times = Vec::with_capacity(rows.len());
        let mut locations = Vec::with_capacity(rows.len());
        let mut responses = Vec::with_capacity(rows.len());
        for r in rows {
            if times.last().is_some_and(|&last| r.timestamp <= last) {
                warnings.push(format!(
                    "track {id}: dropped record with duplicate timestamp {}",
                    r.timestamp
                ));
                continue;
            }
            let (x, y) = projection.forward(r.longitude, r.latitude)?;
            times.push(r.timestamp);
            locations.push((x, y));
            responses.push(r.response);
        }
        let track = Track::new(times, locations, responses).map_err(|e| {
            Error::data(format!("track {id} unusable after ingestion: {e}"))
        })?;
        track_ids.push(id);
        tracks.push(track);
    }
    if tracks.is_empty() {
        return Err(Error::data("no tracks in input"));
    }
    Ok(Ingested { track_ids, tracks, warnings })
}

/// Uniform subsample without replacement of `per_track` observations from
/// each track, re-sorted by time. Deterministic in the rng state.
pub fn subsample_tracks(
    tracks: &[Track],
    per_track: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Track>> {
    tracks
        .iter()
        .map(|t| {
            if per_track > t.len() {
                return Err(Error::data(format!(
                    "cannot subsample {per_track} from a track of {}",
                    t.len()
                )));
            }
            let mut idx = rand::seq::index::sample(rng, t.len(), per_track).into_vec();
            idx.sort_unstable();
            let sub = Track {
                times: idx.iter().map(|&i| t.times[i]).collect(),
                locations: idx.iter().map(|&i| t.locations[i]).collect(),
                responses: idx.iter().map(|&i| t.responses[i]).collect(),
                betas: None,
            };
            sub.validate()?;
            Ok(sub)
        })
        .collect()
}

/// Writes a track set as `track_id,t,x,y,response`.
pub fn write_tracks_csv(path: &Path, ids: &[String], tracks: &[Track]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["track_id", "t", "x", "y", "response"])?;
    for (id, track) in ids.iter().zip(tracks) {
        for k in 0..track.len() {
            w.write_record(&[
                id.clone(),
                track.times[k].to_string(),
                track.locations[k].0.to_string(),
                track.locations[k].1.to_string(),
                track.responses[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a projected track CSV written by [`write_tracks_csv`].
pub fn read_tracks_csv(path: &Path) -> Result<(Vec<String>, Vec<Track>)> {
    let mut reader = csv::Reader::from_path(path)?;
    {
        let headers = reader.headers()?;
        let expected = ["track_id", "t", "x", "y", "response"];
        if headers.len() < 5 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::data_at(
                1,
                format!("expected header {:?}, found {:?}", expected.join(","), headers),
            ));
        }
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, (Vec<f64>, Vec<(f64, f64)>, Vec<f64>)> = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row?;
        let id = row
            .get(0)
            .ok_or_else(|| Error::data_at(line, "missing track_id".to_string()))?
            .to_string();
        let num = |idx: usize, name: &str| -> Result<f64> {
            row.get(idx)
                .ok_or_else(|| Error::data_at(line, format!("missing {name}")))?
                .parse::<f64>()
                .map_err(|e| Error::data_at(line, format!("bad {name}: {e}")))
        };
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        let entry = groups.entry(id).or_default();
        entry.0.push(num(1, "t")?);
        entry.1.push((num(2, "x")?, num(3, "y")?));
        entry.2.push(num(4, "response")?);
    }
    let mut ids = Vec::new();
    let mut tracks = Vec::new();
    for id in order {
        let (times, locations, responses) = groups.remove(&id).unwrap();
        tracks.push(Track::new(times, locations, responses)?);
        ids.push(id);
    }
    if tracks.is_empty() {
        return Err(Error::data("empty track file"));
    }
    Ok((ids, tracks))
}
