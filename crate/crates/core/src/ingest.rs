//! MovieLens `ratings.csv` to replay trace.
//!
//! Each user who rated at least one of the chosen movies becomes one round.
//! The available arms are the chosen movies that user rated and each
//! reward is the star rating divided by 5.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::env::{ReplayRound, ReplayTrace};
use crate::error::{Error, Result};
use crate::model::ArmSet;

pub const RATINGS_HEADER: &str = "userId,movieId,rating,timestamp";
pub const RATING_SCALE_MAX: f64 = 5.0;

/// ML-20M ids of Toy Story (1995), Braveheart (1995), Pulp Fiction (1994),
/// The Godfather (1972) and Alien (1979).
pub const DEFAULT_MOVIE_IDS: [u64; 5] = [1, 110, 296, 858, 1214];

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub user_id: u64,
    pub movie_id: u64,
    pub rating: f64,
    pub timestamp: i64,
}

/// Reads the ratings that touch `movie_ids`, grouped by user with users in
/// order of their first row anywhere in the file.
pub fn load_ratings(path: &Path, movie_ids: &[u64]) -> Result<Vec<RatingRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(BufReader::new(file), path, movie_ids)
}

pub fn read_ratings<R: BufRead>(reader: R, origin: &Path, movie_ids: &[u64]) -> Result<Vec<RatingRecord>> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim().trim_start_matches('\u{feff}') == RATINGS_HEADER => {}
        Some((_, Ok(h))) => return Err(err(1, format!("unexpected header {h:?}, want {RATINGS_HEADER:?}"))),
        Some((_, Err(e))) => return Err(Error::io(origin, e)),
        None => return Err(err(1, "empty file".into())),
    }

    let mut first_seen: HashMap<u64, usize> = HashMap::new();
    let mut matched: Vec<(usize, RatingRecord)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(err(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let user_id: u64 = fields[0].parse().map_err(|_| err(lineno, format!("bad userId {:?}", fields[0])))?;
        let movie_id: u64 = fields[1].parse().map_err(|_| err(lineno, format!("bad movieId {:?}", fields[1])))?;
        let rating: f64 = fields[2].parse().map_err(|_| err(lineno, format!("bad rating {:?}", fields[2])))?;
        let timestamp: i64 =
            fields[3].parse().map_err(|_| err(lineno, format!("bad timestamp {:?}", fields[3])))?;
        if !(rating > 0.0 && rating <= RATING_SCALE_MAX) {
            return Err(err(lineno, format!("rating {rating} outside (0, {RATING_SCALE_MAX}]")));
        }
        let order = first_seen.len();
        let order = *first_seen.entry(user_id).or_insert(order);
        if movie_ids.contains(&movie_id) {
            matched.push((order, RatingRecord { user_id, movie_id, rating, timestamp }));
        }
    }
    // Stable: rows of one user keep their file order.
    matched.sort_by_key(|(order, _)| *order);
    Ok(matched.into_iter().map(|(_, r)| r).collect())
}

/// One round per user in record order. When a user rated the same movie
/// twice the later timestamp wins.
pub fn build_trace(records: &[RatingRecord], movie_ids: &[u64]) -> Result<ReplayTrace> {
    let arm_of: HashMap<u64, usize> = movie_ids.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let mut rounds = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let user = records[i].user_id;
        let mut latest: Vec<Option<(i64, f64)>> = vec![None; movie_ids.len()];
        while i < records.len() && records[i].user_id == user {
            let r = &records[i];
            if let Some(&arm) = arm_of.get(&r.movie_id) {
                if latest[arm].is_none_or(|(ts, _)| r.timestamp >= ts) {
                    latest[arm] = Some((r.timestamp, r.rating));
                }
            }
            i += 1;
        }
        let rewards: Vec<(usize, f64)> = latest
            .iter()
            .enumerate()
            .filter_map(|(arm, v)| v.map(|(_, rating)| (arm, rating / RATING_SCALE_MAX)))
            .collect();
        if !rewards.is_empty() {
            let availability: ArmSet = rewards.iter().map(|&(a, _)| a).collect();
            rounds.push(ReplayRound { availability, rewards });
        }
    }
    ReplayTrace::new(movie_ids.len(), rounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, movies: &[u64]) -> Result<Vec<RatingRecord>> {
        read_ratings(text.as_bytes(), Path::new("ratings.csv"), movies)
    }

    #[test]
    fn filters_to_chosen_movies() {
        let text = "userId,movieId,rating,timestamp\n1,10,4.0,5\n1,20,3.0,6\n2,30,5.0,7\n";
        let recs = parse(text, &[20]).unwrap();
        assert_eq!(recs, vec![RatingRecord { user_id: 1, movie_id: 20, rating: 3.0, timestamp: 6 }]);
        assert!(parse(text, &[99]).unwrap().is_empty());
    }

    #[test]
    fn groups_users_by_first_appearance() {
        let text = "userId,movieId,rating,timestamp\n7,1,4.0,1\n3,1,2.0,2\n7,2,5.0,3\n";
        let recs = parse(text, &[1, 2]).unwrap();
        let users: Vec<u64> = recs.iter().map(|r| r.user_id).collect();
        assert_eq!(users, vec![7, 7, 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse("user,movie\n", &[1]), Err(Error::Parse { line: 1, .. })));
        let bad = "userId,movieId,rating,timestamp\n1,1,4.0,1\n1,x,4.0,1\n";
        assert!(matches!(parse(bad, &[1]), Err(Error::Parse { line: 3, .. })));
        let bad = "userId,movieId,rating,timestamp\n1,1,7.0,1\n";
        assert!(matches!(parse(bad, &[1]), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_ratings(Path::new("/nonexistent/ratings.csv"), &[1]), Err(Error::Io { .. })));
    }

    #[test]
    fn trace_construction() {
        let recs = vec![
            RatingRecord { user_id: 1, movie_id: 100, rating: 5.0, timestamp: 0 },
            RatingRecord { user_id: 2, movie_id: 100, rating: 3.0, timestamp: 0 },
            RatingRecord { user_id: 2, movie_id: 300, rating: 4.5, timestamp: 0 },
        ];
        let trace = build_trace(&recs, &[100, 200, 300]).unwrap();
        assert_eq!(trace.len(), 2);
        let r0 = trace.replay_round(0).unwrap();
        assert_eq!(r0.availability, [0].into_iter().collect());
        assert_eq!(r0.rewards, vec![(0, 1.0)]);
        let r1 = trace.replay_round(1).unwrap();
        assert_eq!(r1.availability, [0, 2].into_iter().collect());
        assert_eq!(r1.rewards, vec![(0, 0.6), (2, 0.9)]);
    }

    #[test]
    fn users_without_matches_emit_nothing() {
        let text = "userId,movieId,rating,timestamp\n1,9,4.0,1\n2,1,4.0,1\n";
        let recs = parse(text, &[1]).unwrap();
        let trace = build_trace(&recs, &[1]).unwrap();
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn later_duplicate_wins() {
        let recs = vec![
            RatingRecord { user_id: 1, movie_id: 1, rating: 2.0, timestamp: 10 },
            RatingRecord { user_id: 1, movie_id: 1, rating: 4.0, timestamp: 20 },
        ];
        let trace = build_trace(&recs, &[1]).unwrap();
        assert_eq!(trace.replay_round(0).unwrap().rewards, vec![(0, 0.8)]);
    }
}
