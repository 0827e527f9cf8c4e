//! MovieLens ratings ingestion.
//!
//! Users become agents and genres become arms. Each `(user, genre)` pair
//! keeps its ratings in timestamp order; the loss tensor spreads those
//! ratings over the horizon in equal blocks, with loss `(5.5 - r) / 5.5`.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::Deserialize;

use crate::env::LossTensor;
use crate::error::{Error, Result};

/// Genre tags in the order documented by the dataset. The last entry is the
/// dataset's own tag for untagged movies, which is kept as an arm.
pub const GENRES: [&str; 20] = [
    "Action",
    "Adventure",
    "Animation",
    "Children",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "IMAX",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
    "(no genres listed)",
];

fn genre_index(tag: &str) -> Option<usize> {
    let tag = if tag == "Children's" { "Children" } else { tag };
    GENRES.iter().position(|g| *g == tag)
}

pub fn rating_to_loss(rating: f64) -> f64 {
    (5.5 - rating) / 5.5
}

#[derive(Debug, Deserialize)]
struct MovieRow {
    #[serde(rename = "movieId")]
    movie_id: u64,
    #[serde(rename = "title")]
    _title: String,
    genres: String,
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    #[serde(rename = "userId")]
    user_id: u64,
    #[serde(rename = "movieId")]
    movie_id: u64,
    rating: f64,
    timestamp: i64,
}

/// Per-agent, per-genre rating sequences in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct GenreSequences {
    user_ids: Vec<u64>,
    /// `ratings[v][i]` holds agent `v`'s ratings of genre `i`.
    ratings: Vec<Vec<Vec<f64>>>,
}

/// Counters collected while parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub ratings_read: usize,
    pub unknown_movie_ratings: usize,
    pub users_seen: usize,
    pub users_dropped: usize,
}

impl GenreSequences {
    pub fn agent_count(&self) -> usize {
        self.ratings.len()
    }

    pub fn genre_count(&self) -> usize {
        GENRES.len()
    }

    pub fn user_ids(&self) -> &[u64] {
        &self.user_ids
    }

    pub fn ratings(&self, agent: usize, genre: usize) -> &[f64] {
        &self.ratings[agent][genre]
    }

    /// `m^v(i)`, the number of ratings agent `v` gave genre `i`.
    pub fn count(&self, agent: usize, genre: usize) -> usize {
        self.ratings[agent][genre].len()
    }

    /// Largest rating count over all agents and genres.
    pub fn default_horizon(&self) -> Result<usize> {
        self.ratings
            .iter()
            .flat_map(|per_genre| per_genre.iter().map(Vec::len))
            .max()
            .ok_or(Error::EmptyCohort)
    }

    /// Keeps the first `n` agents (ascending user id).
    pub fn select_agents(&self, n: usize) -> Self {
        Self {
            user_ids: self.user_ids.iter().take(n).copied().collect(),
            ratings: self.ratings.iter().take(n).cloned().collect(),
        }
    }

    /// Keeps at most the `max_len` earliest ratings of every sequence.
    pub fn truncate(&self, max_len: usize) -> Self {
        Self {
            user_ids: self.user_ids.clone(),
            ratings: self
                .ratings
                .iter()
                .map(|per_genre| {
                    per_genre
                        .iter()
                        .map(|s| s[..s.len().min(max_len)].to_vec())
                        .collect()
                })
                .collect(),
        }
    }

    /// Builds sequences directly, mostly for tests. Every agent needs at
    /// least one rating in each of the `GENRES.len()` genres.
    pub fn from_ratings(user_ids: Vec<u64>, ratings: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if ratings.is_empty() {
            return Err(Error::EmptyCohort);
        }
        if user_ids.len() != ratings.len() {
            return Err(Error::Shape {
                expected: format!("{} user ids", ratings.len()),
                found: format!("{}", user_ids.len()),
            });
        }
        for per_genre in &ratings {
            if per_genre.len() != GENRES.len() || per_genre.iter().any(Vec::is_empty) {
                return Err(Error::InvalidSpec(
                    "every agent needs ratings in every genre".into(),
                ));
            }
            if let Some(r) = per_genre.iter().flatten().find(|r| !valid_rating(**r)) {
                return Err(Error::InvalidSpec(format!(
                    "rating {r} not in 0.5..=5 half steps"
                )));
            }
        }
        Ok(Self { user_ids, ratings })
    }
}

fn valid_rating(r: f64) -> bool {
    (0.5..=5.0).contains(&r) && (r * 2.0).fract() == 0.0
}

fn parse_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

/// Streams every record of a headed CSV input to `f` with its line number.
fn for_each_row<T, F>(input: impl Read, mut f: F) -> Result<()>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(u64, T) -> Result<()>,
{
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(parse_error)?.clone();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(parse_error)? {
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        f(line, row)?;
    }
    Ok(())
}

/// Reads `ratings.csv` and `movies.csv` and keeps the users who rated at
/// least one movie of every genre. Ratings of unknown movies are counted and
/// skipped. Ties in timestamp keep file order.
pub fn parse_ratings(
    ratings: impl Read,
    movies: impl Read,
) -> Result<(GenreSequences, IngestReport)> {
    let mut movie_genres: HashMap<u64, Vec<usize>> = HashMap::new();
    for_each_row(movies, |line, row: MovieRow| {
        let mut genres = Vec::new();
        for tag in row.genres.split('|') {
            let idx = genre_index(tag.trim()).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown genre {tag:?} for movie {}", row.movie_id),
            })?;
            if !genres.contains(&idx) {
                genres.push(idx);
            }
        }
        movie_genres.insert(row.movie_id, genres);
        Ok(())
    })?;

    let mut report = IngestReport::default();
    // user -> [(timestamp, rating, movie)] in file order
    let mut per_user: BTreeMap<u64, Vec<(i64, f64, u64)>> = BTreeMap::new();
    for_each_row(ratings, |line, row: RatingRow| {
        if !valid_rating(row.rating) {
            return Err(Error::Parse {
                line,
                message: format!("rating {} not in 0.5..=5 half steps", row.rating),
            });
        }
        report.ratings_read += 1;
        if !movie_genres.contains_key(&row.movie_id) {
            report.unknown_movie_ratings += 1;
            return Ok(());
        }
        per_user
            .entry(row.user_id)
            .or_default()
            .push((row.timestamp, row.rating, row.movie_id));
        Ok(())
    })?;
    report.users_seen = per_user.len();

    let mut user_ids = Vec::new();
    let mut sequences = Vec::new();
    for (user, mut entries) in per_user {
        entries.sort_by_key(|e| e.0);
        let mut per_genre = vec![Vec::new(); GENRES.len()];
        for (_, rating, movie) in entries {
            for &g in &movie_genres[&movie] {
                per_genre[g].push(rating);
            }
        }
        if per_genre.iter().all(|s| !s.is_empty()) {
            user_ids.push(user);
            sequences.push(per_genre);
        } else {
            report.users_dropped += 1;
        }
    }
    if sequences.is_empty() {
        return Err(Error::EmptyCohort);
    }
    Ok((
        GenreSequences {
            user_ids,
            ratings: sequences,
        },
        report,
    ))
}

/// Block-constant loss tensor built from rating sequences.
#[derive(Debug, Clone)]
pub struct BlockLosses {
    horizon: usize,
    agents: usize,
    /// Per `(v, i)`: block length and the loss of each block.
    cells: Vec<(usize, Vec<f64>)>,
}

/// Rating `j` of agent `v` on genre `i` covers rounds
/// `[j * floor(T/m), (j+1) * floor(T/m))`; the remainder tail repeats the
/// last rating.
pub fn build_loss_tensor(seqs: &GenreSequences, horizon: usize) -> Result<BlockLosses> {
    let k = GENRES.len();
    let mut cells = Vec::with_capacity(seqs.agent_count() * k);
    for v in 0..seqs.agent_count() {
        for i in 0..k {
            let r = seqs.ratings(v, i);
            if r.is_empty() || horizon < r.len() {
                return Err(Error::InvalidHorizon {
                    horizon,
                    agent: v,
                    genre: i,
                    count: r.len(),
                });
            }
            cells.push((
                horizon / r.len(),
                r.iter().map(|&x| rating_to_loss(x)).collect(),
            ));
        }
    }
    Ok(BlockLosses {
        horizon,
        agents: seqs.agent_count(),
        cells,
    })
}

impl BlockLosses {
    /// Number of ratings behind cell `(v, i)`.
    pub fn block_count(&self, v: usize, i: usize) -> usize {
        self.cells[v * GENRES.len() + i].1.len()
    }

    /// Mean loss of every genre over all rounds and agents.
    pub fn genre_means(&self) -> Vec<f64> {
        let k = GENRES.len();
        let mut sums = vec![0.0; k];
        for (idx, (block, losses)) in self.cells.iter().enumerate() {
            let m = losses.len();
            let tail = self.horizon - block * m;
            let total: f64 =
                losses.iter().map(|l| l * *block as f64).sum::<f64>() + losses[m - 1] * tail as f64;
            sums[idx % k] += total;
        }
        let denom = (self.horizon * self.agents) as f64;
        sums.into_iter().map(|s| s / denom).collect()
    }

    /// Writes `genre,mean_loss` rows.
    pub fn write_genre_summary(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["genre", "mean_loss"])?;
        for (g, m) in GENRES.iter().zip(self.genre_means()) {
            w.write_record([g.to_string(), format!("{m:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl LossTensor for BlockLosses {
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn agent_count(&self) -> usize {
        self.agents
    }
    fn arm_count(&self) -> usize {
        GENRES.len()
    }
    fn fill_round(&self, t: usize, out: &mut [f64]) {
        for (slot, (block, losses)) in out.iter_mut().zip(&self.cells) {
            *slot = losses[(t / block).min(losses.len() - 1)];
        }
    }
    fn loss(&self, t: usize, v: usize, i: usize) -> f64 {
        let (block, losses) = &self.cells[v * GENRES.len() + i];
        losses[(t / block).min(losses.len() - 1)]
    }
}
