use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::error::{IleaError, Result};
use crate::losses::{ridge_weights, RatingsShard, UserColumn};
use crate::manifold::Point;
use crate::rng::{standard_normal, substream};

/// One parsed `user<TAB>item<TAB>rating[<TAB>timestamp]` row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawRating {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
}

/// Fraction of each user's ratings held out for testing (rounded down).
pub const TEST_FRACTION: f64 = 0.1;

pub fn read_ratings(path: &Path) -> Result<Vec<RawRating>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| IleaError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(err(format!("expected 3 or 4 tab-separated fields, got {}", fields.len())));
        }
        let user = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad user id {:?}: {e}", fields[0])))?;
        let item = fields[1]
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad item id {:?}: {e}", fields[1])))?;
        let rating = fields[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| err(format!("bad rating {:?}: {e}", fields[2])))?;
        if !rating.is_finite() {
            return Err(err(format!("non-finite rating {rating}")));
        }
        out.push(RawRating { user, item, rating });
    }
    if out.is_empty() {
        return Err(IleaError::EmptyData(path.to_path_buf()));
    }
    Ok(out)
}

/// Ratings split into per-worker training shards and a held-out test set.
#[derive(Clone, Debug)]
pub struct RatingsData {
    pub n_users: usize,
    pub n_items: usize,
    /// Subtracted from every rating before fitting; added back to predictions.
    pub offset: f64,
    pub shards: Vec<RatingsShard>,
    /// Held-out entries, by dense user id.
    pub test: Vec<UserColumn>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitOptions {
    pub workers: usize,
    pub rank: usize,
    pub lambda: f64,
    pub seed: u64,
    /// Center ratings at the training mean.
    pub center: bool,
}

/// Reads a ratings file and splits it with [`split_ratings`].
pub fn load_ratings(path: &Path, opts: &SplitOptions) -> Result<RatingsData> {
    split_ratings(&read_ratings(path)?, opts)
}

/// Reindexes users and items densely in order of their ids, holds out
/// `floor(10%)` of every user's ratings, shuffles users and deals them into
/// `workers` shards of near-equal size.
pub fn split_ratings(raw: &[RawRating], opts: &SplitOptions) -> Result<RatingsData> {
    if opts.workers == 0 {
        return Err(IleaError::Config("need at least one worker".into()));
    }
    let dense = |ids: &mut dyn Iterator<Item = u64>| -> BTreeMap<u64, u32> {
        let mut map: BTreeMap<u64, u32> = ids.map(|id| (id, 0)).collect();
        for (i, v) in map.values_mut().enumerate() {
            *v = i as u32;
        }
        map
    };
    let users = dense(&mut raw.iter().map(|r| r.user));
    let items = dense(&mut raw.iter().map(|r| r.item));
    let (n_users, n_items) = (users.len(), items.len());
    if opts.workers > n_users {
        return Err(IleaError::Config(format!(
            "{} workers but only {n_users} users",
            opts.workers
        )));
    }

    let mut by_user: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_users];
    for r in raw {
        by_user[users[&r.user] as usize].push((items[&r.item], r.rating));
    }

    let mut split_rng = substream(opts.seed, 0);
    let mut train: Vec<UserColumn> = Vec::with_capacity(n_users);
    let mut test: Vec<UserColumn> = Vec::with_capacity(n_users);
    for (uid, mut entries) in by_user.into_iter().enumerate() {
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let n_test = (entries.len() as f64 * TEST_FRACTION).floor() as usize;
        entries.shuffle(&mut split_rng);
        let mut held: Vec<(u32, f64)> = entries.drain(..n_test).collect();
        held.sort_by_key(|e| e.0);
        entries.sort_by_key(|e| e.0);
        train.push(UserColumn {
            user_id: uid as u32,
            entries,
        });
        test.push(UserColumn {
            user_id: uid as u32,
            entries: held,
        });
    }

    let offset = if opts.center {
        let (sum, count) = train
            .iter()
            .flat_map(|u| u.entries.iter())
            .fold((0.0, 0usize), |(s, c), e| (s + e.1, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    } else {
        0.0
    };
    if offset != 0.0 {
        for u in &mut train {
            for e in &mut u.entries {
                e.1 -= offset;
            }
        }
    }

    let mut order: Vec<usize> = (0..n_users).collect();
    order.shuffle(&mut substream(opts.seed, 1));
    let mut slots: Vec<Option<UserColumn>> = train.into_iter().map(Some).collect();
    let m = opts.workers;
    let mut shards = Vec::with_capacity(m);
    for j in 0..m {
        let lo = j * n_users / m;
        let hi = (j + 1) * n_users / m;
        let mut members: Vec<UserColumn> = order[lo..hi]
            .iter()
            .map(|&u| slots[u].take().expect("each user dealt once"))
            .collect();
        members.sort_by_key(|u| u.user_id);
        shards.push(RatingsShard::new(members, n_items, opts.rank, opts.lambda)?);
    }
    Ok(RatingsData {
        n_users,
        n_items,
        offset,
        shards,
        test,
    })
}

impl RatingsData {
    pub fn n_train(&self) -> usize {
        self.shards.iter().map(|s| s.n_ratings()).sum()
    }

    pub fn n_test(&self) -> usize {
        self.test.iter().map(|u| u.entries.len()).sum()
    }

    pub fn lambda(&self) -> f64 {
        self.shards[0].lambda()
    }

    /// Root mean squared error on the held-out entries, each user's weights
    /// fitted to their training ratings under the subspace `u`.
    pub fn test_rmse(&self, u: &Point) -> Result<f64> {
        self.test_rmse_within(u, None)
    }

    /// [`RatingsData::test_rmse`] with predictions clamped to `range`.
    pub fn test_rmse_within(&self, u: &Point, range: Option<(f64, f64)>) -> Result<f64> {
        let lambda = self.lambda();
        let uc = u.coords();
        let mut sse = 0.0;
        let mut count = 0usize;
        for shard in &self.shards {
            for user in shard.users() {
                let held = &self.test[user.user_id as usize];
                if held.entries.is_empty() {
                    continue;
                }
                let w = ridge_weights(u, user, lambda)?;
                for &(item, rating) in &held.entries {
                    let mut pred = self.offset + uc.row(item as usize).dot(&w.transpose());
                    if let Some((lo, hi)) = range {
                        pred = pred.clamp(lo, hi);
                    }
                    sse += (pred - rating).powi(2);
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(IleaError::Config("no held-out ratings".into()));
        }
        Ok((sse / count as f64).sqrt())
    }
}

/// Shape of a synthetic ratings corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub min_per_user: usize,
    pub latent_rank: usize,
    pub seed: u64,
}

impl SyntheticCorpus {
    /// The dimensions of the MovieLens 100K release.
    pub fn movielens_100k(seed: u64) -> Self {
        Self {
            users: 943,
            items: 1682,
            ratings: 100_000,
            min_per_user: 20,
            latent_rank: 10,
            seed,
        }
    }
}

/// Writes a MovieLens-format file (`user item rating timestamp`, tab
/// separated, 1-based ids, integer ratings 1..=5) drawn from a low-rank
/// model with user and item biases. Every user and every item is rated.
pub fn write_synthetic_ratings(path: &Path, corpus: &SyntheticCorpus) -> Result<()> {
    let rows = synthetic_ratings(corpus)?;
    let mut w = BufWriter::new(File::create(path)?);
    for (i, r) in rows.iter().enumerate() {
        writeln!(w, "{}\t{}\t{}\t{}", r.user, r.item, r.rating, 874_724_710 + 37 * i as u64)?;
    }
    w.flush()?;
    Ok(())
}

pub fn synthetic_ratings(corpus: &SyntheticCorpus) -> Result<Vec<RawRating>> {
    let SyntheticCorpus {
        users,
        items,
        ratings,
        min_per_user,
        latent_rank,
        seed,
    } = *corpus;
    if users * min_per_user > ratings || ratings > users * items || items > ratings || min_per_user > items {
        return Err(IleaError::Config(format!("infeasible synthetic corpus {corpus:?}")));
    }
    let mut rng = substream(seed, 7);
    let rng: &mut dyn RngCore = &mut rng;
    let scale = 1.0 / (latent_rank as f64).sqrt();
    let p = DMatrix::from_fn(users, latent_rank, |_, _| standard_normal(rng) * scale);
    let q = DMatrix::from_fn(items, latent_rank, |_, _| standard_normal(rng) * scale);
    let user_bias: Vec<f64> = (0..users).map(|_| 0.4 * standard_normal(rng)).collect();
    let item_bias: Vec<f64> = (0..items).map(|_| 0.5 * standard_normal(rng)).collect();
    // Long-tailed popularity, as in real catalogues.
    let popularity: Vec<f64> = (0..items).map(|_| (1.2 * standard_normal(rng)).exp()).collect();

    let mut rated = vec![vec![false; items]; users];
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(ratings);
    let mut take = |u: usize, i: usize, pairs: &mut Vec<(usize, usize)>| {
        if !rated[u][i] {
            rated[u][i] = true;
            pairs.push((u, i));
            true
        } else {
            false
        }
    };
    // Guarantee item coverage first, then the per-user minimum.
    for i in 0..items {
        let u = rng.random_range(0..users);
        take(u, i, &mut pairs);
    }
    let total_pop: f64 = popularity.iter().sum();
    let cumulative: Vec<f64> = popularity
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p / total_pop;
            Some(*acc)
        })
        .collect();
    let draw_item = |rng: &mut dyn RngCore| -> usize {
        let x: f64 = rng.random();
        cumulative.partition_point(|&c| c < x).min(items - 1)
    };
    let mut per_user = vec![0usize; users];
    for &(u, _) in &pairs {
        per_user[u] += 1;
    }
    for u in 0..users {
        while per_user[u] < min_per_user {
            let i = draw_item(rng);
            if take(u, i, &mut pairs) {
                per_user[u] += 1;
            }
        }
    }
    // Remaining ratings go to users with a heavy-tailed activity level.
    let activity: Vec<f64> = (0..users).map(|_| (1.0 * standard_normal(rng)).exp()).collect();
    let total_act: f64 = activity.iter().sum();
    let act_cum: Vec<f64> = activity
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a / total_act;
            Some(*acc)
        })
        .collect();
    while pairs.len() < ratings {
        let x: f64 = rng.random();
        let u = act_cum.partition_point(|&c| c < x).min(users - 1);
        let i = draw_item(rng);
        take(u, i, &mut pairs);
    }

    pairs.sort_unstable();
    let rows = pairs
        .into_iter()
        .map(|(u, i)| {
            let signal = 3.55 + user_bias[u] + item_bias[i] + p.row(u).dot(&q.row(i)) * 1.1;
            let noisy = signal + 0.6 * standard_normal(rng);
            RawRating {
                user: u as u64 + 1,
                item: i as u64 + 1,
                rating: noisy.round().clamp(1.0, 5.0),
            }
        })
        .collect();
    Ok(rows)
}
