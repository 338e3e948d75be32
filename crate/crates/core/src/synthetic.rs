//! Seeded synthetic divisions with known robot strengths.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::design::match_count;
use crate::domain::{validate_snapshot, DivisionSnapshot, RawMatch, RawSnapshot};
use crate::error::Result;
use crate::partition::Partition;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Each robot's true strength; the division has `strengths.len()` robots.
    pub strengths: Vec<f64>,
    /// Minimum plays per robot in qualification.
    pub plays: usize,
    /// Standard deviation of the noise added to each alliance score.
    pub noise_sd: f64,
    pub playoff_matches: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticDivision {
    pub snapshot: DivisionSnapshot,
    pub strengths: Vec<f64>,
}

/// Assigns `robots` robots at random to the given strength levels, as evenly
/// as possible. Returns per-robot strengths and the true partition.
pub fn clustered_strengths(robots: usize, levels: &[f64], seed: u64) -> (Vec<f64>, Partition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..robots).map(|i| i % levels.len()).collect();
    labels.shuffle(&mut rng);
    let strengths = labels.iter().map(|&l| levels[l]).collect();
    (strengths, Partition::new(&labels))
}

pub fn robot_key(index: usize) -> String {
    format!("frc{}", 1000 + index)
}

/// Generates a division: a balanced qualification schedule where every robot
/// plays at least `plays` matches, alliance scores equal to summed strengths
/// plus Gaussian noise (rounded, floored at zero), official ranks from noisy
/// strengths, and playoff matches among the top 24 robots.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticDivision> {
    let k = config.strengths.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_sd.max(0.0)).expect("finite sd");
    let roster: Vec<String> = (0..k).map(robot_key).collect();

    let raw_match = |no: usize, blue: &[usize], red: &[usize], rng: &mut ChaCha8Rng| RawMatch {
        match_no: no as u32,
        blue: blue.iter().map(|&i| robot_key(i)).collect(),
        red: red.iter().map(|&i| robot_key(i)).collect(),
        blue_score: alliance_score(config, &noise, blue, rng),
        red_score: alliance_score(config, &noise, red, rng),
    };

    let m = match_count(k, config.plays)?;
    let mut plays = vec![0usize; k];
    let mut order: Vec<usize> = (0..k).collect();
    let mut qual_matches = Vec::with_capacity(m);
    for no in 1..=m {
        order.shuffle(&mut rng);
        order.sort_by_key(|&i| plays[i]);
        let six = &order[..6];
        for &i in six {
            plays[i] += 1;
        }
        qual_matches.push(raw_match(no, &six[..3], &six[3..], &mut rng));
    }

    let mut by_rank: Vec<usize> = (0..k).collect();
    let perceived: Vec<f64> = config
        .strengths
        .iter()
        .map(|&s| {
            s + if config.noise_sd > 0.0 {
                noise.sample(&mut rng) * 0.5
            } else {
                0.0
            }
        })
        .collect();
    by_rank.sort_by(|&a, &b| perceived[b].total_cmp(&perceived[a]).then(a.cmp(&b)));
    let frc_ratings = by_rank
        .iter()
        .enumerate()
        .map(|(rank, &i)| (robot_key(i), -((rank + 1) as f64)))
        .collect();

    let playoff_pool: Vec<usize> = by_rank.iter().copied().take(24.min(k)).collect();
    let mut playoff_matches = Vec::with_capacity(config.playoff_matches);
    if playoff_pool.len() >= 6 {
        for no in 1..=config.playoff_matches {
            let six: Vec<usize> = playoff_pool.choose_multiple(&mut rng, 6).copied().collect();
            playoff_matches.push(raw_match(no, &six[..3], &six[3..], &mut rng));
        }
    }

    let raw = RawSnapshot {
        division_key: format!("synthetic-{}", config.seed),
        roster,
        qual_matches,
        playoff_matches,
        frc_ratings,
        playoff_roster: playoff_pool.iter().map(|&i| robot_key(i)).collect(),
    };
    Ok(SyntheticDivision {
        snapshot: validate_snapshot(&raw)?,
        strengths: config.strengths.clone(),
    })
}

fn alliance_score(config: &SyntheticConfig, noise: &Normal<f64>, ids: &[usize], rng: &mut ChaCha8Rng) -> i64 {
    let mean: f64 = ids.iter().map(|&i| config.strengths[i]).sum();
    let e = if config.noise_sd > 0.0 { noise.sample(rng) } else { 0.0 };
    (mean + e).round().max(0.0) as i64
}
