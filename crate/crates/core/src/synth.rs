//! Seeded synthetic check-in corpora with planted temporal structure.
//!
//! Users belong to one of two cohorts, and each cohort owns a few activity
//! windows (weekday blocks for one, weekend blocks for the other). Every
//! regular POI belongs to one window and is only visited inside it; every
//! regular user keeps to one or two windows of their cohort. Within a window, users
//! pick POIs near a home point with a distance decay, which gives the
//! geographical and collaborative models their own signal. Windows are
//! spatially interleaved, so distance alone cannot tell them apart. Erratic
//! users check in anywhere at any time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{CheckInLog, RawCheckIn, SocialEdges};

/// 2010-04-05 00:00 UTC, a Monday.
const EPOCH_MONDAY: i64 = 1_270_425_600;
const DAY: i64 = 86_400;

/// Local activity window: the days of week (0 = Monday) and hours of day.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub days: Vec<u32>,
    pub hours: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_users: usize,
    pub pois_per_window: usize,
    /// Distinct POIs per regular user, inclusive range.
    pub pois_per_user: (usize, usize),
    pub visits_per_poi: (usize, usize),
    pub erratic_fraction: f64,
    /// Chance that a regular user splits their POIs between their window
    /// and a second window of the same cohort.
    pub bridge_fraction: f64,
    /// Distinct POIs per erratic user, inclusive range.
    pub erratic_pois: (usize, usize),
    /// Activity windows per cohort.
    pub windows: [Vec<Window>; 2],
    /// Side of the square area, in degrees.
    pub extent_deg: f64,
    /// Distance decay scale for POI choice, in degrees.
    pub decay_deg: f64,
    pub friends_per_user: usize,
    /// Chance that a regular user's friendship stays inside their window.
    pub friend_homophily: f64,
    pub weeks: i64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_users: 500,
            pois_per_window: 200,
            pois_per_user: (8, 16),
            visits_per_poi: (5, 10),
            erratic_fraction: 0.1,
            bridge_fraction: 1.0,
            erratic_pois: (8, 16),
            windows: [
                (0..5).map(|i| window(&[0, 1, 2, 3, 4], 6 + 3 * i..9 + 3 * i)).collect(),
                (0..5).map(|i| window(&[5, 6], 6 + 3 * i..9 + 3 * i)).collect(),
            ],
            extent_deg: 0.2,
            decay_deg: 0.01,
            friends_per_user: 8,
            friend_homophily: 0.9,
            weeks: 12,
        }
    }
}

fn window(days: &[u32], hours: std::ops::Range<u32>) -> Window {
    Window {
        days: days.to_vec(),
        hours: hours.collect(),
    }
}

/// Ground truth kept alongside a planted corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedCorpus {
    pub log: CheckInLog,
    /// `(cohort, primary window)` per user id (`None` for erratic users),
    /// in id order.
    pub cohorts: Vec<(String, Option<(usize, usize)>)>,
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn in_range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

fn time_in(rng: &mut ChaCha8Rng, w: &Window, weeks: i64) -> i64 {
    let week = rng.random_range(0..weeks);
    let day = w.days[rng.random_range(0..w.days.len())] as i64;
    let hour = w.hours[rng.random_range(0..w.hours.len())] as i64;
    EPOCH_MONDAY + (week * 7 + day) * DAY + hour * 3600 + rng.random_range(0..3600)
}

/// Picks `k` distinct entries of `pool` with probability proportional to
/// `weight`, by repeated weighted draws.
fn weighted_distinct(rng: &mut ChaCha8Rng, pool: &[usize], weight: impl Fn(usize) -> f64, k: usize) -> Vec<usize> {
    let mut w: Vec<f64> = pool.iter().map(|&p| weight(p)).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(pool.len()) {
        let total: f64 = w.iter().sum();
        let mut r = rng.random::<f64>() * total;
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 && r < wi {
                pick = i;
                break;
            }
            r -= wi;
        }
        out.push(pool[pick]);
        w[pick] = 0.0;
    }
    out
}

pub fn planted_corpus(cfg: &PlantedConfig, seed: u64) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Windows are numbered cohort by cohort; regular POI `p` belongs to
    // window `p % n_windows`.
    let windows: Vec<(usize, &Window)> = cfg
        .windows
        .iter()
        .enumerate()
        .flat_map(|(c, ws)| ws.iter().map(move |w| (c, w)))
        .collect();
    let n_windows = windows.len();
    let n_pois = n_windows * cfg.pois_per_window;
    let coords: Vec<(f64, f64)> = (0..n_pois)
        .map(|_| (rng.random::<f64>() * cfg.extent_deg, rng.random::<f64>() * cfg.extent_deg))
        .collect();
    let pools: Vec<Vec<usize>> = (0..n_windows)
        .map(|w| (0..n_pois).filter(|p| p % n_windows == w).collect())
        .collect();
    let all: Vec<usize> = (0..n_pois).collect();

    let mut records = Vec::new();
    let mut homes = Vec::with_capacity(cfg.n_users);
    let mut cohorts = Vec::with_capacity(cfg.n_users);
    for u in 0..cfg.n_users {
        let user_id = format!("u{u:04}");
        let erratic = rng.random::<f64>() < cfg.erratic_fraction;
        let cohort = u % 2;
        let local = rng.random_range(0..cfg.windows[cohort].len());
        let w = windows.iter().position(|&(c, _)| c == cohort).unwrap_or(0) + local;
        let home = (rng.random::<f64>() * cfg.extent_deg, rng.random::<f64>() * cfg.extent_deg);
        homes.push(home);
        let near = |p: usize| (1.0 + dist2(coords[p], home).sqrt() / cfg.decay_deg).powi(-3);
        let k = in_range(&mut rng, if erratic { cfg.erratic_pois } else { cfg.pois_per_user });
        // `(poi, window)`; `None` means any time.
        let mut visits: Vec<(usize, Option<usize>)> = Vec::new();
        if erratic {
            visits.extend(weighted_distinct(&mut rng, &all, near, k).into_iter().map(|p| (p, None)));
        } else {
            let n_local = cfg.windows[cohort].len();
            let second = (n_local > 1 && rng.random::<f64>() < cfg.bridge_fraction)
                .then(|| w - local + (local + rng.random_range(1..n_local)) % n_local);
            let k_second = if second.is_some() { k / 2 } else { 0 };
            visits.extend(weighted_distinct(&mut rng, &pools[w], near, k - k_second).into_iter().map(|p| (p, Some(w))));
            if let Some(w2) = second {
                visits.extend(weighted_distinct(&mut rng, &pools[w2], near, k_second).into_iter().map(|p| (p, Some(w2))));
            }
        }
        for (p, window) in visits {
            for _ in 0..in_range(&mut rng, cfg.visits_per_poi) {
                let timestamp = match window {
                    Some(w) => time_in(&mut rng, windows[w].1, cfg.weeks),
                    None => EPOCH_MONDAY + rng.random_range(0..cfg.weeks * 7 * DAY),
                };
                records.push(RawCheckIn {
                    user_id: user_id.clone(),
                    poi_id: format!("l{p:04}"),
                    timestamp,
                    lat: coords[p].0,
                    lon: coords[p].1,
                });
            }
        }
        cohorts.push((user_id, (!erratic).then_some((cohort, w))));
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_windows];
    for (u, (_, truth)) in cohorts.iter().enumerate() {
        if let Some((_, w)) = truth {
            members[*w].push(u);
        }
    }
    let mut social = SocialEdges::default();
    for (u, (_, truth)) in cohorts.iter().enumerate() {
        for _ in 0..cfg.friends_per_user {
            let same = truth.filter(|_| rng.random::<f64>() < cfg.friend_homophily);
            let v = match same {
                // The closest home among a few random window members.
                Some((_, w)) => (0..5)
                    .map(|_| members[w][rng.random_range(0..members[w].len())])
                    .filter(|&v| v != u)
                    .min_by(|&a, &b| dist2(homes[u], homes[a]).total_cmp(&dist2(homes[u], homes[b])))
                    .unwrap_or(u),
                None => rng.random_range(0..cfg.n_users),
            };
            if v != u {
                social.insert(&format!("u{u:04}"), &format!("u{v:04}"));
            }
        }
    }
    PlantedCorpus {
        log: CheckInLog::new(records, social),
        cohorts,
    }
}
