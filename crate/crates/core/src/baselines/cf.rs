//! User-based collaborative filtering on the binary matrix and its social
//! variant, where the neighbourhood is the friend list.

use std::collections::HashMap;

use crate::baselines::matrix::{sorted_overlap, UserPoiMatrix};
use crate::ingest::{CheckInLog, PoiIx, UserIx};

/// Weighted neighbour vote: `Σ w(v)·visited(v, l) / Σ w(v)` for every POI.
/// Returns all zeros when the weights sum to zero.
pub fn weighted_vote(matrix: &UserPoiMatrix, neighbors: &[(UserIx, f64)]) -> Vec<f64> {
    let mut scores = vec![0.0; matrix.n_pois()];
    let total: f64 = neighbors.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return scores;
    }
    for &(v, w) in neighbors {
        for &(p, _) in matrix.row(v) {
            scores[p] += w;
        }
    }
    for s in &mut scores {
        *s = (*s / total).min(1.0);
    }
    scores
}

/// The `k` users most cosine-similar to the query history on the binary
/// matrix, excluding `query_user` and users with no overlap. Ordered by
/// similarity descending, ties by ascending user index.
pub fn ubcf_neighbors(
    matrix: &UserPoiMatrix,
    query_user: Option<UserIx>,
    history: &[PoiIx],
    k: usize,
) -> Vec<(UserIx, f64)> {
    let mut overlap: HashMap<UserIx, usize> = HashMap::new();
    for &p in history {
        for &v in matrix.visitors(p) {
            if Some(v) != query_user {
                *overlap.entry(v).or_default() += 1;
            }
        }
    }
    let h = history.len() as f64;
    let mut sims: Vec<(UserIx, f64)> = overlap
        .into_iter()
        .map(|(v, o)| (v, o as f64 / (h * matrix.row(v).len() as f64).sqrt()))
        .collect();
    sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sims.truncate(k);
    sims
}

/// UBCF scores of every POI for a query history (sorted distinct POIs).
pub fn ubcf_scores(matrix: &UserPoiMatrix, query_user: Option<UserIx>, history: &[PoiIx], k: usize) -> Vec<f64> {
    weighted_vote(matrix, &ubcf_neighbors(matrix, query_user, history, k))
}

pub fn ubcf_score(matrix: &UserPoiMatrix, u: UserIx, l: PoiIx, k: usize) -> f64 {
    ubcf_scores(matrix, Some(u), &matrix.pois_of(u), k)[l]
}

/// Friend lists restricted to users present in the check-in data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SocialGraph {
    friends: Vec<Vec<UserIx>>,
}

impl SocialGraph {
    pub fn from_log(log: &CheckInLog) -> Self {
        SocialGraph {
            friends: (0..log.n_users()).map(|u| log.friends(u).to_vec()).collect(),
        }
    }

    pub fn from_lists(friends: Vec<Vec<UserIx>>) -> Self {
        let friends = friends
            .into_iter()
            .map(|mut f| {
                f.sort_unstable();
                f.dedup();
                f
            })
            .collect();
        SocialGraph { friends }
    }

    pub fn friends(&self, u: UserIx) -> &[UserIx] {
        self.friends.get(u).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Jaccard similarity of two users over the union of their friend sets and
/// location sets, each element tagged by kind so friends and POIs never
/// collide.
pub fn social_jaccard(friends_a: &[UserIx], pois_a: &[PoiIx], friends_b: &[UserIx], pois_b: &[PoiIx]) -> f64 {
    let inter = sorted_overlap(friends_a, friends_b) + sorted_overlap(pois_a, pois_b);
    let union = friends_a.len() + pois_a.len() + friends_b.len() + pois_b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Friends of `u` weighted by [`social_jaccard`] against the query history.
pub fn social_neighbors(
    matrix: &UserPoiMatrix,
    graph: &SocialGraph,
    u: UserIx,
    history: &[PoiIx],
) -> Vec<(UserIx, f64)> {
    let own = graph.friends(u);
    own.iter()
        .map(|&f| {
            let w = social_jaccard(own, history, graph.friends(f), &matrix.pois_of(f));
            (f, w)
        })
        .collect()
}

pub fn social_scores(matrix: &UserPoiMatrix, graph: &SocialGraph, u: UserIx, history: &[PoiIx]) -> Vec<f64> {
    weighted_vote(matrix, &social_neighbors(matrix, graph, u, history))
}

pub fn social_score(matrix: &UserPoiMatrix, graph: &SocialGraph, u: UserIx, l: PoiIx) -> f64 {
    social_scores(matrix, graph, u, &matrix.pois_of(u))[l]
}
