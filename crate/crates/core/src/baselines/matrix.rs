use crate::ingest::{CheckInLog, PoiIx, UserIx};

/// Sparse user×POI visit counts; the binary view is `count > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct UserPoiMatrix {
    rows: Vec<Vec<(PoiIx, u32)>>,
    cols: Vec<Vec<UserIx>>,
}

impl UserPoiMatrix {
    pub fn from_log(log: &CheckInLog) -> Self {
        let mut rows: Vec<Vec<(PoiIx, u32)>> = Vec::with_capacity(log.n_users());
        let mut cols = vec![Vec::new(); log.n_pois()];
        for u in 0..log.n_users() {
            let mut pois: Vec<PoiIx> = log.history(u).map(|c| c.poi).collect();
            pois.sort_unstable();
            let mut row: Vec<(PoiIx, u32)> = Vec::new();
            for p in pois {
                match row.last_mut() {
                    Some((q, n)) if *q == p => *n += 1,
                    _ => row.push((p, 1)),
                }
            }
            for &(p, _) in &row {
                cols[p].push(u);
            }
            rows.push(row);
        }
        UserPoiMatrix { rows, cols }
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_pois(&self) -> usize {
        self.cols.len()
    }

    pub fn count(&self, u: UserIx, p: PoiIx) -> u32 {
        let row = &self.rows[u];
        row.binary_search_by_key(&p, |&(q, _)| q)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    pub fn visited(&self, u: UserIx, p: PoiIx) -> bool {
        self.count(u, p) > 0
    }

    /// `(poi, count)` pairs of a user, sorted by POI.
    pub fn row(&self, u: UserIx) -> &[(PoiIx, u32)] {
        &self.rows[u]
    }

    /// Sorted distinct POIs of a user.
    pub fn pois_of(&self, u: UserIx) -> Vec<PoiIx> {
        self.rows[u].iter().map(|&(p, _)| p).collect()
    }

    /// Sorted distinct visitors of a POI.
    pub fn visitors(&self, p: PoiIx) -> &[UserIx] {
        &self.cols[p]
    }
}

/// Size of the intersection of two sorted slices.
pub(crate) fn sorted_overlap(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RawCheckIn, SocialEdges};

    #[test]
    fn counts_and_binary_view() {
        let recs = [("a", "x"), ("a", "x"), ("a", "y"), ("b", "y")]
            .iter()
            .enumerate()
            .map(|(i, (u, p))| RawCheckIn {
                user_id: u.to_string(),
                poi_id: p.to_string(),
                timestamp: 100 + i as i64,
                lat: 0.0,
                lon: 0.0,
            })
            .collect();
        let m = UserPoiMatrix::from_log(&CheckInLog::new(recs, SocialEdges::default()));
        assert_eq!(m.count(0, 0), 2);
        assert_eq!(m.count(1, 0), 0);
        assert!(m.visited(1, 1) && !m.visited(1, 0));
        assert_eq!(m.visitors(1), &[0, 1]);
        assert_eq!(m.pois_of(0), vec![0, 1]);
    }

    #[test]
    fn overlap_of_sorted_sets() {
        assert_eq!(sorted_overlap(&[1, 3, 5, 7], &[2, 3, 7, 9]), 2);
        assert_eq!(sorted_overlap(&[], &[1]), 0);
    }
}
