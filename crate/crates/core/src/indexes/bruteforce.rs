use super::SearchResult;
use crate::data::Dataset;
use crate::oracle::scan_topk;

/// Linear scan; the exact baseline.
#[derive(Debug)]
pub struct BruteForce<'a> {
    train: &'a Dataset,
}

impl<'a> BruteForce<'a> {
    pub fn new(train: &'a Dataset) -> Self {
        Self { train }
    }

    pub fn train(&self) -> &'a Dataset {
        self.train
    }

    pub fn search(&self, q: &[f32], k: usize) -> SearchResult {
        let q = self.train.metric().prepare(q);
        let top = scan_topk(self.train, &q, k, None);
        SearchResult::from_neighbors(top, self.train.len() as u64, 0)
    }
}
