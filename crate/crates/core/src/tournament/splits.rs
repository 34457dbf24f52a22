//! Train/validation/test assignment with whole videos kept in one split.
//!
//! A subset-sum check per split and action rejects most impossible specs up
//! front. The search then places the most constrained video first, preferring
//! the split with the most remaining demand, and backtracks as soon as some
//! action's demand can no longer be covered. A spec that cannot be met is an
//! error naming the split, action or video where the proof failed.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::SegmentRef;
use crate::ratings::PlayerId;

/// Node budget for the backtracking search.
const SEARCH_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    fn as_array(&self) -> [usize; 3] {
        [self.train, self.val, self.test]
    }
}

/// Clip counts per split for every action.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub per_action: BTreeMap<String, SplitCounts>,
}

impl SplitSpec {
    /// Default proportions: 62.5% train, 12.5% val, 25% test (10/2/4 of 16 clips).
    pub const DEFAULT_RATIO: [f64; 3] = [0.625, 0.125, 0.25];

    /// Per-action counts from a ratio, rounded by largest remainder so each
    /// action's counts sum to its clip count.
    pub fn from_ratio(segments: &[SegmentRef], ratio: [f64; 3]) -> Self {
        let sum: f64 = ratio.iter().sum();
        let mut clips: BTreeMap<String, usize> = BTreeMap::new();
        for s in segments {
            *clips.entry(s.action_label.clone()).or_default() += 1;
        }
        let per_action = clips
            .into_iter()
            .map(|(action, n)| {
                let exact: Vec<f64> = ratio.iter().map(|r| r / sum * n as f64).collect();
                let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
                let mut order: Vec<usize> = (0..3).collect();
                order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
                let short = n - counts.iter().sum::<usize>();
                for &i in order.iter().take(short) {
                    counts[i] += 1;
                }
                (action, SplitCounts { train: counts[0], val: counts[1], test: counts[2] })
            })
            .collect();
        Self { per_action }
    }

    /// The same counts for every action in the catalog.
    pub fn uniform(segments: &[SegmentRef], counts: SplitCounts) -> Self {
        let per_action = segments.iter().map(|s| (s.action_label.clone(), counts)).collect();
        Self { per_action }
    }
}

pub type SplitAssignment = BTreeMap<PlayerId, Split>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("action `{action}` has {actual} clips but the spec asks for {expected}")]
    CountMismatch { action: String, expected: usize, actual: usize },
    #[error("action `{0}` has no split counts")]
    MissingAction(String),
    #[error("segment `{0}` listed twice")]
    DuplicateSegment(PlayerId),
    /// No assignment exists. The fields locate where the proof failed; any may be absent.
    #[error("no assignment satisfies the spec{}", describe(.split, .action, .video))]
    Infeasible { split: Option<Split>, action: Option<String>, video: Option<String> },
    #[error("split search gave up after {nodes} nodes without deciding feasibility")]
    SearchExhausted { nodes: usize },
}

fn describe(split: &Option<Split>, action: &Option<String>, video: &Option<String>) -> String {
    let mut parts = Vec::new();
    if let Some(s) = split {
        parts.push(format!("split {s}"));
    }
    if let Some(a) = action {
        parts.push(format!("action `{a}`"));
    }
    if let Some(v) = video {
        parts.push(format!("video `{v}`"));
    }
    if parts.is_empty() { String::new() } else { format!(" ({})", parts.join(", ")) }
}

struct Video {
    id: String,
    /// (action index, clip count)
    clips: Vec<(usize, usize)>,
    total: usize,
}

/// Whether some subset of `sizes` sums to exactly `target`.
fn subset_sum(sizes: impl IntoIterator<Item = usize>, target: usize) -> bool {
    let mut reach = vec![false; target + 1];
    reach[0] = true;
    for s in sizes {
        for t in (s..=target).rev() {
            reach[t] |= reach[t - s];
        }
    }
    reach[target]
}

pub fn export_splits(segments: &[SegmentRef], spec: &SplitSpec, seed: u64) -> Result<SplitAssignment, SplitError> {
    let mut seen = std::collections::HashSet::new();
    let mut by_action: BTreeMap<&str, usize> = BTreeMap::new();
    for s in segments {
        if !seen.insert(&s.segment_id) {
            return Err(SplitError::DuplicateSegment(s.segment_id.clone()));
        }
        *by_action.entry(&s.action_label).or_default() += 1;
    }
    let actions: Vec<&str> = by_action.keys().copied().collect();
    let mut demand: Vec<[usize; 3]> = Vec::with_capacity(actions.len());
    for (&action, &actual) in &by_action {
        let counts = spec.per_action.get(action).ok_or_else(|| SplitError::MissingAction(action.into()))?;
        if counts.total() != actual {
            return Err(SplitError::CountMismatch { action: action.into(), expected: counts.total(), actual });
        }
        demand.push(counts.as_array());
    }

    let mut videos: BTreeMap<&str, BTreeMap<usize, usize>> = BTreeMap::new();
    for s in segments {
        let a = actions.binary_search(&s.action_label.as_str()).expect("action indexed");
        *videos.entry(&s.video_id).or_default().entry(a).or_default() += 1;
    }
    let mut videos: Vec<Video> = videos
        .into_iter()
        .map(|(id, clips)| Video {
            id: id.into(),
            total: clips.values().sum(),
            clips: clips.into_iter().collect(),
        })
        .collect();
    videos.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    for s in Split::ALL {
        let wanted: usize = demand.iter().map(|d| d[s.index()]).sum();
        if !subset_sum(videos.iter().map(|v| v.total), wanted) {
            return Err(SplitError::Infeasible { split: Some(s), action: None, video: None });
        }
        for (a, d) in demand.iter().enumerate() {
            let sizes = videos.iter().filter_map(|v| v.clips.iter().find(|c| c.0 == a).map(|c| c.1));
            if !subset_sum(sizes, d[s.index()]) {
                return Err(SplitError::Infeasible { split: Some(s), action: Some(actions[a].into()), video: None });
            }
        }
    }

    let mut search = Search {
        videos: &videos,
        demand,
        choice: vec![None; videos.len()],
        nodes: 0,
        stuck: None,
    };
    match search.solve(0) {
        Some(true) => {}
        Some(false) => {
            let (_, split, action, video) = search.stuck.unwrap_or((0, None, None, None));
            return Err(SplitError::Infeasible {
                split,
                action: action.map(|a| actions[a].to_string()),
                video: video.map(|v| videos[v].id.clone()),
            });
        }
        None => return Err(SplitError::SearchExhausted { nodes: search.nodes }),
    }
    let video_split: BTreeMap<&str, Split> = videos
        .iter()
        .zip(&search.choice)
        .map(|(v, s)| (v.id.as_str(), s.expect("every video placed")))
        .collect();
    Ok(segments.iter().map(|s| (s.segment_id.clone(), video_split[s.video_id.as_str()])).collect())
}

/// (depth, split, action index, video index) of the deepest dead end.
type Stuck = (usize, Option<Split>, Option<usize>, Option<usize>);

struct Search<'a> {
    videos: &'a [Video],
    demand: Vec<[usize; 3]>,
    choice: Vec<Option<Split>>,
    nodes: usize,
    stuck: Option<Stuck>,
}

impl Search<'_> {
    fn fits(&self, v: &Video, s: Split) -> bool {
        v.clips.iter().all(|&(a, c)| self.demand[a][s.index()] >= c)
    }

    fn dead_end(&mut self, depth: usize, split: Option<Split>, action: Option<usize>, video: Option<usize>) -> Option<bool> {
        if self.stuck.is_none_or(|s| depth >= s.0) {
            self.stuck = Some((depth, split, action, video));
        }
        Some(false)
    }

    /// `Some(found)` when the subtree was fully decided, `None` once the budget runs out.
    fn solve(&mut self, depth: usize) -> Option<bool> {
        if self.nodes >= SEARCH_BUDGET {
            return None;
        }
        self.nodes += 1;

        // Feasible splits per open video, and how many clips each split could still receive per action.
        let mut supply = vec![[0usize; 3]; self.demand.len()];
        let mut best: Option<(usize, [bool; 3])> = None;
        for (i, v) in self.videos.iter().enumerate() {
            if self.choice[i].is_some() {
                continue;
            }
            let mask = Split::ALL.map(|s| self.fits(v, s));
            let options = mask.iter().filter(|m| **m).count();
            if options == 0 {
                return self.dead_end(depth, None, None, Some(i));
            }
            for s in Split::ALL.into_iter().filter(|s| mask[s.index()]) {
                for &(a, c) in &v.clips {
                    supply[a][s.index()] += c;
                }
            }
            let better = match best {
                None => true,
                Some((j, m)) => {
                    let bo = m.iter().filter(|x| **x).count();
                    (options, std::cmp::Reverse(v.total)) < (bo, std::cmp::Reverse(self.videos[j].total))
                }
            };
            if better {
                best = Some((i, mask));
            }
        }
        let Some((idx, mask)) = best else {
            return Some(true);
        };
        for (a, d) in self.demand.iter().enumerate() {
            for s in Split::ALL {
                if supply[a][s.index()] < d[s.index()] {
                    return self.dead_end(depth, Some(s), Some(a), None);
                }
            }
        }

        let video = &self.videos[idx];
        let mut options: Vec<(usize, Split)> = Split::ALL
            .into_iter()
            .filter(|s| mask[s.index()])
            .map(|s| (video.clips.iter().map(|&(a, _)| self.demand[a][s.index()]).sum(), s))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, s) in options {
            for &(a, c) in &video.clips {
                self.demand[a][s.index()] -= c;
            }
            self.choice[idx] = Some(s);
            let r = self.solve(depth + 1);
            self.choice[idx] = None;
            for &(a, c) in &video.clips {
                self.demand[a][s.index()] += c;
            }
            match r {
                Some(true) => {
                    self.choice[idx] = Some(s);
                    return Some(true);
                }
                Some(false) => {}
                None => return None,
            }
        }
        Some(false)
    }
}
