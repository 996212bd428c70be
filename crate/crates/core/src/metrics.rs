//! Evaluation metrics and their file formats.
//!
//! - [`eval_episode_entropy`]: matrix-based Rényi entropy (α = 1.001, σ = 1)
//!   of an episode, subsampled to at most 256 states.
//! - [`CoverageCounter`]: unique visited histogram cells over a run.
//! - [`RunLog`]: per-episode records, persisted as CSV.
//! - [`Grid`]: real-valued heatmaps written as binary PGM.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::entropy::{renyi_matrix_entropy, subsample, EntropyValue, KernelConfig};
use crate::envs::{discretize, Bounds};
use crate::{Episode, Error, Result};

pub const EVAL_ALPHA: f64 = 1.001;
pub const EVAL_SIGMA: f64 = 1.0;
pub const EVAL_MAX_STATES: usize = 256;

/// Entropy of an episode in bits under the evaluation metric.
pub fn eval_episode_entropy(ep: &Episode) -> Result<EntropyValue> {
    if ep.is_empty() {
        return Err(Error::EmptyInput("episode"));
    }
    let states = subsample(&ep.states, EVAL_MAX_STATES);
    renyi_matrix_entropy(&states, EVAL_ALPHA, &KernelConfig::new(EVAL_SIGMA)?)
}

/// Visit counts on a `bins × bins` grid, with the unique-cell count tracked
/// as it grows.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCounter {
    bounds: Bounds,
    bins: usize,
    counts: Vec<u64>,
    unique: usize,
    history: Vec<(u64, usize)>,
}

impl CoverageCounter {
    pub fn new(bounds: Bounds, bins: usize) -> Result<Self> {
        discretize(bounds.min, &bounds, bins)?;
        Ok(CoverageCounter {
            bounds,
            bins,
            counts: vec![0; bins * bins],
            unique: 0,
            history: Vec::new(),
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Records a visit at `step` and returns the unique-cell count.
    pub fn update(&mut self, step: u64, position: [f64; 2]) -> Result<usize> {
        let cell = discretize(position, &self.bounds, self.bins)?;
        self.counts[cell] += 1;
        if self.counts[cell] == 1 {
            self.unique += 1;
            self.history.push((step, self.unique));
        }
        Ok(self.unique)
    }

    pub fn unique(&self) -> usize {
        self.unique
    }

    /// `(step, unique count)` at every step where the count grew.
    pub fn history(&self) -> &[(u64, usize)] {
        &self.history
    }

    pub fn is_visited(&self, cell: usize) -> bool {
        self.count(cell) > 0
    }

    pub fn count(&self, cell: usize) -> u64 {
        self.counts.get(cell).copied().unwrap_or(0)
    }

    /// Visits recorded in the cell containing `position`.
    pub fn count_at(&self, position: [f64; 2]) -> Result<u64> {
        Ok(self.counts[discretize(position, &self.bounds, self.bins)?])
    }

    /// Visit counts as a heatmap, row-major.
    pub fn grid(&self) -> Grid {
        Grid {
            width: self.bins,
            height: self.bins,
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Row-major real matrix used for heatmaps.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "grid {width}×{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Grid { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Grid {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// 8-bit binary PGM with min → 0 and max → 255. Non-finite values are
    /// rejected.
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("heatmap value {i} is not finite")));
        }
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.values.iter().map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        }));
        Ok(out)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let bytes = self.to_pgm()?;
        fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// One row of the run CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Environment steps taken so far, this episode included.
    pub steps: u64,
    /// Evaluation entropy in bits; NaN when the episode was not evaluated.
    pub entropy_eval: f64,
    /// Mean raw episodic reward over training samples drawn during the episode.
    pub mean_r_ep: f64,
    /// Mean raw lifelong reward over those samples.
    pub mean_r_l: f64,
    pub graph_size: usize,
    /// Unique coverage cells visited since the start of training.
    pub unique_cells: usize,
}

/// Intrinsic reward per cell at the end of an episode, with the visit counts
/// accumulated up to that point.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSnapshot {
    pub episode: usize,
    pub lifelong: Grid,
    pub episodic: Grid,
    pub visits: Grid,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpisodeRecord>,
    /// `(step, unique cells)` whenever coverage grew.
    pub coverage_history: Vec<(u64, usize)>,
    /// Unique coverage cells visited within each episode.
    pub episode_unique_cells: Vec<usize>,
    /// Largest distance from the origin reached within each episode.
    pub episode_max_radius: Vec<f64>,
    pub episode_end_positions: Vec<[f64; 2]>,
    pub snapshots: Vec<RewardSnapshot>,
}

pub const CSV_HEADER: [&str; 7] = [
    "episode",
    "steps",
    "entropy_eval",
    "mean_r_ep",
    "mean_r_l",
    "graph_size",
    "unique_cells",
];

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

impl RunLog {
    /// Invariants: strictly increasing episodes and non-decreasing graph size.
    pub fn check(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].episode <= w[0].episode {
                return Err(Error::invalid(format!("episode {} follows {}", w[1].episode, w[0].episode)));
            }
            if w[1].graph_size < w[0].graph_size {
                return Err(Error::invalid(format!("graph shrank at episode {}", w[1].episode)));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Csv {
            path: "<memory>".into(),
            source: e,
        };
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.records {
            w.write_record([
                r.episode.to_string(),
                r.steps.to_string(),
                fmt_real(r.entropy_eval),
                fmt_real(r.mean_r_ep),
                fmt_real(r.mean_r_l),
                r.graph_size.to_string(),
                r.unique_cells.to_string(),
            ])
            .map_err(io)?;
        }
        w.into_inner()
            .map_err(|e| Error::invalid(format!("flushing csv: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Parses records written by [`RunLog::write_csv`]; only `records` is filled.
    pub fn read_csv(path: &Path) -> Result<RunLog> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = rdr.headers().map_err(csv_err)?;
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::invalid(format!(
                "{}: unexpected header {:?}",
                path.display(),
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut log = RunLog::default();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let field = |j: usize| -> Result<&str> {
                row.get(j)
                    .ok_or_else(|| Error::invalid(format!("{}: row {} is short", path.display(), i + 1)))
            };
            let bad = |j: usize| Error::invalid(format!("{}: row {} column {}", path.display(), i + 1, CSV_HEADER[j]));
            let int = |j: usize| field(j)?.parse::<u64>().map_err(|_| bad(j));
            let real = |j: usize| field(j)?.parse::<f64>().map_err(|_| bad(j));
            log.records.push(EpisodeRecord {
                episode: int(0)? as usize,
                steps: int(1)?,
                entropy_eval: real(2)?,
                mean_r_ep: real(3)?,
                mean_r_l: real(4)?,
                graph_size: int(5)? as usize,
                unique_cells: int(6)? as usize,
            });
        }
        Ok(log)
    }
}

/// Unique cells in `cells`.
pub fn count_unique(cells: impl IntoIterator<Item = usize>) -> usize {
    cells.into_iter().collect::<HashSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::StatePoint;
    use proptest::prelude::*;

    fn record(i: usize, x: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode: i,
            steps: 700 * (i as u64 + 1),
            entropy_eval: x,
            mean_r_ep: x / 3.0,
            mean_r_l: -x * 1e-300,
            graph_size: i * 10,
            unique_cells: i,
        }
    }

    #[test]
    fn eval_entropy_cases() {
        let same = Episode::new(vec![StatePoint::new(vec![1.0, 2.0]); 40]);
        assert_eq!(eval_episode_entropy(&same).unwrap().value, 0.0);

        let line: Vec<StatePoint> = (0..1000).map(|i| StatePoint::new(vec![i as f64 * 0.05, 0.0])).collect();
        let ep = Episode::new(line);
        let a = eval_episode_entropy(&ep).unwrap();
        let b = eval_episode_entropy(&ep).unwrap();
        assert_eq!(a, b);
        assert!(a.value > 0.0 && a.value <= 8.0);
        assert!(eval_episode_entropy(&Episode::new(vec![])).is_err());
    }

    #[test]
    fn coverage_counts() {
        let mut c = CoverageCounter::new(Bounds::square(1000.0), 100).unwrap();
        assert_eq!(c.unique(), 0);
        assert_eq!(c.update(0, [0.0, 0.0]).unwrap(), 1);
        assert_eq!(c.update(1, [1.0, 1.0]).unwrap(), 1);
        assert_eq!(c.update(2, [-999.0, 0.0]).unwrap(), 2);
        assert_eq!(c.history(), &[(0, 1), (2, 2)]);
        assert!(c.is_visited(5050));
    }

    #[test]
    fn coverage_saturates() {
        let mut c = CoverageCounter::new(Bounds::square(1000.0), 100).unwrap();
        let mut step = 0;
        for r in 0..100 {
            for col in 0..100 {
                let p = [-1000.0 + 20.0 * col as f64 + 10.0, -1000.0 + 20.0 * r as f64 + 10.0];
                c.update(step, p).unwrap();
                step += 1;
            }
        }
        assert_eq!(c.unique(), 10_000);
        assert!(c.grid().values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pgm_scaling() {
        let g = Grid::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let bytes = g.to_pgm().unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 255, 255, 0]);
        assert_eq!(&Grid::new(3, 1, vec![4.0; 3]).unwrap().to_pgm().unwrap()[11..], &[0, 0, 0]);
        assert!(Grid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Grid::new(1, 1, vec![f64::NAN]).unwrap().to_pgm().is_err());
    }

    #[test]
    fn csv_empty_log_is_header_only() {
        let bytes = RunLog::default().to_csv().unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "episode,steps,entropy_eval,mean_r_ep,mean_r_l,graph_size,unique_cells\n"
        );
    }

    #[test]
    fn csv_round_trip_with_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let mut log = RunLog::default();
        log.records.push(record(0, f64::NAN));
        log.records.push(record(1, 0.1));
        log.write_csv(&path).unwrap();
        let back = RunLog::read_csv(&path).unwrap();
        assert!(back.records[0].entropy_eval.is_nan());
        assert_eq!(back.records[1], log.records[1]);
    }

    #[test]
    fn csv_rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(RunLog::read_csv(&path), Err(Error::InvalidArgument(_))));
        assert!(matches!(RunLog::read_csv(&dir.path().join("missing.csv")), Err(Error::Csv { .. })));
    }

    #[test]
    fn log_invariants() {
        let mut log = RunLog::default();
        log.records = vec![record(0, 1.0), record(1, 1.0)];
        assert!(log.check().is_ok());
        log.records[0].graph_size = 50;
        assert!(log.check().is_err());
    }

    proptest! {
        #[test]
        fn csv_fidelity(xs in prop::collection::vec(-1e12f64..1e12, 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("run.csv");
            let log = RunLog {
                records: xs.iter().enumerate().map(|(i, &x)| record(i, x)).collect(),
                ..RunLog::default()
            };
            log.write_csv(&path).unwrap();
            let back = RunLog::read_csv(&path).unwrap();
            prop_assert_eq!(back.records.len(), log.records.len());
            for (a, b) in back.records.iter().zip(&log.records) {
                prop_assert!((a.entropy_eval - b.entropy_eval).abs() <= 1e-12 * b.entropy_eval.abs().max(1.0));
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn pgm_deterministic(vals in prop::collection::vec(-5.0f64..5.0, 12)) {
            let g = Grid::new(4, 3, vals).unwrap();
            let a = g.to_pgm().unwrap();
            prop_assert_eq!(&a, &g.to_pgm().unwrap());
            prop_assert_eq!(a.len(), 11 + 12);
        }

        #[test]
        fn coverage_monotone(points in prop::collection::vec((-1500.0f64..1500.0, -1500.0f64..1500.0), 1..200)) {
            let mut c = CoverageCounter::new(Bounds::square(1000.0), 100).unwrap();
            let mut last = 0;
            for (i, (x, y)) in points.into_iter().enumerate() {
                let n = c.update(i as u64, [x, y]).unwrap();
                prop_assert!(n >= last);
                last = n;
            }
        }
    }
}
