//! Exact record-to-sample distance computation.
//!
//! Every routine streams the samples in chunks and never materialises the
//! full `records × samples` distance matrix. Work is split across records;
//! each record accumulates over samples strictly in sample-index order, so
//! results are bit-identical for any chunk size or thread count.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::features::{chist_features, hog_features_flat, ChistParams, HogParams, PcaModel};
use crate::io::MatrixFile;
use crate::{Error, Matrix, Result, SampleMatrix};

/// Feature space in which Euclidean distances are taken.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceKind {
    RawEuclid,
    Pca(PcaModel),
    Hog(HogParams),
    Chist(ChistParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    pub note: String,
}

impl DistanceSpec {
    pub fn raw() -> Self {
        Self::from(DistanceKind::RawEuclid)
    }

    pub fn pca(model: PcaModel) -> Self {
        Self::from(DistanceKind::Pca(model))
    }

    /// Short description, e.g. `pca(40)`.
    pub fn label(&self) -> String {
        match &self.kind {
            DistanceKind::RawEuclid => "raw".into(),
            DistanceKind::Pca(m) => format!(
                "pca({}{})",
                m.k(),
                if m.options().whiten { ",whiten" } else { "" }
            ),
            DistanceKind::Hog(p) => format!(
                "hog({}x{}x{},cell={},bins={},block={})",
                p.image_shape.0, p.image_shape.1, p.channels, p.cell_size, p.orientation_bins, p.block_size
            ),
            DistanceKind::Chist(p) => format!(
                "chist(bins={},channels={},range=[{},{}))",
                p.bins_per_channel, p.channels, p.intensity_range.0, p.intensity_range.1
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            DistanceKind::Hog(p) => p.validate(),
            DistanceKind::Chist(p) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Raw input width this space expects, if fixed.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.kind {
            DistanceKind::RawEuclid => None,
            DistanceKind::Pca(m) => Some(m.dim()),
            DistanceKind::Hog(p) => Some(p.image_shape.0 * p.image_shape.1 * p.channels),
            DistanceKind::Chist(_) => None,
        }
    }

    /// Width of transformed rows for raw rows of width `input_dim`.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match &self.kind {
            DistanceKind::RawEuclid => input_dim,
            DistanceKind::Pca(m) => m.k(),
            DistanceKind::Hog(p) => p.feature_len(),
            DistanceKind::Chist(p) => p.feature_len(),
        }
    }

    /// Maps raw rows into the distance space.
    pub fn transform(&self, raw: ArrayView2<'_, f64>) -> Result<Matrix> {
        self.validate()?;
        if let Some(d) = self.input_dim() {
            if raw.ncols() != d {
                return Err(Error::Dim {
                    expected: d,
                    got: raw.ncols(),
                });
            }
        }
        match &self.kind {
            DistanceKind::RawEuclid => Ok(raw.as_standard_layout().into_owned()),
            DistanceKind::Pca(m) => m.transform_matrix(raw),
            DistanceKind::Hog(p) => per_row(raw, p.feature_len(), |row| hog_features_flat(row, p)),
            DistanceKind::Chist(p) => per_row(raw, p.feature_len(), |row| chist_features(row, p)),
        }
    }
}

impl From<DistanceKind> for DistanceSpec {
    fn from(kind: DistanceKind) -> Self {
        Self {
            kind,
            note: String::new(),
        }
    }
}

fn per_row(
    raw: ArrayView2<'_, f64>,
    width: usize,
    f: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
) -> Result<Matrix> {
    let raw = raw.as_standard_layout();
    let rows: Vec<Vec<f64>> = (0..raw.nrows())
        .into_par_iter()
        .map(|i| f(raw.row(i).as_slice().expect("standard layout")))
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((raw.nrows(), width), flat).map_err(|e| Error::Data(e.to_string()))
}

/// Resource knobs for the distance kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeOptions {
    /// Upper bound on bytes of sample rows held per streamed chunk.
    pub mem_budget: usize,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

pub const DEFAULT_MEM_BUDGET: usize = 256 * 1024 * 1024;

impl Default for ComputeOptions {
    fn default() -> Self {
        Self {
            mem_budget: DEFAULT_MEM_BUDGET,
            threads: None,
        }
    }
}

impl ComputeOptions {
    pub fn chunk_rows(&self, dim: usize) -> usize {
        (self.mem_budget / (8 * dim.max(1))).max(1)
    }

    /// Runs `f` on a pool of `threads` workers, or the ambient pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        match self.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Anything that can hand out generator samples in row chunks.
pub trait SampleSource: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Calls `f` on consecutive, contiguous row blocks of at most `max_rows`.
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()>;
}

fn view_chunks(
    view: ArrayView2<'_, f64>,
    max_rows: usize,
    f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
) -> Result<()> {
    let view = view.as_standard_layout();
    for chunk in view.axis_chunks_iter(Axis(0), max_rows.max(1)) {
        f(chunk)?;
    }
    Ok(())
}

impl SampleSource for ArrayView2<'_, f64> {
    fn dim(&self) -> usize {
        self.ncols()
    }
    fn len(&self) -> usize {
        self.nrows()
    }
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        view_chunks(self.view(), max_rows, f)
    }
}

impl SampleSource for Matrix {
    fn dim(&self) -> usize {
        self.ncols()
    }
    fn len(&self) -> usize {
        self.nrows()
    }
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        view_chunks(self.view(), max_rows, f)
    }
}

impl SampleSource for SampleMatrix {
    fn dim(&self) -> usize {
        SampleMatrix::dim(self)
    }
    fn len(&self) -> usize {
        SampleMatrix::len(self)
    }
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        view_chunks(self.data().view(), max_rows, f)
    }
}

impl SampleSource for MatrixFile {
    fn dim(&self) -> usize {
        self.cols
    }
    fn len(&self) -> usize {
        self.rows
    }
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        MatrixFile::for_each_chunk(self, max_rows, |c| f(c))
    }
}

/// The first `n` rows of another source.
pub struct Truncated<'a, S: ?Sized> {
    pub inner: &'a S,
    pub n: usize,
}

impl<S: SampleSource + ?Sized> SampleSource for Truncated<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn len(&self) -> usize {
        self.n.min(self.inner.len())
    }
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        let mut left = self.len();
        // The inner source cannot be stopped early, so unwind with a marker.
        let res = self.inner.for_each_chunk(max_rows, &mut |chunk| {
            if left == 0 {
                return Err(Error::EmptyInput(TRUNCATED));
            }
            let take = left.min(chunk.nrows());
            left -= take;
            f(chunk.slice(ndarray::s![..take, ..]))
        });
        match res {
            Err(Error::EmptyInput(m)) if m == TRUNCATED => Ok(()),
            other => other,
        }
    }
}

const TRUNCATED: &str = "truncated source exhausted";

/// Samples mapped through a [`DistanceSpec`] chunk by chunk.
pub struct Transformed<'a, S: ?Sized> {
    pub inner: &'a S,
    pub spec: &'a DistanceSpec,
}

impl<S: SampleSource + ?Sized> SampleSource for Transformed<'_, S> {
    fn dim(&self) -> usize {
        self.spec.output_dim(self.inner.dim())
    }
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn for_each_chunk(
        &self,
        max_rows: usize,
        f: &mut dyn FnMut(ArrayView2<'_, f64>) -> Result<()>,
    ) -> Result<()> {
        self.inner.for_each_chunk(max_rows, &mut |chunk| {
            let t = self.spec.transform(chunk)?;
            f(t.view())
        })
    }
}

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Four independent squared distances from `a`; each sum keeps coordinate
/// order, so every lane equals [`squared_distance`] bit for bit.
#[inline]
fn squared_distance4(a: &[f64], b0: &[f64], b1: &[f64], b2: &[f64], b3: &[f64]) -> [f64; 4] {
    let n = a.len();
    let (b0, b1, b2, b3) = (&b0[..n], &b1[..n], &b2[..n], &b3[..n]);
    let mut s = [0.0f64; 4];
    for i in 0..n {
        let x = a[i];
        let d0 = x - b0[i];
        let d1 = x - b1[i];
        let d2 = x - b2[i];
        let d3 = x - b3[i];
        s[0] += d0 * d0;
        s[1] += d1 * d1;
        s[2] += d2 * d2;
        s[3] += d3 * d3;
    }
    s
}

/// Feeds every squared distance between `record` and the rows of `tile`
/// to `visit`, in row order.
#[inline]
fn scan_tile(record: &[f64], tile: &[f64], dim: usize, mut visit: impl FnMut(f64)) {
    let mut quads = tile.chunks_exact(4 * dim);
    for q in &mut quads {
        let (b0, rest) = q.split_at(dim);
        let (b1, rest) = rest.split_at(dim);
        let (b2, b3) = rest.split_at(dim);
        let s = squared_distance4(record, b0, b1, b2, b3);
        visit(s[0]);
        visit(s[1]);
        visit(s[2]);
        visit(s[3]);
    }
    for b in quads.remainder().chunks_exact(dim) {
        visit(squared_distance(record, b));
    }
}

const RECORD_BLOCK: usize = 8;

fn tile_rows(dim: usize) -> usize {
    (16 * 1024 / dim.max(1)).max(16)
}

/// Streams `samples` past every record, calling `visit(state, sq_dist)` per
/// pair in sample order. `states[i]` belongs to record `i`.
pub(crate) fn stream_pairs<T: Send>(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    opts: &ComputeOptions,
    states: &mut [T],
    visit: impl Fn(&mut T, f64) + Sync,
) -> Result<()> {
    let dim = records.ncols();
    if dim == 0 {
        return Err(Error::EmptyInput("zero-width feature space"));
    }
    if samples.dim() != dim {
        return Err(Error::Dim {
            expected: dim,
            got: samples.dim(),
        });
    }
    debug_assert_eq!(states.len(), records.nrows());
    let records = records.as_standard_layout();
    let rec_flat = records.as_slice().expect("standard layout");
    let tile = tile_rows(dim);
    let visit = &visit;
    let run = |states: &mut [T]| {
        samples.for_each_chunk(opts.chunk_rows(dim), &mut |chunk: ArrayView2<'_, f64>| {
            let chunk = chunk.as_standard_layout();
            let flat = chunk.as_slice().expect("standard layout");
            let rec_chunk = RECORD_BLOCK * dim;
            states
                .par_chunks_mut(RECORD_BLOCK)
                .zip(rec_flat.par_chunks(rec_chunk))
                .for_each(|(block_states, block_recs)| {
                    for t in flat.chunks(tile * dim) {
                        for (state, rec) in block_states.iter_mut().zip(block_recs.chunks(dim)) {
                            scan_tile(rec, t, dim, |sq| visit(state, sq));
                        }
                    }
                });
            Ok(())
        })
    };
    opts.install(|| run(states))?
}

/// `min_j ‖records_i − samples_j‖₂` for every record.
pub fn pairwise_min_distances(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    opts: &ComputeOptions,
) -> Result<Vec<f64>> {
    if records.nrows() == 0 {
        return Err(Error::EmptyInput("no records"));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples"));
    }
    let mut mins = vec![f64::INFINITY; records.nrows()];
    stream_pairs(records, samples, opts, &mut mins, |m, sq| {
        if sq < *m {
            *m = sq;
        }
    })?;
    Ok(mins.into_iter().map(f64::sqrt).collect())
}

/// Per-record accumulators over the samples inside the ε-ball.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeighborhoodStats {
    /// `#{j : d_j ≤ ε}`
    pub count_within: u64,
    /// `Σ_{d_j ≤ ε} ln(max(d_j, δ))`
    pub sum_log_dist: f64,
}

/// Decides `sqrt(sq) ≤ ε` while only rooting values near the boundary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BallTest {
    eps: f64,
    inner: f64,
    outer: f64,
}

impl BallTest {
    pub(crate) fn new(eps: f64) -> Self {
        let e2 = eps * eps;
        Self {
            eps,
            inner: e2 * (1.0 - 8.0 * f64::EPSILON),
            outer: e2 * (1.0 + 8.0 * f64::EPSILON),
        }
    }

    #[inline]
    pub(crate) fn contains(&self, sq: f64) -> bool {
        if sq <= self.inner {
            true
        } else if sq > self.outer {
            false
        } else {
            sq.sqrt() <= self.eps
        }
    }
}

/// Counts samples with `d ≤ ε` and sums `ln(max(d, δ))` over them, in one
/// pass.
pub fn neighborhood_stats(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    epsilon: f64,
    delta: f64,
    opts: &ComputeOptions,
) -> Result<Vec<NeighborhoodStats>> {
    if !(epsilon >= 0.0) {
        return Err(Error::Config(format!("epsilon must be ≥ 0, got {epsilon}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta must be > 0, got {delta}")));
    }
    let ball = BallTest::new(epsilon);
    let mut stats = vec![NeighborhoodStats::default(); records.nrows()];
    stream_pairs(records, samples, opts, &mut stats, |st, sq| {
        if ball.contains(sq) {
            st.count_within += 1;
            st.sum_log_dist += sq.sqrt().max(delta).ln();
        }
    })?;
    Ok(stats)
}

const HIST_BUCKETS: usize = 1 << 16;
/// Largest candidate bucket materialised for the final selection.
const SELECT_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, Copy)]
struct BucketFilter {
    lo: f64,
    scale: f64,
    bucket: usize,
}

impl BucketFilter {
    #[inline]
    fn index(lo: f64, scale: f64, sq: f64) -> usize {
        let pos = (sq - lo) * scale;
        if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(HIST_BUCKETS - 1)
        }
    }

    #[inline]
    fn admits(&self, sq: f64) -> bool {
        Self::index(self.lo, self.scale, sq) == self.bucket
    }
}

/// Value at 1-based `rank` among all `records × samples` distances in
/// ascending order (exact; repeated histogram passes narrow the search,
/// so memory stays bounded).
pub fn distance_order_statistic(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    rank: u64,
    opts: &ComputeOptions,
) -> Result<f64> {
    if records.nrows() == 0 {
        return Err(Error::EmptyInput("no records"));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples"));
    }
    let total = records.nrows() as u64 * samples.len() as u64;
    if rank == 0 || rank > total {
        return Err(Error::Config(format!("rank {rank} outside 1..={total}")));
    }
    let nrec = records.nrows();

    // Pass 1: range of squared distances.
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); nrec];
    stream_pairs(records, samples, opts, &mut ranges, |r, sq| {
        r.0 = r.0.min(sq);
        r.1 = r.1.max(sq);
    })?;
    let (mut lo, mut hi) = ranges.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| {
        (a.0.min(r.0), a.1.max(r.1))
    });

    if lo == hi {
        return Ok(lo.sqrt());
    }

    let mut filters: Vec<BucketFilter> = Vec::new();
    let mut rank_left = rank;
    loop {
        let scale = HIST_BUCKETS as f64 / (hi - lo);
        let fs = filters.clone();
        let mut hists = vec![Vec::<u64>::new(); nrec];
        stream_pairs(records, samples, opts, &mut hists, |h, sq| {
            if fs.iter().all(|f| f.admits(sq)) {
                if h.is_empty() {
                    h.resize(HIST_BUCKETS, 0);
                }
                h[BucketFilter::index(lo, scale, sq)] += 1;
            }
        })?;
        let mut hist = vec![0u64; HIST_BUCKETS];
        for h in hists.iter().filter(|h| !h.is_empty()) {
            for (a, b) in hist.iter_mut().zip(h) {
                *a += b;
            }
        }
        drop(hists);
        let mut cum = 0u64;
        let mut chosen = HIST_BUCKETS - 1;
        for (b, &c) in hist.iter().enumerate() {
            if cum + c >= rank_left {
                chosen = b;
                break;
            }
            cum += c;
        }
        rank_left -= cum;
        filters.push(BucketFilter {
            lo,
            scale,
            bucket: chosen,
        });

        let width = (hi - lo) / HIST_BUCKETS as f64;
        let new_lo = lo + chosen as f64 * width;
        let new_hi = (new_lo + width).min(hi);
        let can_narrow = new_hi > new_lo && (new_lo, new_hi) != (lo, hi);
        if hist[chosen] <= SELECT_CAP || !can_narrow {
            return select_in_bucket(records, samples, opts, &filters, rank_left);
        }
        lo = new_lo;
        hi = new_hi;
    }
}

/// Final exact selection among the values admitted by every filter, kept
/// as a value → multiplicity map.
fn select_in_bucket(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    opts: &ComputeOptions,
    filters: &[BucketFilter],
    rank: u64,
) -> Result<f64> {
    use std::collections::BTreeMap;
    let mut found: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); records.nrows()];
    stream_pairs(records, samples, opts, &mut found, |m, sq| {
        if filters.iter().all(|f| f.admits(sq)) {
            // Non-negative floats order like their bit patterns.
            *m.entry(sq.to_bits()).or_insert(0) += 1;
        }
    })?;
    let mut merged: BTreeMap<u64, u64> = BTreeMap::new();
    for m in found {
        for (k, c) in m {
            *merged.entry(k).or_insert(0) += c;
        }
    }
    let mut cum = 0u64;
    for (bits, c) in merged {
        cum += c;
        if cum >= rank {
            return Ok(f64::from_bits(bits).sqrt());
        }
    }
    Err(Error::Data("order statistic search lost its target".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn naive_sq(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    #[test]
    fn min_distance_example() {
        let records = array![[0.0], [10.0]];
        let samples = array![[1.0], [2.0], [12.0]];
        let d = pairwise_min_distances(records.view(), &samples, &ComputeOptions::default()).unwrap();
        assert_eq!(d, [1.0, 2.0]);
    }

    #[test]
    fn exact_matches_give_zero() {
        let records = random(5, 3, 1);
        let samples = ndarray::concatenate(Axis(0), &[random(7, 3, 2).view(), records.view()]).unwrap();
        let d = pairwise_min_distances(records.view(), &samples, &ComputeOptions::default()).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chunked_min_matches_naive_double_loop() {
        let records = random(20, 7, 3);
        let samples = random(50, 7, 4);
        let mut naive = vec![f64::INFINITY; 20];
        for (i, r) in records.rows().into_iter().enumerate() {
            for s in samples.rows() {
                naive[i] = naive[i].min(naive_sq(r, s).sqrt());
            }
        }
        for budget in [8, 8 * 7 * 3, 8 * 7 * 13, DEFAULT_MEM_BUDGET] {
            let opts = ComputeOptions {
                mem_budget: budget,
                threads: Some(3),
            };
            let d = pairwise_min_distances(records.view(), &samples, &opts).unwrap();
            assert_eq!(d, naive);
        }
    }

    #[test]
    fn neighborhood_examples() {
        let opts = ComputeOptions::default();
        let r = array![[0.0]];
        let s = array![[0.5], [2.0]];
        let st = neighborhood_stats(r.view(), &s, 1.0, 1e-12, &opts).unwrap();
        assert_eq!(st[0].count_within, 1);
        assert!((st[0].sum_log_dist - 0.5f64.ln()).abs() < 1e-15);

        let st = neighborhood_stats(r.view(), &s, 0.0, 1e-12, &opts).unwrap();
        assert_eq!(st[0], NeighborhoodStats::default());

        let s = array![[0.0]];
        let st = neighborhood_stats(r.view(), &s, 0.0, 1e-12, &opts).unwrap();
        assert_eq!(st[0].count_within, 1);
        assert!((st[0].sum_log_dist - (-27.631021115928547)).abs() < 1e-12);
    }

    #[test]
    fn neighborhood_rejects_bad_parameters() {
        let r = array![[0.0]];
        let opts = ComputeOptions::default();
        assert!(neighborhood_stats(r.view(), &r, -1.0, 1e-12, &opts).is_err());
        assert!(neighborhood_stats(r.view(), &r, 1.0, 0.0, &opts).is_err());
        assert!(matches!(
            neighborhood_stats(r.view(), &array![[0.0, 1.0]], 1.0, 1e-12, &opts),
            Err(Error::Dim { .. })
        ));
    }

    #[test]
    fn ball_boundary_is_exact() {
        // The test must agree with comparing rooted distances.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let sq: f64 = rng.random_range(0.0..4.0);
            let eps = sq.sqrt();
            assert!(BallTest::new(eps).contains(sq));
            let below = f64::from_bits(eps.to_bits() - 1);
            assert_eq!(BallTest::new(below).contains(sq), sq.sqrt() <= below);
        }
        assert!(BallTest::new(f64::INFINITY).contains(1e300));
        assert!(BallTest::new(0.0).contains(0.0));
        assert!(!BallTest::new(0.0).contains(1e-300));
    }

    #[test]
    fn chunking_is_bit_identical() {
        let records = random(13, 5, 10);
        let samples = random(301, 5, 11);
        let reference =
            neighborhood_stats(records.view(), &samples, 1.2, 1e-12, &ComputeOptions::default()).unwrap();
        for budget in [40, 400, 4000] {
            let opts = ComputeOptions {
                mem_budget: budget,
                threads: Some(2),
            };
            assert_eq!(
                neighborhood_stats(records.view(), &samples, 1.2, 1e-12, &opts).unwrap(),
                reference
            );
        }
    }

    #[test]
    fn order_statistic_matches_sort() {
        let records = random(6, 3, 20);
        let samples = random(97, 3, 21);
        let mut all: Vec<f64> = records
            .rows()
            .into_iter()
            .flat_map(|r| samples.rows().into_iter().map(move |s| naive_sq(r, s).sqrt()))
            .collect();
        all.sort_by(f64::total_cmp);
        let opts = ComputeOptions {
            mem_budget: 8 * 3 * 10,
            threads: None,
        };
        for rank in [1u64, 2, 17, 300, 581, 582] {
            let v = distance_order_statistic(records.view(), &samples, rank, &opts).unwrap();
            assert_eq!(v, all[rank as usize - 1], "rank {rank}");
        }
        assert!(distance_order_statistic(records.view(), &samples, 0, &opts).is_err());
        assert!(distance_order_statistic(records.view(), &samples, 583, &opts).is_err());
    }

    #[test]
    fn order_statistic_with_ties() {
        let records = array![[0.0]];
        let samples = Array2::from_shape_fn((50, 1), |(i, _)| if i < 30 { 1.0 } else { 2.0 });
        let opts = ComputeOptions::default();
        assert_eq!(
            distance_order_statistic(records.view(), &samples, 30, &opts).unwrap(),
            1.0
        );
        assert_eq!(
            distance_order_statistic(records.view(), &samples, 31, &opts).unwrap(),
            2.0
        );
        let same = Array2::from_elem((5, 1), 3.0);
        assert_eq!(
            distance_order_statistic(records.view(), &same, 4, &opts).unwrap(),
            3.0
        );
    }

    #[test]
    fn truncated_and_transformed_sources() {
        let samples = random(10, 2, 30);
        let t = Truncated {
            inner: &samples,
            n: 4,
        };
        let mut rows = 0;
        t.for_each_chunk(3, &mut |c| {
            rows += c.nrows();
            Ok(())
        })
        .unwrap();
        assert_eq!(rows, 4);
        assert_eq!(t.len(), 4);

        let spec = DistanceSpec::raw();
        let tr = Transformed {
            inner: &samples,
            spec: &spec,
        };
        let records = random(3, 2, 31);
        let opts = ComputeOptions::default();
        assert_eq!(
            pairwise_min_distances(records.view(), &tr, &opts).unwrap(),
            pairwise_min_distances(records.view(), &samples, &opts).unwrap()
        );
    }
}
