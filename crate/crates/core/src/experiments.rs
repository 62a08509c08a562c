//! Monte-Carlo phase-transition harness: success frequency over a grid of
//! `(m, k, n)` with seeded, parallel trials, plus CSV, PGM heatmap, and JSON
//! manifest emission.
//!
//! Trial seeds derive from the master seed through a splitmix64 chain over
//! `(m, k, n, trial)`, so a grid is reproducible cell by cell regardless of
//! execution order or worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::admm::{solve, SolverConfig};
use crate::error::{Error, Result};
use crate::measurements::{gen_instance, EnsembleModel, SubspaceKind, RNG_ID};
use crate::recovery;

pub const SEED_MIX_ID: &str = "splitmix64-chain(master, m, k, n, trial)";

fn default_threshold() -> f64 {
    recovery::DEFAULT_SUCCESS_THRESHOLD
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub m_values: Vec<usize>,
    pub kn_pairs: Vec<(usize, usize)>,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "GridSpec::default_ensemble")]
    pub ensemble: EnsembleModel,
    #[serde(default = "GridSpec::default_subspace")]
    pub subspace_b: SubspaceKind,
    #[serde(default = "GridSpec::default_subspace")]
    pub subspace_c: SubspaceKind,
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
}

impl GridSpec {
    fn default_ensemble() -> EnsembleModel {
        EnsembleModel::DirectGaussian
    }
    fn default_subspace() -> SubspaceKind {
        SubspaceKind::Gaussian
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() || self.kn_pairs.is_empty() {
            return Err(Error::InvalidInput(
                "grid requires at least one m value and one (k, n) pair".into(),
            ));
        }
        if self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "m_values must be strictly ascending".into(),
            ));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::InvalidInput("trials_per_cell must be >= 1".into()));
        }
        let m_min = self.m_values[0];
        for &(k, n) in &self.kn_pairs {
            if k == 0 || n == 0 || k > m_min || n > m_min {
                return Err(Error::InvalidInput(format!(
                    "pair (k={k}, n={n}) invalid for smallest m={m_min}"
                )));
            }
        }
        self.solver.validate()?;
        if !(self.success_threshold > 0.0) {
            return Err(Error::InvalidInput("success_threshold must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct CellStats {
    pub successes: usize,
    pub trials: usize,
    /// Trials that ended in a numerical error rather than a scored solve.
    pub failures: usize,
    /// Mean lifted relative error over scored trials (NaN if none scored).
    pub mean_error: f64,
    /// Mean iteration count over scored trials.
    pub mean_iters: f64,
}

impl CellStats {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseGrid {
    /// Keyed by `(m, k, n)`; ordered for deterministic iteration.
    pub cells: BTreeMap<(usize, usize, usize), CellStats>,
    pub spec: GridSpec,
}

/// splitmix64 step (Steele, Lea, Flood: "Fast splittable pseudorandom number
/// generators", constants from the published reference implementation).
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stream seed by chaining splitmix64 over the parts.
pub fn mix_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

pub fn trial_seed(master: u64, m: usize, k: usize, n: usize, trial: usize) -> u64 {
    mix_seed(master, &[m as u64, k as u64, n as u64, trial as u64])
}

#[derive(Clone, Copy, Debug)]
struct TrialOutcome {
    success: bool,
    failed: bool,
    error: f64,
    iters: usize,
}

fn run_trial(spec: &GridSpec, m: usize, k: usize, n: usize, trial: usize) -> TrialOutcome {
    let seed = trial_seed(spec.master_seed, m, k, n, trial);
    let outcome = gen_instance(
        m,
        k,
        n,
        spec.subspace_b,
        spec.subspace_c,
        spec.ensemble,
        seed,
    )
    .and_then(|inst| {
        let result = solve(&inst, &spec.solver)?;
        let truth = inst.truth.as_ref().expect("generated instances carry truth");
        let report = recovery::report(
            &result.h_hat,
            &result.m_hat,
            &truth.h,
            &truth.m,
            spec.success_threshold,
        )?;
        Ok((result, report))
    });
    match outcome {
        Ok((result, report)) => TrialOutcome {
            success: result.converged && report.success,
            failed: false,
            error: report.relative_error_lifted,
            iters: result.iters,
        },
        Err(_) => TrialOutcome {
            success: false,
            failed: true,
            error: f64::NAN,
            iters: 0,
        },
    }
}

/// Runs every cell and trial of the grid. `jobs = 0` uses the machine
/// parallelism; the result is identical for any worker count because trial
/// outcomes are aggregated in task order.
pub fn run_phase_grid(spec: &GridSpec, jobs: usize) -> Result<PhaseGrid> {
    spec.validate()?;
    let jobs = if jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        jobs
    };
    let mut tasks = Vec::new();
    for &m in &spec.m_values {
        for &(k, n) in &spec.kn_pairs {
            for t in 0..spec.trials_per_cell {
                tasks.push((m, k, n, t));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, k, n, t)| run_trial(spec, m, k, n, t))
            .collect()
    });

    let mut cells: BTreeMap<(usize, usize, usize), CellStats> = BTreeMap::new();
    let mut sums: BTreeMap<(usize, usize, usize), (f64, f64, usize)> = BTreeMap::new();
    for (&(m, k, n, _), out) in tasks.iter().zip(&outcomes) {
        let cell = cells.entry((m, k, n)).or_default();
        cell.trials += 1;
        if out.failed {
            cell.failures += 1;
        } else {
            if out.success {
                cell.successes += 1;
            }
            let s = sums.entry((m, k, n)).or_insert((0.0, 0.0, 0));
            s.0 += out.error;
            s.1 += out.iters as f64;
            s.2 += 1;
        }
    }
    for (key, cell) in cells.iter_mut() {
        match sums.get(key) {
            Some(&(err, iters, count)) if count > 0 => {
                cell.mean_error = err / count as f64;
                cell.mean_iters = iters / count as f64;
            }
            _ => {
                cell.mean_error = f64::NAN;
                cell.mean_iters = f64::NAN;
            }
        }
    }
    Ok(PhaseGrid {
        cells,
        spec: spec.clone(),
    })
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str = "m,k,n,kn_sum,trials,successes,rate,mean_error,mean_iters";

/// Rows sorted by `(m, k+n, k)`; `rate` with six decimals, means with
/// shortest round-trip formatting.
pub fn csv_string(grid: &PhaseGrid) -> String {
    let mut rows: Vec<(&(usize, usize, usize), &CellStats)> = grid.cells.iter().collect();
    rows.sort_by_key(|((m, k, n), _)| (*m, k + n, *k));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for ((m, k, n), cell) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{},{}",
            m,
            k,
            n,
            k + n,
            cell.trials,
            cell.successes,
            cell.rate(),
            cell.mean_error,
            cell.mean_iters
        )
        .expect("string writes cannot fail");
    }
    out
}

pub fn emit_csv(grid: &PhaseGrid, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(grid)).map_err(|e| Error::io(path, e))
}

/// Parses a CSV document back into the cell map (used for round trips).
pub fn parse_csv(text: &str) -> Result<BTreeMap<(usize, usize, usize), CellStats>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "bad CSV header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut cells = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "line {}: expected 9 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))
        };
        let m = parse_usize(fields[0])?;
        let k = parse_usize(fields[1])?;
        let n = parse_usize(fields[2])?;
        let kn_sum = parse_usize(fields[3])?;
        if kn_sum != k + n {
            return Err(Error::Format(format!(
                "line {}: kn_sum {} != {}",
                lineno + 2,
                kn_sum,
                k + n
            )));
        }
        let trials = parse_usize(fields[4])?;
        let successes = parse_usize(fields[5])?;
        let rate = parse_f64(fields[6])?;
        let expect_rate = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        if (rate - expect_rate).abs() > 5e-7 {
            return Err(Error::Format(format!(
                "line {}: rate {} inconsistent with {}/{}",
                lineno + 2,
                rate,
                successes,
                trials
            )));
        }
        let mean_error = parse_f64(fields[7])?;
        let mean_iters = parse_f64(fields[8])?;
        cells.insert(
            (m, k, n),
            CellStats {
                successes,
                trials,
                failures: 0,
                mean_error,
                mean_iters,
            },
        );
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// PGM heatmap
// ---------------------------------------------------------------------------

/// Binary PGM (P5, maxval 255). Rows are m values ascending downward,
/// columns are k+n sums ascending rightward; pixel = round(255 (1 - rate)),
/// so black marks full success. Cells sharing a k+n column are averaged.
pub fn heatmap_bytes(grid: &PhaseGrid) -> Vec<u8> {
    let m_values = &grid.spec.m_values;
    let mut sums: Vec<usize> = grid.spec.kn_pairs.iter().map(|&(k, n)| k + n).collect();
    sums.sort_unstable();
    sums.dedup();
    let width = sums.len();
    let height = m_values.len();
    let mut header = format!("P5\n{width} {height}\n255\n").into_bytes();
    let mut pixels = Vec::with_capacity(width * height);
    for &m in m_values {
        for &s in &sums {
            let mut total = 0.0;
            let mut count = 0usize;
            for (&(cm, ck, cn), cell) in &grid.cells {
                if cm == m && ck + cn == s {
                    total += cell.rate();
                    count += 1;
                }
            }
            let rate = if count > 0 { total / count as f64 } else { 0.0 };
            let px = (255.0 * (1.0 - rate)).round();
            pixels.push(px.clamp(0.0, 255.0) as u8);
        }
    }
    header.extend_from_slice(&pixels);
    header
}

pub fn emit_heatmap(grid: &PhaseGrid, path: &Path) -> Result<()> {
    if grid.cells.is_empty() {
        return Err(Error::InvalidInput("cannot render an empty grid".into()));
    }
    std::fs::write(path, heatmap_bytes(grid)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ManifestCell {
    m: usize,
    k: usize,
    n: usize,
    seeds: Vec<u64>,
    successes: usize,
    trials: usize,
    failures: usize,
    mean_error: f64,
    mean_iters: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    library_version: &'static str,
    rng: &'static str,
    seed_mixing: &'static str,
    spec: &'a GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_fit: Option<BoundaryFit>,
    cells: Vec<ManifestCell>,
}

/// Full run record: spec echo, RNG identification, per-cell seeds and
/// tallies, and the fitted boundary when available.
pub fn manifest_json(grid: &PhaseGrid) -> String {
    let cells = grid
        .cells
        .iter()
        .map(|(&(m, k, n), cell)| ManifestCell {
            m,
            k,
            n,
            seeds: (0..grid.spec.trials_per_cell)
                .map(|t| trial_seed(grid.spec.master_seed, m, k, n, t))
                .collect(),
            successes: cell.successes,
            trials: cell.trials,
            failures: cell.failures,
            mean_error: cell.mean_error,
            mean_iters: cell.mean_iters,
        })
        .collect();
    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION"),
        rng: RNG_ID,
        seed_mixing: SEED_MIX_ID,
        spec: &grid.spec,
        boundary_fit: fit_boundary(grid),
        cells,
    };
    serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail")
}

pub fn emit_manifest(grid: &PhaseGrid, path: &Path) -> Result<()> {
    std::fs::write(path, manifest_json(grid)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Analysis: rank correlation and the transition boundary
// ---------------------------------------------------------------------------

/// Spearman rank correlation; `None` when either sequence is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && vals[idx[j + 1]] == vals[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &p in &idx[i..=j] {
                ranks[p] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx).powi(2);
        vy += (ry[i] - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundaryFit {
    /// Boundary constant in `k + n = c * m / ln^2(m)` (natural log).
    pub c: f64,
    /// Fraction of cells whose success label (rate >= 0.5) matches the
    /// threshold classifier `k + n <= c * m / ln^2(m)`.
    pub accuracy: f64,
    pub cells: usize,
}

/// Fits the boundary constant by 1-D logistic regression on the reduced
/// coordinate `r = (k+n) ln^2(m) / m` with labels `rate >= 0.5`, lightly
/// ridge-regularized so separable data stays finite. `None` when every cell
/// carries the same label.
pub fn fit_boundary(grid: &PhaseGrid) -> Option<BoundaryFit> {
    let mut rs = Vec::new();
    let mut labels = Vec::new();
    for (&(m, k, n), cell) in &grid.cells {
        let lnm = (m as f64).ln();
        rs.push((k + n) as f64 * lnm * lnm / m as f64);
        labels.push(cell.rate() >= 0.5);
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return None;
    }
    // logistic model P(success) = sigmoid(w r + b), Newton iterations
    let (mut w, mut b) = (0.0f64, 0.0f64);
    let lambda = 1e-6;
    for _ in 0..100 {
        let (mut g0, mut g1) = (lambda * w, lambda * b);
        let (mut h00, mut h01, mut h11) = (lambda, 0.0, lambda);
        for (r, &y) in rs.iter().zip(&labels) {
            let z = w * r + b;
            let p = 1.0 / (1.0 + (-z).exp());
            let e = p - if y { 1.0 } else { 0.0 };
            g0 += e * r;
            g1 += e;
            let s = p * (1.0 - p);
            h00 += s * r * r;
            h01 += s * r;
            h11 += s;
        }
        let det = h00 * h11 - h01 * h01;
        if det.abs() < 1e-30 {
            break;
        }
        let dw = (h11 * g0 - h01 * g1) / det;
        let db = (h00 * g1 - h01 * g0) / det;
        w -= dw;
        b -= db;
        if dw.abs() + db.abs() < 1e-12 {
            break;
        }
    }
    if !(w < 0.0) || !w.is_finite() || !b.is_finite() {
        return None;
    }
    let c = -b / w;
    let mut correct = 0usize;
    for (r, &y) in rs.iter().zip(&labels) {
        if (*r <= c) == y {
            correct += 1;
        }
    }
    Some(BoundaryFit {
        c,
        accuracy: correct as f64 / rs.len() as f64,
        cells: rs.len(),
    })
}
