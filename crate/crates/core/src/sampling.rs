//! Simple random, ranked set, multi-observer and median ranked set sampling.
//!
//! Ranking uses the discrete perceived size tie model: two units tie for an
//! observer when their scores fall in the same `floor(score / c)` bucket. Each
//! observer's ranking is recorded as a row-stochastic `H x H` weight matrix
//! (rows are units, columns are rank positions) and the observers are blended
//! with weights proportional to `|rho_k|`. The unit measured for target rank
//! `r` is the one carrying the most combined mass in column `r`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ResponseKind};
use crate::error::{Error, Result};

/// Combined weights within this distance of the column maximum count as tied.
const SELECT_TIE_TOL: f64 = 1e-12;

/// Units with a response, `p` predictors and `K` observer scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    response: DVector<f64>,
    predictors: DMatrix<f64>,
    scores: DMatrix<f64>,
    kind: ResponseKind,
}

impl Population {
    pub fn new(
        response: DVector<f64>,
        predictors: DMatrix<f64>,
        scores: DMatrix<f64>,
        kind: ResponseKind,
    ) -> Result<Self> {
        let n = response.len();
        if predictors.nrows() != n || scores.nrows() != n {
            return Err(Error::dims(format!(
                "population columns disagree on unit count ({} responses, {} predictor rows, {} score rows)",
                n,
                predictors.nrows(),
                scores.nrows()
            )));
        }
        if response
            .iter()
            .chain(predictors.iter())
            .chain(scores.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("population contains non-finite values"));
        }
        if kind == ResponseKind::Binary && response.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("binary population response must be 0 or 1"));
        }
        Ok(Self {
            response,
            predictors,
            scores,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn p(&self) -> usize {
        self.predictors.ncols()
    }

    /// Number of observers.
    pub fn k(&self) -> usize {
        self.scores.ncols()
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.predictors
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    /// Whole population as a dataset.
    pub fn as_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.predictors.clone(), self.response.clone(), self.kind)
    }

    /// Dataset made of the given units, in the given order.
    pub fn subset(&self, units: &[usize]) -> Result<Dataset> {
        let p = self.p();
        let x = DMatrix::from_fn(units.len(), p, |i, j| self.predictors[(units[i], j)]);
        let y = DVector::from_fn(units.len(), |i, _| self.response[units[i]]);
        Dataset::new(x, y, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Simple random sampling.
    Srs,
    /// Ranked set sampling with the first observer only.
    Rss,
    /// Multi-observer ranked set sampling.
    Mrs,
    /// Median multi-observer ranked set sampling.
    Mmr,
}

impl Scheme {
    pub fn is_ranked(self) -> bool {
        !matches!(self, Scheme::Srs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    /// Set size `H`.
    pub set_size: usize,
    /// Number of cycles `n`.
    pub cycles: usize,
    /// DPS tie parameter `c`.
    pub tie_c: f64,
    /// One correlation per observer used for ranking.
    pub observer_correlations: Vec<f64>,
}

impl SchemeSpec {
    /// Delivered sample size `N = n H`.
    pub fn sample_size(&self) -> usize {
        self.set_size * self.cycles
    }

    /// Observers taking part in the ranking: the first one for RSS, all listed otherwise.
    pub fn active_observers(&self) -> usize {
        match self.scheme {
            Scheme::Srs => 0,
            Scheme::Rss => 1,
            Scheme::Mrs | Scheme::Mmr => self.observer_correlations.len(),
        }
    }

    pub fn validate(&self, observers_available: usize) -> Result<()> {
        if self.set_size == 0 || self.cycles == 0 {
            return Err(Error::invalid("set size and cycle count must be positive"));
        }
        if !self.scheme.is_ranked() {
            return Ok(());
        }
        if !(self.tie_c > 0.0 && self.tie_c.is_finite()) {
            return Err(Error::invalid("tie parameter c must be positive and finite"));
        }
        let k = self.active_observers();
        if k == 0 {
            return Err(Error::invalid("ranked schemes need at least one observer"));
        }
        if k > observers_available {
            return Err(Error::invalid(format!(
                "scheme uses {k} observers but the population carries {observers_available}"
            )));
        }
        let rhos = &self.observer_correlations[..k];
        if rhos.iter().any(|r| !r.is_finite() || r.abs() > 1.0) {
            return Err(Error::invalid("observer correlations must lie in [-1, 1]"));
        }
        if rhos.iter().all(|&r| r == 0.0) {
            return Err(Error::invalid("observer correlations are all zero"));
        }
        Ok(())
    }

    /// 1-based rank measured by draw `draw` (cycle-major order) within set `set`.
    pub fn target_rank(&self, set: usize, draw: usize) -> usize {
        let h = self.set_size;
        match self.scheme {
            Scheme::Mmr => {
                if h % 2 == 1 {
                    (h + 1) / 2
                } else if draw < self.sample_size() / 2 {
                    h / 2
                } else {
                    h / 2 + 1
                }
            }
            _ => set + 1,
        }
    }
}

/// Row-stochastic `H x H` matrix; row = unit, column = rank position.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.is_empty() {
            return Err(Error::dims("weight matrix must be square and non-empty"));
        }
        if entries.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
            return Err(Error::invalid("weight matrix entries must lie in [0, 1]"));
        }
        for row in entries.row_iter() {
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("weight matrix rows must sum to one"));
            }
        }
        Ok(Self(entries))
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

fn check_scores(scores: &[f64], c: f64) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot rank an empty set"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("tie parameter c must be positive and finite"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("observer scores must be finite"));
    }
    Ok(())
}

/// Partitions the (0-based) units into tie groups ordered by `floor(score / c)`.
pub fn dps_tied_ranks(scores: &[f64], c: f64) -> Result<Vec<Vec<usize>>> {
    check_scores(scores, c)?;
    let mut keyed: Vec<(f64, usize)> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| ((s / c).floor(), i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last: Option<f64> = None;
    for (key, unit) in keyed {
        match (last, groups.last_mut()) {
            (Some(prev), Some(group)) if prev == key => group.push(unit),
            _ => groups.push(vec![unit]),
        }
        last = Some(key);
    }
    Ok(groups)
}

/// One observer's weight matrix. A tie group of size `m` occupying rank
/// positions `l..l+m` gives each member `1/m` on each of those positions.
pub fn observer_weight_matrix(scores: &[f64], c: f64) -> Result<WeightMatrix> {
    let groups = dps_tied_ranks(scores, c)?;
    let h = scores.len();
    let mut w = DMatrix::zeros(h, h);
    let mut pos = 0;
    for group in &groups {
        let m = group.len();
        let share = 1.0 / m as f64;
        for &unit in group {
            for col in pos..pos + m {
                w[(unit, col)] = share;
            }
        }
        pos += m;
    }
    Ok(WeightMatrix(w))
}

/// `eta_k = |rho_k| / sum |rho|`.
pub fn observer_shares(correlations: &[f64]) -> Result<Vec<f64>> {
    if correlations.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("observer correlations must be finite"));
    }
    let total: f64 = correlations.iter().map(|r| r.abs()).sum();
    if total <= 0.0 {
        return Err(Error::invalid("observer correlations are all zero"));
    }
    Ok(correlations.iter().map(|r| r.abs() / total).collect())
}

/// Convex blend `sum_k eta_k W_k`.
pub fn combine_weights(matrices: &[WeightMatrix], correlations: &[f64]) -> Result<WeightMatrix> {
    if matrices.is_empty() {
        return Err(Error::invalid("need at least one weight matrix"));
    }
    if matrices.len() != correlations.len() {
        return Err(Error::dims(format!(
            "{} weight matrices but {} correlations",
            matrices.len(),
            correlations.len()
        )));
    }
    let h = matrices[0].size();
    if matrices.iter().any(|m| m.size() != h) {
        return Err(Error::dims("weight matrices differ in size"));
    }
    let shares = observer_shares(correlations)?;
    let mut out = DMatrix::zeros(h, h);
    for (m, eta) in matrices.iter().zip(&shares) {
        out += m.entries() * *eta;
    }
    Ok(WeightMatrix(out))
}

/// Row index (0-based) with the largest weight in column `target_rank` (1-based);
/// ties go to the lowest index.
pub fn select_unit(combined: &WeightMatrix, target_rank: usize) -> Result<usize> {
    select_from_matrix(combined.entries(), target_rank)
}

fn select_from_matrix(m: &DMatrix<f64>, target_rank: usize) -> Result<usize> {
    if target_rank == 0 || target_rank > m.ncols() {
        return Err(Error::invalid(format!(
            "target rank {target_rank} outside 1..={}",
            m.ncols()
        )));
    }
    let col = m.column(target_rank - 1);
    let max = col.max();
    let tol = SELECT_TIE_TOL * max.abs().max(f64::MIN_POSITIVE);
    Ok(col
        .iter()
        .position(|&v| v >= max - tol)
        .expect("non-empty column"))
}

/// Provenance of one measured unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    /// 0-based cycle.
    pub cycle: usize,
    /// 0-based set within the cycle.
    pub set: usize,
    /// 1-based rank that was measured (0 for SRS draws).
    pub measured_rank: usize,
    /// Index of the unit in the population.
    pub unit: usize,
    /// Combined weight of the selected unit in the measured column (1 for SRS).
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSample {
    pub dataset: Dataset,
    pub scheme: SchemeSpec,
    pub draws: Vec<DrawRecord>,
}

/// Ranks one set and returns `(position in set, combined weight)` of the unit
/// measured for `target_rank`.
pub fn measure_set(
    population: &Population,
    set: &[usize],
    target_rank: usize,
    spec: &SchemeSpec,
) -> Result<(usize, f64)> {
    let k = spec.active_observers();
    let rhos = &spec.observer_correlations[..k];
    let mut matrices = Vec::with_capacity(k);
    let mut scores = vec![0.0; set.len()];
    for obs in 0..k {
        for (slot, &unit) in scores.iter_mut().zip(set) {
            *slot = population.scores[(unit, obs)];
        }
        matrices.push(observer_weight_matrix(&scores, spec.tie_c)?);
    }
    let combined = combine_weights(&matrices, rhos)?;
    let pick = select_unit(&combined, target_rank)?;
    Ok((pick, combined.entries()[(pick, target_rank - 1)]))
}

fn assemble(
    population: &Population,
    spec: &SchemeSpec,
    cycle_units: impl Fn(usize) -> Vec<usize>,
) -> Result<RankedSample> {
    let h = spec.set_size;
    let mut draws = Vec::with_capacity(spec.sample_size());
    for cycle in 0..spec.cycles {
        let units = cycle_units(cycle);
        if spec.scheme.is_ranked() {
            for set in 0..h {
                let members = &units[set * h..(set + 1) * h];
                let draw = draws.len();
                let rank = spec.target_rank(set, draw);
                let (pos, weight) = measure_set(population, members, rank, spec)?;
                draws.push(DrawRecord {
                    cycle,
                    set,
                    measured_rank: rank,
                    unit: members[pos],
                    weight,
                });
            }
        } else {
            for (set, &unit) in units.iter().enumerate() {
                draws.push(DrawRecord {
                    cycle,
                    set,
                    measured_rank: 0,
                    unit,
                    weight: 1.0,
                });
            }
        }
    }
    let picked: Vec<usize> = draws.iter().map(|d| d.unit).collect();
    Ok(RankedSample {
        dataset: population.subset(&picked)?,
        scheme: spec.clone(),
        draws,
    })
}

fn units_per_cycle(spec: &SchemeSpec) -> usize {
    if spec.scheme.is_ranked() {
        spec.set_size * spec.set_size
    } else {
        spec.set_size
    }
}

/// Draws a sample from a finite population.
///
/// Each cycle takes its units without replacement from the full population
/// (`H` units for SRS, `H^2` for ranked schemes); cycles are independent, so a
/// unit may reappear in a later cycle. Deterministic given `seed`.
pub fn draw_sample(population: &Population, spec: &SchemeSpec, seed: u64) -> Result<RankedSample> {
    spec.validate(population.k())?;
    let per_cycle = units_per_cycle(spec);
    if population.len() < per_cycle {
        return Err(Error::InsufficientPopulation {
            required: per_cycle,
            available: population.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cycles: Vec<Vec<usize>> = (0..spec.cycles)
        .map(|_| index::sample(&mut rng, population.len(), per_cycle).into_vec())
        .collect();
    assemble(population, spec, |c| cycles[c].clone())
}

/// Uses the population's units in storage order: cycle `j` consumes the next
/// `H^2` units (ranked) or `H` units (SRS). Used with freshly generated i.i.d.
/// populations where no further randomisation is needed.
pub fn draw_sample_sequential(population: &Population, spec: &SchemeSpec) -> Result<RankedSample> {
    spec.validate(population.k())?;
    let per_cycle = units_per_cycle(spec);
    let required = per_cycle * spec.cycles;
    if population.len() < required {
        return Err(Error::InsufficientPopulation {
            required,
            available: population.len(),
        });
    }
    assemble(population, spec, |c| (c * per_cycle..(c + 1) * per_cycle).collect())
}
