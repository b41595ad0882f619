//! Transverse-field annealing Hamiltonians for small Ising instances,
//! their lowest two eigenvalues along the anneal, and time-to-solution.
//!
//! Basis state `x` has qubit `i` in bit `i`; a zero bit is the `σ_z = +1`
//! eigenstate.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::IsingProblem;
use crate::rng::{derive_seed, keyed_rng, tag};

pub const DEFAULT_QUBIT_CAP: usize = 12;

/// Gaps below this are treated as exact degeneracies.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// One sample of a tabulated schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub s: f64,
    pub a: f64,
    pub b: f64,
}

/// Validated tabulation, linearly interpolated between samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SchedulePoint>", into = "Vec<SchedulePoint>")]
pub struct Tabulation {
    points: Vec<SchedulePoint>,
}

impl TryFrom<Vec<SchedulePoint>> for Tabulation {
    type Error = Error;

    fn try_from(points: Vec<SchedulePoint>) -> Result<Self> {
        Tabulation::new(points)
    }
}

impl From<Tabulation> for Vec<SchedulePoint> {
    fn from(t: Tabulation) -> Self {
        t.points
    }
}

/// Endpoint values may be this fraction of the peak and still count as zero.
const ENDPOINT_TOL: f64 = 0.05;

impl Tabulation {
    /// Needs `s` strictly increasing from 0 to 1, nonnegative finite `A`,
    /// `B`, `A` non-increasing and vanishing at `s = 1`, `B` non-decreasing
    /// and vanishing at `s = 0`.
    pub fn new(points: Vec<SchedulePoint>) -> Result<Self> {
        let bad = |reason: String| Err(Error::invalid("schedule", reason));
        if points.len() < 2 {
            return bad("need at least two samples".into());
        }
        if points
            .iter()
            .any(|p| !(p.s.is_finite() && p.a.is_finite() && p.b.is_finite()))
        {
            return bad("samples must be finite".into());
        }
        if points[0].s != 0.0 || points[points.len() - 1].s != 1.0 {
            return bad("samples must start at s=0 and end at s=1".into());
        }
        if points.iter().any(|p| p.a < 0.0 || p.b < 0.0) {
            return bad("A and B must be nonnegative".into());
        }
        for w in points.windows(2) {
            if w[1].s <= w[0].s {
                return bad(format!("s not strictly increasing at s={}", w[1].s));
            }
            if w[1].a > w[0].a {
                return bad(format!("A increases at s={}", w[1].s));
            }
            if w[1].b < w[0].b {
                return bad(format!("B decreases at s={}", w[1].s));
            }
        }
        let a_max = points[0].a;
        let b_max = points[points.len() - 1].b;
        if a_max <= 0.0 || b_max <= 0.0 {
            return bad("A and B must not vanish identically".into());
        }
        if points[points.len() - 1].a > ENDPOINT_TOL * a_max {
            return bad("A(1) is not close to zero".into());
        }
        if points[0].b > ENDPOINT_TOL * b_max {
            return bad("B(0) is not close to zero".into());
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[SchedulePoint] {
        &self.points
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        let k = self
            .points
            .partition_point(|p| p.s <= s)
            .clamp(1, self.points.len() - 1);
        let (p, q) = (self.points[k - 1], self.points[k]);
        let t = (s - p.s) / (q.s - p.s);
        (p.a + t * (q.a - p.a), p.b + t * (q.b - p.b))
    }
}

/// Driver and problem envelopes `A(s)`, `B(s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum AnnealSchedule {
    /// `A = 1 − s`, `B = s`.
    #[default]
    Linear,
    Tabulated(Tabulation),
}

impl AnnealSchedule {
    pub fn tabulated(points: Vec<SchedulePoint>) -> Result<Self> {
        Ok(AnnealSchedule::Tabulated(Tabulation::new(points)?))
    }

    /// Reads `s, A, B` rows; a non-numeric first row is taken as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.len() != 3 {
                return Err(Error::Parse(format!(
                    "schedule row {line}: expected 3 columns, got {}",
                    record.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => points.push(SchedulePoint {
                    s: v[0],
                    a: v[1],
                    b: v[2],
                }),
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("schedule row {line}: {e}"))),
            }
        }
        Self::tabulated(points)
    }

    /// `(A(s), B(s))`.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        check_s(s)?;
        Ok(match self {
            AnnealSchedule::Linear => (1.0 - s, s),
            AnnealSchedule::Tabulated(t) => t.eval(s),
        })
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid("s", format!("must lie in [0, 1], got {s}")));
    }
    Ok(())
}

fn check_qubits(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::EnumerationCap {
            what: "annealing Hamiltonian",
            required: n,
            cap,
        });
    }
    Ok(())
}

/// Classical Ising energy of every basis state.
fn basis_energies(problem: &IsingProblem) -> Vec<f64> {
    let n = problem.n();
    let h = problem.h();
    let j = problem.j();
    (0..1usize << n)
        .map(|x| {
            let z = |i: usize| if x >> i & 1 == 0 { 1.0 } else { -1.0 };
            let mut e = 0.0;
            for i in 0..n {
                e += h[i] * z(i);
                for k in (i + 1)..n {
                    e += j[(i, k)] * z(i) * z(k);
                }
            }
            e
        })
        .collect()
}

/// Dense `H(s) = −A/2·Σσₓ + B/2·(Σhσ_z + ΣJσ_zσ_z)`; real symmetric.
pub fn build_hamiltonian(problem: &IsingProblem, schedule: &AnnealSchedule, s: f64) -> Result<DMatrix<f64>> {
    check_qubits(problem.n(), DEFAULT_QUBIT_CAP)?;
    let (a, b) = schedule.eval(s)?;
    Ok(dense(problem.n(), &basis_energies(problem), a, b))
}

fn dense(n: usize, energies: &[f64], a: f64, b: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        m[(x, x)] = 0.5 * b * energies[x];
        for i in 0..n {
            m[(x, x ^ (1 << i))] = -0.5 * a;
        }
    }
    m
}

/// How the lowest two eigenvalues are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Dense up to 64 states, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

const AUTO_DENSE_MAX_DIM: usize = 64;

/// Lowest two eigenvalues of `H(s)` for one instance, reusing the diagonal.
struct Spectrum<'a> {
    n: usize,
    energies: &'a [f64],
    seed: u64,
}

impl Spectrum<'_> {
    fn lowest_two(&self, a: f64, b: f64, method: EigenMethod) -> (f64, f64) {
        let dim = 1usize << self.n;
        if a == 0.0 {
            let mut d: Vec<f64> = self.energies.iter().map(|e| 0.5 * b * e).collect();
            d.sort_by(f64::total_cmp);
            return (d[0], d[1]);
        }
        let use_dense = match method {
            EigenMethod::Dense => true,
            EigenMethod::Lanczos => false,
            EigenMethod::Auto => dim <= AUTO_DENSE_MAX_DIM,
        };
        if !use_dense {
            if let Some(pair) = self.lanczos(a, b) {
                return pair;
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(dense(self.n, self.energies, a, b))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        (ev[0], ev[1])
    }

    fn apply(&self, a: f64, b: f64, v: &[f64], out: &mut [f64]) {
        let half_a = 0.5 * a;
        for (x, o) in out.iter_mut().enumerate() {
            let mut flips = 0.0;
            for i in 0..self.n {
                flips += v[x ^ (1 << i)];
            }
            *o = 0.5 * b * self.energies[x] * v[x] - half_a * flips;
        }
    }

    /// Lanczos with full reorthogonalization from a seeded random start.
    ///
    /// For `A > 0` the driver couples every basis state with negative
    /// off-diagonals, so the ground state is simple and has overlap with a
    /// random start; the two lowest Ritz values converge to `λ₀` and `λ₁`.
    /// Returns `None` on an immediate breakdown.
    fn lanczos(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let dim = 1usize << self.n;
        let bound = self.energies.iter().fold(0.0f64, |m, e| m.max(e.abs())) * 0.5 * b + 0.5 * a * self.n as f64;
        let breakdown = 1e-12 * bound;
        let converged = 1e-8 * bound;
        let max_steps = dim.min(400);

        let mut rng = keyed_rng(self.seed, &[tag::LANCZOS]);
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let inv = 1.0 / norm(&v);
        scale(&mut v, inv);
        let mut basis = vec![v];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];

        loop {
            let j = basis.len() - 1;
            self.apply(a, b, &basis[j], &mut w);
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            let before = norm(&w);
            orthogonalize(&basis, &mut w);
            let mut beta = norm(&w);
            if beta < 0.7 * before {
                orthogonalize(&basis, &mut w);
                beta = norm(&w);
            }
            let m = alphas.len();
            let done = beta <= breakdown || m == max_steps;
            if m >= 2 && (done || (m >= 10 && m.is_multiple_of(3))) {
                let (theta, resid) = ritz_lowest_two(&alphas, &betas, beta);
                if done || (resid[0] <= converged && resid[1] <= converged) {
                    return Some((theta[0], theta[1]));
                }
            } else if done {
                return None;
            }
            betas.push(beta);
            scale(&mut w, 1.0 / beta);
            basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
        }
    }
}

/// Lowest two eigenvalues of the tridiagonal matrix and their residual
/// bounds `β·|last eigenvector component|`.
fn ritz_lowest_two(alphas: &[f64], betas: &[f64], beta: f64) -> ([f64; 2], [f64; 2]) {
    let (values, last) = tridiagonal_eigen(alphas, betas);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let (i0, i1) = (order[0], order[1]);
    ([values[i0], values[i1]], [beta * last[i0].abs(), beta * last[i1].abs()])
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the last
/// row of the eigenvector matrix. Returns eigenvalues (unsorted) and the
/// last component of each eigenvector.
fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e: Vec<f64> = off.iter().copied().chain(std::iter::once(0.0)).collect();
    e.truncate(n);
    let mut z = vec![0.0; n];
    z[n - 1] = 1.0;
    for l in 0..n {
        for _ in 0..64 {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    for u in basis {
        let c = dot(u, w);
        axpy(-c, u, w);
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    // Four partial sums let the loop vectorize.
    let mut acc = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn scale(x: &mut [f64], c: f64) {
    x.iter_mut().for_each(|v| *v *= c);
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += c * xi);
}

/// Lowest two eigenvalues along a uniform `s` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub s_grid: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub gap: Vec<f64>,
    pub min_gap: f64,
    pub argmin_s: f64,
    /// Set when the minimum gap is below the degeneracy tolerance; the gap
    /// is then recorded as zero.
    pub degenerate: bool,
}

impl GapProfile {
    fn from_samples(s_grid: Vec<f64>, lambda0: Vec<f64>, lambda1: Vec<f64>) -> Self {
        let gap: Vec<f64> = lambda0
            .iter()
            .zip(&lambda1)
            .map(|(l0, l1)| {
                let g = l1 - l0;
                if g < DEGENERACY_TOL {
                    0.0
                } else {
                    g
                }
            })
            .collect();
        let mut k = 0;
        for (i, g) in gap.iter().enumerate() {
            if *g < gap[k] {
                k = i;
            }
        }
        Self {
            min_gap: gap[k],
            argmin_s: s_grid[k],
            degenerate: gap[k] == 0.0,
            s_grid,
            lambda0,
            lambda1,
            gap,
        }
    }

    /// Columns `s,lambda0,lambda1,gap`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,lambda0,lambda1,gap\n");
        for i in 0..self.s_grid.len() {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?}\n",
                self.s_grid[i], self.lambda0[i], self.lambda1[i], self.gap[i]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let (mut s, mut l0, mut l1) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let v: Vec<f64> = record
                .iter()
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::Parse("gap profile rows need 4 columns".into()));
            }
            s.push(v[0]);
            l0.push(v[1]);
            l1.push(v[2]);
        }
        if s.len() < 2 {
            return Err(Error::Parse("gap profile needs at least two rows".into()));
        }
        Ok(Self::from_samples(s, l0, l1))
    }
}

/// `k / (points − 1)` for `k = 0..points`.
pub fn uniform_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::invalid("grid_points", "must be at least 2"));
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|k| k as f64 / last).collect())
}

pub fn gap_profile(problem: &IsingProblem, schedule: &AnnealSchedule, grid_points: usize) -> Result<GapProfile> {
    gap_profile_with(problem, schedule, grid_points, EigenMethod::Auto)
}

pub fn gap_profile_with(
    problem: &IsingProblem,
    schedule: &AnnealSchedule,
    grid_points: usize,
    method: EigenMethod,
) -> Result<GapProfile> {
    check_qubits(problem.n(), DEFAULT_QUBIT_CAP)?;
    if problem.n() == 0 {
        return Err(Error::ZeroDimension("Ising problem"));
    }
    let grid = uniform_grid(grid_points)?;
    let envelopes: Vec<(f64, f64)> = grid.iter().map(|&s| schedule.eval(s)).collect::<Result<_>>()?;
    let energies = basis_energies(problem);
    let spectrum = Spectrum {
        n: problem.n(),
        energies: &energies,
        seed: 0,
    };
    let pairs: Vec<(f64, f64)> = envelopes
        .par_iter()
        .map(|&(a, b)| spectrum.lowest_two(a, b, method))
        .collect();
    let (l0, l1) = pairs.into_iter().unzip();
    Ok(GapProfile::from_samples(grid, l0, l1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStudyConfig {
    pub n: usize,
    pub num_instances: usize,
    pub schedule: AnnealSchedule,
    pub mu: f64,
    pub seed: u64,
    pub grid_points: usize,
}

impl Default for GapStudyConfig {
    fn default() -> Self {
        Self {
            n: 5,
            num_instances: 100,
            schedule: AnnealSchedule::Linear,
            mu: 255.0,
            seed: 0,
            grid_points: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceGaps {
    pub plain: f64,
    pub companded: f64,
    pub plain_degenerate: bool,
    pub companded_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStudy {
    pub instances: Vec<InstanceGaps>,
    pub mean_plain: f64,
    pub mean_companded: f64,
    /// Fraction of instances whose companded minimum gap is strictly larger.
    pub efficiency: f64,
    /// Instances with either gap flagged degenerate.
    pub flagged: usize,
    /// Means over the unflagged instances; `None` if all are flagged.
    pub mean_plain_unflagged: Option<f64>,
    pub mean_companded_unflagged: Option<f64>,
}

/// Minimum gaps of Gaussian instances with and without companding.
///
/// Instance `i` is `IsingProblem::gaussian(n, derive_seed(seed, [i]))`.
pub fn companding_gap_study(cfg: &GapStudyConfig) -> Result<GapStudy> {
    check_qubits(cfg.n, DEFAULT_QUBIT_CAP)?;
    if cfg.num_instances == 0 {
        return Err(Error::invalid("num_instances", "must be at least 1"));
    }
    let instances: Vec<InstanceGaps> = (0..cfg.num_instances)
        .into_par_iter()
        .map(|i| -> Result<InstanceGaps> {
            let plain = IsingProblem::gaussian(cfg.n, derive_seed(cfg.seed, &[i as u64]))?;
            let comp = plain.companded(cfg.mu)?;
            let p = gap_profile(&plain, &cfg.schedule, cfg.grid_points)?;
            let c = gap_profile(&comp, &cfg.schedule, cfg.grid_points)?;
            Ok(InstanceGaps {
                plain: p.min_gap,
                companded: c.min_gap,
                plain_degenerate: p.degenerate,
                companded_degenerate: c.degenerate,
            })
        })
        .collect::<Result<_>>()?;

    let count = instances.len() as f64;
    let mean_plain = instances.iter().map(|x| x.plain).sum::<f64>() / count;
    let mean_companded = instances.iter().map(|x| x.companded).sum::<f64>() / count;
    let efficiency = instances.iter().filter(|x| x.companded > x.plain).count() as f64 / count;
    let clean: Vec<&InstanceGaps> = instances
        .iter()
        .filter(|x| !x.plain_degenerate && !x.companded_degenerate)
        .collect();
    let flagged = instances.len() - clean.len();
    let clean_mean = |f: fn(&InstanceGaps) -> f64| {
        (!clean.is_empty()).then(|| clean.iter().map(|x| f(x)).sum::<f64>() / clean.len() as f64)
    };
    Ok(GapStudy {
        mean_plain_unflagged: clean_mean(|x| x.plain),
        mean_companded_unflagged: clean_mean(|x| x.companded),
        instances,
        mean_plain,
        mean_companded,
        efficiency,
        flagged,
    })
}

/// Time to reach the ground state with 99% confidence:
/// `T·ln(1 − 0.99)/ln(1 − p)`.
///
/// `p = 1` gives `T` and `p = 0` gives infinity.
pub fn tts(total_anneal_time: f64, p: f64) -> Result<f64> {
    tts_with_target(total_anneal_time, p, 0.99)
}

pub fn tts_with_target(total_anneal_time: f64, p: f64, target: f64) -> Result<f64> {
    if !(total_anneal_time > 0.0 && total_anneal_time.is_finite()) {
        return Err(Error::invalid("total_anneal_time", "must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target", "must lie in (0, 1)"));
    }
    if p == 1.0 {
        return Ok(total_anneal_time);
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(total_anneal_time * ((1.0 - target).ln() / (1.0 - p).ln()))
}
