//! Reformulation of the coding subproblems as QUBO and Ising instances.
//!
//! With one side of the link fixed, `|gᴴHf|²` is a real quadratic form in the
//! stacked spins `[R(·); I(·)]` of the free side. That form is converted to a
//! binary problem through `b = (s + 1) / 2`, calibrated to max-norm one, and
//! negated so that the maximization becomes a minimization.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mimo::{CodingVector, ComplexChannel};
use crate::rng::{keyed_rng, tag};

const SYMMETRY_TOL: f64 = 1e-12;

/// A real quadratic form `sᵀ M s` over spins `s ∈ {-1, +1}ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinQuadraticForm {
    matrix: DMatrix<f64>,
}

impl SpinQuadraticForm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_square_symmetric(&matrix, "spin form")?;
        Ok(Self { matrix })
    }

    /// Gram matrix `MᵀM` of a real matrix; symmetric and positive semidefinite.
    fn gram(m: &DMatrix<f64>) -> Self {
        let mut g = m.transpose() * m;
        symmetrize(&mut g);
        Self { matrix: g }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn evaluate(&self, spins: &[i8]) -> f64 {
        quadratic(&self.matrix, spins.iter().map(|&s| f64::from(s)))
    }
}

fn quadratic(m: &DMatrix<f64>, x: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = x.collect();
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n {
        if xs[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * xs[j];
        }
        acc += xs[i] * row;
    }
    acc
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn check_square_symmetric(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::DimensionMismatch {
            what,
            expected: r,
            got: c,
        });
    }
    if r == 0 {
        return Err(Error::ZeroDimension(what));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix", "entries must be finite"));
    }
    let scale = m.amax().max(1.0);
    for i in 0..r {
        for j in (i + 1)..r {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid("matrix", format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// Real embedding of the pre-coder subproblem for a fixed post-coder `g`.
///
/// With `c = gᴴH` and `f_r = [R(f); I(f)]`,
/// `gᴴHf = (R(c)·R(f) − I(c)·I(f)) + j(I(c)·R(f) + R(c)·I(f))`, so the
/// `2 × 2n_tx` matrix `J = [[R(c), −I(c)], [I(c), R(c)]]` satisfies
/// `f_rᵀ(JᵀJ)f_r = |gᴴHf|²`.
pub fn real_embed_precoder(channel: &ComplexChannel, g: &CodingVector) -> Result<SpinQuadraticForm> {
    check_dim("post-coder entries", channel.n_rx(), g.len())?;
    let n = channel.n_tx();
    let h = channel.entries();
    let c: Vec<Complex64> = (0..n)
        .map(|k| {
            g.as_slice()
                .iter()
                .enumerate()
                .map(|(i, gi)| gi.conj() * h[(i, k)])
                .sum()
        })
        .collect();
    let j = DMatrix::from_fn(2, 2 * n, |row, col| {
        let (k, imag_half) = (col % n, col >= n);
        match (row, imag_half) {
            (0, false) => c[k].re,
            (0, true) => -c[k].im,
            (_, false) => c[k].im,
            (_, true) => c[k].re,
        }
    });
    Ok(SpinQuadraticForm::gram(&j))
}

/// Real embedding of the post-coder subproblem for a fixed pre-coder `f`.
///
/// With `y = Hf` and `g_r = [R(g); I(g)]`,
/// `gᴴy = (R(g)·R(y) + I(g)·I(y)) + j(R(g)·I(y) − I(g)·R(y))`, giving
/// `Z = [[R(y), I(y)], [I(y), −R(y)]]` and `g_rᵀ(ZᵀZ)g_r = |gᴴHf|²`. The
/// form has dimension `2n_rx`.
pub fn real_embed_postcoder(channel: &ComplexChannel, f: &CodingVector) -> Result<SpinQuadraticForm> {
    check_dim("pre-coder entries", channel.n_tx(), f.len())?;
    let n = channel.n_rx();
    let y = channel.apply(f);
    let z = DMatrix::from_fn(2, 2 * n, |row, col| {
        let (k, imag_half) = (col % n, col >= n);
        match (row, imag_half) {
            (0, false) => y[k].re,
            (0, true) => y[k].im,
            (_, false) => y[k].im,
            (_, true) => -y[k].re,
        }
    });
    Ok(SpinQuadraticForm::gram(&z))
}

/// A symmetric QUBO instance: minimize `bᵀ Q b` over `b ∈ {0, 1}ⁿ`.
///
/// `scale` and `offset` record the calibration. For instances produced by
/// [`spin_form_to_qubo`] the source objective is recovered as
/// `sᵀVs = offset − scale · bᵀQb`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuboRecord", into = "QuboRecord")]
pub struct QuboProblem {
    matrix: DMatrix<f64>,
    scale: f64,
    offset: f64,
    mu: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct QuboRecord {
    dim: usize,
    matrix: Vec<f64>,
    scale: f64,
    offset: f64,
    companded: bool,
    mu: Option<f64>,
}

impl TryFrom<QuboRecord> for QuboProblem {
    type Error = Error;

    fn try_from(r: QuboRecord) -> Result<Self> {
        check_dim("matrix entries", r.dim * r.dim, r.matrix.len())?;
        if r.companded != r.mu.is_some() {
            return Err(Error::Parse("`companded` and `mu` disagree".into()));
        }
        let matrix = DMatrix::from_row_slice(r.dim, r.dim, &r.matrix);
        let mut q = QuboProblem::with_calibration(matrix, r.scale, r.offset)?;
        q.mu = r.mu;
        Ok(q)
    }
}

impl From<QuboProblem> for QuboRecord {
    fn from(q: QuboProblem) -> Self {
        let dim = q.dim();
        QuboRecord {
            dim,
            matrix: (0..dim)
                .flat_map(|i| (0..dim).map(move |j| (i, j)))
                .map(|ij| q.matrix[ij])
                .collect(),
            scale: q.scale,
            offset: q.offset,
            companded: q.mu.is_some(),
            mu: q.mu,
        }
    }
}

impl QuboProblem {
    /// An uncalibrated instance (scale 1, offset 0).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_calibration(matrix, 1.0, 0.0)
    }

    pub fn with_calibration(matrix: DMatrix<f64>, scale: f64, offset: f64) -> Result<Self> {
        check_square_symmetric(&matrix, "QUBO matrix")?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", "must be positive and finite"));
        }
        Ok(Self {
            matrix,
            scale,
            offset,
            mu: None,
        })
    }

    /// Divides by the max-norm so every entry lies in `[-1, 1]`; the divisor
    /// is kept as `scale` (1 for the zero matrix).
    pub fn normalized(matrix: DMatrix<f64>) -> Result<Self> {
        check_square_symmetric(&matrix, "QUBO matrix")?;
        let max = matrix.amax();
        let scale = if max > 0.0 { max } else { 1.0 };
        Self::with_calibration(matrix / scale, scale, 0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_companded(&self) -> bool {
        self.mu.is_some()
    }

    /// The μ used for companding, if any.
    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.amax()
    }

    /// `bᵀ Q b` for a 0/1 vector.
    pub fn energy(&self, bits: &[u8]) -> f64 {
        quadratic(&self.matrix, bits.iter().map(|&b| f64::from(b)))
    }

    /// Source spin objective `offset − scale · energy`.
    pub fn spin_objective(&self, energy: f64) -> f64 {
        self.offset - self.scale * energy
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("QUBO serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Upper-triangular coordinate list, one `i j value` line per nonzero
    /// entry. Off-diagonal values are doubled (`2·Q_ij`) so that
    /// `Σ_{i≤j} value·b_i·b_j` equals `bᵀQb`, the convention external
    /// annealer tooling expects.
    pub fn to_coo(&self) -> String {
        let n = self.dim();
        let mut out = format!("# dim {n}\n");
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    self.matrix[(i, i)]
                } else {
                    2.0 * self.matrix[(i, j)]
                };
                if v != 0.0 {
                    let _ = writeln!(out, "{i} {j} {v}");
                }
            }
        }
        out
    }

    /// Parses [`QuboProblem::to_coo`] output. Calibration metadata is not
    /// part of the format; the result has scale 1 and offset 0.
    pub fn from_coo(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("dim") {
                    let d = it.next().and_then(|d| d.parse().ok());
                    dim = Some(d.ok_or_else(|| Error::Parse(format!("line {}: bad dim", lineno + 1)))?);
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse_err = || Error::Parse(format!("line {}: expected `i j value`", lineno + 1));
            if parts.len() != 3 {
                return Err(parse_err());
            }
            let i: usize = parts[0].parse().map_err(|_| parse_err())?;
            let j: usize = parts[1].parse().map_err(|_| parse_err())?;
            let v: f64 = parts[2].parse().map_err(|_| parse_err())?;
            if j < i {
                return Err(Error::Parse(format!("line {}: entry below the diagonal", lineno + 1)));
            }
            entries.push((i, j, v));
        }
        let n = match dim {
            Some(n) => n,
            None => entries.iter().map(|&(_, j, _)| j + 1).max().unwrap_or(0),
        };
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in entries {
            if j >= n {
                return Err(Error::Parse(format!("index {j} exceeds dim {n}")));
            }
            if i == j {
                m[(i, i)] = v;
            } else {
                m[(i, j)] = 0.5 * v;
                m[(j, i)] = 0.5 * v;
            }
        }
        Self::new(m)
    }
}

/// Converts a spin form into a calibrated minimization QUBO.
///
/// `sᵀVs = bᵀV₀b + 1ᵀV1` with `V₀ = 4V − 4·diag(V·1)`; the returned matrix is
/// `−V₀ / ‖V₀‖_max`.
pub fn spin_form_to_qubo(form: &SpinQuadraticForm) -> QuboProblem {
    let v = form.matrix();
    let n = form.dim();
    let row_sums: Vec<f64> = (0..n).map(|i| v.row(i).sum()).collect();
    let offset: f64 = row_sums.iter().sum();
    let mut v0 = v * 4.0;
    for i in 0..n {
        v0[(i, i)] -= 4.0 * row_sums[i];
    }
    symmetrize(&mut v0);
    let max = v0.amax();
    let scale = if max > 0.0 { max } else { 1.0 };
    let mut matrix = v0 / (-scale);
    // Keep exact zeros positive so serialized output is stable.
    matrix.apply(|x| {
        if *x == 0.0 {
            *x = 0.0
        }
    });
    QuboProblem {
        matrix,
        scale,
        offset,
        mu: None,
    }
}

pub fn binary_to_spin(bits: &[u8]) -> Result<Vec<i8>> {
    bits.iter()
        .enumerate()
        .map(|(index, &b)| match b {
            0 => Ok(-1),
            1 => Ok(1),
            _ => Err(Error::OffAlphabet {
                what: "binary vector",
                index,
            }),
        })
        .collect()
}

pub fn spin_to_binary(spins: &[i8]) -> Result<Vec<u8>> {
    spins
        .iter()
        .enumerate()
        .map(|(index, &s)| match s {
            -1 => Ok(0),
            1 => Ok(1),
            _ => Err(Error::OffAlphabet {
                what: "spin vector",
                index,
            }),
        })
        .collect()
}

/// `[R; I]` stacked spins to the complex coding vector `R + jI`.
pub fn spins_to_coding_vector(spins: &[i8]) -> Result<CodingVector> {
    CodingVector::from_spins(spins)
}

/// μ-law characteristic `ln(1 + μ|x|) / ln(1 + μ) · sgn(x)`.
pub fn mu_law(x: f64, mu: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    (mu * x.abs()).ln_1p() / mu.ln_1p() * x.signum()
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid("mu", format!("must be positive and finite, got {mu}")));
    }
    Ok(())
}

/// Elementwise μ-law companding of a QUBO whose entries lie in `[-1, 1]`.
pub fn compand(q: &QuboProblem, mu: f64) -> Result<QuboProblem> {
    check_mu(mu)?;
    if q.max_abs() > 1.0 {
        return Err(Error::invalid(
            "q",
            format!("entries must lie in [-1, 1], max |entry| = {}", q.max_abs()),
        ));
    }
    Ok(QuboProblem {
        matrix: q.matrix.map(|x| mu_law(x, mu)),
        scale: q.scale,
        offset: q.offset,
        mu: Some(mu),
    })
}

/// Adds a symmetric noise matrix with i.i.d. `N(0, σ²)` entries on and above
/// the diagonal, drawn from the stream keyed by `seed`.
pub fn inject_ice_noise(q: &QuboProblem, sigma: f64, seed: u64) -> Result<QuboProblem> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    let mut out = q.clone();
    if sigma > 0.0 {
        let mut rng = keyed_rng(seed, &[tag::ICE_NOISE]);
        add_symmetric_noise(&mut out.matrix, sigma, &mut rng);
    }
    Ok(out)
}

/// Row-by-row draw over the upper triangle, mirrored below.
pub(crate) fn add_symmetric_noise<R: Rng + ?Sized>(m: &mut DMatrix<f64>, sigma: f64, rng: &mut R) {
    let normal = Normal::new(0.0, sigma).expect("sigma validated by caller");
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let e = normal.sample(rng);
            m[(i, j)] += e;
            if i != j {
                m[(j, i)] += e;
            }
        }
    }
}

/// Ising instance: energy `Σ hᵢσᵢ + Σ_{i<j} J_ij σᵢσⱼ` plus a constant offset.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingProblem {
    h: Vec<f64>,
    j: DMatrix<f64>,
    offset: f64,
}

impl IsingProblem {
    /// Couplers must be strictly upper triangular.
    pub fn new(h: Vec<f64>, j: DMatrix<f64>, offset: f64) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::ZeroDimension("Ising problem"));
        }
        check_dim("coupler rows", n, j.nrows())?;
        check_dim("coupler columns", n, j.ncols())?;
        for r in 0..n {
            for c in 0..=r {
                if j[(r, c)] != 0.0 {
                    return Err(Error::invalid(
                        "j",
                        format!("coupler ({r}, {c}) is on or below the diagonal"),
                    ));
                }
            }
        }
        if h.iter().chain(j.iter()).any(|x| !x.is_finite()) || !offset.is_finite() {
            return Err(Error::invalid("ising", "coefficients must be finite"));
        }
        Ok(Self { h, j, offset })
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Energy without the offset.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let n = self.n();
        let mut e = 0.0;
        for i in 0..n {
            let si = f64::from(spins[i]);
            e += self.h[i] * si;
            for (k, &sk) in spins.iter().enumerate().skip(i + 1) {
                e += self.j[(i, k)] * si * f64::from(sk);
            }
        }
        e
    }

    /// Largest |coefficient| over biases and couplers.
    pub fn max_abs(&self) -> f64 {
        self.h.iter().chain(self.j.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Divides every bias and coupler by the joint max-norm.
    pub fn normalized(&self) -> Self {
        let m = self.max_abs();
        if m == 0.0 {
            return self.clone();
        }
        Self {
            h: self.h.iter().map(|x| x / m).collect(),
            j: &self.j / m,
            offset: self.offset / m,
        }
    }

    /// Elementwise μ-law companding of biases and couplers.
    pub fn companded(&self, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        if self.max_abs() > 1.0 {
            return Err(Error::invalid("ising", "coefficients must lie in [-1, 1]"));
        }
        Ok(Self {
            h: self.h.iter().map(|&x| mu_law(x, mu)).collect(),
            j: self.j.map(|x| mu_law(x, mu)),
            offset: self.offset,
        })
    }

    /// Fully connected instance with `N(0, 1)` biases and couplers, jointly
    /// scaled to max-norm one.
    pub fn gaussian(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension("Ising problem"));
        }
        let mut rng = keyed_rng(seed, &[tag::ISING]);
        let h: Vec<f64> = (0..n).map(|_| rand_distr::StandardNormal.sample(&mut rng)).collect();
        let mut j = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in (r + 1)..n {
                j[(r, c)] = rand_distr::StandardNormal.sample(&mut rng);
            }
        }
        Ok(Self { h, j, offset: 0.0 }.normalized())
    }
}

/// Substitutes `b = (σ + 1) / 2`:
/// `hᵢ = ½ Σⱼ Q_ij`, `J_ij = ½ Q_ij` (i < j),
/// `offset = ¼ (Σᵢ Q_ii + Σ_ij Q_ij)`.
pub fn qubo_to_ising(q: &QuboProblem) -> IsingProblem {
    let m = q.matrix();
    let n = q.dim();
    let h = (0..n).map(|i| 0.5 * m.row(i).sum()).collect();
    let mut j = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in (r + 1)..n {
            j[(r, c)] = 0.5 * m[(r, c)];
        }
    }
    let offset = 0.25 * (m.trace() + m.sum());
    IsingProblem { h, j, offset }
}

/// Uniformly random symmetric QUBO with `N(0, 1)` entries, max-norm calibrated.
pub fn gaussian_qubo(dim: usize, seed: u64) -> Result<QuboProblem> {
    if dim == 0 {
        return Err(Error::ZeroDimension("QUBO"));
    }
    let mut rng = keyed_rng(seed, &[tag::QUBO]);
    let mut m = DMatrix::zeros(dim, dim);
    add_symmetric_noise(&mut m, 1.0, &mut rng);
    QuboProblem::normalized(m)
}
