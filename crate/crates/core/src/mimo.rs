//! The complex point-to-point MIMO problem.
//!
//! A single data stream is sent through an `n_rx × n_tx` channel `H` using
//! unnormalized 1-bit pre-coder `f` and post-coder `g`, every entry drawn
//! from `{±1 ± 1j}`. The received SNR is
//!
//! ```text
//! snr(g, f) = P · |gᴴ H f|² / (4 · n_tx · n_rx · σ²)
//! ```
//!
//! where the `4 · n_tx · n_rx` term accounts for normalizing `f` and `g` to
//! unit norm.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, keyed_rng, tag};

/// Default bound on `2 · (n_tx + n_rx)` for exhaustive enumeration.
pub const DEFAULT_ES_CAP_BITS: usize = 28;

/// An `n_rx × n_tx` complex channel matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRecord", into = "ChannelRecord")]
pub struct ComplexChannel {
    n_tx: usize,
    n_rx: usize,
    entries: DMatrix<Complex64>,
}

/// JSON layout of a channel: row-major real and imaginary parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChannelRecord {
    n_tx: usize,
    n_rx: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<ChannelRecord> for ComplexChannel {
    type Error = Error;

    fn try_from(r: ChannelRecord) -> Result<Self> {
        ComplexChannel::from_row_major(r.n_tx, r.n_rx, &r.re, &r.im)
    }
}

impl From<ComplexChannel> for ChannelRecord {
    fn from(c: ComplexChannel) -> Self {
        let (re, im) = c.row_major_parts();
        ChannelRecord {
            n_tx: c.n_tx,
            n_rx: c.n_rx,
            re,
            im,
        }
    }
}

impl ComplexChannel {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let (n_rx, n_tx) = entries.shape();
        if n_tx == 0 {
            return Err(Error::ZeroDimension("n_tx"));
        }
        if n_rx == 0 {
            return Err(Error::ZeroDimension("n_rx"));
        }
        if entries.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
            return Err(Error::invalid("entries", "channel entries must be finite"));
        }
        Ok(Self { n_tx, n_rx, entries })
    }

    /// Builds a channel from row-major real and imaginary parts.
    pub fn from_row_major(n_tx: usize, n_rx: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        let len = n_tx * n_rx;
        for (what, part) in [("re", re), ("im", im)] {
            if part.len() != len {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: len,
                    got: part.len(),
                });
            }
        }
        let entries = DMatrix::from_fn(n_rx, n_tx, |i, j| Complex64::new(re[i * n_tx + j], im[i * n_tx + j]));
        Self::new(entries)
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Channel gain between transmit antenna `tx` and receive antenna `rx`.
    pub fn get(&self, rx: usize, tx: usize) -> Complex64 {
        self.entries[(rx, tx)]
    }

    pub fn row_major_parts(&self) -> (Vec<f64>, Vec<f64>) {
        let mut re = Vec::with_capacity(self.n_tx * self.n_rx);
        let mut im = Vec::with_capacity(self.n_tx * self.n_rx);
        for i in 0..self.n_rx {
            for j in 0..self.n_tx {
                re.push(self.entries[(i, j)].re);
                im.push(self.entries[(i, j)].im);
            }
        }
        (re, im)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("channel serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// `H f` for a pre-coder of matching length.
    pub fn apply(&self, f: &CodingVector) -> Vec<Complex64> {
        (0..self.n_rx)
            .map(|i| (0..self.n_tx).map(|j| self.entries[(i, j)] * f.0[j]).sum())
            .collect()
    }

    fn check_pair(&self, pair: &CodingPair) -> Result<()> {
        if pair.f.len() != self.n_tx {
            return Err(Error::DimensionMismatch {
                what: "pre-coder entries",
                expected: self.n_tx,
                got: pair.f.len(),
            });
        }
        if pair.g.len() != self.n_rx {
            return Err(Error::DimensionMismatch {
                what: "post-coder entries",
                expected: self.n_rx,
                got: pair.g.len(),
            });
        }
        Ok(())
    }
}

/// Draws an i.i.d. CN(0, 1) channel from the stream keyed by `seed`.
pub fn generate_rayleigh_channel(n_tx: usize, n_rx: usize, seed: u64) -> Result<ComplexChannel> {
    if n_tx == 0 {
        return Err(Error::ZeroDimension("n_tx"));
    }
    if n_rx == 0 {
        return Err(Error::ZeroDimension("n_rx"));
    }
    let mut rng = keyed_rng(seed, &[tag::CHANNEL]);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // Row-major fill so the draw order matches the JSON layout.
    let mut data = Vec::with_capacity(n_tx * n_rx);
    for _ in 0..n_tx * n_rx {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        data.push(Complex64::new(re * scale, im * scale));
    }
    ComplexChannel::new(DMatrix::from_row_slice(n_rx, n_tx, &data))
}

/// A reproducible family of Rayleigh channels; member `i` depends only on
/// `(seed, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelEnsemble {
    pub n_tx: usize,
    pub n_rx: usize,
    pub size: usize,
    pub seed: u64,
}

impl ChannelEnsemble {
    pub fn member(&self, index: usize) -> Result<ComplexChannel> {
        generate_rayleigh_channel(
            self.n_tx,
            self.n_rx,
            derive_seed(self.seed, &[tag::CHANNEL, index as u64]),
        )
    }

    pub fn members(&self) -> Result<Vec<ComplexChannel>> {
        (0..self.size).map(|i| self.member(i)).collect()
    }
}

/// A vector over the 1-bit alphabet `{±1 ± 1j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct CodingVector(Vec<Complex64>);

impl TryFrom<Vec<Complex64>> for CodingVector {
    type Error = Error;

    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        CodingVector::new(v)
    }
}

impl From<CodingVector> for Vec<Complex64> {
    fn from(v: CodingVector) -> Self {
        v.0
    }
}

fn is_unit_sign(x: f64) -> bool {
    x == 1.0 || x == -1.0
}

impl CodingVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ZeroDimension("coding vector"));
        }
        if let Some(index) = entries.iter().position(|z| !is_unit_sign(z.re) || !is_unit_sign(z.im)) {
            return Err(Error::OffAlphabet {
                what: "coding vector",
                index,
            });
        }
        Ok(Self(entries))
    }

    /// Builds `R + jI` from the stacked spin vector `[R; I]`.
    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        if !spins.len().is_multiple_of(2) {
            return Err(Error::invalid("spins", "stacked spin vector must have even length"));
        }
        if let Some(index) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::OffAlphabet {
                what: "spin vector",
                index,
            });
        }
        let n = spins.len() / 2;
        Self::new(
            (0..n)
                .map(|k| Complex64::new(f64::from(spins[k]), f64::from(spins[n + k])))
                .collect(),
        )
    }

    /// The stacked real embedding `[R(v); I(v)]`.
    pub fn to_spins(&self) -> Vec<i8> {
        let re = self.0.iter().map(|z| z.re as i8);
        let im = self.0.iter().map(|z| z.im as i8);
        re.chain(im).collect()
    }

    pub fn all_ones(n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(1.0, 1.0); n])
    }

    /// Uniformly random vector over the alphabet.
    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let sign = |b: bool| if b { 1.0 } else { -1.0 };
        Self::new(
            (0..n)
                .map(|_| Complex64::new(sign(rng.random()), sign(rng.random())))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Multiplies every entry by a unit from `{1, j, -1, -j}`; the result
    /// stays on the alphabet.
    pub fn rotate(&self, quarter_turns: u8) -> Self {
        let unit = match quarter_turns % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        Self(self.0.iter().map(|z| z * unit).collect())
    }

    /// Interleaved sign bits `R(v₀), I(v₀), R(v₁), ...`, most significant
    /// first, with `1` encoding `-1`.
    pub fn code(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, z| {
            (acc << 2) | (u64::from(z.re < 0.0) << 1) | u64::from(z.im < 0.0)
        })
    }

    /// Inverse of [`CodingVector::code`].
    pub fn from_code(code: u64, len: usize) -> Self {
        let sign = |bit: u64| if bit == 1 { -1.0 } else { 1.0 };
        Self(
            (0..len)
                .map(|k| {
                    let shift = 2 * (len - 1 - k);
                    let sym = (code >> shift) & 3;
                    Complex64::new(sign(sym >> 1), sign(sym & 1))
                })
                .collect(),
        )
    }
}

/// Pre-coder `f` (length `n_tx`) and post-coder `g` (length `n_rx`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingPair {
    pub f: CodingVector,
    pub g: CodingVector,
}

impl CodingPair {
    pub fn new(f: CodingVector, g: CodingVector) -> Self {
        Self { f, g }
    }

    /// Concatenated code of `f` then `g`; lexicographic order on the bit
    /// string coincides with numeric order.
    pub fn code(&self) -> u64 {
        (self.f.code() << (2 * self.g.len())) | self.g.code()
    }

    pub fn from_code(code: u64, n_tx: usize, n_rx: usize) -> Self {
        let g_bits = 2 * n_rx;
        let g_mask = if g_bits == 64 { u64::MAX } else { (1u64 << g_bits) - 1 };
        Self {
            f: CodingVector::from_code(code >> g_bits, n_tx),
            g: CodingVector::from_code(code & g_mask, n_rx),
        }
    }
}

/// Transmit power and receiver noise variance, both linear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrContext {
    power: f64,
    noise_var: f64,
}

impl SnrContext {
    pub fn new(power: f64, noise_var: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::invalid("power", format!("must be finite and >= 0, got {power}")));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::invalid(
                "noise_var",
                format!("must be finite and > 0, got {noise_var}"),
            ));
        }
        Ok(Self { power, noise_var })
    }

    /// Power given in dB, converted via `10^(dB/10)`.
    pub fn from_db(power_db: f64, noise_var: f64) -> Result<Self> {
        Self::new(db_to_linear(power_db), noise_var)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// SNR corresponding to a raw gain `|gᴴHf|²` on an `n_tx × n_rx` link.
    pub fn snr_from_gain(&self, gain: f64, n_tx: usize, n_rx: usize) -> f64 {
        self.power * gain / (4.0 * n_tx as f64 * n_rx as f64 * self.noise_var)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `|gᴴ H f|²`.
pub fn gain(channel: &ComplexChannel, pair: &CodingPair) -> Result<f64> {
    channel.check_pair(pair)?;
    let hf = channel.apply(&pair.f);
    let inner: Complex64 = pair.g.as_slice().iter().zip(&hf).map(|(g, y)| g.conj() * y).sum();
    Ok(inner.norm_sqr())
}

/// Received SNR of a coding pair.
pub fn snr(channel: &ComplexChannel, pair: &CodingPair, ctx: &SnrContext) -> Result<f64> {
    let g = gain(channel, pair)?;
    Ok(ctx.snr_from_gain(g, channel.n_tx(), channel.n_rx()))
}

/// Unit multipliers `(α, β)` applied as `(g, f) → (α g, β f)`, encoded as
/// quarter turns. The list is the group generated by independent sign
/// flips of `g` and `f` and the swap `(g, f) → (-j g, j f)`.
const ORBIT_MAPS: [(u8, u8); 8] = [(0, 0), (2, 2), (0, 2), (2, 0), (3, 1), (1, 3), (1, 1), (3, 3)];

/// The SNR-preserving symmetry class of `pair`, ordered by pair code.
///
/// Each map multiplies `g` and `f` by unit scalars, so the action is free and
/// every orbit has exactly eight members.
pub fn symmetry_orbit(pair: &CodingPair) -> Vec<CodingPair> {
    let mut orbit: Vec<CodingPair> = ORBIT_MAPS
        .iter()
        .map(|&(a, b)| CodingPair::new(pair.f.rotate(b), pair.g.rotate(a)))
        .collect();
    orbit.sort_by_key(CodingPair::code);
    orbit.dedup();
    orbit
}

/// Lexicographically smallest member of the orbit.
pub fn canonical_representative(pair: &CodingPair) -> CodingPair {
    symmetry_orbit(pair)
        .into_iter()
        .next()
        .expect("orbit contains the identity")
}

/// Canonical representatives are exactly the pairs with `f₀ = 1 + 1j` and
/// `R(g₀) = +1`: the f-multipliers cover all four units, fixing `f₀`, and the
/// remaining sign of `g` fixes `R(g₀)`.
fn is_canonical_code(f_code: u64, g_code: u64, n_tx: usize, n_rx: usize) -> bool {
    (f_code >> (2 * (n_tx - 1))) == 0 && (g_code >> (2 * n_rx - 1)) == 0
}

/// Global SNR maximizer over all 1-bit coding pairs.
pub fn exhaustive_search(channel: &ComplexChannel, ctx: &SnrContext, use_symmetry: bool) -> Result<(CodingPair, f64)> {
    exhaustive_search_capped(channel, ctx, use_symmetry, DEFAULT_ES_CAP_BITS)
}

/// [`exhaustive_search`] with an explicit cap on `2 · (n_tx + n_rx)`.
///
/// Ties resolve to the smallest pair code. With `use_symmetry` only one
/// canonical representative per orbit is evaluated (an eighth of the space).
pub fn exhaustive_search_capped(
    channel: &ComplexChannel,
    ctx: &SnrContext,
    use_symmetry: bool,
    cap_bits: usize,
) -> Result<(CodingPair, f64)> {
    let (n_tx, n_rx) = (channel.n_tx(), channel.n_rx());
    let required = 2 * (n_tx + n_rx);
    if required > cap_bits.min(62) {
        return Err(Error::EnumerationCap {
            what: "exhaustive search",
            required,
            cap: cap_bits,
        });
    }
    let f_count = 1u64 << (2 * n_tx);
    let g_count = 1u64 << (2 * n_rx);
    let (f_end, g_end) = if use_symmetry {
        (f_count >> 2, g_count >> 1)
    } else {
        (f_count, g_count)
    };
    debug_assert!(!use_symmetry || is_canonical_code(f_end - 1, g_end - 1, n_tx, n_rx));

    let symbols = [
        Complex64::new(1.0, 1.0),
        Complex64::new(1.0, -1.0),
        Complex64::new(-1.0, 1.0),
        Complex64::new(-1.0, -1.0),
    ];

    let best = (0..f_end)
        .into_par_iter()
        .map(|f_code| {
            let f = CodingVector::from_code(f_code, n_tx);
            let hf = channel.apply(&f);
            // conj(g_i) · (Hf)_i for each of the four symbols.
            let table: Vec<[Complex64; 4]> = hf
                .iter()
                .map(|y| std::array::from_fn(|s| symbols[s].conj() * y))
                .collect();
            let mut best_gain = f64::NEG_INFINITY;
            let mut best_g = 0u64;
            for g_code in 0..g_end {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, row) in table.iter().enumerate() {
                    let sym = (g_code >> (2 * (n_rx - 1 - i))) & 3;
                    acc += row[sym as usize];
                }
                let v = acc.norm_sqr();
                if v > best_gain {
                    best_gain = v;
                    best_g = g_code;
                }
            }
            (best_gain, (f_code << (2 * n_rx)) | best_g)
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    let pair = CodingPair::from_code(best.1, n_tx, n_rx);
    Ok((pair, ctx.snr_from_gain(best.0, n_tx, n_rx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_channel(h: Complex64) -> ComplexChannel {
        ComplexChannel::new(DMatrix::from_element(1, 1, h)).unwrap()
    }

    fn pair(f: &[Complex64], g: &[Complex64]) -> CodingPair {
        CodingPair::new(
            CodingVector::new(f.to_vec()).unwrap(),
            CodingVector::new(g.to_vec()).unwrap(),
        )
    }

    /// Direct evaluation with explicit conjugated sums, independent of
    /// `ComplexChannel::apply`.
    fn direct_gain(h: &ComplexChannel, p: &CodingPair) -> f64 {
        let mut acc = c(0.0, 0.0);
        for i in 0..h.n_rx() {
            let gi = p.g.as_slice()[i];
            for j in 0..h.n_tx() {
                let fj = p.f.as_slice()[j];
                let hij = h.get(i, j);
                acc += c(gi.re, -gi.im) * hij * fj;
            }
        }
        acc.re * acc.re + acc.im * acc.im
    }

    #[test]
    fn scalar_snr_by_hand() {
        let h = scalar_channel(c(1.0, 0.0));
        let p = pair(&[c(1.0, 1.0)], &[c(1.0, 1.0)]);
        let ctx = SnrContext::new(2.0, 1.0).unwrap();
        assert_eq!(snr(&h, &p, &ctx).unwrap(), 2.0);
    }

    #[test]
    fn zero_power_gives_zero_snr() {
        let h = generate_rayleigh_channel(3, 2, 1).unwrap();
        let p = CodingPair::new(CodingVector::all_ones(3).unwrap(), CodingVector::all_ones(2).unwrap());
        let ctx = SnrContext::new(0.0, 1.0).unwrap();
        assert_eq!(snr(&h, &p, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn snr_matches_direct_evaluation() {
        for seed in 0..20 {
            let h = generate_rayleigh_channel(3, 3, seed).unwrap();
            let mut rng = keyed_rng(seed, &[99]);
            let p = CodingPair::new(
                CodingVector::random(3, &mut rng).unwrap(),
                CodingVector::random(3, &mut rng).unwrap(),
            );
            let ctx = SnrContext::new(1.7, 0.3).unwrap();
            let expected = direct_gain(&h, &p) * 1.7 / (4.0 * 9.0 * 0.3);
            let got = snr(&h, &p, &ctx).unwrap();
            assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn snr_scales_linearly() {
        let h = generate_rayleigh_channel(2, 3, 4).unwrap();
        let p = CodingPair::new(CodingVector::all_ones(2).unwrap(), CodingVector::all_ones(3).unwrap());
        let base = snr(&h, &p, &SnrContext::new(1.0, 1.0).unwrap()).unwrap();
        let p3 = snr(&h, &p, &SnrContext::new(3.0, 1.0).unwrap()).unwrap();
        let n2 = snr(&h, &p, &SnrContext::new(1.0, 2.0).unwrap()).unwrap();
        assert!((p3 - 3.0 * base).abs() < 1e-12 * p3);
        assert!((n2 - base / 2.0).abs() < 1e-12 * base);
    }

    #[test]
    fn normalized_vectors_give_same_snr() {
        let h = generate_rayleigh_channel(3, 2, 11).unwrap();
        let mut rng = keyed_rng(11, &[1]);
        let p = CodingPair::new(
            CodingVector::random(3, &mut rng).unwrap(),
            CodingVector::random(2, &mut rng).unwrap(),
        );
        let ctx = SnrContext::new(2.5, 0.5).unwrap();
        let fnorm = (2.0f64 * 3.0).sqrt();
        let gnorm = (2.0f64 * 2.0).sqrt();
        let mut acc = c(0.0, 0.0);
        for i in 0..2 {
            for j in 0..3 {
                acc += (p.g.as_slice()[i] / gnorm).conj() * h.get(i, j) * (p.f.as_slice()[j] / fnorm);
            }
        }
        let normalized = 2.5 * acc.norm_sqr() / 0.5;
        let got = snr(&h, &p, &ctx).unwrap();
        assert!((got - normalized).abs() < 1e-12 * got);
    }

    #[test]
    fn snr_dimension_mismatch() {
        let h = generate_rayleigh_channel(2, 2, 0).unwrap();
        let p = CodingPair::new(CodingVector::all_ones(3).unwrap(), CodingVector::all_ones(2).unwrap());
        let ctx = SnrContext::new(1.0, 1.0).unwrap();
        assert!(matches!(snr(&h, &p, &ctx), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn snr_context_validation() {
        assert!(SnrContext::new(-1.0, 1.0).is_err());
        assert!(SnrContext::new(1.0, 0.0).is_err());
        assert!(SnrContext::new(1.0, f64::NAN).is_err());
        let ctx = SnrContext::from_db(10.0, 1.0).unwrap();
        assert!((ctx.power() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_rejects_zero_dims() {
        assert_eq!(
            generate_rayleigh_channel(0, 2, 0).unwrap_err(),
            Error::ZeroDimension("n_tx")
        );
        assert!(generate_rayleigh_channel(2, 0, 0).is_err());
    }

    #[test]
    fn rayleigh_is_deterministic() {
        let a = generate_rayleigh_channel(1, 1, 42).unwrap();
        let b = generate_rayleigh_channel(1, 1, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_rayleigh_channel(1, 1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rayleigh_unit_power() {
        // 62 500 draws of a 4x4 matrix = 10^6 entries.
        let ens = ChannelEnsemble {
            n_tx: 4,
            n_rx: 4,
            size: 62_500,
            seed: 5,
        };
        let mut sum = 0.0;
        let mut sum_re2 = 0.0;
        let mut n = 0usize;
        for i in 0..ens.size {
            let h = ens.member(i).unwrap();
            for z in h.entries().iter() {
                sum += z.norm_sqr();
                sum_re2 += z.re * z.re;
                n += 1;
            }
        }
        assert_eq!(n, 1_000_000);
        let mean = sum / n as f64;
        assert!((0.99..=1.01).contains(&mean), "mean |h|^2 = {mean}");
        let re_var = sum_re2 / n as f64;
        assert!((re_var - 0.5).abs() < 0.01, "var re = {re_var}");
    }

    #[test]
    fn channel_json_round_trip() {
        let h = generate_rayleigh_channel(3, 2, 9).unwrap();
        let s = h.to_json();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["n_tx"], 3);
        assert_eq!(v["n_rx"], 2);
        assert_eq!(v["re"].as_array().unwrap().len(), 6);
        assert_eq!(v["re"][1].as_f64().unwrap(), h.get(0, 1).re);
        assert_eq!(ComplexChannel::from_json(&s).unwrap(), h);
    }

    #[test]
    fn channel_json_rejects_bad_shape() {
        let bad = r#"{"n_tx":2,"n_rx":2,"re":[1,2,3],"im":[0,0,0,0]}"#;
        assert!(ComplexChannel::from_json(bad).is_err());
        let zero = r#"{"n_tx":0,"n_rx":2,"re":[],"im":[]}"#;
        assert!(ComplexChannel::from_json(zero).is_err());
    }

    #[test]
    fn coding_vector_rejects_off_alphabet() {
        assert!(CodingVector::new(vec![c(1.0, 0.5)]).is_err());
        assert!(CodingVector::new(vec![]).is_err());
        assert!(CodingVector::from_spins(&[1, -1, 1]).is_err());
        assert!(CodingVector::from_spins(&[1, 0]).is_err());
    }

    #[test]
    fn spins_stack_as_real_then_imaginary() {
        let v = CodingVector::from_spins(&[1, -1, 1, 1]).unwrap();
        assert_eq!(v.as_slice(), &[c(1.0, 1.0), c(-1.0, 1.0)]);
        assert_eq!(v.to_spins(), vec![1, -1, 1, 1]);
    }

    #[test]
    fn code_round_trip() {
        for code in 0..256u64 {
            let p = CodingPair::from_code(code, 2, 2);
            assert_eq!(p.code(), code);
        }
        let v = CodingVector::new(vec![c(1.0, -1.0), c(-1.0, 1.0)]).unwrap();
        assert_eq!(v.code(), 0b01_10);
    }

    #[test]
    fn orbit_contains_identity_and_preserves_snr() {
        for seed in 0..25 {
            let h = generate_rayleigh_channel(3, 2, seed).unwrap();
            let mut rng = keyed_rng(seed, &[2]);
            let p = CodingPair::new(
                CodingVector::random(3, &mut rng).unwrap(),
                CodingVector::random(2, &mut rng).unwrap(),
            );
            let ctx = SnrContext::new(1.0, 1.0).unwrap();
            let base = snr(&h, &p, &ctx).unwrap();
            let orbit = symmetry_orbit(&p);
            assert!(orbit.contains(&p));
            assert_eq!(orbit.len(), 8);
            for q in &orbit {
                let s = snr(&h, q, &ctx).unwrap();
                assert!((s - base).abs() <= 1e-12 * base.max(1e-300));
            }
        }
    }

    #[test]
    fn scalar_orbits_partition_pair_space() {
        let h = scalar_channel(c(0.3, -1.1));
        let ctx = SnrContext::new(1.0, 1.0).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        let mut sizes = Vec::new();
        for code in 0..16u64 {
            if seen.contains(&code) {
                continue;
            }
            let p = CodingPair::from_code(code, 1, 1);
            let orbit = symmetry_orbit(&p);
            let base = snr(&h, &p, &ctx).unwrap();
            for q in &orbit {
                assert!(seen.insert(q.code()));
                assert!((snr(&h, q, &ctx).unwrap() - base).abs() < 1e-12);
            }
            sizes.push(orbit.len());
        }
        assert_eq!(seen.len(), 16);
        assert!(sizes.iter().all(|s| 16 % s == 0));
    }

    #[test]
    fn canonical_representatives_are_the_reduced_set() {
        let mut reps = std::collections::BTreeSet::new();
        for code in 0..(1u64 << 8) {
            let p = CodingPair::from_code(code, 2, 2);
            reps.insert(canonical_representative(&p).code());
        }
        assert_eq!(reps.len(), 256 / 8);
        for r in reps {
            assert!(is_canonical_code(r >> 4, r & 0xf, 2, 2));
        }
    }

    #[test]
    fn scalar_unit_channel_gain_is_constant() {
        let h = scalar_channel(c(1.0, 0.0));
        // Brute force over all 16 pairs.
        let best = (0..16u64)
            .map(|code| direct_gain(&h, &CodingPair::from_code(code, 1, 1)))
            .fold(0.0, f64::max);
        // |g|²|f|² = 4 for every pair, so every pair is optimal.
        assert_eq!(best, 4.0);
        let ctx = SnrContext::new(1.0, 1.0).unwrap();
        for sym in [false, true] {
            let (p, s) = exhaustive_search(&h, &ctx, sym).unwrap();
            assert_eq!(gain(&h, &p).unwrap(), 4.0);
            assert_eq!(s, 1.0);
        }
        // f = 1+1j, g = 1-1j included.
        let p = pair(&[c(1.0, 1.0)], &[c(1.0, -1.0)]);
        assert_eq!(gain(&h, &p).unwrap(), 4.0);
    }

    #[test]
    fn es_cap_refuses_nine_by_nine() {
        let h = ComplexChannel::new(DMatrix::from_element(9, 9, c(1.0, 0.0))).unwrap();
        let ctx = SnrContext::new(1.0, 1.0).unwrap();
        let err = exhaustive_search(&h, &ctx, true).unwrap_err();
        assert_eq!(
            err,
            Error::EnumerationCap {
                what: "exhaustive search",
                required: 36,
                cap: DEFAULT_ES_CAP_BITS
            }
        );
        // 2^36 evaluations, the quoted 6.87e10.
        assert!(((1u64 << 36) as f64 - 6.87e10).abs() < 0.01e10);
    }

    #[test]
    fn es_symmetry_agrees_with_full_enumeration() {
        let ctx = SnrContext::new(1.0, 1.0).unwrap();
        for seed in 0..20 {
            let h = generate_rayleigh_channel(2, 2, 1000 + seed).unwrap();
            let (p_full, s_full) = exhaustive_search(&h, &ctx, false).unwrap();
            let (p_sym, s_sym) = exhaustive_search(&h, &ctx, true).unwrap();
            assert!((s_full - s_sym).abs() <= 1e-12 * s_full);
            assert!((snr(&h, &p_sym, &ctx).unwrap() - s_sym).abs() <= 1e-12 * s_sym);
            assert!((snr(&h, &p_full, &ctx).unwrap() - s_full).abs() <= 1e-12 * s_full);
        }
    }

    #[test]
    fn es_dominates_every_pair() {
        let ctx = SnrContext::new(1.0, 1.0).unwrap();
        let h = generate_rayleigh_channel(2, 3, 77).unwrap();
        let (_, best) = exhaustive_search(&h, &ctx, true).unwrap();
        for code in 0..(1u64 << 10) {
            let s = snr(&h, &CodingPair::from_code(code, 2, 3), &ctx).unwrap();
            assert!(s <= best * (1.0 + 1e-12));
        }
    }
}
