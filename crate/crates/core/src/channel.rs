//! Sub-6 GHz channel matrices, the beamformed mmWave gain, and the compound
//! channel set used for partial transmitter-side channel knowledge.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// A sub-6 GHz MIMO channel with its cached singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sub6Channel {
    n_t: usize,
    n_r: usize,
    entries: CMatrix,
    singular_values: Vec<f64>,
}

impl Sub6Channel {
    /// Wraps an `n_r x n_t` matrix.
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        let singular_values = singular_values(&entries)?;
        Ok(Self {
            n_t: entries.ncols(),
            n_r: entries.nrows(),
            entries,
            singular_values,
        })
    }

    /// A channel known only through its singular values; the matrix is the
    /// corresponding `n_r x n_t` rectangular diagonal.
    pub fn from_singular_values(n_t: usize, n_r: usize, values: &[f64]) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::Domain("antenna counts must be at least 1".into()));
        }
        if values.len() > n_t.min(n_r) || values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "need at most {} finite nonnegative singular values",
                n_t.min(n_r)
            )));
        }
        let m = CMatrix::from_fn(n_r, n_t, |r, c| {
            if r == c && r < values.len() {
                Complex64::new(values[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::from_matrix(m)
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// `lambda_1 >= ... >= lambda_n`, `n = min(n_t, n_r)`.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Per-unit-power, per-hertz SNR of each eigenmode under the uniform
    /// covariance `P / n_t * I`: `lambda_i^2 / n_t`.
    pub fn uniform_gains(&self) -> Vec<f64> {
        self.singular_values
            .iter()
            .map(|l| l * l / self.n_t as f64)
            .collect()
    }

    /// Scales the channel power (every `|h_ij|^2`) by `power_gain`.
    pub fn scaled(&self, power_gain: f64) -> Self {
        let amp = power_gain.sqrt();
        Self {
            n_t: self.n_t,
            n_r: self.n_r,
            entries: self.entries.map(|z| z * amp),
            singular_values: self.singular_values.iter().map(|s| s * amp).collect(),
        }
    }
}

/// The analog-beamformed mmWave link, reduced to its scalar power gain
/// `A = |w_r^H H_m w_t|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmWaveLink {
    gain: f64,
}

impl MmWaveLink {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain >= 0.0) || !gain.is_finite() {
            return Err(Error::Domain(format!("mmWave gain must be finite and >= 0, got {gain}")));
        }
        Ok(Self { gain })
    }

    /// Synthetic beamformed gain: `A = g * n_t * n_r * |h|^2` with `h` a
    /// unit-power Rician coefficient of factor `k_factor` and `g` the
    /// per-element power gain over the noise density.
    pub fn rician(n_t: usize, n_r: usize, per_element_gain: f64, k_factor: f64, seed: u64) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::Domain("antenna counts must be at least 1".into()));
        }
        if !(k_factor >= 0.0) {
            return Err(Error::Domain(format!("Rician K factor must be >= 0, got {k_factor}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let los = (k_factor / (k_factor + 1.0)).sqrt();
        let nlos = complex_gaussian(&mut rng, 1.0 / (k_factor + 1.0));
        let h = Complex64::new(los, 0.0) + nlos;
        Self::new(per_element_gain * (n_t * n_r) as f64 * h.norm_sqr())
    }

    /// `A`.
    pub fn gain(&self) -> f64 {
        self.gain
    }
}

/// The compound channel set: a rank-one line-of-sight mean
/// `sqrt(los_gain) v u^H` plus a perturbation of spectral norm at most
/// `epsilon` whose entries have variance `sigma_e2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsitModel {
    los_gain: f64,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    epsilon: f64,
    sigma_e2: f64,
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl CsitModel {
    pub fn new(los_gain: f64, u: Vec<Complex64>, v: Vec<Complex64>, epsilon: f64, sigma_e2: f64) -> Result<Self> {
        if u.is_empty() || v.is_empty() {
            return Err(Error::Domain("u and v must be non-empty".into()));
        }
        for (name, x) in [("u", &u), ("v", &v)] {
            if (norm(x) - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("{name} must have unit norm (got {})", norm(x))));
            }
        }
        for (name, x) in [("los_gain", los_gain), ("epsilon", epsilon), ("sigma_e2", sigma_e2)] {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite and >= 0, got {x}")));
            }
        }
        Ok(Self { los_gain, u, v, epsilon, sigma_e2 })
    }

    /// A model whose directions `u`, `v` are drawn uniformly on the complex
    /// unit spheres.
    pub fn with_random_directions(n_t: usize, n_r: usize, los_gain: f64, epsilon: f64, sigma_e2: f64, seed: u64) -> Result<Self> {
        if n_t == 0 || n_r == 0 {
            return Err(Error::Domain("antenna counts must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| {
            let x: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let s = norm(&x);
            x.into_iter().map(|z| z / s).collect::<Vec<_>>()
        };
        let u = draw(n_t);
        let v = draw(n_r);
        Self::new(los_gain, u, v, epsilon, sigma_e2)
    }

    pub fn los_gain(&self) -> f64 {
        self.los_gain
    }

    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    pub fn v(&self) -> &[Complex64] {
        &self.v
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }

    pub fn n_t(&self) -> usize {
        self.u.len()
    }

    pub fn n_r(&self) -> usize {
        self.v.len()
    }

    /// `(sqrt(lambda) - epsilon)^+`, the only nonzero singular value of the
    /// worst channel in the set.
    pub fn worst_case_amplitude(&self) -> f64 {
        (self.los_gain.sqrt() - self.epsilon).max(0.0)
    }

    /// `amplitude * v u^H`.
    fn rank_one(&self, amplitude: f64) -> CMatrix {
        CMatrix::from_fn(self.n_r(), self.n_t(), |r, c| self.v[r] * self.u[c].conj() * amplitude)
    }

    /// The line-of-sight mean `sqrt(lambda) v u^H`.
    pub fn mean_channel(&self) -> CMatrix {
        self.rank_one(self.los_gain.sqrt())
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

/// i.i.d. unit-variance circularly symmetric Gaussian `n_r x n_t` channel.
pub fn generate_rayleigh(n_t: usize, n_r: usize, seed: u64) -> Result<Sub6Channel> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::Domain(format!(
            "antenna counts must be at least 1 (n_t = {n_t}, n_r = {n_r})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sub6Channel::from_matrix(gaussian_matrix(&mut rng, n_r, n_t, 1.0))
}

/// Singular values in descending order.
pub fn singular_values(matrix: &CMatrix) -> Result<Vec<f64>> {
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    Ok(linalg::singular_values(matrix))
}

/// One realisation `H = H_mean + dH` from the compound set. `dH` has i.i.d.
/// entries of variance `sigma_e2` and is shrunk onto the spectral-norm ball
/// of radius `epsilon` when it falls outside.
pub fn sample_compound_channel(model: &CsitModel, seed: u64) -> Result<Sub6Channel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut delta = gaussian_matrix(&mut rng, model.n_r(), model.n_t(), model.sigma_e2);
    let spectral = linalg::spectral_norm(&delta);
    if spectral > model.epsilon {
        let shrink = if spectral > 0.0 { model.epsilon / spectral } else { 0.0 };
        delta *= Complex64::new(shrink, 0.0);
    }
    Sub6Channel::from_matrix(model.mean_channel() + delta)
}

/// The worst channel of the compound set, `(sqrt(lambda) - epsilon)^+ v u^H`.
pub fn worst_case_channel(model: &CsitModel) -> Sub6Channel {
    let m = model.rank_one(model.worst_case_amplitude());
    Sub6Channel::from_matrix(m).expect("finite by construction")
}

fn parse_complex(tok: &str) -> Option<Complex64> {
    let t = tok.trim();
    let Some(body) = t.strip_suffix('j').or_else(|| t.strip_suffix('i')) else {
        return t.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().ok()?;
            let im_str = &body[i..];
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().ok()?,
            };
            Some(Complex64::new(re, im))
        }
        None => body.parse::<f64>().ok().map(|im| Complex64::new(0.0, im)),
    }
}

/// Reads the plain-text matrix format: a header line `n_r n_t`, then `n_r`
/// lines of `n_t` whitespace-separated entries written `re+imj`.
pub fn read_channel<R: BufRead>(reader: R) -> Result<Sub6Channel> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));

    let (line_no, header) = lines
        .next()
        .ok_or(Error::ChannelFormat { line: 1, msg: "missing header".into() })?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::ChannelFormat { line: line_no, msg: format!("bad header: {e}") })?;
    let [n_r, n_t] = dims[..] else {
        return Err(Error::ChannelFormat { line: line_no, msg: "header must be `n_r n_t`".into() });
    };
    if n_r == 0 || n_t == 0 {
        return Err(Error::ChannelFormat { line: line_no, msg: "dimensions must be positive".into() });
    }

    let mut m = CMatrix::zeros(n_r, n_t);
    for r in 0..n_r {
        let (line_no, line) = lines.next().ok_or(Error::ChannelFormat {
            line: line_no + r + 1,
            msg: format!("expected {n_r} rows, found {r}"),
        })?;
        let line = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n_t {
            return Err(Error::ChannelFormat {
                line: line_no,
                msg: format!("expected {n_t} entries, found {}", toks.len()),
            });
        }
        for (c, tok) in toks.iter().enumerate() {
            m[(r, c)] = parse_complex(tok).ok_or_else(|| Error::ChannelFormat {
                line: line_no,
                msg: format!("cannot parse complex entry `{tok}`"),
            })?;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::ChannelFormat { line: line_no, msg: "trailing data after matrix".into() });
    }
    Sub6Channel::from_matrix(m)
}

/// Writes the format accepted by [`read_channel`]; entries round-trip exactly.
pub fn write_channel<W: Write>(ch: &Sub6Channel, mut out: W) -> Result<()> {
    let mut buf = format!("{} {}\n", ch.n_r, ch.n_t);
    for r in 0..ch.n_r {
        for c in 0..ch.n_t {
            let z = ch.entries[(r, c)];
            if c > 0 {
                buf.push(' ');
            }
            let sign = if z.im.is_sign_negative() { '-' } else { '+' };
            let _ = write!(buf, "{:e}{}{:e}j", z.re, sign, z.im.abs());
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}
