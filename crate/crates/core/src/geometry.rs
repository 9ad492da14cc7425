//! Vectors, seeded random streams and the angular primitives shared by every
//! learner and oracle in the crate.

use std::f64::consts::PI;
use std::ops::Index;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `‖x‖₂ − 1` for a vector to count as unit.
pub const UNIT_TOL: f64 = 1e-9;

/// A dense point or weight vector in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting empty or non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coordinate {pos} is not finite ({})",
                coords[pos]
            )));
        }
        Ok(Self(coords))
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self(coords)
    }

    pub fn zeros(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        Ok(Self(vec![0.0; d]))
    }

    /// The standard basis vector `e_i` of `R^d` (zero-based `i`).
    pub fn basis(i: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if i >= d {
            return Err(Error::InvalidInput(format!("basis index {i} out of range for d = {d}")));
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Ok(Self(v))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOL
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|c| a * c).collect())
    }

    /// `self − a·other`.
    pub fn sub_scaled(&self, a: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(x, y)| x - a * y).collect())
    }

    pub fn normalized(&self) -> Result<Vector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn neg(&self) -> Vector {
        self.scaled(-1.0)
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sign(t)` with the convention `sign(0) = +1`.
#[inline]
pub fn sign_label(t: f64) -> i8 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8, whose 64-bit stream parameter selects one of `2^64`
/// independent keystreams for the same key. Children are derived from the
/// identity of the parent, never from its current position, so the order in
/// which children are created does not matter.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// An independent stream keyed by this stream's identity and `id`.
    pub fn child(&self, id: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x632b_e59b_d9b4_e019)));
        RngStream::new(key, id)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws a point uniformly from the unit sphere `S_{d-1} ⊂ R^d` by normalizing
/// an isotropic Gaussian.
pub fn sample_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vector> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut buf = vec![0.0; d];
    loop {
        for c in buf.iter_mut() {
            *c = rng.sample(StandardNormal);
        }
        let n = dot(&buf, &buf).sqrt();
        // Only an all-zero draw is rejected; it has probability zero but
        // cannot be normalized.
        if n > 0.0 {
            buf.iter_mut().for_each(|c| *c /= n);
            return Ok(Vector(buf));
        }
    }
}

fn check_nonzero(u: &Vector, name: &str) -> Result<f64> {
    let n = u.norm();
    if n == 0.0 {
        return Err(Error::InvalidInput(format!("{name} is the zero vector")));
    }
    Ok(n)
}

fn check_dims(u: &Vector, v: &Vector) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    Ok(())
}

/// The angle `θ(u, v) ∈ [0, π]`.
pub fn angle(u: &Vector, v: &Vector) -> Result<f64> {
    check_dims(u, v)?;
    let nu = check_nonzero(u, "u")?;
    let nv = check_nonzero(v, "v")?;
    let c = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// `tan θ(u, v)`, computed as `sqrt(‖u‖²‖v‖²/(u·v)² − 1)`.
///
/// Returns `f64::INFINITY` when `u·v = 0`. For obtuse pairs the value is the
/// tangent of the supplementary angle, i.e. `|tan θ|`.
pub fn tan_theta(u: &Vector, v: &Vector) -> Result<f64> {
    check_dims(u, v)?;
    check_nonzero(u, "u")?;
    check_nonzero(v, "v")?;
    let uv = u.dot(v);
    if uv == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ratio = u.norm_sq() * v.norm_sq() / (uv * uv);
    Ok((ratio - 1.0).max(0.0).sqrt())
}

/// Whether `x` lies in the disagreement region `(u·x)(v·x) ≤ 0` of the two
/// homogeneous halfspaces.
#[inline]
pub fn in_disagreement(x: &Vector, u: &Vector, v: &Vector) -> bool {
    u.dot(x) * v.dot(x) <= 0.0
}

/// Builds a unit vector at angle `theta` from the unit vector `u`, rotating
/// towards a uniformly random direction orthogonal to `u`.
pub fn unit_at_angle<R: Rng + ?Sized>(u: &Vector, theta: f64, rng: &mut R) -> Result<Vector> {
    let d = u.dim();
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let perp = loop {
        let g = sample_sphere(d, rng)?;
        let p = g.sub_scaled(g.dot(u), u);
        let n = p.norm();
        if n > 1e-6 {
            break p.scaled(1.0 / n);
        }
    };
    let (s, c) = theta.sin_cos();
    Ok(Vector(
        u.as_slice()
            .iter()
            .zip(perp.as_slice())
            .map(|(a, b)| c * a + s * b)
            .collect(),
    ))
}

/// Fraction of the sphere in the disagreement region of two halfspaces at
/// angle `theta`.
#[inline]
pub fn disagreement_mass(theta: f64) -> f64 {
    theta / PI
}
