//! Labeled point sets: generators for the uniform-sphere and stress-test
//! families, JSON-lines persistence, and random bucketing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_sphere, sign_label, RngStream, Vector};
use crate::linalg::random_orthonormal;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    points: Vec<Vector>,
    labels: Vec<i8>,
    ground_truth: Option<Vector>,
}

impl LabeledDataset {
    /// Validates sizes, labels and (when present) consistency with the
    /// ground-truth normal.
    pub fn new(points: Vec<Vector>, labels: Vec<i8>, ground_truth: Option<Vector>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.dim(),
            None => ground_truth.as_ref().map(Vector::dim).unwrap_or(0),
        };
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if points.len() != labels.len() {
            return Err(Error::InvalidSize(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| p.dim() != dim) {
            return Err(Error::InvalidInput(format!("point {i} has dimension {}", points[i].dim())));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidInput(format!("label {i} is {} (expected ±1)", labels[i])));
        }
        if let Some(w) = &ground_truth {
            if w.dim() != dim {
                return Err(Error::InvalidInput("ground truth dimension mismatch".into()));
            }
            if let Some(i) = (0..points.len()).find(|&i| sign_label(w.dot(&points[i])) != labels[i]) {
                return Err(Error::InvalidInput(format!("label {i} disagrees with the ground truth")));
            }
        }
        Ok(Self {
            dim,
            points,
            labels,
            ground_truth,
        })
    }

    /// Labels every point by `sign(w*·x)`.
    pub fn from_ground_truth(points: Vec<Vector>, ground_truth: Vector) -> Result<Self> {
        let labels = points.iter().map(|p| sign_label(ground_truth.dot(p))).collect();
        Self::new(points, labels, Some(ground_truth))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn ground_truth(&self) -> Option<&Vector> {
        self.ground_truth.as_ref()
    }

    /// Fraction of `+1` labels.
    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.len().max(1) as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> Result<()> {
        let header = Header {
            d: self.dim,
            n: self.len(),
            ground_truth: self.ground_truth.as_ref().map(|w| w.as_slice().to_vec()),
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for (x, &y) in self.points.iter().zip(&self.labels) {
            serde_json::to_writer(
                &mut *out,
                &RecordOut {
                    x: x.as_slice(),
                    y: y as i64,
                },
            )?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (hline, header) = lines.next().ok_or(Error::MalformedRecord {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: Header = serde_json::from_str(&header?).map_err(|e| Error::MalformedRecord {
            line: hline,
            message: format!("bad header: {e}"),
        })?;
        if header.d == 0 {
            return Err(Error::MalformedRecord {
                line: hline,
                message: "d must be positive".into(),
            });
        }
        let ground_truth = match header.ground_truth {
            Some(w) if w.len() != header.d => {
                return Err(Error::MalformedRecord {
                    line: hline,
                    message: format!("ground_truth has {} coordinates, d = {}", w.len(), header.d),
                })
            }
            Some(w) => Some(Vector::new(w).map_err(|e| Error::MalformedRecord {
                line: hline,
                message: e.to_string(),
            })?),
            None => None,
        };

        let mut points = Vec::with_capacity(header.n);
        let mut labels = Vec::with_capacity(header.n);
        for (line, text) in lines {
            let rec: RecordIn = serde_json::from_str(&text?).map_err(|e| Error::MalformedRecord {
                line,
                message: e.to_string(),
            })?;
            if rec.y != 1 && rec.y != -1 {
                return Err(Error::MalformedRecord {
                    line,
                    message: format!("label must be 1 or -1, got {}", rec.y),
                });
            }
            if rec.x.len() != header.d {
                return Err(Error::MalformedRecord {
                    line,
                    message: format!("expected {} coordinates, got {}", header.d, rec.x.len()),
                });
            }
            let x = Vector::new(rec.x).map_err(|e| Error::MalformedRecord {
                line,
                message: e.to_string(),
            })?;
            if let Some(w) = &ground_truth {
                if sign_label(w.dot(&x)) != rec.y as i8 {
                    return Err(Error::MalformedRecord {
                        line,
                        message: "label disagrees with ground_truth".into(),
                    });
                }
            }
            points.push(x);
            labels.push(rec.y as i8);
        }
        if points.len() != header.n {
            return Err(Error::MalformedRecord {
                line: hline,
                message: format!("header declares n = {}, found {} records", header.n, points.len()),
            });
        }
        if points.is_empty() {
            return Err(Error::InvalidSize("dataset has no points".into()));
        }
        Self::new(points, labels, ground_truth)
    }

    /// Flat CSV (`x1..xd,y`) with 17 significant digits, for plotting.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let cols: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},y", cols.join(","))?;
        for (x, y) in self.points.iter().zip(&self.labels) {
            let row: Vec<String> = x.as_slice().iter().map(|c| format!("{c:.16e}")).collect();
            writeln!(out, "{},{}", row.join(","), y)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    d: usize,
    n: usize,
    #[serde(default)]
    ground_truth: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    x: &'a [f64],
    y: i64,
}

#[derive(Deserialize)]
struct RecordIn {
    x: Vec<f64>,
    y: i64,
}

fn check_sizes(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSize("n must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    Ok(())
}

/// `n` i.i.d. uniform points on the sphere labeled by a uniformly random
/// normal. Points and normal come from separate child streams.
pub fn gen_uniform_sphere(n: usize, d: usize, rng: &RngStream) -> Result<LabeledDataset> {
    check_sizes(n, d)?;
    let mut point_rng = rng.child(0);
    let mut truth_rng = rng.child(1);
    let w_star = sample_sphere(d, &mut truth_rng)?;
    let points = (0..n)
        .map(|_| sample_sphere(d, &mut point_rng))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_ground_truth(points, w_star)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitraryFamily {
    /// Tight clusters whose centers sit at margin `gamma` from the boundary.
    Clustered,
    /// Every point at margin exactly `gamma`.
    LowMargin,
    /// A fraction `rho` of the points inside a random `subspace_dim`-dimensional
    /// subspace, the rest uniform.
    SubspaceDegenerate,
    /// Normalized integer lattice directions.
    Grid,
}

impl ArbitraryFamily {
    pub const ALL: [ArbitraryFamily; 4] = [
        ArbitraryFamily::Clustered,
        ArbitraryFamily::LowMargin,
        ArbitraryFamily::SubspaceDegenerate,
        ArbitraryFamily::Grid,
    ];
}

impl std::str::FromStr for ArbitraryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clustered" => Ok(Self::Clustered),
            "low_margin" | "low-margin" => Ok(Self::LowMargin),
            "subspace_degenerate" | "subspace-degenerate" => Ok(Self::SubspaceDegenerate),
            "grid" => Ok(Self::Grid),
            other => Err(Error::InvalidConfig(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbitraryParams {
    pub gamma: f64,
    pub rho: f64,
    pub subspace_dim: usize,
    /// Cluster count; `0` means `2d`.
    pub clusters: usize,
    pub spread: f64,
}

impl Default for ArbitraryParams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            rho: 0.5,
            subspace_dim: 1,
            clusters: 0,
            spread: 0.05,
        }
    }
}

pub fn gen_arbitrary(
    family: ArbitraryFamily,
    n: usize,
    d: usize,
    params: &ArbitraryParams,
    rng: &RngStream,
) -> Result<LabeledDataset> {
    check_sizes(n, d)?;
    let mut truth_rng = rng.child(1);
    let mut rng = rng.child(0);
    let w_star = sample_sphere(d, &mut truth_rng)?;
    let points = match family {
        ArbitraryFamily::Clustered => clustered(n, d, params, &w_star, &mut rng)?,
        ArbitraryFamily::LowMargin => low_margin(n, d, params.gamma, &w_star, &mut rng)?,
        ArbitraryFamily::SubspaceDegenerate => subspace_degenerate(n, d, params, &mut rng)?,
        ArbitraryFamily::Grid => grid(n, d),
    };
    LabeledDataset::from_ground_truth(points, w_star)
}

/// Unit vector orthogonal to unit `w`, uniform on that great sphere.
fn random_orthogonal<R: Rng + ?Sized>(w: &Vector, rng: &mut R) -> Result<Vector> {
    loop {
        let g = sample_sphere(w.dim(), rng)?;
        let p = g.sub_scaled(g.dot(w), w);
        let n = p.norm();
        if n > 1e-6 {
            return Ok(p.scaled(1.0 / n));
        }
    }
}

/// `s·γ·w + √(1−γ²)·u` for unit `u ⊥ w`.
fn at_margin(w: &Vector, u: &Vector, gamma: f64, side: f64) -> Vector {
    let c = (1.0 - gamma * gamma).sqrt();
    let coords = w
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(a, b)| side * gamma * a + c * b)
        .collect();
    Vector::from_raw(coords)
}

fn clustered<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    params: &ArbitraryParams,
    w_star: &Vector,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    if !(0.0..1.0).contains(&params.gamma) || params.spread < 0.0 || !params.spread.is_finite() {
        return Err(Error::InvalidInput(format!(
            "clustered family needs gamma in [0, 1) and spread ≥ 0 (got {}, {})",
            params.gamma, params.spread
        )));
    }
    if d == 1 {
        return Ok((0..n).map(|_| sample_sphere(1, rng)).collect::<Result<_>>()?);
    }
    let clusters = if params.clusters == 0 { 2 * d } else { params.clusters };
    let centers = (0..clusters)
        .map(|j| {
            let side = if j % 2 == 0 { 1.0 } else { -1.0 };
            Ok(at_margin(w_star, &random_orthogonal(w_star, rng)?, params.gamma, side))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = params.spread / (d as f64).sqrt();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = &centers[rng.random_range(0..clusters)];
        let g = sample_sphere(d, rng)?;
        let r: f64 = rng.sample::<f64, _>(rand_distr::ChiSquared::new(d as f64).unwrap()).sqrt();
        let p = c.sub_scaled(-scale * r, &g);
        if let Ok(p) = p.normalized() {
            out.push(p);
        }
    }
    Ok(out)
}

fn low_margin<R: Rng + ?Sized>(n: usize, d: usize, gamma: f64, w_star: &Vector, rng: &mut R) -> Result<Vec<Vector>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!("low_margin needs gamma in [0, 1], got {gamma}")));
    }
    if d == 1 {
        if gamma > 0.0 {
            // On the line every unit point has margin 1.
            return (0..n).map(|_| sample_sphere(1, rng)).collect();
        }
        return Err(Error::InvalidInput("gamma = 0 is impossible for d = 1".into()));
    }
    (0..n)
        .map(|_| {
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let u = random_orthogonal(w_star, rng)?;
            Ok(at_margin(w_star, &u, gamma, side))
        })
        .collect()
}

fn subspace_degenerate<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    params: &ArbitraryParams,
    rng: &mut R,
) -> Result<Vec<Vector>> {
    if !(0.0..=1.0).contains(&params.rho) {
        return Err(Error::InvalidInput(format!("rho must lie in [0, 1], got {}", params.rho)));
    }
    let k = params.subspace_dim;
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!("subspace dimension {k} invalid for d = {d}")));
    }
    let basis = random_orthonormal(d, k, rng)?;
    let inside = (params.rho * n as f64).round() as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i < inside {
            let c = sample_sphere(k, rng)?;
            let mut x = vec![0.0; d];
            for (cj, b) in c.as_slice().iter().zip(&basis) {
                x.iter_mut().zip(b.as_slice()).for_each(|(xi, bi)| *xi += cj * bi);
            }
            out.push(Vector::from_raw(x).normalized()?);
        } else {
            out.push(sample_sphere(d, rng)?);
        }
    }
    // Interleave so the subspace points are not a contiguous prefix.
    out.shuffle(rng);
    Ok(out)
}

fn grid(n: usize, d: usize) -> Vec<Vector> {
    // Smallest radius m with (2m+1)^d − 1 ≥ n lattice directions.
    let lattice = |m: u128| -> Option<u128> { (2 * m + 1).checked_pow(d as u32).map(|c| c - 1) };
    let mut m: u128 = 1;
    while lattice(m).is_some_and(|c| c < n as u128) {
        m += 1;
    }
    let side = 2 * m + 1;
    // Lattice points are enumerated in base `side`; the origin sits at the
    // middle index. When the count overflows, the first n indices never reach it.
    let total = lattice(m);
    (0..n)
        .map(|i| {
            let mut idx = match total {
                Some(t) => {
                    let j = (i as u128) * t / n as u128;
                    if j >= t / 2 {
                        j + 1
                    } else {
                        j
                    }
                }
                None => i as u128,
            };
            let mut coords = vec![0.0; d];
            for c in coords.iter_mut().rev() {
                *c = (idx % side) as f64 - m as f64;
                idx /= side;
            }
            Vector::from_raw(coords).normalized().expect("lattice point is nonzero")
        })
        .collect()
}

/// A partition of `0..n` into ordered buckets whose sizes differ by at most 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucketing {
    pub buckets: Vec<Vec<usize>>,
}

impl Bucketing {
    pub fn sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(Vec::len).collect()
    }
}

/// Uniformly random balanced partition of `0..n` into `num_buckets` buckets.
pub fn split_buckets<R: Rng + ?Sized>(n: usize, num_buckets: usize, rng: &mut R) -> Result<Bucketing> {
    if num_buckets < 2 || num_buckets % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "bucket count must be even and at least 2, got {num_buckets}"
        )));
    }
    if n < num_buckets {
        return Err(Error::InvalidSize(format!("cannot split {n} points into {num_buckets} nonempty buckets")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let base = n / num_buckets;
    let extra = n % num_buckets;
    let mut buckets = Vec::with_capacity(num_buckets);
    let mut start = 0;
    for b in 0..num_buckets {
        let len = base + usize::from(b < extra);
        buckets.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(Bucketing { buckets })
}
