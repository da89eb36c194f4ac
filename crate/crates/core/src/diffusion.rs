//! Horizontal Brownian motion and empirical heat kernel measures.
//!
//! The generator is `½Δ_H = ½Σᵢ X̃ᵢ²` throughout. Group paths use the
//! geometric Euler scheme `g ← g·exp(√h Σᵢ ξᵢ Xᵢ)` with `ξᵢ ~ N(0,1)`.
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path)`, so
//! clouds are identical for any rayon pool size.

use std::io::{Read, Write};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groups::{GroupModel, GroupPoint};
use crate::quotients::{project_unchecked, QuotientKind, QuotientModel, QuotientPoint};

/// Magic bytes opening the binary cloud format.
pub const BINARY_MAGIC: &[u8; 5] = b"SRLB1";

pub type PathRng = ChaCha8Rng;

/// The random stream of path `index` under `seed`.
pub fn path_rng(seed: u64, index: usize) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Per-path stream factory; stream `i` depends only on `(seed, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
    n_paths: usize,
}

pub fn make_rng_streams(seed: u64, n_paths: usize) -> RngStreams {
    RngStreams { seed, n_paths }
}

impl RngStreams {
    pub fn len(&self) -> usize {
        self.n_paths
    }

    pub fn is_empty(&self) -> bool {
        self.n_paths == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, index: usize) -> PathRng {
        path_rng(self.seed, index)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpaceModel {
    Group(GroupModel),
    Quotient(QuotientModel),
}

impl SpaceModel {
    pub fn name(&self) -> String {
        match self {
            SpaceModel::Group(g) => g.kind().name(),
            SpaceModel::Quotient(q) => q.name(),
        }
    }
}

impl From<GroupModel> for SpaceModel {
    fn from(m: GroupModel) -> Self {
        SpaceModel::Group(m)
    }
}

impl From<QuotientModel> for SpaceModel {
    fn from(m: QuotientModel) -> Self {
        SpaceModel::Quotient(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub t: f64,
    pub h: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub model: SpaceModel,
    /// Keep every intermediate state, not just endpoints.
    pub store_paths: bool,
}

impl SimConfig {
    pub fn new(model: impl Into<SpaceModel>, t: f64, h: f64, n_paths: usize, seed: u64) -> Result<Self> {
        let cfg = SimConfig {
            t,
            h,
            n_paths,
            seed,
            model: model.into(),
            store_paths: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_store_paths(mut self, on: bool) -> Self {
        self.store_paths = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidInput(format!("t must be positive, got {}", self.t)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidInput(format!("h must be positive, got {}", self.h)));
        }
        if self.h > self.t {
            return Err(Error::InvalidInput(format!("step h={} exceeds t={}", self.h, self.t)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be at least 1".into()));
        }
        Ok(())
    }

    /// `round(t/h)`, at least 1.
    pub fn n_steps(&self) -> usize {
        ((self.t / self.h).round() as usize).max(1)
    }

    fn with_group(&self, base: &GroupModel) -> SimConfig {
        SimConfig {
            model: SpaceModel::Group(base.clone()),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuotientMode {
    /// Simulate on the base group and project each endpoint.
    Projected,
    /// Simulate the quotient diffusion directly in its coordinates.
    Intrinsic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Group,
    Projected,
    Intrinsic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CloudPoints {
    Group(Vec<GroupPoint>),
    Quotient(Vec<QuotientPoint>),
}

/// Samples of the time-`t` diffusion endpoint, ordered by path index.
#[derive(Clone, Debug)]
pub struct EndpointCloud {
    pub points: CloudPoints,
    /// Group endpoints behind a projected quotient cloud.
    pub source: Option<Vec<GroupPoint>>,
    pub provenance: Provenance,
    pub config: SimConfig,
    pub wall_time: f64,
    /// Per-path coordinate trajectories when `config.store_paths` is set.
    pub paths: Option<Vec<Vec<Vec<f64>>>>,
}

impl PartialEq for EndpointCloud {
    /// Equality of content; wall time is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
            && self.source == other.source
            && self.provenance == other.provenance
            && self.config == other.config
            && self.paths == other.paths
    }
}

impl EndpointCloud {
    pub fn len(&self) -> usize {
        match &self.points {
            CloudPoints::Group(v) => v.len(),
            CloudPoints::Quotient(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn group_points(&self) -> Option<&[GroupPoint]> {
        match &self.points {
            CloudPoints::Group(v) => Some(v),
            CloudPoints::Quotient(_) => None,
        }
    }

    pub fn quotient_points(&self) -> Option<&[QuotientPoint]> {
        match &self.points {
            CloudPoints::Quotient(v) => Some(v),
            CloudPoints::Group(_) => None,
        }
    }

    /// Coordinates of every endpoint, in path order.
    pub fn coordinate_rows(&self) -> Vec<Vec<f64>> {
        match &self.points {
            CloudPoints::Group(v) => v.iter().map(GroupPoint::coords).collect(),
            CloudPoints::Quotient(v) => v.iter().map(|p| p.coords.clone()).collect(),
        }
    }

    /// The `j`-th coordinate of every endpoint.
    pub fn column(&self, j: usize) -> Vec<f64> {
        match &self.points {
            CloudPoints::Group(v) => v.iter().map(|p| p.coords()[j]).collect(),
            CloudPoints::Quotient(v) => v.iter().map(|p| p.coords[j]).collect(),
        }
    }

    /// CSV with header `path_index,c0,c1,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = self.coordinate_rows();
        let width = rows.first().map_or(0, Vec::len);
        let mut header = String::from("path_index");
        for j in 0..width {
            header.push_str(&format!(",c{j}"));
        }
        writeln!(w, "{header}")?;
        for (i, row) in rows.iter().enumerate() {
            let mut line = i.to_string();
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Binary layout: `SRLB1`, then `u64` row count and `u64` column count,
    /// then the coordinates row by row; all little-endian, values `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = self.coordinate_rows();
        let width = rows.first().map_or(0, Vec::len);
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(rows.len() as u64).to_le_bytes())?;
        w.write_all(&(width as u64).to_le_bytes())?;
        for row in &rows {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Reads the binary cloud format back into coordinate rows.
pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::InvalidInput("missing SRLB1 header".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let m = u64::from_le_bytes(word) as usize;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(m);
        for _ in 0..m {
            r.read_exact(&mut word)?;
            row.push(f64::from_le_bytes(word));
        }
        rows.push(row);
    }
    Ok(rows)
}

#[inline]
fn fill_normals(rng: &mut PathRng, scale: f64, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        let xi: f64 = StandardNormal.sample(rng);
        *v = scale * xi;
    }
}

struct PathOutput {
    endpoint: GroupPoint,
    path: Option<Vec<Vec<f64>>>,
}

fn group_path(model: &GroupModel, cfg: &SimConfig, index: usize) -> Result<PathOutput> {
    let n_steps = cfg.n_steps();
    let sqrt_h = cfg.h.sqrt();
    let mut rng = path_rng(cfg.seed, index);
    let mut g = model.identity();
    let mut buf = vec![0.0; model.frame_size()];
    let mut path = cfg.store_paths.then(|| {
        let mut p = Vec::with_capacity(n_steps + 1);
        p.push(g.coords());
        p
    });
    for step in 0..n_steps {
        fill_normals(&mut rng, sqrt_h, &mut buf);
        g.step_in_place(&buf);
        if step % 64 == 63 && !g.is_finite() {
            return Err(Error::PathBlowup { path: index, step });
        }
        if let Some(p) = path.as_mut() {
            p.push(g.coords());
        }
    }
    if !g.is_finite() {
        return Err(Error::PathBlowup {
            path: index,
            step: n_steps,
        });
    }
    Ok(PathOutput { endpoint: g, path })
}

/// Per-path coordinate trajectories.
type Trajectories = Vec<Vec<Vec<f64>>>;

fn split_outputs(outputs: Vec<PathOutput>) -> (Vec<GroupPoint>, Option<Trajectories>) {
    let mut points = Vec::with_capacity(outputs.len());
    let mut paths = Vec::new();
    let mut any_path = false;
    for o in outputs {
        points.push(o.endpoint);
        if let Some(p) = o.path {
            any_path = true;
            paths.push(p);
        }
    }
    (points, any_path.then_some(paths))
}

/// Endpoints of horizontal Brownian motion started at the identity.
pub fn simulate_group_endpoints(cfg: &SimConfig) -> Result<EndpointCloud> {
    cfg.validate()?;
    let SpaceModel::Group(model) = &cfg.model else {
        return Err(Error::KindMismatch("simulate_group_endpoints needs a group model".into()));
    };
    let start = Instant::now();
    let outputs = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| group_path(model, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let (points, paths) = split_outputs(outputs);
    Ok(EndpointCloud {
        points: CloudPoints::Group(points),
        source: None,
        provenance: Provenance::Group,
        config: cfg.clone(),
        wall_time: start.elapsed().as_secs_f64(),
        paths,
    })
}

fn intrinsic_path(qm: &QuotientModel, cfg: &SimConfig, index: usize) -> Result<(QuotientPoint, Option<Vec<Vec<f64>>>)> {
    let n_steps = cfg.n_steps();
    let sqrt_h = cfg.h.sqrt();
    let mut rng = path_rng(cfg.seed, index);
    let mut state = vec![0.0; qm.coord_dim()];
    let mut path = cfg.store_paths.then(|| vec![state.clone()]);
    let mut buf = [0.0; 2];
    for _ in 0..n_steps {
        match qm.kind() {
            QuotientKind::RealLine => {
                fill_normals(&mut rng, sqrt_h, &mut buf[..1]);
                state[0] += buf[0];
            }
            QuotientKind::Grushin => {
                // dU = dB₁, dV = U dB₂ with U taken before the update.
                fill_normals(&mut rng, sqrt_h, &mut buf);
                state[1] += state[0] * buf[1];
                state[0] += buf[0];
            }
            _ => unreachable!("checked by caller"),
        }
        if let Some(p) = path.as_mut() {
            p.push(state.clone());
        }
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::PathBlowup {
            path: index,
            step: n_steps,
        });
    }
    Ok((QuotientPoint::new(state), path))
}

/// Endpoints of the quotient diffusion, either projected from the base
/// group or simulated intrinsically (real_line and grushin only).
pub fn simulate_quotient_endpoints(cfg: &SimConfig, mode: QuotientMode) -> Result<EndpointCloud> {
    cfg.validate()?;
    let SpaceModel::Quotient(qm) = &cfg.model else {
        return Err(Error::KindMismatch("simulate_quotient_endpoints needs a quotient model".into()));
    };
    let start = Instant::now();
    match mode {
        QuotientMode::Projected => {
            let group_cloud = simulate_group_endpoints(&cfg.with_group(qm.base()))?;
            let CloudPoints::Group(source) = group_cloud.points else {
                unreachable!()
            };
            let points: Vec<QuotientPoint> = source
                .par_iter()
                .map(|g| QuotientPoint::new(project_unchecked(qm, g)))
                .collect();
            let paths = match group_cloud.paths {
                Some(paths) => Some(
                    paths
                        .into_par_iter()
                        .map(|p| {
                            p.into_iter()
                                .map(|c| qm.base().point_from_coords(&c).map(|g| project_unchecked(qm, &g)))
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                None => None,
            };
            Ok(EndpointCloud {
                points: CloudPoints::Quotient(points),
                source: Some(source),
                provenance: Provenance::Projected,
                config: cfg.clone(),
                wall_time: start.elapsed().as_secs_f64(),
                paths,
            })
        }
        QuotientMode::Intrinsic => {
            if !qm.has_intrinsic_frame() {
                return Err(Error::UnsupportedMode(format!(
                    "intrinsic simulation is only available for real_line and grushin, not {}",
                    qm.name()
                )));
            }
            let outputs = (0..cfg.n_paths)
                .into_par_iter()
                .map(|i| intrinsic_path(qm, cfg, i))
                .collect::<Result<Vec<_>>>()?;
            let mut points = Vec::with_capacity(outputs.len());
            let mut paths = Vec::new();
            for (p, path) in outputs {
                points.push(p);
                if let Some(path) = path {
                    paths.push(path);
                }
            }
            Ok(EndpointCloud {
                points: CloudPoints::Quotient(points),
                source: None,
                provenance: Provenance::Intrinsic,
                config: cfg.clone(),
                wall_time: start.elapsed().as_secs_f64(),
                paths: cfg.store_paths.then_some(paths),
            })
        }
    }
}

/// Group clouds at step sizes `k·cfg.h` for each `k` in `factors`, driven by
/// the same Brownian increments: a coarse step sums `k` consecutive fine
/// increments. Differences between the returned clouds therefore isolate
/// discretization bias from sampling noise.
pub fn simulate_refinement_ladder(cfg: &SimConfig, factors: &[usize]) -> Result<Vec<EndpointCloud>> {
    cfg.validate()?;
    let SpaceModel::Group(model) = &cfg.model else {
        return Err(Error::KindMismatch("refinement ladders need a group model".into()));
    };
    let n_fine = cfg.n_steps();
    for &k in factors {
        if k == 0 || !n_fine.is_multiple_of(k) {
            return Err(Error::InvalidInput(format!(
                "coarsening factor {k} does not divide {n_fine} fine steps"
            )));
        }
    }
    let start = Instant::now();
    let d = model.frame_size();
    let sqrt_h = cfg.h.sqrt();
    let per_path = (0..cfg.n_paths)
        .into_par_iter()
        .map(|index| {
            let mut rng = path_rng(cfg.seed, index);
            let mut states = vec![model.identity(); factors.len()];
            let mut sums = vec![vec![0.0; d]; factors.len()];
            let mut buf = vec![0.0; d];
            for step in 0..n_fine {
                fill_normals(&mut rng, sqrt_h, &mut buf);
                for ((state, sum), &k) in states.iter_mut().zip(sums.iter_mut()).zip(factors) {
                    for (s, b) in sum.iter_mut().zip(&buf) {
                        *s += b;
                    }
                    if (step + 1) % k == 0 {
                        state.step_in_place(sum);
                        sum.iter_mut().for_each(|s| *s = 0.0);
                    }
                }
            }
            if states.iter().any(|s| !s.is_finite()) {
                return Err(Error::PathBlowup { path: index, step: n_fine });
            }
            Ok(states)
        })
        .collect::<Result<Vec<_>>>()?;
    let wall = start.elapsed().as_secs_f64();
    Ok(factors
        .iter()
        .enumerate()
        .map(|(j, &k)| EndpointCloud {
            points: CloudPoints::Group(per_path.iter().map(|s| s[j].clone()).collect()),
            source: None,
            provenance: Provenance::Group,
            config: SimConfig {
                h: cfg.h * k as f64,
                ..cfg.clone()
            },
            wall_time: wall,
            paths: None,
        })
        .collect())
}
