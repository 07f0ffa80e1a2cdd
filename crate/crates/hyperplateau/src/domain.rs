//! Uniform grids on rectangles in R², masked subdomains, level-set domain
//! extraction with sub-cell boundary cuts, convex envelopes of boundary data,
//! and nested-domain gap statistics.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mask {
    /// interior node carrying an unknown with a full centered stencil
    Active,
    /// ghost node just outside the level set, tied to the boundary value
    Boundary,
    Outside,
}

/// Uniform grid: node (i, j) sits at (origin + i h, origin + j h).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Grid {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.h
    }
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.h
    }
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Square grid centered at the origin covering [-half, half]², with the
    /// origin on a node.
    pub fn centered(half: f64, h: f64) -> Grid {
        let m = (half / h).ceil() as usize + 2;
        Grid {
            origin: [-(m as f64) * h, -(m as f64) * h],
            h,
            nx: 2 * m + 1,
            ny: 2 * m + 1,
        }
    }
}

/// Scalar field with a node mask on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub mask: Vec<Mask>,
}

impl GridField {
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> GridField {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        GridField { grid, values, mask: vec![Mask::Active; grid.len()] }
    }

    pub fn constant(grid: Grid, c: f64) -> GridField {
        GridField { grid, values: vec![c; grid.len()], mask: vec![Mask::Active; grid.len()] }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }
    pub fn mask_at(&self, i: usize, j: usize) -> Mask {
        self.mask[self.grid.idx(i, j)]
    }
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.grid.idx(i, j);
        self.values[idx] = v;
    }

    fn usable(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.grid.nx
            && (j as usize) < self.grid.ny
            && self.mask[self.grid.idx(i as usize, j as usize)] != Mask::Outside
    }

    fn check_stencil(&self, i: usize, j: usize) -> Result<()> {
        let (ii, jj) = (i as isize, j as isize);
        for di in -1..=1isize {
            for dj in -1..=1isize {
                if !self.usable(ii + di, jj + dj) {
                    return Err(Error::Stencil(i, j));
                }
            }
        }
        Ok(())
    }

    /// Whether centered differences are available at (i, j): the full
    /// 8-neighborhood lies on the grid and off the Outside mask.
    pub fn has_full_stencil(&self, i: usize, j: usize) -> bool {
        self.check_stencil(i, j).is_ok()
    }

    /// Centered first differences; requires the 8-neighborhood.
    pub fn gradient(&self, i: usize, j: usize) -> Result<[f64; 2]> {
        self.check_stencil(i, j)?;
        let h2 = 2.0 * self.grid.h;
        Ok([
            (self.value(i + 1, j) - self.value(i - 1, j)) / h2,
            (self.value(i, j + 1) - self.value(i, j - 1)) / h2,
        ])
    }

    /// Centered second differences (9-point cross derivative).
    pub fn hessian(&self, i: usize, j: usize) -> Result<SymMatrix> {
        self.check_stencil(i, j)?;
        let h = self.grid.h;
        let hh = h * h;
        let c = self.value(i, j);
        let uxx = (self.value(i + 1, j) - 2.0 * c + self.value(i - 1, j)) / hh;
        let uyy = (self.value(i, j + 1) - 2.0 * c + self.value(i, j - 1)) / hh;
        let uxy = (self.value(i + 1, j + 1) - self.value(i + 1, j - 1) - self.value(i - 1, j + 1)
            + self.value(i - 1, j - 1))
            / (4.0 * hh);
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, uxx);
        m.set(1, 1, uyy);
        m.set(0, 1, uxy);
        Ok(m)
    }

    pub fn active_nodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                if self.mask[self.grid.idx(i, j)] == Mask::Active {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Marks Boundary on all Outside nodes 8-adjacent to an Active node.
fn mark_ghost_ring(grid: &Grid, mask: &mut [Mask]) {
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;
    let mut ghosts = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if mask[grid.idx(i as usize, j as usize)] != Mask::Outside {
                continue;
            }
            'adj: for di in -1..=1isize {
                for dj in -1..=1isize {
                    let (a, b) = (i + di, j + dj);
                    if a >= 0 && b >= 0 && a < nx && b < ny
                        && mask[grid.idx(a as usize, b as usize)] == Mask::Active
                    {
                        ghosts.push(grid.idx(i as usize, j as usize));
                        break 'adj;
                    }
                }
            }
        }
    }
    for g in ghosts {
        mask[g] = Mask::Boundary;
    }
}

/// Grid covering the disk {|x| < R}, nodes strictly inside marked Active and
/// a one-node ghost ring marked Boundary. Errors when h is too coarse to
/// resolve the disk.
pub fn build_disk(r: f64, h: f64) -> Result<GridField> {
    if r <= 0.0 || h <= 0.0 {
        return Err(Error::Argument(format!("disk needs R > 0, h > 0; got R = {r}, h = {h}")));
    }
    if h > r / 2.0 {
        return Err(Error::Resolution(format!(
            "grid spacing h = {h} too coarse for disk of radius {r}"
        )));
    }
    let grid = Grid::centered(r, h);
    let mut mask = vec![Mask::Outside; grid.len()];
    let r2 = r * r * (1.0 - 1e-12);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let p = grid.point(i, j);
            if p[0] * p[0] + p[1] * p[1] < r2 {
                mask[grid.idx(i, j)] = Mask::Active;
            }
        }
    }
    mark_ghost_ring(&grid, &mut mask);
    if !mask.contains(&Mask::Active) {
        return Err(Error::Resolution("disk contains no grid nodes".into()));
    }
    Ok(GridField { grid, values: vec![0.0; grid.len()], mask })
}

/// One ghost-node boundary tie: the level set Γ_ε crosses the ray from
/// `anchor` (active) through `node` (ghost) at `cut`, a fraction `s` of the
/// way from anchor to node. The boundary condition interpolates as
/// (1−s)·u(anchor) + s·u(node) = boundary value. Ghosts produced by rim
/// demotion lie inside {u̲ > ε}, so their cut sits past the node and
/// s ∈ (1, 2]; ordinary ghosts have s ∈ (0, 1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryTie {
    pub node: (usize, usize),
    pub anchor: (usize, usize),
    pub s: f64,
    pub cut: [f64; 2],
}

/// The approximating domain Ω_ε = {u̲ > ε} discretized: active nodes,
/// ghost ring with boundary ties, and the marching-squares polyline of Γ_ε.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSetDomain {
    pub eps: f64,
    pub grid: Grid,
    pub mask: Vec<Mask>,
    pub ties: Vec<BoundaryTie>,
    /// axis-edge crossings of {u̲ = ε} (marching-squares vertices)
    pub gamma_points: Vec<[f64; 2]>,
}

impl LevelSetDomain {
    pub fn mask_at(&self, i: usize, j: usize) -> Mask {
        self.mask[self.grid.idx(i, j)]
    }

    pub fn active_nodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                if self.mask[self.grid.idx(i, j)] == Mask::Active {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Axis-edge crossings of {field = level} between nodes of differing sign,
/// by linear interpolation (the marching-squares vertex set).
pub fn level_crossings(field: &GridField, level: f64) -> Vec<[f64; 2]> {
    let g = &field.grid;
    let mut pts = Vec::new();
    let mut edge = |a: (usize, usize), b: (usize, usize)| {
        let va = field.value(a.0, a.1) - level;
        let vb = field.value(b.0, b.1) - level;
        if (va > 0.0) != (vb > 0.0) && va != vb {
            let t = va / (va - vb);
            let pa = g.point(a.0, a.1);
            let pb = g.point(b.0, b.1);
            pts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i + 1 < g.nx {
                edge((i, j), (i + 1, j));
            }
            if j + 1 < g.ny {
                edge((i, j), (i, j + 1));
            }
        }
    }
    pts
}

/// Extracts the discrete domain Ω_ε = {u̲ > ε} from a subsolution field
/// defined on the whole grid. Checks that ε sits below max u̲ and that u̲
/// has nonvanishing gradient along the extracted level set.
pub fn level_set_domain(ubar: &GridField, eps: f64) -> Result<LevelSetDomain> {
    if eps <= 0.0 {
        return Err(Error::Argument(format!("level ε = {eps} must be positive")));
    }
    let max_ubar = ubar.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if eps >= max_ubar {
        return Err(Error::Domain(format!(
            "level ε = {eps} is not below max u̲ = {max_ubar}; Ω_ε is empty"
        )));
    }
    let grid = ubar.grid;
    let mut mask = vec![Mask::Outside; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if ubar.value(i, j) > eps {
                mask[grid.idx(i, j)] = Mask::Active;
            }
        }
    }
    // active nodes on the outer frame would leave ghosts off-grid
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if mask[grid.idx(i, j)] == Mask::Active
                && (i == 0 || j == 0 || i == grid.nx - 1 || j == grid.ny - 1)
            {
                return Err(Error::Domain("level set reaches the grid frame".into()));
            }
        }
    }
    // Demote barely-active rim nodes. A cut that hugs its anchor gives the
    // ghost a tiny interpolation weight, and the ghost value then reacts to
    // the anchor with gain 1/s, which drives the Newton linearization toward
    // a fold. Nodes with margin u̲ − ε below T_MIN of the drop to a
    // non-active neighbor are moved into the ghost ring instead; their values
    // come from a mild extrapolation tie (s slightly above 1).
    const T_MIN: f64 = 0.25;
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;
    loop {
        let mut demote = Vec::new();
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                if mask[grid.idx(i, j)] != Mask::Active {
                    continue;
                }
                let va = ubar.value(i, j);
                'nb: for di in -1..=1isize {
                    for dj in -1..=1isize {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                        if mask[grid.idx(a, b)] == Mask::Active {
                            continue;
                        }
                        let vb = ubar.value(a, b);
                        if va > vb && va - eps < T_MIN * (va - vb) {
                            demote.push(grid.idx(i, j));
                            break 'nb;
                        }
                    }
                }
            }
        }
        if demote.is_empty() {
            break;
        }
        for id in demote {
            mask[id] = Mask::Outside;
        }
    }
    if !mask.contains(&Mask::Active) {
        return Err(Error::Domain(format!(
            "Ω_ε at level ε = {eps} is too thin to discretize at h = {}",
            grid.h
        )));
    }
    mark_ghost_ring(&grid, &mut mask);

    // ties: for each ghost node pick the axis/diagonal active neighbor whose
    // cut point lies closest to the ghost itself (weight s nearest 1); ghosts
    // created by demotion sit inside {u̲ > ε} and get extrapolation ties with
    // s a little above 1
    const T_MAX: f64 = 2.0;
    let mut ties = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if mask[grid.idx(i, j)] != Mask::Boundary {
                continue;
            }
            let vb = ubar.value(i, j);
            let mut best: Option<BoundaryTie> = None;
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a < 0 || b < 0 || a >= nx || b >= ny {
                        continue;
                    }
                    let (a, b) = (a as usize, b as usize);
                    if mask[grid.idx(a, b)] != Mask::Active {
                        continue;
                    }
                    let va = ubar.value(a, b);
                    if va <= vb {
                        continue;
                    }
                    // u̲ = ε at anchor + t (node − anchor); va > ε, and t > 1
                    // extrapolates past a demoted ghost with vb > ε
                    let t = (va - eps) / (va - vb);
                    if !(t > 0.0 && t <= T_MAX) {
                        continue;
                    }
                    let pa = grid.point(a, b);
                    let pn = grid.point(i, j);
                    let cut = [pa[0] + t * (pn[0] - pa[0]), pa[1] + t * (pn[1] - pa[1])];
                    if best.as_ref().map_or(true, |bt| (t - 1.0).abs() < (bt.s - 1.0).abs()) {
                        best = Some(BoundaryTie { node: (i, j), anchor: (a, b), s: t, cut });
                    }
                }
            }
            match best {
                Some(t) => ties.push(t),
                None => {
                    return Err(Error::Domain(format!(
                        "ghost node ({i},{j}) has no active neighbor with a level crossing"
                    )))
                }
            }
        }
    }

    // regularity: |Du̲| along the level set must stay away from zero
    let mut min_grad = f64::INFINITY;
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            if mask[grid.idx(i, j)] != Mask::Active {
                continue;
            }
            let near_boundary = {
                let mut nb = false;
                for di in -1..=1isize {
                    for dj in -1..=1isize {
                        let (a, b) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                        if mask[grid.idx(a, b)] == Mask::Boundary {
                            nb = true;
                        }
                    }
                }
                nb
            };
            if !near_boundary {
                continue;
            }
            let h2 = 2.0 * grid.h;
            let gx = (ubar.value(i + 1, j) - ubar.value(i - 1, j)) / h2;
            let gy = (ubar.value(i, j + 1) - ubar.value(i, j - 1)) / h2;
            min_grad = min_grad.min((gx * gx + gy * gy).sqrt());
        }
    }
    if min_grad < 1e-8 {
        return Err(Error::Regularity(format!(
            "|Du̲| = {min_grad:.3e} vanishes along Γ_ε; level set is not regular"
        )));
    }

    let gamma_points = level_crossings(ubar, eps);
    Ok(LevelSetDomain { eps, grid, mask, ties, gamma_points })
}

/// Closed convex boundary curve given by a dense sample of points in
/// positive orientation. Construction rejects nonconvex curves.
#[derive(Debug, Clone)]
pub struct ConvexBoundary {
    pub points: Vec<[f64; 2]>,
}

impl ConvexBoundary {
    pub fn new(points: Vec<[f64; 2]>) -> Result<ConvexBoundary> {
        if points.len() < 3 {
            return Err(Error::UnsupportedDomain("boundary needs at least 3 sample points".into()));
        }
        let m = points.len();
        let scale: f64 = points
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(0.0, f64::max);
        let tol = -1e-10 * scale * scale;
        for i in 0..m {
            let a = points[i];
            let b = points[(i + 1) % m];
            let c = points[(i + 2) % m];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross < tol {
                return Err(Error::UnsupportedDomain(
                    "boundary curve is not convex (negative turn detected)".into(),
                ));
            }
        }
        Ok(ConvexBoundary { points })
    }

    /// Circle of radius r sampled densely relative to spacing h.
    pub fn circle(r: f64, h: f64) -> ConvexBoundary {
        let m = ((4.0 * std::f64::consts::TAU * r / h).ceil() as usize).max(16);
        let points = (0..m)
            .map(|i| {
                let t = i as f64 / m as f64 * std::f64::consts::TAU;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        ConvexBoundary { points }
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        let m = self.points.len();
        for i in 0..m {
            let a = self.points[i];
            let b = self.points[(i + 1) % m];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
            if cross < 0.0 {
                return false;
            }
        }
        true
    }

    /// First exit of the ray p + t d, t ∈ (0, t_max], found by bisection on
    /// the inside indicator (valid because the domain is convex).
    fn ray_exit(&self, p: [f64; 2], d: [f64; 2], t_max: f64) -> Option<[f64; 2]> {
        if !self.contains(&p) {
            return None;
        }
        let outside_pt = [p[0] + t_max * d[0], p[1] + t_max * d[1]];
        if self.contains(&outside_pt) {
            return None;
        }
        let (mut lo, mut hi) = (0.0_f64, t_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.contains(&[p[0] + mid * d[0], p[1] + mid * d[1]]) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        Some([p[0] + t * d[0], p[1] + t * d[1]])
    }
}

/// The constancy/continuation solution pair:
/// V = convex envelope of g on Ω̄, and v = √(V − |x|²) where that is real.
#[derive(Debug, Clone)]
pub struct EnvelopeSolution {
    /// envelope of the boundary data (the transformed function V)
    pub v_big: GridField,
    /// v = √(max(V − |x|², 0))
    pub v_small: GridField,
}

/// Discrete convex envelope of boundary data g on a convex domain:
/// initialize from two-point boundary chords through each node, then relax
/// with directional midpoint bounds (Gauss–Seidel over a direction stencil)
/// until stationary. Exact for constant boundary data.
pub fn convex_envelope_solution(
    grid: &Grid,
    boundary: &ConvexBoundary,
    g: impl Fn(&[f64; 2]) -> f64,
) -> Result<EnvelopeSolution> {
    let h = grid.h;
    let mut mask = vec![Mask::Outside; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if boundary.contains(&grid.point(i, j)) {
                mask[grid.idx(i, j)] = Mask::Active;
            }
        }
    }
    if !mask.contains(&Mask::Active) {
        return Err(Error::Resolution("convex domain contains no grid nodes".into()));
    }
    let diam = 2.0 * h * (grid.nx.max(grid.ny) as f64);
    let dirs: [[isize; 2]; 8] =
        [[1, 0], [0, 1], [1, 1], [1, -1], [2, 1], [1, 2], [2, -1], [1, -2]];

    // chord pass: V(x) ≤ weighted mean of g at the two boundary hits of the
    // line through x in each direction
    let mut values = vec![f64::INFINITY; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if mask[idx] != Mask::Active {
                values[idx] = 0.0;
                continue;
            }
            let p = grid.point(i, j);
            for d in dirs {
                let dv = [d[0] as f64, d[1] as f64];
                let fwd = boundary.ray_exit(p, dv, diam);
                let bwd = boundary.ray_exit(p, [-dv[0], -dv[1]], diam);
                if let (Some(q_f), Some(q_b)) = (fwd, bwd) {
                    let a_f = ((q_f[0] - p[0]).powi(2) + (q_f[1] - p[1]).powi(2)).sqrt();
                    let a_b = ((q_b[0] - p[0]).powi(2) + (q_b[1] - p[1]).powi(2)).sqrt();
                    if a_f + a_b > 0.0 {
                        let bound = (a_b * g(&q_f) + a_f * g(&q_b)) / (a_f + a_b);
                        if bound < values[idx] {
                            values[idx] = bound;
                        }
                    }
                }
            }
        }
    }

    // midpoint relaxation to the discrete envelope fixed point
    let g_scale = boundary.points.iter().map(|p| g(p).abs()).fold(1.0, f64::max);
    let tol = 1e-13 * g_scale;
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;
    for _sweep in 0..20_000 {
        let mut change = 0.0_f64;
        let relax = |i: usize, j: usize, values: &mut Vec<f64>| {
            let idx = grid.idx(i, j);
            if mask[idx] != Mask::Active {
                return 0.0;
            }
            let p = grid.point(i, j);
            let mut best = values[idx];
            for d in dirs {
                let step = h * ((d[0] * d[0] + d[1] * d[1]) as f64).sqrt();
                let sample = |di: isize, dj: isize| -> Option<(f64, f64)> {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && b >= 0 && a < nx && b < ny
                        && mask[grid.idx(a as usize, b as usize)] == Mask::Active
                    {
                        Some((step, values[grid.idx(a as usize, b as usize)]))
                    } else {
                        let dv = [di as f64, dj as f64];
                        let q = boundary.ray_exit(p, dv, 2.0 * step / h)?;
                        let dist = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                        Some((dist, g(&q)))
                    }
                };
                if let (Some((a_f, v_f)), Some((a_b, v_b))) =
                    (sample(d[0], d[1]), sample(-d[0], -d[1]))
                {
                    if a_f + a_b > 0.0 {
                        let bound = (a_b * v_f + a_f * v_b) / (a_f + a_b);
                        if bound < best {
                            best = bound;
                        }
                    }
                }
            }
            let delta = values[idx] - best;
            values[idx] = best;
            delta
        };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                change = change.max(relax(i, j, &mut values));
            }
        }
        for j in (0..grid.ny).rev() {
            for i in (0..grid.nx).rev() {
                change = change.max(relax(i, j, &mut values));
            }
        }
        if change <= tol {
            break;
        }
    }

    let v_big = GridField { grid: *grid, values: values.clone(), mask: mask.clone() };
    let mut small = vec![0.0; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if mask[idx] == Mask::Active {
                let p = grid.point(i, j);
                let gap = values[idx] - (p[0] * p[0] + p[1] * p[1]);
                small[idx] = if gap > 0.0 { gap.sqrt() } else { 0.0 };
            }
        }
    }
    let v_small = GridField { grid: *grid, values: small, mask };
    Ok(EnvelopeSolution { v_big, v_small })
}

/// Which gap function certifies the nested inclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapKind {
    /// general path: gap = v² − u²
    Squared,
    /// transformed path (k = n): gap = V − U
    Transformed,
}

/// The three nested discrete domains at a fixed ε₀ with the measured
/// constants that certify strict inclusion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedDomains {
    pub kind: GapKind,
    /// node membership of Ω_{ε₀} = {u̲ > ε₀}
    pub omega_eps0: Vec<bool>,
    /// node membership of Ω^ε_{ε₀} = {x ∈ Ω_ε : gap > c}
    pub omega_eps_eps0: Vec<bool>,
    /// node membership of Ω̂_{ε₀} = {gap_u̲ ≥ c}
    pub omega_hat: Vec<bool>,
    /// largest dyadic 2^{-j} with min gap over Ω_{ε₀} ≥ τ r²
    pub tau: f64,
    /// grid distance from Ω_{ε₀} to Γ_{ε₀/2}
    pub r: f64,
    /// threshold c = τ r² / 2
    pub c: f64,
    /// δ(ε₀) = min u̲ over Ω̂_{ε₀}
    pub delta_eps0: f64,
}

/// Builds the nested domains from a gap comparison of the continuation
/// solution against the envelope pair. `upper` is v (Squared) or V
/// (Transformed); `lower` is the solution u^ε (resp. U^ε) extended by u̲
/// (resp. U̲) off its domain; `ubar` is the subsolution field.
pub fn nested_domains(
    kind: GapKind,
    upper: &GridField,
    lower: &GridField,
    ubar: &GridField,
    eps0: f64,
) -> Result<NestedDomains> {
    let grid = ubar.grid;
    let len = grid.len();
    if upper.values.len() != len || lower.values.len() != len {
        return Err(Error::Argument("nested_domains fields live on different grids".into()));
    }
    let gap_at = |idx: usize, low: &GridField| -> f64 {
        match kind {
            GapKind::Squared => {
                upper.values[idx] * upper.values[idx] - low.values[idx] * low.values[idx]
            }
            GapKind::Transformed => upper.values[idx] - low.values[idx],
        }
    };
    // the subsolution enters the transformed gap as U̲ = u̲² + |x|²
    let ubar_gap = match kind {
        GapKind::Squared => ubar.clone(),
        GapKind::Transformed => {
            let mut f = ubar.clone();
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let p = grid.point(i, j);
                    let idx = grid.idx(i, j);
                    f.values[idx] = ubar.values[idx] * ubar.values[idx] + p[0] * p[0] + p[1] * p[1];
                }
            }
            f
        }
    };

    // Restrict every nested region to nodes where the solved field supports
    // centered differences; rim nodes demoted from the solve would otherwise
    // enter the monitor domains without usable stencils.
    let mut stencil_ok = vec![false; len];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            stencil_ok[grid.idx(i, j)] = lower.has_full_stencil(i, j);
        }
    }

    let omega_eps0: Vec<bool> = (0..len)
        .map(|idx| ubar.values[idx] > eps0 && stencil_ok[idx])
        .collect();
    if !omega_eps0.contains(&true) {
        return Err(Error::Domain(format!("Ω at ε₀ = {eps0} is empty")));
    }

    // r = min distance from Ω_{ε₀} nodes to the ε₀/2 level set of u̲
    let gamma_half = level_crossings(ubar, eps0 / 2.0);
    if gamma_half.is_empty() {
        return Err(Error::Domain("Γ at ε₀/2 not resolved by the grid".into()));
    }
    let mut r = f64::INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !omega_eps0[grid.idx(i, j)] {
                continue;
            }
            let p = grid.point(i, j);
            for q in &gamma_half {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                if d < r {
                    r = d;
                }
            }
        }
    }

    // m = min gap over Ω_{ε₀}; τ = largest dyadic with m ≥ τ r²
    let mut m = f64::INFINITY;
    for idx in 0..len {
        if omega_eps0[idx] {
            m = m.min(gap_at(idx, lower));
        }
    }
    if m <= 0.0 {
        return Err(Error::DegenerateGap(format!(
            "gap minimum {m:.3e} over Ω at ε₀ is not positive"
        )));
    }
    // largest dyadic 2^j (j ∈ ℤ) with τ r² ≤ m, so c = τr²/2 ∈ (m/4, m/2]
    let mut tau = 2.0_f64.powi((m / (r * r)).log2().floor() as i32);
    while tau * r * r > m {
        tau /= 2.0;
        if tau < f64::MIN_POSITIVE * 1e10 {
            return Err(Error::DegenerateGap("no dyadic τ certifies the gap".into()));
        }
    }
    let c = tau * r * r / 2.0;

    // Ω^ε_{ε₀} = {x ∈ Ω_ε : gap > c}; membership in Ω_ε is realized as
    // availability of centered stencils on the solved field, and the gap
    // cutoff vanishes on the rest of the discrete boundary
    let omega_eps_eps0: Vec<bool> =
        (0..len).map(|idx| gap_at(idx, lower) > c && stencil_ok[idx]).collect();
    // Ω̂ is only ever read for values (δ(ε₀), inclusion checks), so it stays
    // ungated; gating it would empty the strict margin around Ω^ε_{ε₀} when
    // ε approaches ε₀/2.  The inclusion Ω^ε ⊂ Ω̂ rests on u ≥ u̲, which the
    // discrete solution satisfies only up to consistency error, so the gap
    // threshold gets an O(h²) slack.
    let slack = 4.0 * ubar.grid.h * ubar.grid.h;
    let omega_hat: Vec<bool> =
        (0..len).map(|idx| gap_at(idx, &ubar_gap) >= c - slack).collect();

    // strictness of the inclusions, node by node
    for idx in 0..len {
        if omega_eps0[idx] && !omega_eps_eps0[idx] {
            return Err(Error::DegenerateGap("Ω_{ε₀} ⊄ Ω^ε_{ε₀}".into()));
        }
        if omega_eps_eps0[idx] && !omega_hat[idx] {
            return Err(Error::DegenerateGap("Ω^ε_{ε₀} ⊄ Ω̂_{ε₀}".into()));
        }
    }
    let strictly_larger = |inner: &[bool], outer: &[bool]| {
        outer.iter().zip(inner).any(|(&o, &i)| o && !i)
    };
    if !strictly_larger(&omega_eps0, &omega_eps_eps0)
        || !strictly_larger(&omega_eps_eps0, &omega_hat)
    {
        return Err(Error::DegenerateGap("nested inclusions are not strict".into()));
    }

    let mut delta_eps0 = f64::INFINITY;
    for idx in 0..len {
        if omega_hat[idx] {
            delta_eps0 = delta_eps0.min(ubar.values[idx]);
        }
    }
    if !(delta_eps0 > 0.0) {
        return Err(Error::DegenerateGap(format!(
            "δ(ε₀) = {delta_eps0:.3e} is not positive: Ω̂ leaks past u̲ = 0"
        )));
    }

    Ok(NestedDomains { kind, omega_eps0, omega_eps_eps0, omega_hat, tau, r, c, delta_eps0 })
}
