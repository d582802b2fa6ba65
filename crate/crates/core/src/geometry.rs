//! Resonator arrangements and their isometry permutations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Period of the supercell chain along x.
pub const LATTICE_PERIOD: f64 = 1.732_050_807_568_877_2;

/// Dilute scale used when a structure is built without an explicit one.
pub const DEFAULT_GAMMA: f64 = 0.025;

pub const DEFAULT_RADIUS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Materials {
    /// Density contrast.
    pub delta: f64,
    pub kappa_r: f64,
    pub rho_r: f64,
    pub kappa_0: f64,
    pub rho_0: f64,
}

impl Default for Materials {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            kappa_r: 1.0,
            rho_r: 1.0,
            kappa_0: 1.0,
            rho_0: 1.0,
        }
    }
}

impl Materials {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta", self.delta),
            ("kappa_r", self.kappa_r),
            ("rho_r", self.rho_r),
            ("kappa_0", self.kappa_0),
            ("rho_0", self.rho_0),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Whether the contrast is small enough for the capacitance reduction.
    pub fn is_subwavelength(&self) -> bool {
        self.delta <= 1e-2
    }
}

/// How a system was generated. Downstream code uses this to pick edge
/// windows and phase layouts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    #[default]
    Custom,
    SupercellChain {
        cells: usize,
    },
    SshChain {
        resonators: usize,
        cell: usize,
    },
    MirrorInterface {
        cells: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSystem {
    pub centers: Vec<[f64; 3]>,
    pub radius: f64,
    pub gamma: f64,
    #[serde(default)]
    pub materials: Materials,
    #[serde(default)]
    pub layout: Layout,
}

impl ResonatorSystem {
    pub fn new(centers: Vec<[f64; 3]>, radius: f64, gamma: f64, materials: Materials) -> Result<Self> {
        let system = Self {
            centers,
            radius,
            gamma,
            materials,
            layout: Layout::Custom,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.centers.is_empty() {
            return Err(Error::InvalidArgument("system has no resonators".into()));
        }
        if self.centers.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite center coordinate".into()));
        }
        self.materials.validate()?;
        check_disjoint(&self.centers, self.radius)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_materials(mut self, materials: Materials) -> Self {
        self.materials = materials;
        self
    }

    /// Volume of a single resonator.
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    /// Prefactor `delta * kappa_r / (rho_r * |D|)` turning capacitance
    /// eigenvalues into squared frequencies.
    pub fn stiffness(&self) -> f64 {
        self.materials.delta * self.materials.kappa_r / (self.materials.rho_r * self.volume())
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.len() as f64;
        let mut g = [0.0; 3];
        for c in &self.centers {
            for k in 0..3 {
                g[k] += c[k];
            }
        }
        g.map(|x| x / n)
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(distance(&self.centers[i], &self.centers[j]));
            }
        }
        best
    }

    /// Largest distance of a center from the centroid.
    pub fn extent(&self) -> f64 {
        let g = self.centroid();
        self.centers.iter().map(|c| distance(c, &g)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let system: Self = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        system.validate()?;
        Ok(system)
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn check_disjoint(centers: &[[f64; 3]], radius: f64) -> Result<()> {
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = distance(&centers[i], &centers[j]);
            if d == 0.0 {
                return Err(Error::DegenerateGeometry { i, j });
            }
            if d <= 2.0 * radius {
                return Err(Error::Overlap {
                    i,
                    j,
                    distance: d,
                    limit: 2.0 * radius,
                });
            }
        }
    }
    Ok(())
}

/// The six centers of the unit supercell: two trimers around
/// `(sqrt3/2, 1/2)` and `(sqrt3, 1)`.
pub fn supercell_centers(radius: f64) -> [[f64; 3]; 6] {
    let s3 = LATTICE_PERIOD;
    let first = [s3 / 2.0, 0.5];
    let second = [s3, 1.0];
    let arm = 3.0 * radius;
    let place = |origin: [f64; 2], angle: f64| [origin[0] + arm * angle.cos(), origin[1] + arm * angle.sin(), 0.0];
    [
        place(first, 5.0 * PI / 6.0),
        place(first, 3.0 * PI / 2.0),
        place(first, PI / 6.0),
        place(second, 7.0 * PI / 6.0),
        place(second, PI / 2.0),
        place(second, 11.0 * PI / 6.0),
    ]
}

/// `cells` supercells side by side, enumerated left to right.
pub fn build_supercell_chain(cells: usize, radius: f64) -> Result<ResonatorSystem> {
    if cells < 1 {
        return Err(Error::InvalidArgument("a supercell chain needs at least one cell".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let base = supercell_centers(radius);
    let mut centers = Vec::with_capacity(6 * cells);
    for j in 0..cells {
        let shift = j as f64 * LATTICE_PERIOD;
        centers.extend(base.iter().map(|c| [c[0] + shift, c[1], c[2]]));
    }
    let mut system = ResonatorSystem::new(centers, radius, DEFAULT_GAMMA, Materials::default())?;
    system.layout = Layout::SupercellChain { cells };
    Ok(system)
}

/// Collinear chain with trimers mirrored about a single middle resonator.
///
/// Gaps are surface-to-surface distances, so neighbouring centers sit
/// `2R + gap` apart.
pub fn build_ssh_chain(resonators: usize, intra_gap: f64, inter_gap: f64, radius: f64) -> Result<ResonatorSystem> {
    build_ssh_chain_cells(resonators, 3, intra_gap, inter_gap, radius)
}

/// Like [`build_ssh_chain`] with an arbitrary cell size (2 gives the dimer
/// chain). Requires `resonators = 2 * cell * k + 1`.
pub fn build_ssh_chain_cells(
    resonators: usize,
    cell: usize,
    intra_gap: f64,
    inter_gap: f64,
    radius: f64,
) -> Result<ResonatorSystem> {
    if cell < 1 {
        return Err(Error::InvalidArgument("cell size must be positive".into()));
    }
    if resonators % (2 * cell) != 1 {
        return Err(Error::Parity { n: resonators });
    }
    if !(intra_gap > 0.0 && inter_gap > 0.0) {
        return Err(Error::InvalidArgument("gaps must be positive".into()));
    }
    let half = (resonators - 1) / 2;
    let intra = 2.0 * radius + intra_gap;
    let inter = 2.0 * radius + inter_gap;
    // Offsets of the right half measured from the middle resonator; the
    // middle resonator is weakly coupled to both sides.
    let mut offsets = Vec::with_capacity(half);
    let mut x = 0.0;
    for k in 0..half {
        x += if k % cell == 0 { inter } else { intra };
        offsets.push(x);
    }
    let mut xs: Vec<f64> = offsets.iter().rev().map(|o| -o).collect();
    xs.push(0.0);
    xs.extend(offsets.iter().copied());
    let x0 = xs[0];
    let centers = xs.into_iter().map(|x| [x - x0, 0.0, 0.0]).collect();
    let mut system = ResonatorSystem::new(centers, radius, DEFAULT_GAMMA, Materials::default())?;
    system.layout = Layout::SshChain { resonators, cell };
    Ok(system)
}

/// x coordinate of the interface plane for an `cells`-cell mirror interface.
pub fn interface_plane(cells: usize) -> f64 {
    cells as f64 * LATTICE_PERIOD + LATTICE_PERIOD / 4.0
}

/// A supercell chain followed by its mirror image about a vertical plane
/// just past its right edge. The mirrored half is enumerated left to right,
/// so resonator `N - 1 - i` is the image of resonator `i`.
pub fn build_mirror_interface(cells: usize, radius: f64) -> Result<ResonatorSystem> {
    let chain = build_supercell_chain(cells, radius)?;
    let plane = interface_plane(cells);
    let mut centers = chain.centers.clone();
    centers.extend(chain.centers.iter().rev().map(|c| [2.0 * plane - c[0], c[1], c[2]]));
    let mut system = ResonatorSystem::new(centers, radius, chain.gamma, chain.materials)?;
    system.layout = Layout::MirrorInterface { cells };
    Ok(system)
}

/// Planar isometry acting on the x-y coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Isometry {
    Identity,
    /// Rotation about a vertical axis through `center`.
    Rotation { center: [f64; 2], angle: f64 },
    /// Reflection about the vertical plane through `point` whose trace in
    /// the plane has direction angle `angle`.
    Reflection { point: [f64; 2], angle: f64 },
}

impl Isometry {
    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        match *self {
            Isometry::Identity => *p,
            Isometry::Rotation { center, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                [center[0] + c * dx - s * dy, center[1] + s * dx + c * dy, p[2]]
            }
            Isometry::Reflection { point, angle } => {
                let (s, c) = (2.0 * angle).sin_cos();
                let (dx, dy) = (p[0] - point[0], p[1] - point[1]);
                [point[0] + c * dx + s * dy, point[1] + s * dx - c * dy, p[2]]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryPermutation {
    /// `permutation[i]` is the (0-based) index of the image of resonator `i`.
    pub permutation: Vec<usize>,
    pub isometry: Isometry,
    /// Largest distance between a mapped center and its matched partner.
    pub deviation: f64,
}

impl SymmetryPermutation {
    pub fn identity(n: usize) -> Self {
        Self {
            permutation: (0..n).collect(),
            isometry: Isometry::Identity,
            deviation: 0.0,
        }
    }

    /// Build from 1-based cycles, e.g. `&[&[1, 2], &[5, 6]]`.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut permutation: Vec<usize> = (0..n).collect();
        for cycle in cycles {
            for (k, &a) in cycle.iter().enumerate() {
                let b = cycle[(k + 1) % cycle.len()];
                if a == 0 || a > n || b == 0 || b > n {
                    return Err(Error::InvalidArgument(format!("cycle entry out of range 1..={n}")));
                }
                permutation[a - 1] = b - 1;
            }
        }
        let mut seen = vec![false; n];
        for &p in &permutation {
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("cycles do not form a permutation".into()));
            }
        }
        Ok(Self {
            permutation,
            isometry: Isometry::Identity,
            deviation: f64::NAN,
        })
    }

    /// The reversal `i -> N - 1 - i`.
    pub fn reversal(n: usize) -> Self {
        Self {
            permutation: (0..n).rev().collect(),
            isometry: Isometry::Identity,
            deviation: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn is_involution(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| self.permutation[p] == i)
    }

    pub fn fixed_points(&self) -> usize {
        self.permutation.iter().enumerate().filter(|(i, p)| i == *p).count()
    }

    /// Cycle notation with 1-based labels, fixed points omitted.
    pub fn cycles(&self) -> String {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = String::new();
        for start in 0..n {
            if seen[start] || self.permutation[start] == start {
                continue;
            }
            let mut labels = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                labels.push((i + 1).to_string());
                i = self.permutation[i];
            }
            out.push('(');
            out.push_str(&labels.join(" "));
            out.push(')');
        }
        if out.is_empty() {
            out.push_str("()");
        }
        out
    }
}

/// Tolerance used to match mapped centers.
pub fn symmetry_tolerance(system: &ResonatorSystem) -> f64 {
    1e-12 * system.radius.max(system.extent())
}

/// Match every mapped center to an original one. Returns the permutation
/// and the worst mismatch, or `None` when some center has no partner.
fn induced_permutation(centers: &[[f64; 3]], iso: &Isometry, tol: f64) -> Option<(Vec<usize>, f64)> {
    let n = centers.len();
    let mut permutation = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut worst: f64 = 0.0;
    for (i, c) in centers.iter().enumerate() {
        let image = iso.apply(c);
        let (j, d) = centers
            .iter()
            .enumerate()
            .map(|(j, o)| (j, distance(&image, o)))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        if d > tol || taken[j] {
            return None;
        }
        taken[j] = true;
        permutation[i] = j;
        worst = worst.max(d);
    }
    Some((permutation, worst))
}

/// All center permutations induced by planar isometries through the
/// centroid.
///
/// Candidates are the half-turn, the two axis-aligned reflections, and
/// every rotation or reflection that sends the farthest center onto another
/// center at the same distance from the centroid. Each candidate is checked
/// by direct re-application, so the list is exact up to the tolerance.
pub fn enumerate_symmetries(system: &ResonatorSystem) -> Vec<SymmetryPermutation> {
    let n = system.len();
    let tol = symmetry_tolerance(system);
    let g = system.centroid();
    let center = [g[0], g[1]];
    let mut candidates = vec![
        Isometry::Rotation { center, angle: PI },
        Isometry::Reflection { point: center, angle: 0.0 },
        Isometry::Reflection {
            point: center,
            angle: PI / 2.0,
        },
    ];
    let planar = |c: &[f64; 3]| (c[0] - g[0], c[1] - g[1]);
    let radial = |c: &[f64; 3]| {
        let (x, y) = planar(c);
        x.hypot(y)
    };
    if let Some(reference) = system.centers.iter().max_by(|a, b| radial(a).total_cmp(&radial(b))) {
        let r0 = radial(reference);
        if r0 > tol {
            let (x0, y0) = planar(reference);
            let a0 = y0.atan2(x0);
            for c in &system.centers {
                if (radial(c) - r0).abs() > tol.max(1e-9 * r0) || (c[2] - reference[2]).abs() > tol {
                    continue;
                }
                let (x, y) = planar(c);
                let a = y.atan2(x);
                candidates.push(Isometry::Rotation { center, angle: a - a0 });
                candidates.push(Isometry::Reflection {
                    point: center,
                    angle: 0.5 * (a + a0),
                });
            }
        }
    }

    let mut found: Vec<SymmetryPermutation> = vec![SymmetryPermutation::identity(n)];
    for iso in candidates {
        if let Some((permutation, deviation)) = induced_permutation(&system.centers, &iso, tol) {
            if found.iter().any(|s| s.permutation == permutation) {
                continue;
            }
            found.push(SymmetryPermutation {
                permutation,
                isometry: iso,
                deviation,
            });
        }
    }
    found[1..].sort_by(|a, b| a.permutation.cmp(&b.permutation));
    found
}

/// Maximum distance between `iso(c_i)` and `c_{sigma(i)}`.
pub fn symmetry_deviation(system: &ResonatorSystem, sym: &SymmetryPermutation) -> f64 {
    system
        .centers
        .iter()
        .enumerate()
        .map(|(i, c)| distance(&sym.isometry.apply(c), &system.centers[sym.permutation[i]]))
        .fold(0.0, f64::max)
}
