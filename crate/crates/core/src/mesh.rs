//! Domain discretization: uniform interior grid on an interval (or an
//! axis-aligned box with a tensor grid), surrounded by a geometrically graded
//! exterior collocation layer, plus the enumeration of the element-pair
//! classes over which the nonlocal energy integrates.
//!
//! Pair classes are (interior × interior), (interior × exterior) and
//! (exterior × interior); a pair of two exterior elements never contributes.

use std::io::Write;

use crate::error::{Error, Result};
use crate::real::{real, Real};

/// Problem parameters: spatial dimension, fractional order `s`, exponent `p`.
/// The kernel normalizing constant is fixed to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracParams<T> {
    dim: usize,
    s: T,
    p: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseTag {
    /// `N < s·p` with `p ≥ 2`: sup-norm embedding regime.
    CaseI,
    /// `N ≥ s·p ≥ 1`: Lebesgue embedding regime.
    CaseII,
    Neither,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseTag::CaseI => write!(f, "case1"),
            CaseTag::CaseII => write!(f, "case2"),
            CaseTag::Neither => write!(f, "neither"),
        }
    }
}

impl<T: Real> FracParams<T> {
    pub fn new(dim: usize, s: T, p: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if dim > 2 {
            return Err(Error::InvalidInput(
                "only dimensions 1 and 2 are supported".into(),
            ));
        }
        if !(s > T::zero() && s < T::one()) {
            return Err(Error::InvalidInput(format!(
                "fractional order s must lie in (0,1), got {s}"
            )));
        }
        if !(p > T::one()) {
            return Err(Error::InvalidInput(format!("exponent p must exceed 1, got {p}")));
        }
        Ok(Self { dim, s, p })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn sp(&self) -> T {
        self.s * self.p
    }

    /// Kernel exponent `N + s·p`.
    pub fn kernel_exponent(&self) -> T {
        real::<T>(self.dim as f64) + self.sp()
    }

    /// Normalizing constant of the kernel; fixed to one throughout.
    pub fn normalizing_constant(&self) -> T {
        T::one()
    }

    /// `N·p / (N − p·s)` when `N > p·s`, `+∞` otherwise.
    pub fn critical_exponent(&self) -> T {
        let n = real::<T>(self.dim as f64);
        if n > self.sp() {
            n * self.p / (n - self.sp())
        } else {
            T::infinity()
        }
    }

    pub fn case_tag(&self) -> CaseTag {
        let n = real::<T>(self.dim as f64);
        let sp = self.sp();
        if n < sp && self.p >= real(2.0) {
            CaseTag::CaseI
        } else if n >= sp && sp >= T::one() {
            CaseTag::CaseII
        } else {
            CaseTag::Neither
        }
    }
}

/// Ω: an open interval or an open axis-aligned rectangle.
#[derive(Clone, Copy, Debug)]
pub enum Domain<T> {
    Interval { a: T, b: T },
    Rect { a: [T; 2], b: [T; 2] },
}

impl<T: Real> Domain<T> {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rect { .. } => 2,
        }
    }

    pub fn bounds(&self, axis: usize) -> (T, T) {
        match self {
            Domain::Interval { a, b } => (*a, *b),
            Domain::Rect { a, b } => (a[axis], b[axis]),
        }
    }

    pub fn measure(&self) -> T {
        match self {
            Domain::Interval { a, b } => *b - *a,
            Domain::Rect { a, b } => (b[0] - a[0]) * (b[1] - a[1]),
        }
    }

    pub fn diameter(&self) -> T {
        match self {
            Domain::Interval { a, b } => *b - *a,
            Domain::Rect { a, b } => {
                let dx = b[0] - a[0];
                let dy = b[1] - a[1];
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        for axis in 0..self.dim() {
            let (a, b) = self.bounds(axis);
            if !(b > a) {
                return Err(Error::InvalidInput(
                    "domain has nonpositive extent on an axis".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One tensor axis: sorted tick coordinates with the index range that spans Ω.
#[derive(Clone, Debug)]
pub struct Axis<T> {
    pub ticks: Vec<T>,
    /// Tick indices of the domain endpoints (inclusive).
    pub int_lo: usize,
    pub int_hi: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Element<T> {
    pub lo: [T; 2],
    pub hi: [T; 2],
    /// Node ids in tensor order; only the first `2^dim` entries are used.
    pub nodes: [usize; 4],
    pub interior: bool,
}

impl<T: Real> Element<T> {
    pub fn measure(&self, dim: usize) -> T {
        let mut m = T::one();
        for axis in 0..dim {
            m = m * (self.hi[axis] - self.lo[axis]);
        }
        m
    }

    pub fn size(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairClass {
    InteriorInterior,
    InteriorExterior,
    ExteriorInterior,
}

/// Immutable after construction; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    dim: usize,
    n: usize,
    axes: Vec<Axis<T>>,
    nodes: Vec<[T; 2]>,
    node_interior: Vec<bool>,
    elements: Vec<Element<T>>,
    omega_measure: T,
    diameter: T,
    r_ext: T,
    interior_h: T,
}

/// The first exterior element spans `diameter / EXT_BASE_DIV` regardless of
/// the interior resolution, so refining `n` leaves the exterior node set
/// unchanged and the discrete spaces nest.
const EXT_BASE_DIV: f64 = 64.0;
const EXT_RATIO: f64 = 1.5;

/// Builds the mesh: `n` uniform interior elements per axis plus a graded
/// exterior shell reaching `r_ext − diameter(Ω)` beyond each face.
pub fn build_mesh<T: Real>(domain: Domain<T>, n: usize, r_ext: T) -> Result<Mesh<T>> {
    domain.validate()?;
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "interior resolution must be at least 2, got {n}"
        )));
    }
    let diameter = domain.diameter();
    if !(r_ext > diameter) {
        return Err(Error::InvalidInput(format!(
            "truncation radius {r_ext} must exceed the domain diameter {diameter}"
        )));
    }
    let dim = domain.dim();
    let shell = r_ext - diameter;
    let base = diameter / real(EXT_BASE_DIV);

    let mut axes = Vec::with_capacity(dim);
    for axis in 0..dim {
        let (a, b) = domain.bounds(axis);
        let len = b - a;
        let mut ticks = Vec::new();
        let ext = graded_sizes(base, shell);
        // left shell, outermost first
        let mut pos = a;
        let mut left = Vec::with_capacity(ext.len());
        for s in &ext {
            pos = pos - *s;
            left.push(pos);
        }
        left.reverse();
        ticks.extend(left);
        let int_lo = ticks.len();
        for k in 0..=n {
            ticks.push(a + len * real::<T>(k as f64) / real(n as f64));
        }
        let int_hi = ticks.len() - 1;
        let mut pos = b;
        for s in &ext {
            pos = pos + *s;
            ticks.push(pos);
        }
        axes.push(Axis { ticks, int_lo, int_hi });
    }

    // nodes in tensor order: index = ix * ny + iy (1D: index = ix)
    let counts: Vec<usize> = axes.iter().map(|ax| ax.ticks.len()).collect();
    let total_nodes: usize = counts.iter().product();
    let mut nodes = Vec::with_capacity(total_nodes);
    let mut node_interior = Vec::with_capacity(total_nodes);
    if dim == 1 {
        for (i, &x) in axes[0].ticks.iter().enumerate() {
            nodes.push([x, T::zero()]);
            node_interior.push(i >= axes[0].int_lo && i <= axes[0].int_hi);
        }
    } else {
        for ix in 0..counts[0] {
            for iy in 0..counts[1] {
                nodes.push([axes[0].ticks[ix], axes[1].ticks[iy]]);
                let ok = ix >= axes[0].int_lo
                    && ix <= axes[0].int_hi
                    && iy >= axes[1].int_lo
                    && iy <= axes[1].int_hi;
                node_interior.push(ok);
            }
        }
    }

    let mut elements = Vec::new();
    if dim == 1 {
        for i in 0..counts[0] - 1 {
            let interior = i >= axes[0].int_lo && i + 1 <= axes[0].int_hi;
            elements.push(Element {
                lo: [axes[0].ticks[i], T::zero()],
                hi: [axes[0].ticks[i + 1], T::zero()],
                nodes: [i, i + 1, 0, 0],
                interior,
            });
        }
    } else {
        let ny = counts[1];
        for ix in 0..counts[0] - 1 {
            for iy in 0..counts[1] - 1 {
                let interior = ix >= axes[0].int_lo
                    && ix + 1 <= axes[0].int_hi
                    && iy >= axes[1].int_lo
                    && iy + 1 <= axes[1].int_hi;
                elements.push(Element {
                    lo: [axes[0].ticks[ix], axes[1].ticks[iy]],
                    hi: [axes[0].ticks[ix + 1], axes[1].ticks[iy + 1]],
                    nodes: [
                        ix * ny + iy,
                        (ix + 1) * ny + iy,
                        ix * ny + iy + 1,
                        (ix + 1) * ny + iy + 1,
                    ],
                    interior,
                });
            }
        }
    }

    let omega_measure = domain.measure();
    let interior_sum: T = elements
        .iter()
        .filter(|e| e.interior)
        .map(|e| e.measure(dim))
        .sum();
    let rel = ((interior_sum - omega_measure) / omega_measure).abs();
    if rel > real(1e-12) {
        return Err(Error::InvalidInput(format!(
            "interior elements fail to partition the domain (relative defect {rel})"
        )));
    }

    let (a0, b0) = domain.bounds(0);
    let interior_h = (b0 - a0) / real(n as f64);

    Ok(Mesh {
        dim,
        n,
        axes,
        nodes,
        node_interior,
        elements,
        omega_measure,
        diameter,
        r_ext,
        interior_h,
    })
}

fn graded_sizes<T: Real>(base: T, shell: T) -> Vec<T> {
    let ratio = real::<T>(EXT_RATIO);
    let mut sizes = vec![base];
    let mut sum = base;
    while sum < shell {
        let next = *sizes.last().unwrap() * ratio;
        sizes.push(next);
        sum += next;
    }
    let scale = shell / sum;
    for s in &mut sizes {
        *s = *s * scale;
    }
    sizes
}

impl<T: Real> Mesh<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_interior_node(&self, i: usize) -> bool {
        self.node_interior[i]
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| self.node_interior[i])
    }

    pub fn exterior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&i| !self.node_interior[i])
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn interior_elements(&self) -> impl Iterator<Item = &Element<T>> {
        self.elements.iter().filter(|e| e.interior)
    }

    pub fn omega_measure(&self) -> T {
        self.omega_measure
    }

    pub fn diameter(&self) -> T {
        self.diameter
    }

    pub fn r_ext(&self) -> T {
        self.r_ext
    }

    /// Uniform interior spacing along the first axis.
    pub fn interior_h(&self) -> T {
        self.interior_h
    }

    /// Width of the exterior shell beyond each face of Ω.
    pub fn shell_width(&self) -> T {
        self.r_ext - self.diameter
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    /// Ordered element pairs of the cross-shaped set, lexicographic, with no
    /// exterior×exterior pair.
    pub fn pairs(&self) -> Vec<(usize, usize, PairClass)> {
        let mut out = Vec::new();
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate() {
                let class = match (a.interior, b.interior) {
                    (true, true) => PairClass::InteriorInterior,
                    (true, false) => PairClass::InteriorExterior,
                    (false, true) => PairClass::ExteriorInterior,
                    (false, false) => continue,
                };
                out.push((i, j, class));
            }
        }
        out
    }

    /// Structural compatibility, used to detect mesh/function mismatches.
    pub fn compatible(&self, other: &Mesh<T>) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.nodes.len() == other.nodes.len()
            && self.elements.len() == other.elements.len()
            && self.r_ext == other.r_ext
    }

    /// CSV dump: node index, coordinates, interior flag.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if self.dim == 1 {
            writeln!(w, "node,x,interior")?;
            for (i, p) in self.nodes.iter().enumerate() {
                writeln!(w, "{},{},{}", i, p[0].as_f64(), self.node_interior[i] as u8)?;
            }
        } else {
            writeln!(w, "node,x,y,interior")?;
            for (i, p) in self.nodes.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    i,
                    p[0].as_f64(),
                    p[1].as_f64(),
                    self.node_interior[i] as u8
                )?;
            }
        }
        Ok(())
    }
}

/// Values of the multilinear shape functions at a local coordinate.
#[inline]
pub fn shape_values<T: Real>(dim: usize, local: [T; 2]) -> [T; 4] {
    if dim == 1 {
        [T::one() - local[0], local[0], T::zero(), T::zero()]
    } else {
        let (x, y) = (local[0], local[1]);
        [
            (T::one() - x) * (T::one() - y),
            x * (T::one() - y),
            (T::one() - x) * y,
            x * y,
        ]
    }
}

pub fn nodes_per_element(dim: usize) -> usize {
    1 << dim
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dim: usize, s: f64, p: f64) -> FracParams<f64> {
        FracParams::new(dim, s, p).unwrap()
    }

    #[test]
    fn critical_exponent_branches() {
        assert_eq!(params(2, 0.5, 2.0).critical_exponent(), 4.0);
        assert!(params(1, 0.5, 2.0).critical_exponent().is_infinite());
        assert!(params(1, 0.9, 3.0).critical_exponent().is_infinite());
    }

    #[test]
    fn case_tags() {
        assert_eq!(params(1, 0.8, 2.0).case_tag(), CaseTag::CaseI);
        assert_eq!(params(1, 0.5, 2.0).case_tag(), CaseTag::CaseII);
        assert_eq!(params(1, 0.3, 2.0).case_tag(), CaseTag::Neither);
    }

    #[test]
    fn case_tag_is_total() {
        for &dim in &[1usize, 2] {
            for s10 in 1..10 {
                for p10 in 11..40 {
                    let p = params(dim, s10 as f64 / 10.0, p10 as f64 / 10.0);
                    // exactly one tag
                    let tag = p.case_tag();
                    let n = dim as f64;
                    let sp = p.sp();
                    match tag {
                        CaseTag::CaseI => assert!(n < sp && p.p() >= 2.0),
                        CaseTag::CaseII => assert!(n >= sp && sp >= 1.0),
                        CaseTag::Neither => {
                            assert!(!(n < sp && p.p() >= 2.0) && !(n >= sp && sp >= 1.0))
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FracParams::new(1, 0.0, 2.0).is_err());
        assert!(FracParams::new(1, 1.0, 2.0).is_err());
        assert!(FracParams::new(1, 0.5, 1.0).is_err());
        assert!(FracParams::new(0, 0.5, 2.0).is_err());
    }

    #[test]
    fn unit_interval_mesh_matches_expected_grid() {
        let mesh = build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 4, 4.0).unwrap();
        let interior: Vec<f64> = mesh
            .interior_nodes()
            .map(|i| mesh.nodes()[i][0])
            .collect();
        assert_eq!(interior, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        for i in mesh.exterior_nodes() {
            let x = mesh.nodes()[i][0];
            assert!((x > -3.0 - 1e-12 && x < 0.0) || (x > 1.0 && x < 4.0 + 1e-12));
        }
        // outermost exterior nodes sit exactly at the shell boundary
        let xs: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo + 3.0).abs() < 1e-12);
        assert!((hi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_truncation_and_degenerate_domain() {
        assert!(build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 2, 0.5).is_err());
        assert!(build_mesh(Domain::Interval { a: 1.0, b: 1.0 }, 4, 4.0).is_err());
    }

    #[test]
    fn pair_enumeration_is_symmetric_with_no_exterior_pairs() {
        let mesh = build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 4, 3.0).unwrap();
        let pairs = mesh.pairs();
        use std::collections::HashSet;
        let set: HashSet<(usize, usize)> = pairs.iter().map(|&(a, b, _)| (a, b)).collect();
        assert_eq!(set.len(), pairs.len(), "each ordered pair appears once");
        for &(a, b, class) in &pairs {
            assert!(set.contains(&(b, a)), "mirror of ({a},{b}) missing");
            let (ia, ib) = (mesh.elements()[a].interior, mesh.elements()[b].interior);
            assert!(ia || ib);
            match class {
                PairClass::InteriorInterior => assert!(ia && ib),
                PairClass::InteriorExterior => assert!(ia && !ib),
                PairClass::ExteriorInterior => assert!(!ia && ib),
            }
        }
        let n_int = mesh.elements().iter().filter(|e| e.interior).count();
        let n_all = mesh.elements().len();
        let n_ext = n_all - n_int;
        assert_eq!(pairs.len(), n_all * n_all - n_ext * n_ext);
    }

    #[test]
    fn refinement_doubles_interior_elements_and_keeps_measure() {
        let coarse = build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 8, 3.0).unwrap();
        let fine = build_mesh(Domain::Interval { a: 0.0, b: 1.0 }, 16, 3.0).unwrap();
        let ci = coarse.elements().iter().filter(|e| e.interior).count();
        let fi = fine.elements().iter().filter(|e| e.interior).count();
        assert_eq!(fi, 2 * ci);
        assert_eq!(coarse.omega_measure(), fine.omega_measure());
        // exterior ticks do not depend on n
        let ext_coarse: Vec<f64> = coarse
            .exterior_nodes()
            .map(|i| coarse.nodes()[i][0])
            .collect();
        let ext_fine: Vec<f64> = fine.exterior_nodes().map(|i| fine.nodes()[i][0]).collect();
        assert_eq!(ext_coarse, ext_fine);
    }

    #[test]
    fn rect_mesh_partitions_measure() {
        let mesh = build_mesh(
            Domain::Rect {
                a: [0.0, 0.0],
                b: [1.0, 2.0],
            },
            3,
            4.0,
        )
        .unwrap();
        assert_eq!(mesh.dim(), 2);
        let sum: f64 = mesh.interior_elements().map(|e| e.measure(2)).sum();
        assert!((sum - 2.0).abs() < 1e-12);
        for i in mesh.exterior_nodes() {
            let p = mesh.nodes()[i];
            let inside = p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 2.0;
            assert!(!inside);
        }
    }
}
