//! Octahedron-seeded subdivision mesh on the unit sphere.
//!
//! Every level splits each triangle 1-to-4 at its edge midpoints and
//! projects the new vertices back onto the sphere. Vertices of level `j`
//! keep their indices at level `j + 1` ("even" vertices); new vertices are
//! appended after them ("odd" vertices).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::sphere::angle_between;

pub type Vertex = Vector3<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshLevel {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[usize; 3]>,
    /// For each odd vertex (index `V_{j-1} + i`), the two coarse endpoints
    /// of the edge it bisects. Empty at level 0.
    pub parent_edge: Vec<(usize, usize)>,
}

impl MeshLevel {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Text export: `v x y z` lines followed by `f i j k` lines (0-based).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    /// Parses the text export back into vertices and triangles.
    pub fn parse_text(text: &str) -> Result<(Vec<Vertex>, Vec<[usize; 3]>)> {
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.first() {
                None => continue,
                Some(&"v") if f.len() == 4 => {
                    let mut c = [0.0; 3];
                    for k in 0..3 {
                        c[k] = f[k + 1]
                            .parse()
                            .map_err(|_| Error::parse(i + 1, "bad vertex coordinate"))?;
                    }
                    verts.push(Vector3::new(c[0], c[1], c[2]));
                }
                Some(&"f") if f.len() == 4 => {
                    let mut c = [0usize; 3];
                    for k in 0..3 {
                        c[k] = f[k + 1]
                            .parse()
                            .map_err(|_| Error::parse(i + 1, "bad face index"))?;
                    }
                    tris.push(c);
                }
                _ => return Err(Error::parse(i + 1, "expected `v x y z` or `f i j k`")),
            }
        }
        Ok((verts, tris))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubdivisionMesh {
    levels: Vec<MeshLevel>,
}

/// Octahedron with vertices front, left, back, right, top, bottom.
fn octahedron() -> MeshLevel {
    let vertices = vec![
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(-1.0, 0.0, 0.0),
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.0, 0.0, -1.0),
    ];
    // counterclockwise seen from outside
    let triangles = vec![
        [0, 1, 4],
        [1, 2, 4],
        [2, 3, 4],
        [3, 0, 4],
        [1, 0, 5],
        [2, 1, 5],
        [3, 2, 5],
        [0, 3, 5],
    ];
    MeshLevel {
        vertices,
        triangles,
        parent_edge: Vec::new(),
    }
}

fn subdivide(coarse: &MeshLevel) -> MeshLevel {
    let mut vertices = coarse.vertices.clone();
    let mut parent_edge = Vec::new();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vertex>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let m = (vertices[key.0] + vertices[key.1]).normalize();
            vertices.push(m);
            parent_edge.push(key);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(coarse.triangles.len() * 4);
    for &[a, b, c] in &coarse.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([b, bc, ab]);
        triangles.push([c, ca, bc]);
        triangles.push([ab, bc, ca]);
    }
    MeshLevel {
        vertices,
        triangles,
        parent_edge,
    }
}

/// Builds a mesh with `levels + 1` levels (0..=levels).
pub fn build_mesh(levels: usize) -> SubdivisionMesh {
    let mut out = vec![octahedron()];
    for _ in 0..levels {
        let next = subdivide(out.last().expect("non-empty"));
        out.push(next);
    }
    SubdivisionMesh { levels: out }
}

impl SubdivisionMesh {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &MeshLevel {
        &self.levels[j]
    }

    pub fn try_level(&self, j: usize) -> Result<&MeshLevel> {
        self.levels.get(j).ok_or(Error::LevelOutOfRange {
            level: j,
            max: self.max_level(),
        })
    }

    pub fn levels(&self) -> &[MeshLevel] {
        &self.levels
    }

    pub fn vertex_count(&self, j: usize) -> usize {
        self.levels[j].vertex_count()
    }

    pub fn vertex_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.vertex_count()).collect()
    }

    /// Writes `level_<j>.txt` for every level into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (j, l) in self.levels.iter().enumerate() {
            std::fs::write(dir.join(format!("level_{j}.txt")), l.to_text())?;
        }
        Ok(())
    }

    /// Reads a directory written by [`SubdivisionMesh::save`]. The mesh is
    /// rebuilt deterministically and checked against the stored geometry.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut n = 0;
        while dir.join(format!("level_{n}.txt")).exists() {
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidArgument(format!(
                "no level_0.txt in {}",
                dir.display()
            )));
        }
        let mesh = build_mesh(n - 1);
        for j in 0..n {
            let text = std::fs::read_to_string(dir.join(format!("level_{j}.txt")))?;
            let (verts, tris) = MeshLevel::parse_text(&text)?;
            let l = mesh.level(j);
            let same = verts.len() == l.vertices.len()
                && tris == l.triangles
                && verts
                    .iter()
                    .zip(&l.vertices)
                    .all(|(a, b)| (a - b).amax() < 1e-12);
            if !same {
                return Err(Error::InvalidArgument(format!(
                    "level {j} in {} is not an octahedral subdivision mesh",
                    dir.display()
                )));
            }
        }
        Ok(mesh)
    }
}

/// v/f/e neighbourhoods of one odd vertex, as coarse vertex indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OddNeighbors {
    pub vertex: usize,
    pub v: [usize; 2],
    pub f: [usize; 2],
    /// Butterfly wing vertices. On the level-0 octahedron the wings wrap
    /// around and each of the two remaining vertices appears twice.
    pub e: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSets {
    pub level: usize,
    pub coarse_count: usize,
    pub odd: Vec<OddNeighbors>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NeighborClass {
    /// The coarse vertex itself (same index at the fine level).
    Itself,
    V,
    F,
    E,
    Rest,
}

impl NeighborSets {
    pub fn get(&self, odd_vertex: usize) -> &OddNeighbors {
        &self.odd[odd_vertex - self.coarse_count]
    }

    /// Odd vertices that have coarse vertex `k` in their v set.
    pub fn incident_odd(&self, k: usize) -> Vec<usize> {
        self.odd
            .iter()
            .filter(|o| o.v.contains(&k))
            .map(|o| o.vertex)
            .collect()
    }

    /// Class of fine vertex `l` relative to coarse vertex `k`.
    pub fn classify(&self, k: usize, l: usize) -> NeighborClass {
        if l < self.coarse_count {
            return if l == k {
                NeighborClass::Itself
            } else {
                NeighborClass::Rest
            };
        }
        let o = self.get(l);
        if o.v.contains(&k) {
            NeighborClass::V
        } else if o.f.contains(&k) {
            NeighborClass::F
        } else if o.e.contains(&k) {
            NeighborClass::E
        } else {
            NeighborClass::Rest
        }
    }
}

fn sort_by_distance(from: &Vertex, idx: &mut [usize], verts: &[Vertex]) {
    idx.sort_by(|&a, &b| {
        let da = angle_between(from, &verts[a]);
        let db = angle_between(from, &verts[b]);
        da.partial_cmp(&db)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
}

/// Neighbourhoods of the odd vertices at `level` (≥ 1) with respect to the
/// coarse mesh at `level - 1`.
pub fn neighbor_sets(mesh: &SubdivisionMesh, level: usize) -> Result<NeighborSets> {
    if level == 0 || level > mesh.max_level() {
        return Err(Error::LevelOutOfRange {
            level,
            max: mesh.max_level(),
        });
    }
    let coarse = mesh.level(level - 1);
    let fine = mesh.level(level);
    // edge -> opposite vertices of the (two) faces sharing it
    let mut opposite: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &[a, b, c] in &coarse.triangles {
        for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
            opposite.entry((p.min(q), p.max(q))).or_default().push(r);
        }
    }
    let other = |p: usize, q: usize, not: usize| -> usize {
        let ops = &opposite[&(p.min(q), p.max(q))];
        *ops.iter().find(|&&x| x != not).unwrap_or(&ops[0])
    };
    let nc = coarse.vertex_count();
    let mut odd = Vec::with_capacity(fine.parent_edge.len());
    for (i, &(a, b)) in fine.parent_edge.iter().enumerate() {
        let m = nc + i;
        let pos = &fine.vertices[m];
        let ops = &opposite[&(a, b)];
        let mut v = [a, b];
        let mut f = [ops[0], ops[1]];
        let mut e = [
            other(a, f[0], b),
            other(b, f[0], a),
            other(a, f[1], b),
            other(b, f[1], a),
        ];
        sort_by_distance(pos, &mut v, &fine.vertices);
        sort_by_distance(pos, &mut f, &fine.vertices);
        sort_by_distance(pos, &mut e, &fine.vertices);
        odd.push(OddNeighbors { vertex: m, v, f, e });
    }
    Ok(NeighborSets {
        level,
        coarse_count: nc,
        odd,
    })
}

/// The 48 signed permutation matrices of the octahedral group.
pub fn octahedral_group() -> Vec<Matrix3<f64>> {
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::with_capacity(48);
    for p in perms {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (row, &col) in p.iter().enumerate() {
                m[(row, col)] = if signs & (1 << row) != 0 { -1.0 } else { 1.0 };
            }
            out.push(m);
        }
    }
    out
}

/// Index of the vertex at `pos`, using a coordinate hash.
struct VertexLookup {
    map: HashMap<[i64; 3], usize>,
}

impl VertexLookup {
    const SCALE: f64 = 1e7;

    fn new(verts: &[Vertex]) -> Self {
        let map = verts
            .iter()
            .enumerate()
            .map(|(i, v)| (Self::key(v), i))
            .collect();
        Self { map }
    }

    fn key(v: &Vertex) -> [i64; 3] {
        [
            (v.x * Self::SCALE).round() as i64,
            (v.y * Self::SCALE).round() as i64,
            (v.z * Self::SCALE).round() as i64,
        ]
    }

    fn find(&self, v: &Vertex) -> Option<usize> {
        self.map.get(&Self::key(v)).copied()
    }
}

/// Vertex permutation induced by an orthogonal map at one level:
/// `perm[i]` is the index of `g · v_i`.
pub fn vertex_permutation(level: &MeshLevel, g: &Matrix3<f64>) -> Result<Vec<usize>> {
    let lookup = VertexLookup::new(&level.vertices);
    level
        .vertices
        .iter()
        .map(|v| {
            lookup.find(&(g * v)).ok_or_else(|| {
                Error::InvalidArgument("mesh is not invariant under the symmetry".into())
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitMember {
    pub vertex: usize,
    /// Index into [`octahedral_group`] of an element mapping the
    /// representative onto this member.
    pub group_element: usize,
    /// Permutation of level-j vertices induced by that element.
    pub coarse_perm: Vec<usize>,
    /// Permutation of level-(j+1) vertices induced by that element.
    pub fine_perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub representative: usize,
    pub members: Vec<OrbitMember>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOrbits {
    /// Coarse level j; the fine level is j + 1.
    pub coarse_level: usize,
    pub orbits: Vec<Orbit>,
    /// orbit index of every coarse vertex
    pub orbit_of: Vec<usize>,
    /// For each orbit representative, fine vertices grouped by class.
    pub column_groups: Vec<Vec<(NeighborClass, Vec<usize>)>>,
}

impl SymmetryOrbits {
    pub fn member(&self, k: usize) -> &OrbitMember {
        let orbit = &self.orbits[self.orbit_of[k]];
        orbit
            .members
            .iter()
            .find(|m| m.vertex == k)
            .expect("vertex belongs to its orbit")
    }
}

/// Orbits of the level-(`level`-1) vertices under the octahedral group,
/// with the permutations relating each member to its representative.
pub fn symmetry_orbits(mesh: &SubdivisionMesh, level: usize) -> Result<SymmetryOrbits> {
    let ns = neighbor_sets(mesh, level)?;
    let coarse = mesh.level(level - 1);
    let fine = mesh.level(level);
    let group = octahedral_group();
    let coarse_perms: Vec<Vec<usize>> = group
        .iter()
        .map(|g| vertex_permutation(coarse, g))
        .collect::<Result<_>>()?;
    let fine_perms: Vec<Vec<usize>> = group
        .iter()
        .map(|g| vertex_permutation(fine, g))
        .collect::<Result<_>>()?;
    let nc = coarse.vertex_count();
    let mut orbit_of = vec![usize::MAX; nc];
    let mut orbits = Vec::new();
    for rep in 0..nc {
        if orbit_of[rep] != usize::MAX {
            continue;
        }
        let id = orbits.len();
        let mut members: Vec<OrbitMember> = Vec::new();
        for (gi, cp) in coarse_perms.iter().enumerate() {
            let img = cp[rep];
            if orbit_of[img] == usize::MAX {
                orbit_of[img] = id;
                members.push(OrbitMember {
                    vertex: img,
                    group_element: gi,
                    coarse_perm: cp.clone(),
                    fine_perm: fine_perms[gi].clone(),
                });
            }
        }
        members.sort_by_key(|m| m.vertex);
        orbits.push(Orbit {
            representative: rep,
            members,
        });
    }
    let column_groups = orbits
        .iter()
        .map(|o| {
            let k = o.representative;
            let mut groups: Vec<(NeighborClass, Vec<usize>)> = Vec::new();
            for class in [
                NeighborClass::Itself,
                NeighborClass::V,
                NeighborClass::F,
                NeighborClass::E,
                NeighborClass::Rest,
            ] {
                let cols: Vec<usize> = (0..fine.vertex_count())
                    .filter(|&l| ns.classify(k, l) == class)
                    .collect();
                if !cols.is_empty() {
                    groups.push((class, cols));
                }
            }
            groups
        })
        .collect();
    Ok(SymmetryOrbits {
        coarse_level: level - 1,
        orbits,
        orbit_of,
        column_groups,
    })
}

/// Area of the spherical triangle (a, b, c), signed by orientation.
pub fn spherical_triangle_area(a: &Vertex, b: &Vertex, c: &Vertex) -> f64 {
    let num = a.dot(&b.cross(c));
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AreaMethod {
    /// Spherical Voronoi cells from triangle circumcentres.
    #[default]
    Voronoi,
    /// One third of the incident triangle areas.
    Barycentric,
}

/// Per-vertex cell areas at `level`; they sum to 4π.
pub fn vertex_areas(
    mesh: &SubdivisionMesh,
    level: usize,
    method: AreaMethod,
) -> Result<DVector<f64>> {
    let l = mesh.try_level(level)?;
    let n = l.vertex_count();
    let v = &l.vertices;
    let mut areas = DVector::zeros(n);
    match method {
        AreaMethod::Barycentric => {
            for &[a, b, c] in &l.triangles {
                let t = spherical_triangle_area(&v[a], &v[b], &v[c]) / 3.0;
                areas[a] += t;
                areas[b] += t;
                areas[c] += t;
            }
        }
        AreaMethod::Voronoi => {
            // Each triangle contributes, for each of its corners, the two
            // sub-triangles (vertex, edge-midpoint, circumcentre).
            for &[a, b, c] in &l.triangles {
                let cc = (v[b] - v[a]).cross(&(v[c] - v[a])).normalize();
                for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
                    let mpq = (v[p] + v[q]).normalize();
                    let mrp = (v[r] + v[p]).normalize();
                    areas[p] += spherical_triangle_area(&v[p], &mpq, &cc)
                        + spherical_triangle_area(&v[p], &cc, &mrp);
                }
            }
        }
    }
    Ok(areas)
}

pub const FULL_SPHERE: f64 = 4.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts_and_euler() {
        let m = build_mesh(3);
        assert_eq!(m.vertex_counts(), vec![6, 18, 66, 258]);
        assert_eq!(m.level(0).triangles.len(), 8);
        assert_eq!(m.level(0).edges().len(), 12);
        for l in m.levels() {
            assert_eq!(l.euler_characteristic(), 2);
            assert!(l.vertices.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn even_vertices_are_stable() {
        let m = build_mesh(3);
        for j in 0..3 {
            let (a, b) = (m.level(j), m.level(j + 1));
            assert_eq!(&b.vertices[..a.vertex_count()], a.vertices.as_slice());
        }
    }

    #[test]
    fn neighbor_sets_shapes_and_ordering() {
        let m = build_mesh(3);
        for level in 1..=3 {
            let ns = neighbor_sets(&m, level).unwrap();
            let fine = m.level(level);
            assert_eq!(ns.odd.len(), fine.vertex_count() - ns.coarse_count);
            for (i, o) in ns.odd.iter().enumerate() {
                let pe = fine.parent_edge[i];
                let mut v = o.v;
                v.sort();
                assert_eq!((v[0], v[1]), pe);
                for x in o.v {
                    assert!(!o.f.contains(&x) && !o.e.contains(&x));
                }
                for x in o.f {
                    assert!(!o.e.contains(&x));
                }
                let p = &fine.vertices[o.vertex];
                let dmax_v =
                    o.v.iter()
                        .map(|&k| angle_between(p, &fine.vertices[k]))
                        .fold(0.0, f64::max);
                let dmin_f =
                    o.f.iter()
                        .map(|&k| angle_between(p, &fine.vertices[k]))
                        .fold(f64::INFINITY, f64::min);
                assert!(dmax_v < dmin_f);
            }
        }
    }

    #[test]
    fn wing_vertex_multiplicity() {
        let m = build_mesh(3);
        let ns = neighbor_sets(&m, 1).unwrap();
        for o in &ns.odd {
            let mut e = o.e.to_vec();
            e.sort();
            e.dedup();
            assert_eq!(e.len(), 2);
        }
        // Around a valence-4 vertex the two wings on that side coincide.
        for level in 2..=3 {
            for o in &neighbor_sets(&m, level).unwrap().odd {
                let mut e = o.e.to_vec();
                e.sort();
                e.dedup();
                let at_original = o.v.iter().any(|&v| v < 6);
                assert_eq!(e.len(), if at_original { 3 } else { 4 });
            }
        }
    }

    #[test]
    fn valences() {
        let m = build_mesh(2);
        let ns1 = neighbor_sets(&m, 1).unwrap();
        for k in 0..6 {
            assert_eq!(ns1.incident_odd(k).len(), 4);
        }
        let ns2 = neighbor_sets(&m, 2).unwrap();
        for k in 0..18 {
            let expected = if k < 6 { 4 } else { 6 };
            assert_eq!(ns2.incident_odd(k).len(), expected);
        }
    }

    #[test]
    fn orbits_level_one() {
        let m = build_mesh(2);
        let o = symmetry_orbits(&m, 1).unwrap();
        assert_eq!(o.orbits.len(), 1);
        assert_eq!(o.orbits[0].members.len(), 6);
        let o2 = symmetry_orbits(&m, 2).unwrap();
        let mut sizes: Vec<usize> = o2.orbits.iter().map(|o| o.members.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![6, 12]);
        for orbit in &o2.orbits {
            assert_eq!(48 % orbit.members.len(), 0);
        }
    }

    #[test]
    fn orbit_permutations_match_geometry() {
        let m = build_mesh(2);
        let group = octahedral_group();
        for level in 1..=2 {
            let o = symmetry_orbits(&m, level).unwrap();
            let fine = m.level(level);
            for orbit in &o.orbits {
                for mem in &orbit.members {
                    let g = &group[mem.group_element];
                    assert_eq!(mem.coarse_perm[orbit.representative], mem.vertex);
                    for (i, &pi) in mem.fine_perm.iter().enumerate() {
                        assert!((g * fine.vertices[i] - fine.vertices[pi]).amax() < 1e-9);
                    }
                    let mut sorted = mem.fine_perm.clone();
                    sorted.sort();
                    assert_eq!(sorted, (0..fine.vertex_count()).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn areas_sum_to_sphere_and_respect_symmetry() {
        let m = build_mesh(3);
        for method in [AreaMethod::Voronoi, AreaMethod::Barycentric] {
            for j in 0..=3 {
                let a = vertex_areas(&m, j, method).unwrap();
                assert!((a.sum() - FULL_SPHERE).abs() < 1e-6);
                assert!(a.iter().all(|&x| x > 0.0));
            }
        }
        let a0 = vertex_areas(&m, 0, AreaMethod::Voronoi).unwrap();
        assert!(a0.iter().all(|&x| (x - FULL_SPHERE / 6.0).abs() < 1e-12));
        let a1 = vertex_areas(&m, 1, AreaMethod::Voronoi).unwrap();
        let orbits = symmetry_orbits(&m, 2).unwrap();
        for orbit in &orbits.orbits {
            let r = a1[orbit.representative];
            for mem in &orbit.members {
                assert!((a1[mem.vertex] - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let m = build_mesh(1);
        let (v, t) = MeshLevel::parse_text(&m.level(1).to_text()).unwrap();
        assert_eq!(v, m.level(1).vertices);
        assert_eq!(t, m.level(1).triangles);
        assert!(MeshLevel::parse_text("x 1 2 3").is_err());
    }
}
