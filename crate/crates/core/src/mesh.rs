//! Triangular meshes with edge adjacency, orientation signs and region /
//! boundary tags.
//!
//! Conventions used throughout the crate:
//!
//! * element vertex triples are stored counter-clockwise;
//! * local edge `i` of an element is the edge opposite local vertex `i`, i.e.
//!   `(v1, v2)`, `(v2, v0)`, `(v0, v1)`, traversed in that (counter-clockwise)
//!   order;
//! * the canonical direction of a global edge runs from its lower to its
//!   higher vertex index, and an element's orientation sign for one of its
//!   edges is `+1` iff its counter-clockwise traversal agrees with it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Region and boundary tags (gmsh physical groups).
pub type Tag = i32;

/// Boundary tag given to boundary edges that no boundary record covers.
pub const UNTAGGED: Tag = 0;

const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-triangle cell of gmsh type {0}")]
    NonTriangle(u32),
    #[error("element {element} references vertex {vertex}, but only {n_vertices} vertices exist")]
    DanglingVertex {
        element: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("element {0} is degenerate (zero area); orientation cannot be repaired")]
    Degenerate(usize),
    #[error("edge ({0}, {1}) is shared by more than two elements")]
    NonManifold(usize, usize),
    #[error("boundary record ({0}, {1}) is not a boundary edge of the mesh")]
    UnknownBoundaryEdge(usize, usize),
    #[error("degenerate bounding box or subdivision")]
    DegenerateBox,
    #[error("point ({0}, {1}) lies outside all elements")]
    Outside(f64, f64),
}

/// Diagonal pattern of a structured triangulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagonal {
    /// Every cell split along the diagonal from lower-left to upper-right.
    #[default]
    Right,
    /// Every cell split along the diagonal from upper-left to lower-right.
    Left,
    /// Diagonals alternate in a checkerboard fashion ("union jack" pairs).
    Crossed,
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Boundary tags assigned by [`generate_structured`].
pub mod side {
    use super::Tag;
    pub const BOTTOM: Tag = 1;
    pub const RIGHT: Tag = 2;
    pub const TOP: Tag = 3;
    pub const LEFT: Tag = 4;
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    regions: Vec<Tag>,
    edges: Vec<[usize; 2]>,
    element_edges: Vec<[usize; 3]>,
    element_signs: Vec<[i8; 3]>,
    edge_elements: Vec<(usize, Option<usize>)>,
    edge_tags: Vec<Option<Tag>>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh from raw vertex coordinates, tagged triangles and tagged
    /// boundary segments. Clockwise triangles are reordered.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<([usize; 3], Tag)>,
        boundary: Vec<([usize; 2], Tag)>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut elements = Vec::with_capacity(triangles.len());
        let mut regions = Vec::with_capacity(triangles.len());
        for (ie, (tri, tag)) in triangles.into_iter().enumerate() {
            for &v in &tri {
                if v >= nv {
                    return Err(MeshError::DanglingVertex {
                        element: ie,
                        vertex: v,
                        n_vertices: nv,
                    });
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            let scale = {
                let d = |a: usize, b: usize| {
                    let (p, q) = (vertices[a], vertices[b]);
                    (p[0] - q[0]).hypot(p[1] - q[1])
                };
                d(tri[0], tri[1]).max(d(tri[1], tri[2])).max(d(tri[2], tri[0]))
            };
            if area.abs() <= GEOM_TOL * scale * scale || !area.is_finite() {
                return Err(MeshError::Degenerate(ie));
            }
            elements.push(if area > 0.0 {
                tri
            } else {
                [tri[0], tri[2], tri[1]]
            });
            regions.push(tag);
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_elements: Vec<(usize, Option<usize>)> = Vec::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        let mut element_signs = Vec::with_capacity(elements.len());
        for (ie, tri) in elements.iter().enumerate() {
            let mut ee = [0usize; 3];
            let mut ss = [0i8; 3];
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = [a.min(b), a.max(b)];
                ss[i] = if a < b { 1 } else { -1 };
                let id = match edge_index.get(&key) {
                    Some(&id) => {
                        let slot = &mut edge_elements[id];
                        if slot.1.is_some() {
                            return Err(MeshError::NonManifold(key[0], key[1]));
                        }
                        slot.1 = Some(ie);
                        id
                    }
                    None => {
                        let id = edges.len();
                        edges.push(key);
                        edge_elements.push((ie, None));
                        edge_index.insert(key, id);
                        id
                    }
                };
                ee[i] = id;
            }
            element_edges.push(ee);
            element_signs.push(ss);
        }

        let mut edge_tags: Vec<Option<Tag>> = edge_elements
            .iter()
            .map(|(_, other)| if other.is_none() { Some(UNTAGGED) } else { None })
            .collect();
        for (seg, tag) in boundary {
            let key = [seg[0].min(seg[1]), seg[0].max(seg[1])];
            match edge_index.get(&key) {
                Some(&id) if edge_elements[id].1.is_none() => edge_tags[id] = Some(tag),
                _ => return Err(MeshError::UnknownBoundaryEdge(seg[0], seg[1])),
            }
        }

        Ok(Self {
            vertices,
            elements,
            regions,
            edges,
            element_edges,
            element_signs,
            edge_elements,
            edge_tags,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.elements[e];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn region(&self, e: usize) -> Tag {
        self.regions[e]
    }

    pub fn regions(&self) -> &[Tag] {
        &self.regions
    }

    pub fn set_region(&mut self, e: usize, tag: Tag) {
        self.regions[e] = tag;
    }

    /// Re-tags every element by a function of its centroid.
    pub fn assign_regions(&mut self, mut f: impl FnMut([f64; 2], Tag) -> Tag) {
        for e in 0..self.elements.len() {
            let c = self.centroid(e);
            self.regions[e] = f(c, self.regions[e]);
        }
    }

    /// Global edge as `[lo, hi]` vertex indices.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Elements adjacent to an edge; the second is `None` on the boundary.
    pub fn edge_elements(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_elements[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_elements[e].1.is_none()
    }

    /// Boundary tag of an edge, `None` for interior edges.
    pub fn edge_tag(&self, e: usize) -> Option<Tag> {
        self.edge_tags[e]
    }

    pub fn element_edges(&self, e: usize) -> [usize; 3] {
        self.element_edges[e]
    }

    pub fn orientation_signs(&self, e: usize) -> [i8; 3] {
        self.element_signs[e]
    }

    /// Local index of global edge `edge` within element `e`.
    pub fn local_edge(&self, e: usize, edge: usize) -> Option<usize> {
        self.element_edges[e].iter().position(|&x| x == edge)
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| self.is_boundary_edge(e))
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| !self.is_boundary_edge(e))
    }

    /// Distinct boundary tags present on the mesh.
    pub fn boundary_tags(&self) -> Vec<Tag> {
        let mut t: Vec<Tag> = self.edge_tags.iter().flatten().copied().collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_coords(e);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.element_coords(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Largest edge length of one element.
    pub fn diameter(&self, e: usize) -> f64 {
        self.element_edges[e]
            .iter()
            .map(|&ed| self.edge_length(ed))
            .fold(0.0, f64::max)
    }

    /// Mesh parameter h: the maximum edge length.
    pub fn h_max(&self) -> f64 {
        (0..self.edges.len())
            .map(|e| self.edge_length(e))
            .fold(0.0, f64::max)
    }

    /// Affine map data: Jacobian `[[x1-x0, x2-x0], [y1-y0, y2-y0]]` (columns are
    /// the reference edge images) and the origin vertex.
    pub fn jacobian(&self, e: usize) -> ([[f64; 2]; 2], [f64; 2]) {
        let [a, b, c] = self.element_coords(e);
        (
            [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]],
            a,
        )
    }

    /// Maps reference coordinates of element `e` to physical coordinates.
    pub fn to_physical(&self, e: usize, xi: [f64; 2]) -> [f64; 2] {
        let (j, o) = self.jacobian(e);
        [
            o[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            o[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    /// Reference coordinates of a physical point with respect to element `e`.
    pub fn to_reference(&self, e: usize, p: [f64; 2]) -> [f64; 2] {
        let (j, o) = self.jacobian(e);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let dx = p[0] - o[0];
        let dy = p[1] - o[1];
        [
            (j[1][1] * dx - j[0][1] * dy) / det,
            (-j[1][0] * dx + j[0][0] * dy) / det,
        ]
    }

    /// Whether `p` lies in the closed element, with relative tolerance.
    pub fn contains(&self, e: usize, p: [f64; 2]) -> bool {
        let r = self.to_reference(e, p);
        let tol = 1e-10;
        r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol
    }

    /// Lowest-index element containing `p`.
    pub fn locate(&self, p: [f64; 2]) -> Result<usize, MeshError> {
        (0..self.elements.len())
            .find(|&e| self.contains(e, p))
            .ok_or(MeshError::Outside(p[0], p[1]))
    }

    /// Region tag of the element containing `p`; ties on shared edges go to
    /// the lowest element index.
    pub fn region_lookup(&self, p: [f64; 2]) -> Result<Tag, MeshError> {
        self.locate(p).map(|e| self.regions[e])
    }

    /// Outward unit normal of local edge `i` of element `e`.
    pub fn outward_normal(&self, e: usize, i: usize) -> [f64; 2] {
        let t = self.elements[e];
        let a = self.vertices[t[(i + 1) % 3]];
        let b = self.vertices[t[(i + 2) % 3]];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let l = dx.hypot(dy);
        [dy / l, -dx / l]
    }

    /// Unit normal of a global edge: the right-hand normal of its canonical
    /// lo-to-hi direction, outward for the adjacent element with sign `+1`.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let l = dx.hypot(dy);
        [dy / l, -dx / l]
    }

    /// Point on a global edge at parameter `s` in `[0, 1]` from lo to hi.
    pub fn edge_point(&self, e: usize, s: f64) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
    }

    /// Sum of element areas.
    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.area(e)).sum()
    }

    /// Writes the native text format.
    pub fn to_native_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rdmix-mesh 1");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.elements.len());
        for (t, r) in self.elements.iter().zip(&self.regions) {
            let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], r);
        }
        let tagged: Vec<usize> = self
            .boundary_edges()
            .filter(|&e| self.edge_tags[e] != Some(UNTAGGED))
            .collect();
        if !tagged.is_empty() {
            let _ = writeln!(s, "boundary {}", tagged.len());
            for e in tagged {
                let [a, b] = self.edges[e];
                let _ = writeln!(s, "{} {} {}", a, b, self.edge_tags[e].unwrap_or(UNTAGGED));
            }
        }
        s
    }

    pub fn write_native(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_native_string())?;
        Ok(())
    }
}

/// Supported mesh file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    GmshAsciiV2,
    NativeText,
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    match format {
        MeshFormat::GmshAsciiV2 => parse_gmsh_v2(&text),
        MeshFormat::NativeText => parse_native(&text),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    /// Next non-empty line, trimmed.
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() {
                self.line = i + 1;
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str, MeshError> {
        let line = self.line;
        self.next().ok_or_else(|| MeshError::Parse {
            line: line + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, msg: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }
}

fn parse_fields<T: std::str::FromStr>(lines: &Lines, s: &str, n: usize) -> Result<Vec<T>, MeshError> {
    let v: Result<Vec<T>, _> = s.split_whitespace().map(str::parse).collect();
    match v {
        Ok(v) if v.len() == n => Ok(v),
        Ok(v) => Err(lines.err(format!("expected {n} fields, found {}", v.len()))),
        Err(_) => Err(lines.err(format!("malformed record '{s}'"))),
    }
}

fn parse_header(lines: &mut Lines, keyword: &str) -> Result<usize, MeshError> {
    let l = lines.expect(keyword)?;
    let mut it = l.split_whitespace();
    if it.next() != Some(keyword) {
        return Err(lines.err(format!("expected '{keyword} <count>'")));
    }
    let n = it
        .next()
        .and_then(|x| x.parse().ok())
        .ok_or_else(|| lines.err(format!("missing count after '{keyword}'")))?;
    if it.next().is_some() {
        return Err(lines.err("trailing tokens"));
    }
    Ok(n)
}

/// Parses the native text format:
///
/// ```text
/// rdmix-mesh 1
/// vertices N
/// x y            (N lines)
/// triangles M
/// v0 v1 v2 region (M lines)
/// boundary K     (optional)
/// v0 v1 tag      (K lines)
/// ```
pub fn parse_native(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text);
    let head = lines.expect("header")?;
    if head.split_whitespace().collect::<Vec<_>>() != ["rdmix-mesh", "1"] {
        return Err(lines.err("expected header 'rdmix-mesh 1'"));
    }
    let nv = parse_header(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = lines.expect("vertex")?;
        let f: Vec<f64> = parse_fields(&lines, l, 2)?;
        vertices.push([f[0], f[1]]);
    }
    let nt = parse_header(&mut lines, "triangles")?;
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let l = lines.expect("triangle")?;
        let f: Vec<i64> = parse_fields(&lines, l, 4)?;
        if f[..3].iter().any(|&v| v < 0) {
            return Err(lines.err("negative vertex index"));
        }
        tris.push(([f[0] as usize, f[1] as usize, f[2] as usize], f[3] as Tag));
    }
    let mut boundary = Vec::new();
    if let Some(header) = lines.next() {
        let mut it = header.split_whitespace();
        if it.next() != Some("boundary") {
            return Err(lines.err("expected 'boundary <count>' or end of file"));
        }
        let nb: usize = it
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| lines.err("missing boundary count"))?;
        for _ in 0..nb {
            let l = lines.expect("boundary segment")?;
            let f: Vec<i64> = parse_fields(&lines, l, 3)?;
            if f[..2].iter().any(|&v| v < 0 || v as usize >= nv) {
                return Err(lines.err("boundary vertex index out of range"));
            }
            boundary.push(([f[0] as usize, f[1] as usize], f[2] as Tag));
        }
        if lines.next().is_some() {
            return Err(lines.err("trailing content after boundary block"));
        }
    }
    Mesh::new(vertices, tris, boundary)
}

/// Parses the ASCII gmsh v2 subset: `$Nodes` and `$Elements` blocks with
/// element types 1 (line, boundary) and 2 (triangle); the first tag of each
/// element (the physical group) becomes its region or boundary tag.
pub fn parse_gmsh_v2(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text);
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut tris = Vec::new();
    let mut segs = Vec::new();
    let mut saw_nodes = false;
    let mut saw_elements = false;
    while let Some(l) = lines.next() {
        match l {
            "$MeshFormat" => {
                let v = lines.expect("format line")?;
                let ver = v.split_whitespace().next().unwrap_or("");
                if !ver.starts_with('2') {
                    return Err(lines.err(format!("unsupported gmsh version {ver}")));
                }
                if v.split_whitespace().nth(1) != Some("0") {
                    return Err(lines.err("only ASCII gmsh files are supported"));
                }
                if lines.expect("$EndMeshFormat")? != "$EndMeshFormat" {
                    return Err(lines.err("expected $EndMeshFormat"));
                }
            }
            "$Nodes" => {
                saw_nodes = true;
                let n: usize = lines
                    .expect("node count")?
                    .parse()
                    .map_err(|_| lines.err("bad node count"))?;
                for _ in 0..n {
                    let l = lines.expect("node")?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(lines.err("node record needs 4 fields"));
                    }
                    let id: i64 = f[0].parse().map_err(|_| lines.err("bad node id"))?;
                    let x: f64 = f[1].parse().map_err(|_| lines.err("bad coordinate"))?;
                    let y: f64 = f[2].parse().map_err(|_| lines.err("bad coordinate"))?;
                    node_ids.insert(id, vertices.len());
                    vertices.push([x, y]);
                }
                if lines.expect("$EndNodes")? != "$EndNodes" {
                    return Err(lines.err("expected $EndNodes"));
                }
            }
            "$Elements" => {
                saw_elements = true;
                let n: usize = lines
                    .expect("element count")?
                    .parse()
                    .map_err(|_| lines.err("bad element count"))?;
                for _ in 0..n {
                    let l = lines.expect("element")?;
                    let f: Result<Vec<i64>, _> = l.split_whitespace().map(str::parse).collect();
                    let f = f.map_err(|_| lines.err("malformed element record"))?;
                    if f.len() < 3 {
                        return Err(lines.err("element record too short"));
                    }
                    let ty = f[1];
                    let ntags = f[2] as usize;
                    let nodes_at = 3 + ntags;
                    let tag = if ntags > 0 { f[3] as Tag } else { UNTAGGED };
                    let nn = match ty {
                        1 => 2,
                        2 => 3,
                        15 => 1,
                        other => return Err(MeshError::NonTriangle(other as u32)),
                    };
                    if f.len() != nodes_at + nn {
                        return Err(lines.err("element node count mismatch"));
                    }
                    let mut vs = [0usize; 3];
                    for k in 0..nn {
                        let id = f[nodes_at + k];
                        vs[k] = *node_ids.get(&id).ok_or(MeshError::DanglingVertex {
                            element: f[0].max(0) as usize,
                            vertex: id.max(0) as usize,
                            n_vertices: vertices.len(),
                        })?;
                    }
                    match ty {
                        1 => segs.push(([vs[0], vs[1]], tag)),
                        2 => tris.push((vs, tag)),
                        _ => {}
                    }
                }
                if lines.expect("$EndElements")? != "$EndElements" {
                    return Err(lines.err("expected $EndElements"));
                }
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // skip unknown sections such as $PhysicalNames
                let end = format!("$End{}", &other[1..]);
                loop {
                    if lines.expect(&end)? == end {
                        break;
                    }
                }
            }
            _ => return Err(lines.err(format!("unexpected line '{l}'"))),
        }
    }
    if !saw_nodes || !saw_elements {
        return Err(MeshError::Parse {
            line: lines.line,
            msg: "missing $Nodes or $Elements block".into(),
        });
    }
    Mesh::new(vertices, tris, segs)
}

/// Structured triangulation of `bbox` into `2 nx ny` triangles. Every element
/// gets region tag 1; boundary edges get [`side`] tags.
pub fn generate_structured(
    nx: usize,
    ny: usize,
    bbox: BBox,
    diagonal: Diagonal,
) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 || !(bbox.x1 > bbox.x0) || !(bbox.y1 > bbox.y0) {
        return Err(MeshError::DegenerateBox);
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                bbox.x0 + (bbox.x1 - bbox.x0) * i as f64 / nx as f64,
                bbox.y0 + (bbox.y1 - bbox.y0) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            let right = match diagonal {
                Diagonal::Right => true,
                Diagonal::Left => false,
                Diagonal::Crossed => (i + j) % 2 == 0,
            };
            if right {
                tris.push(([a, b, c], 1));
                tris.push(([a, c, d], 1));
            } else {
                tris.push(([a, b, d], 1));
                tris.push(([b, c, d], 1));
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary.push(([idx(i, 0), idx(i + 1, 0)], side::BOTTOM));
        boundary.push(([idx(i, ny), idx(i + 1, ny)], side::TOP));
    }
    for j in 0..ny {
        boundary.push(([idx(0, j), idx(0, j + 1)], side::LEFT));
        boundary.push(([idx(nx, j), idx(nx, j + 1)], side::RIGHT));
    }
    Mesh::new(vertices, tris, boundary)
}
