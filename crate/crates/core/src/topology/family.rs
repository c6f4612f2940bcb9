//! Separating families made of segments and circular arcs.

use crate::error::{Error, Result};
use crate::geometry::{SurfaceKind, SurfaceSpec};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

/// Intersection and incidence tolerance.
pub const GEOM_TOL: f64 = 1e-10;
/// Angle tolerance for orthogonality and tangency checks.
pub const ANGLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    Segment { a: Complex64, b: Complex64 },
    /// z(t) = center + radius·e^{i(start + t·sweep)}, t ∈ [0,1].
    Arc { center: Complex64, radius: f64, start: f64, sweep: f64 },
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

impl Piece {
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            Piece::Segment { a, b } => a + (b - a) * t,
            Piece::Arc { center, radius, start, sweep } => center + Complex64::from_polar(radius, start + t * sweep),
        }
    }

    pub fn start(&self) -> Complex64 {
        self.point(0.0)
    }

    pub fn end(&self) -> Complex64 {
        self.point(1.0)
    }

    /// Unit tangent at parameter t.
    pub fn tangent(&self, t: f64) -> Complex64 {
        match *self {
            Piece::Segment { a, b } => (b - a) / (b - a).norm(),
            Piece::Arc { start, sweep, .. } => {
                Complex64::i() * Complex64::from_polar(1.0, start + t * sweep) * sweep.signum()
            }
        }
    }

    /// Turning of the tangent along the piece.
    pub fn turning(&self) -> f64 {
        match *self {
            Piece::Segment { .. } => 0.0,
            Piece::Arc { sweep, .. } => sweep,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Segment { a, b } => (b - a).norm(),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn reversed(&self) -> Piece {
        match *self {
            Piece::Segment { a, b } => Piece::Segment { a: b, b: a },
            Piece::Arc { center, radius, start, sweep } => {
                Piece::Arc { center, radius, start: start + sweep, sweep: -sweep }
            }
        }
    }

    /// Parameter of a point known to lie on the supporting line/circle.
    fn param_of(&self, z: Complex64) -> f64 {
        match *self {
            Piece::Segment { a, b } => {
                let d = b - a;
                ((z - a) * d.conj()).re / d.norm_sqr()
            }
            Piece::Arc { center, start, sweep, .. } => {
                let phi = (z - center).arg();
                let mut u = if sweep >= 0.0 { phi - start } else { start - phi };
                u = u.rem_euclid(TAU);
                if u > TAU - 1e-12 {
                    u -= TAU;
                }
                u / sweep.abs()
            }
        }
    }

    /// Smallest distance from z to the piece.
    pub fn distance(&self, z: Complex64) -> f64 {
        let t = self.param_of(z);
        let mut d = (self.start() - z).norm().min((self.end() - z).norm());
        if (0.0..=1.0).contains(&t) {
            d = d.min(match *self {
                Piece::Segment { .. } => (self.point(t) - z).norm(),
                Piece::Arc { center, radius, .. } => ((z - center).norm() - radius).abs(),
            });
        }
        d
    }

    /// Range of |z| over the piece.
    pub fn radial_range(&self) -> (f64, f64) {
        match *self {
            Piece::Segment { a, b } => {
                let d = b - a;
                let t = (-(a * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
                let lo = (a + d * t).norm();
                (lo, a.norm().max(b.norm()))
            }
            Piece::Arc { .. } => {
                let n = 256;
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for i in 0..=n {
                    let r = self.point(i as f64 / n as f64).norm();
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
                if let Piece::Arc { center, radius, .. } = *self {
                    for z in [center + center / center.norm() * radius, center - center / center.norm() * radius] {
                        if center.norm() > 0.0 {
                            let t = self.param_of(z);
                            if (0.0..=1.0).contains(&t) {
                                lo = lo.min(z.norm());
                                hi = hi.max(z.norm());
                            }
                        }
                    }
                }
                (lo, hi)
            }
        }
    }
}

/// A transversal or tangential meeting point of two pieces.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    pub point: Complex64,
    pub t: f64,
    pub s: f64,
}

fn in_unit(t: f64, tol: f64) -> bool {
    t >= -tol && t <= 1.0 + tol
}

fn line_circle(a: Complex64, b: Complex64, c: Complex64, r: f64) -> Vec<(f64, Complex64)> {
    let d = b - a;
    let f = a - c;
    let qa = d.norm_sqr();
    let qb = 2.0 * (f * d.conj()).re;
    let qc = f.norm_sqr() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < -1e-14 * qb.abs().max(1.0) {
        return Vec::new();
    }
    let sq = disc.max(0.0).sqrt();
    let mut out = Vec::new();
    for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
        out.push((t, a + d * t));
    }
    if sq == 0.0 {
        out.truncate(1);
    }
    out
}

/// All meeting points of p and q with parameters in [0,1] (up to tol).
pub fn intersections(p: &Piece, q: &Piece) -> Vec<Hit> {
    let tol = 1e-12;
    let mut out = Vec::new();
    match (*p, *q) {
        (Piece::Segment { a, b }, Piece::Segment { a: c, b: d }) => {
            let r = b - a;
            let s = d - c;
            let den = cross(r, s);
            if den.abs() < 1e-15 * r.norm() * s.norm() {
                // collinear overlap shows up as its end points
                if cross(c - a, r).abs() < 1e-13 * r.norm() {
                    let rr = r.norm_sqr();
                    let (t0, t1) = (((c - a) * r.conj()).re / rr, ((d - a) * r.conj()).re / rr);
                    let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
                    if lo <= hi + tol {
                        for t in [lo, hi] {
                            let z = a + r * t;
                            out.push(Hit { point: z, t, s: q.param_of(z) });
                        }
                    }
                }
                return out;
            }
            let t = cross(c - a, s) / den;
            let u = cross(c - a, r) / den;
            if in_unit(t, tol) && in_unit(u, tol) {
                out.push(Hit { point: a + r * t, t, s: u });
            }
        }
        (Piece::Segment { a, b }, Piece::Arc { center, radius, .. }) => {
            for (t, z) in line_circle(a, b, center, radius) {
                let s = q.param_of(z);
                if in_unit(t, tol) && in_unit(s, tol) {
                    out.push(Hit { point: z, t, s });
                }
            }
        }
        (Piece::Arc { .. }, Piece::Segment { .. }) => {
            for h in intersections(q, p) {
                out.push(Hit { point: h.point, t: h.s, s: h.t });
            }
        }
        (Piece::Arc { center: c1, radius: r1, .. }, Piece::Arc { center: c2, radius: r2, .. }) => {
            let d = (c2 - c1).norm();
            if d < 1e-15 || d > r1 + r2 + 1e-12 || d < (r1 - r2).abs() - 1e-12 {
                return out;
            }
            let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
            let h = (r1 * r1 - a * a).max(0.0).sqrt();
            let e = (c2 - c1) / d;
            let base = c1 + e * a;
            let mut pts = vec![base + Complex64::i() * e * h];
            if h > 0.0 {
                pts.push(base - Complex64::i() * e * h);
            }
            for z in pts {
                let t = p.param_of(z);
                let s = q.param_of(z);
                if in_unit(t, tol) && in_unit(s, tol) {
                    out.push(Hit { point: z, t, s });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vertex {
    Outer,
    Inner,
    Puncture(usize),
}

impl Vertex {
    fn label(&self) -> String {
        match self {
            Vertex::Outer => "outer".into(),
            Vertex::Inner => "inner".into(),
            Vertex::Puncture(i) => format!("z{i}"),
        }
    }

    fn parse(s: &str) -> Result<Vertex> {
        match s {
            "outer" => Ok(Vertex::Outer),
            "inner" => Ok(Vertex::Inner),
            _ if s.starts_with('z') => s[1..]
                .parse()
                .map(Vertex::Puncture)
                .map_err(|_| Error::Family(format!("bad vertex {s}"))),
            _ => Err(Error::Family(format!("bad vertex {s}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub from: Vertex,
    pub to: Vertex,
    pub pieces: Vec<Piece>,
}

impl Curve {
    pub fn start(&self) -> Complex64 {
        self.pieces[0].start()
    }

    pub fn end(&self) -> Complex64 {
        self.pieces[self.pieces.len() - 1].end()
    }

    /// ∫k dℓ for the flat metric, counting the corners between pieces.
    pub fn turning(&self) -> f64 {
        let mut s: f64 = self.pieces.iter().map(|p| p.turning()).sum();
        for w in self.pieces.windows(2) {
            s += (w[1].tangent(0.0) / w[0].tangent(1.0)).arg();
        }
        s
    }

    pub fn reversed(&self) -> Curve {
        Curve {
            from: self.to,
            to: self.from,
            pieces: self.pieces.iter().rev().map(|p| p.reversed()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatingFamily {
    pub curves: Vec<Curve>,
    /// Tangent angle v_j at each puncture.
    pub tangent_angles: Vec<f64>,
}

fn angle_close(a: Complex64, b: Complex64) -> bool {
    (a / b).arg().abs() < ANGLE_TOL
}

impl SeparatingFamily {
    pub fn vertices(surface: &SurfaceSpec) -> Vec<Vertex> {
        let mut v = vec![Vertex::Outer];
        if surface.kind == SurfaceKind::Annulus {
            v.push(Vertex::Inner);
        }
        v.extend((0..surface.punctures.len()).map(Vertex::Puncture));
        v
    }

    fn vertex_index(surface: &SurfaceSpec, v: Vertex) -> usize {
        match v {
            Vertex::Outer => 0,
            Vertex::Inner => 1,
            Vertex::Puncture(i) => i + if surface.kind == SurfaceKind::Annulus { 2 } else { 1 },
        }
    }

    /// Checks endpoints, orthogonality, tangents, disjointness and the tree.
    pub fn validate(&self, surface: &SurfaceSpec) -> Result<()> {
        if !matches!(surface.kind, SurfaceKind::Disk | SurfaceKind::Annulus) {
            return Err(Error::UnsupportedSurface(format!("{:?}", surface.kind)));
        }
        let np = surface.punctures.len();
        if self.tangent_angles.len() != np {
            return Err(Error::Family("one tangent angle per puncture".into()));
        }
        let verts = Self::vertices(surface);
        if self.curves.len() + 1 != verts.len() {
            return Err(Error::Family(format!("{} curves for {} vertices", self.curves.len(), verts.len())));
        }
        let r_in = surface.inner_radius;
        for (ci, c) in self.curves.iter().enumerate() {
            if c.pieces.is_empty() {
                return Err(Error::Family(format!("curve {ci} is empty")));
            }
            for w in c.pieces.windows(2) {
                if (w[0].end() - w[1].start()).norm() > GEOM_TOL {
                    return Err(Error::Family(format!("curve {ci} is not continuous")));
                }
            }
            for p in &c.pieces {
                if p.length() < 1e-9 {
                    return Err(Error::Family(format!("curve {ci} has a degenerate piece")));
                }
                let (lo, hi) = p.radial_range();
                if hi > 1.0 + GEOM_TOL || (surface.kind == SurfaceKind::Annulus && lo < r_in - GEOM_TOL) {
                    return Err(Error::Family(format!("curve {ci} leaves the surface")));
                }
            }
            for (end, v, tan) in [
                (c.start(), c.from, c.pieces[0].tangent(0.0)),
                (c.end(), c.to, -c.pieces[c.pieces.len() - 1].tangent(1.0)),
            ] {
                // `tan` points from the endpoint into the curve
                match v {
                    Vertex::Outer | Vertex::Inner => {
                        let rad = if v == Vertex::Outer { 1.0 } else { r_in };
                        if v == Vertex::Inner && surface.kind != SurfaceKind::Annulus {
                            return Err(Error::Family("the disk has no inner boundary".into()));
                        }
                        if (end.norm() - rad).abs() > GEOM_TOL {
                            return Err(Error::Family(format!("curve {ci} does not end on {}", v.label())));
                        }
                        let inward = if v == Vertex::Outer { -end / end.norm() } else { end / end.norm() };
                        if !angle_close(tan, inward) {
                            return Err(Error::Family(format!("curve {ci} is not orthogonal to {}", v.label())));
                        }
                    }
                    Vertex::Puncture(i) => {
                        if i >= np || (end - surface.punctures[i]).norm() > GEOM_TOL {
                            return Err(Error::Family(format!("curve {ci} does not end at z{i}")));
                        }
                        if !angle_close(tan, Complex64::from_polar(1.0, self.tangent_angles[i])) {
                            return Err(Error::Family(format!("curve {ci} is not tangent to v{i}")));
                        }
                    }
                }
            }
            // punctures off the curve except at its own endpoints
            for (i, z) in surface.punctures.iter().enumerate() {
                let own = c.from == Vertex::Puncture(i) || c.to == Vertex::Puncture(i);
                for (k, p) in c.pieces.iter().enumerate() {
                    let d = p.distance(*z);
                    let at_end = (own && k == 0 && (p.start() - z).norm() < GEOM_TOL)
                        || (own && k + 1 == c.pieces.len() && (p.end() - z).norm() < GEOM_TOL);
                    if !at_end && d < 1e-9 {
                        return Err(Error::Family(format!("curve {ci} passes through z{i}")));
                    }
                }
            }
        }
        // disjoint interiors
        let shared = |z: Complex64| surface.punctures.iter().any(|p| (p - z).norm() < 1e-9);
        for i in 0..self.curves.len() {
            for j in i..self.curves.len() {
                for (a, pa) in self.curves[i].pieces.iter().enumerate() {
                    for (b, pb) in self.curves[j].pieces.iter().enumerate() {
                        if i == j && b <= a {
                            continue;
                        }
                        for h in intersections(pa, pb) {
                            let adjacent = i == j && b == a + 1 && (h.point - pa.end()).norm() < 1e-9;
                            if adjacent || shared(h.point) {
                                continue;
                            }
                            return Err(Error::Family(format!("curves {i} and {j} meet at {}", h.point)));
                        }
                    }
                }
            }
        }
        // tree
        let mut parent: Vec<usize> = (0..verts.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for c in &self.curves {
            let a = find(&mut parent, Self::vertex_index(surface, c.from));
            let b = find(&mut parent, Self::vertex_index(surface, c.to));
            if a == b {
                return Err(Error::Family("curves contain a cycle".into()));
            }
            parent[a] = b;
        }
        Ok(())
    }

    /// Vertices on the start side of curve i once it is deleted from the tree.
    pub fn start_side(&self, surface: &SurfaceSpec, i: usize) -> Vec<Vertex> {
        let verts = Self::vertices(surface);
        let n = verts.len();
        let mut adj = vec![Vec::new(); n];
        for (j, c) in self.curves.iter().enumerate() {
            if j == i {
                continue;
            }
            let a = Self::vertex_index(surface, c.from);
            let b = Self::vertex_index(surface, c.to);
            adj[a].push(b);
            adj[b].push(a);
        }
        let s = Self::vertex_index(surface, self.curves[i].from);
        let mut seen = vec![false; n];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        verts.into_iter().enumerate().filter(|(k, _)| seen[*k]).map(|(_, v)| v).collect()
    }

    /// One curve per line: `curve <from> <to> | seg x0 y0 x1 y1 | arc cx cy r start sweep ...`,
    /// preceded by a `tangents` line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("tangents");
        for t in &self.tangent_angles {
            let _ = write!(s, " {t:e}");
        }
        s.push('\n');
        for c in &self.curves {
            let _ = write!(s, "curve {} {}", c.from.label(), c.to.label());
            for p in &c.pieces {
                match p {
                    Piece::Segment { a, b } => {
                        let _ = write!(s, " | seg {:e} {:e} {:e} {:e}", a.re, a.im, b.re, b.im);
                    }
                    Piece::Arc { center, radius, start, sweep } => {
                        let _ = write!(s, " | arc {:e} {:e} {:e} {:e} {:e}", center.re, center.im, radius, start, sweep);
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Family(format!("cannot parse family: {m}"));
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad(t));
        let mut tangents = Vec::new();
        let mut curves = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            if let Some(rest) = line.strip_prefix("tangents") {
                tangents = rest.split_whitespace().map(num).collect::<Result<_>>()?;
                continue;
            }
            let mut parts = line.split('|');
            let head: Vec<&str> = parts.next().unwrap_or("").split_whitespace().collect();
            if head.len() != 3 || head[0] != "curve" {
                return Err(bad(line));
            }
            let mut pieces = Vec::new();
            for p in parts {
                let f: Vec<&str> = p.split_whitespace().collect();
                let v: Vec<f64> = f.iter().skip(1).map(|t| num(t)).collect::<Result<_>>()?;
                match (f.first().copied(), v.len()) {
                    (Some("seg"), 4) => pieces.push(Piece::Segment {
                        a: Complex64::new(v[0], v[1]),
                        b: Complex64::new(v[2], v[3]),
                    }),
                    (Some("arc"), 5) => pieces.push(Piece::Arc {
                        center: Complex64::new(v[0], v[1]),
                        radius: v[2],
                        start: v[3],
                        sweep: v[4],
                    }),
                    _ => return Err(bad(p)),
                }
            }
            curves.push(Curve { from: Vertex::parse(head[1])?, to: Vertex::parse(head[2])?, pieces });
        }
        Ok(SeparatingFamily { curves, tangent_angles: tangents })
    }
}

/// Builders for curves leaving a puncture.
pub mod build {
    use super::*;

    /// Start of a curve at z along angle v: straight (turn = 0) or a tangent
    /// arc bending left (turn > 0) or right (turn < 0).
    pub fn stub(z: Complex64, v: f64, len: f64, turn: f64) -> Piece {
        let dir = Complex64::from_polar(1.0, v);
        if turn == 0.0 {
            return Piece::Segment { a: z, b: z + dir * len };
        }
        let radius = len / turn.abs();
        let n = Complex64::i() * dir * turn.signum();
        let center = z + n * radius;
        Piece::Arc { center, radius, start: (-n).arg(), sweep: turn }
    }

    /// Polyline through `pts` then radially out (or in) to the circle of
    /// radius `target`.
    pub fn polyline_to_circle(mut pieces: Vec<Piece>, pts: &[Complex64], target: f64) -> Vec<Piece> {
        let mut cur = pieces.last().map(|p| p.end()).unwrap();
        for &p in pts {
            pieces.push(Piece::Segment { a: cur, b: p });
            cur = p;
        }
        pieces.push(Piece::Segment { a: cur, b: cur / cur.norm() * target });
        pieces
    }

    /// Radial segment between the inner and outer circle at angle phi.
    pub fn radial(r_in: f64, phi: f64) -> Curve {
        Curve {
            from: Vertex::Inner,
            to: Vertex::Outer,
            pieces: vec![Piece::Segment { a: Complex64::from_polar(r_in, phi), b: Complex64::from_polar(1.0, phi) }],
        }
    }

    /// Curve from z_i to the circle of radius target through waypoints.
    pub fn puncture_to_circle(
        surface: &SurfaceSpec,
        tangents: &[f64],
        i: usize,
        turn: f64,
        stub_len: f64,
        waypoints: &[Complex64],
        outer: bool,
    ) -> Curve {
        let z = surface.punctures[i];
        let target = if outer { 1.0 } else { surface.inner_radius };
        let pieces = polyline_to_circle(vec![stub(z, tangents[i], stub_len, turn)], waypoints, target);
        Curve { from: Vertex::Puncture(i), to: if outer { Vertex::Outer } else { Vertex::Inner }, pieces }
    }

    /// Curve from z_i to z_j through waypoints.
    #[allow(clippy::too_many_arguments)]
    pub fn puncture_to_puncture(
        surface: &SurfaceSpec,
        tangents: &[f64],
        i: usize,
        turn_i: f64,
        j: usize,
        turn_j: f64,
        stub_len: f64,
        waypoints: &[Complex64],
    ) -> Curve {
        let a = stub(surface.punctures[i], tangents[i], stub_len, turn_i);
        let b = stub(surface.punctures[j], tangents[j], stub_len, turn_j);
        let mut pieces = vec![a];
        let mut cur = a.end();
        for &p in waypoints.iter().chain(std::iter::once(&b.end())) {
            pieces.push(Piece::Segment { a: cur, b: p });
            cur = p;
        }
        pieces.push(b.reversed());
        Curve { from: Vertex::Puncture(i), to: Vertex::Puncture(j), pieces }
    }

    /// Annulus of inner radius 0.3 with punctures at 0.6 and 0.6e^{−2i}, and
    /// two families: d₁ from z₁ to the inner circle, d₂ from z₂ out, d₃
    /// radial; the second family replaces d₁ by a curve from z₁ that loops
    /// around near the outer circle to z₂.
    pub fn inner_to_puncture_move() -> (SurfaceSpec, SeparatingFamily, SeparatingFamily) {
        let z1 = Complex64::new(0.6, 0.0);
        let z2 = Complex64::from_polar(0.6, -2.0);
        let a = SurfaceSpec::annulus(0.3, vec![z1, z2]);
        let tang = [PI, -2.0];
        let d1 = puncture_to_circle(&a, &tang, 0, 0.0, 0.05, &[], false);
        let d2 = puncture_to_circle(&a, &tang, 1, 0.0, 0.05, &[], true);
        let d3 = radial(0.3, 2.0);
        let way = [
            Complex64::from_polar(0.42, 0.6),
            Complex64::from_polar(0.85, 0.2),
            Complex64::from_polar(0.85, -1.0),
        ];
        let n = puncture_to_puncture(&a, &tang, 0, 0.0, 1, 0.8, 0.05, &way);
        let fa = SeparatingFamily { curves: vec![d1, d2.clone(), d3.clone()], tangent_angles: tang.to_vec() };
        let fb = SeparatingFamily { curves: vec![n, d2, d3], tangent_angles: tang.to_vec() };
        (a, fa, fb)
    }
}

/// Random valid family for the given tangent angles (rejection sampling).
pub fn random_family<R: Rng>(surface: &SurfaceSpec, tangents: &[f64], rng: &mut R) -> Result<SeparatingFamily> {
    let verts = SeparatingFamily::vertices(surface);
    let n = verts.len();
    let np = surface.punctures.len();
    let off = n - np;
    let r_in = surface.inner_radius;
    for _ in 0..5000 {
        // random tree by attachment; punctures take at most three curves
        let mut order: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            let j = rng.random_range(0..=k);
            order.swap(k, j);
        }
        let mut edges = Vec::new();
        let mut deg = vec![0usize; n];
        let mut ok = true;
        for k in 1..n {
            let cands: Vec<usize> = order[..k].iter().copied().filter(|&v| deg[v] < 3).collect();
            if cands.is_empty() {
                ok = false;
                break;
            }
            let p = cands[rng.random_range(0..cands.len())];
            deg[p] += 1;
            deg[order[k]] += 1;
            edges.push((order[k], p));
        }
        if !ok {
            continue;
        }
        let mut used = vec![0usize; n];
        let mut turn_for = |v: usize, rng: &mut R| -> f64 {
            let t = match used[v] {
                0 => 0.0,
                1 => 1.0,
                _ => -1.0,
            };
            used[v] += 1;
            t * rng.random_range(0.4..1.2)
        };
        let rand_point = |rng: &mut R| -> Complex64 {
            let lo = if surface.kind == SurfaceKind::Annulus { r_in + 0.05 * (1.0 - r_in) } else { 0.0 };
            let r = rng.random_range(lo..0.95f64.max(lo + 1e-3));
            Complex64::from_polar(r, rng.random_range(0.0..TAU))
        };
        let mut curves = Vec::new();
        for &(a, b) in &edges {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            let stub_len = rng.random_range(0.01..0.04);
            let nway = rng.random_range(0..2usize);
            let way: Vec<Complex64> = (0..nway).map(|_| rand_point(rng)).collect();
            let c = if a < off && b < off {
                build::radial(r_in, rng.random_range(0.0..TAU))
            } else if a < off {
                let outer = verts[a] == Vertex::Outer;
                let i = b - off;
                let t = turn_for(b, rng);
                let mut way = way;
                // approach the circle radially from a random point
                let phi = rng.random_range(0.0..TAU);
                let rr = if outer { rng.random_range(0.5..0.97) } else { r_in + rng.random_range(0.03..0.3) * (1.0 - r_in) };
                way.push(Complex64::from_polar(rr, phi));
                build::puncture_to_circle(surface, tangents, i, t, stub_len, &way, outer)
            } else {
                let ti = turn_for(a, rng);
                let tj = turn_for(b, rng);
                build::puncture_to_puncture(surface, tangents, a - off, ti, b - off, tj, stub_len, &way)
            };
            curves.push(c);
        }
        let fam = SeparatingFamily { curves, tangent_angles: tangents.to_vec() };
        if fam.validate(surface).is_ok() {
            return Ok(fam);
        }
    }
    Err(Error::Family("no valid random family found".into()))
}

/// Turning angle of a corner between two unit tangents, in (−π, π].
pub fn corner_angle(before: Complex64, after: Complex64) -> f64 {
    let a = (after / before).arg();
    if a <= -PI { a + TAU } else { a }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn segment_and_arc_intersections() {
        let s = Piece::Segment { a: c(-2.0, 0.0), b: c(2.0, 0.0) };
        let a = Piece::Arc { center: c(0.0, 0.0), radius: 1.0, start: -1.0, sweep: 2.0 };
        let h = intersections(&s, &a);
        assert_eq!(h.len(), 1);
        assert!((h[0].point - c(1.0, 0.0)).norm() < 1e-14);
        assert!((h[0].s - 0.5).abs() < 1e-14);
        let b = Piece::Arc { center: c(1.0, 0.0), radius: 1.0, start: 0.0, sweep: TAU };
        let full = Piece::Arc { center: c(0.0, 0.0), radius: 1.0, start: 0.0, sweep: TAU };
        assert_eq!(intersections(&full, &b).len(), 2);
        let t = Piece::Segment { a: c(-1.0, -1.0), b: c(1.0, 1.0) };
        assert_eq!(intersections(&s, &t).len(), 1);
    }

    #[test]
    fn stub_is_tangent() {
        for turn in [0.0, 0.7, -0.9] {
            let p = build::stub(c(0.2, 0.1), 1.1, 0.05, turn);
            assert!((p.start() - c(0.2, 0.1)).norm() < 1e-15);
            assert!((p.tangent(0.0) / Complex64::from_polar(1.0, 1.1)).arg().abs() < 1e-14);
            assert!((p.turning() - turn).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_and_text_roundtrip() {
        let a = SurfaceSpec::annulus(0.3, vec![c(0.5, 0.2), c(-0.6, -0.1)]);
        let tang = vec![0.3, 2.0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f = random_family(&a, &tang, &mut rng).unwrap();
            f.validate(&a).unwrap();
            let g = SeparatingFamily::from_text(&f.to_text()).unwrap();
            assert_eq!(f.curves.len(), g.curves.len());
            for (x, y) in f.curves.iter().zip(&g.curves) {
                assert_eq!(x.from, y.from);
                assert_eq!(x.pieces, y.pieces);
            }
        }
        // a cycle is rejected
        let bad = SeparatingFamily {
            curves: vec![build::radial(0.3, 0.0), build::radial(0.3, 1.0), build::radial(0.3, 2.0)],
            tangent_angles: tang.clone(),
        };
        assert!(bad.validate(&a).is_err());
    }

    #[test]
    fn non_orthogonal_end_is_rejected() {
        let d = SurfaceSpec::disk(vec![c(0.0, 0.0)]);
        let f = SeparatingFamily {
            curves: vec![Curve {
                from: Vertex::Puncture(0),
                to: Vertex::Outer,
                pieces: vec![Piece::Segment { a: c(0.0, 0.0), b: c(0.0, 0.5) }, Piece::Segment { a: c(0.0, 0.5), b: c(0.6, 0.8) }],
            }],
            tangent_angles: vec![PI / 2.0],
        };
        assert!(f.validate(&d).is_err());
    }
}
