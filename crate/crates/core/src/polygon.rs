//! Planar polygon helpers on `(x, z)` floor coordinates.

pub type Point = [f64; 2];

/// Shoelace area, positive for counter-clockwise `(x, z)` order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// No repeated vertices and no intersections between non-adjacent edges.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if poly[i] == poly[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Even-odd crossing test. Points exactly on an edge may go either way.
pub fn contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn point_in_triangle(p: Point, a: Point, b: Point, c: Point) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(b, c, p);
    let d3 = cross(c, a, p);
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Ear-clipping triangulation of a simple polygon. Triangles come out
/// counter-clockwise and cover the polygon without overlap.
pub fn triangulate(poly: &[Point]) -> Vec<[Point; 3]> {
    let mut pts: Vec<Point> = poly.to_vec();
    if signed_area(&pts) < 0.0 {
        pts.reverse();
    }
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len().saturating_sub(2));
    let scale = pts
        .iter()
        .fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
        .max(1e-300);
    let eps = 1e-14 * scale * scale;
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ip, ic, inx) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (pts[ip], pts[ic], pts[inx]);
            let turn = cross(a, b, c);
            if turn.abs() <= eps {
                // collinear vertex contributes no area
                idx.remove(i);
                clipped = true;
                break;
            }
            if turn < 0.0 {
                continue;
            }
            let blocked = idx
                .iter()
                .any(|&k| k != ip && k != ic && k != inx && point_in_triangle(pts[k], a, b, c));
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // numerically stuck; fall back to a fan on what is left
            let a = pts[idx[0]];
            for w in idx[1..].windows(2) {
                tris.push([a, pts[w[0]], pts[w[1]]]);
            }
            return tris;
        }
    }
    if idx.len() == 3 {
        let t = [pts[idx[0]], pts[idx[1]], pts[idx[2]]];
        if cross(t[0], t[1], t[2]).abs() > eps {
            tris.push(t);
        }
    }
    tris
}

/// Sutherland-Hodgman clip of `subject` against a convex counter-clockwise polygon.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let input = std::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cin = cross(a, b, cur) >= 0.0;
            let pin = cross(a, b, prev) >= 0.0;
            if cin {
                if !pin {
                    out.push(line_hit(prev, cur, a, b));
                }
                out.push(cur);
            } else if pin {
                out.push(line_hit(prev, cur, a, b));
            }
        }
    }
    out
}

fn line_hit(p: Point, q: Point, a: Point, b: Point) -> Point {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn bbox(pts: &[Point]) -> [f64; 4] {
    pts.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
    )
}

/// Area of the intersection of two simple (possibly non-convex) polygons,
/// summed over pairs of triangles from both triangulations.
pub fn intersection_area(a: &[Point], b: &[Point]) -> f64 {
    let ta = triangulate(a);
    let tb = triangulate(b);
    let bb: Vec<[f64; 4]> = tb.iter().map(|t| bbox(t)).collect();
    let mut total = 0.0;
    for t in &ta {
        let ba = bbox(t);
        for (u, bu) in tb.iter().zip(&bb) {
            if ba[2] < bu[0] || bu[2] < ba[0] || ba[3] < bu[1] || bu[3] < ba[1] {
                continue;
            }
            let piece = clip_convex(t, u);
            if piece.len() >= 3 {
                total += area(&piece);
            }
        }
    }
    total
}
