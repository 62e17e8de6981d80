//! Six-node isoparametric triangle.
//!
//! Local node order: corners 1, 2, 3 counter-clockwise, then the mid-edge
//! nodes of edges 1-2, 2-3 and 3-1. Local coordinates `(xi, eta)` live on the
//! unit triangle with corner 1 at the origin.

/// Local coordinates of a point inside the reference triangle.
pub type LocalPoint = [f64; 2];

pub const NODE_LOCAL_COORDS: [LocalPoint; 6] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [0.5, 0.0],
    [0.5, 0.5],
    [0.0, 0.5],
];

/// Three-point rule, exact for quadratics: `(xi, eta, weight)`.
pub const GAUSS_POINTS: [(f64, f64, f64); 3] = [
    (1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0),
    (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
    (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
];

pub fn gauss_points() -> impl Iterator<Item = (LocalPoint, f64)> {
    GAUSS_POINTS.iter().map(|&(a, b, w)| ([a, b], w))
}

pub fn shape_values(p: LocalPoint) -> [f64; 6] {
    let (l2, l3) = (p[0], p[1]);
    let l1 = 1.0 - l2 - l3;
    [
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        l3 * (2.0 * l3 - 1.0),
        4.0 * l1 * l2,
        4.0 * l2 * l3,
        4.0 * l3 * l1,
    ]
}

/// `[dN/dxi, dN/deta]` per node.
pub fn shape_gradients_local(p: LocalPoint) -> [[f64; 2]; 6] {
    let (l2, l3) = (p[0], p[1]);
    let l1 = 1.0 - l2 - l3;
    [
        [-(4.0 * l1 - 1.0), -(4.0 * l1 - 1.0)],
        [4.0 * l2 - 1.0, 0.0],
        [0.0, 4.0 * l3 - 1.0],
        [4.0 * (l1 - l2), -4.0 * l2],
        [4.0 * l3, 4.0 * l2],
        [-4.0 * l3, 4.0 * (l1 - l3)],
    ]
}

/// Physical coordinates of a local point.
pub(crate) fn map_point(x: &[[f64; 2]; 6], p: LocalPoint) -> [f64; 2] {
    let n = shape_values(p);
    let mut out = [0.0; 2];
    for (ni, xi) in n.iter().zip(x) {
        out[0] += ni * xi[0];
        out[1] += ni * xi[1];
    }
    out
}

/// Jacobian `dX/d(xi, eta)` as `[[dX/dxi, dX/deta], [dY/dxi, dY/deta]]`.
pub(crate) fn jacobian(x: &[[f64; 2]; 6], p: LocalPoint) -> [[f64; 2]; 2] {
    let g = shape_gradients_local(p);
    let mut j = [[0.0; 2]; 2];
    for (gi, xi) in g.iter().zip(x) {
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] += xi[a] * gi[b];
            }
        }
    }
    j
}

pub(crate) fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Physical shape-function gradients and `det J` at a local point.
pub(crate) fn shape_gradients_physical(x: &[[f64; 2]; 6], p: LocalPoint) -> ([[f64; 2]; 6], f64) {
    let j = jacobian(x, p);
    let det = det2(&j);
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let g = shape_gradients_local(p);
    let mut out = [[0.0; 2]; 6];
    for (o, gi) in out.iter_mut().zip(g.iter()) {
        // dN/dX_k = dN/dxi_a * dxi_a/dX_k
        o[0] = gi[0] * inv[0][0] + gi[1] * inv[1][0];
        o[1] = gi[0] * inv[0][1] + gi[1] * inv[1][1];
    }
    (out, det)
}

/// Newton inversion of the isoparametric map. Returns `None` when the
/// iteration does not converge.
pub(crate) fn invert_map(x: &[[f64; 2]; 6], target: [f64; 2]) -> Option<LocalPoint> {
    let scale = x
        .iter()
        .map(|p| (p[0] - x[0][0]).abs().max((p[1] - x[0][1]).abs()))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut p = [1.0 / 3.0, 1.0 / 3.0];
    for _ in 0..30 {
        let cur = map_point(x, p);
        let r = [cur[0] - target[0], cur[1] - target[1]];
        let j = jacobian(x, p);
        let det = det2(&j);
        if det.abs() < 1e-300 {
            return None;
        }
        let dxi = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
        let deta = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
        p[0] -= dxi;
        p[1] -= deta;
        if dxi.abs().max(deta.abs()) < 1e-15 || r[0].abs().max(r[1].abs()) < 1e-16 * scale {
            return Some(p);
        }
    }
    let cur = map_point(x, p);
    ((cur[0] - target[0]).abs().max((cur[1] - target[1]).abs()) < 1e-12 * scale).then_some(p)
}
