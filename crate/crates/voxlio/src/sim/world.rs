//! Synthetic planar world: finite rectangular facets and ray casting.

use crate::geometry::Vec3;

/// A finite parallelogram facet: `corner + a*edge_u + b*edge_v` for
/// `a, b` in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Facet {
    pub corner: Vec3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
    /// Unit normal; orientation is chosen by the world builder.
    pub normal: Vec3,
}

impl Facet {
    /// Builds a facet with the normal along `edge_u x edge_v`.
    pub fn new(corner: Vec3, edge_u: Vec3, edge_v: Vec3) -> Facet {
        let normal = edge_u.cross(&edge_v).normalize();
        Facet {
            corner,
            edge_u,
            edge_v,
            normal,
        }
    }

    /// Signed plane offset `n . x - d` of a point from the facet's plane.
    pub fn plane_offset(&self, point: &Vec3) -> f64 {
        self.normal.dot(&(point - self.corner))
    }

    /// Range along the unit ray `origin + t*dir` to the facet interior, if
    /// the hit lies within the rectangle and in front of the origin.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let denom = dir.dot(&self.normal);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.corner - origin).dot(&self.normal) / denom;
        if t <= 1e-9 {
            return None;
        }
        let hit = origin + dir * t - self.corner;
        // Local (a, b) via the 2x2 Gram system of the edge basis.
        let uu = self.edge_u.norm_squared();
        let vv = self.edge_v.norm_squared();
        let uv = self.edge_u.dot(&self.edge_v);
        let hu = hit.dot(&self.edge_u);
        let hv = hit.dot(&self.edge_v);
        let det = uu * vv - uv * uv;
        if det.abs() < 1e-12 {
            return None;
        }
        let a = (hu * vv - hv * uv) / det;
        let b = (hv * uu - hu * uv) / det;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return None;
        }
        Some(t)
    }
}

/// A collection of facets forming the scanned environment.
#[derive(Debug, Clone)]
pub struct PlanarWorld {
    pub facets: Vec<Facet>,
}

impl PlanarWorld {
    /// Axis-aligned rectangular room `[0, sx] x [0, sy] x [0, sz]` with
    /// inward-facing normals: floor, ceiling, and four walls.
    pub fn room(size: [f64; 3]) -> PlanarWorld {
        let [sx, sy, sz] = size;
        let x = Vec3::new(sx, 0.0, 0.0);
        let y = Vec3::new(0.0, sy, 0.0);
        let z = Vec3::new(0.0, 0.0, sz);
        let o = Vec3::zeros();
        PlanarWorld {
            facets: vec![
                Facet::new(o, x, y),                         // floor, +z
                Facet::new(Vec3::new(0.0, 0.0, sz), y, x),   // ceiling, -z
                Facet::new(o, y, z),                         // wall x=0, +x
                Facet::new(Vec3::new(sx, 0.0, 0.0), z, y),   // wall x=sx, -x
                Facet::new(o, z, x),                         // wall y=0, +y
                Facet::new(Vec3::new(0.0, sy, 0.0), x, z),   // wall y=sy, -y
            ],
        }
    }

    /// Nearest facet hit within `max_range`: smallest range wins, ties keep
    /// the lowest facet index (strict-less comparison), so results are
    /// independent of any parallel evaluation order.
    pub fn cast_ray(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (idx, facet) in self.facets.iter().enumerate() {
            if let Some(t) = facet.raycast(origin, dir) {
                if t <= max_range && best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, idx));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nadir_ray_from_two_meters_hits_the_floor_at_range_two() {
        let world = PlanarWorld::room([20.0, 15.0, 5.0]);
        let hit = world.cast_ray(&Vec3::new(10.0, 7.5, 2.0), &Vec3::new(0.0, 0.0, -1.0), 50.0);
        let (range, facet) = hit.expect("floor must be hit");
        assert_relative_eq!(range, 2.0, epsilon = 1e-12);
        assert_eq!(facet, 0);
    }

    #[test]
    fn room_normals_point_inward() {
        let world = PlanarWorld::room([20.0, 15.0, 5.0]);
        let inside = Vec3::new(10.0, 7.5, 2.5);
        for facet in &world.facets {
            assert!(
                facet.plane_offset(&inside) > 0.0,
                "interior point must be on the normal side"
            );
            assert_relative_eq!(facet.normal.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hits_lie_exactly_on_their_facet_plane_and_inside_bounds() {
        let world = PlanarWorld::room([20.0, 15.0, 5.0]);
        let origin = Vec3::new(4.0, 3.0, 1.0);
        let mut hits = 0;
        for i in 0..200 {
            let az = i as f64 * 0.03141;
            for el in [-0.7f64, -0.2, 0.1, 0.6] {
                let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                if let Some((t, idx)) = world.cast_ray(&origin, &dir, 100.0) {
                    hits += 1;
                    let p = origin + dir * t;
                    assert!(
                        world.facets[idx].plane_offset(&p).abs() < 1e-10,
                        "hit point must satisfy the facet plane equation"
                    );
                    assert!(p.x >= -1e-9 && p.x <= 20.0 + 1e-9);
                    assert!(p.y >= -1e-9 && p.y <= 15.0 + 1e-9);
                    assert!(p.z >= -1e-9 && p.z <= 5.0 + 1e-9);
                }
            }
        }
        assert_eq!(hits, 800, "a closed room returns every ray");
    }

    #[test]
    fn nearest_facet_wins_and_misses_return_none() {
        let world = PlanarWorld::room([20.0, 15.0, 5.0]);
        // From the center toward the near wall x=0: distance 10, while the
        // far wall at x=20 is behind the direction of travel.
        let (t, idx) = world
            .cast_ray(&Vec3::new(10.0, 7.5, 2.5), &Vec3::new(-1.0, 0.0, 0.0), 50.0)
            .unwrap();
        assert_relative_eq!(t, 10.0, epsilon = 1e-12);
        assert_eq!(idx, 2);
        // Max-range cutoff turns the same ray into a miss.
        assert!(world
            .cast_ray(&Vec3::new(10.0, 7.5, 2.5), &Vec3::new(-1.0, 0.0, 0.0), 9.0)
            .is_none());
        // A corner-diagonal ray ties between floor and two walls: the
        // lowest facet index (floor) is kept.
        let corner_dir = Vec3::new(-1.0, -1.0, -1.0) / 3f64.sqrt();
        let start = Vec3::new(2.0, 2.0, 2.0);
        let (_, idx) = world.cast_ray(&start, &corner_dir, 50.0).unwrap();
        assert_eq!(idx, 0, "tie must resolve to the first facet");
    }

    #[test]
    fn rays_parallel_to_a_facet_do_not_hit_it() {
        let facet = Facet::new(
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        assert!(facet
            .raycast(&Vec3::new(0.5, 0.5, 1.0), &Vec3::new(1.0, 0.0, 0.0))
            .is_none());
        // And hits behind the origin are rejected.
        assert!(facet
            .raycast(&Vec3::new(0.5, 0.5, -1.0), &Vec3::new(0.0, 0.0, -1.0))
            .is_none());
    }
}
