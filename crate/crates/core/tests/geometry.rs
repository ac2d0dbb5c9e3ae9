use liouville_area::grid::{rectangle_mask, triangle_mask, GridSpec, Triangle};
use liouville_area::Point2;
use proptest::prelude::*;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

#[test]
fn right_triangle_area() {
    let h = 1.0 / 256.0;
    let grid = GridSpec::new(-1.0, -1.0, h, 768, 768).unwrap();
    let tri = Triangle::new(p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0));
    let (mask, eps) = triangle_mask(&tri, &grid);
    let perimeter = 2.0 + 2f64.sqrt();
    assert_eq!(eps, 1);
    assert!((mask.area() - 0.5).abs() <= 3.0 * h * perimeter);

    let (cw, eps_cw) = triangle_mask(&tri.reversed(), &grid);
    assert_eq!(eps_cw, -1);
    assert_eq!(cw, mask);
}

#[test]
fn thin_rectangle_area() {
    let h = 1.0 / 1024.0;
    let grid = GridSpec::new(0.0, 0.0, h, 1024, 1024).unwrap();
    let m = rectangle_mask(0.0, 0.3, 0.0, 0.7, &grid);
    assert!((m.area() - 0.21).abs() <= 4.0 * h);
}

proptest! {
    #[test]
    fn triangle_area_within_boundary_bound(
        ax in -0.9f64..0.9, ay in -0.9f64..0.9,
        bx in -0.9f64..0.9, by in -0.9f64..0.9,
        cx in -0.9f64..0.9, cy in -0.9f64..0.9,
    ) {
        let h = 1.0 / 128.0;
        let grid = GridSpec::new(-1.0, -1.0, h, 256, 256).unwrap();
        let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
        let tri = Triangle::new(a, b, c);
        let (mask, _) = triangle_mask(&tri, &grid);
        let exact = 0.5 * ((b - a).cross(c - a)).abs();
        let perimeter = a.dist(b) + b.dist(c) + c.dist(a);
        prop_assert!((mask.area() - exact).abs() <= 3.0 * h * perimeter);
    }

    #[test]
    fn orientation_is_cyclic_and_flips_on_swap(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0,
        bx in -1.0f64..1.0, by in -1.0f64..1.0,
        cx in -1.0f64..1.0, cy in -1.0f64..1.0,
    ) {
        let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
        let o = Triangle::new(a, b, c).orientation();
        prop_assert_eq!(Triangle::new(b, c, a).orientation(), o);
        prop_assert_eq!(Triangle::new(b, a, c).orientation(), -o);
    }

    #[test]
    fn union_and_intersection_areas_add_up(
        r1 in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        r2 in (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
    ) {
        let grid = GridSpec::new(0.0, 0.0, 1.0 / 64.0, 64, 64).unwrap();
        let rect = |(a, b, c, d): (f64, f64, f64, f64)| rectangle_mask(a.min(b), a.max(b), c.min(d), c.max(d), &grid);
        let (m1, m2) = (rect(r1), rect(r2));
        let u = m1.union(&m2).unwrap().area();
        let i = m1.intersection(&m2).unwrap().area();
        prop_assert!((u + i - m1.area() - m2.area()).abs() < 1e-12);
    }
}
