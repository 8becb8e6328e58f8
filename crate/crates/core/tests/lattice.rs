use antiplane::lattice::{
    cell_shift_map, dist_to_origin, gamma_path, hop_ball, hop_distance, hop_distance_bfs, locate_cell, XI_REF,
};
use antiplane::topology::canonical_geodesic;
use antiplane::{Cell, Dir, LatticeDomain, Orientation, Site};
use proptest::prelude::*;

fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol
}

fn cell_strategy(r: i64) -> impl Strategy<Value = Cell> {
    (-r..=r, -r..=r, any::<bool>()).prop_map(|(n, m, up)| if up { Cell::up(n, m) } else { Cell::down(n, m) })
}

/// Distance from the origin to the segment `[a, b]`, by projection.
fn segment_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let t = (-(a[0] * d[0] + a[1] * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
    (a[0] + t * d[0]).hypot(a[1] + t * d[1])
}

#[test]
fn origin_site_position() {
    assert!(close(Site::new(0, 0).position(), [0.5, 3f64.sqrt() / 6.0], 1e-15));
    assert!(close(Site::new(0, 0).position(), [0.5, 0.28868], 1e-5));
}

#[test]
fn site_count_matches_enumeration() {
    let d = LatticeDomain::new(10.0).unwrap();
    // Brute force over a generous box of integer coefficients.
    let mut count = 0;
    for n in -40..=40 {
        for m in -40..=40 {
            let x = 0.5 + n as f64 + 0.5 * m as f64;
            let y = 3f64.sqrt() * (1.0 / 6.0 + 0.5 * m as f64);
            if x * x + y * y <= 100.0 {
                count += 1;
            }
        }
    }
    assert_eq!(d.num_sites(), count);
}

#[test]
fn c0_boundary_distances() {
    for b in Cell::C0.boundary() {
        let oracle = segment_distance(b.tail.position(), b.head().position());
        assert!((dist_to_origin(&b) - oracle).abs() < 1e-14);
        assert!((oracle - 3f64.sqrt() / 6.0).abs() < 1e-14);
    }
    assert_eq!(dist_to_origin(&Cell::C0), 0.0);
}

#[test]
fn far_pair_matches_bfs() {
    let (a, b) = (Cell::up(-9, 4), Cell::down(7, -6));
    assert_eq!(hop_distance(a, b), hop_distance_bfs(a, b));
    assert_eq!(hop_distance(a, b), 33);
}

#[test]
fn orbit_of_double_hops_is_a_lattice() {
    // Every cell reached from C0 by squared hops is a translate of C0 by an integer
    // combination of a1, a2.
    let mut frontier = vec![Cell::C0];
    let mut seen = vec![Cell::C0];
    for _ in 0..4 {
        let mut next = Vec::new();
        for c in frontier {
            for d in Dir::ALL {
                let h = c.hop(d).hop(d);
                if !seen.contains(&h) {
                    seen.push(h);
                    next.push(h);
                }
            }
        }
        frontier = next;
    }
    for c in seen {
        assert_eq!(c.orientation, Orientation::Down);
        let x = c.barycentre();
        let m = x[1] / (3f64.sqrt() / 2.0);
        let n = x[0] - 0.5 * m;
        assert!((m - m.round()).abs() < 1e-12 && (n - n.round()).abs() < 1e-12, "{c:?} at {x:?}");
    }
}

#[test]
fn l_shaped_geodesic() {
    let a = Cell::C0;
    let mut b = a;
    for d in [0, 0, 0, 1, 1, 1, 1] {
        b = b.hop(Dir::new(d));
    }
    assert_eq!(hop_distance(a, b), 7);
    let p = canonical_geodesic(a, b).unwrap();
    assert_eq!(p.len(), 7);
    assert!(p.segments.len() <= 2);
    // Replay the word with the hop operators.
    let mut c = a;
    for s in &p.segments {
        for _ in 0..s.len {
            c = c.hop(Dir::from_label(s.dir).unwrap());
        }
    }
    assert_eq!(c, b);
}

#[test]
fn domain_json_roundtrip() {
    let d = LatticeDomain::new(6.5).unwrap();
    let back = LatticeDomain::from_json(&d.to_json()).unwrap();
    assert_eq!(back.sites(), d.sites());
    assert_eq!(back.num_bonds(), d.num_bonds());
    assert!(LatticeDomain::from_json("{\"radius\": 3}").is_err());
}

#[test]
fn hop_ball_is_consistent() {
    let ball = hop_ball(Cell::up(2, 2), 6);
    for (c, d) in ball {
        assert_eq!(hop_distance(Cell::up(2, 2), c), d);
    }
}

proptest! {
    #[test]
    fn hop_distance_is_bfs(a in cell_strategy(6), b in cell_strategy(6)) {
        prop_assert_eq!(hop_distance(a, b), hop_distance_bfs(a, b));
    }

    #[test]
    fn shift_maps_c0_onto_cell(c in cell_strategy(30)) {
        let f = cell_shift_map(c);
        prop_assert_eq!(f.cell(Cell::C0), c);
        // Vertices of C0 map onto the vertices of C.
        let mut img: Vec<Site> = Cell::C0.vertices().iter().map(|&v| f.site(v)).collect();
        let mut want = c.vertices().to_vec();
        img.sort();
        want.sort();
        prop_assert_eq!(img, want);
        prop_assert!(close(f.point(Cell::C0.barycentre()), c.barycentre(), 1e-9));
        for v in Cell::C0.vertices() {
            prop_assert!(close(f.point(v.position()), f.site(v).position(), 1e-9));
            prop_assert_eq!(f.site_inv(f.site(v)), v);
        }
    }

    #[test]
    fn shift_preserves_adjacency(c in cell_strategy(20), d in cell_strategy(4)) {
        let f = cell_shift_map(c);
        for nb in d.neighbours() {
            prop_assert!(f.cell(d).is_adjacent(f.cell(nb)));
        }
        prop_assert_eq!(f.cell_inv(f.cell(d)), d);
    }

    #[test]
    fn gamma_path_reaches_xi(n in -30i64..30, m in -30i64..30) {
        let xi = Site::new(n, m);
        let path = gamma_path(xi);
        let mut end = XI_REF.position();
        let mut at = XI_REF;
        for b in &path {
            prop_assert_eq!(b.tail, at);
            let v = b.dir.vector();
            end = [end[0] + v[0], end[1] + v[1]];
            at = b.head();
        }
        prop_assert!(close(end, xi.position(), 1e-9));
        let dirs: std::collections::BTreeSet<u8> = path.iter().map(|b| b.dir.label()).collect();
        prop_assert!(dirs.len() <= 2);
    }

    #[test]
    fn hops_are_adjacent_and_invertible(c in cell_strategy(30), k in 0i64..6) {
        let h = c.hop(Dir::new(k));
        prop_assert!(h.is_adjacent(c));
        prop_assert_eq!(h.hop(Dir::new(k + 3)), c);
        let a = Dir::new(k).vector();
        let mid = [c.barycentre()[0] + 0.5 * a[0], c.barycentre()[1] + 0.5 * a[1]];
        prop_assert!(h.contains_point(mid));
    }

    #[test]
    fn locate_cell_contains_point(x in -40.0f64..40.0, y in -40.0f64..40.0) {
        prop_assert!(locate_cell([x, y]).contains_point([x, y]));
    }
}
