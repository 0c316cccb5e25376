//! Bound add/drop rule of the projection.
//!
//! Bounds are written `h = −ρ_e + ρ_min` (lower, gradient `−e_e`) and
//! `h = ρ_e − 1` (upper, gradient `+e_e`). With `t_e = λ_v v_e − f_e` the
//! unconstrained direction component of a bound element:
//!
//! | bound | t_e  | decision | bound multiplier   |
//! |-------|------|----------|--------------------|
//! | lower | < 0  | hold     | `t_e` (negative)   |
//! | lower | = 0  | release  | none               |
//! | lower | > 0  | release  | none               |
//! | upper | > 0  | hold     | `−t_e` (negative)  |
//! | upper | = 0  | release  | none               |
//! | upper | < 0  | release  | none               |
//!
//! A held bound has `d_e = 0` exactly; a released one moves into the box.

use topopt::projection::Projection;
use topopt::simp_model::DesignField;

const RHO_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
enum Bound {
    Lower,
    Upper,
}

struct Row {
    bound: Bound,
    f0: f64,
    held: bool,
    lambda_volume: f64,
    d0: f64,
}

// Elements 1 and 2 are interior with f = −2, so λ_v = −2 whenever element 0
// is held and t_0 = −2 − f_0.
const TABLE: [Row; 6] = [
    Row { bound: Bound::Lower, f0: -1.0, held: true, lambda_volume: -2.0, d0: 0.0 },
    Row { bound: Bound::Lower, f0: -2.0, held: false, lambda_volume: -2.0, d0: 0.0 },
    Row { bound: Bound::Lower, f0: -3.0, held: false, lambda_volume: -7.0 / 3.0, d0: 2.0 / 3.0 },
    Row { bound: Bound::Upper, f0: -3.0, held: true, lambda_volume: -2.0, d0: 0.0 },
    Row { bound: Bound::Upper, f0: -2.0, held: false, lambda_volume: -2.0, d0: 0.0 },
    Row { bound: Bound::Upper, f0: -1.0, held: false, lambda_volume: -5.0 / 3.0, d0: -2.0 / 3.0 },
];

fn field(bound: Bound) -> DesignField {
    let r0 = match bound {
        Bound::Lower => RHO_MIN,
        Bound::Upper => 1.0,
    };
    DesignField::new(vec![r0, 0.5, 0.5], RHO_MIN, r0 + 1.0, vec![1.0; 3]).unwrap()
}

#[test]
fn truth_table() {
    for (i, row) in TABLE.iter().enumerate() {
        let f = field(row.bound);
        let g = [row.f0, -2.0, -2.0];
        let p = Projection::compute(&g, &f).unwrap();
        let set = match row.bound {
            Bound::Lower => &p.active.lower_active,
            Bound::Upper => &p.active.upper_active,
        };
        assert_eq!(set.contains(&0), row.held, "row {i}");
        assert!(p.active.volume_active, "row {i}");
        assert!((p.multipliers.lambda_volume - row.lambda_volume).abs() < 1e-14, "row {i}");
        assert!((p.direction.d[0] - row.d0).abs() < 1e-14, "row {i}");
        if row.held {
            assert_eq!(p.direction.d[0], 0.0, "row {i}");
            let t = row.lambda_volume - row.f0;
            let expected = match row.bound {
                Bound::Lower => t,
                Bound::Upper => -t,
            };
            let lb = p.multipliers.lambda_bounds[&0];
            assert!(lb < 0.0, "row {i}");
            assert!((lb - expected).abs() < 1e-14, "row {i}");
        } else {
            assert!(!p.multipliers.lambda_bounds.contains_key(&0), "row {i}");
        }
    }
}

#[test]
fn released_bounds_point_into_the_box() {
    for row in TABLE.iter().filter(|r| !r.held) {
        let f = field(row.bound);
        let p = Projection::compute(&[row.f0, -2.0, -2.0], &f).unwrap();
        match row.bound {
            Bound::Lower => assert!(p.direction.d[0] >= 0.0),
            Bound::Upper => assert!(p.direction.d[0] <= 0.0),
        }
    }
}

