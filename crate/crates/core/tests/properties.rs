use proptest::prelude::*;
use steadyscan::expr::SliceEnv;
use steadyscan::interval::{Interval, IntervalBox};
use steadyscan::model::Scope;
use steadyscan::propagate::{propagate_fixpoint, DEFAULT_TOL};
use steadyscan::stl::StlFormula;
use steadyscan::trace::Trace;

fn interval() -> impl Strategy<Value = Interval> {
    (-1e6f64..1e6, 0f64..1e6).prop_map(|(lo, w)| Interval::new(lo, lo + w))
}

fn inside(i: Interval, u: f64) -> f64 {
    (i.lo() + u * (i.hi() - i.lo())).clamp(i.lo(), i.hi())
}

proptest! {
    #[test]
    fn mul_and_sub_contain_point_results(a in interval(), b in interval(), u in 0f64..=1.0, v in 0f64..=1.0) {
        let (x, y) = (inside(a, u), inside(b, v));
        prop_assert!(a.mul(&b).contains(x * y));
        prop_assert!(a.sub(&b).contains(x - y));
        prop_assert!(a.hull(&b).contains(x) && a.hull(&b).contains(y));
    }

    #[test]
    fn bisection_covers(a in interval()) {
        let (l, r) = a.bisect();
        prop_assert!(l.is_subset(&a) && r.is_subset(&a));
        prop_assert_eq!(l.lo(), a.lo());
        prop_assert_eq!(r.hi(), a.hi());
        prop_assert!(l.hi() >= r.lo());
    }

    #[test]
    fn contraction_keeps_satisfying_points(c in -3f64..3.0, x in -2f64..2.0, y in -2f64..2.0) {
        let s = Scope::with_unknowns(["x", "y"]);
        let cs = vec![
            s.parse_constraint(&format!("a: x * y + x < {c}")).unwrap(),
            s.parse_constraint("b: x^2 + y^2 <= 3").unwrap(),
        ];
        let b = IntervalBox::from_pairs([("x", Interval::new(-2.0, 2.0)), ("y", Interval::new(-2.0, 2.0))]);
        let out = propagate_fixpoint(&cs, &b, DEFAULT_TOL);
        let env = SliceEnv { unknowns: &[x, y], states: &[] };
        if cs.iter().all(|k| k.check(&env).unwrap().satisfied) {
            prop_assert!(out.contains_point(&[x, y]));
        }
    }

    #[test]
    fn negation_flips_robustness(vals in prop::collection::vec(-5f64..5.0, 6), c in -4f64..4.0) {
        let times: Vec<f64> = (0..6).map(f64::from).collect();
        let rows = vals.iter().map(|v| vec![*v]).collect();
        let t = Trace::from_rows(vec!["x".into()], times, rows).unwrap();
        let f = StlFormula::parse(&format!("eventually[0, 3] (x > {c})"), &["x"]).unwrap();
        let g = StlFormula::parse(&format!("not eventually[0, 3] (x > {c})"), &["x"]).unwrap();
        let h = StlFormula::parse(&format!("always[0, 3] (x <= {c})"), &["x"]).unwrap();
        let (rf, rg, rh) = (f.robustness(&t).unwrap(), g.robustness(&t).unwrap(), h.robustness(&t).unwrap());
        prop_assert!((rf + rg).abs() <= 1e-12);
        prop_assert!((rg - rh).abs() <= 1e-12);
        // the window ends on samples, so its maximum is attained at one
        let sampled = vals[..4].iter().map(|v| v - c).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((rf - sampled).abs() <= 1e-12);
    }

    #[test]
    fn trace_csv_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 1..20)) {
        let times: Vec<f64> = (0..vals.len()).map(|k| k as f64 * 0.5).collect();
        let rows = vals.iter().map(|v| vec![*v, -v]).collect();
        let t = Trace::from_rows(vec!["a".into(), "b".into()], times, rows).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values, t.values);
        prop_assert_eq!(back.times, t.times);
    }
}
