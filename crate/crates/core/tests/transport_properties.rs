use wagner_core::connection::{Connection, ConnectionOptions};
use wagner_core::presets;
use wagner_core::transport::{heisenberg_circle, observed_order, transport, Curve, TransportMode};

fn conn(metric: &str) -> Connection {
    Connection::new(presets::chart("HEIS5").unwrap(), presets::metric(metric).unwrap(), ConnectionOptions::default()).unwrap()
}

const V0: [f64; 4] = [0.6, -0.3, 0.8, 0.2];

#[test]
fn circle_conserves_energy() {
    for name in ["WARP5", "RAND5", "CURV5"] {
        let r = transport(&conn(name), &heisenberg_circle(1000).unwrap(), &V0, TransportMode::Interior).unwrap();
        assert!(r.f_drift <= 1e-8, "{name}: {}", r.f_drift);
        assert!(r.max_admissibility_defect <= 1e-12);
    }
}

#[test]
fn warp5_fourth_order_convergence() {
    let c = conn("WARP5");
    let drift = |steps| transport(&c, &heisenberg_circle(steps).unwrap(), &V0, TransportMode::Interior).unwrap().f_drift;
    let (d1, d2, d3) = (drift(20), drift(40), drift(80));
    let o1 = observed_order(d1, d2).unwrap();
    let o2 = observed_order(d2, d3).unwrap();
    assert!(o1 >= 3.5 && o2 >= 3.5, "orders {o1} {o2} from {d1} {d2} {d3}");
}

#[test]
fn linear_for_quadratic_metrics() {
    for name in ["WARP5", "CURV5"] {
        let c = conn(name);
        let curve = heisenberg_circle(200).unwrap();
        let base = transport(&c, &curve, &V0, TransportMode::Interior).unwrap();
        let alpha = -2.5;
        let scaled: Vec<f64> = V0.iter().map(|x| alpha * x).collect();
        let r = transport(&c, &curve, &scaled, TransportMode::Interior).unwrap();
        for (a, b) in base.final_v().iter().zip(r.final_v()) {
            assert!((alpha * a - b).abs() <= 1e-10, "{name}");
        }
    }
}

#[test]
fn reversal_returns_initial_vector() {
    let c = conn("CURV5");
    let fwd = Curve::parse(&["cos(t) - 1", "sin(t)", "0", "0", "-(t/2 - sin(2*t)/4)"], [0.0, 2.0], 400).unwrap();
    let there = transport(&c, &fwd, &V0, TransportMode::Interior).unwrap();
    let back = Curve::parse(&["cos(2 - t) - 1", "sin(2 - t)", "0", "0", "-((2 - t)/2 - sin(2*(2 - t))/4)"], [0.0, 2.0], 400).unwrap();
    let home = transport(&c, &back, there.final_v(), TransportMode::Interior).unwrap();
    for (a, b) in home.final_v().iter().zip(&V0) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn extended_mode_on_reeb_line() {
    let c = conn("CURV5");
    let reeb = Curve::parse(&["0", "0", "0", "0", "t"], [0.0, 1.0], 200).unwrap();
    let r = transport(&c, &reeb, &[1.0, 0.0, 0.0, 0.0], TransportMode::Extended).unwrap();
    assert_eq!(r.trace.len(), 201);
    assert!(r.trace.windows(2).all(|w| w[1].t > w[0].t));
    assert!(r.f_drift.is_finite());
    let flat = transport(&conn("WARP5"), &reeb, &[1.0, 0.0, 0.0, 0.0], TransportMode::Extended).unwrap();
    assert_eq!(flat.f_drift, 0.0);
}

#[test]
fn zero_connection_is_exact() {
    let c = conn("F_EUC");
    let wiggle = Curve::parse(&["sin(3*t)", "t^2", "cos(t)", "exp(t)", "t"], [0.0, 2.0], 300).unwrap();
    for (curve, mode) in [(heisenberg_circle(500).unwrap(), TransportMode::Interior), (wiggle, TransportMode::Extended)] {
        let r = transport(&c, &curve, &V0, mode).unwrap();
        for s in &r.trace {
            assert!(s.v.iter().zip(&V0).all(|(a, b)| a.to_bits() == b.to_bits()), "v moved at t = {}", s.t);
        }
        assert_eq!(r.f_drift, 0.0);
    }
}
