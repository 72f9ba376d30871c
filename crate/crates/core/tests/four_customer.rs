use ctr3_core::explorer::{classify_instance, ClassifyOptions, InstanceClass};
use ctr3_core::oracles::exact_cvrp;
use ctr3_core::{ctr3_solve, validate_solution, CcbcConfig, Ctr3Config, DistancePolicy, Instance, Point};

fn instance() -> Instance {
    Instance::new(
        "I-star",
        Point::new(1.0, 1.0),
        &[
            (Point::new(2.0, 3.0), 6.0),
            (Point::new(3.0, 3.0), 1.0),
            (Point::new(2.0, 5.0), 1.0),
            (Point::new(1.0, 7.0), 8.0),
        ],
        10.0,
        DistancePolicy::Exact,
    )
    .unwrap()
}

#[test]
fn pipeline_recovers_the_routing_optimum() {
    let inst = instance();
    let cfg = Ctr3Config { ccbc: CcbcConfig { n_starts: 50, ..CcbcConfig::default() }, ..Ctr3Config::default() };
    let res = ctr3_solve(&inst, &cfg);
    let exact = exact_cvrp(&inst, None).unwrap();
    assert!(validate_solution(&inst, &res.solution).is_empty());
    assert!((res.solution.total_cost - exact.value).abs() < 1e-9);
    assert_eq!(res.solution.partition(), vec![vec![1], vec![2, 3, 4]]);
    assert!(res.routed_best.total_cost > exact.value + 0.5);
    assert!(res.relink.unwrap().improved);
}

#[test]
fn clustering_optimum_is_not_routing_optimum() {
    let c = classify_instance(&instance(), ClassifyOptions::default()).unwrap();
    assert_eq!(c.class, InstanceClass::I2);
    assert_eq!(c.cvrp_partition, vec![vec![1], vec![2, 3, 4]]);
    assert!(c.gap_withinss_pct.unwrap() > 0.0);
}
