use crate::instance::{DistancePolicy, Instance, Point};

/// The four-customer instance used throughout the clustering/routing
/// comparison: depot (1,1), capacity 10.
pub(crate) fn four_customer() -> Instance {
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
