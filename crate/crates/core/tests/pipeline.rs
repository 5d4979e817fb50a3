use geosink::bench::make_swiss_roll;
use geosink::transport::{mccann_interpolate, GeodesicPlan};
use geosink::{
    build_filter, geodesic_sinkhorn, knn_alpha_decay_graph, laplacian, sinkhorn_barycenter, Distribution,
    DistributionFamily, LaplacianKind, SinkhornParams, VertexWeights,
};

#[test]
fn points_to_distance_barycenter_and_interpolant() {
    let sample = make_swiss_roll(3, 60, 0.6, 3, 1).unwrap();
    let adjacency = knn_alpha_decay_graph(&sample.ambient, 8, 10.0).unwrap();
    let lap = laplacian(&adjacency, LaplacianKind::Normalized).unwrap();
    let filter = build_filter(&lap, 20.0, 60).unwrap();
    let n = sample.ambient.len();
    let member = |c: usize| Distribution::indicator(n, &(c * 60..(c + 1) * 60).collect::<Vec<_>>()).unwrap();
    let a = VertexWeights::uniform(n);
    let params = SinkhornParams { max_iter: 2000, tol: 1e-8 };

    let self_cost = geodesic_sinkhorn(&filter, &member(0), &member(0), &a, &params).unwrap();
    let cross = geodesic_sinkhorn(&filter, &member(0), &member(1), &a, &params).unwrap();
    let back = geodesic_sinkhorn(&filter, &member(1), &member(0), &a, &params).unwrap();
    assert!(self_cost.converged && cross.converged);
    assert!(cross.cost > self_cost.cost);
    assert!((cross.cost - back.cost).abs() < 1e-8 * cross.cost.abs());

    let family = DistributionFamily::uniform(vec![member(0), member(1), member(2)], "all").unwrap();
    let bary = sinkhorn_barycenter(&filter, &family, &a, &params).unwrap();
    let w = bary.barycenter.weights();
    assert!(w.iter().all(|&x| x >= 0.0));
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let plan = GeodesicPlan { op: &filter, result: &cross, a: &a };
    let mid = mccann_interpolate(&sample.ambient, &sample.ambient, &plan, 0.5, 50, 3).unwrap();
    assert_eq!(mid.len(), 50);
    assert_eq!(mid, mccann_interpolate(&sample.ambient, &sample.ambient, &plan, 0.5, 50, 3).unwrap());
}
