use queuecap::capacity::{
    cf_lambda, default_lambda_grid, g_bound_lambda, sweep, CurveDocument, Verdict,
};
use queuecap::dist::ServiceModel;
use queuecap::entmax::SolverOptions;

#[test]
fn sweep_outputs_are_consistent() {
    let s = ServiceModel::<f64>::uniform_range(1, 2).unwrap();
    let opts = SolverOptions::default();
    let grid = default_lambda_grid(s.rate_mu, 8);
    let curve = sweep(&s, &[0, 1], &grid, &opts).unwrap();

    let csv = curve.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,c_full_bits,g_tau0_bits,g_tau1_bits,verdict,gap,error_bound");
    assert_eq!(lines.len(), 1 + grid.len());
    for (line, row) in lines[1..].iter().zip(&curve.rows) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[0].parse::<f64>().unwrap(), row.lambda);
        assert_eq!(cells[4], row.verdict.unwrap().to_string());
    }

    for row in &curve.rows {
        for &g in &row.g_bits {
            assert!(g <= row.c_full_bits + row.full_error_bits);
        }
        assert_eq!(row.verdict, Some(Verdict::Strict), "λ={}", row.lambda);
    }
    let (lstar, cstar) = curve.sup_full;
    assert!(grid[0] < lstar && lstar < grid[grid.len() - 1]);
    assert!(curve.full_values().iter().all(|&v| v <= cstar + 1e-12));
    assert!((cf_lambda(&s, lstar, &opts).unwrap() - cstar).abs() < 1e-12);

    let doc = CurveDocument::new(&s, &opts, curve);
    let text = serde_json::to_string_pretty(&doc).unwrap();
    let back: CurveDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back, doc);
    assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
}

#[test]
fn bound_meets_full_value_without_residual_feedback() {
    let s = ServiceModel::<f64>::uniform_range(1, 2).unwrap();
    let opts = SolverOptions::default();
    for lambda in [0.1, 0.35, 0.6] {
        let cf = cf_lambda(&s, lambda, &opts).unwrap();
        assert!((g_bound_lambda(&s, lambda, 2, &opts).unwrap() - cf).abs() < 1e-12);
        assert!(g_bound_lambda(&s, lambda, 1, &opts).unwrap() < cf);
    }
}

#[test]
fn bad_grids_are_rejected() {
    let s = ServiceModel::<f64>::uniform_range(1, 2).unwrap();
    let opts = SolverOptions::default();
    assert!(sweep(&s, &[1], &[], &opts).is_err());
    assert!(sweep(&s, &[1], &[s.rate_mu], &opts).is_err());
    assert!(sweep(&s, &[1], &[-0.1], &opts).is_err());
}
