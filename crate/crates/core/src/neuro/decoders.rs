use nalgebra::DMatrix;

use super::ensemble::Ensemble;
use crate::error::{check_len, Error, Result};
use crate::exec::{map_indexed, Execution};

/// Default ridge fraction of the peak activity.
pub const DEFAULT_REG: f64 = 0.1;

/// Least-squares decoders for `targets` sampled at `eval_points`.
///
/// Minimizes `‖A·d − T‖² + (reg·max(A))²·‖d‖²` where `A` holds the
/// steady-state rates at each evaluation point. Returns the row-major
/// `n_neurons × dim_out` decoder matrix.
pub fn solve_decoders(
    ens: &Ensemble,
    eval_points: &[Vec<f64>],
    targets: &[Vec<f64>],
    reg: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_len("decoder targets", eval_points.len(), targets.len())?;
    if eval_points.is_empty() {
        return Err(Error::ContractViolation("no evaluation points".into()));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::ContractViolation(format!("regularization {reg} must be >= 0")));
    }
    for t in targets {
        check_len("decoder target", ens.dim_out(), t.len())?;
    }

    let rows = map_indexed(exec, eval_points.len(), |k| ens.rates(&eval_points[k]));
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let m = rows.len();
    let n = ens.n_neurons();
    let activities = DMatrix::from_fn(m, n, |r, c| rows[r][c]);
    let values = DMatrix::from_fn(m, ens.dim_out(), |r, c| targets[r][c]);

    let max_rate = activities.iter().cloned().fold(0.0, f64::max);
    let sigma = reg * max_rate;
    let mut gram = activities.tr_mul(&activities);
    for i in 0..n {
        gram[(i, i)] += sigma * sigma;
    }
    let rhs = activities.tr_mul(&values);

    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("gram matrix is not positive definite".into()))?;
    if sigma == 0.0 {
        let diag = chol.l_dirty().diagonal();
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        if !(lo > 0.0) || (lo / hi).powi(2) < 1e-14 {
            return Err(Error::NumericalFailure(
                "activity matrix is singular and no regularization was requested".into(),
            ));
        }
    }
    let solution = chol.solve(&rhs);
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("decoder solve produced non-finite values".into()));
    }
    // nalgebra is column-major; decoders are stored row-major
    Ok((0..n)
        .flat_map(|i| (0..ens.dim_out()).map(move |c| (i, c)))
        .map(|(i, c)| solution[(i, c)])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro::{LifParams, NeuronMode};

    fn single() -> Ensemble {
        Ensemble::from_parts(
            vec![1.0],
            vec![3.0],
            vec![0.5],
            1,
            1,
            LifParams::default(),
            0.01,
            NeuronMode::Rate,
        )
        .unwrap()
    }

    #[test]
    fn zero_targets_give_zero_decoders() {
        let ens = single();
        let pts: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64 / 10.0]).collect();
        let tg = vec![vec![0.0]; 10];
        let d = solve_decoders(&ens, &pts, &tg, 0.1, Execution::Sequential).unwrap();
        assert_eq!(d, vec![0.0]);
    }

    #[test]
    fn scalar_ridge_formula() {
        let ens = single();
        let a = ens.rates(&[0.7]).unwrap()[0];
        let (t, r) = (2.5, 0.1);
        let d = solve_decoders(&ens, &[vec![0.7]], &[vec![t]], r, Execution::Sequential).unwrap();
        let expected = a * t / (a * a + (r * a).powi(2));
        assert!((d[0] - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn unregularized_singular_system_fails() {
        // two identical neurons make the gram matrix singular
        let ens = Ensemble::from_parts(
            vec![1.0, 1.0],
            vec![3.0, 3.0],
            vec![0.5, 0.5],
            1,
            1,
            LifParams::default(),
            0.01,
            NeuronMode::Rate,
        )
        .unwrap();
        let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 / 20.0]).collect();
        let tg = pts.clone();
        let err = solve_decoders(&ens, &pts, &tg, 0.0, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
        // the same system is fine once regularized
        assert!(solve_decoders(&ens, &pts, &tg, 0.1, Execution::Sequential).is_ok());
    }

    #[test]
    fn silent_neuron_is_still_solvable() {
        let ens = Ensemble::from_parts(
            vec![1.0, 1.0],
            vec![3.0, 1.0],
            vec![0.5, -5.0],
            1,
            1,
            LifParams::default(),
            0.01,
            NeuronMode::Rate,
        )
        .unwrap();
        let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 / 20.0]).collect();
        let d = solve_decoders(&ens, &pts, &pts, 0.1, Execution::Sequential).unwrap();
        assert_eq!(d[1], 0.0);
    }
}
