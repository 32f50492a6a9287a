use super::params::{flatten, Parameters};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_block: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compare `analytic` gradients against central differences of `loss`
/// for every parameter. Relative error is |a − n| / max(|a|, |n|, 1e-6).
pub fn gradient_check<P, F>(params: &P, eps: f64, loss: F, analytic: &P) -> GradCheckReport
where
    P: Parameters,
    F: Fn(&P) -> f64,
{
    let grads = flatten(analytic);
    let shapes: Vec<(String, usize)> = flatten(params)
        .into_iter()
        .map(|(n, b)| (n, b.len()))
        .collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_block: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (block, (name, len)) in shapes.iter().enumerate() {
        for i in 0..*len {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let mut k = 0;
                p.visit_mut("", &mut |_, b| {
                    if k == block {
                        b[i] += delta;
                    }
                    k += 1;
                });
                loss(&p)
            };
            let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let a = grads[block].1[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst_block.is_empty() {
                report.max_rel_error = rel;
                report.worst_block = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{mse_loss, Lstm};
    use ndarray::Array3;
    use rand::Rng;

    #[test]
    fn corrupted_backward_is_caught() {
        let mut rng = crate::seed::rng(5);
        let l = Lstm::new(2, 3, &mut rng);
        let x = Array3::from_shape_fn((2, 4, 2), |_| rng.gen_range(-1.0..1.0));
        let target = Array3::from_shape_fn((2, 4, 3), |_| rng.gen_range(-1.0..1.0));
        let loss = |m: &Lstm| {
            mse_loss(m.forward(x.view()).unwrap().0.view(), target.view())
                .unwrap()
                .0
        };
        let (y, cache) = l.forward(x.view()).unwrap();
        let (_, g) = mse_loss(y.view(), target.view()).unwrap();
        let (mut grads, _) = l.backward(&cache, g.view()).unwrap();
        grads.u.mapv_inplace(|v| -v);
        let report = gradient_check(&l, 1e-5, loss, &grads);
        assert!(report.max_rel_error > 1e-1);
        assert_eq!(report.worst_block, "U");
    }
}
