//! Fits the multinomial logistic regression on toy data and checks the
//! analytic gradient against central differences.

use tcm::supervised::{fit_lr, LrConfig, LrObjective};

fn main() -> tcm::Result<()> {
    // three classes separated along the first feature
    let x: Vec<Vec<f64>> = (0..30)
        .map(|i| vec![(i / 10) as f64 + 0.05 * (i % 10) as f64, (i % 3) as f64])
        .collect();
    let y: Vec<usize> = (0..30).map(|i| i / 10 + 1).collect();

    let model = fit_lr(&x, &y, 3, LrConfig::default(), 7)?;
    let hits = x
        .iter()
        .zip(&y)
        .filter(|(row, &label)| model.predict(row).ok() == Some(label))
        .count();
    println!(
        "loss {:.4} -> {:.4}, train accuracy {hits}/30",
        model.loss_history[0],
        model.final_loss()
    );

    let y0: Vec<usize> = y.iter().map(|v| v - 1).collect();
    let obj = LrObjective::new(x, y0, 3, 1e-3)?;
    let params: Vec<f64> = (0..obj.n_params())
        .map(|i| 0.1 * (i as f64).sin())
        .collect();
    let grad = obj.gradient(&params);
    let h = 1e-5;
    let mut worst = 0f64;
    let mut p = params.clone();
    for i in 0..params.len() {
        p[i] = params[i] + h;
        let up = obj.loss(&p);
        p[i] = params[i] - h;
        let down = obj.loss(&p);
        p[i] = params[i];
        worst = worst.max((grad[i] - (up - down) / (2.0 * h)).abs());
    }
    println!("max |analytic - numeric| gradient = {worst:.2e}");
    Ok(())
}
