//! The tensor layers on their own: fit a two-ring classification problem with
//! one hidden stage, a linear head and Adam.

use ifc_grl::nn::{softmax_cross_entropy, Adam, AdamConfig, Linear, Mode, Module, Stage, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rings(n: usize, rng: &mut ChaCha8Rng) -> (Tensor, Vec<usize>) {
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let radius = if class == 0 { 0.5 } else { 1.5 } + rng.random_range(-0.2..0.2);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        rows.push(vec![radius * angle.cos(), radius * angle.sin()]);
        labels.push(class);
    }
    (Tensor::from_rows(&rows).unwrap(), labels)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (x, labels) = rings(128, &mut rng);
    let mut hidden = Stage::new(2, 16, &mut rng);
    let mut head = Linear::new(16, 2, &mut rng);
    let (mut opt_hidden, mut opt_head) = (Adam::new(AdamConfig::with_lr(0.05)), Adam::new(AdamConfig::with_lr(0.05)));

    for step in 0..=200 {
        hidden.zero_grad();
        head.zero_grad();
        let logits = head.forward(&hidden.forward(&x, Mode::Train)?)?;
        let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
        hidden.backward(&head.backward(&grad)?)?;
        opt_hidden.step(&mut hidden)?;
        opt_head.step(&mut head)?;
        if step % 50 == 0 {
            println!("step {step:>3}  loss {loss:.4}");
        }
    }

    let logits = head.forward(&hidden.forward(&x, Mode::Eval)?)?;
    let correct = (0..logits.rows())
        .filter(|&r| {
            let row = logits.row(r);
            usize::from(row[1] > row[0]) == labels[r]
        })
        .count();
    println!("training accuracy {:.3} with {} parameters", correct as f64 / labels.len() as f64, hidden.parameter_count() + head.parameter_count());
    Ok(())
}
