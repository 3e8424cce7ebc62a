use rand::Rng;

use crate::nn::{join, Conditioning, Mode, Module, NnError, Slot, SlotMut, Stage, Tensor};

/// A chain of [`Stage`]s (linear → batch norm → ReLU) with widths
/// `inputs → widths[0] → widths[1] → …`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub stages: Vec<Stage>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(inputs: usize, widths: &[usize], rng: &mut R) -> Self {
        let mut stages = Vec::with_capacity(widths.len());
        let mut prev = inputs;
        for &w in widths {
            stages.push(Stage::new(prev, w, rng));
            prev = w;
        }
        Self { stages }
    }

    pub fn inputs(&self) -> usize {
        self.stages.first().map_or(0, Stage::inputs)
    }

    pub fn outputs(&self) -> usize {
        self.stages.last().map_or(0, Stage::outputs)
    }

    pub fn widths(&self) -> Vec<usize> {
        self.stages.iter().map(Stage::outputs).collect()
    }

    pub fn macs(&self) -> usize {
        self.stages.iter().map(|s| s.linear.macs()).sum()
    }

    pub fn conditioning(&self) -> Conditioning {
        self.stages
            .iter()
            .map(Stage::conditioning)
            .fold(Conditioning::UNCONSTRAINED, Conditioning::min)
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let mut h = x.clone();
        for stage in &mut self.stages {
            h = stage.forward(&h, mode)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let mut g = grad_out.clone();
        for stage in self.stages.iter_mut().rev() {
            g = stage.backward(&g)?;
        }
        Ok(g)
    }
}

impl Module for Mlp {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        for (i, stage) in self.stages.iter().enumerate() {
            stage.visit(&join(prefix, &format!("stage{i}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        for (i, stage) in self.stages.iter_mut().enumerate() {
            stage.visit_mut(&join(prefix, &format!("stage{i}")), f);
        }
    }
}
