//! Fully connected layer over `(N, In) -> (N, Out)`.

use ndarray::Array2;

use crate::elem::Elem;
use crate::nn::param::{Mode, Param};

pub struct Linear<T> {
    pub weight: Param<T>, // (Out, In)
    pub bias: Option<Param<T>>,
    in_dim: usize,
    out_dim: usize,
    cache: Option<Array2<T>>,
}

impl<T: Elem> Linear<T> {
    pub fn new(name: &str, weight: Param<T>, bias: Option<Param<T>>) -> Self {
        let shape = weight.value.shape().to_vec();
        assert_eq!(shape.len(), 2, "linear weight must be 2-d: {name}");
        Linear {
            out_dim: shape[0],
            in_dim: shape[1],
            weight,
            bias,
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&mut self, x: &Array2<T>, mode: Mode) -> Array2<T> {
        assert_eq!(x.ncols(), self.in_dim, "linear {}: input dim", self.weight.name());
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap();
        let mut y = x.dot(&w.t());
        if let Some(b) = &self.bias {
            let bv = b.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
            y += &bv;
        }
        self.cache = if mode == Mode::Train { Some(x.clone()) } else { None };
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let x = self.cache.take().expect("linear backward without forward");
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap();
        let dx = dy.dot(&w);
        if self.weight.trainable {
            let dw = dy.t().dot(&x);
            self.weight.add_grad(dw.into_dyn().view());
        }
        if let Some(b) = &mut self.bias {
            if b.trainable {
                let db = dy.sum_axis(ndarray::Axis(0));
                b.add_grad(db.into_dyn().view());
            }
        }
        dx
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<&'a Param<T>>) {
        out.push(&self.weight);
        if let Some(b) = &self.bias {
            out.push(b);
        }
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param<T>>) {
        out.push(&mut self.weight);
        if let Some(b) = &mut self.bias {
            out.push(b);
        }
    }
}
