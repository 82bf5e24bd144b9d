//! Fixed-capacity ring buffer of transitions with uniform sampling.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    /// Normalized action in [-1, 1].
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub r: Array1<f64>,
    pub s_next: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub done: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    s: Vec<f64>,
    a: Vec<f64>,
    r: Vec<f64>,
    s_next: Vec<f64>,
    done: Vec<bool>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            obs_dim,
            act_dim,
            capacity,
            s: vec![0.0; capacity * obs_dim],
            a: vec![0.0; capacity * act_dim],
            r: vec![0.0; capacity],
            s_next: vec![0.0; capacity * obs_dim],
            done: vec![false; capacity],
            len: 0,
            head: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.s.len() != self.obs_dim || t.s_next.len() != self.obs_dim || t.a.len() != self.act_dim {
            return Err(Error::ShapeMismatch(format!(
                "transition dims s={} a={} s'={}, buffer expects obs {} act {}",
                t.s.len(),
                t.a.len(),
                t.s_next.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        let finite = t.s.iter().chain(&t.s_next).chain(&t.a).all(|v| v.is_finite()) && t.r.is_finite();
        if !finite {
            return Err(Error::InvalidArgument("transition contains non-finite values".into()));
        }
        if t.a.iter().any(|a| a.abs() > 1.0) {
            return Err(Error::InvalidArgument(format!("normalized action out of [-1, 1]: {:?}", t.a)));
        }
        let k = self.head;
        self.s[k * self.obs_dim..(k + 1) * self.obs_dim].copy_from_slice(&t.s);
        self.s_next[k * self.obs_dim..(k + 1) * self.obs_dim].copy_from_slice(&t.s_next);
        self.a[k * self.act_dim..(k + 1) * self.act_dim].copy_from_slice(&t.a);
        self.r[k] = t.r;
        self.done[k] = t.done;
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len {
            return None;
        }
        let k = if self.len < self.capacity { i } else { (self.head + i) % self.capacity };
        Some(Transition {
            s: self.s[k * self.obs_dim..(k + 1) * self.obs_dim].to_vec(),
            a: self.a[k * self.act_dim..(k + 1) * self.act_dim].to_vec(),
            r: self.r[k],
            s_next: self.s_next[k * self.obs_dim..(k + 1) * self.obs_dim].to_vec(),
            done: self.done[k],
        })
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.len == 0 {
            return Err(Error::Empty("replay buffer"));
        }
        if n > self.len {
            return Err(Error::InvalidArgument(format!("batch of {n} requested from {} stored transitions", self.len)));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.len)).collect())
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut b = Batch {
            s: Array2::zeros((n, od)),
            a: Array2::zeros((n, ad)),
            r: Array1::zeros(n),
            s_next: Array2::zeros((n, od)),
            done: Array1::zeros(n),
        };
        for (row, &k) in idx.iter().enumerate() {
            for j in 0..od {
                b.s[[row, j]] = self.s[k * od + j];
                b.s_next[[row, j]] = self.s_next[k * od + j];
            }
            for j in 0..ad {
                b.a[[row, j]] = self.a[k * ad + j];
            }
            b.r[row] = self.r[k];
            b.done[row] = if self.done[k] { 1.0 } else { 0.0 };
        }
        Ok(b)
    }
}
