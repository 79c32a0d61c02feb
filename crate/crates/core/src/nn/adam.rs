/// Adam with bias correction. Moments are allocated lazily per parameter
/// index on the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

/// Learning rate used at desk scale.
pub const DEFAULT_LR: f32 = 3e-4;

impl Adam {
    pub fn new(lr: f32) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// First and second moments, one pair per parameter.
    pub fn moments(&self) -> (&[Vec<f32>], &[Vec<f32>]) {
        (&self.m, &self.v)
    }

    /// Restores state saved from [`Adam::steps`] and [`Adam::moments`].
    pub fn restore(&mut self, step: u64, m: Vec<Vec<f32>>, v: Vec<Vec<f32>>) {
        assert_eq!(m.len(), v.len());
        self.step = step;
        self.m = m;
        self.v = v;
    }

    /// One update of every `(parameter, gradient)` pair, in a stable order.
    pub fn step<'a, I>(&mut self, pairs: I)
    where
        I: IntoIterator<Item = (&'a mut [f32], &'a [f32])>,
    {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - (self.beta1 as f64).powi(t);
        let c2 = 1.0 - (self.beta2 as f64).powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (i, (p, g)) in pairs.into_iter().enumerate() {
            assert_eq!(p.len(), g.len(), "gradient size mismatch for parameter {i}");
            if self.m.len() <= i {
                self.m.push(vec![0.0; p.len()]);
                self.v.push(vec![0.0; p.len()]);
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let mh = m[j] as f64 / c1;
                let vh = v[j] as f64 / c2;
                p[j] -= (self.lr as f64 * mh / (vh.sqrt() + self.eps as f64)) as f32;
            }
        }
    }
}
