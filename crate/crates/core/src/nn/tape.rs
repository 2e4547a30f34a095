use std::collections::HashMap;

use ndarray::{s, Array2, Axis};

use super::params::{Gradients, ParamId, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Transpose(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    PickSum(Var, Vec<(usize, usize)>),
    Sum(Var),
    LstmCell(Var, Var),
    Conv3x3 {
        x: Var,
        w: Var,
        b: Var,
        height: usize,
        width: usize,
        cols: Array2<f64>,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    ChannelsToTime {
        x: Var,
        channels: usize,
        width: usize,
    },
    Unfold {
        x: Var,
        half: usize,
    },
    ScalarWithGrad {
        x: Var,
        grad: Array2<f64>,
    },
}

struct Node {
    value: Option<Array2<f64>>,
    op: Op,
}

/// Records a forward computation for later differentiation.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(a), _) => a,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    /// Value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1×m` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(b).nrows(), 1);
        let v = self.value(a) + self.value(b);
        self.push(v, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        self.push(v, Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows: column mismatch");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            row.mapv_inplace(|x| x / z);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.axis_iter_mut(Axis(0)) {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.push(v, Op::LogSoftmaxRows(a))
    }

    /// `Σ a[r, c]` over the given positions, as a `1×1` node.
    pub fn pick_sum(&mut self, a: Var, idx: Vec<(usize, usize)>) -> Var {
        let x = self.value(a);
        let s: f64 = idx.iter().map(|&(r, c)| x[[r, c]]).sum();
        self.push(Array2::from_elem((1, 1), s), Op::PickSum(a, idx))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Array2::from_elem((1, 1), s), Op::Sum(a))
    }

    /// Fused LSTM cell. `pre` is `1×4H` with gate order input, forget, cell,
    /// output; `c_prev` is `1×H`. Returns `1×2H` holding `[h, c]`.
    pub fn lstm_cell(&mut self, pre: Var, c_prev: Var) -> Var {
        let p = self.value(pre);
        let c0 = self.value(c_prev);
        let h = c0.ncols();
        assert_eq!(p.ncols(), 4 * h);
        let mut out = Array2::zeros((1, 2 * h));
        for j in 0..h {
            let i = sigmoid(p[[0, j]]);
            let f = sigmoid(p[[0, h + j]]);
            let g = p[[0, 2 * h + j]].tanh();
            let o = sigmoid(p[[0, 3 * h + j]]);
            let c = f * c0[[0, j]] + i * g;
            out[[0, j]] = o * c.tanh();
            out[[0, h + j]] = c;
        }
        self.push(out, Op::LstmCell(pre, c_prev))
    }

    /// 3×3 convolution with zero padding 1 over `C_in × (height·width)`
    /// feature maps. `w` is `C_out × (C_in·9)` and `b` is `C_out × 1`.
    pub fn conv3x3(&mut self, x: Var, w: Var, b: Var, height: usize, width: usize) -> Var {
        let xv = self.value(x);
        let cin = xv.nrows();
        assert_eq!(xv.ncols(), height * width);
        let hw = height * width;
        let mut cols = Array2::zeros((cin * 9, hw));
        {
            let xs = xv.as_standard_layout();
            let xs = xs.as_slice().expect("contiguous");
            let cs = cols.as_slice_mut().expect("contiguous");
            for ci in 0..cin {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let row = (ci * 9 + ky * 3 + kx) * hw;
                        for t in 0..height {
                            let tt = t as isize + ky as isize - 1;
                            if tt < 0 || tt >= height as isize {
                                continue;
                            }
                            let src = ci * hw + tt as usize * width;
                            let dst = row + t * width;
                            for f in 0..width {
                                let ff = f as isize + kx as isize - 1;
                                if ff >= 0 && ff < width as isize {
                                    cs[dst + f] = xs[src + ff as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        let out = self.value(w).dot(&cols) + self.value(b);
        self.push(
            out,
            Op::Conv3x3 {
                x,
                w,
                b,
                height,
                width,
                cols,
            },
        )
    }

    /// 2×2 max pooling with ceil semantics: odd trailing rows/columns form
    /// their own (smaller) windows. Returns the pooled map and its
    /// `(height, width)`.
    pub fn max_pool2(&mut self, x: Var, height: usize, width: usize) -> (Var, usize, usize) {
        let xv = self.value(x);
        let c = xv.nrows();
        let (h2, w2) = (height.div_ceil(2), width.div_ceil(2));
        let mut out = Array2::zeros((c, h2 * w2));
        let mut argmax = vec![0usize; c * h2 * w2];
        for ch in 0..c {
            let row = xv.row(ch);
            for t in 0..h2 {
                for f in 0..w2 {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for tt in 2 * t..(2 * t + 2).min(height) {
                        for ff in 2 * f..(2 * f + 2).min(width) {
                            let v = row[tt * width + ff];
                            if v > best {
                                best = v;
                                arg = tt * width + ff;
                            }
                        }
                    }
                    out[[ch, t * w2 + f]] = best;
                    argmax[(ch * h2 + t) * w2 + f] = arg;
                }
            }
        }
        (self.push(out, Op::MaxPool2 { x, argmax }), h2, w2)
    }

    /// `C × (T·F)` feature maps to a `T × (C·F)` sequence.
    pub fn channels_to_time(&mut self, x: Var, height: usize, width: usize) -> Var {
        let xv = self.value(x);
        let c = xv.nrows();
        let mut out = Array2::zeros((height, c * width));
        for ch in 0..c {
            for t in 0..height {
                for f in 0..width {
                    out[[t, ch * width + f]] = xv[[ch, t * width + f]];
                }
            }
        }
        self.push(
            out,
            Op::ChannelsToTime {
                x,
                channels: c,
                width,
            },
        )
    }

    /// Sliding windows over a `1×T` row: `out[t, j] = x[t + j - half]`
    /// (zero outside), shape `T × (2·half + 1)`.
    pub fn unfold(&mut self, x: Var, half: usize) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.nrows(), 1);
        let t = xv.ncols();
        let k = 2 * half + 1;
        let mut out = Array2::zeros((t, k));
        for i in 0..t {
            for j in 0..k {
                let src = i as isize + j as isize - half as isize;
                if src >= 0 && (src as usize) < t {
                    out[[i, j]] = xv[[0, src as usize]];
                }
            }
        }
        self.push(out, Op::Unfold { x, half })
    }

    /// Scalar node with externally computed gradient `d value / d x`.
    pub fn scalar_with_grad(&mut self, x: Var, value: f64, grad: Array2<f64>) -> Var {
        assert_eq!(grad.dim(), self.value(x).dim());
        self.push(Array2::from_elem((1, 1), value), Op::ScalarWithGrad { x, grad })
    }

    /// Gradients of the `1×1` node `loss` with respect to every parameter
    /// that contributed to it.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).dim(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = Gradients::zeros(self.params.len());

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(a) => *a += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.accumulate_one(*id, &g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g * *s),
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap();
                    let ga = ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g * (1.0 - y * y));
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    let ga = ndarray::Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = ndarray::Zip::from(&g).and(x).map_collect(|&g, &x| if x > 0.0 { g } else { 0.0 });
                    acc(&mut grads, *a, ga);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.t().to_owned()),
                Op::SliceRows(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    ga.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(parts) => {
                    let mut r = 0;
                    for p in parts {
                        let n = self.value(*p).nrows();
                        acc(&mut grads, *p, g.slice(s![r..r + n, ..]).to_owned());
                        r += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for p in parts {
                        let n = self.value(*p).ncols();
                        acc(&mut grads, *p, g.slice(s![.., c..c + n]).to_owned());
                        c += n;
                    }
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.as_ref().unwrap();
                    let mut ga = &g * y;
                    for (mut row, yr) in ga.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))) {
                        let dot = row.sum();
                        row.zip_mut_with(&yr, |v, &yv| *v -= yv * dot);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LogSoftmaxRows(a) => {
                    let y = node.value.as_ref().unwrap();
                    let mut ga = g.clone();
                    for ((mut row, yr), gr) in ga.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))).zip(g.axis_iter(Axis(0))) {
                        let total = gr.sum();
                        row.zip_mut_with(&yr, |v, &yv| *v -= yv.exp() * total);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::PickSum(a, idx) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for &(r, c) in idx {
                        ga[[r, c]] += g[[0, 0]];
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => acc(&mut grads, *a, Array2::from_elem(self.value(*a).dim(), g[[0, 0]])),
                Op::LstmCell(pre, c_prev) => {
                    let p = self.value(*pre);
                    let c0 = self.value(*c_prev);
                    let y = node.value.as_ref().unwrap();
                    let h = c0.ncols();
                    let mut gp = Array2::zeros((1, 4 * h));
                    let mut gc0 = Array2::zeros((1, h));
                    for j in 0..h {
                        let i = sigmoid(p[[0, j]]);
                        let f = sigmoid(p[[0, h + j]]);
                        let gg = p[[0, 2 * h + j]].tanh();
                        let o = sigmoid(p[[0, 3 * h + j]]);
                        let c = y[[0, h + j]];
                        let tc = c.tanh();
                        let dh = g[[0, j]];
                        let dc = g[[0, h + j]] + dh * o * (1.0 - tc * tc);
                        gp[[0, j]] = dc * gg * i * (1.0 - i);
                        gp[[0, h + j]] = dc * c0[[0, j]] * f * (1.0 - f);
                        gp[[0, 2 * h + j]] = dc * i * (1.0 - gg * gg);
                        gp[[0, 3 * h + j]] = dh * tc * o * (1.0 - o);
                        gc0[[0, j]] = dc * f;
                    }
                    acc(&mut grads, *pre, gp);
                    acc(&mut grads, *c_prev, gc0);
                }
                Op::Conv3x3 {
                    x,
                    w,
                    b,
                    height,
                    width,
                    cols,
                } => {
                    let gw = g.dot(&cols.t());
                    let gb = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let gcols = self.value(*w).t().dot(&g);
                    let cin = self.value(*x).nrows();
                    let hw = height * width;
                    let mut gx = Array2::<f64>::zeros((cin, hw));
                    {
                        let gs = gcols.as_slice().expect("contiguous");
                        let xs = gx.as_slice_mut().expect("contiguous");
                        for ci in 0..cin {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let row = (ci * 9 + ky * 3 + kx) * hw;
                                    for t in 0..*height {
                                        let tt = t as isize + ky as isize - 1;
                                        if tt < 0 || tt >= *height as isize {
                                            continue;
                                        }
                                        let dst = ci * hw + tt as usize * width;
                                        let src = row + t * width;
                                        for f in 0..*width {
                                            let ff = f as isize + kx as isize - 1;
                                            if ff >= 0 && ff < *width as isize {
                                                xs[dst + ff as usize] += gs[src + f];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    acc(&mut grads, *w, gw);
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, gx);
                }
                Op::MaxPool2 { x, argmax } => {
                    let mut gx = Array2::zeros(self.value(*x).dim());
                    let per = g.ncols();
                    for ch in 0..g.nrows() {
                        for k in 0..per {
                            gx[[ch, argmax[ch * per + k]]] += g[[ch, k]];
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ChannelsToTime { x, channels, width } => {
                    let height = g.nrows();
                    let mut gx = Array2::zeros((*channels, height * width));
                    for ch in 0..*channels {
                        for t in 0..height {
                            for f in 0..*width {
                                gx[[ch, t * width + f]] = g[[t, ch * width + f]];
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Unfold { x, half } => {
                    let t = g.nrows();
                    let mut gx = Array2::zeros((1, t));
                    for i in 0..t {
                        for j in 0..g.ncols() {
                            let src = i as isize + j as isize - *half as isize;
                            if src >= 0 && (src as usize) < t {
                                gx[[0, src as usize]] += g[[i, j]];
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ScalarWithGrad { x, grad } => acc(&mut grads, *x, grad * g[[0, 0]]),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central finite differences of `f` with respect to every parameter
    /// entry, compared against `Tape::backward`.
    fn check(store: &ParamStore, f: impl Fn(&mut Tape) -> Var) {
        let mut tape = Tape::new(store);
        let loss = f(&mut tape);
        let grads = tape.backward(loss);
        let eps = 1e-6;
        for id in store.ids() {
            let mut s = store.clone();
            let shape = s.get(id).dim();
            for r in 0..shape.0 {
                for c in 0..shape.1 {
                    let orig = s.get(id)[[r, c]];
                    s.get_mut(id)[[r, c]] = orig + eps;
                    let up = {
                        let mut t = Tape::new(&s);
                        let l = f(&mut t);
                        t.scalar(l)
                    };
                    s.get_mut(id)[[r, c]] = orig - eps;
                    let down = {
                        let mut t = Tape::new(&s);
                        let l = f(&mut t);
                        t.scalar(l)
                    };
                    s.get_mut(id)[[r, c]] = orig;
                    let num = (up - down) / (2.0 * eps);
                    let ana = grads.get(id).map_or(0.0, |g| g[[r, c]]);
                    assert!(
                        (num - ana).abs() <= 1e-6 * (1.0 + num.abs()),
                        "{} [{r},{c}]: numeric {num} analytic {ana}",
                        store.name(id)
                    );
                }
            }
        }
    }

    fn store(entries: &[(&str, Array2<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, v) in entries {
            s.add(n, v.clone());
        }
        s
    }

    #[test]
    fn elementwise_and_matmul_ops() {
        let s = store(&[
            ("a", array![[0.3, -0.2, 0.5], [0.1, 0.4, -0.7]]),
            ("b", array![[0.2, 0.1], [-0.3, 0.8], [0.5, -0.4]]),
            ("r", array![[0.05, -0.1]]),
        ]);
        check(&s, |t| {
            let a = t.param(ParamId(0));
            let b = t.param(ParamId(1));
            let r = t.param(ParamId(2));
            let m = t.matmul(a, b);
            let m = t.add_row(m, r);
            let th = t.tanh(m);
            let sg = t.sigmoid(m);
            let p = t.mul(th, sg);
            let rl = t.relu(p);
            let q = t.add(p, rl);
            let q = t.scale(q, 1.7);
            let tr = t.transpose(q);
            let sm = t.softmax_rows(tr);
            let ls = t.log_softmax_rows(q);
            let x = t.pick_sum(ls, vec![(0, 1), (1, 0), (1, 1)]);
            let y = t.sum(sm);
            let z = t.mul(x, y);
            let sq = t.mul(sm, sm);
            let w = t.sum(sq);
            t.add(z, w)
        });
    }

    #[test]
    fn structural_ops() {
        let s = store(&[("a", array![[0.3, -0.2, 0.5, 0.9], [0.1, 0.4, -0.7, 0.2], [0.6, -0.5, 0.3, -0.1]])]);
        check(&s, |t| {
            let a = t.param(ParamId(0));
            let r = t.slice_rows(a, 1, 2);
            let c = t.slice_cols(a, 1, 2);
            let cr = t.concat_rows(&[r, a]);
            let cc = t.concat_cols(&[c, a]);
            let x = t.tanh(cr);
            let y = t.sigmoid(cc);
            let u = t.slice_rows(a, 0, 1);
            let un = t.unfold(u, 2);
            let un = t.tanh(un);
            let sx = t.sum(x);
            let sy = t.sum(y);
            let su = t.sum(un);
            let s1 = t.add(sx, sy);
            t.add(s1, su)
        });
    }

    #[test]
    fn lstm_cell_gradients() {
        let s = store(&[
            ("pre", array![[0.3, -0.2, 0.5, 0.9, 0.1, 0.4, -0.7, 0.2]]),
            ("c", array![[0.6, -0.5]]),
        ]);
        check(&s, |t| {
            let p = t.param(ParamId(0));
            let c = t.param(ParamId(1));
            let o = t.lstm_cell(p, c);
            let c1 = t.slice_cols(o, 2, 2);
            let o2 = t.lstm_cell(p, c1);
            let sq = t.mul(o2, o2);
            t.sum(sq)
        });
    }

    #[test]
    fn conv_pool_and_reshape() {
        let x: Array2<f64> = Array2::from_shape_fn((2, 5 * 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let w: Array2<f64> = Array2::from_shape_fn((3, 18), |(i, j)| ((i * 5 + j * 2) % 7) as f64 / 10.0 - 0.3);
        let b: Array2<f64> = array![[0.1], [-0.2], [0.05]];
        let s = store(&[("x", x), ("w", w), ("b", b)]);
        check(&s, |t| {
            let x = t.param(ParamId(0));
            let w = t.param(ParamId(1));
            let b = t.param(ParamId(2));
            let y = t.conv3x3(x, w, b, 5, 3);
            let y = t.tanh(y);
            let (p, h, wd) = t.max_pool2(y, 5, 3);
            assert_eq!((h, wd), (3, 2));
            let seq = t.channels_to_time(p, h, wd);
            let sq = t.mul(seq, seq);
            let sp = t.sum(sq);
            let e = t.sum(seq);
            t.add(sp, e)
        });
    }

    #[test]
    fn conv_matches_direct_definition() {
        let x: Array2<f64> = Array2::from_shape_fn((1, 4 * 4), |(_, j)| j as f64);
        let mut w = Array2::zeros((1, 9));
        w[[0, 4]] = 1.0; // centre tap only
        w[[0, 0]] = 0.5; // top-left neighbour
        let s = store(&[]);
        let mut t = Tape::new(&s);
        let xv = t.constant(x);
        let wv = t.constant(w);
        let bv = t.constant(array![[1.0]]);
        let y = t.conv3x3(xv, wv, bv, 4, 4);
        let y = t.value(y);
        // out[t,f] = x[t,f] + 0.5*x[t-1,f-1] + 1
        assert_eq!(y[[0, 0]], 1.0);
        assert_eq!(y[[0, 5]], 5.0 + 0.5 * 0.0 + 1.0);
        assert_eq!(y[[0, 15]], 15.0 + 0.5 * 10.0 + 1.0);
    }

    #[test]
    fn scalar_with_grad_passes_through() {
        let s = store(&[("a", array![[1.0, 2.0]])]);
        let mut t = Tape::new(&s);
        let a = t.param(ParamId(0));
        let l = t.scalar_with_grad(a, 3.0, array![[0.5, -1.0]]);
        let l2 = t.scale(l, 2.0);
        let g = t.backward(l2);
        assert_eq!(g.get(ParamId(0)).unwrap(), &array![[1.0, -2.0]]);
    }
}
