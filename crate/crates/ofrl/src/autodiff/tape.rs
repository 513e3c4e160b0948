//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Values are dense `f64` matrices (`rows x cols`); a scalar is `1x1` and a
//! batch of feature vectors is `dim x batch`. Evaluation is eager: every op
//! computes its value when it is recorded. The backward pass does not write
//! into gradient slots — it records *new ops on the same tape*, so a gradient
//! is itself a differentiable expression. That is what makes loss terms of
//! the form `||d f / d input||^2` trainable: the squared-gradient expression
//! is an ordinary subgraph and a second `grad` call differentiates through it.
//!
//! Batch columns must stay independent (matrix products contract feature
//! rows only, never columns). `grad` of a column-summed scalar therefore
//! yields per-column input gradients, which is how batched action gradients
//! are computed in one pass.

use ndarray::Array2;

use crate::error::{OfrlError, Result};
use std::cell::{Ref, RefCell};

/// Handle to a tape node. Plain index; cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node(pub(crate) u32);

impl Node {
    #[inline]
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Leaf and elementary operations. Parents are always earlier tape indices.
/// Constant payloads are kept for inspection even where backprop ignores
/// them (`AddConst` shifts vanish; `Detach` cuts the edge).
#[derive(Debug, Clone)]
#[allow(dead_code)]
pub(crate) enum Op {
    Constant,
    Parameter,
    Input,
    Add(Node, Node),
    Sub(Node, Node),
    Mul(Node, Node),
    Div(Node, Node),
    MatMul(Node, Node),
    Transpose(Node),
    Neg(Node),
    Exp(Node),
    Ln(Node),
    Tanh(Node),
    Atanh(Node),
    Sigmoid(Node),
    Softplus(Node),
    Relu(Node),
    Abs(Node),
    Scale(Node, f64),
    AddConst(Node, f64),
    Min(Node, Node),
    ConcatRows(Node, Node),
    SliceRows(Node, usize, usize),
    PadRows(Node, usize, usize),
    Detach(Node),
}

impl Op {
    pub(crate) fn kind(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Parameter => "parameter",
            Op::Input => "input",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Neg(..) => "neg",
            Op::Exp(..) => "exp",
            Op::Ln(..) => "ln",
            Op::Tanh(..) => "tanh",
            Op::Atanh(..) => "atanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Relu(..) => "relu",
            Op::Abs(..) => "abs",
            Op::Scale(..) => "scale",
            Op::AddConst(..) => "add_const",
            Op::Min(..) => "min",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::PadRows(..) => "pad_rows",
            Op::Detach(..) => "detach",
        }
    }

    fn parents(&self, out: &mut Vec<Node>) {
        out.clear();
        match *self {
            Op::Constant | Op::Parameter | Op::Input => {}
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::MatMul(a, b)
            | Op::Min(a, b)
            | Op::ConcatRows(a, b) => {
                out.push(a);
                out.push(b);
            }
            Op::Transpose(a)
            | Op::Neg(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Tanh(a)
            | Op::Atanh(a)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Relu(a)
            | Op::Abs(a)
            | Op::Scale(a, _)
            | Op::AddConst(a, _)
            | Op::SliceRows(a, _, _)
            | Op::PadRows(a, _, _) => out.push(a),
            // Detach deliberately reports no parents: gradients stop here.
            Op::Detach(_) => {}
        }
    }
}

struct NodeData {
    op: Op,
    value: Array2<f64>,
}

/// Append-only computation tape. One tape per training step is the intended
/// usage; building a fresh tape is cheap and keeps memory bounded.
pub struct Tape {
    nodes: RefCell<Vec<NodeData>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn broadcast_shapes(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let rows = if a.0 == b.0 {
        a.0
    } else if a.0 == 1 {
        b.0
    } else if b.0 == 1 {
        a.0
    } else {
        return None;
    };
    let cols = if a.1 == b.1 {
        a.1
    } else if a.1 == 1 {
        b.1
    } else if b.1 == 1 {
        a.1
    } else {
        return None;
    };
    Some((rows, cols))
}

fn broadcast_zip(
    a: &Array2<f64>,
    b: &Array2<f64>,
    f: impl Fn(f64, f64) -> f64,
) -> Option<Array2<f64>> {
    let (rows, cols) = broadcast_shapes(a.dim(), b.dim())?;
    let mut out = Array2::<f64>::zeros((rows, cols));
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    for i in 0..rows {
        for j in 0..cols {
            let av = a[[if ar == 1 { 0 } else { i }, if ac == 1 { 0 } else { j }]];
            let bv = b[[if br == 1 { 0 } else { i }, if bc == 1 { 0 } else { j }]];
            out[[i, j]] = f(av, bv);
        }
    }
    Some(out)
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(256)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: Array2<f64>) -> Node {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        assert!(id < u32::MAX as usize, "tape overflow");
        nodes.push(NodeData { op, value });
        Node(id as u32)
    }

    fn val<R>(&self, n: Node, f: impl FnOnce(&Array2<f64>) -> R) -> R {
        f(&self.nodes.borrow()[n.idx()].value)
    }

    pub fn shape(&self, n: Node) -> (usize, usize) {
        self.val(n, |v| v.dim())
    }

    /// Borrow the value of a node.
    pub fn value(&self, n: Node) -> Ref<'_, Array2<f64>> {
        Ref::map(self.nodes.borrow(), |nodes| &nodes[n.idx()].value)
    }

    /// Clone the value of a node out of the tape.
    pub fn value_owned(&self, n: Node) -> Array2<f64> {
        self.val(n, |v| v.clone())
    }

    /// Value of a `1x1` node as `f64`.
    pub fn scalar(&self, n: Node) -> f64 {
        self.val(n, |v| {
            assert_eq!(v.dim(), (1, 1), "scalar() on non-scalar node");
            v[[0, 0]]
        })
    }

    // ---- leaves -------------------------------------------------------

    pub fn constant(&self, value: Array2<f64>) -> Node {
        self.push(Op::Constant, value)
    }

    pub fn constant_scalar(&self, v: f64) -> Node {
        self.constant(Array2::from_elem((1, 1), v))
    }

    pub fn parameter(&self, value: Array2<f64>) -> Node {
        self.push(Op::Parameter, value)
    }

    pub fn input(&self, value: Array2<f64>) -> Node {
        self.push(Op::Input, value)
    }

    // ---- elementwise binary (broadcasting over unit axes) --------------

    fn binary(
        &self,
        a: Node,
        b: Node,
        make: impl Fn(Node, Node) -> Op,
        f: impl Fn(f64, f64) -> f64,
        context: &'static str,
    ) -> Node {
        let out = {
            let nodes = self.nodes.borrow();
            broadcast_zip(&nodes[a.idx()].value, &nodes[b.idx()].value, f)
                .unwrap_or_else(|| {
                    panic!(
                        "{context}: incompatible shapes {:?} and {:?}",
                        nodes[a.idx()].value.dim(),
                        nodes[b.idx()].value.dim()
                    )
                })
        };
        self.push(make(a, b), out)
    }

    pub fn add(&self, a: Node, b: Node) -> Node {
        self.binary(a, b, Op::Add, |x, y| x + y, "add")
    }

    pub fn sub(&self, a: Node, b: Node) -> Node {
        self.binary(a, b, Op::Sub, |x, y| x - y, "sub")
    }

    pub fn mul(&self, a: Node, b: Node) -> Node {
        self.binary(a, b, Op::Mul, |x, y| x * y, "mul")
    }

    pub fn div(&self, a: Node, b: Node) -> Node {
        self.binary(a, b, Op::Div, |x, y| x / y, "div")
    }

    /// Elementwise minimum; shapes must match exactly. Gradient follows the
    /// smaller operand (ties go to the first).
    pub fn min(&self, a: Node, b: Node) -> Node {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa, sb, "min: shapes must match");
        self.binary(a, b, Op::Min, f64::min, "min")
    }

    // ---- linear algebra -------------------------------------------------

    pub fn matmul(&self, a: Node, b: Node) -> Node {
        let out = {
            let nodes = self.nodes.borrow();
            let (av, bv) = (&nodes[a.idx()].value, &nodes[b.idx()].value);
            assert_eq!(
                av.dim().1,
                bv.dim().0,
                "matmul: inner dimensions differ ({:?} x {:?})",
                av.dim(),
                bv.dim()
            );
            av.dot(bv)
        };
        self.push(Op::MatMul(a, b), out)
    }

    pub fn transpose(&self, a: Node) -> Node {
        let out = self.val(a, |v| v.t().to_owned());
        self.push(Op::Transpose(a), out)
    }

    pub fn concat_rows(&self, a: Node, b: Node) -> Node {
        let out = {
            let nodes = self.nodes.borrow();
            let (av, bv) = (&nodes[a.idx()].value, &nodes[b.idx()].value);
            assert_eq!(av.dim().1, bv.dim().1, "concat_rows: column counts differ");
            ndarray::concatenate(ndarray::Axis(0), &[av.view(), bv.view()])
                .expect("concat_rows")
        };
        self.push(Op::ConcatRows(a, b), out)
    }

    /// Rows `[from, to)` of `a`.
    pub fn slice_rows(&self, a: Node, from: usize, to: usize) -> Node {
        let out = self.val(a, |v| {
            assert!(from < to && to <= v.dim().0, "slice_rows out of range");
            v.slice(ndarray::s![from..to, ..]).to_owned()
        });
        self.push(Op::SliceRows(a, from, to), out)
    }

    fn pad_rows(&self, a: Node, total_rows: usize, at_row: usize) -> Node {
        let out = self.val(a, |v| {
            let (r, c) = v.dim();
            assert!(at_row + r <= total_rows, "pad_rows out of range");
            let mut m = Array2::<f64>::zeros((total_rows, c));
            m.slice_mut(ndarray::s![at_row..at_row + r, ..]).assign(v);
            m
        });
        self.push(Op::PadRows(a, total_rows, at_row), out)
    }

    // ---- elementwise unary ----------------------------------------------

    fn unary(&self, a: Node, make: impl Fn(Node) -> Op, f: impl Fn(f64) -> f64) -> Node {
        let out = self.val(a, |v| v.mapv(&f));
        self.push(make(a), out)
    }

    pub fn neg(&self, a: Node) -> Node {
        self.unary(a, Op::Neg, |x| -x)
    }

    pub fn exp(&self, a: Node) -> Node {
        self.unary(a, Op::Exp, f64::exp)
    }

    pub fn ln(&self, a: Node) -> Node {
        self.unary(a, Op::Ln, f64::ln)
    }

    pub fn tanh(&self, a: Node) -> Node {
        self.unary(a, Op::Tanh, f64::tanh)
    }

    pub fn atanh(&self, a: Node) -> Node {
        self.unary(a, Op::Atanh, f64::atanh)
    }

    pub fn sigmoid(&self, a: Node) -> Node {
        self.unary(a, Op::Sigmoid, |x| 1.0 / (1.0 + (-x).exp()))
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(&self, a: Node) -> Node {
        self.unary(a, Op::Softplus, |x| {
            if x > 30.0 {
                x
            } else if x < -30.0 {
                x.exp()
            } else {
                x.exp().ln_1p()
            }
        })
    }

    pub fn relu(&self, a: Node) -> Node {
        self.unary(a, Op::Relu, |x| x.max(0.0))
    }

    pub fn abs(&self, a: Node) -> Node {
        self.unary(a, Op::Abs, f64::abs)
    }

    pub fn scale(&self, a: Node, c: f64) -> Node {
        let out = self.val(a, |v| v * c);
        self.push(Op::Scale(a, c), out)
    }

    pub fn add_const(&self, a: Node, c: f64) -> Node {
        let out = self.val(a, |v| v + c);
        self.push(Op::AddConst(a, c), out)
    }

    pub fn square(&self, a: Node) -> Node {
        self.mul(a, a)
    }

    /// Identity value, but gradients do not flow through.
    pub fn detach(&self, a: Node) -> Node {
        let out = self.value_owned(a);
        self.push(Op::Detach(a), out)
    }

    // ---- reductions (built on matmul so backward comes for free) ---------

    /// Sum every element down to a `1x1` scalar.
    pub fn sum_all(&self, a: Node) -> Node {
        let (r, c) = self.shape(a);
        let left = self.constant(Array2::ones((1, r)));
        let right = self.constant(Array2::ones((c, 1)));
        let t = self.matmul(left, a);
        self.matmul(t, right)
    }

    pub fn mean_all(&self, a: Node) -> Node {
        let (r, c) = self.shape(a);
        let s = self.sum_all(a);
        self.scale(s, 1.0 / (r * c) as f64)
    }

    /// Sum across columns within each row: `(r,c) -> (r,1)`.
    pub fn row_sum(&self, a: Node) -> Node {
        let (_, c) = self.shape(a);
        let right = self.constant(Array2::ones((c, 1)));
        self.matmul(a, right)
    }

    /// Sum across rows within each column: `(r,c) -> (1,c)`.
    pub fn col_sum(&self, a: Node) -> Node {
        let (r, _) = self.shape(a);
        let left = self.constant(Array2::ones((1, r)));
        self.matmul(left, a)
    }

    /// Log-sum-exp over rows within each column: `(r,c) -> (1,c)`.
    /// The per-column max is subtracted as a constant; this leaves values
    /// and derivatives of every order unchanged.
    pub fn logsumexp_rows(&self, a: Node) -> Node {
        let maxes = self.val(a, |v| {
            let (_, c) = v.dim();
            let mut m = Array2::<f64>::zeros((1, c));
            for j in 0..c {
                m[[0, j]] = v.column(j).iter().fold(f64::NEG_INFINITY, |x, &y| x.max(y));
            }
            m
        });
        let m = self.constant(maxes);
        let shifted = self.sub(a, m);
        let e = self.exp(shifted);
        let s = self.col_sum(e);
        let l = self.ln(s);
        self.add(m, l)
    }

    // ---- forward-value inspection ----------------------------------------

    /// Root value with a finiteness check. On a non-finite root this walks
    /// back to the earliest non-finite node and names its op kind.
    pub fn forward(&self, root: Node) -> Result<Array2<f64>> {
        let v = self.value_owned(root);
        if v.iter().all(|x| x.is_finite()) {
            return Ok(v);
        }
        let nodes = self.nodes.borrow();
        for (i, nd) in nodes.iter().enumerate().take(root.idx() + 1) {
            if nd.value.iter().any(|x| !x.is_finite()) {
                return Err(OfrlError::NonFinite {
                    op_kind: nd.op.kind(),
                    node: i,
                });
            }
        }
        unreachable!("root reported non-finite but no node is");
    }

    // ---- reverse pass -----------------------------------------------------

    /// Gradients of a scalar `root` with respect to `wrt` leaves, recorded
    /// as new differentiable nodes. Leaves the `root` could never reach get
    /// a zero constant of the right shape.
    pub fn grad(&self, root: Node, wrt: &[Node]) -> Result<Vec<Node>> {
        let (r, c) = self.shape(root);
        if (r, c) != (1, 1) {
            return Err(OfrlError::NonScalarRoot { rows: r, cols: c });
        }
        let frontier = root.idx() + 1;

        // Which nodes can reach a requested leaf (gradient flow is useful).
        let mut reach = vec![false; frontier];
        for w in wrt {
            if w.idx() < frontier {
                reach[w.idx()] = true;
            }
        }
        {
            let nodes = self.nodes.borrow();
            let mut parents = Vec::with_capacity(2);
            for i in 0..frontier {
                nodes[i].op.parents(&mut parents);
                if parents.iter().any(|p| reach[p.idx()]) {
                    reach[i] = true;
                }
            }
        }

        let mut adj: Vec<Option<Node>> = vec![None; frontier];
        adj[root.idx()] = Some(self.constant_scalar(1.0));

        // Tape order is a topological order, so one reverse sweep suffices.
        for i in (0..frontier).rev() {
            let g = match adj[i] {
                Some(g) if reach[i] => g,
                _ => continue,
            };
            let op = self.nodes.borrow()[i].op.clone();
            self.backprop(&op, Node(i as u32), g, &mut adj, &reach);
        }

        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            match adj.get(w.idx()).copied().flatten() {
                Some(g) => out.push(g),
                None => {
                    let shape = self.shape(*w);
                    out.push(self.constant(Array2::zeros(shape)));
                }
            }
        }
        Ok(out)
    }

    fn accumulate(&self, adj: &mut [Option<Node>], target: Node, contrib: Node) {
        let slot = &mut adj[target.idx()];
        *slot = Some(match *slot {
            Some(existing) => self.add(existing, contrib),
            None => contrib,
        });
    }

    /// Reduce `g` down to `shape` by summing over axes that were broadcast.
    fn reduce_to(&self, g: Node, shape: (usize, usize)) -> Node {
        let gs = self.shape(g);
        if gs == shape {
            return g;
        }
        let mut cur = g;
        if shape.0 == 1 && gs.0 != 1 {
            cur = self.col_sum(cur);
        }
        if shape.1 == 1 && gs.1 != 1 {
            cur = self.row_sum(cur);
        }
        cur
    }

    fn backprop(
        &self,
        op: &Op,
        node: Node,
        g: Node,
        adj: &mut [Option<Node>],
        reach: &[bool],
    ) {
        let flow = |n: Node| reach[n.idx()];
        match *op {
            Op::Constant | Op::Parameter | Op::Input | Op::Detach(_) => {}
            Op::Add(a, b) => {
                if flow(a) {
                    let c = self.reduce_to(g, self.shape(a));
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    let c = self.reduce_to(g, self.shape(b));
                    self.accumulate(adj, b, c);
                }
            }
            Op::Sub(a, b) => {
                if flow(a) {
                    let c = self.reduce_to(g, self.shape(a));
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    let n = self.neg(g);
                    let c = self.reduce_to(n, self.shape(b));
                    self.accumulate(adj, b, c);
                }
            }
            Op::Mul(a, b) => {
                if flow(a) {
                    let t = self.mul(g, b);
                    let c = self.reduce_to(t, self.shape(a));
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    let t = self.mul(g, a);
                    let c = self.reduce_to(t, self.shape(b));
                    self.accumulate(adj, b, c);
                }
            }
            Op::Div(a, b) => {
                if flow(a) {
                    let t = self.div(g, b);
                    let c = self.reduce_to(t, self.shape(a));
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    // d(a/b)/db = -a / b^2
                    let num = self.mul(g, a);
                    let b2 = self.mul(b, b);
                    let t = self.div(num, b2);
                    let n = self.neg(t);
                    let c = self.reduce_to(n, self.shape(b));
                    self.accumulate(adj, b, c);
                }
            }
            Op::MatMul(a, b) => {
                if flow(a) {
                    let bt = self.transpose(b);
                    let c = self.matmul(g, bt);
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    let at = self.transpose(a);
                    let c = self.matmul(at, g);
                    self.accumulate(adj, b, c);
                }
            }
            Op::Transpose(a) => {
                if flow(a) {
                    let c = self.transpose(g);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Neg(a) => {
                if flow(a) {
                    let c = self.neg(g);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Exp(a) => {
                if flow(a) {
                    let c = self.mul(g, node);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Ln(a) => {
                if flow(a) {
                    let c = self.div(g, a);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Tanh(a) => {
                if flow(a) {
                    // 1 - tanh^2, written on the forward output node
                    let y2 = self.mul(node, node);
                    let one_m = self.add_const(self.neg(y2), 1.0);
                    let c = self.mul(g, one_m);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Atanh(a) => {
                if flow(a) {
                    // 1 / (1 - a^2)
                    let a2 = self.mul(a, a);
                    let denom = self.add_const(self.neg(a2), 1.0);
                    let c = self.div(g, denom);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Sigmoid(a) => {
                if flow(a) {
                    let one_m = self.add_const(self.neg(node), 1.0);
                    let d = self.mul(node, one_m);
                    let c = self.mul(g, d);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Softplus(a) => {
                if flow(a) {
                    let s = self.sigmoid(a);
                    let c = self.mul(g, s);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Relu(a) => {
                if flow(a) {
                    let mask = self.val(a, |v| v.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 }));
                    let m = self.constant(mask);
                    let c = self.mul(g, m);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Abs(a) => {
                if flow(a) {
                    let sign = self.val(a, |v| v.mapv(|x| if x >= 0.0 { 1.0 } else { -1.0 }));
                    let m = self.constant(sign);
                    let c = self.mul(g, m);
                    self.accumulate(adj, a, c);
                }
            }
            Op::Scale(a, k) => {
                if flow(a) {
                    let c = self.scale(g, k);
                    self.accumulate(adj, a, c);
                }
            }
            Op::AddConst(a, _) => {
                if flow(a) {
                    self.accumulate(adj, a, g);
                }
            }
            Op::Min(a, b) => {
                // Subgradient: ties route to the first operand.
                let mask = {
                    let nodes = self.nodes.borrow();
                    let (av, bv) = (&nodes[a.idx()].value, &nodes[b.idx()].value);
                    broadcast_zip(av, bv, |x, y| if x <= y { 1.0 } else { 0.0 }).unwrap()
                };
                if flow(a) {
                    let m = self.constant(mask.clone());
                    let c = self.mul(g, m);
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    let m = self.constant(mask.mapv(|x| 1.0 - x));
                    let c = self.mul(g, m);
                    self.accumulate(adj, b, c);
                }
            }
            Op::ConcatRows(a, b) => {
                let ra = self.shape(a).0;
                let rb = self.shape(b).0;
                if flow(a) {
                    let c = self.slice_rows(g, 0, ra);
                    self.accumulate(adj, a, c);
                }
                if flow(b) {
                    let c = self.slice_rows(g, ra, ra + rb);
                    self.accumulate(adj, b, c);
                }
            }
            Op::SliceRows(a, from, _to) => {
                if flow(a) {
                    let total = self.shape(a).0;
                    let c = self.pad_rows(g, total, from);
                    self.accumulate(adj, a, c);
                }
            }
            Op::PadRows(a, _total, at) => {
                if flow(a) {
                    let r = self.shape(a).0;
                    let c = self.slice_rows(g, at, at + r);
                    self.accumulate(adj, a, c);
                }
            }
        }
    }
}
