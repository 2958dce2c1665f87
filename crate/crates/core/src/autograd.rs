//! Reverse-mode automatic differentiation over [`ComplexTensor`] values.
//!
//! A complex value is treated as the pair of its real planes. The gradient
//! stored for a node is `∂L/∂re + i·∂L/∂im` for a real scalar loss `L`.
//!
//! The [`Tape`] is rebuilt for every forward pass. Nodes are appended in
//! construction order, which is also a topological order, so the backward
//! pass is a single reverse sweep.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::ctensor::ComplexTensor;
use crate::error::{Error, Result};

/// Gradient rule of one node: receives the gradient of the node's output and
/// a per-parent "needs gradient" mask, returns one entry per parent.
pub type BackwardFn = Box<dyn Fn(&ComplexTensor, &[bool]) -> Vec<Option<ComplexTensor>>>;

/// Handle to a node on a [`Tape`]. Ids grow monotonically in construction order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

struct Node {
    value: Rc<ComplexTensor>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
    // accumulated across backward calls; kept for leaves only
    grad: Option<ComplexTensor>,
}

/// Gradients of the requires-grad leaves reachable from a loss.
pub type Gradients = BTreeMap<Var, ComplexTensor>;

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf node holding `value`.
    pub fn leaf(&self, value: ComplexTensor, requires_grad: bool) -> Var {
        self.push_node(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad,
            grad: None,
        })
    }

    pub fn constant(&self, value: ComplexTensor) -> Var {
        self.leaf(value, false)
    }

    /// Record an operation result. The node requires grad iff any parent does.
    pub fn push(&self, value: ComplexTensor, parents: &[Var], backward: BackwardFn) -> Var {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.0].requires_grad)
        };
        self.push_node(Node {
            value: Rc::new(value),
            parents: parents.iter().map(|p| p.0).collect(),
            backward: requires_grad.then_some(backward),
            requires_grad,
            grad: None,
        })
    }

    fn push_node(&self, node: Node) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> Rc<ComplexTensor> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<ComplexTensor> {
        self.nodes.borrow()[v.0].grad.clone()
    }

    pub fn zero_grad(&self) {
        for n in self.nodes.borrow_mut().iter_mut() {
            n.grad = None;
        }
    }

    /// Back-propagate from a real scalar `loss`.
    ///
    /// Leaf gradients accumulate across calls until [`Tape::zero_grad`].
    /// Returns the accumulated gradient of every reachable requires-grad leaf.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let mut nodes = self.nodes.borrow_mut();
        let root = &nodes[loss.0];
        if root.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        if root.value.im()[0] != 0.0 {
            return Err(Error::Contract("backward needs a real-valued loss".into()));
        }
        if !root.requires_grad {
            return Ok(Gradients::new());
        }

        let mut pending: Vec<Option<ComplexTensor>> = (0..=loss.0).map(|_| None).collect();
        let mut seed = ComplexTensor::zeros(root.value.shape());
        seed.re_mut()[0] = 1.0;
        pending[loss.0] = Some(seed);

        let mut out = Gradients::new();
        for idx in (0..=loss.0).rev() {
            let Some(g) = pending[idx].take() else { continue };
            let node = &mut nodes[idx];
            if node.parents.is_empty() {
                if node.requires_grad {
                    let acc = match node.grad.take() {
                        Some(mut acc) => {
                            acc.add_assign(&g)?;
                            acc
                        }
                        None => g,
                    };
                    out.insert(Var(idx), acc.clone());
                    node.grad = Some(acc);
                }
                continue;
            }
            let parents = node.parents.clone();
            let Some(rule) = node.backward.take() else { continue };
            let needs: Vec<bool> = parents.iter().map(|&p| nodes[p].requires_grad).collect();
            let grads = rule(&g, &needs);
            nodes[idx].backward = Some(rule);
            debug_assert_eq!(grads.len(), parents.len());
            for ((p, gp), need) in parents.into_iter().zip(grads).zip(needs) {
                let (Some(gp), true) = (gp, need) else { continue };
                match &mut pending[p] {
                    Some(acc) => acc.add_assign(&gp)?,
                    slot @ None => *slot = Some(gp),
                }
            }
        }
        Ok(out)
    }

    // ---- elementary ops ----

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(&self.value(b))?;
        Ok(self.push(v, &[a, b], Box::new(|g, _| vec![Some(g.clone()), Some(g.clone())])))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(&self.value(b))?;
        Ok(self.push(v, &[a, b], Box::new(|g, _| vec![Some(g.clone()), Some(g.scale(-1.0))])))
    }

    /// Element-wise complex product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let v = va.mul(&vb)?;
        Ok(self.push(
            v,
            &[a, b],
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.mul(&vb.conj()).expect("shape checked in forward")),
                    need[1].then(|| g.mul(&va.conj()).expect("shape checked in forward")),
                ]
            }),
        ))
    }

    pub fn scale(&self, a: Var, s: f64) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, &[a], Box::new(move |g, _| vec![Some(g.scale(s))]))
    }

    /// `Σ (re a·re c + im a·im c)`, i.e. `Re Σ a·conj(c)` for a constant `c`.
    /// Its gradient with respect to `a` is exactly `c`.
    pub fn inner_re(&self, a: Var, c: &ComplexTensor) -> Result<Var> {
        let va = self.value(a);
        if va.shape() != c.shape() {
            return Err(Error::Dimension(format!("inner_re: {:?} vs {:?}", va.shape(), c.shape())));
        }
        let s: f64 = va.re().iter().zip(c.re()).map(|(x, y)| x * y).sum::<f64>()
            + va.im().iter().zip(c.im()).map(|(x, y)| x * y).sum::<f64>();
        let c = c.clone();
        Ok(self.push(ComplexTensor::from_parts(&[1], vec![s], vec![0.0])?, &[a], Box::new(move |g, _| {
            vec![Some(c.scale(g.re()[0]))]
        })))
    }

    /// `Σ re(a)`.
    pub fn sum_re(&self, a: Var) -> Var {
        let va = self.value(a);
        let s: f64 = va.re().iter().sum();
        let shape = va.shape().to_vec();
        self.push(
            ComplexTensor::from_parts(&[1], vec![s], vec![0.0]).expect("scalar"),
            &[a],
            Box::new(move |g, _| {
                let n = shape.iter().product();
                vec![Some(ComplexTensor::from_parts(&shape, vec![g.re()[0]; n], vec![0.0; n]).expect("shape"))]
            }),
        )
    }

    /// `Σ |a|²`.
    pub fn sum_abs_sq(&self, a: Var) -> Var {
        let va = self.value(a);
        let s = va.energy();
        self.push(
            ComplexTensor::from_parts(&[1], vec![s], vec![0.0]).expect("scalar"),
            &[a],
            Box::new(move |g, _| vec![Some(va.scale(2.0 * g.re()[0]))]),
        )
    }
}

/// Central finite-difference check of `f` at a single input `x`.
///
/// Returns `max |analytic − numeric| / max(|numeric|, 1e-8)` over every real
/// and imaginary entry of `x`.
pub fn grad_check<F>(f: F, x: &ComplexTensor, eps: f64) -> Result<f64>
where
    F: Fn(&Tape, Var) -> Result<Var>,
{
    grad_check_many(|tape, xs| f(tape, xs[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several inputs at once.
pub fn grad_check_many<F>(f: F, xs: &[ComplexTensor], eps: f64) -> Result<f64>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[ComplexTensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = f(&tape, &vars)?;
        Ok(tape.value(out).re()[0])
    };

    let tape = Tape::new();
    let vars: Vec<Var> = xs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = f(&tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut worst: f64 = 0.0;
    let mut probe = xs.to_vec();
    for (k, x) in xs.iter().enumerate() {
        let analytic = grads.get(&vars[k]).cloned().unwrap_or_else(|| ComplexTensor::zeros(x.shape()));
        for i in 0..x.len() {
            for imag in [false, true] {
                let orig = if imag { x.im()[i] } else { x.re()[i] };
                set_component(&mut probe[k], i, imag, orig + eps);
                let up = eval(&probe)?;
                set_component(&mut probe[k], i, imag, orig - eps);
                let down = eval(&probe)?;
                set_component(&mut probe[k], i, imag, orig);
                let numeric = (up - down) / (2.0 * eps);
                let a = if imag { analytic.im()[i] } else { analytic.re()[i] };
                let err = (a - numeric).abs() / numeric.abs().max(1e-8);
                if err.is_nan() {
                    return Ok(f64::NAN);
                }
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

fn set_component(t: &mut ComplexTensor, i: usize, imag: bool, v: f64) {
    if imag {
        t.im_mut()[i] = v;
    } else {
        t.re_mut()[i] = v;
    }
}
