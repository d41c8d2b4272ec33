//! Operation tape for reverse-mode differentiation.
//!
//! Every operation on a [`Tensor`] appends a node holding the forward value
//! and a closure that maps the output gradient to gradients of its parents.
//! [`Tensor::backward`] walks the tape once in reverse order.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::array::Array;
use crate::error::{NnError, Result};

pub(crate) type BackwardFn = Box<dyn Fn(&Array, &[bool]) -> Vec<Option<Array>>>;

struct Node {
    value: Rc<Array>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

/// Records the operations of one forward pass.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    check_finite: bool,
    first_nonfinite: Cell<Option<(usize, &'static str)>>,
}

impl Tape {
    /// Creates a tape; non-finite checks follow `debug_assertions`.
    pub fn new() -> Rc<Self> {
        Self::with_finite_checks(cfg!(debug_assertions))
    }

    pub fn with_finite_checks(check_finite: bool) -> Rc<Self> {
        Rc::new(Self {
            nodes: RefCell::new(Vec::new()),
            check_finite,
            first_nonfinite: Cell::new(None),
        })
    }

    /// A differentiable input.
    pub fn leaf(self: &Rc<Self>, value: Array) -> Tensor {
        self.insert(value, Vec::new(), None, true, "leaf")
    }

    /// An input that never receives a gradient.
    pub fn constant(self: &Rc<Self>, value: Array) -> Tensor {
        self.insert(value, Vec::new(), None, false, "constant")
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fails if any recorded operation produced NaN or infinity (only tracked
    /// when finite checks are enabled).
    pub fn check_finite(&self) -> Result<()> {
        match self.first_nonfinite.get() {
            Some((node, op)) => Err(NnError::NonFinite { op, node }),
            None => Ok(()),
        }
    }

    pub(crate) fn record<F>(
        self: &Rc<Self>,
        op: &'static str,
        value: Array,
        parents: &[&Tensor],
        backward: F,
    ) -> Tensor
    where
        F: Fn(&Array, &[bool]) -> Vec<Option<Array>> + 'static,
    {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let ids = parents.iter().map(|p| p.id).collect();
        let backward: Option<BackwardFn> = if requires_grad {
            Some(Box::new(backward))
        } else {
            None
        };
        self.insert(value, ids, backward, requires_grad, op)
    }

    fn insert(
        self: &Rc<Self>,
        value: Array,
        parents: Vec<usize>,
        backward: Option<BackwardFn>,
        requires_grad: bool,
        op: &'static str,
    ) -> Tensor {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        if self.check_finite && self.first_nonfinite.get().is_none() && !value.is_finite() {
            self.first_nonfinite.set(Some((id, op)));
        }
        nodes.push(Node {
            value: Rc::new(value),
            parents,
            backward,
            requires_grad,
        });
        Tensor {
            tape: Rc::clone(self),
            id,
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone)]
pub struct Tensor {
    tape: Rc<Tape>,
    id: usize,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tensor {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &Rc<Tape> {
        &self.tape
    }

    pub fn value(&self) -> Rc<Array> {
        Rc::clone(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Back-propagates from this tensor, seeding its gradient with ones
    /// (i.e. differentiating the sum of its elements).
    pub fn backward(&self) -> Gradients {
        let nodes = self.tape.nodes.borrow();
        let mut grads: Vec<Option<Array>> = (0..nodes.len()).map(|_| None).collect();
        grads[self.id] = Some(Array::filled(nodes[self.id].value.shape(), 1.0));
        for id in (0..=self.id).rev() {
            let node = &nodes[id];
            let Some(backward) = node.backward.as_ref() else {
                continue;
            };
            let Some(grad) = grads[id].take() else {
                continue;
            };
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| nodes[p].requires_grad)
                .collect();
            let parent_grads = backward(&grad, &needs);
            for ((&pid, g), need) in node.parents.iter().zip(parent_grads).zip(&needs) {
                let (Some(g), true) = (g, *need) else {
                    continue;
                };
                match &mut grads[pid] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        Gradients { grads }
    }
}

/// Gradients of one backward pass, indexed by tensor.
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    pub fn get(&self, t: &Tensor) -> Option<&Array> {
        self.grads.get(t.id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, t: &Tensor) -> Option<Array> {
        self.grads.get_mut(t.id).and_then(|g| g.take())
    }
}
