//! Node-local interval computations: π̂, λ̂, BEL̂ and the two outgoing
//! message kinds.
//!
//! Inputs are normalized interval vectors. The `*_raw` forms return the
//! unnormalized products; the public forms normalize them.

use crate::interval::{ar_dot_slices, Interval, IntervalError, IntervalVector};
use crate::network::{Node, Odometer};

/// Entrywise product of the messages over their joint index, first message
/// slowest. Matches CPT row order when the messages are in parent order.
fn joint_product(msgs: &[&IntervalVector]) -> Vec<Interval> {
    let mut acc = vec![Interval::ONE];
    for m in msgs {
        acc = acc.iter().flat_map(|a| m.iter().map(move |b| a.mul_nonneg(*b))).collect();
    }
    acc
}

fn as_points(row: &[f64], out: &mut Vec<Interval>) {
    out.clear();
    out.extend(row.iter().map(|&p| Interval::point(p)));
}

pub(crate) fn pi_raw(node: &Node, parent_msgs: &[&IntervalVector]) -> Result<IntervalVector, IntervalError> {
    assert_eq!(parent_msgs.len(), node.parents().len(), "one π message per parent");
    if parent_msgs.is_empty() {
        return IntervalVector::point(node.row(0));
    }
    let b = joint_product(parent_msgs);
    assert_eq!(b.len(), node.row_count(), "π message lengths do not match the CPT");
    let mut column = Vec::with_capacity(b.len());
    let out = (0..node.state_count())
        .map(|x| {
            column.clear();
            column.extend((0..node.row_count()).map(|r| Interval::point(node.prob(r, x))));
            ar_dot_slices(&column, &b)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IntervalVector::from_entries(out))
}

pub(crate) fn lambda_raw(states: usize, observed: Option<usize>, child_msgs: &[&IntervalVector]) -> IntervalVector {
    let mut out = match observed {
        Some(s) => IntervalVector::indicator(states, s).into_entries(),
        None => vec![Interval::ONE; states],
    };
    for m in child_msgs {
        assert_eq!(m.len(), states, "λ message length does not match the node");
        for (o, v) in out.iter_mut().zip(m.iter()) {
            *o = o.mul_nonneg(*v);
        }
    }
    IntervalVector::from_entries(out)
}

pub(crate) fn product_raw(a: &IntervalVector, b: &IntervalVector) -> IntervalVector {
    assert_eq!(a.len(), b.len());
    IntervalVector::from_entries(a.iter().zip(b.iter()).map(|(x, y)| x.mul_nonneg(*y)).collect())
}

/// Unnormalized λ message to parent slot `parent`. The entry of
/// `parent_msgs` at that slot only supplies the parent's state count.
pub(crate) fn lambda_msg_raw(
    node: &Node,
    parent: usize,
    lambda: &IntervalVector,
    parent_msgs: &[&IntervalVector],
) -> Result<IntervalVector, IntervalError> {
    assert_eq!(parent_msgs.len(), node.parents().len(), "one π message per parent");
    assert!(parent < parent_msgs.len());
    let radices: Vec<usize> = parent_msgs.iter().map(|m| m.len()).collect();
    assert_eq!(radices.iter().product::<usize>(), node.row_count());

    let mut scratch = Vec::new();
    let inner = (0..node.row_count())
        .map(|r| {
            as_points(node.row(r), &mut scratch);
            ar_dot_slices(&scratch, lambda.entries())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut strides = vec![1; radices.len()];
    for i in (0..radices.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * radices[i + 1];
    }
    let others: Vec<usize> = (0..radices.len()).filter(|&i| i != parent).collect();
    let other_msgs: Vec<&IntervalVector> = others.iter().map(|&i| parent_msgs[i]).collect();
    let b = joint_product(&other_msgs);
    let mut a = Vec::with_capacity(b.len());
    let out = (0..radices[parent])
        .map(|y| {
            a.clear();
            let mut od = Odometer::new(others.iter().map(|&i| radices[i]).collect());
            loop {
                let row = y * strides[parent]
                    + others.iter().zip(od.digits()).map(|(&i, &d)| d * strides[i]).sum::<usize>();
                a.push(inner[row]);
                if !od.advance() {
                    break;
                }
            }
            ar_dot_slices(&a, &b)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IntervalVector::from_entries(out))
}

/// Normalizes a vector whose realizations already sum to one, keeping
/// whichever bound is tighter.
fn renormalize_unit_mass(raw: &IntervalVector) -> Result<IntervalVector, IntervalError> {
    let n = raw.normalize()?;
    Ok(n.intersect(raw).unwrap_or(n))
}

/// π̂(x): A/R over joint parent configurations of the CPT column against the
/// product of the parents' π messages.
pub fn pi_hat(node: &Node, parent_msgs: &[&IntervalVector]) -> Result<IntervalVector, IntervalError> {
    renormalize_unit_mass(&pi_raw(node, parent_msgs)?)
}

/// λ̂(x): the evidence indicator (if observed) times every child λ message.
pub fn lambda_hat(
    states: usize,
    observed: Option<usize>,
    child_msgs: &[&IntervalVector],
) -> Result<IntervalVector, IntervalError> {
    lambda_raw(states, observed, child_msgs).normalize()
}

/// BEL̂(x) = λ̂(x) π̂(x), normalized.
pub fn bel_hat(pi: &IntervalVector, lambda: &IntervalVector) -> Result<IntervalVector, IntervalError> {
    product_raw(pi, lambda).normalize()
}

/// π message to one child: π̂ times the evidence indicator and the λ
/// messages of the other children.
pub fn pi_msg(
    pi: &IntervalVector,
    observed: Option<usize>,
    other_child_msgs: &[&IntervalVector],
) -> Result<IntervalVector, IntervalError> {
    product_raw(pi, &lambda_raw(pi.len(), observed, other_child_msgs)).normalize()
}

/// λ message to parent slot `parent`: for each parent state, an inner A/R
/// over the node's states against λ̂ and an outer A/R over the other
/// parents' joint configurations against their π messages.
pub fn lambda_msg(
    node: &Node,
    parent: usize,
    lambda: &IntervalVector,
    parent_msgs: &[&IntervalVector],
) -> Result<IntervalVector, IntervalError> {
    lambda_msg_raw(node, parent, lambda, parent_msgs)?.normalize()
}

/// A message split into a mass and a normalized shape. `varies` marks
/// quantities that depend on the cutset instance being evaluated; the mass
/// of anything else is a common factor and is pinned to one.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Scaled {
    pub scale: Interval,
    pub dist: IntervalVector,
    pub varies: bool,
}

impl Scaled {
    pub(crate) fn fixed(dist: IntervalVector) -> Self {
        Scaled { scale: Interval::ONE, dist, varies: false }
    }

    fn from_raw(raw: IntervalVector, scale: Interval, varies: bool) -> Result<Self, IntervalError> {
        let dist = raw.normalize()?;
        let scale = if varies { scale.mul_nonneg(raw.total()) } else { Interval::ONE };
        Ok(Scaled { scale, dist, varies })
    }
}

/// What to compute at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Output {
    Bel,
    /// π message to the child in this slot of the node's child list.
    PiTo(usize),
    /// λ message to the parent in this slot of the node's parent list.
    LambdaTo(usize),
}

/// Everything a node-local computation reads. Child slots holding `None`
/// carry no information (a constant λ) and are skipped.
pub(crate) struct Local<'a> {
    pub node: &'a Node,
    pub observed: Option<usize>,
    pub observed_varies: bool,
    pub parents: Vec<&'a Scaled>,
    pub children: Vec<Option<&'a Scaled>>,
}

fn combine_scales<'a>(items: impl Iterator<Item = &'a Scaled>) -> (Interval, bool) {
    items.fold((Interval::ONE, false), |(s, v), m| {
        if m.varies {
            (s.mul_nonneg(m.scale), true)
        } else {
            (s, v)
        }
    })
}

impl Local<'_> {
    fn pi(&self) -> Result<Scaled, IntervalError> {
        let dists: Vec<&IntervalVector> = self.parents.iter().map(|m| &m.dist).collect();
        let raw = pi_raw(self.node, &dists)?;
        let (scale, varies) = combine_scales(self.parents.iter().copied());
        // Parent messages are distributions, so π̂ carries exactly their mass.
        let dist = renormalize_unit_mass(&raw)?;
        Ok(Scaled { scale: if varies { scale } else { Interval::ONE }, dist, varies })
    }

    /// Evidence indicator times the λ messages of every child except `skip`.
    fn lambda_part(&self, skip: Option<usize>) -> (IntervalVector, Interval, bool) {
        let msgs: Vec<&Scaled> = self
            .children
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != skip)
            .filter_map(|(_, m)| *m)
            .collect();
        let dists: Vec<&IntervalVector> = msgs.iter().map(|m| &m.dist).collect();
        let raw = lambda_raw(self.node.state_count(), self.observed, &dists);
        let (scale, varies) = combine_scales(msgs.into_iter());
        (raw, scale, varies || (self.observed.is_some() && self.observed_varies))
    }

    pub(crate) fn compute(&self, out: Output) -> Result<Scaled, IntervalError> {
        match out {
            Output::Bel | Output::PiTo(_) => {
                let skip = match out {
                    Output::PiTo(j) => Some(j),
                    _ => None,
                };
                let pi = self.pi()?;
                let (lambda, ls, lv) = self.lambda_part(skip);
                let raw = product_raw(&pi.dist, &lambda);
                Scaled::from_raw(raw, pi.scale.mul_nonneg(ls), pi.varies || lv)
            }
            Output::LambdaTo(i) => {
                let (lambda, ls, lv) = self.lambda_part(None);
                let lambda_hat = Scaled::from_raw(lambda, ls, lv)?;
                let dists: Vec<&IntervalVector> = self.parents.iter().map(|m| &m.dist).collect();
                let raw = lambda_msg_raw(self.node, i, &lambda_hat.dist, &dists)?;
                let (ps, pv) = combine_scales(
                    self.parents.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, m)| *m),
                );
                Scaled::from_raw(raw, lambda_hat.scale.mul_nonneg(ps), lambda_hat.varies || pv)
            }
        }
    }
}
