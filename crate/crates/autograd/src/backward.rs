use std::collections::{HashMap, HashSet};

use crate::tensor::{GradModeGuard, Tensor};

/// Gradient of `output` (summed, if not scalar) with respect to each of
/// `inputs`. Inputs that `output` does not depend on get zeros.
///
/// With `create_graph`, the returned gradients are themselves part of a graph
/// and can be differentiated again.
pub fn grad(output: &Tensor, inputs: &[&Tensor], create_graph: bool) -> Vec<Tensor> {
    grad_with_seed(output, &Tensor::ones(output.shape()), inputs, create_graph)
}

/// Vector-Jacobian product of `output` with `seed`.
pub fn grad_with_seed(output: &Tensor, seed: &Tensor, inputs: &[&Tensor], create_graph: bool) -> Vec<Tensor> {
    assert_eq!(seed.shape(), output.shape(), "seed shape must match output");
    let _mode = GradModeGuard::set(create_graph);

    let mut input_slots: HashMap<u64, Vec<usize>> = HashMap::new();
    for (slot, t) in inputs.iter().enumerate() {
        input_slots.entry(t.id()).or_default().push(slot);
    }
    let mut results: Vec<Option<Tensor>> = vec![None; inputs.len()];

    if output.requires_grad() {
        let order = reachable_nodes(output);
        let relevant = leads_to_inputs(&order, &input_slots);

        let mut pending: HashMap<u64, Tensor> = HashMap::new();
        pending.insert(output.id(), seed.clone());

        // Node ids grow with creation, so descending id is a reverse
        // topological order.
        for node in order.iter().rev() {
            if !relevant.contains(&node.id()) {
                continue;
            }
            let Some(g) = pending.remove(&node.id()) else {
                continue;
            };
            if let Some(slots) = input_slots.get(&node.id()) {
                for &slot in slots {
                    results[slot] = Some(g.clone());
                }
            }
            let Some(grad_fn) = &node.0.grad_fn else {
                continue;
            };
            let needs: Vec<bool> = grad_fn
                .parents
                .iter()
                .map(|p| p.requires_grad() && relevant.contains(&p.id()))
                .collect();
            if !needs.iter().any(|&n| n) {
                continue;
            }
            let parent_grads = (grad_fn.backward)(&g, node, &needs);
            debug_assert_eq!(parent_grads.len(), grad_fn.parents.len(), "{}", grad_fn.name);
            for ((parent, pg), need) in grad_fn.parents.iter().zip(parent_grads).zip(&needs) {
                let (Some(pg), true) = (pg, *need) else {
                    continue;
                };
                debug_assert_eq!(pg.shape(), parent.shape(), "grad shape from {}", grad_fn.name);
                match pending.remove(&parent.id()) {
                    Some(acc) => pending.insert(parent.id(), acc.add(&pg)),
                    None => pending.insert(parent.id(), pg),
                };
            }
        }
    }

    results
        .into_iter()
        .zip(inputs)
        .map(|(g, input)| g.unwrap_or_else(|| Tensor::zeros(input.shape())))
        .collect()
}

/// All graph nodes reachable from `output` that require grad, sorted by id.
fn reachable_nodes(output: &Tensor) -> Vec<Tensor> {
    let mut seen = HashSet::new();
    let mut stack = vec![output.clone()];
    let mut nodes = Vec::new();
    while let Some(t) = stack.pop() {
        if !t.requires_grad() || !seen.insert(t.id()) {
            continue;
        }
        if let Some(grad_fn) = &t.0.grad_fn {
            stack.extend(
                grad_fn
                    .parents
                    .iter()
                    .filter(|p| p.requires_grad() && !seen.contains(&p.id()))
                    .cloned(),
            );
        }
        nodes.push(t);
    }
    nodes.sort_by_key(Tensor::id);
    nodes
}

/// Ids of nodes (in `order`) from which some input can be reached.
fn leads_to_inputs(order: &[Tensor], inputs: &HashMap<u64, Vec<usize>>) -> HashSet<u64> {
    let mut relevant = HashSet::new();
    for node in order {
        let hit = inputs.contains_key(&node.id())
            || node
                .0
                .grad_fn
                .as_ref()
                .is_some_and(|g| g.parents.iter().any(|p| relevant.contains(&p.id())));
        if hit {
            relevant.insert(node.id());
        }
    }
    relevant
}
