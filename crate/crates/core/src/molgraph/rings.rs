use super::Molecule;

/// Flags every bond that lies on a cycle (i.e. is not a bridge).
pub(super) fn ring_bond_flags(mol: &Molecule) -> Vec<bool> {
    let n = mol.num_atoms();
    let mut flags = vec![true; mol.num_bonds()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;

    // Iterative DFS: frame = (atom, bond used to enter, next neighbor slot).
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(frame) = stack.last_mut() {
            let (v, parent_bond, slot) = *frame;
            let nbrs = mol.neighbors(v);
            if slot < nbrs.len() {
                frame.2 += 1;
                let (w, bond) = nbrs[slot];
                if bond == parent_bond {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, bond, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        flags[parent_bond] = false;
                    }
                }
            }
        }
    }
    flags
}

/// Enumerates simple cycles of at most `max_len` atoms using only bonds
/// accepted by `allow(atom, bond)`. Each cycle is reported once, starting at
/// its smallest atom index. Stops after `limit` cycles.
pub(super) fn simple_cycles(
    mol: &Molecule,
    allow: &dyn Fn(usize, usize) -> bool,
    max_len: usize,
    limit: usize,
) -> Vec<Vec<usize>> {
    let n = mol.num_atoms();
    let mut cycles = Vec::new();
    let mut on_path = vec![false; n];
    for start in 0..n {
        if cycles.len() >= limit {
            break;
        }
        let mut path = vec![start];
        on_path[start] = true;
        extend(
            mol, allow, start, &mut path, &mut on_path, max_len, limit, &mut cycles,
        );
        on_path[start] = false;
    }
    cycles
}

#[allow(clippy::too_many_arguments)]
fn extend(
    mol: &Molecule,
    allow: &dyn Fn(usize, usize) -> bool,
    start: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    max_len: usize,
    limit: usize,
    out: &mut Vec<Vec<usize>>,
) {
    let v = *path.last().unwrap();
    for &(w, bond) in mol.neighbors(v) {
        if out.len() >= limit {
            return;
        }
        if !allow(w, bond) {
            continue;
        }
        if w == start && path.len() >= 3 {
            // report each cycle in one direction only
            if path[1] < path[path.len() - 1] {
                out.push(path.clone());
            }
            continue;
        }
        if w <= start || on_path[w] || path.len() >= max_len {
            continue;
        }
        on_path[w] = true;
        path.push(w);
        extend(mol, allow, start, path, on_path, max_len, limit, out);
        path.pop();
        on_path[w] = false;
    }
}
