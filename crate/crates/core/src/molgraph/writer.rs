use std::fmt::Write;

use super::{canon, infer_aromatic_hydrogens, Atom, BondOrder, Molecule};

/// Canonical SMILES. Aromatic rings are written in lowercase form; the
/// output parses back to the same graph.
pub fn write_smiles(mol: &Molecule) -> String {
    canon::canonicalize(mol).0
}

fn has_pi(mol: &Molecule, i: usize) -> bool {
    let Some(kekule) = mol.kekule_orders() else {
        return false;
    };
    mol.neighbors(i)
        .iter()
        .any(|&(_, b)| mol.bond(b).order == BondOrder::Aromatic && kekule[b] == BondOrder::Double)
}

/// True when the bare organic-subset spelling reproduces this atom.
fn bare_spelling_ok(mol: &Molecule, i: usize) -> bool {
    let atom = mol.atom(i);
    if !atom.element.is_organic_subset() || atom.formal_charge != 0 || atom.isotope.is_some() {
        return false;
    }
    let units: u32 = mol
        .neighbors(i)
        .iter()
        .map(|&(_, b)| mol.bond(b).order.units())
        .sum();
    let bare = Atom {
        explicit_h: None,
        ..atom.clone()
    };
    let (h, pi) = infer_aromatic_hydrogens(&bare, units);
    h == mol.hydrogens(i) && (!atom.aromatic || pi == has_pi(mol, i))
}

pub(super) fn atom_token(mol: &Molecule, i: usize, out: &mut String) {
    let atom = mol.atom(i);
    let symbol = atom.element.symbol();
    if bare_spelling_ok(mol, i) {
        if atom.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        let _ = write!(out, "{iso}");
    }
    if atom.aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    match mol.hydrogens(i) {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}

pub(super) fn bond_symbol(mol: &Molecule, bond: usize) -> &'static str {
    let b = mol.bond(bond);
    match b.order {
        BondOrder::Single if mol.atom(b.a).aromatic && mol.atom(b.b).aromatic => "-",
        BondOrder::Single | BondOrder::Aromatic => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

struct Plan {
    children: Vec<Vec<(usize, usize)>>,
    /// (partner, bond) ring closures opened at an atom.
    opens: Vec<Vec<(usize, usize)>>,
    /// (partner, bond) ring closures closed at an atom.
    closes: Vec<Vec<(usize, usize)>>,
    roots: Vec<usize>,
}

fn plan(mol: &Molecule, ranks: &[u32]) -> Plan {
    let n = mol.num_atoms();
    let sorted_nbrs: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            let mut v = mol.neighbors(i).to_vec();
            v.sort_by_key(|&(w, _)| ranks[w]);
            v
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);

    let mut p = Plan {
        children: vec![Vec::new(); n],
        opens: vec![Vec::new(); n],
        closes: vec![Vec::new(); n],
        roots: Vec::new(),
    };
    let mut visited = vec![false; n];
    let mut used_bond = vec![false; mol.num_bonds()];
    for &root in &order {
        if visited[root] {
            continue;
        }
        p.roots.push(root);
        visited[root] = true;
        // (atom, next neighbor slot)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(frame) = stack.last_mut() {
            let (v, slot) = *frame;
            if slot >= sorted_nbrs[v].len() {
                stack.pop();
                continue;
            }
            frame.1 += 1;
            let (w, b) = sorted_nbrs[v][slot];
            if used_bond[b] {
                continue;
            }
            used_bond[b] = true;
            if visited[w] {
                // back edge: w was reached first and opens the ring
                p.opens[w].push((v, b));
                p.closes[v].push((w, b));
            } else {
                visited[w] = true;
                p.children[v].push((w, b));
                stack.push((w, 0));
            }
        }
    }
    for list in p.opens.iter_mut().chain(p.closes.iter_mut()) {
        list.sort_by_key(|&(w, _)| ranks[w]);
    }
    p
}

fn push_ring_digit(out: &mut String, d: u32) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d}");
    }
}

/// SMILES for a given total atom order (`ranks` must be distinct).
pub(super) fn emit(mol: &Molecule, ranks: &[u32]) -> String {
    let p = plan(mol, ranks);
    let mut out = String::new();
    let mut digit_of_bond: Vec<Option<u32>> = vec![None; mol.num_bonds()];
    let mut in_use: Vec<bool> = vec![false; 100];

    enum Step {
        Atom(usize, usize),
        Open,
        Close,
    }
    for (k, &root) in p.roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        let mut stack = vec![Step::Atom(root, usize::MAX)];
        while let Some(step) = stack.pop() {
            let (v, via) = match step {
                Step::Open => {
                    out.push('(');
                    continue;
                }
                Step::Close => {
                    out.push(')');
                    continue;
                }
                Step::Atom(v, via) => (v, via),
            };
            if via != usize::MAX {
                out.push_str(bond_symbol(mol, via));
            }
            atom_token(mol, v, &mut out);
            let mut freed_here = Vec::new();
            for &(_, b) in &p.closes[v] {
                let d = digit_of_bond[b].expect("ring opened before it closes");
                push_ring_digit(&mut out, d);
                in_use[d as usize] = false;
                freed_here.push(d);
            }
            for &(_, b) in &p.opens[v] {
                let d = (1..100u32)
                    .find(|&d| !in_use[d as usize] && !freed_here.contains(&d))
                    .expect("fewer than 99 open rings");
                in_use[d as usize] = true;
                digit_of_bond[b] = Some(d);
                out.push_str(bond_symbol(mol, b));
                push_ring_digit(&mut out, d);
            }
            let children = &p.children[v];
            // pushed in reverse so the first child is emitted first
            for (idx, &(w, b)) in children.iter().enumerate().rev() {
                let last = idx + 1 == children.len();
                if last {
                    stack.push(Step::Atom(w, b));
                } else {
                    stack.push(Step::Close);
                    stack.push(Step::Atom(w, b));
                    stack.push(Step::Open);
                }
            }
        }
    }
    out
}
