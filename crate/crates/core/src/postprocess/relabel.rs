//! Changepoint ordering and class relabeling of stored draws.

use crate::model::ModelState;
use crate::sampler::ChainDraws;

/// Permute active changepoint components of every class so that their
/// means increase, carrying the matching sds, slope changes and member
/// subject effects along.
pub fn order_state_changepoints(s: &mut ModelState) {
    for c in 0..s.classes.len() {
        let n = s.classes[c].n_active;
        if n < 2 {
            continue;
        }
        let class = &s.classes[c];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| class.cp_means[a].total_cmp(&class.cp_means[b]).then(a.cmp(&b)));
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            continue;
        }
        let old = s.classes[c].clone();
        let class = &mut s.classes[c];
        for (dst, &src) in order.iter().enumerate() {
            class.cp_means[dst] = old.cp_means[src];
            class.cp_sds[dst] = old.cp_sds[src];
            class.beta_means[dst + 2] = old.beta_means[src + 2];
            class.beta_sds[dst + 2] = old.beta_sds[src + 2];
        }
        for i in 0..s.membership.len() {
            if s.membership[i] != c {
                continue;
            }
            let e = &mut s.effects[i];
            let (ob, ol) = (e.beta.clone(), e.lambda.clone());
            for (dst, &src) in order.iter().enumerate() {
                e.lambda[dst] = ol[src];
                e.beta[dst + 2] = ob[src + 2];
            }
        }
    }
}

pub fn order_changepoint_labels(draws: &ChainDraws) -> ChainDraws {
    let mut out = draws.clone();
    for t in 0..out.n_draws() {
        let mut s = out.state(t);
        order_state_changepoints(&mut s);
        out.set_state(t, &s);
    }
    out
}

/// Apply a class permutation: old class `c` becomes class `perm[c]`.
pub fn permute_classes(s: &mut ModelState, perm: &[usize]) {
    let classes = s.classes.clone();
    let mixing = s.mixing.clone();
    let indicators = s.indicators.clone();
    for (c, &to) in perm.iter().enumerate() {
        s.classes[to] = classes[c].clone();
        s.mixing[to] = mixing[c];
        s.indicators[to] = indicators[c].clone();
    }
    for m in &mut s.membership {
        *m = perm[*m];
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Permutation maximising agreement between `labels` and `pivot`; ties go
/// to the first permutation in lexicographic order.
pub fn best_permutation(labels: &[usize], pivot: &[usize], perms: &[Vec<usize>], n_classes: usize) -> usize {
    let mut agree = vec![0usize; n_classes * n_classes];
    for (&l, &p) in labels.iter().zip(pivot) {
        agree[l * n_classes + p] += 1;
    }
    let score = |perm: &Vec<usize>| -> usize { perm.iter().enumerate().map(|(c, &to)| agree[c * n_classes + to]).sum() };
    let mut best = (0, score(&perms[0]));
    for (idx, perm) in perms.iter().enumerate().skip(1) {
        let s = score(perm);
        if s > best.1 {
            best = (idx, s);
        }
    }
    best.0
}

fn modal_labels(chains: &[ChainDraws], n_classes: usize) -> Vec<usize> {
    let layout = chains[0].layout;
    (0..layout.n_subjects)
        .map(|i| {
            let mut freq = vec![0usize; n_classes];
            for ch in chains {
                for row in ch.rows() {
                    freq[row[layout.psi(i)] as usize - 1] += 1;
                }
            }
            let mut best = 0;
            for c in 1..n_classes {
                if freq[c] > freq[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn relabel_to_pivot(chains: &[ChainDraws], pivot: &[usize], perms: &[Vec<usize>]) -> Vec<ChainDraws> {
    let n_classes = chains[0].layout.n_classes;
    chains
        .iter()
        .map(|ch| {
            let mut out = ch.clone();
            for t in 0..out.n_draws() {
                let mut s = out.state(t);
                let p = best_permutation(&s.membership, pivot, perms, n_classes);
                if p != 0 {
                    permute_classes(&mut s, &perms[p]);
                    out.set_state(t, &s);
                }
            }
            out
        })
        .collect()
}

/// Equivalence-classes-representatives relabeling across all chains jointly.
///
/// The pivot starts as the per-subject modal label and is recomputed from
/// the relabeled draws until it stops changing.
pub fn relabel_classes_ecr(chains: &[ChainDraws]) -> Vec<ChainDraws> {
    if chains.is_empty() || chains[0].layout.n_classes < 2 {
        return chains.to_vec();
    }
    let n_classes = chains[0].layout.n_classes;
    let perms = permutations(n_classes);
    let mut pivot = modal_labels(chains, n_classes);
    let mut out = relabel_to_pivot(chains, &pivot, &perms);
    for _ in 0..100 {
        let next = modal_labels(&out, n_classes);
        if next == pivot {
            break;
        }
        pivot = next;
        out = relabel_to_pivot(chains, &pivot, &perms);
    }
    out
}
